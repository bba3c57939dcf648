#include "bartvs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace bartvs {

const char* to_string(PredictorType type) {
  return type == PredictorType::Binary ? "binary" : "continuous";
}

const char* to_string(ResponseKind kind) {
  return kind == ResponseKind::Binary ? "binary" : "continuous";
}

std::vector<double> Matrix::row(std::size_t i) const {
  std::vector<double> out(cols_);
  for (std::size_t j = 0; j < cols_; ++j) out[j] = (*this)(i, j);
  return out;
}

void Dataset::validate() const {
  if (x.rows() != y.size()) {
    throw std::invalid_argument("dataset: predictor rows (" + std::to_string(x.rows()) +
                                ") do not match response length (" +
                                std::to_string(y.size()) + ")");
  }
  if (types.size() != x.cols()) {
    throw std::invalid_argument("dataset: type tags do not match predictor count");
  }
  if (!names.empty() && names.size() != x.cols()) {
    throw std::invalid_argument("dataset: names do not match predictor count");
  }
  for (double v : x.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite predictor value");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite response value");
  }
  if (response == ResponseKind::Binary && !is_binary_response(y)) {
    throw std::invalid_argument("dataset: binary response must contain only 0 and 1");
  }
  for (int j : relevant) {
    if (j < 0 || static_cast<std::size_t>(j) >= x.cols()) {
      throw std::invalid_argument("dataset: relevant index out of range");
    }
  }
}

Dataset Dataset::select_columns(std::span<const int> columns) const {
  Dataset out;
  out.x = Matrix(n(), columns.size());
  out.y = y;
  out.response = response;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const int j = columns[c];
    if (j < 0 || static_cast<std::size_t>(j) >= p()) {
      throw std::out_of_range("select_columns: column index out of range");
    }
    auto src = x.col(static_cast<std::size_t>(j));
    std::copy(src.begin(), src.end(), out.x.col(c).begin());
    out.types.push_back(types[static_cast<std::size_t>(j)]);
    if (!names.empty()) out.names.push_back(names[static_cast<std::size_t>(j)]);
    if (std::find(relevant.begin(), relevant.end(), j) != relevant.end()) {
      out.relevant.push_back(static_cast<int>(c));
    }
  }
  return out;
}

Dataset Dataset::select_rows(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = Matrix(rows.size(), p());
  out.y.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n()) throw std::out_of_range("select_rows: row index out of range");
    out.y[r] = y[rows[r]];
    for (std::size_t j = 0; j < p(); ++j) out.x(r, j) = x(rows[r], j);
  }
  out.types = types;
  out.names = names;
  out.response = response;
  out.relevant = relevant;
  return out;
}

Dataset Dataset::with_response(std::vector<double> new_y) const {
  if (new_y.size() != n()) throw std::invalid_argument("with_response: length mismatch");
  Dataset out = *this;
  out.y = std::move(new_y);
  return out;
}

namespace {

void fnv_mix(std::uint64_t& h, const void* bytes, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

std::uint64_t Dataset::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::uint64_t dims[2] = {x.rows(), x.cols()};
  fnv_mix(h, dims, sizeof(dims));
  fnv_mix(h, x.data().data(), x.data().size() * sizeof(double));
  fnv_mix(h, y.data(), y.size() * sizeof(double));
  for (auto t : types) {
    const unsigned char b = t == PredictorType::Binary ? 1 : 0;
    fnv_mix(h, &b, 1);
  }
  return h;
}

PredictorType infer_type(std::span<const double> column) {
  if (column.empty()) return PredictorType::Binary;
  const double first = column.front();
  bool have_second = false;
  double second = 0.0;
  for (double v : column) {
    if (v == first) continue;
    if (!have_second) {
      have_second = true;
      second = v;
    } else if (v != second) {
      return PredictorType::Continuous;
    }
  }
  return PredictorType::Binary;
}

bool is_binary_response(std::span<const double> y) {
  return std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::vector<std::string> default_names(std::size_t p) {
  std::vector<std::string> names;
  names.reserve(p);
  for (std::size_t j = 0; j < p; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

}  // namespace bartvs
