#include "bartvs/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace bartvs {

bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string cur;
  bool quoted = false;
  bool after_quote = false;
  for (;;) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      if (quoted) throw std::runtime_error("csv: unterminated quoted field");
      break;
    }
    const char ch = static_cast<char>(c);
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get();
          cur.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        cur.push_back(ch);
      }
      continue;
    }
    if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      after_quote = false;
    } else if (ch == '\n') {
      break;
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else if (ch == '"' && cur.empty() && !after_quote) {
      quoted = true;
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::move(cur));
  return true;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, std::size_t line, const std::string& column) {
  const std::string s = trim(raw);
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw std::runtime_error("csv: non-numeric cell '" + raw + "' at line " + std::to_string(line) + ", column '" +
                             column + "'");
  }
  return v;
}

}  // namespace

PredictorType parse_predictor_type(const std::string& name) {
  if (name == "binary" || name == "b") return PredictorType::Binary;
  if (name == "continuous" || name == "c") return PredictorType::Continuous;
  throw std::invalid_argument("unknown predictor type '" + name + "'");
}

Dataset read_csv(std::istream& in, const CsvOptions& opts) {
  std::vector<std::string> header;
  if (!read_csv_record(in, header)) throw std::runtime_error("csv: missing header row");
  for (auto& h : header) h = trim(h);
  int response = -1;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == opts.response) {
      if (response >= 0) throw std::runtime_error("csv: duplicate column '" + opts.response + "'");
      response = static_cast<int>(j);
    }
  }
  if (response < 0) throw std::runtime_error("csv: unknown column '" + opts.response + "'");
  for (const auto& [name, type] : opts.type_overrides) {
    bool found = false;
    for (std::size_t j = 0; j < header.size(); ++j) found = found || (header[j] == name && static_cast<int>(j) != response);
    if (!found) throw std::runtime_error("csv: unknown column '" + name + "'");
  }

  const std::size_t cols = header.size();
  std::vector<std::vector<double>> values(cols);
  std::vector<std::string> fields;
  std::size_t line = 1;
  while (read_csv_record(in, fields)) {
    ++line;
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    if (fields.size() != cols) {
      throw std::runtime_error("csv: line " + std::to_string(line) + " has " + std::to_string(fields.size()) +
                               " fields, header has " + std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j) values[j].push_back(parse_cell(fields[j], line, header[j]));
  }
  const std::size_t n = values[0].size();
  if (n == 0) throw std::runtime_error("csv: no data rows");

  Dataset d;
  d.x = Matrix(n, cols - 1);
  std::size_t out = 0;
  for (std::size_t j = 0; j < cols; ++j) {
    if (static_cast<int>(j) == response) continue;
    auto col = d.x.col(out++);
    std::copy(values[j].begin(), values[j].end(), col.begin());
    d.names.push_back(header[j]);
    const auto it = opts.type_overrides.find(header[j]);
    d.types.push_back(it != opts.type_overrides.end() ? it->second : infer_type(values[j]));
  }
  d.y = std::move(values[static_cast<std::size_t>(response)]);
  d.response = is_binary_response(d.y) ? ResponseKind::Binary : ResponseKind::Continuous;
  d.validate();
  return d;
}

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  return read_csv(in, opts);
}

}  // namespace bartvs
