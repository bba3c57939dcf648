#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bartvs {

enum class PredictorType { Continuous, Binary };
enum class ResponseKind { Continuous, Binary };

const char* to_string(PredictorType type);
const char* to_string(ResponseKind kind);

/// Dense column-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

  std::span<const double> col(std::size_t j) const {
    return {data_.data() + j * rows_, rows_};
  }
  std::span<double> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }

  std::vector<double> row(std::size_t i) const;

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Observations, response, and per-column predictor metadata. Indices are
/// zero-based everywhere in the library; names carry the user-facing labels.
struct Dataset {
  Matrix x;
  std::vector<double> y;
  std::vector<PredictorType> types;
  std::vector<std::string> names;
  ResponseKind response = ResponseKind::Continuous;
  /// Ground-truth relevant predictors (zero-based) when known.
  std::vector<int> relevant;

  std::size_t n() const { return y.size(); }
  std::size_t p() const { return x.cols(); }

  /// Throws std::invalid_argument when shapes disagree, values are non-finite,
  /// or a binary response holds values other than 0/1.
  void validate() const;

  /// Copy restricted to the given columns, in the given order.
  Dataset select_columns(std::span<const int> columns) const;
  /// Copy restricted to the given rows.
  Dataset select_rows(std::span<const std::size_t> rows) const;
  Dataset with_response(std::vector<double> new_y) const;

  /// FNV-1a over the raw bytes of x, y, and type tags.
  std::uint64_t fingerprint() const;
};

/// Two or fewer distinct values make a column binary.
PredictorType infer_type(std::span<const double> column);
/// Binary response iff every value is exactly 0 or 1.
bool is_binary_response(std::span<const double> y);

std::vector<std::string> default_names(std::size_t p);

}  // namespace bartvs
