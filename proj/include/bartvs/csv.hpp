#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "bartvs/dataset.hpp"

namespace bartvs {

struct CsvOptions {
  std::string response = "y";
  /// Column name -> type, overriding inference.
  std::map<std::string, PredictorType> type_overrides;
};

/// One record split into fields; handles quoted fields, doubled quotes, and
/// CRLF line ends. Returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

/// Header row required. Every non-response column becomes a predictor; types
/// are inferred unless overridden. Throws std::runtime_error on a bad cell,
/// ragged row, or unknown column.
Dataset read_csv(std::istream& in, const CsvOptions& opts);
Dataset load_csv(const std::string& path, const CsvOptions& opts);

/// "binary" / "continuous" (also "b" / "c").
PredictorType parse_predictor_type(const std::string& name);

}  // namespace bartvs
