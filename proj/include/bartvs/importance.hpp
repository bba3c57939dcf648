#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bartvs/dataset.hpp"
#include "bartvs/sampler.hpp"

namespace bartvs {

enum class ImportanceKind { Vip, VipApprox, WithinTypeVip, Mi, Mpvip };

const char* to_string(ImportanceKind kind);
std::optional<ImportanceKind> parse_importance_kind(std::string_view name);

struct ImportanceReport {
  ImportanceKind kind = ImportanceKind::Vip;
  std::vector<double> scores;
  std::vector<PredictorType> types;
  std::vector<std::string> names;
  std::size_t num_draws = 0;
  std::uint64_t fingerprint = 0;
};

/// Mean over draws of each predictor's share of that draw's splits. A draw
/// without splits contributes 1/p to every predictor.
ImportanceReport vip(const Chain& chain);
/// Pooled share: total splits on j over total splits. Throws if there are none.
ImportanceReport vip_approx(const Chain& chain);

struct LemmaCheck {
  std::vector<double> gap;    // |vip_approx - vip|
  std::vector<double> bound;  // sqrt(delta1_j) * delta2
  std::vector<double> delta1;
  double delta2 = 0.0;        // coefficient of variation of per-draw split totals
};
/// Evaluates both sides of the pooled-versus-averaged VIP bound and throws
/// std::logic_error if any predictor violates it. Every draw must have splits.
LemmaCheck lemma_bound_check(const Chain& chain);

/// VIP with the denominator restricted to splits on predictors of the same
/// type. A type unused in a draw contributes 0 for that draw.
ImportanceReport within_type_vip(const Chain& chain, std::span<const PredictorType> types);
ImportanceReport within_type_vip(const Chain& chain);

/// Per draw: average accepted BIRTH ratio of each predictor's splits (0 when
/// unused), normalized to sum to 1; then averaged over draws.
ImportanceReport metropolis_importance(const Chain& chain);

/// Fraction of draws in which each predictor is used at least once.
ImportanceReport mpvip(const Chain& chain);

ImportanceReport importance(const Chain& chain, ImportanceKind kind);

/// Scores indexed [dataset][predictor][repetition].
using ScoreTensor = std::vector<std::vector<std::vector<double>>>;

struct NestedVariances {
  /// Across repetitions, per dataset and predictor: [dataset][predictor].
  std::vector<std::vector<double>> within;
  /// Across datasets of the repetition means, per predictor.
  std::vector<double> across_datasets;
  /// Across predictors of the grand per-predictor means.
  double across_predictors = 0.0;
};
/// Sample variances (divisor count - 1). Needs >= 2 datasets, >= 2
/// predictors, and >= 2 repetitions with a rectangular layout.
NestedVariances nested_variances(const ScoreTensor& scores);

}  // namespace bartvs
