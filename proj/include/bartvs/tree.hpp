#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bartvs/dataset.hpp"
#include "bartvs/rng.hpp"

namespace bartvs {

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

struct BirthPartition;

/// Candidate split values per predictor. Routing rule: x < cut goes left.
class CutpointGrid {
 public:
  CutpointGrid() = default;
  /// Cutpoints must be strictly increasing within each predictor.
  explicit CutpointGrid(std::vector<std::vector<double>> cuts);

  /// Continuous predictors get `num_cuts` evenly spaced interior points of the
  /// observed range; binary predictors get the midpoint of their two values;
  /// constant columns get none.
  static CutpointGrid build(const Dataset& data, int num_cuts = 100);

  std::size_t num_predictors() const { return cuts_.size(); }
  std::span<const double> cuts(std::size_t j) const { return cuts_[j]; }
  /// Number of cutpoints <= x, so that x < cuts(j)[g] iff rank(j, x) <= g.
  std::uint16_t rank(std::size_t j, double x) const;

 private:
  std::vector<std::vector<double>> cuts_;
};

/// Training predictors replaced by their grid ranks (column-major).
class BinnedPredictors {
 public:
  BinnedPredictors(const Matrix& x, CutpointGrid grid);

  std::size_t n() const { return n_; }
  std::size_t p() const { return p_; }
  std::span<const std::uint16_t> col(std::size_t j) const { return {ranks_.data() + j * n_, n_}; }
  std::uint16_t rank(std::size_t i, std::size_t j) const { return ranks_[j * n_ + i]; }
  const CutpointGrid& grid() const { return grid_; }

 private:
  std::size_t n_;
  std::size_t p_;
  std::vector<std::uint16_t> ranks_;
  CutpointGrid grid_;
};

struct SplitRule {
  int var = -1;
  int cut = -1;        // index into the predictor's cutpoints
  double value = 0.0;  // the cutpoint itself
};

struct Node {
  NodeId parent = kNoNode;
  NodeId left = kNoNode;
  NodeId right = kNoNode;
  int depth = 0;
  SplitRule rule;
  double mu = 0.0;
  /// Truncated Metropolis ratio recorded when this split was born; 0 if none.
  double birth_ratio = 0.0;
  bool alive = true;

  bool terminal() const { return left == kNoNode; }
};

/// Proper binary regression tree stored in an arena; node 0 is the root.
class Tree {
 public:
  explicit Tree(std::size_t num_predictors = 0, double mu = 0.0);

  NodeId root() const { return 0; }
  const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
  std::size_t arena_size() const { return nodes_.size(); }
  std::size_t num_predictors() const { return num_predictors_; }

  int num_terminal() const { return num_terminal_; }
  int num_internal() const { return num_terminal_ - 1; }
  std::vector<NodeId> terminal_nodes() const;
  std::vector<NodeId> internal_nodes() const;
  /// Internal nodes whose two children are both terminal.
  std::vector<NodeId> second_generation_nodes() const;
  bool is_second_generation(NodeId id) const;

  /// Turns terminal `leaf` into a split; returns (left, right) children.
  std::pair<NodeId, NodeId> grow(NodeId leaf, SplitRule rule, double birth_ratio = 0.0);
  /// Collapses a second-generation node back into a terminal node.
  void prune(NodeId id);
  void set_mu(NodeId leaf, double mu);

  NodeId leaf_for(std::span<const double> x) const;
  /// Leaf value reached by x. Throws std::invalid_argument on dimension mismatch.
  double evaluate(std::span<const double> x) const;

  /// Throws std::logic_error describing the first violated structural invariant.
  void check_invariants() const;

  /// Adds split counts and birth-ratio sums per predictor into the spans.
  void accumulate_splits(std::span<int> counts, std::span<double> accept_sums) const;

 private:
  NodeId allocate();

  std::vector<Node> nodes_;
  std::vector<NodeId> free_;
  std::size_t num_predictors_;
  int num_terminal_ = 1;
};

/// The training rows that land in each terminal node, and whether that node
/// admits at least one valid split.
class NodeMembership {
 public:
  NodeMembership(const Tree& tree, const BinnedPredictors& data);

  std::span<const std::uint32_t> members(NodeId id) const;
  bool growable(NodeId id) const { return growable_[static_cast<std::size_t>(id)] != 0; }
  /// Growable terminal nodes of the tree this membership tracks.
  int num_growable() const { return num_growable_; }

  /// Mirrors Tree::grow.
  void apply_grow(NodeId leaf, NodeId left, NodeId right, const SplitRule& rule,
                  const BinnedPredictors& data);
  /// Mirrors Tree::grow using a partition already computed for the proposal.
  void apply_grow(NodeId leaf, NodeId left, NodeId right, BirthPartition&& partition);
  /// Mirrors Tree::prune.
  void apply_prune(NodeId id, NodeId left, NodeId right, const BinnedPredictors& data);

 private:
  void ensure_size(std::size_t size);
  void set_terminal(NodeId id, std::vector<std::uint32_t> rows, const BinnedPredictors& data);

  std::vector<std::vector<std::uint32_t>> members_;
  std::vector<std::uint8_t> growable_;
  int num_growable_ = 0;
};

/// Predictors with at least one cutpoint leaving both sides non-empty.
std::vector<int> valid_predictors(std::span<const std::uint32_t> rows, const BinnedPredictors& data);
/// True iff valid_predictors(rows, data) would be non-empty.
bool any_valid_split(std::span<const std::uint32_t> rows, const BinnedPredictors& data);
/// Smallest and largest rank of predictor j over the rows; valid cut indices
/// are [lo, hi - 1], so n_adj = hi - lo.
std::pair<int, int> rank_range(std::span<const std::uint32_t> rows, const BinnedPredictors& data,
                               std::size_t j);

struct TreePrior {
  double gamma = 0.95;
  double beta = 2.0;
  /// Prior s.d. of each leaf value.
  double leaf_sd = 1.0;

  /// gamma * (1 + depth)^-beta
  double split_probability(int depth) const;
};

/// Probability of attempting BIRTH from a tree: 1 for a growable root-only
/// tree, 0 without growable leaves, otherwise 0.5. DEATH gets the rest.
double birth_move_probability(const Tree& tree, int num_growable);
double death_move_probability(const Tree& tree, int num_growable);

struct BirthProposal {
  NodeId leaf = kNoNode;
  SplitRule rule;
  int p_adj = 0;
  int n_adj = 0;
  int num_growable = 0;
};

struct DeathProposal {
  NodeId node = kNoNode;
  int w2 = 0;
};

/// Uniform growable leaf, then a predictor uniform over the valid ones (or
/// weighted by `split_probs` restricted to them), then a uniform valid cut.
std::optional<BirthProposal> propose_birth(const Tree& tree, const NodeMembership& membership,
                                           const BinnedPredictors& data, Rng& rng,
                                           std::span<const double> split_probs = {});
/// Uniform over second-generation internal nodes.
std::optional<DeathProposal> propose_death(const Tree& tree, Rng& rng);

/// The three closed-form factors of the BIRTH Metropolis ratio.
///
/// `nodes_ratio` is the transition-probability factor
/// P(DEATH | T*) b_g / (P(BIRTH | T) w2*), where b_g counts growable leaves of
/// T and w2* the second-generation nodes of T*. When every leaf is growable,
/// both moves are available, and b = 2 w2, it equals 2b / (b + 2).
struct BirthRatio {
  double nodes_ratio = 0.0;
  double depth_ratio = 0.0;
  double likelihood_ratio = 0.0;
  double log_r = 0.0;

  double r() const;
};

/// Rows of the proposed children, filled when requested by the sampler.
struct BirthPartition {
  std::vector<std::uint32_t> left;
  std::vector<std::uint32_t> right;
  bool left_growable = false;
  bool right_growable = false;
};

/// 2b / (b + 2)
double nodes_ratio(int num_terminal);
/// gamma [1 - gamma / (2 + d)^beta]^2 / [(1 + d)^beta - gamma]
double depth_ratio(int depth, double gamma, double beta);
/// Log marginal likelihood of one leaf's residuals with the leaf mean
/// integrated out, dropping the terms shared by every partition of the rows.
double leaf_log_evidence(std::size_t count, double sum, double sigma2, double leaf_var);

BirthRatio birth_ratio_components(const Tree& tree, const NodeMembership& membership,
                                  const BinnedPredictors& data, const BirthProposal& proposal,
                                  std::span<const double> residuals, double sigma2,
                                  const TreePrior& prior, BirthPartition* partition = nullptr);

/// Log Metropolis ratio for pruning `proposal.node`.
double death_log_ratio(const Tree& tree, const NodeMembership& membership,
                       const BinnedPredictors& data, const DeathProposal& proposal,
                       std::span<const double> residuals, double sigma2, const TreePrior& prior);

/// min{1, r}; throws std::domain_error unless r is finite and positive.
double metropolis_acceptance(double r);
/// min{1, exp(log_r)} without overflow.
double metropolis_acceptance_log(double log_r);

}  // namespace bartvs
