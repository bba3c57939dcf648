#include "bartvs/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bartvs {

// ---------------------------------------------------------------------------
// Cutpoints and binned predictors

CutpointGrid::CutpointGrid(std::vector<std::vector<double>> cuts) : cuts_(std::move(cuts)) {
  for (const auto& c : cuts_) {
    if (c.size() >= std::numeric_limits<std::uint16_t>::max()) {
      throw std::invalid_argument("CutpointGrid: too many cutpoints");
    }
    for (std::size_t g = 1; g < c.size(); ++g) {
      if (!(c[g - 1] < c[g])) throw std::invalid_argument("CutpointGrid: cutpoints not increasing");
    }
  }
}

CutpointGrid CutpointGrid::build(const Dataset& data, int num_cuts) {
  if (num_cuts < 1) throw std::invalid_argument("CutpointGrid: num_cuts must be positive");
  std::vector<std::vector<double>> cuts(data.p());
  for (std::size_t j = 0; j < data.p(); ++j) {
    auto col = data.x.col(j);
    if (col.empty()) continue;
    const auto [lo_it, hi_it] = std::minmax_element(col.begin(), col.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) continue;
    auto& c = cuts[j];
    if (data.types[j] == PredictorType::Binary) {
      c.push_back(lo + 0.5 * (hi - lo));
      continue;
    }
    const double step = (hi - lo) / (num_cuts + 1);
    c.reserve(static_cast<std::size_t>(num_cuts));
    for (int g = 0; g < num_cuts; ++g) c.push_back(lo + (g + 1) * step);
    // Extremely narrow ranges can collapse neighbouring points.
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
  return CutpointGrid(std::move(cuts));
}

std::uint16_t CutpointGrid::rank(std::size_t j, double x) const {
  const auto& c = cuts_[j];
  return static_cast<std::uint16_t>(std::upper_bound(c.begin(), c.end(), x) - c.begin());
}

BinnedPredictors::BinnedPredictors(const Matrix& x, CutpointGrid grid)
    : n_(x.rows()), p_(x.cols()), ranks_(x.rows() * x.cols()), grid_(std::move(grid)) {
  if (grid_.num_predictors() != p_) {
    throw std::invalid_argument("BinnedPredictors: grid does not match predictor count");
  }
  for (std::size_t j = 0; j < p_; ++j) {
    auto col = x.col(j);
    for (std::size_t i = 0; i < n_; ++i) ranks_[j * n_ + i] = grid_.rank(j, col[i]);
  }
}

// ---------------------------------------------------------------------------
// Tree

Tree::Tree(std::size_t num_predictors, double mu) : num_predictors_(num_predictors) {
  Node root;
  root.mu = mu;
  nodes_.push_back(root);
}

NodeId Tree::allocate() {
  if (!free_.empty()) {
    const NodeId id = free_.back();
    free_.pop_back();
    nodes_[static_cast<std::size_t>(id)] = Node{};
    return id;
  }
  nodes_.emplace_back();
  return static_cast<NodeId>(nodes_.size() - 1);
}

std::vector<NodeId> Tree::terminal_nodes() const {
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(num_terminal_));
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].alive && nodes_[i].terminal()) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

std::vector<NodeId> Tree::internal_nodes() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].alive && !nodes_[i].terminal()) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

bool Tree::is_second_generation(NodeId id) const {
  const Node& nd = node(id);
  return nd.alive && !nd.terminal() && node(nd.left).terminal() && node(nd.right).terminal();
}

std::vector<NodeId> Tree::second_generation_nodes() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (is_second_generation(static_cast<NodeId>(i))) out.push_back(static_cast<NodeId>(i));
  }
  return out;
}

std::pair<NodeId, NodeId> Tree::grow(NodeId leaf, SplitRule rule, double birth_ratio) {
  if (leaf < 0 || static_cast<std::size_t>(leaf) >= nodes_.size() || !node(leaf).alive ||
      !node(leaf).terminal()) {
    throw std::logic_error("Tree::grow: node is not a live terminal node");
  }
  if (rule.var < 0 || (num_predictors_ > 0 && static_cast<std::size_t>(rule.var) >= num_predictors_)) {
    throw std::invalid_argument("Tree::grow: split variable out of range");
  }
  const NodeId l = allocate();
  const NodeId r = allocate();
  const int depth = nodes_[static_cast<std::size_t>(leaf)].depth + 1;
  for (NodeId c : {l, r}) {
    Node& child = nodes_[static_cast<std::size_t>(c)];
    child.parent = leaf;
    child.depth = depth;
  }
  Node& nd = nodes_[static_cast<std::size_t>(leaf)];
  nd.left = l;
  nd.right = r;
  nd.rule = rule;
  nd.mu = 0.0;
  nd.birth_ratio = birth_ratio;
  ++num_terminal_;
  return {l, r};
}

void Tree::prune(NodeId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size() || !is_second_generation(id)) {
    throw std::logic_error("Tree::prune: node is not second-generation");
  }
  Node& nd = nodes_[static_cast<std::size_t>(id)];
  for (NodeId c : {nd.left, nd.right}) {
    nodes_[static_cast<std::size_t>(c)].alive = false;
    free_.push_back(c);
  }
  nd.left = kNoNode;
  nd.right = kNoNode;
  nd.rule = SplitRule{};
  nd.birth_ratio = 0.0;
  nd.mu = 0.0;
  --num_terminal_;
}

void Tree::set_mu(NodeId leaf, double mu) {
  Node& nd = nodes_[static_cast<std::size_t>(leaf)];
  if (!nd.alive || !nd.terminal()) throw std::logic_error("Tree::set_mu: not a terminal node");
  nd.mu = mu;
}

NodeId Tree::leaf_for(std::span<const double> x) const {
  if (x.size() != num_predictors_) {
    throw std::invalid_argument("Tree::evaluate: expected " + std::to_string(num_predictors_) +
                                " predictors, got " + std::to_string(x.size()));
  }
  NodeId id = root();
  while (!node(id).terminal()) {
    const Node& nd = node(id);
    id = x[static_cast<std::size_t>(nd.rule.var)] < nd.rule.value ? nd.left : nd.right;
  }
  return id;
}

double Tree::evaluate(std::span<const double> x) const { return node(leaf_for(x)).mu; }

void Tree::check_invariants() const {
  auto fail = [](const std::string& what) { throw std::logic_error("tree invariant: " + what); };
  if (nodes_.empty() || !nodes_[0].alive) fail("missing root");
  if (nodes_[0].parent != kNoNode || nodes_[0].depth != 0) fail("root has a parent or depth");
  std::size_t alive = 0;
  int terminals = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& nd = nodes_[i];
    if (!nd.alive) continue;
    ++alive;
    const bool has_l = nd.left != kNoNode;
    const bool has_r = nd.right != kNoNode;
    if (has_l != has_r) fail("node " + std::to_string(i) + " has exactly one child");
    if (!has_l) {
      ++terminals;
      if (!std::isfinite(nd.mu)) fail("non-finite leaf value");
      continue;
    }
    if (nd.rule.var < 0 ||
        (num_predictors_ > 0 && static_cast<std::size_t>(nd.rule.var) >= num_predictors_)) {
      fail("split variable out of range");
    }
    if (!std::isfinite(nd.rule.value)) fail("non-finite split value");
    for (NodeId c : {nd.left, nd.right}) {
      if (c < 0 || static_cast<std::size_t>(c) >= nodes_.size()) fail("child index out of range");
      const Node& child = node(c);
      if (!child.alive) fail("dead child");
      if (child.parent != static_cast<NodeId>(i)) fail("child parent link broken");
      if (child.depth != nd.depth + 1) fail("child depth mismatch");
    }
  }
  if (terminals != num_terminal_) fail("terminal count mismatch");
  // Every live node must be reachable from the root exactly once.
  std::size_t reached = 0;
  std::vector<NodeId> stack{root()};
  while (!stack.empty()) {
    const NodeId id = stack.back();
    stack.pop_back();
    if (++reached > alive) fail("cycle detected");
    const Node& nd = node(id);
    if (!nd.terminal()) {
      stack.push_back(nd.left);
      stack.push_back(nd.right);
    }
  }
  if (reached != alive) fail("unreachable live nodes");
}

void Tree::accumulate_splits(std::span<int> counts, std::span<double> accept_sums) const {
  for (const Node& nd : nodes_) {
    if (!nd.alive || nd.terminal()) continue;
    const auto v = static_cast<std::size_t>(nd.rule.var);
    if (v < counts.size()) ++counts[v];
    if (v < accept_sums.size()) accept_sums[v] += nd.birth_ratio;
  }
}

// ---------------------------------------------------------------------------
// Membership

std::pair<int, int> rank_range(std::span<const std::uint32_t> rows, const BinnedPredictors& data,
                               std::size_t j) {
  if (rows.empty()) return {0, 0};
  auto col = data.col(j);
  int lo = col[rows[0]];
  int hi = lo;
  for (std::uint32_t i : rows) {
    const int r = col[i];
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return {lo, hi};
}

namespace {

bool predictor_varies(std::span<const std::uint32_t> rows, const BinnedPredictors& data,
                      std::size_t j) {
  if (rows.size() < 2 || data.grid().cuts(j).empty()) return false;
  auto col = data.col(j);
  const std::uint16_t first = col[rows[0]];
  for (std::uint32_t i : rows) {
    if (col[i] != first) return true;
  }
  return false;
}

}  // namespace

std::vector<int> valid_predictors(std::span<const std::uint32_t> rows, const BinnedPredictors& data) {
  std::vector<int> out;
  for (std::size_t j = 0; j < data.p(); ++j) {
    if (predictor_varies(rows, data, j)) out.push_back(static_cast<int>(j));
  }
  return out;
}

bool any_valid_split(std::span<const std::uint32_t> rows, const BinnedPredictors& data) {
  for (std::size_t j = 0; j < data.p(); ++j) {
    if (predictor_varies(rows, data, j)) return true;
  }
  return false;
}

NodeMembership::NodeMembership(const Tree& tree, const BinnedPredictors& data) {
  ensure_size(tree.arena_size());
  for (std::size_t i = 0; i < data.n(); ++i) {
    NodeId id = tree.root();
    while (!tree.node(id).terminal()) {
      const Node& nd = tree.node(id);
      id = data.rank(i, static_cast<std::size_t>(nd.rule.var)) <= nd.rule.cut ? nd.left : nd.right;
    }
    members_[static_cast<std::size_t>(id)].push_back(static_cast<std::uint32_t>(i));
  }
  for (NodeId id : tree.terminal_nodes()) {
    const bool g = any_valid_split(members_[static_cast<std::size_t>(id)], data);
    growable_[static_cast<std::size_t>(id)] = g ? 1 : 0;
    num_growable_ += g ? 1 : 0;
  }
}

std::span<const std::uint32_t> NodeMembership::members(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= members_.size()) return {};
  return members_[static_cast<std::size_t>(id)];
}

void NodeMembership::ensure_size(std::size_t size) {
  if (members_.size() < size) {
    members_.resize(size);
    growable_.resize(size, 0);
  }
}

void NodeMembership::set_terminal(NodeId id, std::vector<std::uint32_t> rows,
                                  const BinnedPredictors& data) {
  ensure_size(static_cast<std::size_t>(id) + 1);
  const bool g = any_valid_split(rows, data);
  members_[static_cast<std::size_t>(id)] = std::move(rows);
  growable_[static_cast<std::size_t>(id)] = g ? 1 : 0;
  num_growable_ += g ? 1 : 0;
}

void NodeMembership::apply_grow(NodeId leaf, NodeId left, NodeId right, const SplitRule& rule,
                                const BinnedPredictors& data) {
  BirthPartition part;
  auto col = data.col(static_cast<std::size_t>(rule.var));
  for (std::uint32_t i : members(leaf)) {
    (col[i] <= rule.cut ? part.left : part.right).push_back(i);
  }
  part.left_growable = any_valid_split(part.left, data);
  part.right_growable = any_valid_split(part.right, data);
  apply_grow(leaf, left, right, std::move(part));
}

void NodeMembership::apply_grow(NodeId leaf, NodeId left, NodeId right, BirthPartition&& partition) {
  ensure_size(static_cast<std::size_t>(std::max(left, right)) + 1);
  const auto li = static_cast<std::size_t>(leaf);
  num_growable_ -= growable_[li];
  growable_[li] = 0;
  members_[li].clear();
  members_[static_cast<std::size_t>(left)] = std::move(partition.left);
  members_[static_cast<std::size_t>(right)] = std::move(partition.right);
  growable_[static_cast<std::size_t>(left)] = partition.left_growable ? 1 : 0;
  growable_[static_cast<std::size_t>(right)] = partition.right_growable ? 1 : 0;
  num_growable_ += (partition.left_growable ? 1 : 0) + (partition.right_growable ? 1 : 0);
}

void NodeMembership::apply_prune(NodeId id, NodeId left, NodeId right, const BinnedPredictors& data) {
  auto& l = members_[static_cast<std::size_t>(left)];
  auto& r = members_[static_cast<std::size_t>(right)];
  std::vector<std::uint32_t> merged;
  merged.reserve(l.size() + r.size());
  std::merge(l.begin(), l.end(), r.begin(), r.end(), std::back_inserter(merged));
  num_growable_ -= growable_[static_cast<std::size_t>(left)] + growable_[static_cast<std::size_t>(right)];
  growable_[static_cast<std::size_t>(left)] = 0;
  growable_[static_cast<std::size_t>(right)] = 0;
  l.clear();
  r.clear();
  set_terminal(id, std::move(merged), data);
}

// ---------------------------------------------------------------------------
// Proposals and ratios

double TreePrior::split_probability(int depth) const {
  return gamma * std::pow(1.0 + depth, -beta);
}

double birth_move_probability(const Tree& tree, int num_growable) {
  if (num_growable <= 0) return 0.0;
  return tree.num_terminal() == 1 ? 1.0 : 0.5;
}

double death_move_probability(const Tree& tree, int num_growable) {
  if (tree.num_terminal() == 1) return 0.0;
  return 1.0 - birth_move_probability(tree, num_growable);
}

std::optional<BirthProposal> propose_birth(const Tree& tree, const NodeMembership& membership,
                                           const BinnedPredictors& data, Rng& rng,
                                           std::span<const double> split_probs) {
  std::vector<NodeId> leaves;
  for (NodeId id : tree.terminal_nodes()) {
    if (membership.growable(id)) leaves.push_back(id);
  }
  if (leaves.empty()) return std::nullopt;
  BirthProposal out;
  out.num_growable = static_cast<int>(leaves.size());
  out.leaf = leaves[rng.index(leaves.size())];
  auto rows = membership.members(out.leaf);
  const std::vector<int> valid = valid_predictors(rows, data);
  out.p_adj = static_cast<int>(valid.size());
  int var;
  if (split_probs.empty()) {
    var = valid[rng.index(valid.size())];
  } else {
    if (split_probs.size() != data.p()) {
      throw std::invalid_argument("propose_birth: split probabilities do not match predictors");
    }
    std::vector<double> w(valid.size());
    for (std::size_t k = 0; k < valid.size(); ++k) w[k] = split_probs[static_cast<std::size_t>(valid[k])];
    var = valid[rng.categorical(w)];
  }
  const auto [lo, hi] = rank_range(rows, data, static_cast<std::size_t>(var));
  out.n_adj = hi - lo;
  out.rule.var = var;
  out.rule.cut = lo + static_cast<int>(rng.index(static_cast<std::size_t>(hi - lo)));
  out.rule.value = data.grid().cuts(static_cast<std::size_t>(var))[static_cast<std::size_t>(out.rule.cut)];
  return out;
}

std::optional<DeathProposal> propose_death(const Tree& tree, Rng& rng) {
  const std::vector<NodeId> w2 = tree.second_generation_nodes();
  if (w2.empty()) return std::nullopt;
  return DeathProposal{w2[rng.index(w2.size())], static_cast<int>(w2.size())};
}

double BirthRatio::r() const { return std::exp(log_r); }

double nodes_ratio(int num_terminal) {
  const double b = num_terminal;
  return 2.0 * b / (b + 2.0);
}

double depth_ratio(int depth, double gamma, double beta) {
  const double shrink = 1.0 - gamma / std::pow(2.0 + depth, beta);
  return gamma * shrink * shrink / (std::pow(1.0 + depth, beta) - gamma);
}

double leaf_log_evidence(std::size_t count, double sum, double sigma2, double leaf_var) {
  const double denom = sigma2 + static_cast<double>(count) * leaf_var;
  return 0.5 * std::log(sigma2 / denom) + leaf_var * sum * sum / (2.0 * sigma2 * denom);
}

namespace {

void check_sigma2(double sigma2) {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw std::invalid_argument("residual variance must be finite and positive");
  }
}

double sum_over(std::span<const std::uint32_t> rows, std::span<const double> values) {
  double s = 0.0;
  for (std::uint32_t i : rows) s += values[i];
  return s;
}

}  // namespace

BirthRatio birth_ratio_components(const Tree& tree, const NodeMembership& membership,
                                  const BinnedPredictors& data, const BirthProposal& proposal,
                                  std::span<const double> residuals, double sigma2,
                                  const TreePrior& prior, BirthPartition* partition) {
  check_sigma2(sigma2);
  if (residuals.size() != data.n()) throw std::invalid_argument("residual length mismatch");
  const Node& leaf = tree.node(proposal.leaf);
  if (!leaf.alive || !leaf.terminal()) throw std::invalid_argument("BIRTH at a non-terminal node");

  BirthPartition local;
  BirthPartition& part = partition ? *partition : local;
  part.left.clear();
  part.right.clear();
  auto col = data.col(static_cast<std::size_t>(proposal.rule.var));
  for (std::uint32_t i : membership.members(proposal.leaf)) {
    (col[i] <= proposal.rule.cut ? part.left : part.right).push_back(i);
  }
  if (part.left.empty() || part.right.empty()) {
    throw std::invalid_argument("BIRTH proposal leaves a child empty");
  }
  part.left_growable = any_valid_split(part.left, data);
  part.right_growable = any_valid_split(part.right, data);

  const int grow_now = membership.num_growable();
  const double p_birth = birth_move_probability(tree, grow_now);
  if (!(p_birth > 0.0)) throw std::invalid_argument("BIRTH is not available for this tree");
  const int grow_next = grow_now - 1 + (part.left_growable ? 1 : 0) + (part.right_growable ? 1 : 0);
  const double p_death_next = grow_next >= 1 ? 0.5 : 1.0;

  int w2_next = static_cast<int>(tree.second_generation_nodes().size()) + 1;
  if (leaf.parent != kNoNode && tree.is_second_generation(leaf.parent)) --w2_next;

  const double leaf_var = prior.leaf_sd * prior.leaf_sd;
  const double sum_l = sum_over(part.left, residuals);
  const double sum_r = sum_over(part.right, residuals);
  const double log_lr = leaf_log_evidence(part.left.size(), sum_l, sigma2, leaf_var) +
                        leaf_log_evidence(part.right.size(), sum_r, sigma2, leaf_var) -
                        leaf_log_evidence(part.left.size() + part.right.size(), sum_l + sum_r,
                                          sigma2, leaf_var);

  BirthRatio out;
  out.nodes_ratio = p_death_next * grow_now / (p_birth * w2_next);
  out.depth_ratio = depth_ratio(leaf.depth, prior.gamma, prior.beta);
  out.likelihood_ratio = std::exp(log_lr);
  out.log_r = std::log(out.nodes_ratio) + std::log(out.depth_ratio) + log_lr;
  return out;
}

double death_log_ratio(const Tree& tree, const NodeMembership& membership,
                       const BinnedPredictors& data, const DeathProposal& proposal,
                       std::span<const double> residuals, double sigma2, const TreePrior& prior) {
  check_sigma2(sigma2);
  if (residuals.size() != data.n()) throw std::invalid_argument("residual length mismatch");
  if (!tree.is_second_generation(proposal.node)) {
    throw std::invalid_argument("DEATH at a node that is not second-generation");
  }
  const Node& nd = tree.node(proposal.node);
  auto rows_l = membership.members(nd.left);
  auto rows_r = membership.members(nd.right);
  std::vector<std::uint32_t> merged(rows_l.begin(), rows_l.end());
  merged.insert(merged.end(), rows_r.begin(), rows_r.end());

  const int grow_now = membership.num_growable();
  const double p_death = death_move_probability(tree, grow_now);
  const int grow_next = grow_now - (membership.growable(nd.left) ? 1 : 0) -
                        (membership.growable(nd.right) ? 1 : 0) +
                        (any_valid_split(merged, data) ? 1 : 0);
  double p_birth_next = 0.0;
  if (grow_next >= 1) p_birth_next = tree.num_terminal() == 2 ? 1.0 : 0.5;
  if (!(p_birth_next > 0.0)) return -std::numeric_limits<double>::infinity();

  const double leaf_var = prior.leaf_sd * prior.leaf_sd;
  const double sum_l = sum_over(rows_l, residuals);
  const double sum_r = sum_over(rows_r, residuals);
  const double log_lr = leaf_log_evidence(merged.size(), sum_l + sum_r, sigma2, leaf_var) -
                        leaf_log_evidence(rows_l.size(), sum_l, sigma2, leaf_var) -
                        leaf_log_evidence(rows_r.size(), sum_r, sigma2, leaf_var);
  return std::log(p_birth_next * proposal.w2 / (p_death * grow_next)) -
         std::log(depth_ratio(nd.depth, prior.gamma, prior.beta)) + log_lr;
}

double metropolis_acceptance(double r) {
  if (!std::isfinite(r) || !(r > 0.0)) {
    throw std::domain_error("Metropolis ratio must be finite and positive");
  }
  return std::min(1.0, r);
}

double metropolis_acceptance_log(double log_r) {
  if (std::isnan(log_r)) throw std::domain_error("Metropolis log ratio is NaN");
  return log_r >= 0.0 ? 1.0 : std::exp(log_r);
}

}  // namespace bartvs
