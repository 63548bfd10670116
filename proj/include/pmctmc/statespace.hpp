#ifndef PMCTMC_STATESPACE_HPP
#define PMCTMC_STATESPACE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pmctmc/detail/simplex.hpp"
#include "pmctmc/errors.hpp"
#include "pmctmc/reaction.hpp"

namespace pmctmc {

using Directions = std::vector<std::vector<std::int64_t>>;

/// {+e_1, -e_1, +e_2, -e_2, ...}.
inline Directions default_directions(std::size_t n_species) {
  Directions d;
  for (std::size_t j = 0; j < n_species; ++j) {
    std::vector<std::int64_t> plus(n_species, 0), minus(n_species, 0);
    plus[j] = 1;
    minus[j] = -1;
    d.push_back(std::move(plus));
    d.push_back(std::move(minus));
  }
  return d;
}

/// Ordered finite subset of the lattice with a state -> index map.
/// Equality compares the ordered state lists only.
class Truncation {
 public:
  Truncation() = default;

  explicit Truncation(const std::vector<State>& states, int level = 0) : level_(level) {
    for (const auto& s : states) insert(s);
  }

  const std::vector<State>& states() const { return states_; }
  std::size_t size() const { return states_.size(); }
  bool empty() const { return states_.empty(); }
  int level() const { return level_; }
  const State& operator[](std::size_t i) const { return states_[i]; }

  std::optional<std::size_t> index_of(const State& s) const {
    auto it = index_.find(s);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const State& s) const { return index_.count(s) != 0; }

  /// Appends `s` if absent. Returns true when inserted.
  bool insert(const State& s) {
    auto [it, inserted] = index_.emplace(s, states_.size());
    if (inserted) states_.push_back(s);
    return inserted;
  }

  void set_level(int level) { level_ = level; }

  friend bool operator==(const Truncation& a, const Truncation& b) {
    return a.states_ == b.states_;
  }

 private:
  std::vector<State> states_;
  std::unordered_map<State, std::size_t, StateHash> index_;
  int level_ = 0;
};

/// One growth step: add every in-bounds neighbour s + d of the current
/// states, in parent order then direction order.
inline Truncation grow(const Truncation& trunc, const Directions& directions,
                       const ReactionNetwork& net) {
  Truncation next = trunc;
  const std::size_t parents = trunc.size();
  State y;
  for (std::size_t i = 0; i < parents; ++i) {
    const State& s = trunc[i];
    for (const auto& d : directions) {
      y = s;
      for (std::size_t j = 0; j < y.size(); ++j) y[j] += d[j];
      if (net.in_bounds(y)) next.insert(y);
    }
  }
  next.set_level(trunc.level() + 1);
  return next;
}

/// Union with first-seen ordering across the inputs in input order.
inline Truncation merge(std::span<const Truncation> truncs) {
  Truncation out;
  int level = 0;
  for (const auto& t : truncs) {
    level = std::max(level, t.level());
    for (const auto& s : t.states()) out.insert(s);
  }
  out.set_level(level);
  return out;
}

// ---------------------------------------------------------------------------
// Seed paths

struct SeedPath {
  std::vector<State> states;
  std::vector<std::int64_t> reaction_counts;
};

namespace detail {

inline bool realize_path(const ReactionNetwork& net, const Theta& probe, State& cur,
                         std::vector<std::int64_t>& remaining, std::vector<State>& path,
                         std::set<std::vector<std::int64_t>>& dead_ends) {
  if (std::all_of(remaining.begin(), remaining.end(), [](auto v) { return v == 0; })) return true;
  if (dead_ends.count(remaining)) return false;
  for (std::size_t r = 0; r < net.n_reactions(); ++r) {
    if (remaining[r] == 0) continue;
    if (net.propensity(r, cur, probe) <= 0.0) continue;
    State next = cur;
    const auto& u = net.update(r);
    for (std::size_t j = 0; j < next.size(); ++j) next[j] += u[j];
    if (!net.in_bounds(next)) continue;
    --remaining[r];
    path.push_back(next);
    State saved = cur;
    cur = next;
    if (realize_path(net, probe, cur, remaining, path, dead_ends)) return true;
    cur = saved;
    path.pop_back();
    ++remaining[r];
  }
  dead_ends.insert(remaining);
  return false;
}

/// Breadth-first search over reachable states, for the rare non-integral
/// LP vertex. Gives the fewest reactions among realizable paths.
inline std::optional<SeedPath> bfs_path(const ReactionNetwork& net, const State& from,
                                        const State& to, std::size_t budget = 200000) {
  const Theta probe(net.param_dim(), 1.0);
  std::unordered_map<State, std::pair<State, std::size_t>, StateHash> parent;
  std::deque<State> queue{from};
  parent.emplace(from, std::make_pair(from, net.n_reactions()));
  while (!queue.empty() && parent.size() < budget) {
    const State cur = queue.front();
    queue.pop_front();
    for (std::size_t r = 0; r < net.n_reactions(); ++r) {
      if (net.propensity(r, cur, probe) <= 0.0) continue;
      State next = cur;
      const auto& u = net.update(r);
      for (std::size_t j = 0; j < next.size(); ++j) next[j] += u[j];
      if (!net.in_bounds(next) || parent.count(next)) continue;
      parent.emplace(next, std::make_pair(cur, r));
      if (next == to) {
        SeedPath out;
        out.reaction_counts.assign(net.n_reactions(), 0);
        for (State s = to; s != from;) {
          const auto& [prev, rr] = parent.at(s);
          out.states.push_back(s);
          ++out.reaction_counts[rr];
          s = prev;
        }
        out.states.push_back(from);
        std::reverse(out.states.begin(), out.states.end());
        return out;
      }
      queue.push_back(std::move(next));
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Shortest reaction-count path from `from` to `to`: solves
/// min 1^T nu s.t. U^T nu = to - from, nu >= 0 as an LP, then orders the
/// reactions by depth-first search so the path stays in bounds and every
/// step has positive propensity at a probe parameter (all ones).
inline SeedPath seed_path(const ReactionNetwork& net, const State& from, const State& to,
                          const std::string& label = {}) {
  net.check_state(from);
  net.check_state(to);
  const auto tag = [&] {
    return "no seed path from " + to_string(from) + " to " + to_string(to) +
           (label.empty() ? std::string{} : " (" + label + ")");
  };
  const std::size_t nr = net.n_reactions();
  const std::size_t ns = net.n_species();
  SeedPath out;
  out.reaction_counts.assign(nr, 0);
  if (from == to) {
    out.states.push_back(from);
    return out;
  }
  const Eigen::MatrixXd ut = net.update_matrix().transpose();
  Eigen::VectorXd dx(static_cast<Eigen::Index>(ns));
  for (std::size_t j = 0; j < ns; ++j) {
    dx(static_cast<Eigen::Index>(j)) = static_cast<double>(to[j] - from[j]);
  }
  auto nu = detail::simplex_min(ut, dx, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(nr)));
  if (!nu) throw SeedPathError(tag() + ": U^T nu = dx has no non-negative solution");
  std::vector<std::int64_t> counts(nr);
  bool integral = true;
  for (std::size_t r = 0; r < nr; ++r) {
    const double v = (*nu)(static_cast<Eigen::Index>(r));
    const double rounded = std::round(v);
    if (std::abs(v - rounded) > 1e-7) integral = false;
    counts[r] = static_cast<std::int64_t>(integral ? rounded : std::ceil(v - 1e-7));
  }
  if (!integral) {
    for (std::size_t r = 0; r < nr; ++r) {
      counts[r] = static_cast<std::int64_t>(std::ceil((*nu)(static_cast<Eigen::Index>(r)) - 1e-7));
    }
    Eigen::VectorXd check = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ns));
    for (std::size_t r = 0; r < nr; ++r) {
      check += ut.col(static_cast<Eigen::Index>(r)) * static_cast<double>(counts[r]);
    }
    if ((check - dx).cwiseAbs().maxCoeff() > 1e-9) {
      auto found = detail::bfs_path(net, from, to);
      if (!found) throw SeedPathError(tag() + ": LP relaxation is fractional and rounding fails");
      return *found;
    }
  }
  Theta probe(net.param_dim(), 1.0);
  State cur = from;
  std::vector<std::int64_t> remaining = counts;
  std::vector<State> path{from};
  std::set<std::vector<std::int64_t>> dead_ends;
  if (!detail::realize_path(net, probe, cur, remaining, path, dead_ends)) {
    throw SeedPathError(tag() + ": no in-bounds ordering of the reactions");
  }
  out.states = std::move(path);
  out.reaction_counts = std::move(counts);
  return out;
}

// ---------------------------------------------------------------------------
// Truncated rate matrices

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Rate matrix restricted to a truncation. The diagonal is the full-lattice
/// diagonal, so rows with cut targets sum to -deficit.
struct TruncatedRateMatrix {
  SparseMatrix q;
  Eigen::VectorXd diag;
  Eigen::VectorXd deficit;
  double q_bar = 0.0;

  Eigen::Index dim() const { return q.rows(); }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(q); }
};

inline TruncatedRateMatrix assemble(const ReactionNetwork& net, const Theta& theta,
                                    const Truncation& trunc) {
  net.check_theta(theta);
  const auto n = static_cast<Eigen::Index>(trunc.size());
  TruncatedRateMatrix out;
  out.diag = Eigen::VectorXd::Zero(n);
  out.deficit = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(trunc.size() * (net.n_reactions() + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = net.rate_row(trunc[static_cast<std::size_t>(i)], theta);
    out.diag(i) = row.diagonal;
    triplets.emplace_back(i, i, row.diagonal);
    for (const auto& [target, rate] : row.targets) {
      if (auto j = trunc.index_of(target)) {
        triplets.emplace_back(i, static_cast<Eigen::Index>(*j), rate);
      } else {
        out.deficit(i) += rate;
      }
    }
  }
  out.q.resize(n, n);
  out.q.setFromTriplets(triplets.begin(), triplets.end());
  out.q.makeCompressed();
  out.q_bar = n > 0 ? out.diag.minCoeff() : 0.0;
  return out;
}

/// Truncated rate matrix from an explicit dense generator (used for
/// benchmarks and tests). Rows may be non-conservative; the deficit is the
/// mass missing from each row.
inline TruncatedRateMatrix from_dense(const Eigen::MatrixXd& q) {
  TruncatedRateMatrix out;
  const Eigen::Index n = q.rows();
  out.diag = q.diagonal();
  out.deficit = -(q.rowwise().sum());
  std::vector<Eigen::Triplet<double>> triplets;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || q(i, j) != 0.0) triplets.emplace_back(i, j, q(i, j));
    }
  }
  out.q.resize(n, n);
  out.q.setFromTriplets(triplets.begin(), triplets.end());
  out.q.makeCompressed();
  out.q_bar = n > 0 ? out.diag.minCoeff() : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) out.deficit(i) = std::max(0.0, out.deficit(i));
  return out;
}

// ---------------------------------------------------------------------------
// Estimator mode selection

enum class EstimatorMode { IA, RA };

inline const char* to_string(EstimatorMode m) { return m == EstimatorMode::IA ? "IA" : "RA"; }

/// RA when the merged base space is at most `factor` times the summed sizes
/// of the per-observation base spaces.
inline EstimatorMode ra_rule_of_thumb(std::span<const std::size_t> seed_sizes,
                                      std::size_t merged_size, double factor = 1.0 / 3.0) {
  const double total = std::accumulate(seed_sizes.begin(), seed_sizes.end(), 0.0);
  return static_cast<double>(merged_size) <= factor * total ? EstimatorMode::RA
                                                             : EstimatorMode::IA;
}

// ---------------------------------------------------------------------------
// Lazily grown truncation sequence

/// X_0, X_1, ... grown on demand and cached. Concurrent readers share
/// already-built levels; growth takes an exclusive lock.
class TruncationSequence {
 public:
  TruncationSequence(ReactionNetwork net, Truncation base, Directions directions)
      : net_(std::move(net)), directions_(std::move(directions)) {
    if (base.empty()) throw UsageError("truncation sequence needs a non-empty base");
    base.set_level(0);
    levels_.push_back(std::make_shared<const Truncation>(std::move(base)));
  }

  TruncationSequence(const TruncationSequence&) = delete;
  TruncationSequence& operator=(const TruncationSequence&) = delete;

  std::shared_ptr<const Truncation> at(int r) const {
    if (r < 0) throw DomainError("negative truncation level");
    {
      std::shared_lock lock(mu_);
      if (static_cast<std::size_t>(r) < levels_.size()) return levels_[static_cast<std::size_t>(r)];
    }
    std::unique_lock lock(mu_);
    while (levels_.size() <= static_cast<std::size_t>(r)) {
      levels_.push_back(std::make_shared<const Truncation>(grow(*levels_.back(), directions_, net_)));
    }
    return levels_[static_cast<std::size_t>(r)];
  }

  std::size_t built_levels() const {
    std::shared_lock lock(mu_);
    return levels_.size();
  }

  std::shared_ptr<const Truncation> base() const { return at(0); }

 private:
  ReactionNetwork net_;
  Directions directions_;
  mutable std::shared_mutex mu_;
  mutable std::vector<std::shared_ptr<const Truncation>> levels_;
};

}  // namespace pmctmc

#endif  // PMCTMC_STATESPACE_HPP
