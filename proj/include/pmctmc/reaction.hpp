#ifndef PMCTMC_REACTION_HPP
#define PMCTMC_REACTION_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pmctmc/errors.hpp"

namespace pmctmc {

/// A point of the integer lattice Z^{n_s}.
using State = std::vector<std::int64_t>;

/// Rate parameters of a network.
using Theta = std::vector<double>;

inline constexpr std::int64_t kUnboundedAbove = std::numeric_limits<std::int64_t>::max();
inline constexpr std::int64_t kUnboundedBelow = std::numeric_limits<std::int64_t>::min();

struct StateHash {
  std::size_t operator()(const State& s) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto v : s) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }
};

inline std::string to_string(std::span<const std::int64_t> x) {
  std::ostringstream os;
  os << '(';
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j) os << ',';
    os << x[j];
  }
  os << ')';
  return os.str();
}

using Propensity =
    std::function<double(std::span<const std::int64_t> x, std::span<const double> theta)>;

struct Reaction {
  std::string name;
  std::vector<std::int64_t> update;
  Propensity propensity;
};

/// One row of the full-lattice rate matrix: off-diagonal targets with their
/// rates (targets reached by several reactions are merged) and the diagonal.
struct RateRow {
  std::vector<std::pair<State, double>> targets;
  double diagonal = 0.0;

  double exit_rate() const { return -diagonal; }
};

/// Reaction network on a rectangular subset of Z^{n_s}.
///
/// Immutable after construction. Propensities are evaluated through
/// `propensity()`, which forces a zero rate for any reaction whose target
/// leaves the bounds, so rows never point outside the state space.
class ReactionNetwork {
 public:
  ReactionNetwork(std::string name, std::size_t n_species, std::size_t param_dim,
                  std::vector<Reaction> reactions, State lower, State upper)
      : name_(std::move(name)),
        n_species_(n_species),
        param_dim_(param_dim),
        reactions_(std::move(reactions)),
        lower_(std::move(lower)),
        upper_(std::move(upper)) {
    if (n_species_ == 0) throw UsageError("network needs at least one species");
    if (reactions_.empty()) throw UsageError("network needs at least one reaction");
    if (param_dim_ == 0) throw UsageError("network needs at least one parameter");
    if (lower_.size() != n_species_ || upper_.size() != n_species_) {
      throw UsageError("bounds must have one entry per species");
    }
    for (std::size_t j = 0; j < n_species_; ++j) {
      if (lower_[j] > upper_[j]) throw UsageError("lower bound exceeds upper bound");
    }
    for (const auto& r : reactions_) {
      if (r.update.size() != n_species_) {
        throw UsageError("reaction '" + r.name + "' has wrong update length");
      }
      if (!r.propensity) throw UsageError("reaction '" + r.name + "' has no propensity");
    }
  }

  const std::string& name() const { return name_; }
  std::size_t n_species() const { return n_species_; }
  std::size_t n_reactions() const { return reactions_.size(); }
  std::size_t param_dim() const { return param_dim_; }
  const std::vector<Reaction>& reactions() const { return reactions_; }
  const std::vector<std::int64_t>& update(std::size_t r) const { return reactions_[r].update; }
  const State& lower_bounds() const { return lower_; }
  const State& upper_bounds() const { return upper_; }

  /// Update matrix U as an n_r x n_s integer matrix.
  Eigen::MatrixXd update_matrix() const {
    Eigen::MatrixXd u(static_cast<Eigen::Index>(n_reactions()),
                      static_cast<Eigen::Index>(n_species_));
    for (std::size_t r = 0; r < n_reactions(); ++r) {
      for (std::size_t j = 0; j < n_species_; ++j) {
        u(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
            static_cast<double>(reactions_[r].update[j]);
      }
    }
    return u;
  }

  bool in_bounds(std::span<const std::int64_t> x) const {
    if (x.size() != n_species_) return false;
    for (std::size_t j = 0; j < n_species_; ++j) {
      if (x[j] < lower_[j] || x[j] > upper_[j]) return false;
    }
    return true;
  }

  /// Copy of this network with different bounds.
  ReactionNetwork with_bounds(State lower, State upper) const {
    return ReactionNetwork(name_, n_species_, param_dim_, reactions_, std::move(lower),
                           std::move(upper));
  }

  void check_theta(std::span<const double> theta) const {
    if (theta.size() != param_dim_) {
      throw DomainError("theta has " + std::to_string(theta.size()) + " entries, network '" +
                        name_ + "' expects " + std::to_string(param_dim_));
    }
    for (double v : theta) {
      if (!std::isfinite(v) || v < 0.0) {
        throw DomainError("theta entries must be finite and non-negative");
      }
    }
  }

  void check_state(std::span<const std::int64_t> x) const {
    if (!in_bounds(x)) {
      throw DomainError("state " + to_string(x) + " is outside the bounds of network '" +
                        name_ + "'");
    }
  }

  /// Rate of reaction r at x, zero if x + U_r leaves the bounds.
  double propensity(std::size_t r, std::span<const std::int64_t> x,
                    std::span<const double> theta) const {
    const auto& u = reactions_[r].update;
    for (std::size_t j = 0; j < n_species_; ++j) {
      const std::int64_t y = x[j] + u[j];
      if (y < lower_[j] || y > upper_[j]) return 0.0;
    }
    const double a = reactions_[r].propensity(x, theta);
    if (!std::isfinite(a) || a < 0.0) {
      throw DomainError("reaction '" + reactions_[r].name + "' returned invalid rate at " +
                        to_string(x));
    }
    return a;
  }

  /// Row x of the rate matrix. Reactions with a zero update vector are not
  /// jumps and are ignored.
  RateRow rate_row(std::span<const std::int64_t> x, std::span<const double> theta) const {
    check_state(x);
    check_theta(theta);
    RateRow row;
    for (std::size_t r = 0; r < reactions_.size(); ++r) {
      const auto& u = reactions_[r].update;
      if (std::all_of(u.begin(), u.end(), [](std::int64_t v) { return v == 0; })) continue;
      const double a = propensity(r, x, theta);
      if (a <= 0.0) continue;
      State y(x.begin(), x.end());
      for (std::size_t j = 0; j < n_species_; ++j) y[j] += u[j];
      auto it = std::find_if(row.targets.begin(), row.targets.end(),
                             [&](const auto& t) { return t.first == y; });
      if (it == row.targets.end()) {
        row.targets.emplace_back(std::move(y), a);
      } else {
        it->second += a;
      }
      row.diagonal -= a;
    }
    return row;
  }

 private:
  std::string name_;
  std::size_t n_species_;
  std::size_t param_dim_;
  std::vector<Reaction> reactions_;
  State lower_;
  State upper_;
};

// ---------------------------------------------------------------------------
// Built-in models

struct ModelOptions {
  /// Number of servers of the M/M/c queue.
  int servers = 1;
};

namespace models {

inline State nonneg_lower(std::size_t n) { return State(n, 0); }
inline State unbounded_upper(std::size_t n) { return State(n, kUnboundedAbove); }

/// S + I -> 2I (theta1 S I), I -> R (theta2 I), 0 -> S (theta3).
inline ReactionNetwork ssir() {
  std::vector<Reaction> rs;
  rs.push_back({"infection", {-1, 1, 0},
                [](auto x, auto th) { return th[0] * double(x[0]) * double(x[1]); }});
  rs.push_back({"recovery", {0, -1, 1}, [](auto x, auto th) { return th[1] * double(x[1]); }});
  rs.push_back({"arrival", {1, 0, 0}, [](auto, auto th) { return th[2]; }});
  return ReactionNetwork("ssir", 3, 3, std::move(rs), nonneg_lower(3), unbounded_upper(3));
}

/// Predator R, prey Y: R -> 0, R + Y -> 2R, Y -> 2Y.
inline ReactionNetwork lv3() {
  std::vector<Reaction> rs;
  rs.push_back({"predator_death", {-1, 0}, [](auto x, auto th) { return th[0] * double(x[0]); }});
  rs.push_back({"predation", {1, -1},
                [](auto x, auto th) { return th[1] * double(x[0]) * double(x[1]); }});
  rs.push_back({"prey_birth", {0, 1}, [](auto x, auto th) { return th[2] * double(x[1]); }});
  return ReactionNetwork("lv3", 2, 3, std::move(rs), nonneg_lower(2), unbounded_upper(2));
}

/// R -> 0, R + Y -> 2R + Y, R + Y -> R, Y -> 2Y.
inline ReactionNetwork lv4() {
  std::vector<Reaction> rs;
  rs.push_back({"predator_death", {-1, 0}, [](auto x, auto th) { return th[0] * double(x[0]); }});
  rs.push_back({"predator_birth", {1, 0},
                [](auto x, auto th) { return th[1] * double(x[0]) * double(x[1]); }});
  rs.push_back({"prey_death", {0, -1},
                [](auto x, auto th) { return th[2] * double(x[0]) * double(x[1]); }});
  rs.push_back({"prey_birth", {0, 1}, [](auto x, auto th) { return th[3] * double(x[1]); }});
  return ReactionNetwork("lv4", 2, 4, std::move(rs), nonneg_lower(2), unbounded_upper(2));
}

/// Schloegl model collapsed to a birth-death chain on Z_+.
inline ReactionNetwork schloegl_bd() {
  std::vector<Reaction> rs;
  rs.push_back({"birth", {1}, [](auto x, auto th) {
                  const double v = double(x[0]);
                  return (x[0] >= 2 ? th[0] * v * (v - 1.0) / 2.0 : 0.0) + th[2];
                }});
  rs.push_back({"death", {-1}, [](auto x, auto th) {
                  const double v = double(x[0]);
                  return (x[0] >= 3 ? th[1] * v * (v - 1.0) * (v - 2.0) / 6.0 : 0.0) +
                         (x[0] >= 1 ? th[3] : 0.0);
                }});
  return ReactionNetwork("schloegl_bd", 1, 4, std::move(rs), nonneg_lower(1), unbounded_upper(1));
}

/// M/M/c queue, theta = (arrival rate, per-server service rate).
inline ReactionNetwork mmc(int servers) {
  if (servers < 1) throw UsageError("M/M/c needs at least one server");
  std::vector<Reaction> rs;
  rs.push_back({"arrival", {1}, [](auto, auto th) { return th[0]; }});
  rs.push_back({"service", {-1}, [servers](auto x, auto th) {
                  return th[1] * double(std::min<std::int64_t>(x[0], servers));
                }});
  return ReactionNetwork("mmc", 1, 2, std::move(rs), nonneg_lower(1), unbounded_upper(1));
}

}  // namespace models

inline const std::vector<std::string>& builtin_model_names() {
  static const std::vector<std::string> names{"ssir", "lv3", "lv4", "schloegl_bd", "mmc"};
  return names;
}

inline ReactionNetwork builtin_model(const std::string& name, const ModelOptions& opts = {}) {
  if (name == "ssir") return models::ssir();
  if (name == "lv3") return models::lv3();
  if (name == "lv4") return models::lv4();
  if (name == "schloegl_bd") return models::schloegl_bd();
  if (name == "mmc") return models::mmc(opts.servers);
  throw UsageError("unknown model '" + name + "'");
}

/// Finite CTMC with generator `rates` (off-diagonals used, diagonal
/// ignored) written as a one-species network on {0, ..., n-1}. The single
/// parameter scales every rate.
inline ReactionNetwork finite_chain_network(const Eigen::MatrixXd& rates,
                                            std::string name = "finite_chain") {
  const Eigen::Index n = rates.rows();
  if (n < 1 || rates.cols() != n) throw UsageError("finite chain needs a square matrix");
  std::vector<Reaction> rs;
  for (Eigen::Index d = -(n - 1); d <= n - 1; ++d) {
    if (d == 0) continue;
    rs.push_back({"jump" + std::to_string(d), {d}, [rates, d](auto x, auto th) {
                    const Eigen::Index from = static_cast<Eigen::Index>(x[0]);
                    const Eigen::Index to = from + d;
                    if (to < 0 || to >= rates.rows()) return 0.0;
                    return th[0] * rates(from, to);
                  }});
  }
  return ReactionNetwork(std::move(name), 1, 1, std::move(rs), State{0}, State{n - 1});
}

}  // namespace pmctmc

#endif  // PMCTMC_REACTION_HPP
