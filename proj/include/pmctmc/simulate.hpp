#ifndef PMCTMC_SIMULATE_HPP
#define PMCTMC_SIMULATE_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "pmctmc/dataset.hpp"
#include "pmctmc/errors.hpp"
#include "pmctmc/reaction.hpp"

namespace pmctmc {

struct Jump {
  State state;
  double time = 0.0;
};

/// Piecewise-constant path: jumps[0] = (x0, 0), then each jump time and the
/// state entered.
struct Path {
  std::vector<Jump> jumps;

  /// Right-continuous value at time t >= 0.
  const State& at(double t) const {
    std::size_t lo = 0, hi = jumps.size();
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      if (jumps[mid].time <= t) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return jumps[lo].state;
  }
};

inline constexpr std::uint64_t kDefaultExplosionGuard = 10'000'000;

/// Gillespie's direct method on [0, t_end].
template <std::uniform_random_bit_generator Rng>
Path gillespie(const ReactionNetwork& net, const Theta& theta, const State& x0, double t_end,
               Rng& rng, std::uint64_t explosion_guard = kDefaultExplosionGuard) {
  if (!(t_end > 0.0)) throw DomainError("end time must be positive");
  net.check_state(x0);
  net.check_theta(theta);
  Path path;
  path.jumps.push_back({x0, 0.0});
  State x = x0;
  double t = 0.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uint64_t count = 0;
  while (true) {
    const auto row = net.rate_row(x, theta);
    const double exit = row.exit_rate();
    if (exit <= 0.0) break;  // absorbing
    std::exponential_distribution<double> hold(exit);
    t += hold(rng);
    if (t > t_end) break;
    double u = unif(rng) * exit;
    std::size_t pick = row.targets.size() - 1;
    for (std::size_t i = 0; i < row.targets.size(); ++i) {
      u -= row.targets[i].second;
      if (u < 0.0) {
        pick = i;
        break;
      }
    }
    x = row.targets[pick].first;
    path.jumps.push_back({x, t});
    if (++count > explosion_guard) {
      throw ExplosionError("more than " + std::to_string(explosion_guard) + " jumps before t=" +
                           std::to_string(t_end));
    }
  }
  return path;
}

/// Path observed at `schedule` (nondecreasing, starting at or after 0).
template <std::uniform_random_bit_generator Rng>
Dataset sample_dataset(const ReactionNetwork& net, const Theta& theta, const State& x0,
                       std::span<const double> schedule, Rng& rng,
                       std::uint64_t explosion_guard = kDefaultExplosionGuard) {
  if (schedule.empty()) throw UsageError("empty observation schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] >= 0.0) || (i > 0 && !(schedule[i] > schedule[i - 1]))) {
      throw UsageError("observation times must be >= 0 and strictly increasing");
    }
  }
  const double t_end = std::max(schedule.back(), 1e-300);
  const Path path = gillespie(net, theta, x0, t_end, rng, explosion_guard);
  Dataset data;
  for (double t : schedule) data.observations.push_back({t, path.at(t)});
  return data;
}

/// 0, dt, 2 dt, ... up to t_end (inclusive within rounding).
inline std::vector<double> regular_schedule(double t_end, double dt) {
  if (!(dt > 0.0) || !(t_end >= 0.0)) throw UsageError("schedule needs dt > 0 and t_end >= 0");
  std::vector<double> out;
  const auto n = static_cast<std::int64_t>(std::floor(t_end / dt + 1e-9));
  for (std::int64_t i = 0; i <= n; ++i) out.push_back(static_cast<double>(i) * dt);
  return out;
}

}  // namespace pmctmc

#endif  // PMCTMC_SIMULATE_HPP
