#ifndef PMCTMC_TUNING_HPP
#define PMCTMC_TUNING_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "json.hpp"
#include "pmctmc/debias.hpp"
#include "pmctmc/diagnostics.hpp"
#include "pmctmc/errors.hpp"
#include "pmctmc/expmono.hpp"
#include "pmctmc/likelihood.hpp"
#include "pmctmc/sampler.hpp"

namespace pmctmc {

/// log a_r^k of one estimator sequence at fixed theta.
using LogTarget = std::function<double(int r, double k)>;

inline LogTarget sequence_target(const LikelihoodModel& model, std::size_t j, const Theta& theta,
                                 Method method, std::optional<double> global_q_bar,
                                 FlopMeter& meter) {
  return [&model, j, theta, method, global_q_bar, &meter](int r, double k) {
    return model.log_approx(j, r, k, theta, method, global_q_bar, meter);
  };
}

struct ProfileOptions {
  double eps = 1e-8;
  int r_explore = 15;
  int r_cap = 200;
  double k_start = -10.0;
  double k_cap = 30.0;
};

/// Output of the two-phase convergence scan. Values are logs; comparisons
/// against eps are made relative to the limit guess a*.
struct ConvergenceProfile {
  std::vector<std::pair<int, double>> trunc;    // (r, log a_r^{k_hi})
  std::vector<std::pair<double, double>> acc;   // (k, log a_{r_eps}^k)
  double log_a_star = kNegInf;
  int r_eps = 0;
  double k_eps = 0.0;
  double k_hi = 8.0;
};

namespace detail {

/// (a_new - a_old) / a_new from logs; infinite while a_new = 0.
inline double rel_increase(double s_new, double s_old) {
  if (s_new == kNegInf) return std::numeric_limits<double>::infinity();
  return -std::expm1(s_old - s_new);
}

/// a_{j+1} - a_j divided by a*, from logs.
inline std::vector<double> scaled_diffs(std::span<const double> logs, double log_a_star) {
  std::vector<double> d;
  for (std::size_t j = 0; j + 1 < logs.size(); ++j) {
    d.push_back(std::exp(logs[j + 1] - log_a_star) - std::exp(logs[j] - log_a_star));
  }
  return d;
}

}  // namespace detail

/// Separate analysis of the truncation and accuracy sequences: scan r at a
/// fixed high accuracy until the relative increase drops below eps (and at
/// least r_explore levels are seen), then scan integer k from k_start at
/// that truncation until a_{r_eps}^k is within eps of the limit guess.
inline ConvergenceProfile profile(const LogTarget& a, const ProfileOptions& opts = {}) {
  if (!(opts.eps > 0.0 && opts.eps < 1.0)) throw UsageError("profile eps must lie in (0, 1)");
  ConvergenceProfile out;
  out.k_hi = -std::log10(opts.eps);
  double s_old = kNegInf, s_new = kNegInf;
  double delta = std::numeric_limits<double>::infinity();
  int r = 0;
  while ((r < opts.r_explore || delta >= opts.eps) && r <= opts.r_cap) {
    s_new = a(r, out.k_hi);
    out.trunc.emplace_back(r, s_new);
    delta = detail::rel_increase(s_new, s_old);
    s_old = s_new;
    ++r;
  }
  out.r_eps = r - 1;
  out.log_a_star = s_new;
  delta = 1.0;
  double k = opts.k_start;
  while (delta >= opts.eps && k <= opts.k_cap) {
    const double s = a(out.r_eps, k);
    out.acc.emplace_back(k, s);
    delta = s == kNegInf ? 1.0 : -std::expm1(s - out.log_a_star);
    k += 1.0;
  }
  out.k_eps = k - 1.0;
  return out;
}

/// Index of the last peak of a difference profile: the largest j with
/// d_j >= floor, d_j >= d_{j-1} and d_j > d_{j+1}. Differences below the
/// floor are treated as noise.
inline std::optional<std::size_t> last_peak(std::span<const double> d, double floor) {
  std::optional<std::size_t> best;
  for (std::size_t j = 0; j < d.size(); ++j) {
    if (!(d[j] >= floor)) continue;
    const bool left = j == 0 || d[j] >= d[j - 1];
    const bool right = j + 1 == d.size() || d[j] > d[j + 1];
    if (left && right) best = j;
  }
  return best;
}

struct Offsets {
  int trunc = 0;
  double acc = 0.0;
};

/// Preliminary offsets: the later of the last difference peak and the first
/// index whose value reaches p_min a*, for each profile.
inline Offsets preliminary_offsets(const ConvergenceProfile& prof, double p_min, double floor) {
  const double log_target = prof.log_a_star + std::log(p_min);
  auto pick = [&](const auto& pts) {
    using Index = std::decay_t<decltype(pts.front().first)>;
    std::vector<double> logs;
    for (const auto& [i, v] : pts) logs.push_back(v);
    const auto d = detail::scaled_diffs(logs, prof.log_a_star);
    const auto peak = last_peak(d, floor);
    const Index peak_index = pts[peak.value_or(0)].first;
    Index first = pts.back().first;
    for (const auto& [i, v] : pts) {
      if (v >= log_target) {
        first = i;
        break;
      }
    }
    return std::max(peak_index, first);
  };
  return {pick(prof.trunc), pick(prof.acc)};
}

/// Slope of the joint sequence: start from sigma_default or the ratio of
/// remaining truncation to remaining accuracy range, doubling whenever the
/// joint sequence decreases.
inline double tune_sigma(const LogTarget& a, const ConvergenceProfile& prof, const Offsets& off,
                         double sigma_default = 0.1) {
  double sigma = sigma_default;
  if (prof.k_eps > off.acc) {
    sigma = std::max(sigma_default,
                     static_cast<double>(prof.r_eps - off.trunc) / (prof.k_eps - off.acc));
  }
  double a_old = a(off.trunc, off.acc);
  std::int64_t n = 0;
  int r = off.trunc;
  double k = off.acc;
  while (r <= prof.r_eps && k <= prof.k_eps) {
    r = off.trunc + static_cast<int>(n);
    k = off.acc + sigma * static_cast<double>(n);
    double a_new = a(r, k);
    while (a_old - a_new > kMonotoneSlack && k <= prof.k_eps) {
      sigma *= 2.0;
      k = off.acc + sigma * static_cast<double>(n);
      a_new = a(r, k);
    }
    a_old = a_new;
    ++n;
  }
  return sigma;
}

/// p = clamp(1 - exp(beta), lo, hi) where beta is the no-intercept least
/// squares slope of log d_n - log d_0 on n. Uses the leading run of
/// positive differences at or above `floor`.
inline double fit_p(std::span<const double> diffs, double lo = 0.4, double hi = 0.9,
                    double floor = 1e-13) {
  std::size_t usable = 0;
  while (usable < diffs.size() && diffs[usable] > 0.0 && diffs[usable] >= floor) ++usable;
  if (usable < 2) return hi;
  const double l0 = std::log(diffs[0]);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t n = 1; n < usable; ++n) {
    const double x = static_cast<double>(n);
    sxy += x * (std::log(diffs[n]) - l0);
    sxx += x * x;
  }
  const double beta = sxy / sxx;
  return std::clamp(-std::expm1(beta), lo, hi);
}

struct SequenceTuning {
  ConvergenceProfile profile;
  Offsets preliminary;
  JointSequence sequence;
  double p = 0.9;
};

struct TuningOptions {
  ProfileOptions profile;
  double sigma_default = 0.1;
  double p_lo = 0.4;
  double p_hi = 0.9;
  /// Joint-sequence terms examined past the offset when fitting p.
  int fit_terms = 8;
};

/// Offsets, slope and geometric parameter for one sequence from its profile.
inline SequenceTuning tune_sequence(const LogTarget& a, const ConvergenceProfile& prof,
                                    double p_min, const TuningOptions& opts = {}) {
  SequenceTuning out;
  out.profile = prof;
  const double floor = opts.profile.eps;
  out.preliminary = preliminary_offsets(prof, p_min, floor);
  const double sigma = tune_sigma(a, prof, out.preliminary, opts.sigma_default);
  const auto& off = out.preliminary;
  auto k_of = [&](std::int64_t n) {
    return std::min(off.acc + sigma * static_cast<double>(n), opts.profile.k_cap);
  };
  const std::int64_t n_scan =
      std::max<std::int64_t>(prof.r_eps - off.trunc, 0) + 2;
  std::vector<double> vals;
  for (std::int64_t n = 0; n <= n_scan && off.trunc + n <= opts.profile.r_cap; ++n) {
    vals.push_back(a(off.trunc + static_cast<int>(n), k_of(n)));
  }
  const auto d = detail::scaled_diffs(vals, prof.log_a_star);
  const std::size_t n_peak = last_peak(d, floor).value_or(0);
  const double log_target = prof.log_a_star + std::log(p_min);
  std::size_t n_off = vals.size() - 1;
  for (std::size_t n = n_peak; n < vals.size(); ++n) {
    if (vals[n] >= log_target) {
      n_off = n;
      break;
    }
  }
  out.sequence.trunc_offset = off.trunc + static_cast<int>(n_off);
  out.sequence.acc_offset = k_of(static_cast<std::int64_t>(n_off));
  out.sequence.slope = sigma;
  // Differences of the re-offset sequence for the tail fit.
  std::vector<double> tail;
  for (std::size_t n = n_off; n < vals.size(); ++n) tail.push_back(vals[n]);
  for (int m = 0; static_cast<int>(tail.size()) < opts.fit_terms + 1 && m < 64; ++m) {
    const auto n = static_cast<std::int64_t>(n_off + tail.size());
    if (off.trunc + n > opts.profile.r_cap) break;
    tail.push_back(a(off.trunc + static_cast<int>(n), k_of(n)));
  }
  out.p = fit_p(detail::scaled_diffs(tail, prof.log_a_star), opts.p_lo, opts.p_hi);
  return out;
}

/// Profiles of every estimator sequence at theta.
inline std::vector<ConvergenceProfile> profile_model(const LikelihoodModel& model,
                                                     const Theta& theta, Method method,
                                                     std::optional<double> global_q_bar,
                                                     const ProfileOptions& opts,
                                                     FlopMeter& meter) {
  std::vector<ConvergenceProfile> out;
  for (std::size_t j = 0; j < model.n_sequences(); ++j) {
    out.push_back(profile(sequence_target(model, j, theta, method, global_q_bar, meter), opts));
  }
  return out;
}

/// Tuned OsteConfig for one p_min from per-sequence profiles.
inline OsteConfig tune_config(const LikelihoodModel& model, const Theta& theta, Method method,
                              std::optional<double> global_q_bar,
                              const std::vector<ConvergenceProfile>& profiles, double p_min,
                              const TuningOptions& opts, FlopMeter& meter) {
  OsteConfig cfg;
  cfg.mode = model.mode();
  cfg.method = method;
  cfg.global_q_bar = global_q_bar;
  for (std::size_t j = 0; j < model.n_sequences(); ++j) {
    const auto t = tune_sequence(sequence_target(model, j, theta, method, global_q_bar, meter),
                                 profiles[j], p_min, opts);
    cfg.sequences.push_back(t.sequence);
    cfg.laws.emplace_back(t.p);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Mode and curvature of the high-accuracy approximate posterior

/// log prior + sum_j log a^{k_eps}_{r_eps} for each sequence's profile.
inline std::function<double(const Theta&)> reference_log_posterior(
    const LikelihoodModel& model, const Prior& prior, Method method,
    std::optional<double> global_q_bar, const std::vector<ConvergenceProfile>& profiles,
    FlopMeter& meter) {
  return [&model, &prior, method, global_q_bar, profiles, &meter](const Theta& theta) {
    const double lp = prior.log_density(theta);
    if (lp == kNegInf) return kNegInf;
    double total = lp;
    for (std::size_t j = 0; j < model.n_sequences(); ++j) {
      total += model.log_approx(j, profiles[j].r_eps, std::max(profiles[j].k_eps, profiles[j].k_hi),
                                theta, method, global_q_bar, meter);
    }
    return total;
  };
}

/// Coordinate-wise golden-section search in log theta.
inline Theta find_map(const std::function<double(const Theta&)>& f, Theta theta, int sweeps = 4,
                      double half_width = 1.5, int iters = 30) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int sw = 0; sw < sweeps; ++sw) {
    const double w = half_width / std::pow(2.0, sw);
    for (std::size_t j = 0; j < theta.size(); ++j) {
      auto at = [&](double u) {
        Theta th = theta;
        th[j] = std::exp(u);
        return f(th);
      };
      const double c = std::log(theta[j]);
      double lo = c - w, hi = c + w;
      double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
      double f1 = at(x1), f2 = at(x2);
      for (int it = 0; it < iters; ++it) {
        if (f1 >= f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - g * (hi - lo);
          f1 = at(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + g * (hi - lo);
          f2 = at(x2);
        }
      }
      const double best = 0.5 * (lo + hi);
      if (at(best) >= f(theta)) theta[j] = std::exp(best);
    }
  }
  return theta;
}

/// Laplace covariance: inverse of the negative finite-difference Hessian of
/// f at theta. Falls back to a diagonal guess when that is not positive
/// definite.
inline Eigen::MatrixXd laplace_covariance(const std::function<double(const Theta&)>& f,
                                          const Theta& theta, double rel_step = 1e-3) {
  const auto d = static_cast<Eigen::Index>(theta.size());
  Eigen::MatrixXd h(d, d);
  std::vector<double> step(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) step[j] = rel_step * theta[j];
  const double f0 = f(theta);
  auto shifted = [&](std::size_t i, double si, std::size_t j, double sj) {
    Theta th = theta;
    th[i] += si * step[i];
    th[j] += sj * step[j];
    return f(th);
  };
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    h(i, i) = (shifted(ui, 1, ui, 0) - 2.0 * f0 + shifted(ui, -1, ui, 0)) / (step[ui] * step[ui]);
    for (Eigen::Index j = 0; j < i; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const double v = (shifted(ui, 1, uj, 1) - shifted(ui, 1, uj, -1) - shifted(ui, -1, uj, 1) +
                        shifted(ui, -1, uj, -1)) /
                       (4.0 * step[ui] * step[uj]);
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  const Eigen::MatrixXd neg = -h;
  Eigen::LLT<Eigen::MatrixXd> llt(neg);
  if (llt.info() == Eigen::Success && neg.allFinite()) {
    Eigen::MatrixXd v = llt.solve(Eigen::MatrixXd::Identity(d, d));
    if (v.allFinite()) return 0.5 * (v + v.transpose());
  }
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double curv = -h(i, i);
    const double fallback = 0.01 * theta[static_cast<std::size_t>(i)] * theta[static_cast<std::size_t>(i)];
    v(i, i) = curv > 0.0 && std::isfinite(curv) ? 1.0 / curv : fallback;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Grid search over p_min

/// Standard deviation of `draws` log-likelihood estimates at theta, with the
/// auxiliary stream seeded by `seed` (common across configurations).
/// Infinite if any estimate fails or is zero.
inline double sigma_zeta(const LikelihoodModel& model, const OsteConfig& cfg, const Theta& theta,
                         std::size_t draws, std::uint64_t seed, FlopMeter& meter) {
  std::mt19937_64 aux(seed);
  std::vector<double> v;
  try {
    for (std::size_t i = 0; i < draws; ++i) {
      const double x = model.log_estimate(theta, cfg, aux, meter);
      if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
      v.push_back(x);
    }
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::infinity();
  }
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

struct GridOptions {
  std::vector<double> p_mins{0.0, 0.01, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9};
  std::vector<double> sigma_bars{0.1, 1.0, 1.5, 2.0};
  std::size_t sigma_draws = 100;
  /// Multipliers of 2.38^2 / d for the proposal scale.
  std::vector<double> alphas{0.25, 0.5, 1.0, 2.0};
  std::size_t short_iters = 300;
  std::uint64_t seed = 1;
  TuningOptions tuning;
};

struct GridEntry {
  double p_min = 0.0;
  OsteConfig config;
  double sigma_zeta = 0.0;
  std::uint64_t flops = 0;
};

struct GridResult {
  std::vector<GridEntry> entries;
  std::size_t chosen = 0;
  double alpha = 1.0;
  double ess_per_gflop = 0.0;
  Eigen::MatrixXd proposal_cov;
  bool met_target = true;
};

/// Tunes one configuration per p_min at theta_map, shortlists the cheapest
/// one meeting each sigma-bar target, and picks the shortlisted
/// configuration and proposal scale alpha with the best ESS per GFLOP on
/// short runs.
inline GridResult grid_select(std::shared_ptr<const LikelihoodModel> model, const Prior& prior,
                              const Theta& theta_map, const Eigen::MatrixXd& v_hat, Method method,
                              std::optional<double> global_q_bar,
                              const std::vector<ConvergenceProfile>& profiles,
                              const GridOptions& opts = {}) {
  GridResult out;
  for (double p_min : opts.p_mins) {
    FlopMeter tune_meter;
    GridEntry e;
    e.p_min = p_min;
    e.config = tune_config(*model, theta_map, method, global_q_bar, profiles, p_min, opts.tuning,
                           tune_meter);
    FlopMeter meter;
    e.sigma_zeta = sigma_zeta(*model, e.config, theta_map, opts.sigma_draws, opts.seed, meter);
    e.flops = meter.flops();
    out.entries.push_back(std::move(e));
  }
  std::vector<std::size_t> shortlist;
  for (double bar : opts.sigma_bars) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < out.entries.size(); ++i) {
      const auto& e = out.entries[i];
      if (e.sigma_zeta <= bar && (!best || e.flops < out.entries[*best].flops)) best = i;
    }
    if (best && std::find(shortlist.begin(), shortlist.end(), *best) == shortlist.end()) {
      shortlist.push_back(*best);
    }
  }
  if (shortlist.empty()) {
    // Best effort: the smallest sigma_zeta.
    out.met_target = false;
    std::size_t best = 0;
    for (std::size_t i = 1; i < out.entries.size(); ++i) {
      if (out.entries[i].sigma_zeta < out.entries[best].sigma_zeta) best = i;
    }
    shortlist.push_back(best);
  }
  const double d = static_cast<double>(theta_map.size());
  double best_score = -1.0;
  for (std::size_t idx : shortlist) {
    const auto ll = pseudo_marginal(model, out.entries[idx].config);
    for (double a : opts.alphas) {
      const double alpha = a * 2.38 * 2.38 / d;
      SamplerConfig sc;
      sc.n_samples = opts.short_iters;
      sc.seed = mix_seed(opts.seed ^ mix_seed(idx * 131 + static_cast<std::uint64_t>(a * 1000)));
      sc.proposal_cov = alpha * v_hat;
      sc.theta0 = theta_map;
      double score = 0.0;
      try {
        const Trace tr = run(ll, prior, sc);
        score = ess_per_gflop(tr, tr.size() / 10);
      } catch (const NumericalError&) {
        score = 0.0;
      }
      if (score > best_score) {
        best_score = score;
        out.chosen = idx;
        out.alpha = alpha;
      }
    }
  }
  out.ess_per_gflop = best_score;
  out.proposal_cov = out.alpha * v_hat;
  return out;
}

/// Whole pipeline from an initial guess: profile at theta_init, find the
/// mode of the high-accuracy approximate posterior and its Laplace
/// covariance, re-profile at the mode, then grid-select.
struct AutoTuneResult {
  Theta theta_map;
  Eigen::MatrixXd v_hat;
  std::vector<ConvergenceProfile> profiles;
  GridResult grid;
  OsteConfig config;
  Eigen::MatrixXd proposal_cov;
  std::uint64_t tuning_flops = 0;
};

inline AutoTuneResult auto_tune(std::shared_ptr<const LikelihoodModel> model, const Prior& prior,
                                const Theta& theta_init, Method method,
                                std::optional<double> global_q_bar, const GridOptions& opts = {}) {
  AutoTuneResult out;
  FlopMeter meter;
  const auto init_profiles =
      profile_model(*model, theta_init, method, global_q_bar, opts.tuning.profile, meter);
  const auto f = reference_log_posterior(*model, prior, method, global_q_bar, init_profiles, meter);
  out.theta_map = find_map(f, theta_init);
  out.v_hat = laplace_covariance(f, out.theta_map);
  out.profiles = profile_model(*model, out.theta_map, method, global_q_bar, opts.tuning.profile, meter);
  out.grid = grid_select(model, prior, out.theta_map, out.v_hat, method, global_q_bar,
                         out.profiles, opts);
  out.config = out.grid.entries[out.grid.chosen].config;
  out.proposal_cov = out.grid.proposal_cov;
  out.tuning_flops = meter.flops();
  return out;
}

// ---------------------------------------------------------------------------
// Serialization of tuned configurations

inline nlohmann::json config_to_json(const OsteConfig& cfg) {
  nlohmann::json j;
  j["mode"] = to_string(cfg.mode);
  j["method"] = to_string(cfg.method);
  if (cfg.global_q_bar) j["global_q_bar"] = *cfg.global_q_bar;
  j["fallback_k"] = cfg.fallback_k;
  j["sequences"] = nlohmann::json::array();
  for (std::size_t i = 0; i < cfg.sequences.size(); ++i) {
    j["sequences"].push_back({{"trunc_offset", cfg.sequences[i].trunc_offset},
                              {"acc_offset", cfg.sequences[i].acc_offset},
                              {"slope", cfg.sequences[i].slope},
                              {"p", cfg.laws[i].p()}});
  }
  return j;
}

inline OsteConfig config_from_json(const nlohmann::json& j) {
  try {
    OsteConfig cfg;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode != "IA" && mode != "RA") throw UsageError("unknown estimator mode '" + mode + "'");
    cfg.mode = mode == "IA" ? EstimatorMode::IA : EstimatorMode::RA;
    cfg.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("global_q_bar")) cfg.global_q_bar = j["global_q_bar"].get<double>();
    cfg.fallback_k = j.value("fallback_k", 14.0);
    for (const auto& s : j.at("sequences")) {
      JointSequence seq;
      seq.trunc_offset = s.at("trunc_offset").get<int>();
      seq.acc_offset = s.at("acc_offset").get<double>();
      seq.slope = s.at("slope").get<double>();
      cfg.sequences.push_back(seq);
      cfg.laws.emplace_back(s.at("p").get<double>());
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed tuned configuration: ") + e.what());
  }
}

}  // namespace pmctmc

#endif  // PMCTMC_TUNING_HPP
