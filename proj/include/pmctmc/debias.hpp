#ifndef PMCTMC_DEBIAS_HPP
#define PMCTMC_DEBIAS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>

#include "pmctmc/errors.hpp"

namespace pmctmc {

/// Slack under which an observed decrease of a monotone sequence is
/// treated as rounding noise. Applied to raw values in `oste` and to
/// log-values elsewhere.
inline constexpr double kMonotoneSlack = 1e-12;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// n -> (r_n, k_n) = (trunc_offset + n, acc_offset + slope * n).
struct JointSequence {
  int trunc_offset = 0;
  double acc_offset = 0.0;
  double slope = 1.0;

  int r(std::int64_t n) const { return trunc_offset + static_cast<int>(n); }
  double k(std::int64_t n) const { return acc_offset + slope * static_cast<double>(n); }

  void validate() const {
    if (trunc_offset < 0) throw UsageError("truncation offset must be >= 0");
    if (!std::isfinite(acc_offset)) throw UsageError("accuracy offset must be finite");
    if (!(slope > 0.0) || !std::isfinite(slope)) throw UsageError("slope must be positive");
  }
};

/// N ~ Geom(p): P(N = n) = p (1 - p)^n on n >= 0.
class StoppingLaw {
 public:
  StoppingLaw() = default;
  explicit StoppingLaw(double p) : p_(p) {
    if (!(p > 0.0 && p < 1.0)) throw UsageError("geometric parameter must lie in (0, 1)");
  }

  double p() const { return p_; }
  double log_pmf(std::int64_t n) const {
    return std::log(p_) + static_cast<double>(n) * std::log1p(-p_);
  }
  double pmf(std::int64_t n) const { return std::exp(log_pmf(n)); }

  template <std::uniform_random_bit_generator Rng>
  std::int64_t sample(Rng& rng) const {
    std::geometric_distribution<std::int64_t> dist(p_);
    return dist(rng);
  }

 private:
  double p_ = 0.5;
};

struct OsteResult {
  double estimate = 0.0;
  int evaluations = 0;
};

/// Z = a_w + (a_{w+N+1} - a_{w+N}) / p(N) for a nondecreasing sequence `a`.
template <class Seq>
OsteResult oste(Seq&& a, std::int64_t omega, const StoppingLaw& law, std::int64_t n) {
  if (n < 0) throw DomainError("stopping time must be >= 0");
  OsteResult out;
  const double a0 = a(omega);
  const double an = n == 0 ? a0 : a(omega + n);
  const double an1 = a(omega + n + 1);
  out.evaluations = n == 0 ? 2 : 3;
  auto check = [](std::int64_t i, std::int64_t j, double lo, double hi) {
    if (hi < lo - kMonotoneSlack * std::max(1.0, std::abs(lo))) {
      throw MonotonicityError("sequence decreased between indices " + std::to_string(i) +
                                  " and " + std::to_string(j),
                              i, j, lo, hi);
    }
  };
  check(omega, omega + n, a0, an);
  check(omega + n, omega + n + 1, an, an1);
  const double diff = std::max(0.0, an1 - an);
  out.estimate = a0 + diff / law.pmf(n);
  return out;
}

/// Var(Z) = sum_n d_n^2 / p(n) - (sum_n d_n)^2 for differences
/// d_n = a_{w+n+1} - a_{w+n}, n = 0, 1, ... (a finite prefix; the tail
/// beyond it is taken as zero).
inline double oste_variance(std::span<const double> diffs, const StoppingLaw& law) {
  double second = 0.0, first = 0.0;
  for (std::size_t n = 0; n < diffs.size(); ++n) {
    const double d = diffs[n];
    if (d == 0.0) continue;
    second += std::exp(2.0 * std::log(std::abs(d)) - law.log_pmf(static_cast<std::int64_t>(n)));
    first += d;
  }
  return second - first * first;
}

namespace detail {

/// log(expm1(x)) for x >= 0.
inline double log_expm1(double x) {
  if (x > 30.0) return x + std::log1p(-std::exp(-x));
  return std::log(std::expm1(x));
}

}  // namespace detail

/// log(p1 + (p3 - p2) / alpha) from s_i = log p_i and log_alpha = log alpha,
/// for 0 <= p1 <= p2 <= p3 and alpha in (0, 1].
inline double stable_log_combine(double s1, double s2, double s3, double log_alpha) {
  if (std::isnan(s1) || std::isnan(s2) || std::isnan(s3) || std::isnan(log_alpha)) {
    throw NumericalError("NaN passed to log combination");
  }
  if (s3 < s2) {
    if (s2 - s3 > kMonotoneSlack) {
      throw MonotonicityError("log combination needs p2 <= p3", 2, 3, s2, s3);
    }
    s3 = s2;
  }
  if (s3 == kNegInf) return kNegInf;
  if (s2 == kNegInf) return s3 - log_alpha;
  const double d = s3 - s2;
  if (s1 == kNegInf) {
    if (d == 0.0) return kNegInf;
    return s2 + detail::log_expm1(d) - log_alpha;
  }
  if (d == 0.0) return s1;
  const double x = std::exp(s2 - s1 - log_alpha) * std::expm1(d);
  if (std::isfinite(x)) return s1 + std::log1p(x);
  // Second term dominates by a factor beyond double range.
  const double t = s2 + detail::log_expm1(d) - log_alpha;
  return t + std::log1p(std::exp(s1 - t));
}

}  // namespace pmctmc

#endif  // PMCTMC_DEBIAS_HPP
