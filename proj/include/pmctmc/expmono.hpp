#ifndef PMCTMC_EXPMONO_HPP
#define PMCTMC_EXPMONO_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "pmctmc/errors.hpp"
#include "pmctmc/statespace.hpp"

namespace pmctmc {

/// Counts floating-point operations spent in matrix products.
/// One meter per thread of work; combine by summing.
class FlopMeter {
 public:
  void add(std::uint64_t flops) { flops_ += flops; }
  std::uint64_t flops() const { return flops_; }
  double gflops() const { return static_cast<double>(flops_) * 1e-9; }
  FlopMeter& operator+=(const FlopMeter& other) {
    flops_ += other.flops_;
    return *this;
  }

 private:
  std::uint64_t flops_ = 0;
};

enum class Method { skeletoid, uniformization_seq, uniformization_global };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::skeletoid: return "skeletoid";
    case Method::uniformization_seq: return "uniformization_seq";
    case Method::uniformization_global: return "uniformization_global";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "skeletoid") return Method::skeletoid;
  if (s == "uniformization_seq" || s == "uniformization") return Method::uniformization_seq;
  if (s == "uniformization_global") return Method::uniformization_global;
  throw UsageError("unknown method '" + s + "'");
}

// ---------------------------------------------------------------------------
// Storage-size helpers used for FLOP accounting.

inline std::uint64_t stored_entries(const SparseMatrix& m) {
  return static_cast<std::uint64_t>(m.nonZeros());
}
inline std::uint64_t stored_entries(const Eigen::MatrixXd& m) {
  return static_cast<std::uint64_t>(m.rows()) * static_cast<std::uint64_t>(m.cols());
}

inline double min_diagonal(const SparseMatrix& q) {
  return q.rows() > 0 ? Eigen::VectorXd(q.diagonal()).minCoeff() : 0.0;
}
inline double min_diagonal(const Eigen::MatrixXd& q) {
  return q.rows() > 0 ? q.diagonal().minCoeff() : 0.0;
}

// ---------------------------------------------------------------------------
// Accuracy selection

/// Accuracy index k means a target l-infinity error of 10^{-k}; k may be
/// any real number.
inline double epsilon_from_accuracy(double k) { return std::pow(10.0, -k); }

/// 1 - F(s; lambda) for a Poisson(lambda) distribution.
inline double poisson_upper_tail(std::int64_t s, double lambda) {
  if (lambda <= 0.0) return 0.0;
  if (s < 0) return 1.0;
  return boost::math::gamma_p(static_cast<double>(s) + 1.0, lambda);
}

/// Smallest s with F(s; lambda) >= 1 - eps.
inline std::int64_t select_s_uniformization(double lambda, double eps) {
  if (!std::isfinite(lambda) || lambda < 0.0) throw DomainError("lambda must be finite and >= 0");
  if (!(eps > 0.0)) throw DomainError("target error must be positive");
  if (eps >= 1.0 || lambda == 0.0) return 0;
  // Cornish-Fisher starting point, then walk the regularized gamma tail.
  // Summing pmf terms loses about lambda ulps to cancellation in the log
  // weights, which shows at eps near 1e-10 once lambda is in the thousands.
  const double z = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * eps);
  const double cf = lambda + z * std::sqrt(lambda) + (z * z - 1.0) / 6.0;
  auto n = static_cast<std::int64_t>(std::max(0.0, std::floor(cf) - 10.0));
  while (n > 0 && poisson_upper_tail(n, lambda) <= eps) n = std::max<std::int64_t>(0, n - 16);
  while (poisson_upper_tail(n, lambda) > eps) ++n;
  return n;
}

/// s = max(0, ceil(log2((qbar t)^2 / (2 eps)))).
inline std::int64_t select_s_skeletoid(double qbar_t, double eps) {
  if (!(eps > 0.0)) throw DomainError("target error must be positive");
  const double x = qbar_t * qbar_t / (2.0 * eps);
  if (!(x > 1.0)) return 0;
  return static_cast<std::int64_t>(std::ceil(std::log2(x)));
}

/// Number of terms (uniformization) or squarings (skeletoid) for accuracy
/// index k when the uniformization rate times t is `lambda` >= 0.
inline std::int64_t select_s(Method method, double lambda, double k) {
  const double eps = epsilon_from_accuracy(k);
  if (method == Method::skeletoid) return select_s_skeletoid(lambda, eps);
  return select_s_uniformization(lambda, eps);
}

/// Uniform-in-row bound 1 - e^{-lambda}(1 + lambda 2^{-s})^{2^s} on the
/// probability of more than one jump in some bin; bounds the skeletoid
/// l-infinity error when lambda = -qbar t.
inline double skeletoid_error_bound(double lambda, std::int64_t s) {
  if (lambda <= 0.0) return 0.0;
  const double bins = std::ldexp(1.0, static_cast<int>(s));
  return -std::expm1(-lambda + bins * std::log1p(lambda / bins));
}

// ---------------------------------------------------------------------------
// Skeletoid

/// Entry x != y of S(delta).
inline double skeletoid_offdiag(double qxy, double qxx, double qyy, double delta) {
  const double scale = std::max(std::abs(qxx), std::abs(qyy));
  const double d = qyy - qxx;
  if (std::abs(d) <= 1e-12 * scale) return qxy * delta * std::exp(qxx * delta);
  if (d > 0.0) return qxy * std::exp(qyy * delta) * (-std::expm1(-d * delta)) / d;
  return qxy * std::exp(qxx * delta) * std::expm1(d * delta) / d;
}

/// S(delta) stored as B = S(delta) - I, with the diagonal evaluated as
/// expm1(q_xx delta) so that B stays accurate when delta is tiny.
template <class Mat>
struct SkeletoidBase {
  Mat minus_identity;
  double delta = 0.0;

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd s = Eigen::MatrixXd(minus_identity);
    s.diagonal().array() += 1.0;
    return s;
  }
};

inline SkeletoidBase<SparseMatrix> skeletoid_base(const SparseMatrix& q, double delta) {
  if (!(delta > 0.0)) throw DomainError("skeletoid step must be positive");
  SparseMatrix b = q;
  const Eigen::VectorXd diag = q.diagonal();
  for (Eigen::Index i = 0; i < b.outerSize(); ++i) {
    for (SparseMatrix::InnerIterator it(b, i); it; ++it) {
      const Eigen::Index j = it.col();
      if (j == i) {
        it.valueRef() = std::expm1(diag(i) * delta);
      } else {
        it.valueRef() = skeletoid_offdiag(it.value(), diag(i), diag(j), delta);
      }
    }
  }
  return {std::move(b), delta};
}

inline SkeletoidBase<Eigen::MatrixXd> skeletoid_base(const Eigen::MatrixXd& q, double delta) {
  if (!(delta > 0.0)) throw DomainError("skeletoid step must be positive");
  const Eigen::Index n = q.rows();
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      b(i, j) = i == j ? std::expm1(q(i, i) * delta)
                       : (q(i, j) == 0.0 ? 0.0 : skeletoid_offdiag(q(i, j), q(i, i), q(j, j), delta));
    }
  }
  return {std::move(b), delta};
}

inline SkeletoidBase<SparseMatrix> skeletoid_base(const TruncatedRateMatrix& q, double delta) {
  return skeletoid_base(q.q, delta);
}

/// In-place B <- 2B + B^2, `times` times: (I + B)^{2^times} = I + B_out.
inline void implicit_square(Eigen::MatrixXd& b, std::int64_t times, FlopMeter& meter) {
  const auto n = static_cast<std::uint64_t>(b.rows());
  Eigen::MatrixXd sq(b.rows(), b.cols());
  for (std::int64_t i = 0; i < times; ++i) {
    sq.noalias() = b * b;
    b *= 2.0;
    b += sq;
    meter.add(2 * n * n * n);
  }
}

/// (k1, k2) split with k1 + k2 = k minimizing
/// beta k1 b^3 + m b^2 2^{k2}; returns k2.
inline std::int64_t skeletoid_split(std::int64_t k, std::int64_t b, std::int64_t m,
                                    double beta = 0.1) {
  if (k <= 0 || m <= 0 || b <= 0) return 0;
  const double bd = static_cast<double>(b), md = static_cast<double>(m);
  const double x_star = std::log2(beta * bd / (std::log(2.0) * md));
  auto cost = [&](double y) {
    return beta * (static_cast<double>(k) - y) * bd * bd * bd + md * bd * bd * std::exp2(y);
  };
  const double lo = std::floor(x_star), hi = std::ceil(x_star);
  const double best = cost(lo) <= cost(hi) ? lo : hi;
  return static_cast<std::int64_t>(std::max(0.0, std::min(static_cast<double>(k), best)));
}

namespace detail {

inline void check_rows(std::span<const Eigen::Index> rows, Eigen::Index dim) {
  for (auto r : rows) {
    if (r < 0 || r >= dim) {
      throw DomainError("row index " + std::to_string(r) + " outside matrix of dimension " +
                        std::to_string(dim));
    }
  }
}

inline Eigen::MatrixXd selector(std::span<const Eigen::Index> rows, Eigen::Index dim) {
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t u = 0; u < rows.size(); ++u) l(static_cast<Eigen::Index>(u), rows[u]) = 1.0;
  return l;
}

inline std::vector<Eigen::Index> all_rows(Eigen::Index dim) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(dim));
  for (Eigen::Index i = 0; i < dim; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

inline SparseMatrix identity_like(const SparseMatrix& q) {
  SparseMatrix id(q.rows(), q.cols());
  id.setIdentity();
  return id;
}
inline Eigen::MatrixXd identity_like(const Eigen::MatrixXd& q) {
  return Eigen::MatrixXd::Identity(q.rows(), q.cols());
}

}  // namespace detail

/// Rows `rows` of S(t 2^{-s})^{2^s}. Forms S^{2^{k1}} by k1 implicit
/// squarings and applies it 2^{k2} times to the selected rows, with the
/// split chosen by the cost model.
template <class Mat>
Eigen::MatrixXd skeletoid_rows(const Mat& q, double t, std::int64_t s,
                               std::span<const Eigen::Index> rows, FlopMeter& meter,
                               double beta = 0.1) {
  const Eigen::Index dim = q.rows();
  detail::check_rows(rows, dim);
  if (s < 0) throw DomainError("skeletoid needs s >= 0");
  if (!(t > 0.0)) throw DomainError("time must be positive");
  const auto m = static_cast<std::int64_t>(rows.size());
  const std::int64_t k2 = skeletoid_split(s, dim, m, beta);
  const std::int64_t k1 = s - k2;
  const double delta = std::ldexp(t, -static_cast<int>(s));
  auto base = skeletoid_base(q, delta);
  Eigen::MatrixXd v = detail::selector(rows, dim);
  const std::uint64_t passes = std::uint64_t{1} << k2;
  const auto mu = static_cast<std::uint64_t>(m);
  if (k1 == 0) {
    const Mat& b = base.minus_identity;
    for (std::uint64_t p = 0; p < passes; ++p) {
      v += v * b;
      meter.add(2 * stored_entries(b) * mu);
    }
    return v;
  }
  Eigen::MatrixXd b = Eigen::MatrixXd(base.minus_identity);
  implicit_square(b, k1, meter);
  const auto n = static_cast<std::uint64_t>(dim);
  Eigen::MatrixXd tmp(v.rows(), v.cols());
  for (std::uint64_t p = 0; p < passes; ++p) {
    tmp.noalias() = v * b;
    v += tmp;
    meter.add(2 * n * n * mu);
  }
  return v;
}

/// Full skeletoid approximation S(t 2^{-s})^{2^s} via implicit squaring.
template <class Mat>
Eigen::MatrixXd skeletoid(const Mat& q, double t, std::int64_t s, FlopMeter& meter) {
  if (s < 0) throw DomainError("skeletoid needs s >= 0");
  if (!(t > 0.0)) throw DomainError("time must be positive");
  const double delta = std::ldexp(t, -static_cast<int>(s));
  Eigen::MatrixXd b = Eigen::MatrixXd(skeletoid_base(q, delta).minus_identity);
  implicit_square(b, s, meter);
  b.diagonal().array() += 1.0;
  return b;
}

inline Eigen::MatrixXd skeletoid(const TruncatedRateMatrix& q, double t, std::int64_t s,
                                 FlopMeter& meter) {
  return skeletoid(q.q, t, s, meter);
}

// ---------------------------------------------------------------------------
// Uniformization

/// Rows `rows` of sum_{n<=s} e^{qbar t} (-qbar t)^n / n! P^n with
/// P = I + Q/(-qbar). Poisson weights are evaluated in log space, so large
/// -qbar t neither underflows e^{qbar t} nor overflows the powers.
template <class Mat>
Eigen::MatrixXd uniformization_rows(const Mat& q, double t, std::int64_t s, double q_bar,
                                    std::span<const Eigen::Index> rows, FlopMeter& meter) {
  const Eigen::Index dim = q.rows();
  detail::check_rows(rows, dim);
  if (s < 0) throw DomainError("uniformization needs s >= 0");
  if (!(t > 0.0)) throw DomainError("time must be positive");
  if (!std::isfinite(q_bar) || q_bar > 0.0) throw DomainError("qbar must be finite and <= 0");
  const double min_diag = min_diagonal(q);
  if (q_bar > min_diag + 1e-12 * std::abs(min_diag)) {
    throw DomainError("qbar " + std::to_string(q_bar) + " exceeds the smallest diagonal " +
                      std::to_string(min_diag));
  }
  Eigen::MatrixXd v = detail::selector(rows, dim);
  if (q_bar == 0.0) return v;  // Q = 0
  const double lambda = -q_bar * t;
  Mat p = q / (-q_bar);
  p += detail::identity_like(q);
  const auto mu = static_cast<std::uint64_t>(rows.size());
  Eigen::MatrixXd acc = std::exp(-lambda) * v;
  Eigen::MatrixXd next(v.rows(), v.cols());
  const double log_lambda = std::log(lambda);
  for (std::int64_t n = 1; n <= s; ++n) {
    next.noalias() = v * p;
    v.swap(next);
    meter.add(2 * stored_entries(p) * mu);
    const double w = std::exp(-lambda + static_cast<double>(n) * log_lambda -
                              std::lgamma(static_cast<double>(n) + 1.0));
    acc += w * v;
  }
  return acc;
}

template <class Mat>
Eigen::MatrixXd uniformization(const Mat& q, double t, std::int64_t s, double q_bar,
                               FlopMeter& meter) {
  const auto rows = detail::all_rows(q.rows());
  return uniformization_rows(q, t, s, q_bar, rows, meter);
}

inline Eigen::MatrixXd uniformization(const TruncatedRateMatrix& q, double t, std::int64_t s,
                                      double q_bar, FlopMeter& meter) {
  return uniformization(q.q, t, s, q_bar, meter);
}

// ---------------------------------------------------------------------------
// Dispatch

/// Rows of M^{(s)}(t) for `method`. Sequential uniformization uses the
/// truncation's own qbar; global uniformization needs `global_q_bar`.
template <class Mat>
Eigen::MatrixXd rows_action(Method method, const Mat& q, double t, std::int64_t s,
                            std::span<const Eigen::Index> rows, FlopMeter& meter,
                            std::optional<double> global_q_bar = std::nullopt) {
  switch (method) {
    case Method::skeletoid:
      return skeletoid_rows(q, t, s, rows, meter);
    case Method::uniformization_seq:
      return uniformization_rows(q, t, s, std::min(0.0, min_diagonal(q)), rows, meter);
    case Method::uniformization_global:
      if (!global_q_bar) throw UsageError("global uniformization needs a finite qbar");
      return uniformization_rows(q, t, s, *global_q_bar, rows, meter);
  }
  throw UsageError("unknown method");
}

inline Eigen::MatrixXd rows_action(Method method, const TruncatedRateMatrix& q, double t,
                                   std::int64_t s, std::span<const Eigen::Index> rows,
                                   FlopMeter& meter,
                                   std::optional<double> global_q_bar = std::nullopt) {
  return rows_action(method, q.q, t, s, rows, meter, global_q_bar);
}

/// Upper bound on the l-infinity error of a monotone approximation from its
/// own rows: 1 - min row sum (exact for conservative Q).
inline double computable_error(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) return 0.0;
  return std::clamp(1.0 - rows.rowwise().sum().minCoeff(), 0.0, 1.0);
}

/// One request for entries of an approximate transition matrix.
struct ExpmRequest {
  double t = 1.0;
  std::vector<Eigen::Index> rows;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> targets;
  double accuracy_k = 8.0;
  Method method = Method::skeletoid;
  std::optional<double> global_q_bar;
};

struct ExpmResult {
  Eigen::MatrixXd rows;       // one row per requested source
  std::vector<double> values;  // one value per requested target
  std::int64_t s = 0;
};

/// Uniformization rate used to choose s: -qbar t, with qbar the global bound
/// when given, else the smallest diagonal.
inline double uniformization_rate(const TruncatedRateMatrix& q, double t,
                                  std::optional<double> global_q_bar) {
  const double qb = global_q_bar ? *global_q_bar : std::min(0.0, q.q_bar);
  return -qb * t;
}

/// Evaluates targets (source, target). Every source of a target must also
/// be listed in `rows`. When `rows` is empty the distinct target sources
/// are used.
inline ExpmResult evaluate(const TruncatedRateMatrix& q, const ExpmRequest& req,
                           FlopMeter& meter) {
  if (!std::isfinite(req.accuracy_k)) throw DomainError("accuracy index must be finite");
  ExpmResult out;
  std::vector<Eigen::Index> rows = req.rows;
  if (rows.empty()) {
    for (const auto& [src, dst] : req.targets) {
      if (std::find(rows.begin(), rows.end(), src) == rows.end()) rows.push_back(src);
    }
  }
  const double lambda = uniformization_rate(q, req.t, req.global_q_bar);
  out.s = select_s(req.method, lambda, req.accuracy_k);
  out.rows = rows_action(req.method, q, req.t, out.s, rows, meter, req.global_q_bar);
  out.values.reserve(req.targets.size());
  for (const auto& [src, dst] : req.targets) {
    auto it = std::find(rows.begin(), rows.end(), src);
    if (it == rows.end()) throw DomainError("target source not among requested rows");
    if (dst < 0 || dst >= q.dim()) throw DomainError("target column out of range");
    out.values.push_back(out.rows(it - rows.begin(), dst));
  }
  return out;
}

}  // namespace pmctmc

#endif  // PMCTMC_EXPMONO_HPP
