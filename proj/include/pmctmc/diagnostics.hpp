#ifndef PMCTMC_DIAGNOSTICS_HPP
#define PMCTMC_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmctmc/dataset.hpp"
#include "pmctmc/errors.hpp"
#include "pmctmc/expmono.hpp"
#include "pmctmc/likelihood.hpp"
#include "pmctmc/oracle.hpp"
#include "pmctmc/sampler.hpp"
#include "pmctmc/statespace.hpp"

namespace pmctmc {

// ---------------------------------------------------------------------------
// Effective sample size and posterior summaries

/// Batch-means ESS with batch size floor(sqrt(n)). A constant trace has
/// ESS 0.
inline double ess(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return 0.0;
  const std::size_t b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t a = n / b;
  if (a < 2) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  if (!(var > 0.0)) return 0.0;
  const std::size_t used = a * b;
  const double used_mean =
      std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(used), 0.0) /
      static_cast<double>(used);
  double bm = 0.0;
  for (std::size_t k = 0; k < a; ++k) {
    double m = 0.0;
    for (std::size_t i = k * b; i < (k + 1) * b; ++i) m += x[i];
    m /= static_cast<double>(b);
    bm += (m - used_mean) * (m - used_mean);
  }
  bm *= static_cast<double>(b) / static_cast<double>(a - 1);
  if (!(bm > 0.0)) return static_cast<double>(n);
  return static_cast<double>(n) * var / bm;
}

/// Minimum over parameters of the per-parameter ESS after `burnin` draws.
inline double ess_min(const Trace& trace, std::size_t burnin = 0) {
  if (trace.size() <= burnin) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < trace.dim(); ++j) {
    const auto col = trace.column(j, burnin);
    best = std::min(best, ess(col));
  }
  return std::isfinite(best) ? best : 0.0;
}

/// ESS per billion matrix-multiplication FLOPs.
inline double ess_per_gflop(const Trace& trace, std::size_t burnin = 0) {
  if (trace.size() == 0) return 0.0;
  const double gf = trace.cum_gflops.back();
  if (!(gf > 0.0)) return 0.0;
  return ess_min(trace, burnin) / gf;
}

/// Linear-interpolation sample quantile.
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw DomainError("quantile of empty sample");
  std::sort(x.begin(), x.end());
  const double h = q * static_cast<double>(x.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double correlation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("correlation needs matching samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// Parameter draws of several traces after burn-in, concatenated.
inline std::vector<double> pooled_column(const std::vector<Trace>& traces, std::size_t j,
                                         std::size_t burnin) {
  std::vector<double> out;
  for (const auto& t : traces) {
    const auto c = t.column(j, burnin);
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random rate matrices

enum class MatrixClass { sparse, dense, absorbing, gtr };

inline const char* to_string(MatrixClass c) {
  switch (c) {
    case MatrixClass::sparse: return "sparse";
    case MatrixClass::dense: return "dense";
    case MatrixClass::absorbing: return "absorbing";
    case MatrixClass::gtr: return "gtr";
  }
  return "?";
}

inline MatrixClass parse_matrix_class(const std::string& s) {
  if (s == "sparse") return MatrixClass::sparse;
  if (s == "dense") return MatrixClass::dense;
  if (s == "absorbing") return MatrixClass::absorbing;
  if (s == "gtr") return MatrixClass::gtr;
  throw UsageError("unknown matrix class '" + s + "'");
}

inline const std::vector<MatrixClass>& all_matrix_classes() {
  static const std::vector<MatrixClass> all{MatrixClass::sparse, MatrixClass::dense,
                                            MatrixClass::absorbing, MatrixClass::gtr};
  return all;
}

/// Conservative rate matrix of the given class with off-diagonal rates from
/// Exp(1), rescaled so the mean exit rate is one. `max_nnz` caps the number
/// of off-diagonal entries per row in the sparse class. For the GTR class,
/// `stationary` (if given) receives the vector mu of detailed balance.
template <std::uniform_random_bit_generator Rng>
Eigen::MatrixXd random_rate_matrix(MatrixClass cls, Eigen::Index dim, Rng& rng,
                                   Eigen::Index max_nnz = 10,
                                   Eigen::VectorXd* stationary = nullptr) {
  if (dim < 2) throw UsageError("random rate matrix needs dim >= 2");
  std::exponential_distribution<double> expo(1.0);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
  switch (cls) {
    case MatrixClass::sparse: {
      const Eigen::Index cap = std::max<Eigen::Index>(1, std::min(max_nnz, dim - 1));
      std::uniform_int_distribution<Eigen::Index> count(1, cap);
      std::vector<Eigen::Index> cols;
      for (Eigen::Index i = 0; i < dim; ++i) {
        cols.clear();
        for (Eigen::Index j = 0; j < dim; ++j) {
          if (j != i) cols.push_back(j);
        }
        std::shuffle(cols.begin(), cols.end(), rng);
        const Eigen::Index k = count(rng);
        for (Eigen::Index u = 0; u < k; ++u) q(i, cols[static_cast<std::size_t>(u)]) = expo(rng);
      }
      break;
    }
    case MatrixClass::dense:
      for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
          if (i != j) q(i, j) = expo(rng);
        }
      }
      break;
    case MatrixClass::absorbing:
      // State 0 absorbing; the rest is a dense block whose missing mass
      // flows into state 0.
      for (Eigen::Index i = 1; i < dim; ++i) {
        for (Eigen::Index j = 1; j < dim; ++j) {
          if (i != j) q(i, j) = expo(rng);
        }
        q(i, 0) = expo(rng);
      }
      break;
    case MatrixClass::gtr: {
      Eigen::VectorXd mu(dim);
      for (Eigen::Index i = 0; i < dim; ++i) mu(i) = expo(rng);
      mu /= mu.sum();
      for (Eigen::Index i = 0; i < dim; ++i) {
        for (Eigen::Index j = i + 1; j < dim; ++j) {
          const double s = expo(rng);
          q(i, j) = s * mu(j);
          q(j, i) = s * mu(i);
        }
      }
      if (stationary) *stationary = mu;
      break;
    }
  }
  for (Eigen::Index i = 0; i < dim; ++i) {
    q(i, i) = 0.0;
    q(i, i) = -q.row(i).sum();
  }
  const double mean_rate = -q.diagonal().mean();
  if (mean_rate > 0.0) q /= mean_rate;
  return q;
}

// ---------------------------------------------------------------------------
// Matrix-exponential benchmark

struct BenchmarkSpec {
  MatrixClass cls = MatrixClass::dense;
  Eigen::Index dim = 100;
  double t = 1.0;
  int reps = 10;
  std::vector<double> eps_grid{1e-2, 1e-4, 1e-6, 1e-8, 1e-10};
  std::uint64_t seed = 1;
  Eigen::Index max_nnz = 10;
};

struct BenchRow {
  std::string method;
  std::string cls;
  Eigen::Index dim = 0;
  double t = 0.0;
  int rep = 0;
  double eps = 0.0;
  std::int64_t s = 0;
  double realized_error = 0.0;
  double bound = 0.0;
  std::uint64_t flops = 0;
};

/// l-infinity (max absolute row sum) norm.
inline double linf_norm(const Eigen::MatrixXd& m) {
  return m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Skeletoid and uniformization against the oracle for every requested
/// error in the grid, on `reps` random matrices of one class.
inline std::vector<BenchRow> bench_expm(const BenchmarkSpec& spec) {
  if (spec.dim < 2) throw UsageError("benchmark needs dim >= 2");
  if (!(spec.t > 0.0)) throw UsageError("benchmark needs t > 0");
  std::vector<BenchRow> rows;
  for (int rep = 0; rep < spec.reps; ++rep) {
    std::mt19937_64 rng(mix_seed(spec.seed ^ mix_seed(static_cast<std::uint64_t>(rep) + 1)));
    const Eigen::MatrixXd q = random_rate_matrix(spec.cls, spec.dim, rng, spec.max_nnz);
    const Eigen::MatrixXd exact = oracle_expm(q, spec.t);
    const double q_bar = q.diagonal().minCoeff();
    const double lambda = -q_bar * spec.t;
    for (Method method : {Method::skeletoid, Method::uniformization_seq}) {
      for (double eps : spec.eps_grid) {
        BenchRow row;
        row.method = method == Method::skeletoid ? "skeletoid" : "uniformization";
        row.cls = to_string(spec.cls);
        row.dim = spec.dim;
        row.t = spec.t;
        row.rep = rep;
        row.eps = eps;
        FlopMeter meter;
        Eigen::MatrixXd approx;
        if (method == Method::skeletoid) {
          row.s = select_s_skeletoid(lambda, eps);
          approx = skeletoid(q, spec.t, row.s, meter);
          row.bound = skeletoid_error_bound(lambda, row.s);
        } else {
          row.s = select_s_uniformization(lambda, eps);
          approx = uniformization(q, spec.t, row.s, q_bar, meter);
          row.bound = poisson_upper_tail(row.s, lambda);
        }
        row.realized_error = linf_norm(exact - approx);
        row.flops = meter.flops();
        rows.push_back(row);
      }
    }
  }
  return rows;
}

inline void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << "method,class,dim,t,rep,eps,s,realized_error,bound,flops\n";
  out << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.method << ',' << r.cls << ',' << r.dim << ',' << r.t << ',' << r.rep << ',' << r.eps
        << ',' << r.s << ',' << r.realized_error << ',' << r.bound << ',' << r.flops << '\n';
  }
}

// ---------------------------------------------------------------------------
// Truncation study

struct TruncationRow {
  std::size_t observation = 0;  // 1-based transition index
  int r = 0;
  std::size_t states = 0;
  double probability = 0.0;
  double error = 0.0;
};

/// Exact truncation error M(dt)_{x,y} - M_r(dt)_{x,y} per observation for
/// r = 0..r_max, with M(dt) taken at level r_max + ref_extra. Exponentials
/// come from the oracle, so the rows isolate truncation from
/// approximation error.
inline std::vector<TruncationRow> truncation_study(const ReactionNetwork& net, const Theta& theta,
                                                   const Dataset& data, int r_max,
                                                   int ref_extra = 20) {
  if (r_max < 0 || ref_extra < 1) throw UsageError("truncation study needs r_max >= 0");
  LikelihoodModel model(net, data, EstimatorMode::IA);
  std::vector<TruncationRow> rows;
  auto prob = [&](std::size_t j, int r) {
    const auto trunc = model.truncation(j, r);
    const std::size_t i = model.members(j).front();
    const Eigen::MatrixXd m = oracle_expm(assemble(net, theta, *trunc).dense(), data.dt(i));
    const auto src = static_cast<Eigen::Index>(*trunc->index_of(data.from(i)));
    const auto dst = static_cast<Eigen::Index>(*trunc->index_of(data.to(i)));
    return std::make_pair(m(src, dst), trunc->size());
  };
  for (std::size_t j = 0; j < model.n_sequences(); ++j) {
    const double ref = prob(j, r_max + ref_extra).first;
    for (int r = 0; r <= r_max; ++r) {
      const auto [p, n] = prob(j, r);
      rows.push_back({model.members(j).front(), r, n, p, ref - p});
    }
  }
  return rows;
}

inline void write_truncation_csv(const std::string& path, const std::vector<TruncationRow>& rows) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << "observation,r,states,probability,error\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.observation << ',' << r.r << ',' << r.states << ',' << r.probability << ','
        << r.error << '\n';
  }
}

}  // namespace pmctmc

#endif  // PMCTMC_DIAGNOSTICS_HPP
