#ifndef PMCTMC_SAMPLER_HPP
#define PMCTMC_SAMPLER_HPP

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "pmctmc/debias.hpp"
#include "pmctmc/errors.hpp"
#include "pmctmc/expmono.hpp"
#include "pmctmc/likelihood.hpp"
#include "pmctmc/reaction.hpp"

namespace pmctmc {

// ---------------------------------------------------------------------------
// Priors

struct PriorComponent {
  enum class Family { lognormal, gamma };
  Family family = Family::lognormal;
  /// lognormal: (mu, sigma) of the underlying normal; gamma: (shape, rate).
  double a = 0.0;
  double b = 1.0;
};

/// Independent priors on each coordinate of theta.
class Prior {
 public:
  Prior() = default;
  explicit Prior(std::vector<PriorComponent> comps) : comps_(std::move(comps)) {
    for (const auto& c : comps_) {
      if (!(c.b > 0.0) || !std::isfinite(c.a) || !std::isfinite(c.b) ||
          (c.family == PriorComponent::Family::gamma && !(c.a > 0.0))) {
        throw UsageError("invalid prior hyperparameters");
      }
    }
  }

  static Prior lognormal(std::size_t dim, double mu = 0.0, double sigma = 1.0) {
    return Prior(std::vector<PriorComponent>(dim, {PriorComponent::Family::lognormal, mu, sigma}));
  }
  static Prior gamma(std::size_t dim, double shape, double rate) {
    return Prior(std::vector<PriorComponent>(dim, {PriorComponent::Family::gamma, shape, rate}));
  }

  /// "lognormal:MU,SIGMA" or "gamma:SHAPE,RATE", applied to all coordinates.
  static Prior parse(const std::string& spec, std::size_t dim) {
    const auto colon = spec.find(':');
    const std::string fam = spec.substr(0, colon);
    double a = fam == "gamma" ? 1.0 : 0.0, b = 1.0;
    if (colon != std::string::npos) {
      std::istringstream in(spec.substr(colon + 1));
      char comma = 0;
      if (!(in >> a >> comma >> b) || comma != ',') {
        throw UsageError("cannot parse prior '" + spec + "'");
      }
    }
    if (fam == "lognormal") return lognormal(dim, a, b);
    if (fam == "gamma") return gamma(dim, a, b);
    throw UsageError("unknown prior family '" + fam + "'");
  }

  std::size_t dim() const { return comps_.size(); }
  const std::vector<PriorComponent>& components() const { return comps_; }

  double log_density(const Theta& theta) const {
    if (theta.size() != comps_.size()) throw DomainError("theta and prior dimensions differ");
    double total = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double x = theta[i];
      if (!std::isfinite(x) || !(x > 0.0)) return kNegInf;
      const auto& c = comps_[i];
      const double lx = std::log(x);
      if (c.family == PriorComponent::Family::lognormal) {
        const double z = (lx - c.a) / c.b;
        total += -lx - std::log(c.b) - 0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
      } else {
        total += c.a * std::log(c.b) - std::lgamma(c.a) + (c.a - 1.0) * lx - c.b * x;
      }
    }
    return total;
  }

  template <std::uniform_random_bit_generator Rng>
  Theta sample(Rng& rng) const {
    Theta out;
    for (const auto& c : comps_) {
      if (c.family == PriorComponent::Family::lognormal) {
        std::lognormal_distribution<double> d(c.a, c.b);
        out.push_back(d(rng));
      } else {
        std::gamma_distribution<double> d(c.a, 1.0 / c.b);
        out.push_back(d(rng));
      }
    }
    return out;
  }

 private:
  std::vector<PriorComponent> comps_;
};

/// log prior + log likelihood estimate; -inf outside the prior support.
inline double log_posterior_kernel(const Prior& prior, const Theta& theta, double log_estimate) {
  const double lp = prior.log_density(theta);
  if (lp == kNegInf) return kNegInf;
  return lp + log_estimate;
}

// ---------------------------------------------------------------------------
// Random streams

struct RngStreams {
  std::mt19937_64 proposal;
  std::mt19937_64 aux;
};

/// Two independent engines from one seed: proposals and accept/reject
/// uniforms use `proposal`; stopping times use `aux`.
inline RngStreams derive_streams(std::uint64_t seed) {
  const auto lo = static_cast<std::uint32_t>(seed);
  const auto hi = static_cast<std::uint32_t>(seed >> 32);
  std::seed_seq sp{lo, hi, 0x70726f70u};
  std::seed_seq sa{lo, hi, 0x61757821u};
  return {std::mt19937_64(sp), std::mt19937_64(sa)};
}

/// SplitMix64 step; used to derive per-chain and per-replicate seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Gaussian random-walk proposal theta' = theta + chol(cov) z.
class ProposalKernel {
 public:
  explicit ProposalKernel(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols() || cov.rows() == 0) throw UsageError("proposal covariance must be square");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw UsageError("proposal covariance is not positive definite");
    }
    chol_ = llt.matrixL();
  }

  template <std::uniform_random_bit_generator Rng>
  Theta propose(const Theta& theta, Rng& rng) const {
    const auto d = chol_.rows();
    if (static_cast<Eigen::Index>(theta.size()) != d) {
      throw DomainError("theta and proposal dimensions differ");
    }
    Eigen::VectorXd z(d);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(rng);
    const Eigen::VectorXd step = chol_ * z;
    Theta out(theta);
    for (Eigen::Index i = 0; i < d; ++i) out[static_cast<std::size_t>(i)] += step(i);
    return out;
  }

  template <std::uniform_random_bit_generator Rng>
  double uniform(Rng& rng) const {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }

  const Eigen::MatrixXd& cholesky() const { return chol_; }

 private:
  Eigen::MatrixXd chol_;
};

// ---------------------------------------------------------------------------
// Chains

/// Log-likelihood estimator: draws any auxiliary variables from `aux` and
/// adds its matrix-multiplication work to the meter.
using LogLikelihoodFn = std::function<double(const Theta&, std::mt19937_64&, FlopMeter&)>;

inline LogLikelihoodFn pseudo_marginal(std::shared_ptr<const LikelihoodModel> model,
                                       OsteConfig cfg) {
  cfg.validate(model->n_sequences());
  return [model = std::move(model), cfg = std::move(cfg)](const Theta& theta, std::mt19937_64& aux,
                                                          FlopMeter& meter) {
    return model->log_estimate(theta, cfg, aux, meter);
  };
}

struct SamplerConfig {
  std::size_t n_samples = 1000;
  std::uint64_t seed = 1;
  Eigen::MatrixXd proposal_cov;
  Theta theta0;
};

struct Trace {
  std::vector<Theta> theta;
  std::vector<double> log_estimate;
  std::vector<std::uint8_t> accepted;
  std::vector<double> cum_gflops;

  std::size_t size() const { return theta.size(); }
  std::size_t dim() const { return theta.empty() ? 0 : theta.front().size(); }

  /// Fraction of accepted proposals (the initial state is not a proposal).
  double acceptance_rate() const {
    if (size() < 2) return 0.0;
    std::size_t acc = 0;
    for (std::size_t i = 1; i < size(); ++i) acc += accepted[i];
    return static_cast<double>(acc) / static_cast<double>(size() - 1);
  }

  std::vector<double> column(std::size_t j, std::size_t burnin = 0) const {
    std::vector<double> out;
    for (std::size_t i = burnin; i < size(); ++i) out.push_back(theta[i][j]);
    return out;
  }
};

/// Estimator failure during sampling.
class SamplerAbort : public NumericalError {
 public:
  SamplerAbort(std::size_t iteration, Theta theta, const std::string& cause)
      : NumericalError("sampler aborted at iteration " + std::to_string(iteration) + ": " + cause),
        iteration(iteration),
        theta(std::move(theta)),
        cause(cause) {}

  std::size_t iteration;
  Theta theta;
  std::string cause;
};

/// Pseudo-marginal random-walk Metropolis. The estimate attached to the
/// current state is kept until a proposal is accepted.
inline Trace run(const LogLikelihoodFn& log_like, const Prior& prior, const SamplerConfig& cfg) {
  if (cfg.n_samples == 0) throw UsageError("n_samples must be positive");
  const ProposalKernel kernel(cfg.proposal_cov);
  auto streams = derive_streams(cfg.seed);
  FlopMeter meter;
  Theta cur = cfg.theta0;
  const double lp_cur0 = prior.log_density(cur);
  if (lp_cur0 == kNegInf) throw UsageError("initial theta is outside the prior support");
  double lp_cur = lp_cur0;
  double ll_cur = 0.0;
  try {
    ll_cur = log_like(cur, streams.aux, meter);
  } catch (const Error& e) {
    throw SamplerAbort(0, cur, e.what());
  }
  if (!(ll_cur > kNegInf)) throw SamplerAbort(0, cur, "initial likelihood estimate is zero");
  Trace trace;
  trace.theta.reserve(cfg.n_samples);
  auto record = [&](bool acc) {
    trace.theta.push_back(cur);
    trace.log_estimate.push_back(ll_cur);
    trace.accepted.push_back(acc ? 1 : 0);
    trace.cum_gflops.push_back(meter.gflops());
  };
  record(false);
  for (std::size_t s = 1; s < cfg.n_samples; ++s) {
    Theta prop = kernel.propose(cur, streams.proposal);
    const double u = kernel.uniform(streams.proposal);
    const double lp_prop = prior.log_density(prop);
    bool accept = false;
    double ll_prop = kNegInf;
    if (lp_prop > kNegInf) {
      try {
        ll_prop = log_like(prop, streams.aux, meter);
      } catch (const Error& e) {
        throw SamplerAbort(s, prop, e.what());
      }
      if (std::isnan(ll_prop)) throw SamplerAbort(s, prop, "likelihood estimate is NaN");
      if (ll_prop > kNegInf) {
        const double log_a = (lp_prop + ll_prop) - (lp_cur + ll_cur);
        accept = std::log(u) <= log_a;
      }
    }
    if (accept) {
      cur = std::move(prop);
      lp_cur = lp_prop;
      ll_cur = ll_prop;
    }
    record(accept);
  }
  return trace;
}

/// Thread count from PMCTMC_THREADS, else the hardware concurrency.
inline unsigned default_threads() {
  if (const char* env = std::getenv("PMCTMC_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Seed of chain `c` in a multistart run.
inline std::uint64_t chain_seed(std::uint64_t seed, std::size_t c) {
  return c == 0 ? seed : mix_seed(seed ^ mix_seed(c));
}

/// Independent chains with derived seeds and identical configuration.
/// `theta0s` (optional) gives one starting point per chain.
inline std::vector<Trace> multistart(std::size_t n_chains, const LogLikelihoodFn& log_like,
                                     const Prior& prior, const SamplerConfig& cfg,
                                     const std::vector<Theta>& theta0s = {},
                                     unsigned threads = default_threads()) {
  if (n_chains == 0) throw UsageError("need at least one chain");
  std::vector<Trace> out(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);
  auto work = [&](std::size_t c) {
    try {
      SamplerConfig cc = cfg;
      cc.seed = chain_seed(cfg.seed, c);
      if (!theta0s.empty()) cc.theta0 = theta0s[c];
      out[c] = run(log_like, prior, cc);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  threads = std::max(1u, threads);
  for (std::size_t start = 0; start < n_chains; start += threads) {
    std::vector<std::thread> pool;
    const std::size_t end = std::min(n_chains, start + threads);
    if (end - start == 1) {
      work(start);
    } else {
      for (std::size_t c = start; c < end; ++c) pool.emplace_back(work, c);
      for (auto& t : pool) t.join();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace files

inline void write_trace(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write trace '" + path + "'");
  out << "iter";
  for (std::size_t j = 0; j < trace.dim(); ++j) out << ",theta_" << (j + 1);
  out << ",log_estimate,accepted,cum_gflops\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out << i;
    for (double v : trace.theta[i]) out << ',' << v;
    out << ',' << trace.log_estimate[i] << ',' << int(trace.accepted[i]) << ','
        << trace.cum_gflops[i] << '\n';
  }
}

/// Reads a trace written by `write_trace`.
inline Trace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read trace '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("iter", 0) != 0) {
    throw UsageError("trace '" + path + "' lacks a header");
  }
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  std::size_t p = 0;
  while (p + 1 < header.size() && header[p + 1].rfind("theta_", 0) == 0) ++p;
  Trace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() < p + 4) throw UsageError("trace '" + path + "' has a short row");
    Theta th;
    for (std::size_t j = 0; j < p; ++j) th.push_back(std::stod(cells[1 + j]));
    trace.theta.push_back(std::move(th));
    trace.log_estimate.push_back(std::stod(cells[1 + p]));
    trace.accepted.push_back(static_cast<std::uint8_t>(std::stoi(cells[2 + p])));
    trace.cum_gflops.push_back(std::stod(cells[3 + p]));
  }
  return trace;
}

}  // namespace pmctmc

#endif  // PMCTMC_SAMPLER_HPP
