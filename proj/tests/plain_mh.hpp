#ifndef PMCTMC_TESTS_PLAIN_MH_HPP
#define PMCTMC_TESTS_PLAIN_MH_HPP

#include <functional>
#include <random>

#include "pmctmc/sampler.hpp"

namespace pmctmc::test_support {

/// Textbook random-walk Metropolis with the same stream layout as `run`.
inline Trace plain_mh(const std::function<double(const Theta&)>& log_like, const Prior& prior,
                      const SamplerConfig& cfg) {
  auto streams = derive_streams(cfg.seed);
  const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(cfg.proposal_cov).matrixL();
  Theta cur = cfg.theta0;
  double cur_lp = prior.log_density(cur) + log_like(cur);
  Trace t;
  t.theta.push_back(cur);
  t.log_estimate.push_back(log_like(cur));
  t.accepted.push_back(0);
  t.cum_gflops.push_back(0.0);
  for (std::size_t s = 1; s < cfg.n_samples; ++s) {
    // Fresh distributions per step: libstdc++ normals cache the second
    // Box-Muller value, and the proposal kernel draws with a fresh one.
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(cur.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(streams.proposal);
    const Eigen::VectorXd step = l * z;
    Theta prop = cur;
    for (std::size_t i = 0; i < prop.size(); ++i) prop[i] += step(static_cast<Eigen::Index>(i));
    const double u = unif(streams.proposal);
    bool acc = false;
    const double lp = prior.log_density(prop);
    if (lp > kNegInf) {
      const double prop_lp = lp + log_like(prop);
      if (std::log(u) <= prop_lp - cur_lp) {
        acc = true;
        cur = prop;
        cur_lp = prop_lp;
      }
    }
    t.theta.push_back(cur);
    t.log_estimate.push_back(cur_lp - prior.log_density(cur));
    t.accepted.push_back(acc ? 1 : 0);
    t.cum_gflops.push_back(0.0);
  }
  return t;
}

}  // namespace pmctmc::test_support

#endif  // PMCTMC_TESTS_PLAIN_MH_HPP
