#ifndef PMCTMC_LIKELIHOOD_HPP
#define PMCTMC_LIKELIHOOD_HPP

#include <algorithm>
#include <random>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmctmc/dataset.hpp"
#include "pmctmc/debias.hpp"
#include "pmctmc/errors.hpp"
#include "pmctmc/expmono.hpp"
#include "pmctmc/reaction.hpp"
#include "pmctmc/statespace.hpp"

namespace pmctmc {

/// Joint sequences and stopping laws: one per observation (IA) or a single
/// one for the whole dataset (RA).
struct OsteConfig {
  EstimatorMode mode = EstimatorMode::RA;
  Method method = Method::skeletoid;
  std::optional<double> global_q_bar;
  std::vector<JointSequence> sequences;
  std::vector<StoppingLaw> laws;
  /// Accuracy used when sequential uniformization breaks monotonicity.
  double fallback_k = 14.0;

  void validate(std::size_t n_sequences) const {
    if (sequences.size() != n_sequences || laws.size() != n_sequences) {
      throw UsageError("config has " + std::to_string(sequences.size()) + " sequences and " +
                       std::to_string(laws.size()) + " laws, estimator needs " +
                       std::to_string(n_sequences));
    }
    for (const auto& s : sequences) s.validate();
    if (method == Method::uniformization_global &&
        (!global_q_bar || !std::isfinite(*global_q_bar) || *global_q_bar >= 0.0)) {
      throw UsageError("global uniformization needs a finite negative qbar");
    }
  }

  /// Same sequence and law for every estimator sequence.
  static OsteConfig uniform(EstimatorMode mode, Method method, std::size_t n_sequences,
                            JointSequence seq, double p,
                            std::optional<double> global_q_bar = std::nullopt) {
    OsteConfig cfg;
    cfg.mode = mode;
    cfg.method = method;
    cfg.global_q_bar = global_q_bar;
    cfg.sequences.assign(n_sequences, seq);
    cfg.laws.assign(n_sequences, StoppingLaw(p));
    return cfg;
  }
};

/// Seed path states of every transition in the dataset.
inline std::vector<Truncation> seed_truncations(const ReactionNetwork& net, const Dataset& data) {
  data.validate(net);
  std::vector<Truncation> out;
  for (std::size_t i = 1; i <= data.n_transitions(); ++i) {
    const auto path = seed_path(net, data.from(i), data.to(i),
                                "observations " + std::to_string(i - 1) + " -> " + std::to_string(i));
    out.emplace_back(path.states, 0);
  }
  return out;
}

inline EstimatorMode choose_mode(const ReactionNetwork& net, const Dataset& data,
                                 double factor = 1.0 / 3.0) {
  const auto seeds = seed_truncations(net, data);
  std::vector<std::size_t> sizes;
  for (const auto& s : seeds) sizes.push_back(s.size());
  return ra_rule_of_thumb(sizes, merge(seeds).size(), factor);
}

/// Approximate transition probabilities and their debiased combinations for
/// one dataset. Truncation levels are built lazily and shared between
/// threads; everything else is recomputed per call.
class LikelihoodModel {
 public:
  LikelihoodModel(ReactionNetwork net, Dataset data, EstimatorMode mode,
                  Directions directions = {})
      : net_(std::move(net)), data_(std::move(data)), mode_(mode) {
    if (directions.empty()) directions = default_directions(net_.n_species());
    auto seeds = seed_truncations(net_, data_);
    if (mode_ == EstimatorMode::IA) {
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        sequences_.push_back(std::make_unique<TruncationSequence>(net_, seeds[i], directions));
        members_.push_back({i + 1});
      }
    } else {
      sequences_.push_back(std::make_unique<TruncationSequence>(net_, merge(seeds), directions));
      std::vector<std::size_t> all;
      for (std::size_t i = 1; i <= data_.n_transitions(); ++i) all.push_back(i);
      members_.push_back(std::move(all));
    }
  }

  LikelihoodModel(const LikelihoodModel&) = delete;
  LikelihoodModel& operator=(const LikelihoodModel&) = delete;

  const ReactionNetwork& network() const { return net_; }
  const Dataset& data() const { return data_; }
  EstimatorMode mode() const { return mode_; }
  std::size_t n_sequences() const { return sequences_.size(); }
  const std::vector<std::size_t>& members(std::size_t j) const { return members_[j]; }
  std::shared_ptr<const Truncation> truncation(std::size_t j, int r) const {
    return sequences_[j]->at(r);
  }

  /// log a_r^k for sequence j: the log transition probability of the
  /// observation (IA) or the summed log transition probabilities of all
  /// observations (RA), at truncation r and accuracy k.
  double log_approx(std::size_t j, int r, double k, const Theta& theta, Method method,
                    std::optional<double> global_q_bar, FlopMeter& meter) const {
    const auto trunc = sequences_[j]->at(r);
    const auto q = assemble(net_, theta, *trunc);
    // Group observations by time step; each group needs one exponential.
    std::map<double, std::vector<std::size_t>> groups;
    for (auto i : members_[j]) groups[data_.dt(i)].push_back(i);
    double total = 0.0;
    for (const auto& [dt, obs] : groups) {
      std::vector<Eigen::Index> rows;
      std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
      for (auto i : obs) {
        const auto src = static_cast<Eigen::Index>(*trunc->index_of(data_.from(i)));
        const auto dst = static_cast<Eigen::Index>(*trunc->index_of(data_.to(i)));
        auto it = std::find(rows.begin(), rows.end(), src);
        const auto row = static_cast<Eigen::Index>(it - rows.begin());
        if (it == rows.end()) rows.push_back(src);
        pairs.emplace_back(row, dst);
      }
      const double lambda = uniformization_rate(q, dt, global_q_bar);
      const std::int64_t s = select_s(method, lambda, k);
      const Eigen::MatrixXd m = rows_action(method, q, dt, s, rows, meter, global_q_bar);
      for (const auto& [row, dst] : pairs) {
        const double v = m(row, dst);
        total += v > 0.0 ? std::log(v) : kNegInf;
      }
    }
    return total;
  }

  /// Sum over sequences of log a_r^k: log L_r^{(k)} for a common (r, k).
  double log_joint(int r, double k, const Theta& theta, Method method,
                   std::optional<double> global_q_bar, FlopMeter& meter) const {
    double total = 0.0;
    for (std::size_t j = 0; j < n_sequences(); ++j) {
      total += log_approx(j, r, k, theta, method, global_q_bar, meter);
    }
    return total;
  }

  /// Debiased log-likelihood estimate for stopping times `draws` (one per
  /// sequence).
  double log_estimate(const Theta& theta, const OsteConfig& cfg,
                      std::span<const std::int64_t> draws, FlopMeter& meter) const {
    cfg.validate(n_sequences());
    if (draws.size() != n_sequences()) throw UsageError("one stopping time per sequence needed");
    double total = 0.0;
    for (std::size_t j = 0; j < n_sequences(); ++j) {
      total += log_term(j, theta, cfg, draws[j], meter);
      if (total == kNegInf) return total;
    }
    return total;
  }

  template <std::uniform_random_bit_generator Rng>
  double log_estimate(const Theta& theta, const OsteConfig& cfg, Rng& aux,
                      FlopMeter& meter) const {
    std::vector<std::int64_t> draws(n_sequences());
    for (std::size_t j = 0; j < n_sequences(); ++j) draws[j] = cfg.laws[j].sample(aux);
    return log_estimate(theta, cfg, draws, meter);
  }

 private:
  double log_term(std::size_t j, const Theta& theta, const OsteConfig& cfg, std::int64_t n,
                  FlopMeter& meter) const {
    const auto& seq = cfg.sequences[j];
    const std::int64_t idx[3] = {0, n, n + 1};
    double k[3] = {seq.k(0), seq.k(n), seq.k(n + 1)};
    double s[3];
    auto eval = [&] {
      s[0] = log_approx(j, seq.r(0), k[0], theta, cfg.method, cfg.global_q_bar, meter);
      s[1] = n == 0 ? s[0]
                    : log_approx(j, seq.r(n), k[1], theta, cfg.method, cfg.global_q_bar, meter);
      s[2] = log_approx(j, seq.r(n + 1), k[2], theta, cfg.method, cfg.global_q_bar, meter);
    };
    auto violation = [&]() -> int {
      for (int a = 0; a < 2; ++a) {
        if (s[a] != kNegInf && s[a] - s[a + 1] > kMonotoneSlack) return a;
      }
      return -1;
    };
    eval();
    int bad = violation();
    if (bad >= 0 && cfg.method == Method::uniformization_seq) {
      for (double& kk : k) kk = std::max(kk, cfg.fallback_k);
      eval();
      bad = violation();
    }
    if (bad >= 0) {
      throw MonotonicityError("joint sequence decreased between n=" + std::to_string(idx[bad]) +
                                  " and n=" + std::to_string(idx[bad + 1]) + " (log values " +
                                  std::to_string(s[bad]) + " > " + std::to_string(s[bad + 1]) +
                                  ")",
                              idx[bad], idx[bad + 1], s[bad], s[bad + 1]);
    }
    return stable_log_combine(s[0], s[1], std::max(s[1], s[2]), cfg.laws[j].log_pmf(n));
  }

  ReactionNetwork net_;
  Dataset data_;
  EstimatorMode mode_;
  std::vector<std::unique_ptr<TruncationSequence>> sequences_;
  std::vector<std::vector<std::size_t>> members_;
};

}  // namespace pmctmc

#endif  // PMCTMC_LIKELIHOOD_HPP
