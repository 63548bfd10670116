#include <gtest/gtest.h>

#include <random>

#include "pmctmc/expmono.hpp"
#include "pmctmc/oracle.hpp"
#include "pmctmc/statespace.hpp"

using namespace pmctmc;

namespace {

ReactionNetwork lattice2() {
  // Two species on Z_+^2 with one birth per species, for growth tests.
  std::vector<Reaction> rs;
  rs.push_back({"b1", {1, 0}, [](auto, auto th) { return th[0]; }});
  rs.push_back({"b2", {0, 1}, [](auto, auto th) { return th[0]; }});
  return ReactionNetwork("lattice2", 2, 1, std::move(rs), State{0, 0},
                         State{kUnboundedAbove, kUnboundedAbove});
}

Eigen::MatrixXd random_generator(int n, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j) q(i, j) = e(rng);
    }
  }
  return q;
}

}  // namespace

TEST(Grow, OriginClipsNegativeNeighbours) {
  const auto net = lattice2();
  const auto g = grow(Truncation({State{0, 0}}), default_directions(2), net);
  EXPECT_EQ(g.states(), (std::vector<State>{{0, 0}, {1, 0}, {0, 1}}));
  EXPECT_EQ(g.level(), 1);
}

TEST(Grow, InteriorAddsFourNeighbours) {
  const auto net = lattice2();
  const auto g = grow(Truncation({State{1, 1}}), default_directions(2), net);
  EXPECT_EQ(g.states(), (std::vector<State>{{1, 1}, {2, 1}, {0, 1}, {1, 2}, {1, 0}}));
}

TEST(Grow, TwiceFromOriginIsSimplex) {
  const auto net = lattice2();
  const auto d = default_directions(2);
  const auto g = grow(grow(Truncation({State{0, 0}}), d, net), d, net);
  ASSERT_EQ(g.size(), 6u);
  for (const auto& s : g.states()) EXPECT_LE(s[0] + s[1], 2);
}

TEST(Grow, IdempotentOnCoveredBoundedLattice) {
  const auto net = builtin_model("mmc", {1}).with_bounds(State{0}, State{3});
  const auto d = default_directions(1);
  Truncation t({State{1}});
  for (int i = 0; i < 5; ++i) t = grow(t, d, net);
  EXPECT_EQ(t.size(), 4u);
  EXPECT_EQ(grow(t, d, net), t);
}

TEST(Grow, DeterministicAndIndexStable) {
  const auto net = builtin_model("ssir");
  TruncationSequence seq(net, Truncation({State{3, 2, 1}}), default_directions(3));
  TruncationSequence again(net, Truncation({State{3, 2, 1}}), default_directions(3));
  for (int r = 0; r < 4; ++r) {
    EXPECT_EQ(*seq.at(r), *again.at(r));
    const auto& lo = *seq.at(r);
    const auto& hi = *seq.at(r + 1);
    for (std::size_t i = 0; i < lo.size(); ++i) EXPECT_EQ(hi.index_of(lo[i]), i);
  }
}

TEST(Merge, FirstSeenOrder) {
  const std::vector<Truncation> ts{Truncation({State{1}, State{2}}),
                                   Truncation({State{2}, State{0}, State{3}})};
  EXPECT_EQ(merge(ts).states(), (std::vector<State>{{1}, {2}, {0}, {3}}));
}

TEST(SeedPath, SsirExample) {
  const auto net = builtin_model("ssir");
  const auto p = seed_path(net, State{2, 1, 0}, State{1, 1, 1});
  EXPECT_EQ(p.reaction_counts, (std::vector<std::int64_t>{1, 1, 0}));
  EXPECT_EQ(p.states, (std::vector<State>{{2, 1, 0}, {1, 2, 0}, {1, 1, 1}}));
}

TEST(SeedPath, ZeroDisplacement) {
  const auto net = builtin_model("lv4");
  const auto p = seed_path(net, State{4, 5}, State{4, 5});
  EXPECT_EQ(p.states, (std::vector<State>{State{4, 5}}));
  EXPECT_EQ(p.reaction_counts, (std::vector<std::int64_t>(4, 0)));
}

TEST(SeedPath, MmcArrivals) {
  const auto p = seed_path(builtin_model("mmc", {2}), State{2}, State{5});
  EXPECT_EQ(p.reaction_counts, (std::vector<std::int64_t>{3, 0}));
  EXPECT_EQ(p.states, (std::vector<State>{{2}, {3}, {4}, {5}}));
}

TEST(SeedPath, InvariantsOnLotkaVolterra) {
  const auto net = builtin_model("lv3");
  const auto p = seed_path(net, State{3, 7}, State{6, 2});
  const auto u = net.update_matrix();
  std::int64_t total = 0;
  for (auto v : p.reaction_counts) total += v;
  EXPECT_EQ(p.states.size(), static_cast<std::size_t>(1 + total));
  for (std::size_t i = 1; i < p.states.size(); ++i) {
    bool is_row = false;
    for (Eigen::Index r = 0; r < u.rows(); ++r) {
      bool eq = true;
      for (std::size_t j = 0; j < 2; ++j) {
        eq = eq && p.states[i][j] - p.states[i - 1][j] == static_cast<std::int64_t>(u(r, j));
      }
      is_row = is_row || eq;
    }
    EXPECT_TRUE(is_row);
    EXPECT_TRUE(net.in_bounds(p.states[i]));
  }
}

TEST(SeedPath, InfeasibleNamesPair) {
  // The prey cannot decrease without predators here, and predators cannot appear.
  const auto net = builtin_model("lv3");
  try {
    seed_path(net, State{0, 5}, State{0, 3}, "observations 4 -> 5");
    FAIL() << "expected SeedPathError";
  } catch (const SeedPathError& e) {
    EXPECT_NE(std::string(e.what()).find("observations 4 -> 5"), std::string::npos);
  }
  EXPECT_THROW(seed_path(builtin_model("ssir"), State{0, 0, 3}, State{0, 0, 1}), SeedPathError);
}

TEST(Assemble, MmcThreeStates) {
  const auto net = builtin_model("mmc", {2});
  const auto q = assemble(net, Theta{1, 1}, Truncation({State{0}, State{1}, State{2}}));
  Eigen::MatrixXd expected(3, 3);
  expected << -1, 1, 0, 1, -2, 1, 0, 2, -3;
  EXPECT_EQ(q.dense(), expected);
  EXPECT_EQ(q.deficit, Eigen::Vector3d(0, 0, 1));
  EXPECT_EQ(q.q_bar, -3.0);
}

TEST(Assemble, SingleSsirState) {
  const auto q =
      assemble(builtin_model("ssir"), Theta{0.4, 0.5, 0.4}, Truncation({State{0, 0, 0}}));
  ASSERT_EQ(q.dim(), 1);
  EXPECT_DOUBLE_EQ(q.dense()(0, 0), -0.4);
  EXPECT_DOUBLE_EQ(q.deficit(0), 0.4);
}

TEST(Assemble, AbsorbingStateRow) {
  const auto q = assemble(builtin_model("ssir"), Theta{0.4, 0.5, 0.0}, Truncation({State{2, 0, 1}}));
  EXPECT_EQ(q.dense()(0, 0), 0.0);
  EXPECT_EQ(q.deficit(0), 0.0);
}

TEST(Assemble, InvariantsOnSsirTruncation) {
  const auto net = builtin_model("ssir");
  TruncationSequence seq(net, Truncation({State{3, 2, 1}}), default_directions(3));
  const auto q = assemble(net, Theta{0.3, 0.7, 1.1}, *seq.at(3));
  const Eigen::MatrixXd d = q.dense();
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    EXPECT_LE(d(i, i), 0.0);
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      if (i != j) EXPECT_GE(d(i, j), 0.0);
    }
    EXPECT_NEAR(d.row(i).sum(), -q.deficit(i), 1e-12);
    EXPECT_GE(q.deficit(i), 0.0);
  }
  EXPECT_EQ(q.q_bar, q.diag.minCoeff());
}

TEST(RaRule, Examples) {
  const std::vector<std::size_t> three{10, 10, 10};
  EXPECT_EQ(ra_rule_of_thumb(three, 9), EstimatorMode::RA);
  EXPECT_EQ(ra_rule_of_thumb(three, 20), EstimatorMode::IA);
  const std::vector<std::size_t> one{6};
  EXPECT_EQ(ra_rule_of_thumb(one, 6), EstimatorMode::IA);
}

TEST(TruncationProperty, MonotoneAndConvergentOnFiniteChain) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::MatrixXd rates = random_generator(6, rng);
    const auto net = finite_chain_network(rates);
    Eigen::MatrixXd full = rates;
    for (int i = 0; i < 6; ++i) full(i, i) = -(rates.row(i).sum() - rates(i, i));
    const Eigen::MatrixXd m_full = oracle_expm(full, 0.7);
    TruncationSequence seq(net, Truncation({State{2}}), default_directions(1));
    double prev = -1.0;
    for (int r = 0; r < 6; ++r) {
      const auto trunc = seq.at(r);
      const Eigen::MatrixXd m = oracle_expm(assemble(net, Theta{1.0}, *trunc).dense(), 0.7);
      const auto i = *trunc->index_of(State{2});
      EXPECT_GE(m(i, i), prev - 1e-15);
      prev = m(i, i);
      if (trunc->size() == 6) EXPECT_NEAR(m(i, i), m_full(2, 2), 1e-8);
    }
  }
}

TEST(TruncationProperty, TruncatedExponentialIsTabooProbability) {
  // Five-state chain; truncation keeps states 0..3. The conservatized chain
  // sends the cut mass to an absorbing sink.
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd rates = random_generator(5, rng);
  const auto net = finite_chain_network(rates);
  const auto q = assemble(net, Theta{1.0}, Truncation({State{0}, State{1}, State{2}, State{3}}));
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(5, 5);
  r.topLeftCorner(4, 4) = q.dense();
  r.col(4).head(4) = q.deficit;
  const double t = 0.8;
  const Eigen::MatrixXd lhs = oracle_expm(q.dense(), t);
  const Eigen::MatrixXd conservatized = oracle_expm(r, t).topLeftCorner(4, 4);
  EXPECT_LT((lhs - conservatized).cwiseAbs().maxCoeff(), 1e-10);
  // Path enumeration over the uniformized jump chain, never entering state 4.
  const double lambda = -q.q_bar;
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(4, 4) + q.dense() / lambda;
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(4, 4);
  Eigen::MatrixXd taboo = Eigen::MatrixXd::Zero(4, 4);
  double w = std::exp(-lambda * t);
  for (int n = 0; n < 200; ++n) {
    taboo += w * power;
    power = power * p;
    w *= lambda * t / (n + 1);
  }
  EXPECT_LT((lhs - taboo).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(TruncationSequence, LazyGrowthAndErrors) {
  const auto net = builtin_model("mmc", {2});
  TruncationSequence seq(net, Truncation({State{3}}), default_directions(1));
  EXPECT_EQ(seq.built_levels(), 1u);
  EXPECT_EQ(seq.at(4)->size(), 8u);
  EXPECT_EQ(seq.built_levels(), 5u);
  EXPECT_THROW(seq.at(-1), DomainError);
  EXPECT_THROW(TruncationSequence(net, Truncation(), default_directions(1)), UsageError);
}

TEST(SeedPath, FractionalRelaxationFallsBackToSearch) {
  // Jumps of +-1 and +-2: the relaxation takes half a -2 jump for a -1 move.
  Eigen::MatrixXd rates(3, 3);
  rates << 0, 1, 1, 1, 0, 1, 1, 1, 0;
  const auto p = seed_path(finite_chain_network(rates), State{2}, State{1});
  EXPECT_EQ(p.states, (std::vector<State>{{2}, {1}}));
  std::int64_t total = 0;
  for (auto v : p.reaction_counts) total += v;
  EXPECT_EQ(total, 1);
}
