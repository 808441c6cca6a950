#include <gtest/gtest.h>

#include <cmath>

#include "offdae/dp.hpp"
#include "offdae/environments.hpp"
#include "offdae/mdp.hpp"

using namespace offdae;

TEST(FiniteMdp, RejectsRowsThatDoNotSumToOne) {
  EXPECT_THROW(FiniteMdp(2, 1, {0.5, 0.4, 0.0, 1.0}, {0.0, 0.0}, 0.9, {1.0, 0.0}, {false, true}), ConfigError);
}

TEST(FiniteMdp, RejectsInitialMassOnTerminal) {
  EXPECT_THROW(FiniteMdp(2, 1, {0.0, 1.0, 0.0, 1.0}, {0.0, 0.0}, 0.9, {0.5, 0.5}, {false, true}), ConfigError);
}

TEST(FiniteMdp, RejectsNonEpisodicChainAtDiscountOne) {
  // State 0 may loop on itself forever under action 1.
  const std::vector<double> p = {0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0};
  EXPECT_THROW(FiniteMdp(2, 2, p, {0.0, 0.0, 0.0, 0.0}, 1.0, {1.0, 0.0}, {false, true}), ConfigError);
  EXPECT_NO_THROW(FiniteMdp(2, 2, p, {0.0, 0.0, 0.0, 0.0}, 0.9, {1.0, 0.0}, {false, true}));
}

TEST(FiniteMdp, HorizonOfToys) {
  EXPECT_EQ(envs::fig3().horizon(), 2);
  EXPECT_EQ(envs::fig4().horizon(), 4);
  EXPECT_EQ(envs::counterexample().horizon(), 2);
  EXPECT_FALSE(envs::random(1, 5, 2).horizon().has_value());
}

TEST(PolicyTable, RejectsBadRows) {
  EXPECT_THROW(PolicyTable(1, 2, {0.7, 0.2}), ConfigError);
  EXPECT_THROW(PolicyTable(1, 2, {1.5, -0.5}), ConfigError);
}

TEST(Sampling, CounterexampleEpisodesStartAtStateZero) {
  const auto mdp = envs::counterexample();
  const auto pi = PolicyTable::uniform(mdp);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto traj = sample_trajectory(mdp, pi, seed, 10);
    EXPECT_EQ(traj.state_at(0), 0);
    EXPECT_TRUE(traj.size() == 1 || traj.size() == 2);
    EXPECT_FALSE(traj.truncated);
  }
}

TEST(Sampling, Fig3StartFrequency) {
  const auto mdp = envs::fig3();
  const auto data = sample_dataset(mdp, PolicyTable::uniform(mdp), 7, 1000, 10);
  int zero = 0;
  for (const auto& t : data.trajectories) zero += t.state_at(0) == 0 ? 1 : 0;
  const double frac = zero / 1000.0;
  EXPECT_NEAR(frac, 0.9, 3.0 * std::sqrt(0.09 / 1000.0));
}

TEST(Sampling, DeterministicGivenSeed) {
  const auto mdp = envs::random(3, 6, 3);
  const auto pi = envs::random_policy(mdp, 4);
  EXPECT_EQ(sample_trajectory(mdp, pi, 11, 50), sample_trajectory(mdp, pi, 11, 50));
}

TEST(Sampling, TruncatesAtMaxLen) {
  const auto mdp = envs::chain(4, 0.9);
  const PolicyTable left(5, 2, {1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
  const auto traj = sample_trajectory(mdp, left, 0, 3);
  EXPECT_TRUE(traj.truncated);
  EXPECT_EQ(traj.size(), 3u);
}

TEST(Sampling, ShapeMismatchIsConfigError) {
  const auto mdp = envs::fig3();
  EXPECT_THROW(sample_trajectory(mdp, PolicyTable(2, 2, {1, 0, 1, 0}), 0, 5), ConfigError);
}

TEST(Sampling, MeanReturnMatchesValue) {
  const auto mdp = envs::random(5, 5, 3);
  const auto pi = envs::random_policy(mdp, 6);
  const auto V = policy_evaluation_exact(mdp, pi);
  double expected = 0.0;
  for (int s = 0; s < mdp.num_states(); ++s) expected += mdp.initial(s) * V[static_cast<std::size_t>(s)];
  const auto data = sample_dataset(mdp, pi, 99, 10000, 10000);
  double sum = 0.0, sq = 0.0;
  for (const auto& t : data.trajectories) {
    const double g = discounted_return(t, 1.0);
    sum += g;
    sq += g * g;
  }
  const double mean = sum / 10000.0;
  const double se = std::sqrt((sq / 10000.0 - mean * mean) / 10000.0);
  EXPECT_NEAR(mean, expected, 3.0 * se);
}

TEST(DiscountedReturn, Examples) {
  Trajectory t{{{0, 0, 0.0}, {2, envs::kUp, 1.0}}, 3, false};
  EXPECT_DOUBLE_EQ(discounted_return(t, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(discounted_return(Trajectory{}, 0.9), 0.0);
  Trajectory fig4_high{{{0, 0, 0.0}, {2, envs::kUp, 1.0}, {3, 0, 0.0}, {4, 0, 1.0}}, 6, false};
  EXPECT_DOUBLE_EQ(discounted_return(fig4_high, 1.0), 2.0);
  Trajectory fig4_low{{{0, 0, 0.0}, {2, envs::kDown, 0.0}, {3, 0, 0.0}, {5, 0, 0.0}}, 6, false};
  EXPECT_DOUBLE_EQ(discounted_return(fig4_low, 1.0), 0.0);
}

TEST(PolicyEvaluation, ToyValues) {
  const auto f3 = envs::fig3();
  const auto v3 = policy_evaluation_exact(f3, PolicyTable::uniform(f3));
  EXPECT_NEAR(v3[0], 0.5, 1e-12);
  EXPECT_NEAR(v3[1], 0.5, 1e-12);
  const auto f4 = envs::fig4();
  const auto v4 = policy_evaluation_exact(f4, PolicyTable::uniform(f4));
  EXPECT_NEAR(v4[0], 1.0, 1e-12);
  EXPECT_NEAR(v4[1], 1.0, 1e-12);
  const auto ce = envs::counterexample();
  for (double p : {0.0, 0.3, 1.0}) {
    EXPECT_NEAR(policy_evaluation_exact(ce, envs::counterexample_policy(p))[0], p / 2.0, 1e-12);
  }
}

TEST(PolicyEvaluation, BellmanResidualOnRandomMdps) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const int S = 2 + static_cast<int>(seed % 9), A = 1 + static_cast<int>(seed % 4);
    const auto mdp = envs::random(seed, S, A, seed % 2 ? 1.0 : 0.95);
    const auto pi = envs::random_policy(mdp, seed + 1000);
    const auto V = policy_evaluation_exact(mdp, pi);
    const auto Q = q_from_values(mdp, V);
    for (int s = 0; s < S; ++s) {
      if (mdp.terminal(s)) continue;
      double backup = 0.0;
      for (int a = 0; a < A; ++a) backup += pi(s, a) * Q[static_cast<std::size_t>(s * A + a)];
      EXPECT_LT(std::abs(backup - V[static_cast<std::size_t>(s)]), 1e-10);
    }
  }
}

TEST(PolicyEvaluation, NonEpisodicIsEvaluationError) {
  // Discount 0.9 lets the MDP be built; the policy evaluation then runs at 1.
  const std::vector<double> p = {0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0};
  const FiniteMdp mdp(2, 2, p, {0.0, 0.0, 0.0, 0.0}, 0.9, {1.0, 0.0}, {false, true});
  const PolicyTable stay(2, 2, {0.0, 1.0, 1.0, 0.0});
  EXPECT_NO_THROW(policy_evaluation_exact(mdp, stay));
  const auto kernel_only = [&] {
    const auto [live, pos] = detail::live_states(mdp);
    return detail::solve_resolvent(detail::live_kernel(mdp, stay, live, pos), 1.0, Eigen::VectorXd::Ones(1));
  };
  EXPECT_THROW(kernel_only(), EvaluationError);
}

TEST(Advantage, Fig3Values) {
  const auto mdp = envs::fig3();
  const auto A = advantage_exact(mdp, PolicyTable::uniform(mdp));
  EXPECT_NEAR(A[2 * 2 + envs::kUp], 0.5, 1e-12);
  EXPECT_NEAR(A[2 * 2 + envs::kDown], -0.5, 1e-12);
  EXPECT_NEAR(A[0 * 2 + 0], 0.0, 1e-12);
  EXPECT_NEAR(A[1 * 2 + 0], 0.0, 1e-12);
}

TEST(Advantage, CenteredOnRandomMdps) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto mdp = envs::random(seed, 6, 3, 0.97);
    const auto pi = envs::random_policy(mdp, seed + 7);
    const auto A = advantage_exact(mdp, pi);
    for (int s = 0; s < 6; ++s) {
      double c = 0.0;
      for (int a = 0; a < 3; ++a) c += pi(s, a) * A[static_cast<std::size_t>(s * 3 + a)];
      EXPECT_LT(std::abs(c), 1e-10);
    }
  }
}

TEST(NatureAdvantage, Fig4CoinFlip) {
  const auto mdp = envs::fig4();
  const auto B = nature_advantage_exact(mdp, PolicyTable::uniform(mdp));
  EXPECT_NEAR(B.at(3, 0, 4), 0.5, 1e-12);
  EXPECT_NEAR(B.at(3, 0, 5), -0.5, 1e-12);
  EXPECT_THROW(B.at(3, 0, 6), SupportError);
}

TEST(NatureAdvantage, ZeroOnDeterministicMdps) {
  for (double slip : {0.0}) {
    const auto mdp = envs::gridworld(4, 3, slip);
    ASSERT_TRUE(mdp.deterministic());
    const auto B = nature_advantage_exact(mdp, PolicyTable::uniform(mdp));
    for (int s = 0; s < mdp.num_states(); ++s)
      for (int a = 0; a < 4; ++a)
        for (const auto& [s2, b] : B.row(s, a)) EXPECT_EQ(b, 0.0);
  }
}

TEST(NatureAdvantage, CenteredOnRandomMdps) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto mdp = envs::random(seed, 5, 2);
    const auto B = nature_advantage_exact(mdp, envs::random_policy(mdp, seed));
    for (int s = 0; s < 4; ++s)
      for (int a = 0; a < 2; ++a) {
        double c = 0.0;
        for (const auto& [s2, b] : B.row(s, a)) c += mdp.p(s, a, s2) * b;
        EXPECT_LT(std::abs(c), 1e-10);
      }
  }
}

TEST(OptimalPolicy, ChainMovesRight) {
  const auto mdp = envs::chain(4, 0.9);
  const auto pi = optimal_policy(mdp);
  for (int s = 0; s < 4; ++s) EXPECT_EQ(pi(s, 1), 1.0);
}
