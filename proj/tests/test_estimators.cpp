#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "offdae/dp.hpp"
#include "offdae/environments.hpp"
#include "offdae/estimators.hpp"
#include "offdae/features.hpp"
#include "offdae/population.hpp"

using namespace offdae;

namespace {

// Builds a dataset on the two-start fig3 MDP with the given counts n[start][action].
Dataset fig3_counts(int n0u, int n0d, int n1u, int n1d) {
  Dataset d;
  auto add = [&](int start, int action, int count) {
    for (int i = 0; i < count; ++i)
      d.trajectories.push_back({{{start, 0, 0.0}, {2, action, action == envs::kUp ? 1.0 : 0.0}}, 3, false});
  };
  add(0, envs::kUp, n0u);
  add(0, envs::kDown, n0d);
  add(1, envs::kUp, n1u);
  add(1, envs::kDown, n1d);
  return d;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Features, StateActionCounts) {
  const Trajectory t{{{0, 0, 0.0}, {2, envs::kUp, 1.0}}, 3, false};
  const auto phi = build_features(t, 1.0, FeatureMode::StateAction);
  ASSERT_EQ(phi.size(), 2u);
  EXPECT_EQ(phi.at({0, 0, -1}), 1.0);
  EXPECT_EQ(phi.at({2, envs::kUp, -1}), 1.0);
  const auto start = build_features(t, 0.7, FeatureMode::StartState);
  ASSERT_EQ(start.size(), 1u);
  EXPECT_EQ(start.begin()->second, 1.0);
  const auto first = build_features(t, 0.0, FeatureMode::StateAction);
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(first.at({0, 0, -1}), 1.0);
}

TEST(Features, DiscountedTransitionOccupancy) {
  const Trajectory t{{{0, 1, 0.0}, {0, 1, 0.0}, {1, 0, 0.0}}, 2, false};
  const auto phi = build_features(t, 0.5, FeatureMode::Transition);
  EXPECT_DOUBLE_EQ(phi.at({0, 1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(phi.at({0, 1, 1}), 0.5);
  EXPECT_DOUBLE_EQ(phi.at({1, 0, 2}), 0.25);
}

TEST(TransitionModel, EmpiricalCounts) {
  Dataset d;
  for (int i = 0; i < 3; ++i) d.trajectories.push_back({{{0, 0, 0.0}}, 1, false});
  d.trajectories.push_back({{{0, 0, 0.0}}, 2, false});
  const auto m = estimate_transitions(d, 3, 1);
  EXPECT_DOUBLE_EQ(m.prob(0, 0, 1), 0.75);
  EXPECT_DOUBLE_EQ(m.prob(0, 0, 2), 0.25);
  EXPECT_EQ(m.count(0, 0, 1), 3);
  EXPECT_EQ(m.pair_count(0, 0), 4);
  EXPECT_FALSE(m.covers(0, 0, 0));
}

TEST(TransitionModel, DeterministicRowsOneHot) {
  const auto mdp = envs::gridworld(4, 3, 0.0);
  const auto data = sample_dataset(mdp, PolicyTable::uniform(mdp), 1, 200, 50);
  const auto m = estimate_transitions(data, mdp.num_states(), 4);
  for (int s = 0; s < mdp.num_states(); ++s)
    for (int a = 0; a < 4; ++a)
      if (!m.row(s, a).empty()) {
        ASSERT_EQ(m.row(s, a).size(), 1u);
        EXPECT_EQ(m.row(s, a)[0].second, 1.0);
      }
}

TEST(TransitionModel, Fig4CoinFlipFrequency) {
  const auto mdp = envs::fig4();
  const auto data = sample_dataset(mdp, PolicyTable::uniform(mdp), 3, 10000, 10);
  const auto m = estimate_transitions(data, 7, 2);
  EXPECT_NEAR(m.prob(3, 0, 4), 0.5, 3.0 * std::sqrt(0.25 / 10000.0));
}

TEST(FitMc, AppendixClosedForm) {
  const auto d = fig3_counts(3, 5, 2, 1);
  const auto v = fit_mc(d, 1.0);
  EXPECT_NEAR(*v[0], 3.0 / 8.0, 1e-12);
  EXPECT_NEAR(*v[1], 2.0 / 3.0, 1e-12);
  EXPECT_FALSE(v[2].has_value());
}

TEST(FitMc, SingleTrajectory) {
  Dataset d;
  d.trajectories.push_back({{{1, 0, 3.0}, {0, 0, 4.0}}, 2, false});
  EXPECT_DOUBLE_EQ(*fit_mc(d, 1.0)[1], 7.0);
  EXPECT_THROW(fit_mc(Dataset{}, 1.0), FitError);
}

TEST(FitBatchTd0, AppendixClosedForm) {
  const auto d = fig3_counts(3, 5, 2, 1);
  const auto v = fit_batch_td0(d, 1.0);
  const double expected = 5.0 / 11.0;
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(*v[static_cast<std::size_t>(s)], expected, 1e-12);
}

TEST(FitBatchTd0, ExactOnDeterministicCoverage) {
  const auto mdp = envs::chain(3, 0.9);
  const PolicyTable right(4, 2, {0, 1, 0, 1, 0, 1, 0.5, 0.5});
  const auto data = sample_dataset(mdp, right, 0, 1, 10);
  const auto v = fit_batch_td0(data, 0.9);
  const auto exact = policy_evaluation_exact(mdp, right);
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(*v[static_cast<std::size_t>(s)], exact[static_cast<std::size_t>(s)], 1e-12);
}

TEST(FitBatchTd0, RandomMdpConverges) {
  const auto mdp = envs::random(21, 6, 3);
  const auto pi = PolicyTable::uniform(mdp);
  const auto data = sample_dataset_steps(mdp, pi, 5, 50000, 1000);
  const auto v = fit_batch_td0(data, 1.0);
  const auto exact = policy_evaluation_exact(mdp, pi);
  for (int s = 0; s < 5; ++s) EXPECT_NEAR(*v[static_cast<std::size_t>(s)], exact[static_cast<std::size_t>(s)], 0.05);
}

TEST(FitDae, Fig3PseudoinverseSystem) {
  const auto mdp = envs::fig3();
  const auto pi = PolicyTable::uniform(mdp);
  for (int n0u = 0; n0u <= 3; ++n0u)
    for (int n0d = 0; n0d <= 3; ++n0d)
      for (int n1u = 0; n1u <= 3; ++n1u)
        for (int n1d = 0; n1d <= 3; ++n1d) {
          if (n0u + n0d + n1u + n1d == 0) continue;
          const double n0 = n0u + n0d, n1 = n1u + n1d;
          Eigen::Matrix3d M;
          M << n0u - n0d, n0, 0, n1u - n1d, 0, n1, n0u + n1u, n0u, n1u;
          const Eigen::Vector3d rhs(n0u, n1u, n0u + n1u);
          const Eigen::Vector3d x = M.completeOrthogonalDecomposition().pseudoInverse() * rhs;
          const auto rep = fit_dae(fig3_counts(n0u, n0d, n1u, n1d), pi, 1.0, kFullReturn);
          EXPECT_NEAR(rep.tables.a(2, envs::kUp), x(0), 1e-10) << n0u << n0d << n1u << n1d;
          EXPECT_NEAR(rep.tables.v(0), x(1), 1e-10) << n0u << n0d << n1u << n1d;
          EXPECT_NEAR(rep.tables.v(1), x(2), 1e-10) << n0u << n0d << n1u << n1d;
          const bool full_rank = M.fullPivLu().rank() == 3;
          EXPECT_EQ(rep.unique && rep.num_params == 3, full_rank) << n0u << n0d << n1u << n1d;
          if (n0 == 0 || n1 == 0) {
            EXPECT_FALSE(rep.v_identified[n0 == 0 ? 0 : 1]);
          }
        }
}

TEST(FitDae, OnPolicyDeterministicRecoversOracle) {
  const auto mdp = envs::gridworld(3, 3, 0.0, 0.9);
  const auto pi = envs::random_policy(mdp, 3);
  const auto rep = fit_dae_population(mdp, pi, pi, kFullReturn);
  const auto exact = DecompositionTables::exact(mdp, pi);
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (!rep.tables.v_known[static_cast<std::size_t>(s)] || mdp.terminal(s)) continue;
    EXPECT_NEAR(rep.tables.v(s), exact.v(s), 1e-8);
    for (int a = 0; a < 4; ++a) EXPECT_NEAR(rep.tables.a(s, a), exact.a(s, a), 1e-8);
  }
}

TEST(FitDae, TruncatedFullReturnNeedsBootstrap) {
  Dataset d;
  d.trajectories.push_back({{{0, 0, 1.0}}, 1, true});
  const PolicyTable pi(2, 1, {1.0, 1.0});
  EXPECT_THROW(fit_dae(d, pi, 0.9, kFullReturn), FitError);
  const std::vector<double> boot = {0.0, 2.0};
  const auto rep = fit_dae(d, pi, 0.9, kFullReturn, &boot);
  EXPECT_NEAR(rep.tables.v(0), 1.0 + 0.9 * 2.0, 1e-12);
}

TEST(FitDae, CounterexampleBias) {
  const auto mdp = envs::counterexample();
  const auto mu = PolicyTable::uniform(mdp);
  const auto pi = envs::counterexample_policy(1.0);
  const auto rep = fit_dae_population(mdp, mu, pi, kFullReturn);
  EXPECT_NEAR(rep.tables.v(0), 1.0 / 3.0, 1e-10);
}

TEST(FitOffpolicyDae, SupportViolationNamesTransition) {
  const auto mdp = envs::fig4();
  const auto model = TransitionModel::oracle(mdp);
  Dataset d;
  d.trajectories.push_back({{{3, 0, 0.0}}, 6, false});
  try {
    fit_offpolicy_dae(d, PolicyTable::uniform(mdp), model, 1.0, kFullReturn);
    FAIL() << "expected FitError";
  } catch (const FitError& e) {
    EXPECT_NE(std::string(e.what()).find("(3,0,6)"), std::string::npos);
  }
}

TEST(FitOffpolicyDae, DeterministicMatchesDae) {
  const auto mdp = envs::gridworld(4, 3, 0.0, 0.95);
  const auto mu = PolicyTable::uniform(mdp);
  const auto pi = envs::random_policy(mdp, 8);
  const auto data = sample_dataset(mdp, mu, 2, 100, 30);
  const auto model = estimate_transitions(data, mdp.num_states(), 4);
  for (BackupLength n : {BackupLength(0), BackupLength(3)}) {
    const auto a = fit_dae(data, pi, 0.95, n);
    const auto b = fit_offpolicy_dae(data, pi, model, 0.95, n);
    EXPECT_LT(max_abs_diff(a.tables.V, b.tables.V), 1e-9);
    EXPECT_LT(max_abs_diff(a.tables.A, b.tables.A), 1e-9);
    for (int s = 0; s < mdp.num_states(); ++s)
      for (int act = 0; act < 4; ++act)
        for (const auto& [s2, v] : b.tables.B.row(s, act)) EXPECT_EQ(v, 0.0);
  }
}

TEST(FitOffpolicyDae, Fig4PopulationMatchesOracle) {
  const auto mdp = envs::fig4();
  const auto pi = PolicyTable::uniform(mdp);
  const auto rep = fit_offpolicy_dae_population(mdp, pi, pi, TransitionModel::oracle(mdp), kFullReturn);
  const auto exact = DecompositionTables::exact(mdp, pi);
  EXPECT_TRUE(rep.unique);
  // Full returns only pin V at start states; interior states stay absent.
  for (int s : {0, 1}) EXPECT_NEAR(rep.tables.v(s), exact.v(s), 1e-8);
  EXPECT_FALSE(rep.tables.v_known[3]);
  EXPECT_LT(max_abs_diff(rep.tables.A, exact.A), 1e-8);
  EXPECT_NEAR(rep.tables.B.at(3, 0, 4), 0.5, 1e-8);
  EXPECT_NEAR(rep.tables.B.at(3, 0, 5), -0.5, 1e-8);
}

TEST(FitOffpolicyDae, RandomSampledConverges) {
  const auto mdp = envs::random(12, 6, 3);
  const auto mu = PolicyTable::uniform(mdp);
  const auto pi = envs::random_policy(mdp, 13);
  const auto data = sample_dataset_steps(mdp, mu, 14, 50000, 1000);
  const auto rep = fit_offpolicy_dae(data, pi, TransitionModel::oracle(mdp), 1.0, 2);
  const auto exact = policy_evaluation_exact(mdp, pi);
  for (int s = 0; s < 5; ++s) EXPECT_NEAR(rep.tables.v(s), exact[static_cast<std::size_t>(s)], 0.05);
}

TEST(FitOffpolicyDae, ConstraintsHoldOnFits) {
  const auto mdp = envs::random(30, 5, 3);
  const auto mu = envs::random_policy(mdp, 31);
  const auto pi = envs::random_policy(mdp, 32);
  const auto data = sample_dataset(mdp, mu, 33, 200, 100);
  const auto model = estimate_transitions(data, 5, 3);
  const auto rep = fit_offpolicy_dae(data, pi, model, 1.0, 1);
  EXPECT_GE(rep.objective_value, 0.0);
  for (int s = 0; s < 4; ++s) {
    double c = 0.0;
    for (int a = 0; a < 3; ++a) c += pi(s, a) * rep.tables.a(s, a);
    EXPECT_LT(std::abs(c), 1e-9);
    for (int a = 0; a < 3; ++a) {
      double cb = 0.0;
      for (const auto& [s2, b] : rep.tables.B.row(s, a)) cb += model.prob(s, a, s2) * b;
      EXPECT_LT(std::abs(cb), 1e-9);
    }
  }
}

TEST(Population, RecoversOracleTablesOnRandomMdps) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mdp = envs::random(seed, 5, 2);
    const auto mu = envs::random_policy(mdp, seed + 100);
    const auto pi = envs::random_policy(mdp, seed + 200);
    const auto exact = DecompositionTables::exact(mdp, pi);
    for (BackupLength n : {BackupLength(0), BackupLength(1), BackupLength(2), kFullReturn}) {
      const auto rep = fit_offpolicy_dae_population(mdp, mu, pi, TransitionModel::oracle(mdp), n);
      EXPECT_TRUE(rep.unique) << seed << " " << backup_name(n);
      EXPECT_LT(max_abs_diff(rep.tables.V, exact.V), 1e-8) << seed << " " << backup_name(n);
      EXPECT_LT(max_abs_diff(rep.tables.A, exact.A), 1e-8) << seed << " " << backup_name(n);
      for (int s = 0; s < 4; ++s)
        for (int a = 0; a < 2; ++a)
          for (const auto& [s2, b] : exact.B.row(s, a)) EXPECT_NEAR(rep.tables.B.at(s, a, s2), b, 1e-8);
    }
  }
}
