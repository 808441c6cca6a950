#include <gtest/gtest.h>

#include <cmath>

#include "offdae/analysis.hpp"
#include "offdae/environments.hpp"
#include "offdae/targets.hpp"

using namespace offdae;

namespace {

Trajectory make_traj(std::vector<Step> steps, int final_state, bool truncated = false) {
  Trajectory t;
  t.steps = std::move(steps);
  t.final_state = final_state;
  t.truncated = truncated;
  return t;
}

}  // namespace

TEST(Targets, ParseMethodNames) {
  EXPECT_EQ(parse_method("offpolicy-dae"), CriticMethod::OffpolicyDae);
  EXPECT_EQ(parse_method("tree"), CriticMethod::Tree);
  EXPECT_THROW(parse_method("retrace"), ConfigError);
  for (auto m : {CriticMethod::Uncorrected, CriticMethod::Dae, CriticMethod::OffpolicyDae, CriticMethod::Tree})
    EXPECT_EQ(parse_method(method_name(m)), m);
}

TEST(Targets, UncorrectedBootstrapsUnlessTerminal) {
  const auto traj = make_traj({{0, 0, 1.0}, {1, 1, 2.0}, {2, 0, 4.0}}, 3);
  const std::vector<double> v = {0.0, 0.0, 10.0, 100.0};
  EXPECT_DOUBLE_EQ(uncorrected_target(window_at(traj, 0, 1), v, 0.5), 1.0 + 0.5 * 2.0 + 0.25 * 10.0);
  EXPECT_DOUBLE_EQ(uncorrected_target(window_at(traj, 0, kFullReturn), v, 0.5), 1.0 + 1.0 + 1.0);
  const auto cut = make_traj({{0, 0, 1.0}}, 3, true);
  EXPECT_DOUBLE_EQ(uncorrected_target(window_at(cut, 0, kFullReturn), v, 0.5), 1.0 + 50.0);
}

TEST(Targets, TreeBackupOneStep) {
  // r + g * sum_a pi(a|s1) Q(s1, a)
  const auto traj = make_traj({{0, 0, 1.0}, {1, 1, 0.0}}, 2);
  const PolicyTable pi(3, 2, {0.5, 0.5, 0.25, 0.75, 1.0, 0.0});
  const std::vector<double> q = {0.0, 0.0, 4.0, 8.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(tree_backup_target(window_at(traj, 0, 0), q, pi, 0.9), 1.0 + 0.9 * (0.25 * 4.0 + 0.75 * 8.0));
}

TEST(Targets, TreeBackupWithTakenActionsUnderDeterministicTargetIsUncorrected) {
  // A target that always takes the logged action turns the tree backup into
  // the plain n-step return bootstrapped with Q of the target.
  const auto mdp = envs::random(5, 5, 2, 0.9);
  const PolicyTable pi(5, 2, {1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
  const auto data = sample_dataset(mdp, pi, 3, 50, 30);
  const auto exact = DecompositionTables::exact(mdp, pi);
  std::vector<double> q(10);
  for (int s = 0; s < 5; ++s)
    for (int a = 0; a < 2; ++a) q[static_cast<std::size_t>(s * 2 + a)] = exact.v(s) + exact.a(s, a);
  for (const auto& traj : data.trajectories)
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const auto w = window_at(traj, t, 3);
      EXPECT_NEAR(tree_backup_target(w, q, pi, 0.9), uncorrected_target(w, exact.V, 0.9), 1e-12);
    }
}

TEST(Targets, ExactTablesMakeTheCorrectedTargetsExact) {
  // With the target policy's exact (V, A, B), the off-policy DAE target equals
  // V(s_0) on every window, whatever the behaviour.
  const auto mdp = envs::random(8, 5, 3, 0.95);
  const auto mu = envs::random_policy(mdp, 1);
  const auto pi = envs::random_policy(mdp, 2);
  const auto exact = DecompositionTables::exact(mdp, pi);
  const auto data = sample_dataset(mdp, mu, 3, 30, 40);
  for (const auto& w : expand_windows(data, 4))
    EXPECT_NEAR(critic_target_hierarchy(w, exact, exact.V, 0.95, CriticMethod::OffpolicyDae), exact.v(w.state_at(0)),
                1e-12);
}

TEST(Targets, HierarchyRejectsTreeAndMissingNature) {
  const auto traj = make_traj({{0, 0, 1.0}}, 1);
  DecompositionTables t(2, 1);
  EXPECT_THROW(critic_target_hierarchy(window_at(traj, 0, 0), t, t.V, 1.0, CriticMethod::Tree), ConfigError);
  EXPECT_THROW(critic_target_hierarchy(window_at(traj, 0, 0), t, t.V, 1.0, CriticMethod::OffpolicyDae), ConfigError);
}

TEST(Hierarchy, CollapsesExactlyOnRandomData) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mdp = envs::random(seed, 5, 3);
    const auto pi = envs::random_policy(mdp, seed + 50);
    auto tables = DecompositionTables::exact(mdp, pi);
    for (auto& x : tables.A) x += 0.3;  // the identities do not need true tables
    const auto data = sample_dataset(mdp, envs::random_policy(mdp, seed + 60), seed, 20, 100);
    const auto rep = hierarchy_check(tables, data, 1.0, 2);
    EXPECT_GT(rep.windows, 0u);
    EXPECT_EQ(rep.max_deviation(), 0.0);
  }
}

TEST(DecompositionResidual, ZeroWithExactTablesUnderAnyBehaviour) {
  const auto mdp = envs::random(4, 6, 3);
  const auto pi = envs::random_policy(mdp, 5);
  const auto exact = DecompositionTables::exact(mdp, pi);
  const auto data = sample_dataset(mdp, PolicyTable::uniform(mdp), 6, 100, 1000);
  for (const auto& traj : data.trajectories)
    EXPECT_LT(std::abs(decomposition_residual(traj, exact.V, exact.A, exact.B, 1.0)), 1e-9);
}

TEST(DecompositionResidual, TruncatedNeedsDiscount) {
  const auto mdp = envs::random(4, 4, 2);
  const auto exact = DecompositionTables::exact(mdp, PolicyTable::uniform(mdp));
  const auto traj = make_traj({{0, 0, 0.0}}, 1, true);
  EXPECT_THROW(decomposition_residual(traj, exact.V, exact.A, exact.B, 1.0), DomainError);
}

TEST(Counterexample, ClosedFormSpotValues) {
  EXPECT_NEAR(counterexample_closed_form(0.5, 1.0).v_star, 1.0 / 3.0, 1e-15);
  const auto uniform = counterexample_closed_form(0.5, 0.5);
  EXPECT_NEAR(uniform.v_star, 0.25, 1e-15);
  EXPECT_NEAR(uniform.bias, 0.0, 1e-15);
  for (double m : {0.1, 0.3, 0.7, 0.9}) {
    EXPECT_NEAR(counterexample_closed_form(m, m).bias, 0.0, 1e-12);
    EXPECT_GT(std::abs(counterexample_closed_form(m, 1.0 - m + (m == 0.5 ? 0.1 : 0.0)).bias), 1e-6);
  }
  EXPECT_THROW(counterexample_closed_form(0.0, 0.5), DomainError);
  EXPECT_THROW(counterexample_closed_form(1.0, 0.5), DomainError);
}

TEST(Counterexample, SolverMatchesClosedForm) {
  const auto mdp = envs::counterexample();
  for (double m : {0.2, 0.5, 0.8})
    for (double p : {0.0, 0.4, 1.0}) {
      const auto rep =
          fit_dae_population(mdp, envs::counterexample_policy(m), envs::counterexample_policy(p), kFullReturn);
      EXPECT_NEAR(rep.tables.v(0), counterexample_closed_form(m, p).v_star, 1e-8) << m << " " << p;
    }
}

TEST(Explorative, FullSupportBehaviourReachesEverything) {
  const auto mdp = envs::random(9, 5, 2);
  EXPECT_TRUE(unreached_transitions(mdp, envs::random_policy(mdp, 1)).empty());
}

TEST(Explorative, SkippedActionIsReported) {
  const auto mdp = envs::counterexample();
  const auto unreached = unreached_transitions(mdp, envs::counterexample_policy(1.0));
  ASSERT_EQ(unreached.size(), 1u);
  EXPECT_EQ(unreached[0], TransitionId(1, 1, 2));
}

TEST(Recovery, PassesOnRandomInstancesAndCatchesPerturbation) {
  const auto mdp = envs::random(17, 5, 3);
  const auto mu = envs::random_policy(mdp, 18);
  const auto pi = envs::random_policy(mdp, 19);
  for (BackupLength n : {BackupLength(0), BackupLength(2), kFullReturn}) {
    const auto rep = verify_recovery(mdp, mu, pi, n);
    EXPECT_TRUE(rep.passed(1e-8)) << backup_name(n);
    EXPECT_EQ(rep.design_rank, rep.num_params);
    const auto bad = verify_recovery(mdp, mu, pi, n, 1e-3);
    EXPECT_FALSE(bad.passed(1e-8));
    EXPECT_NEAR(bad.max_error_a, 1e-3, 1e-9);
  }
}

TEST(PolicyImprovement, HoldsOnRandomPairs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto mdp = envs::random(seed, 6, 3, seed % 2 ? 1.0 : 0.9);
    EXPECT_LT(policy_improvement_check(mdp, envs::random_policy(mdp, seed + 1), envs::random_policy(mdp, seed + 2)),
              1e-9);
  }
}
