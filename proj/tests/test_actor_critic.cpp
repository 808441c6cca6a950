#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "offdae/actor_critic.hpp"
#include "offdae/dp.hpp"
#include "offdae/environments.hpp"

using namespace offdae;

TEST(Gradients, CriticMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto c = gradcheck::random_grad_case(seed);
    EXPECT_LT(gradcheck::critic_gradient_error(c), 1e-6) << "seed " << seed << " " << method_name(c.config.method);
  }
}

TEST(Gradients, ActorMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto c = gradcheck::random_grad_case(seed);
    EXPECT_LT(gradcheck::actor_gradient_error(c), 1e-6) << "seed " << seed;
  }
}

TEST(Gradients, CriticIgnoresLogits) {
  auto c = gradcheck::random_grad_case(7);
  const auto g = critic_loss(c.batch(), c.agent, c.config).grad;
  for (double x : g.logits) EXPECT_EQ(x, 0.0);
}

TEST(ReplayBuffer, EvictsOldestSegmentsFirst) {
  ReplayBuffer buf(5);
  auto seg = [](int s, std::size_t len) {
    Trajectory t;
    for (std::size_t i = 0; i < len; ++i) t.steps.push_back({s, 0, 0.0});
    t.final_state = s;
    t.truncated = true;
    return t;
  };
  buf.push(seg(0, 2));
  buf.push(seg(1, 2));
  EXPECT_EQ(buf.num_steps(), 4u);
  buf.push(seg(2, 2));
  EXPECT_EQ(buf.size(), 2u);
  EXPECT_EQ(buf[0].steps[0].state, 1);
  EXPECT_EQ(buf[1].steps[0].state, 2);
  EXPECT_THROW(buf.push(seg(3, 6)), ConfigError);
}

TEST(ReplayBuffer, SampleCoversRequestedStepsAndIsSeeded) {
  ReplayBuffer buf(100);
  for (int s = 0; s < 10; ++s) {
    Trajectory t;
    t.steps.assign(3, {s, 0, 0.0});
    t.final_state = s;
    buf.push(t);
  }
  Rng r1 = make_rng(4), r2 = make_rng(4);
  const auto a = buf.sample(16, r1);
  const auto b = buf.sample(16, r2);
  ASSERT_EQ(a.size(), b.size());
  std::size_t steps = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i], b[i]);
    steps += a[i]->size();
  }
  EXPECT_GE(steps, 16u);
}

TEST(Ema, BlendsEveryTable) {
  const auto mdp = envs::chain();
  TrainConfig cfg;
  AgentState agent(mdp, cfg);
  agent.params.value.assign(agent.params.value.size(), 1.0);
  agent.params.nature.assign(agent.params.nature.size(), 2.0);
  ema_update(agent, 0.75);
  for (double x : agent.ema.value) EXPECT_DOUBLE_EQ(x, 0.25);
  for (double x : agent.ema.nature) EXPECT_DOUBLE_EQ(x, 0.5);
  ema_update(agent, 0.0);
  EXPECT_EQ(agent.ema.value, agent.params.value);
}

TEST(Agent, AdvantagesAreCentredUnderTheTargetPolicy) {
  auto c = gradcheck::random_grad_case(3);
  const auto pi = c.agent.target_policy();
  const auto adv = c.agent.advantage(c.agent.params.adv, pi);
  for (int s = 0; s < c.agent.num_states; ++s) {
    double m = 0.0;
    for (int a = 0; a < c.agent.num_actions; ++a) m += pi[c.agent.idx(s, a)] * adv[c.agent.idx(s, a)];
    EXPECT_NEAR(m, 0.0, 1e-12);
  }
}

TEST(Agent, GreedyTiesGoToLowestAction) {
  const auto mdp = envs::chain();
  AgentState agent(mdp, TrainConfig{});
  EXPECT_EQ(greedy_action(agent, 0), 0);
  agent.params.logits[agent.idx(0, 1)] = 1.0;
  EXPECT_EQ(greedy_action(agent, 0), 1);
}

TEST(Train, ConfigValidation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(train(envs::chain(), c), ConfigError);
  c = TrainConfig{};
  c.gamma = 1.5;
  EXPECT_THROW(train(envs::chain(), c), ConfigError);
}

TEST(Train, SameSeedSameCurve) {
  TrainConfig c;
  c.total_steps = 3000;
  c.seed = 11;
  const auto mdp = envs::gridworld(4, 4, 0.2);
  const auto a = train(mdp, c);
  const auto b = train(mdp, c);
  ASSERT_EQ(a.curve.points.size(), b.curve.points.size());
  for (std::size_t i = 0; i < a.curve.points.size(); ++i)
    EXPECT_EQ(a.curve.points[i].mean_return, b.curve.points[i].mean_return);
  EXPECT_EQ(a.agent.params.value, b.agent.params.value);
}

TEST(Train, SolvesTheChainWithEveryMethod) {
  const auto mdp = envs::chain(4, 0.9);
  for (auto m : {CriticMethod::Uncorrected, CriticMethod::Dae, CriticMethod::OffpolicyDae, CriticMethod::Tree}) {
    TrainConfig c;
    c.method = m;
    c.gamma = 0.9;
    c.total_steps = 20000;
    c.max_episode_steps = 50;
    const auto res = train(mdp, c);
    EXPECT_DOUBLE_EQ(res.curve.points.back().mean_return, 1.0) << method_name(m);
    for (int s = 0; s < 4; ++s) EXPECT_EQ(greedy_action(res.agent, s), 1) << method_name(m) << " state " << s;
  }
}

TEST(Train, FrozenPolicyCriticMatchesPolicyValues) {
  // With the actor frozen at the uniform policy the off-policy DAE critic
  // should settle near the uniform policy's values.
  const auto mdp = envs::chain(3, 0.9);
  TrainConfig c;
  c.gamma = 0.9;
  c.learn_policy = false;
  c.total_steps = 40000;
  c.max_episode_steps = 200;
  const auto res = train(mdp, c);
  const auto v = policy_evaluation_exact(mdp, PolicyTable::uniform(mdp));
  for (int s = 0; s < 3; ++s) EXPECT_NEAR(res.agent.params.value[static_cast<std::size_t>(s)], v[static_cast<std::size_t>(s)], 0.02);
}

TEST(Train, EmpiricalModelLearnsToo) {
  TrainConfig c;
  c.transition_model = TransitionModel::Kind::Empirical;
  c.total_steps = 20000;
  const auto res = train(envs::gridworld(4, 4, 0.2), c);
  EXPECT_GT(res.curve.points.back().mean_return, 0.5);
}

TEST(Train, CurveHasOnePointPerEvaluation) {
  TrainConfig c;
  c.total_steps = 5000;
  c.eval_interval = 1000;
  const auto res = train(envs::chain(), c);
  ASSERT_EQ(res.curve.points.size(), 5u);
  EXPECT_EQ(res.curve.points.front().step, 1000);
  EXPECT_EQ(res.curve.points.back().step, 5000);
}
