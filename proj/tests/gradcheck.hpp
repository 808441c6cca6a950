#ifndef OFFDAE_TESTS_GRADCHECK_HPP
#define OFFDAE_TESTS_GRADCHECK_HPP

// Random agent configurations and central finite differences for the
// critic and actor losses.  Shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "offdae/actor_critic.hpp"
#include "offdae/environments.hpp"

namespace offdae::gradcheck {

struct GradCase {
  FiniteMdp mdp;
  TrainConfig config;
  AgentState agent;
  std::vector<Trajectory> segments;

  std::vector<const Trajectory*> batch() const {
    std::vector<const Trajectory*> out;
    for (const auto& s : segments) out.push_back(&s);
    return out;
  }
};

inline GradCase random_grad_case(std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int S = 3 + static_cast<int>(rng() % 4);
  const int A = 2 + static_cast<int>(rng() % 2);
  auto mdp = envs::random(derive_seed(seed, {1}), S, A);
  TrainConfig config;
  config.method = static_cast<CriticMethod>(rng() % 4);
  config.gamma = 0.5 + 0.5 * uniform01(rng);
  config.beta_kl = 3.0 * uniform01(rng);
  config.transition_model = rng() % 2 ? TransitionModel::Kind::Oracle : TransitionModel::Kind::Empirical;
  AgentState agent(mdp, config);
  for (auto* p : {&agent.params, &agent.ema}) {
    for (auto* t : {&p->logits, &p->value, &p->adv, &p->nature})
      for (auto& x : *t) x = normal(rng);
  }
  const auto behavior = envs::random_policy(mdp, derive_seed(seed, {2}));
  GradCase c{mdp, config, agent, {}};
  const int num_segments = 1 + static_cast<int>(rng() % 4);
  for (int i = 0; i < num_segments; ++i) {
    auto traj = sample_trajectory(mdp, behavior, rng, 1 + static_cast<int>(rng() % 8));
    if (traj.size() == 0) continue;
    if (config.transition_model == TransitionModel::Kind::Empirical)
      for (std::size_t t = 0; t < traj.size(); ++t)
        c.agent.model.observe(traj.steps[t].state, traj.steps[t].action, traj.state_at(t + 1));
    c.segments.push_back(std::move(traj));
  }
  return c;
}

/// max |analytic - numeric| / max(max |analytic|, 1e-8) over every
/// parameter table, using central differences with step h.
/// `logits_only` restricts the check to the policy logits (the actor treats
/// the advantage as a constant).
template <class LossFn>
double gradient_relative_error(GradCase& c, LossFn&& loss_fn, bool logits_only, double h = 1e-6) {
  const auto batch = c.batch();
  const auto analytic = loss_fn(batch, c.agent, c.config).grad;
  double worst = 0.0, scale = 0.0;
  auto check = [&](std::vector<double>& table, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < table.size(); ++i) {
      const double keep = table[i];
      table[i] = keep + h;
      const double up = loss_fn(batch, c.agent, c.config).loss;
      table[i] = keep - h;
      const double down = loss_fn(batch, c.agent, c.config).loss;
      table[i] = keep;
      worst = std::max(worst, std::abs((up - down) / (2.0 * h) - grad[i]));
      scale = std::max(scale, std::abs(grad[i]));
    }
  };
  check(c.agent.params.logits, analytic.logits);
  if (logits_only) return worst / std::max(scale, 1e-8);
  check(c.agent.params.value, analytic.value);
  check(c.agent.params.adv, analytic.adv);
  check(c.agent.params.nature, analytic.nature);
  return worst / std::max(scale, 1e-8);
}

inline double critic_gradient_error(GradCase& c) {
  return gradient_relative_error(c, [](auto b, const AgentState& a, const TrainConfig& cfg) {
    return critic_loss(b, a, cfg);
  }, false);
}

inline double actor_gradient_error(GradCase& c) {
  return gradient_relative_error(c, [](auto b, const AgentState& a, const TrainConfig& cfg) {
    return actor_loss(b, a, cfg);
  }, true);
}

}  // namespace offdae::gradcheck

#endif  // OFFDAE_TESTS_GRADCHECK_HPP
