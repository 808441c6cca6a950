#ifndef OFFDAE_ACTOR_CRITIC_HPP
#define OFFDAE_ACTOR_CRITIC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "offdae/errors.hpp"
#include "offdae/estimators.hpp"
#include "offdae/mdp.hpp"
#include "offdae/rng.hpp"
#include "offdae/targets.hpp"
#include "offdae/windows.hpp"

namespace offdae {

struct TrainConfig {
  CriticMethod method = CriticMethod::OffpolicyDae;
  int n = 8;                        // segment length in steps
  double gamma = 0.99;
  double learning_rate = 0.05;      // annealed linearly to 0
  double tau = 0.99;                // EMA coefficient
  double beta_kl = 3.0;
  int batch_size = 64;              // steps per batch
  int steps_per_update = 4;         // env steps between updates
  int buffer_capacity = 10000;      // steps
  int initial_steps = 500;          // env steps before the first update
  int total_steps = 50000;
  int num_actors = 8;
  int max_episode_steps = 100;
  int eval_interval = 1000;
  int eval_episodes = 100;
  bool learn_policy = true;         // false freezes the actor at its initial policy
  TransitionModel::Kind transition_model = TransitionModel::Kind::Oracle;
  std::uint64_t seed = 0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0)) throw ConfigError(std::string("train config: ") + name + " must be positive");
    };
    positive(n, "n");
    positive(learning_rate, "learning_rate");
    positive(batch_size, "batch_size");
    positive(steps_per_update, "steps_per_update");
    positive(buffer_capacity, "buffer_capacity");
    positive(total_steps, "total_steps");
    positive(num_actors, "num_actors");
    positive(max_episode_steps, "max_episode_steps");
    positive(eval_interval, "eval_interval");
    positive(eval_episodes, "eval_episodes");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("train config: gamma must lie in [0, 1]");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("train config: tau must lie in [0, 1]");
    if (!(beta_kl >= 0.0)) throw ConfigError("train config: beta_kl must be >= 0");
    if (initial_steps < 0) throw ConfigError("train config: initial_steps must be >= 0");
  }
};

/// FIFO store of trajectory segments with a capacity counted in steps.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_steps) : capacity_(capacity_steps) {}

  void push(Trajectory segment) {
    if (segment.size() == 0) return;
    if (segment.size() > capacity_) throw ConfigError("replay buffer: segment longer than capacity");
    steps_ += segment.size();
    segments_.push_back(std::move(segment));
    while (steps_ > capacity_) {
      steps_ -= segments_.front().size();
      segments_.pop_front();
    }
  }

  std::size_t num_steps() const { return steps_; }
  std::size_t size() const { return segments_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return segments_.empty(); }
  const Trajectory& operator[](std::size_t i) const { return segments_[i]; }

  /// Segments drawn uniformly with replacement until `min_steps` steps are in hand.
  std::vector<const Trajectory*> sample(std::size_t min_steps, Rng& rng) const {
    std::vector<const Trajectory*> out;
    if (segments_.empty()) return out;
    std::size_t got = 0;
    std::uniform_int_distribution<std::size_t> pick(0, segments_.size() - 1);
    while (got < min_steps) {
      const Trajectory* seg = &segments_[pick(rng)];
      out.push_back(seg);
      got += seg->size();
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t steps_ = 0;
  std::deque<Trajectory> segments_;
};

/// Raw learnable tables.  Effective advantages and nature advantages are
/// centred at use time; see AgentState::advantage and AgentState::nature.
struct CriticParams {
  std::vector<double> logits;  // S x A
  std::vector<double> value;   // S
  std::vector<double> adv;     // S x A, raw
  std::vector<double> nature;  // S x A x S, raw

  CriticParams() = default;
  CriticParams(int S, int A)
      : logits(static_cast<std::size_t>(S * A), 0.0),
        value(static_cast<std::size_t>(S), 0.0),
        adv(static_cast<std::size_t>(S * A), 0.0),
        nature(static_cast<std::size_t>(S * A * S), 0.0) {}

  void set_zero() {
    std::fill(logits.begin(), logits.end(), 0.0);
    std::fill(value.begin(), value.end(), 0.0);
    std::fill(adv.begin(), adv.end(), 0.0);
    std::fill(nature.begin(), nature.end(), 0.0);
  }

  template <class F>
  void for_each_table(CriticParams& other, F&& f) {
    f(logits, other.logits);
    f(value, other.value);
    f(adv, other.adv);
    f(nature, other.nature);
  }
};

inline std::vector<double> softmax_rows(const std::vector<double>& logits, int S, int A,
                                        const std::vector<bool>* available = nullptr) {
  std::vector<double> p(logits.size(), 0.0);
  for (int s = 0; s < S; ++s) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < A; ++a)
      if (!available || (*available)[static_cast<std::size_t>(s * A + a)])
        mx = std::max(mx, logits[static_cast<std::size_t>(s * A + a)]);
    double z = 0.0;
    for (int a = 0; a < A; ++a) {
      const auto k = static_cast<std::size_t>(s * A + a);
      if (available && !(*available)[k]) continue;
      p[k] = std::exp(logits[k] - mx);
      z += p[k];
    }
    for (int a = 0; a < A; ++a) p[static_cast<std::size_t>(s * A + a)] /= z;
  }
  return p;
}

struct AgentState {
  int num_states = 0;
  int num_actions = 0;
  CriticParams params;
  CriticParams ema;
  std::vector<bool> available;  // S x A action mask; terminal rows keep action 0
  TransitionModel model{TransitionModel::Kind::Empirical, 1, 1};
  ReplayBuffer buffer{1};
  std::int64_t env_steps = 0;
  std::int64_t updates = 0;

  AgentState() = default;
  AgentState(const FiniteMdp& mdp, const TrainConfig& config)
      : num_states(mdp.num_states()),
        num_actions(mdp.num_actions()),
        params(mdp.num_states(), mdp.num_actions()),
        ema(mdp.num_states(), mdp.num_actions()),
        available(mdp.availability()),
        model(config.transition_model == TransitionModel::Kind::Oracle
                  ? TransitionModel::oracle(mdp)
                  : TransitionModel(TransitionModel::Kind::Empirical, mdp.num_states(), mdp.num_actions())),
        buffer(static_cast<std::size_t>(config.buffer_capacity)) {}

  std::vector<double> policy() const { return softmax_rows(params.logits, num_states, num_actions, &available); }
  std::vector<double> target_policy() const { return softmax_rows(ema.logits, num_states, num_actions, &available); }

  /// adv(s, a) - sum_b pi(b|s) adv(s, b) for the given raw table and policy.
  std::vector<double> advantage(const std::vector<double>& raw, const std::vector<double>& pi) const {
    std::vector<double> out(raw.size(), 0.0);
    for (int s = 0; s < num_states; ++s) {
      double mean = 0.0;
      for (int a = 0; a < num_actions; ++a) mean += pi[idx(s, a)] * raw[idx(s, a)];
      for (int a = 0; a < num_actions; ++a)
        if (available[idx(s, a)]) out[idx(s, a)] = raw[idx(s, a)] - mean;
    }
    return out;
  }

  /// raw(s, a, s2) - sum_s' p_hat(s'|s,a) raw(s, a, s') at one entry.
  double nature(const std::vector<double>& raw, int s, int a, int s2) const {
    double mean = 0.0;
    for (const auto& [t, q] : model.row(s, a)) mean += q * raw[idx3(s, a, t)];
    return raw[idx3(s, a, s2)] - mean;
  }

  /// Effective (V, A, B) of the current parameters, centred under the EMA
  /// policy and the transition model.
  DecompositionTables tables() const {
    DecompositionTables t(num_states, num_actions);
    t.V = params.value;
    t.A = advantage(params.adv, target_policy());
    for (int s = 0; s < num_states; ++s)
      for (int a = 0; a < num_actions; ++a) {
        std::vector<NatureTable::Entry> row;
        for (const auto& [s2, q] : model.row(s, a)) row.emplace_back(s2, nature(params.nature, s, a, s2));
        if (!row.empty()) t.B.set_row(s, a, std::move(row));
        t.a_known[idx(s, a)] = true;
      }
    t.v_known.assign(t.V.size(), true);
    return t;
  }

  std::size_t idx(int s, int a) const { return static_cast<std::size_t>(s * num_actions + a); }
  std::size_t idx3(int s, int a, int s2) const {
    return static_cast<std::size_t>((s * num_actions + a) * num_states + s2);
  }
};

/// Every suffix of every segment is one critic window.
inline std::vector<Window> suffix_windows(std::span<const Trajectory* const> batch) {
  std::vector<Window> out;
  for (const Trajectory* seg : batch) {
    for (std::size_t t = 0; t < seg->size(); ++t) {
      out.push_back({std::span<const Step>(seg->steps).subspan(t), seg->final_state, !seg->truncated, 1.0});
    }
  }
  return out;
}

struct LossResult {
  double loss = 0.0;
  CriticParams grad;
};

/// Mean squared critic error over all suffix windows of the batch, with its
/// exact gradient.  Bootstraps come from the EMA tables; centring uses the
/// EMA policy and the agent's transition model.
///   dae family:   V(s_0) + sum_t g^t A_t [+ sum_t g^(t+1) B_t]  vs  sum_t g^t r_t + g^L V_ema(s_L)
///   uncorrected:  V(s_0) + A(s_0, a_0)                           vs  the same n-step return
///   tree:         V(s_0) + A(s_0, a_0)                           vs  tree backup with Q_ema = V_ema + A_ema
inline LossResult critic_loss(std::span<const Trajectory* const> batch, const AgentState& agent,
                              const TrainConfig& config) {
  const int S = agent.num_states, A = agent.num_actions;
  const double g = config.gamma;
  LossResult out;
  out.grad = CriticParams(S, A);
  const auto windows = suffix_windows(batch);
  if (windows.empty()) return out;
  const auto pi_ema = agent.target_policy();
  const auto adv = agent.advantage(agent.params.adv, pi_ema);
  std::vector<double> q_target;
  if (config.method == CriticMethod::Tree) {
    const auto adv_ema = agent.advantage(agent.ema.adv, pi_ema);
    q_target.resize(static_cast<std::size_t>(S * A));
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        q_target[agent.idx(s, a)] = agent.ema.value[static_cast<std::size_t>(s)] + adv_ema[agent.idx(s, a)];
  }
  const PolicyTable target_table(S, A, pi_ema);
  const double scale = 1.0 / static_cast<double>(windows.size());

  // d pred / d raw adv(s, b) for a unit coefficient on A(s, a): delta_ab - pi(b|s).
  auto add_adv_grad = [&](int s, int a, double coef) {
    for (int b = 0; b < A; ++b) out.grad.adv[agent.idx(s, b)] -= coef * pi_ema[agent.idx(s, b)];
    out.grad.adv[agent.idx(s, a)] += coef;
  };
  auto add_nature_grad = [&](int s, int a, int s2, double coef) {
    for (const auto& [t, q] : agent.model.row(s, a)) out.grad.nature[agent.idx3(s, a, t)] -= coef * q;
    out.grad.nature[agent.idx3(s, a, s2)] += coef;
  };

  for (const auto& w : windows) {
    const int s0 = w.state_at(0), a0 = w.steps[0].action;
    double pred = agent.params.value[static_cast<std::size_t>(s0)];
    double y = 0.0;
    const bool family = config.method == CriticMethod::Dae || config.method == CriticMethod::OffpolicyDae;
    if (config.method == CriticMethod::Tree) {
      y = tree_backup_target(w, q_target, target_table, g);
      pred += adv[agent.idx(s0, a0)];
    } else {
      y = uncorrected_target(w, agent.ema.value, g);
      if (family) {
        double disc = 1.0;
        for (std::size_t t = 0; t < w.size(); ++t) {
          const auto& st = w.steps[t];
          pred += disc * adv[agent.idx(st.state, st.action)];
          if (config.method == CriticMethod::OffpolicyDae)
            pred += disc * g * agent.nature(agent.params.nature, st.state, st.action, w.state_at(t + 1));
          disc *= g;
        }
      } else {
        pred += adv[agent.idx(s0, a0)];
      }
    }
    const double err = pred - y;
    out.loss += scale * err * err;
    const double c = 2.0 * scale * err;
    out.grad.value[static_cast<std::size_t>(s0)] += c;
    if (family) {
      double disc = 1.0;
      for (std::size_t t = 0; t < w.size(); ++t) {
        const auto& st = w.steps[t];
        add_adv_grad(st.state, st.action, c * disc);
        if (config.method == CriticMethod::OffpolicyDae) add_nature_grad(st.state, st.action, w.state_at(t + 1), c * disc * g);
        disc *= g;
      }
    } else {
      add_adv_grad(s0, a0, c);
    }
  }
  return out;
}

/// Actor objective averaged over the batch steps:
///   -sum_a pi(a|s) A(s, a) / sqrt(Var_batch[A] + 1e-8) + beta KL(pi(.|s) || pi_ema(.|s)).
/// A is the centred advantage of the current critic and carries no gradient;
/// Var_batch is the variance of A(s_t, a_t) over the batch steps.
inline LossResult actor_loss(std::span<const Trajectory* const> batch, const AgentState& agent,
                             const TrainConfig& config) {
  const int S = agent.num_states, A = agent.num_actions;
  LossResult out;
  out.grad = CriticParams(S, A);
  const auto pi = agent.policy();
  const auto pi_ema = agent.target_policy();
  const auto adv = agent.advantage(agent.params.adv, pi_ema);
  std::size_t count = 0;
  double mean = 0.0, sq = 0.0;
  for (const Trajectory* seg : batch)
    for (const auto& st : seg->steps) {
      const double x = adv[agent.idx(st.state, st.action)];
      mean += x;
      sq += x * x;
      ++count;
    }
  if (count == 0) return out;
  mean /= static_cast<double>(count);
  const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
  const double norm = 1.0 / std::sqrt(var + 1e-8);
  const double scale = 1.0 / static_cast<double>(count);
  for (const Trajectory* seg : batch) {
    for (const auto& st : seg->steps) {
      const int s = st.state;
      double expected = 0.0, kl = 0.0;
      for (int a = 0; a < A; ++a) {
        const auto k = agent.idx(s, a);
        if (!agent.available[k]) continue;
        expected += pi[k] * adv[k];
        kl += pi[k] * (std::log(pi[k]) - std::log(pi_ema[k]));
      }
      out.loss += scale * (-norm * expected + config.beta_kl * kl);
      for (int a = 0; a < A; ++a) {
        const auto k = agent.idx(s, a);
        if (!agent.available[k]) continue;
        const double d_expected = pi[k] * (adv[k] - expected);
        const double d_kl = pi[k] * (std::log(pi[k]) - std::log(pi_ema[k]) - kl);
        out.grad.logits[k] += scale * (-norm * d_expected + config.beta_kl * d_kl);
      }
    }
  }
  return out;
}

/// theta_ema <- tau theta_ema + (1 - tau) theta on every table.
inline void ema_update(AgentState& agent, double tau) {
  agent.ema.for_each_table(agent.params, [tau](std::vector<double>& e, const std::vector<double>& p) {
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = tau * e[i] + (1.0 - tau) * p[i];
  });
}

struct CurvePoint {
  std::int64_t step = 0;
  double mean_return = 0.0;
  double stderr_return = 0.0;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
};

/// Greedy action (lowest index among ties) of the logits at state s.
inline int greedy_action(const AgentState& agent, int s) {
  int best = -1;
  for (int a = 0; a < agent.num_actions; ++a) {
    if (!agent.available[agent.idx(s, a)]) continue;
    if (best < 0 || agent.params.logits[agent.idx(s, a)] > agent.params.logits[agent.idx(s, best)]) best = a;
  }
  return best;
}

/// Undiscounted returns of greedy episodes, each capped at max_len steps.
inline CurvePoint evaluate_greedy(const FiniteMdp& mdp, const AgentState& agent, int episodes, int max_len,
                                  std::uint64_t seed) {
  Rng rng = make_rng(seed);
  double sum = 0.0, sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    int s = sample_index(mdp.initial_dist(), rng);
    double ret = 0.0;
    for (int t = 0; t < max_len && !mdp.terminal(s); ++t) {
      const int a = greedy_action(agent, s);
      ret += mdp.reward(s, a);
      s = sample_index(mdp.successors(s, a), rng);
    }
    sum += ret;
    sq += ret * ret;
  }
  CurvePoint p;
  p.mean_return = sum / episodes;
  const double var = episodes > 1 ? std::max(0.0, (sq - episodes * p.mean_return * p.mean_return) / (episodes - 1)) : 0.0;
  p.stderr_return = std::sqrt(var / episodes);
  return p;
}

struct TrainResult {
  AgentState agent;
  LearningCurve curve;
};

namespace detail {

struct Actor {
  Rng rng;
  int state = 0;
  int episode_steps = 0;
  Trajectory segment;
};

inline double divergence_bound(const FiniteMdp& mdp, const TrainConfig& config) {
  const double r = std::max(mdp.max_abs_reward(), 1e-12);
  if (config.gamma < 1.0) return 10.0 * r / (1.0 - config.gamma);
  return 10.0 * r * config.max_episode_steps;
}

}  // namespace detail

/// Off-policy actor-critic on a tabular MDP.  Actors step round-robin with
/// the current policy and store n-step segments in the replay buffer; every
/// `steps_per_update` env steps one gradient step is taken on the critic and
/// actor losses, followed by the EMA update.  The greedy policy is evaluated
/// every `eval_interval` env steps.
inline TrainResult train(const FiniteMdp& mdp, const TrainConfig& config) {
  config.validate();
  TrainResult res{AgentState(mdp, config), {}};
  AgentState& agent = res.agent;
  const int S = mdp.num_states();
  const double bound = detail::divergence_bound(mdp, config);
  const std::int64_t total_updates =
      std::max<std::int64_t>(1, (config.total_steps - config.initial_steps) / config.steps_per_update);

  std::vector<detail::Actor> actors;
  for (int i = 0; i < config.num_actors; ++i) {
    detail::Actor actor{make_rng(derive_seed(config.seed, {1, static_cast<std::uint64_t>(i)})), 0, 0, {}};
    actor.state = sample_index(mdp.initial_dist(), actor.rng);
    actors.push_back(std::move(actor));
  }
  Rng batch_rng = make_rng(derive_seed(config.seed, {2}));
  std::vector<double> pi = agent.policy();

  auto close_segment = [&](detail::Actor& actor, bool terminal) {
    actor.segment.final_state = actor.state;
    actor.segment.truncated = !terminal;
    agent.buffer.push(std::move(actor.segment));
    actor.segment = Trajectory{};
  };

  for (std::int64_t step = 0; step < config.total_steps; ++step) {
    detail::Actor& actor = actors[static_cast<std::size_t>(step % config.num_actors)];
    const int s = actor.state;
    const int a = sample_index(std::span<const double>(pi).subspan(agent.idx(s, 0), static_cast<std::size_t>(agent.num_actions)),
                               actor.rng);
    const int s2 = sample_index(mdp.successors(s, a), actor.rng);
    actor.segment.steps.push_back({s, a, mdp.reward(s, a)});
    if (agent.model.kind() == TransitionModel::Kind::Empirical) agent.model.observe(s, a, s2);
    actor.state = s2;
    ++actor.episode_steps;
    ++agent.env_steps;
    const bool terminal = mdp.terminal(s2);
    const bool timeout = actor.episode_steps >= config.max_episode_steps;
    if (terminal || timeout || static_cast<int>(actor.segment.size()) >= config.n) close_segment(actor, terminal);
    if (terminal || timeout) {
      actor.state = sample_index(mdp.initial_dist(), actor.rng);
      actor.episode_steps = 0;
    }

    if (agent.env_steps >= config.initial_steps && agent.env_steps % config.steps_per_update == 0 &&
        !agent.buffer.empty()) {
      const auto batch = agent.buffer.sample(static_cast<std::size_t>(config.batch_size), batch_rng);
      const double frac = std::min(1.0, static_cast<double>(agent.updates) / static_cast<double>(total_updates));
      const double lr = config.learning_rate * (1.0 - frac);
      const auto critic = critic_loss(batch, agent, config);
      LossResult actor_grad;
      if (config.learn_policy) actor_grad = actor_loss(batch, agent, config);
      auto descend = [lr](std::vector<double>& p, const std::vector<double>& g) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
      };
      descend(agent.params.value, critic.grad.value);
      descend(agent.params.adv, critic.grad.adv);
      descend(agent.params.nature, critic.grad.nature);
      if (config.learn_policy) descend(agent.params.logits, actor_grad.grad.logits);
      ema_update(agent, config.tau);
      ++agent.updates;
      pi = agent.policy();
      for (int st = 0; st < S; ++st) {
        const double v = agent.params.value[static_cast<std::size_t>(st)];
        if (!std::isfinite(v) || std::abs(v) > bound) {
          throw DivergenceError("train: value table diverged (|V(" + std::to_string(st) + ")| = " +
                                std::to_string(std::abs(v)) + " > " + std::to_string(bound) + ") at env step " +
                                std::to_string(agent.env_steps) + ", method " + method_name(config.method) +
                                ", seed " + std::to_string(config.seed));
        }
      }
    }

    if (agent.env_steps % config.eval_interval == 0) {
      auto point = evaluate_greedy(mdp, agent, config.eval_episodes, config.max_episode_steps,
                                   derive_seed(config.seed, {3, static_cast<std::uint64_t>(agent.env_steps)}));
      point.step = agent.env_steps;
      res.curve.points.push_back(point);
    }
  }
  return res;
}

}  // namespace offdae

#endif  // OFFDAE_ACTOR_CRITIC_HPP
