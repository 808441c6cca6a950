#ifndef OFFDAE_ENVIRONMENTS_HPP
#define OFFDAE_ENVIRONMENTS_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "offdae/mdp.hpp"
#include "offdae/rng.hpp"

// Built-in MDPs.  Toy MDPs use discount 1 and 0-based state ids; the last
// state is the terminal one.

namespace offdae::envs {

namespace detail {

struct Builder {
  int S, A;
  std::vector<double> transition, reward, initial;
  std::vector<bool> terminal, available;

  Builder(int num_states, int num_actions)
      : S(num_states),
        A(num_actions),
        transition(static_cast<std::size_t>(S * A * S), 0.0),
        reward(static_cast<std::size_t>(S * A), 0.0),
        initial(static_cast<std::size_t>(S), 0.0),
        terminal(static_cast<std::size_t>(S), false),
        available(static_cast<std::size_t>(S * A), false) {}

  void edge(int s, int a, int s2, double prob, double r = 0.0) {
    available[static_cast<std::size_t>(s * A + a)] = true;
    transition[static_cast<std::size_t>((s * A + a) * S + s2)] += prob;
    reward[static_cast<std::size_t>(s * A + a)] = r;
  }
  void make_terminal(int s) {
    terminal[static_cast<std::size_t>(s)] = true;
    edge(s, 0, s, 1.0);
  }
  FiniteMdp build(double gamma) const {
    return FiniteMdp(S, A, transition, reward, gamma, initial, terminal, available);
  }
};

}  // namespace detail

inline constexpr int kUp = 0;    // also the only action of single-action states
inline constexpr int kDown = 1;

/// Two start states (0.9 / 0.1) feed a shared state 2 whose two actions end
/// the episode with reward 1 (action 0) or 0 (action 1).  State 3 is terminal.
inline FiniteMdp fig3() {
  detail::Builder b(4, 2);
  b.edge(0, 0, 2, 1.0);
  b.edge(1, 0, 2, 1.0);
  b.edge(2, kUp, 3, 1.0, 1.0);
  b.edge(2, kDown, 3, 1.0, 0.0);
  b.make_terminal(3);
  b.initial = {0.9, 0.1, 0.0, 0.0};
  return b.build(1.0);
}

/// fig3 with a coin flip appended: state 3 moves to 4 (reward 1 next) or 5
/// (reward 0 next) with probability `p_high`; state 6 is terminal.
inline FiniteMdp fig4(double p_high = 0.5) {
  detail::Builder b(7, 2);
  b.edge(0, 0, 2, 1.0);
  b.edge(1, 0, 2, 1.0);
  b.edge(2, kUp, 3, 1.0, 1.0);
  b.edge(2, kDown, 3, 1.0, 0.0);
  if (p_high > 0.0) b.edge(3, 0, 4, p_high);
  if (p_high < 1.0) b.edge(3, 0, 5, 1.0 - p_high);
  b.edge(4, 0, 6, 1.0, 1.0);
  b.edge(5, 0, 6, 1.0, 0.0);
  b.make_terminal(6);
  b.initial = {0.9, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0};
  return b.build(1.0);
}

/// Bias counterexample: state 0 reaches state 1 or ends (probability 1/2
/// each); state 1 chooses between reward 1 (action 0) and reward 0 (action 1).
inline FiniteMdp counterexample() {
  detail::Builder b(3, 2);
  b.edge(0, 0, 1, 0.5);
  b.edge(0, 0, 2, 0.5);
  b.edge(1, kUp, 2, 1.0, 1.0);
  b.edge(1, kDown, 2, 1.0, 0.0);
  b.make_terminal(2);
  b.initial = {1.0, 0.0, 0.0};
  return b.build(1.0);
}

/// Policy on the counterexample MDP with P(action 0 | state 1) = prob_up.
inline PolicyTable counterexample_policy(double prob_up) {
  return PolicyTable(3, 2, {1.0, 0.0, prob_up, 1.0 - prob_up, 1.0, 0.0});
}

/// Corridor of `length` non-terminal states; action 1 moves right, action 0
/// moves left (bounded).  Stepping right out of the last state ends the
/// episode with reward 1.
inline FiniteMdp chain(int length = 4, double gamma = 0.9) {
  detail::Builder b(length + 1, 2);
  for (int s = 0; s < length; ++s) {
    b.edge(s, 0, s > 0 ? s - 1 : 0, 1.0, 0.0);
    b.edge(s, 1, s + 1, 1.0, s + 1 == length ? 1.0 : 0.0);
  }
  b.make_terminal(length);
  b.initial[0] = 1.0;
  return b.build(gamma);
}

inline constexpr double kGridStepReward = -0.01;
inline constexpr double kGridGoalReward = 1.0;
inline constexpr double kGridCliffReward = -1.0;

/// Cliff gridworld.  Cells are numbered y * width + x with y = 0 the top row.
/// The agent starts in the bottom-left corner and the goal is the
/// bottom-right corner; the bottom-row cells between them are a cliff.  Goal
/// and cliff cells are terminal.  Actions: 0 up, 1 right, 2 down, 3 left.
/// With probability `slip_prob` the move direction is replaced by a uniformly
/// random one; moves into the wall leave the agent in place.  Rewards are
/// expectations over the successor: every step costs 0.01, entering the goal
/// pays 1 and entering the cliff costs 1.
inline FiniteMdp gridworld(int width, int height, double slip_prob, double gamma = 0.99) {
  if (width < 2 || height < 2) throw ConfigError("gridworld: width and height must be >= 2");
  if (!(slip_prob >= 0.0 && slip_prob <= 1.0)) throw ConfigError("gridworld: slip_prob must lie in [0, 1]");
  const int S = width * height;
  detail::Builder b(S, 4);
  auto cell = [&](int x, int y) { return y * width + x; };
  const int start = cell(0, height - 1);
  const int goal = cell(width - 1, height - 1);
  auto is_cliff = [&](int x, int y) { return y == height - 1 && x > 0 && x < width - 1; };
  const int dx[4] = {0, 1, 0, -1};
  const int dy[4] = {-1, 0, 1, 0};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int s = cell(x, y);
      if (s == goal || is_cliff(x, y)) {
        b.make_terminal(s);
        continue;
      }
      for (int a = 0; a < 4; ++a) {
        double expected_reward = 0.0;
        for (int d = 0; d < 4; ++d) {
          const double prob = (d == a ? 1.0 - slip_prob : 0.0) + slip_prob / 4.0;
          if (prob == 0.0) continue;
          int nx = x + dx[d], ny = y + dy[d];
          if (nx < 0 || nx >= width || ny < 0 || ny >= height) nx = x, ny = y;
          const int s2 = cell(nx, ny);
          double r = kGridStepReward;
          if (s2 == goal) r += kGridGoalReward;
          if (is_cliff(nx, ny)) r += kGridCliffReward;
          expected_reward += prob * r;
          b.edge(s, a, s2, prob);
        }
        b.reward[static_cast<std::size_t>(s * 4 + a)] = expected_reward;
      }
    }
  }
  b.initial[static_cast<std::size_t>(start)] = 1.0;
  return b.build(gamma);
}

/// Random episodic MDP: states 0..S-2 are non-terminal, state S-1 is the
/// absorbing terminal.  Each row mixes a Dirichlet(1) draw over all states
/// with a 0.1 floor on the terminal, so termination happens with probability
/// at least 0.1 per step.  Rewards are uniform in [-1, 1]; the initial
/// distribution is uniform over non-terminal states.
inline FiniteMdp random(std::uint64_t seed, int num_states, int num_actions, double gamma = 1.0) {
  if (num_states < 2 || num_actions < 1) throw ConfigError("random mdp: need >= 2 states and >= 1 action");
  Rng rng = make_rng(seed);
  const int S = num_states, A = num_actions, T = S - 1;
  detail::Builder b(S, A);
  for (int s = 0; s < T; ++s) {
    for (int a = 0; a < A; ++a) {
      std::vector<double> w(static_cast<std::size_t>(S));
      double total = 0.0;
      for (auto& x : w) {
        x = -std::log(1.0 - uniform01(rng));  // Exp(1) -> Dirichlet(1) after normalising
        total += x;
      }
      for (int s2 = 0; s2 < S; ++s2) {
        const double q = 0.9 * w[static_cast<std::size_t>(s2)] / total + (s2 == T ? 0.1 : 0.0);
        b.edge(s, a, s2, q);
      }
      b.reward[static_cast<std::size_t>(s * A + a)] = 2.0 * uniform01(rng) - 1.0;
    }
    b.initial[static_cast<std::size_t>(s)] = 1.0 / T;
  }
  b.make_terminal(T);
  // Renormalise rows so they sum to 1 to the last bit.
  for (int s = 0; s < T; ++s) {
    for (int a = 0; a < A; ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < S; ++s2) sum += b.transition[static_cast<std::size_t>((s * A + a) * S + s2)];
      for (int s2 = 0; s2 < S; ++s2) b.transition[static_cast<std::size_t>((s * A + a) * S + s2)] /= sum;
    }
  }
  return b.build(gamma);
}

/// Random full-support policy (rows ~ Dirichlet(1) over available actions).
inline PolicyTable random_policy(const FiniteMdp& mdp, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<double> probs(static_cast<std::size_t>(S * A), 0.0);
  for (int s = 0; s < S; ++s) {
    double total = 0.0;
    for (int a = 0; a < A; ++a) {
      if (!mdp.available(s, a)) continue;
      const double x = -std::log(1.0 - uniform01(rng)) + 1e-3;
      probs[static_cast<std::size_t>(s * A + a)] = x;
      total += x;
    }
    for (int a = 0; a < A; ++a) probs[static_cast<std::size_t>(s * A + a)] /= total;
  }
  return {S, A, std::move(probs)};
}

}  // namespace offdae::envs

#endif  // OFFDAE_ENVIRONMENTS_HPP
