#ifndef OFFDAE_MDP_HPP
#define OFFDAE_MDP_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "offdae/errors.hpp"
#include "offdae/rng.hpp"

namespace offdae {

inline constexpr double kProbabilityTolerance = 1e-12;

/// Finite discounted MDP with absorbing terminal states.
///
/// Tensors are stored row-major: transition index (s * A + a) * S + s2,
/// reward index s * A + a.  Not every action has to exist in every state; the
/// availability mask marks which (s, a) pairs are real.  Unavailable pairs
/// carry no transition mass and policies must not select them.
///
/// Terminal states self-loop with probability one and zero reward on every
/// available action.  With discount 1 the constructor additionally checks that
/// no policy can avoid termination forever.
class FiniteMdp {
 public:
  FiniteMdp(int num_states, int num_actions, std::vector<double> transition, std::vector<double> reward,
            double discount, std::vector<double> initial_dist, std::vector<bool> terminal,
            std::vector<bool> available = {})
      : num_states_(num_states),
        num_actions_(num_actions),
        transition_(std::move(transition)),
        reward_(std::move(reward)),
        discount_(discount),
        initial_(std::move(initial_dist)),
        terminal_(std::move(terminal)),
        available_(std::move(available)) {
    if (num_states_ <= 0 || num_actions_ <= 0) throw ConfigError("mdp: dimensions must be positive");
    const auto S = static_cast<std::size_t>(num_states_);
    const auto A = static_cast<std::size_t>(num_actions_);
    if (available_.empty()) available_.assign(S * A, true);
    if (transition_.size() != S * A * S) throw ConfigError("mdp: transition tensor has wrong size");
    if (reward_.size() != S * A) throw ConfigError("mdp: reward table has wrong size");
    if (initial_.size() != S) throw ConfigError("mdp: initial distribution has wrong size");
    if (terminal_.size() != S) throw ConfigError("mdp: terminal flags have wrong size");
    if (available_.size() != S * A) throw ConfigError("mdp: availability mask has wrong size");
    if (!(discount_ >= 0.0 && discount_ <= 1.0)) throw ConfigError("mdp: discount must lie in [0, 1]");
    validate();
    if (discount_ == 1.0 && !episodic()) {
      throw ConfigError("mdp: discount 1 requires every policy to terminate with probability 1");
    }
  }

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double discount() const { return discount_; }

  double p(int s, int a, int s2) const { return transition_[idx3(s, a, s2)]; }
  double reward(int s, int a) const { return reward_[idx2(s, a)]; }
  bool terminal(int s) const { return terminal_[static_cast<std::size_t>(s)]; }
  bool available(int s, int a) const { return available_[idx2(s, a)]; }
  double initial(int s) const { return initial_[static_cast<std::size_t>(s)]; }

  std::span<const double> successors(int s, int a) const {
    return {transition_.data() + idx3(s, a, 0), static_cast<std::size_t>(num_states_)};
  }
  const std::vector<double>& initial_dist() const { return initial_; }
  const std::vector<double>& transition_tensor() const { return transition_; }
  const std::vector<double>& reward_table() const { return reward_; }
  const std::vector<bool>& terminal_flags() const { return terminal_; }
  const std::vector<bool>& availability() const { return available_; }

  int num_available(int s) const {
    int k = 0;
    for (int a = 0; a < num_actions_; ++a) k += available(s, a) ? 1 : 0;
    return k;
  }

  /// True when every available non-terminal (s, a) row is one-hot.
  bool deterministic() const {
    for (int s = 0; s < num_states_; ++s) {
      if (terminal(s)) continue;
      for (int a = 0; a < num_actions_; ++a) {
        if (!available(s, a)) continue;
        int support = 0;
        for (double q : successors(s, a)) support += q > 0.0 ? 1 : 0;
        if (support != 1) return false;
      }
    }
    return true;
  }

  double max_abs_reward() const {
    double m = 0.0;
    for (double r : reward_) m = std::max(m, std::abs(r));
    return m;
  }

  /// Longest possible episode (in steps) when the transition graph restricted
  /// to non-terminal states is acyclic; nullopt otherwise.
  std::optional<int> horizon() const {
    const int S = num_states_;
    std::vector<int> depth(static_cast<std::size_t>(S), -1);  // -1 unvisited, -2 on stack
    bool cyclic = false;
    auto visit = [&](auto&& self, int s) -> int {
      if (terminal(s)) return 0;
      auto& d = depth[static_cast<std::size_t>(s)];
      if (d == -2) {
        cyclic = true;
        return 0;
      }
      if (d >= 0) return d;
      d = -2;
      int best = 0;
      for (int a = 0; a < num_actions_; ++a) {
        if (!available(s, a)) continue;
        for (int s2 = 0; s2 < S; ++s2) {
          if (p(s, a, s2) > 0.0) best = std::max(best, self(self, s2));
          if (cyclic) return 0;
        }
      }
      d = best + 1;
      return d;
    };
    int h = 0;
    for (int s = 0; s < S && !cyclic; ++s) h = std::max(h, visit(visit, s));
    if (cyclic) return std::nullopt;
    return h;
  }

  FiniteMdp with_discount(double gamma) const {
    return FiniteMdp(num_states_, num_actions_, transition_, reward_, gamma, initial_, terminal_, available_);
  }

 private:
  std::size_t idx2(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(a);
  }
  std::size_t idx3(int s, int a, int s2) const {
    return idx2(s, a) * static_cast<std::size_t>(num_states_) + static_cast<std::size_t>(s2);
  }

  void validate() const {
    double init_sum = 0.0;
    for (int s = 0; s < num_states_; ++s) {
      const double q = initial(s);
      if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("mdp: initial probabilities must lie in [0, 1]");
      if (terminal(s) && q != 0.0) throw ConfigError("mdp: initial distribution puts mass on a terminal state");
      init_sum += q;
      if (num_available(s) == 0) throw ConfigError("mdp: state " + std::to_string(s) + " has no actions");
      for (int a = 0; a < num_actions_; ++a) {
        if (!available(s, a)) continue;
        double row = 0.0;
        for (int s2 = 0; s2 < num_states_; ++s2) {
          const double t = p(s, a, s2);
          if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("mdp: transition probabilities must lie in [0, 1]");
          row += t;
        }
        if (std::abs(row - 1.0) > kProbabilityTolerance) {
          throw ConfigError("mdp: transition row (" + std::to_string(s) + "," + std::to_string(a) +
                            ") does not sum to 1");
        }
        if (!std::isfinite(reward(s, a))) throw ConfigError("mdp: rewards must be finite");
        if (terminal(s) && (p(s, a, s) != 1.0 || reward(s, a) != 0.0)) {
          throw ConfigError("mdp: terminal state " + std::to_string(s) + " must self-loop with zero reward");
        }
      }
    }
    if (std::abs(init_sum - 1.0) > kProbabilityTolerance) throw ConfigError("mdp: initial distribution must sum to 1");
  }

  // Greatest set W of non-terminal states in which some action keeps the
  // successor inside W with certainty.  W non-empty means some stationary
  // policy loops forever.
  bool episodic() const {
    std::vector<bool> in(static_cast<std::size_t>(num_states_));
    for (int s = 0; s < num_states_; ++s) in[static_cast<std::size_t>(s)] = !terminal(s);
    bool changed = true;
    while (changed) {
      changed = false;
      for (int s = 0; s < num_states_; ++s) {
        if (!in[static_cast<std::size_t>(s)]) continue;
        bool can_stay = false;
        for (int a = 0; a < num_actions_ && !can_stay; ++a) {
          if (!available(s, a)) continue;
          bool inside = true;
          for (int s2 = 0; s2 < num_states_; ++s2) {
            if (p(s, a, s2) > 0.0 && !in[static_cast<std::size_t>(s2)]) inside = false;
          }
          can_stay = inside;
        }
        if (!can_stay) {
          in[static_cast<std::size_t>(s)] = false;
          changed = true;
        }
      }
    }
    for (bool b : in)
      if (b) return false;
    return true;
  }

  int num_states_;
  int num_actions_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  double discount_;
  std::vector<double> initial_;
  std::vector<bool> terminal_;
  std::vector<bool> available_;
};

/// State-conditional action distribution pi(a|s), row-major S x A.
class PolicyTable {
 public:
  PolicyTable(int num_states, int num_actions, std::vector<double> probs)
      : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
    if (num_states_ <= 0 || num_actions_ <= 0) throw ConfigError("policy: dimensions must be positive");
    if (probs_.size() != static_cast<std::size_t>(num_states_) * static_cast<std::size_t>(num_actions_)) {
      throw ConfigError("policy: table has wrong size");
    }
    for (int s = 0; s < num_states_; ++s) {
      double sum = 0.0;
      for (double q : row(s)) {
        if (!(q >= 0.0)) throw ConfigError("policy: negative or NaN probability");
        sum += q;
      }
      if (std::abs(sum - 1.0) > kProbabilityTolerance) {
        throw ConfigError("policy: row " + std::to_string(s) + " does not sum to 1");
      }
    }
  }

  /// Uniform over the available actions of each state.
  static PolicyTable uniform(const FiniteMdp& mdp) {
    const int S = mdp.num_states(), A = mdp.num_actions();
    std::vector<double> probs(static_cast<std::size_t>(S * A), 0.0);
    for (int s = 0; s < S; ++s) {
      const double q = 1.0 / mdp.num_available(s);
      for (int a = 0; a < A; ++a)
        if (mdp.available(s, a)) probs[static_cast<std::size_t>(s * A + a)] = q;
    }
    return {S, A, std::move(probs)};
  }

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }
  double operator()(int s, int a) const {
    return probs_[static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(a)];
  }
  std::span<const double> row(int s) const {
    return {probs_.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_),
            static_cast<std::size_t>(num_actions_)};
  }
  const std::vector<double>& table() const { return probs_; }

 private:
  int num_states_;
  int num_actions_;
  std::vector<double> probs_;
};

/// Throws ConfigError unless the policy fits the MDP's shape and only selects
/// available actions in non-terminal states.
inline void check_compatible(const FiniteMdp& mdp, const PolicyTable& policy) {
  if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
    throw ConfigError("policy shape does not match the mdp");
  }
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    for (int a = 0; a < mdp.num_actions(); ++a) {
      if (!mdp.available(s, a) && policy(s, a) > 0.0) {
        throw ConfigError("policy selects unavailable action " + std::to_string(a) + " in state " +
                          std::to_string(s));
      }
    }
  }
}

struct Step {
  int state;
  int action;
  double reward;

  friend bool operator==(const Step&, const Step&) = default;
};

/// One episode (or episode prefix).  `truncated` means the episode was cut at
/// a length limit; otherwise `final_state` is terminal.
struct Trajectory {
  std::vector<Step> steps;
  int final_state = 0;
  bool truncated = false;

  std::size_t size() const { return steps.size(); }
  int state_at(std::size_t t) const { return t < steps.size() ? steps[t].state : final_state; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Sampled episodes.  The behaviour policy that produced them is deliberately
/// not recorded: nothing downstream may depend on it.
struct Dataset {
  std::vector<Trajectory> trajectories;

  bool empty() const { return trajectories.empty(); }
  std::size_t num_steps() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.size();
    return n;
  }
};

inline double discounted_return(const Trajectory& traj, double gamma) {
  double g = 0.0, w = 1.0;
  for (const auto& st : traj.steps) {
    g += w * st.reward;
    w *= gamma;
  }
  return g;
}

/// Rolls out one episode, drawing every random choice from `rng`.
inline Trajectory sample_trajectory(const FiniteMdp& mdp, const PolicyTable& policy, Rng& rng, int max_len) {
  if (max_len < 1) throw ConfigError("sample_trajectory: max_len must be >= 1");
  Trajectory traj;
  int s = sample_index(mdp.initial_dist(), rng);
  while (!mdp.terminal(s)) {
    if (static_cast<int>(traj.steps.size()) == max_len) {
      traj.truncated = true;
      break;
    }
    const int a = sample_index(policy.row(s), rng);
    traj.steps.push_back({s, a, mdp.reward(s, a)});
    s = sample_index(mdp.successors(s, a), rng);
  }
  traj.final_state = s;
  return traj;
}

inline Trajectory sample_trajectory(const FiniteMdp& mdp, const PolicyTable& policy, std::uint64_t seed,
                                    int max_len) {
  check_compatible(mdp, policy);
  Rng rng = make_rng(seed);
  return sample_trajectory(mdp, policy, rng, max_len);
}

inline Dataset sample_dataset(const FiniteMdp& mdp, const PolicyTable& policy, std::uint64_t seed,
                              std::size_t count, int max_len) {
  check_compatible(mdp, policy);
  Rng rng = make_rng(seed);
  Dataset data;
  data.trajectories.reserve(count);
  for (std::size_t i = 0; i < count; ++i) data.trajectories.push_back(sample_trajectory(mdp, policy, rng, max_len));
  return data;
}

/// Samples whole episodes until at least `min_steps` transitions are stored.
inline Dataset sample_dataset_steps(const FiniteMdp& mdp, const PolicyTable& policy, std::uint64_t seed,
                                    std::size_t min_steps, int max_len) {
  check_compatible(mdp, policy);
  Rng rng = make_rng(seed);
  Dataset data;
  std::size_t steps = 0;
  while (steps < min_steps) {
    data.trajectories.push_back(sample_trajectory(mdp, policy, rng, max_len));
    steps += data.trajectories.back().size();
  }
  return data;
}

}  // namespace offdae

#endif  // OFFDAE_MDP_HPP
