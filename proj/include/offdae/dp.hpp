#ifndef OFFDAE_DP_HPP
#define OFFDAE_DP_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "offdae/errors.hpp"
#include "offdae/mdp.hpp"

// Exact dynamic-programming oracles: every quantity here comes from a direct
// linear solve, never from iteration or sampling.

namespace offdae {

/// Sparse table over (s, a, s2), stored only on the transition support.
/// Reading an off-support entry throws SupportError.
class NatureTable {
 public:
  NatureTable() = default;
  NatureTable(int num_states, int num_actions)
      : num_states_(num_states),
        num_actions_(num_actions),
        rows_(static_cast<std::size_t>(num_states) * static_cast<std::size_t>(num_actions)) {}

  using Entry = std::pair<int, double>;  // successor, value

  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  void set_row(int s, int a, std::vector<Entry> entries) {
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) { return x.first < y.first; });
    rows_[index(s, a)] = std::move(entries);
  }
  const std::vector<Entry>& row(int s, int a) const { return rows_[index(s, a)]; }

  bool has(int s, int a, int s2) const { return find(s, a, s2) != nullptr; }

  double at(int s, int a, int s2) const {
    const Entry* e = find(s, a, s2);
    if (e == nullptr) {
      throw SupportError("nature table read off support at (" + std::to_string(s) + "," + std::to_string(a) + "," +
                         std::to_string(s2) + ")");
    }
    return e->second;
  }

  /// Copy with every stored value set to zero (same support).
  NatureTable zeroed() const {
    NatureTable z = *this;
    for (auto& r : z.rows_)
      for (auto& e : r) e.second = 0.0;
    return z;
  }

 private:
  std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(num_actions_) + static_cast<std::size_t>(a);
  }
  const Entry* find(int s, int a, int s2) const {
    if (s < 0 || s >= num_states_ || a < 0 || a >= num_actions_) return nullptr;
    const auto& r = rows_[index(s, a)];
    auto it = std::lower_bound(r.begin(), r.end(), s2, [](const Entry& e, int key) { return e.first < key; });
    if (it == r.end() || it->first != s2) return nullptr;
    return &*it;
  }

  int num_states_ = 0;
  int num_actions_ = 0;
  std::vector<std::vector<Entry>> rows_;
};

namespace detail {

/// Indices of non-terminal states and the inverse map (-1 for terminal).
inline std::pair<std::vector<int>, std::vector<int>> live_states(const FiniteMdp& mdp) {
  std::vector<int> live, pos(static_cast<std::size_t>(mdp.num_states()), -1);
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.terminal(s)) continue;
    pos[static_cast<std::size_t>(s)] = static_cast<int>(live.size());
    live.push_back(s);
  }
  return {live, pos};
}

/// State-to-state kernel of `policy` restricted to non-terminal states.
inline Eigen::MatrixXd live_kernel(const FiniteMdp& mdp, const PolicyTable& policy, const std::vector<int>& live,
                                   const std::vector<int>& pos) {
  const auto n = static_cast<Eigen::Index>(live.size());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = live[static_cast<std::size_t>(i)];
    for (int a = 0; a < mdp.num_actions(); ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0 || !mdp.available(s, a)) continue;
      for (int s2 = 0; s2 < mdp.num_states(); ++s2) {
        const int j = pos[static_cast<std::size_t>(s2)];
        if (j >= 0) P(i, j) += pa * mdp.p(s, a, s2);
      }
    }
  }
  return P;
}

/// Solves (I - g K) X = B on non-terminal states, rejecting singular systems.
inline Eigen::MatrixXd solve_resolvent(const Eigen::MatrixXd& K, double g, const Eigen::MatrixXd& rhs) {
  const auto n = K.rows();
  if (n == 0) return Eigen::MatrixXd::Zero(0, rhs.cols());
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - g * K;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw EvaluationError("policy evaluation: singular Bellman system (non-episodic chain)");
  Eigen::MatrixXd x = lu.solve(rhs);
  if (!x.allFinite()) throw EvaluationError("policy evaluation: non-finite solution");
  return x;
}

}  // namespace detail

/// V^pi from the linear Bellman system (I - gamma P_pi) V = r_pi.  Terminal
/// states get value 0.
inline std::vector<double> policy_evaluation_exact(const FiniteMdp& mdp, const PolicyTable& policy) {
  check_compatible(mdp, policy);
  const auto [live, pos] = detail::live_states(mdp);
  const Eigen::MatrixXd P = detail::live_kernel(mdp, policy, live, pos);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(live.size()));
  for (std::size_t i = 0; i < live.size(); ++i) {
    const int s = live[i];
    for (int a = 0; a < mdp.num_actions(); ++a)
      if (mdp.available(s, a)) r(static_cast<Eigen::Index>(i)) += policy(s, a) * mdp.reward(s, a);
  }
  const Eigen::MatrixXd v = detail::solve_resolvent(P, mdp.discount(), r);
  std::vector<double> V(static_cast<std::size_t>(mdp.num_states()), 0.0);
  for (std::size_t i = 0; i < live.size(); ++i) V[static_cast<std::size_t>(live[i])] = v(static_cast<Eigen::Index>(i), 0);
  return V;
}

/// Q(s, a) = r(s, a) + gamma * E[V(s')] for available non-terminal pairs; 0 elsewhere.
inline std::vector<double> q_from_values(const FiniteMdp& mdp, const std::vector<double>& V) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<double> Q(static_cast<std::size_t>(S * A), 0.0);
  for (int s = 0; s < S; ++s) {
    if (mdp.terminal(s)) continue;
    for (int a = 0; a < A; ++a) {
      if (!mdp.available(s, a)) continue;
      double ev = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        const double q = mdp.p(s, a, s2);
        if (q > 0.0) ev += q * V[static_cast<std::size_t>(s2)];
      }
      Q[static_cast<std::size_t>(s * A + a)] = mdp.reward(s, a) + mdp.discount() * ev;
    }
  }
  return Q;
}

/// A^pi = Q^pi - V^pi on available non-terminal pairs; 0 elsewhere.
inline std::vector<double> advantage_exact(const FiniteMdp& mdp, const PolicyTable& policy) {
  const auto V = policy_evaluation_exact(mdp, policy);
  auto Adv = q_from_values(mdp, V);
  const int S = mdp.num_states(), A = mdp.num_actions();
  for (int s = 0; s < S; ++s) {
    if (mdp.terminal(s)) continue;
    for (int a = 0; a < A; ++a)
      if (mdp.available(s, a)) Adv[static_cast<std::size_t>(s * A + a)] -= V[static_cast<std::size_t>(s)];
  }
  return Adv;
}

/// B(s, a, s2) = V(s2) - E_{s'' ~ p(.|s,a)}[V(s'')] on the transition support.
inline NatureTable nature_from_values(const FiniteMdp& mdp, const std::vector<double>& V) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  NatureTable B(S, A);
  for (int s = 0; s < S; ++s) {
    if (mdp.terminal(s)) continue;
    for (int a = 0; a < A; ++a) {
      if (!mdp.available(s, a)) continue;
      std::vector<NatureTable::Entry> row;
      double ev = 0.0;
      for (int s2 = 0; s2 < S; ++s2) {
        const double q = mdp.p(s, a, s2);
        if (q <= 0.0) continue;
        ev += q * V[static_cast<std::size_t>(s2)];
        row.emplace_back(s2, 0.0);
      }
      if (row.size() > 1) {
        for (auto& [s2, b] : row) b = V[static_cast<std::size_t>(s2)] - ev;
      }
      B.set_row(s, a, std::move(row));
    }
  }
  return B;
}

inline NatureTable nature_advantage_exact(const FiniteMdp& mdp, const PolicyTable& policy) {
  return nature_from_values(mdp, policy_evaluation_exact(mdp, policy));
}

/// Expected number of visits to each state when starting from `start` and
/// following `policy` (terminal entries are 0).  Requires termination.
inline std::vector<double> expected_visits(const FiniteMdp& mdp, const PolicyTable& policy,
                                           const std::vector<double>& start) {
  const auto [live, pos] = detail::live_states(mdp);
  const Eigen::MatrixXd P = detail::live_kernel(mdp, policy, live, pos);
  Eigen::VectorXd d(static_cast<Eigen::Index>(live.size()));
  for (std::size_t i = 0; i < live.size(); ++i) d(static_cast<Eigen::Index>(i)) = start[static_cast<std::size_t>(live[i])];
  const Eigen::MatrixXd nu = detail::solve_resolvent(P.transpose(), 1.0, d);
  std::vector<double> out(static_cast<std::size_t>(mdp.num_states()), 0.0);
  for (std::size_t i = 0; i < live.size(); ++i) out[static_cast<std::size_t>(live[i])] = nu(static_cast<Eigen::Index>(i), 0);
  return out;
}

/// Optimal deterministic policy by policy iteration; ties break to the lowest
/// action index.  Requires discount < 1 or an episodic MDP.
inline PolicyTable optimal_policy(const FiniteMdp& mdp) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  std::vector<int> choice(static_cast<std::size_t>(S), -1);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A && choice[static_cast<std::size_t>(s)] < 0; ++a)
      if (mdp.available(s, a)) choice[static_cast<std::size_t>(s)] = a;
  auto as_policy = [&] {
    std::vector<double> probs(static_cast<std::size_t>(S * A), 0.0);
    for (int s = 0; s < S; ++s) probs[static_cast<std::size_t>(s * A + choice[static_cast<std::size_t>(s)])] = 1.0;
    return PolicyTable(S, A, std::move(probs));
  };
  for (int iter = 0; iter < 1000; ++iter) {
    const auto Q = q_from_values(mdp, policy_evaluation_exact(mdp, as_policy()));
    bool stable = true;
    for (int s = 0; s < S; ++s) {
      if (mdp.terminal(s)) continue;
      int& c = choice[static_cast<std::size_t>(s)];
      int best = c;
      for (int a = 0; a < A; ++a) {
        if (!mdp.available(s, a)) continue;
        if (Q[static_cast<std::size_t>(s * A + a)] > Q[static_cast<std::size_t>(s * A + best)] + 1e-12) best = a;
      }
      if (best != c) {
        c = best;
        stable = false;
      }
    }
    if (stable) break;
  }
  return as_policy();
}

}  // namespace offdae

#endif  // OFFDAE_DP_HPP
