#ifndef OFFDAE_ANALYSIS_HPP
#define OFFDAE_ANALYSIS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <tuple>
#include <vector>

#include "offdae/dp.hpp"
#include "offdae/errors.hpp"
#include "offdae/estimators.hpp"
#include "offdae/mdp.hpp"
#include "offdae/population.hpp"
#include "offdae/targets.hpp"
#include "offdae/windows.hpp"

namespace offdae {

/// G - V(s_0) - sum_t g^t (A_t + g B_t).  With the exact (V, A, B) of any
/// policy this is zero for every terminated trajectory, not just on average.
inline double decomposition_residual(const Trajectory& traj, const std::vector<double>& V,
                                     const std::vector<double>& A, const NatureTable& B, double gamma) {
  if (traj.truncated && gamma >= 1.0) {
    throw DomainError("decomposition_residual: truncated trajectory needs discount < 1");
  }
  const int num_actions = B.num_actions();
  double residual = discounted_return(traj, gamma) - V[static_cast<std::size_t>(traj.state_at(0))];
  double disc = 1.0;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const auto& st = traj.steps[t];
    residual -= disc * (A[static_cast<std::size_t>(st.state * num_actions + st.action)] +
                        gamma * B.at(st.state, st.action, traj.state_at(t + 1)));
    disc *= gamma;
  }
  return residual;
}

struct ClosedFormBias {
  double v_star = 0.0;
  double lambda = 0.0;
  double a_star_u = 0.0;
  double a_star_d = 0.0;
  double v_pi = 0.0;
  double bias = 0.0;  // v_star - v_pi
};

/// Minimiser of the plain DAE loss on the counterexample MDP when the data
/// come from mu and the advantage is centred under pi.
inline ClosedFormBias counterexample_closed_form(double mu_u, double pi_u) {
  if (!(mu_u > 0.0 && mu_u < 1.0)) throw DomainError("counterexample_closed_form: mu_u must lie in (0, 1)");
  if (!(pi_u >= 0.0 && pi_u <= 1.0)) throw DomainError("counterexample_closed_form: pi_u must lie in [0, 1]");
  const double mu_d = 1.0 - mu_u, pi_d = 1.0 - pi_u;
  ClosedFormBias out;
  out.v_star = pi_u / (1.0 + pi_u * pi_u / mu_u + pi_d * pi_d / mu_d);
  out.lambda = out.v_star;
  out.a_star_u = 1.0 - out.v_star - out.v_star * pi_u / mu_u;
  out.a_star_d = -out.v_star - out.v_star * pi_d / mu_d;
  out.v_pi = pi_u / 2.0;
  out.bias = out.v_star - out.v_pi;
  return out;
}

using TransitionId = std::tuple<int, int, int>;

/// Transitions reachable from the start distribution under some policy but
/// never taken under `behavior`.  Empty means `behavior` is explorative.
inline std::vector<TransitionId> unreached_transitions(const FiniteMdp& mdp, const PolicyTable& behavior) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  auto reach = [&](bool any_action) {
    std::vector<bool> seen(static_cast<std::size_t>(S), false);
    std::deque<int> queue;
    for (int s = 0; s < S; ++s)
      if (mdp.initial(s) > 0.0) {
        seen[static_cast<std::size_t>(s)] = true;
        queue.push_back(s);
      }
    while (!queue.empty()) {
      const int s = queue.front();
      queue.pop_front();
      if (mdp.terminal(s)) continue;
      for (int a = 0; a < A; ++a) {
        if (!mdp.available(s, a) || (!any_action && behavior(s, a) == 0.0)) continue;
        for (int s2 = 0; s2 < S; ++s2)
          if (mdp.p(s, a, s2) > 0.0 && !seen[static_cast<std::size_t>(s2)]) {
            seen[static_cast<std::size_t>(s2)] = true;
            queue.push_back(s2);
          }
      }
    }
    return seen;
  };
  const auto possible = reach(true);
  const auto reached = reach(false);
  std::vector<TransitionId> out;
  for (int s = 0; s < S; ++s) {
    if (!possible[static_cast<std::size_t>(s)] || mdp.terminal(s)) continue;
    for (int a = 0; a < A; ++a) {
      if (!mdp.available(s, a)) continue;
      const bool taken = reached[static_cast<std::size_t>(s)] && behavior(s, a) > 0.0;
      for (int s2 = 0; s2 < S; ++s2)
        if (mdp.p(s, a, s2) > 0.0 && !taken) out.emplace_back(s, a, s2);
    }
  }
  return out;
}

struct RecoveryReport {
  bool explorative = false;
  std::vector<TransitionId> unreached;
  double max_error_v = 0.0;
  double max_error_a = 0.0;
  double max_error_b = 0.0;
  bool unique = false;
  int design_rank = 0;
  int num_params = 0;

  bool passed(double tol) const {
    return explorative && unique && max_error_v < tol && max_error_a < tol && max_error_b < tol;
  }
};

/// Population off-policy DAE fit (oracle transition model) compared with the
/// DP tables of `target` on every entry the fit reports as known.
/// `perturb_advantage` is added to the fitted A before comparison; it exists
/// to check that the verifier can fail.
inline RecoveryReport verify_recovery(const FiniteMdp& mdp, const PolicyTable& behavior, const PolicyTable& target,
                                      BackupLength n, double perturb_advantage = 0.0) {
  RecoveryReport rep;
  rep.unreached = unreached_transitions(mdp, behavior);
  rep.explorative = rep.unreached.empty();
  const auto model = TransitionModel::oracle(mdp);
  const auto fit = fit_offpolicy_dae_population(mdp, behavior, target, model, n);
  const auto exact = DecompositionTables::exact(mdp, target);
  const auto& t = fit.tables;
  rep.unique = fit.unique;
  rep.design_rank = fit.design_rank;
  rep.num_params = fit.num_params;
  const int S = mdp.num_states(), A = mdp.num_actions();
  for (int s = 0; s < S; ++s) {
    if (t.v_known[static_cast<std::size_t>(s)]) rep.max_error_v = std::max(rep.max_error_v, std::abs(t.v(s) - exact.v(s)));
    for (int a = 0; a < A; ++a) {
      if (!t.a_known[static_cast<std::size_t>(s * A + a)]) continue;
      rep.max_error_a = std::max(rep.max_error_a, std::abs(t.a(s, a) + perturb_advantage - exact.a(s, a)));
      for (const auto& [s2, b] : t.B.row(s, a)) rep.max_error_b = std::max(rep.max_error_b, std::abs(b - exact.B.at(s, a, s2)));
    }
  }
  return rep;
}

/// max_s |V^mu(s) - V^pi(s) - E_mu[sum_t g^t A^pi(s_t, a_t) | s_0 = s]|, the
/// expectation solved exactly on the behaviour chain.
inline double policy_improvement_check(const FiniteMdp& mdp, const PolicyTable& behavior, const PolicyTable& target) {
  const auto v_mu = policy_evaluation_exact(mdp, behavior);
  const auto v_pi = policy_evaluation_exact(mdp, target);
  const auto adv = advantage_exact(mdp, target);
  const auto [live, pos] = detail::live_states(mdp);
  const Eigen::MatrixXd P = detail::live_kernel(mdp, behavior, live, pos);
  const int A = mdp.num_actions();
  Eigen::VectorXd mean_adv(static_cast<Eigen::Index>(live.size()));
  for (std::size_t i = 0; i < live.size(); ++i) {
    double m = 0.0;
    for (int a = 0; a < A; ++a) m += behavior(live[i], a) * adv[static_cast<std::size_t>(live[i] * A + a)];
    mean_adv(static_cast<Eigen::Index>(i)) = m;
  }
  const Eigen::MatrixXd x = detail::solve_resolvent(P, mdp.discount(), mean_adv);
  double worst = 0.0;
  for (std::size_t i = 0; i < live.size(); ++i) {
    const auto s = static_cast<std::size_t>(live[i]);
    worst = std::max(worst, std::abs(v_mu[s] - v_pi[s] - x(static_cast<Eigen::Index>(i), 0)));
  }
  return worst;
}

struct HierarchyReport {
  std::size_t windows = 0;
  double max_dev_advantage = 0.0;  // dae with A = 0 against uncorrected
  double max_dev_nature = 0.0;     // offpolicy-dae with B = 0 against dae

  double max_deviation() const { return std::max(max_dev_advantage, max_dev_nature); }
};

/// Checks both collapses of the target family on every window of `data`,
/// bootstrapping from tables.V.
inline HierarchyReport hierarchy_check(const DecompositionTables& tables, const Dataset& data, double gamma,
                                       BackupLength n) {
  HierarchyReport rep;
  DecompositionTables no_adv = tables;
  std::fill(no_adv.A.begin(), no_adv.A.end(), 0.0);
  DecompositionTables no_nature = tables;
  no_nature.B = tables.B.zeroed();
  for (const auto& w : expand_windows(data, n)) {
    ++rep.windows;
    const double unc = critic_target_hierarchy(w, tables, tables.V, gamma, CriticMethod::Uncorrected);
    const double dae0 = critic_target_hierarchy(w, no_adv, tables.V, gamma, CriticMethod::Dae);
    const double dae = critic_target_hierarchy(w, tables, tables.V, gamma, CriticMethod::Dae);
    const double off0 = critic_target_hierarchy(w, no_nature, tables.V, gamma, CriticMethod::OffpolicyDae);
    rep.max_dev_advantage = std::max(rep.max_dev_advantage, std::abs(dae0 - unc));
    rep.max_dev_nature = std::max(rep.max_dev_nature, std::abs(off0 - dae));
  }
  return rep;
}

}  // namespace offdae

#endif  // OFFDAE_ANALYSIS_HPP
