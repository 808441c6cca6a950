#ifndef OFFDAE_POPULATION_HPP
#define OFFDAE_POPULATION_HPP

#include <Eigen/Dense>
#include <vector>

#include "offdae/dp.hpp"
#include "offdae/errors.hpp"
#include "offdae/estimators.hpp"
#include "offdae/mdp.hpp"
#include "offdae/windows.hpp"

// Population-weighted fits: every window the behaviour policy can produce,
// weighted by its probability, in place of a sampled dataset.

namespace offdae {

namespace detail {

inline void extend_paths(const FiniteMdp& mdp, const PolicyTable& behavior, WeightedTrajectory prefix, int state,
                         int remaining, std::vector<WeightedTrajectory>& out) {
  if (mdp.terminal(state) || remaining == 0) {
    prefix.traj.final_state = state;
    prefix.traj.truncated = !mdp.terminal(state);
    out.push_back(std::move(prefix));
    return;
  }
  for (int a = 0; a < mdp.num_actions(); ++a) {
    const double pa = behavior(state, a);
    if (pa == 0.0 || !mdp.available(state, a)) continue;
    for (int s2 = 0; s2 < mdp.num_states(); ++s2) {
      const double q = mdp.p(state, a, s2);
      if (q == 0.0) continue;
      WeightedTrajectory next = prefix;
      next.traj.steps.push_back({state, a, mdp.reward(state, a)});
      next.weight *= pa * q;
      extend_paths(mdp, behavior, std::move(next), s2, remaining - 1, out);
    }
  }
}

}  // namespace detail

/// Every complete episode with its probability.  Needs a finite horizon.
inline std::vector<WeightedTrajectory> enumerate_episodes(const FiniteMdp& mdp, const PolicyTable& behavior) {
  check_compatible(mdp, behavior);
  const auto h = mdp.horizon();
  if (!h) throw ConfigError("enumerate_episodes: MDP has cycles, episodes cannot be enumerated");
  std::vector<WeightedTrajectory> out;
  for (int s = 0; s < mdp.num_states(); ++s) {
    if (mdp.initial(s) == 0.0) continue;
    detail::extend_paths(mdp, behavior, {Trajectory{}, mdp.initial(s)}, s, *h, out);
  }
  return out;
}

/// Every window of up to n + 1 transitions.  A window starting at s carries
/// weight (expected visits to s per episode) x (path probability), which is
/// the population limit of sub-trajectory expansion.
inline std::vector<WeightedTrajectory> enumerate_windows(const FiniteMdp& mdp, const PolicyTable& behavior, int n) {
  check_compatible(mdp, behavior);
  if (n < 0) throw ConfigError("enumerate_windows: n must be >= 0");
  const auto visits = expected_visits(mdp, behavior, mdp.initial_dist());
  std::vector<WeightedTrajectory> out;
  for (int s = 0; s < mdp.num_states(); ++s) {
    const double w = visits[static_cast<std::size_t>(s)];
    if (mdp.terminal(s) || w == 0.0) continue;
    detail::extend_paths(mdp, behavior, {Trajectory{}, w}, s, n + 1, out);
  }
  return out;
}

namespace detail {

/// Full-return population fit on an MDP with cycles, from exact second
/// moments of the discounted occupancy counts.  With P the behaviour kernel
/// on live states, D2 = d0 (I - g^2 P)^-1 and N = (I - g P)^-1, the count
/// N_i of transition i = (s, a, s2) with w_i = mu(a|s) p(s2|s,a) has
///   E[N_i N_j]       = d_ij D2(s_i) w_i + g D2(s_i) w_i N(s2_i, s_j) w_j + (i <-> j)
///   E[1(s0=s) N_j]   = d0(s) N(s, s_j) w_j.
inline FitReport fit_full_return_moments(const FiniteMdp& mdp, const PolicyTable& behavior, const PolicyTable& target,
                                         const TransitionModel* model) {
  const int S = mdp.num_states(), A = mdp.num_actions();
  const double g = mdp.discount();
  const auto [live, pos] = live_states(mdp);
  const Eigen::MatrixXd P = live_kernel(mdp, behavior, live, pos);
  const auto L = static_cast<Eigen::Index>(live.size());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(L, L);
  const Eigen::MatrixXd Nm = solve_resolvent(P, g, I);
  const Eigen::MatrixXd N2 = solve_resolvent(P, g * g, I);
  Eigen::VectorXd d0(L);
  for (Eigen::Index i = 0; i < L; ++i) d0(i) = mdp.initial(live[static_cast<std::size_t>(i)]);
  const Eigen::VectorXd D2 = N2.transpose() * d0;

  struct Arc {
    int s, a, s2;
    double w;
  };
  std::vector<Arc> arcs;
  for (int s : live)
    for (int a = 0; a < A; ++a) {
      const double pa = behavior(s, a);
      if (pa == 0.0 || !mdp.available(s, a)) continue;
      for (int s2 = 0; s2 < S; ++s2)
        if (mdp.p(s, a, s2) > 0.0) arcs.push_back({s, a, s2, pa * mdp.p(s, a, s2)});
    }
  const auto K = static_cast<Eigen::Index>(arcs.size());
  const Eigen::Index Z = S + K;  // z = [start indicators; discounted arc counts]
  Eigen::MatrixXd Ez = Eigen::MatrixXd::Zero(Z, Z);
  auto live_pos = [&](int s) { return static_cast<Eigen::Index>(pos[static_cast<std::size_t>(s)]); };
  for (int s : live) Ez(s, s) = mdp.initial(s);
  for (Eigen::Index j = 0; j < K; ++j) {
    const auto& aj = arcs[static_cast<std::size_t>(j)];
    for (int s : live) {
      const double m = mdp.initial(s) * Nm(live_pos(s), live_pos(aj.s)) * aj.w;
      Ez(s, S + j) = m;
      Ez(S + j, s) = m;
    }
  }
  for (Eigen::Index i = 0; i < K; ++i) {
    const auto& ai = arcs[static_cast<std::size_t>(i)];
    const double head = D2(live_pos(ai.s)) * ai.w;
    Ez(S + i, S + i) += head;
    if (mdp.terminal(ai.s2)) continue;
    for (Eigen::Index j = 0; j < K; ++j) {
      const auto& aj = arcs[static_cast<std::size_t>(j)];
      const double m = head * g * Nm(live_pos(ai.s2), live_pos(aj.s)) * aj.w;
      Ez(S + i, S + j) += m;
      Ez(S + j, S + i) += m;
    }
  }

  DecompositionLayout layout(target, model, g);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(layout.num_params(), Z);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(Z);
  for (int s = 0; s < S; ++s) M(layout.v_index(s), s) = 1.0;
  SparseRow row;
  for (Eigen::Index i = 0; i < K; ++i) {
    const auto& ai = arcs[static_cast<std::size_t>(i)];
    layout.check_support(ai.s, ai.a, ai.s2);
    row.clear();
    layout.add_advantage(row, ai.s, ai.a, 1.0);
    layout.add_nature(row, ai.s, ai.a, ai.s2, g);
    for (const auto& [j, v] : row) M(j, S + i) += v;
    rho(S + i) = mdp.reward(ai.s, ai.a);
  }
  const Eigen::MatrixXd G = M * Ez * M.transpose();
  const Eigen::VectorXd b = M * (Ez * rho);
  const double yy = rho.dot(Ez * rho);
  const auto sol = LeastSquares::solve_gram(G, b, yy, 1.0);

  FitReport rep;
  rep.tables = layout.tables(sol.x);
  auto& t = rep.tables;
  for (int s = 0; s < S; ++s) t.v_known[static_cast<std::size_t>(s)] = sol.column_touched[static_cast<std::size_t>(s)];
  std::vector<std::vector<NatureTable::Entry>> observed(static_cast<std::size_t>(S * A));
  for (const auto& arc : arcs) {
    t.a_known[static_cast<std::size_t>(arc.s * A + arc.a)] = true;
    if (mdp.terminal(arc.s2)) t.v_known[static_cast<std::size_t>(arc.s2)] = true;
    observed[static_cast<std::size_t>(arc.s * A + arc.a)].emplace_back(arc.s2, 0.0);
  }
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      if (!t.a_known[static_cast<std::size_t>(s * A + a)]) continue;
      if (model) {
        t.B.set_row(s, a, layout.nature_row(sol.x, s, a));
      } else {
        t.B.set_row(s, a, observed[static_cast<std::size_t>(s * A + a)]);
      }
    }
  rep.objective_value = sol.objective();
  rep.design_rank = sol.rank;
  rep.num_params = sol.touched;
  rep.unique = sol.unique();
  rep.v_identified.assign(static_cast<std::size_t>(S), false);
  for (int s = 0; s < S; ++s) rep.v_identified[static_cast<std::size_t>(s)] = sol.identified[static_cast<std::size_t>(s)];
  return rep;
}

inline FitReport fit_population(const FiniteMdp& mdp, const PolicyTable& behavior, const PolicyTable& target,
                                const TransitionModel* model, BackupLength n) {
  check_compatible(mdp, behavior);
  check_compatible(mdp, target);
  std::vector<WeightedTrajectory> items;
  if (n) {
    items = enumerate_windows(mdp, behavior, *n);
  } else if (mdp.horizon()) {
    items = enumerate_episodes(mdp, behavior);
  } else {
    return fit_full_return_moments(mdp, behavior, target, model);
  }
  const auto windows = as_windows(items);
  return fit_windows(windows, target, model, mdp.discount(), nullptr);
}

}  // namespace detail

/// DAE under population weighting of `behavior`'s windows (n) or episodes (inf).
inline FitReport fit_dae_population(const FiniteMdp& mdp, const PolicyTable& behavior, const PolicyTable& target,
                                    BackupLength n) {
  return detail::fit_population(mdp, behavior, target, nullptr, n);
}

inline FitReport fit_offpolicy_dae_population(const FiniteMdp& mdp, const PolicyTable& behavior,
                                              const PolicyTable& target, const TransitionModel& model,
                                              BackupLength n) {
  return detail::fit_population(mdp, behavior, target, &model, n);
}

}  // namespace offdae

#endif  // OFFDAE_POPULATION_HPP
