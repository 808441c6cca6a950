#ifndef OFFDAE_ESTIMATORS_HPP
#define OFFDAE_ESTIMATORS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offdae/dp.hpp"
#include "offdae/errors.hpp"
#include "offdae/least_squares.hpp"
#include "offdae/mdp.hpp"
#include "offdae/windows.hpp"

namespace offdae {

/// Per-state estimate; nullopt marks states the data says nothing about.
using ValueEstimate = std::vector<std::optional<double>>;

// ---------------------------------------------------------------------------
// Transition models

/// p_hat(s2 | s, a) on a sparse support.  The oracle kind copies the MDP;
/// the empirical kind holds raw counts and their ratios (no smoothing).
class TransitionModel {
 public:
  enum class Kind { Oracle, Empirical };
  using Entry = std::pair<int, double>;

  TransitionModel(Kind kind, int num_states, int num_actions)
      : kind_(kind),
        num_states_(num_states),
        num_actions_(num_actions),
        rows_(static_cast<std::size_t>(num_states * num_actions)),
        pair_counts_(static_cast<std::size_t>(num_states * num_actions), 0),
        succ_counts_(static_cast<std::size_t>(num_states * num_actions)) {}

  static TransitionModel oracle(const FiniteMdp& mdp) {
    TransitionModel m(Kind::Oracle, mdp.num_states(), mdp.num_actions());
    for (int s = 0; s < mdp.num_states(); ++s) {
      if (mdp.terminal(s)) continue;
      for (int a = 0; a < mdp.num_actions(); ++a) {
        if (!mdp.available(s, a)) continue;
        auto& row = m.rows_[m.index(s, a)];
        for (int s2 = 0; s2 < mdp.num_states(); ++s2)
          if (mdp.p(s, a, s2) > 0.0) row.emplace_back(s2, mdp.p(s, a, s2));
      }
    }
    return m;
  }

  Kind kind() const { return kind_; }
  int num_states() const { return num_states_; }
  int num_actions() const { return num_actions_; }

  const std::vector<Entry>& row(int s, int a) const { return rows_[index(s, a)]; }

  double prob(int s, int a, int s2) const {
    for (const auto& [t, q] : row(s, a))
      if (t == s2) return q;
    return 0.0;
  }
  bool covers(int s, int a, int s2) const { return prob(s, a, s2) > 0.0; }

  /// Empirical kind only: add one observed transition and refresh its row.
  void observe(int s, int a, int s2) {
    if (kind_ != Kind::Empirical) throw ConfigError("transition model: cannot add counts to an oracle model");
    const std::size_t k = index(s, a);
    ++pair_counts_[k];
    auto& counts = succ_counts_[k];
    auto it = std::lower_bound(counts.begin(), counts.end(), s2,
                               [](const std::pair<int, std::int64_t>& e, int key) { return e.first < key; });
    if (it != counts.end() && it->first == s2) {
      ++it->second;
    } else {
      counts.insert(it, {s2, 1});
    }
    auto& row = rows_[k];
    row.clear();
    const double total = static_cast<double>(pair_counts_[k]);
    for (const auto& [t, c] : counts) row.emplace_back(t, static_cast<double>(c) / total);
  }

  std::int64_t pair_count(int s, int a) const { return pair_counts_[index(s, a)]; }
  std::int64_t count(int s, int a, int s2) const {
    for (const auto& [t, c] : succ_counts_[index(s, a)])
      if (t == s2) return c;
    return 0;
  }

 private:
  std::size_t index(int s, int a) const {
    if (s < 0 || s >= num_states_ || a < 0 || a >= num_actions_) throw ConfigError("transition model: index out of range");
    return static_cast<std::size_t>(s * num_actions_ + a);
  }

  Kind kind_;
  int num_states_;
  int num_actions_;
  std::vector<std::vector<Entry>> rows_;
  std::vector<std::int64_t> pair_counts_;
  std::vector<std::vector<std::pair<int, std::int64_t>>> succ_counts_;
};

inline void check_state_range(const Dataset& data, int num_states, int num_actions) {
  for (const auto& traj : data.trajectories) {
    auto bad = [&](int s) { return s < 0 || s >= num_states; };
    if (bad(traj.final_state)) throw FitError("dataset state index out of range");
    for (const auto& st : traj.steps) {
      if (bad(st.state) || st.action < 0 || st.action >= num_actions) throw FitError("dataset index out of range");
    }
  }
}

/// Empirical p_hat(s2|s,a) = count(s,a,s2) / count(s,a) over every observed
/// transition of the dataset.
inline TransitionModel estimate_transitions(const Dataset& data, int num_states, int num_actions) {
  check_state_range(data, num_states, num_actions);
  TransitionModel m(TransitionModel::Kind::Empirical, num_states, num_actions);
  for (const auto& traj : data.trajectories)
    for (std::size_t t = 0; t < traj.size(); ++t) m.observe(traj.steps[t].state, traj.steps[t].action, traj.state_at(t + 1));
  return m;
}

// ---------------------------------------------------------------------------
// Monte Carlo and batch TD(0)

inline int infer_num_states(const Dataset& data) {
  int m = -1;
  for (const auto& traj : data.trajectories) {
    m = std::max(m, traj.final_state);
    for (const auto& st : traj.steps) m = std::max(m, st.state);
  }
  return m + 1;
}

/// Mean return per start state.  States never started from stay absent.
inline ValueEstimate fit_mc(const Dataset& data, double gamma, int num_states = -1) {
  if (data.empty()) throw FitError("fit_mc: empty dataset");
  if (num_states < 0) num_states = infer_num_states(data);
  std::vector<double> sum(static_cast<std::size_t>(num_states), 0.0);
  std::vector<std::int64_t> count(static_cast<std::size_t>(num_states), 0);
  for (const auto& traj : data.trajectories) {
    const int s0 = traj.state_at(0);
    if (s0 < 0 || s0 >= num_states) throw FitError("fit_mc: state index out of range");
    sum[static_cast<std::size_t>(s0)] += discounted_return(traj, gamma);
    ++count[static_cast<std::size_t>(s0)];
  }
  ValueEstimate v(static_cast<std::size_t>(num_states));
  for (std::size_t s = 0; s < v.size(); ++s)
    if (count[s] > 0) v[s] = sum[s] / static_cast<double>(count[s]);
  return v;
}

/// Fixed point of batch TD(0): exact evaluation of the empirical chain built
/// from the dataset's state-to-state counts and mean rewards.  Terminal
/// successors have value 0; states seen only as a truncation point are held
/// at 0 and reported absent.
inline ValueEstimate fit_batch_td0(const Dataset& data, double gamma, int num_states = -1) {
  if (data.empty()) throw FitError("fit_batch_td0: empty dataset");
  if (num_states < 0) num_states = infer_num_states(data);
  const auto S = static_cast<std::size_t>(num_states);
  std::vector<double> visits(S, 0.0), reward_sum(S, 0.0);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(num_states, num_states);
  for (const auto& traj : data.trajectories) {
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const int s = traj.steps[t].state, s2 = traj.state_at(t + 1);
      if (s < 0 || s >= num_states || s2 < 0 || s2 >= num_states) throw FitError("fit_batch_td0: state out of range");
      visits[static_cast<std::size_t>(s)] += 1.0;
      reward_sum[static_cast<std::size_t>(s)] += traj.steps[t].reward;
      counts(s, s2) += 1.0;
    }
  }
  std::vector<int> live, pos(S, -1);
  for (int s = 0; s < num_states; ++s) {
    if (visits[static_cast<std::size_t>(s)] == 0.0) continue;
    pos[static_cast<std::size_t>(s)] = static_cast<int>(live.size());
    live.push_back(s);
  }
  const auto n = static_cast<Eigen::Index>(live.size());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd r(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int s = live[static_cast<std::size_t>(i)];
    const double vs = visits[static_cast<std::size_t>(s)];
    r(i) = reward_sum[static_cast<std::size_t>(s)] / vs;
    for (int s2 = 0; s2 < num_states; ++s2) {
      const int j = pos[static_cast<std::size_t>(s2)];
      if (j >= 0 && counts(s, s2) > 0.0) P(i, j) = counts(s, s2) / vs;
    }
  }
  Eigen::MatrixXd v;
  try {
    v = detail::solve_resolvent(P, gamma, r);
  } catch (const EvaluationError&) {
    throw FitError("fit_batch_td0: empirical model is not episodic under this discount");
  }
  ValueEstimate out(S);
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(live[static_cast<std::size_t>(i)])] = v(i, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Decomposition fits

/// Estimates (V, A, B) with presence masks.  B rows exist only for observed
/// (s, a) pairs and only on the model support.
struct DecompositionTables {
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> V;
  std::vector<bool> v_known;
  std::vector<double> A;
  std::vector<bool> a_known;
  NatureTable B;

  DecompositionTables() = default;
  DecompositionTables(int S, int A_)
      : num_states(S),
        num_actions(A_),
        V(static_cast<std::size_t>(S), 0.0),
        v_known(static_cast<std::size_t>(S), false),
        A(static_cast<std::size_t>(S * A_), 0.0),
        a_known(static_cast<std::size_t>(S * A_), false),
        B(S, A_) {}

  double v(int s) const { return V[static_cast<std::size_t>(s)]; }
  double a(int s, int act) const { return A[static_cast<std::size_t>(s * num_actions + act)]; }

  /// DP-exact tables for `policy`, everything marked known.
  static DecompositionTables exact(const FiniteMdp& mdp, const PolicyTable& policy) {
    DecompositionTables t(mdp.num_states(), mdp.num_actions());
    t.V = policy_evaluation_exact(mdp, policy);
    t.A = advantage_exact(mdp, policy);
    t.B = nature_from_values(mdp, t.V);
    t.v_known.assign(t.V.size(), true);
    t.a_known.assign(t.A.size(), true);
    return t;
  }
};

struct FitReport {
  DecompositionTables tables;
  double objective_value = 0.0;  // weighted mean squared residual
  int design_rank = 0;
  int num_params = 0;            // parameters touched by the data
  bool unique = false;           // design_rank == num_params
  std::vector<bool> v_identified;
};

namespace detail {

/// Coordinates of the constrained (V, A, B) space.  A centred row is
/// parametrised by its entries at every action except a pivot (the most
/// probable action, ties to the highest index); the pivot entry is the value
/// that makes the row centred.  B rows are handled the same way with p_hat.
/// Minimum norm in these coordinates is minimum norm over the free table
/// entries.
class DecompositionLayout {
 public:
  DecompositionLayout(const PolicyTable& target, const TransitionModel* model, double gamma)
      : S_(target.num_states()), A_(target.num_actions()), gamma_(gamma), target_(&target), model_(model) {
    if (model && (model->num_states() != S_ || model->num_actions() != A_)) {
      throw ConfigError("transition model shape does not match the target policy");
    }
    int next = S_;
    a_pivot_.resize(static_cast<std::size_t>(S_));
    a_index_.assign(static_cast<std::size_t>(S_ * A_), -1);
    for (int s = 0; s < S_; ++s) {
      const int piv = argmax_last(target.row(s));
      a_pivot_[static_cast<std::size_t>(s)] = piv;
      for (int a = 0; a < A_; ++a)
        if (a != piv) a_index_[static_cast<std::size_t>(s * A_ + a)] = next++;
    }
    b_pivot_.assign(static_cast<std::size_t>(S_ * A_), -1);
    b_index_.resize(static_cast<std::size_t>(S_ * A_));
    if (model) {
      for (int s = 0; s < S_; ++s) {
        for (int a = 0; a < A_; ++a) {
          const auto& row = model->row(s, a);
          if (row.empty()) continue;
          std::size_t piv = 0;
          for (std::size_t k = 1; k < row.size(); ++k)
            if (row[k].second >= row[piv].second) piv = k;
          b_pivot_[static_cast<std::size_t>(s * A_ + a)] = row[piv].first;
          auto& idx = b_index_[static_cast<std::size_t>(s * A_ + a)];
          idx.assign(row.size(), -1);
          for (std::size_t k = 0; k < row.size(); ++k)
            if (k != piv) idx[k] = next++;
        }
      }
    }
    num_params_ = next;
  }

  int num_params() const { return num_params_; }
  int v_index(int s) const { return s; }

  /// Adds the coefficient row of w * A_hat(s, a).
  void add_advantage(SparseRow& row, int s, int a, double w) const {
    const int piv = a_pivot_[static_cast<std::size_t>(s)];
    if (a != piv) {
      row.emplace_back(a_index_[static_cast<std::size_t>(s * A_ + a)], w);
      return;
    }
    const double pp = (*target_)(s, piv);
    for (int b = 0; b < A_; ++b) {
      if (b == piv) continue;
      const double q = (*target_)(s, b);
      if (q != 0.0) row.emplace_back(a_index_[static_cast<std::size_t>(s * A_ + b)], -w * q / pp);
    }
  }

  /// Adds the coefficient row of w * B_hat(s, a, s2).
  void add_nature(SparseRow& row, int s, int a, int s2, double w) const {
    if (!model_) return;
    const auto& mrow = model_->row(s, a);
    const auto& idx = b_index_[static_cast<std::size_t>(s * A_ + a)];
    const int piv = b_pivot_[static_cast<std::size_t>(s * A_ + a)];
    if (s2 != piv) {
      for (std::size_t k = 0; k < mrow.size(); ++k)
        if (mrow[k].first == s2) row.emplace_back(idx[k], w);
      return;
    }
    double pp = 0.0;
    for (const auto& [t, q] : mrow)
      if (t == piv) pp = q;
    for (std::size_t k = 0; k < mrow.size(); ++k)
      if (idx[k] >= 0) row.emplace_back(idx[k], -w * mrow[k].second / pp);
  }

  void check_support(int s, int a, int s2) const {
    if (model_ && !model_->covers(s, a, s2)) {
      throw FitError("transition (" + std::to_string(s) + "," + std::to_string(a) + "," + std::to_string(s2) +
                     ") lies outside the transition model support");
    }
  }

  /// Expands a parameter vector into tables.  Presence masks are filled by
  /// the caller.
  DecompositionTables tables(const Eigen::VectorXd& x) const {
    DecompositionTables t(S_, A_);
    auto val = [&](int j) { return j >= 0 ? x(j) : 0.0; };
    for (int s = 0; s < S_; ++s) t.V[static_cast<std::size_t>(s)] = x(s);
    for (int s = 0; s < S_; ++s) {
      const int piv = a_pivot_[static_cast<std::size_t>(s)];
      double acc = 0.0;
      for (int a = 0; a < A_; ++a) {
        if (a == piv) continue;
        const double v = val(a_index_[static_cast<std::size_t>(s * A_ + a)]);
        t.A[static_cast<std::size_t>(s * A_ + a)] = v;
        acc += (*target_)(s, a) * v;
      }
      t.A[static_cast<std::size_t>(s * A_ + piv)] = -acc / (*target_)(s, piv);
    }
    return t;
  }

  std::vector<NatureTable::Entry> nature_row(const Eigen::VectorXd& x, int s, int a) const {
    std::vector<NatureTable::Entry> out;
    if (!model_) return out;
    const auto& mrow = model_->row(s, a);
    const auto& idx = b_index_[static_cast<std::size_t>(s * A_ + a)];
    double acc = 0.0, pp = 0.0;
    std::size_t piv = 0;
    for (std::size_t k = 0; k < mrow.size(); ++k) {
      if (idx[k] < 0) {
        piv = k;
        pp = mrow[k].second;
        out.emplace_back(mrow[k].first, 0.0);
        continue;
      }
      out.emplace_back(mrow[k].first, x(idx[k]));
      acc += mrow[k].second * x(idx[k]);
    }
    if (!out.empty()) out[piv].second = -acc / pp;
    return out;
  }

  bool has_model() const { return model_ != nullptr; }
  double gamma() const { return gamma_; }

 private:
  static int argmax_last(std::span<const double> row) {
    int best = 0;
    for (int a = 1; a < static_cast<int>(row.size()); ++a)
      if (row[static_cast<std::size_t>(a)] >= row[static_cast<std::size_t>(best)]) best = a;
    return best;
  }

  int S_, A_;
  double gamma_;
  const PolicyTable* target_;
  const TransitionModel* model_;
  std::vector<int> a_pivot_;
  std::vector<int> a_index_;
  std::vector<int> b_pivot_;
  std::vector<std::vector<int>> b_index_;
  int num_params_ = 0;
};

/// Regression row of one window:
///   V(s_0) - g^L V(s_L) [self bootstrap] + sum_t g^t A_t + sum_t g^(t+1) B_t
///     = sum_t g^t r_t + g^L V_target(s_L) [external bootstrap].
inline void window_row(const DecompositionLayout& layout, const Window& w, const std::vector<double>* bootstrap,
                       SparseRow& row, double& target) {
  const double g = layout.gamma();
  row.clear();
  row.emplace_back(layout.v_index(w.state_at(0)), 1.0);
  target = 0.0;
  double disc = 1.0;
  for (std::size_t t = 0; t < w.size(); ++t) {
    const auto& st = w.steps[t];
    const int s2 = w.state_at(t + 1);
    layout.check_support(st.state, st.action, s2);
    target += disc * st.reward;
    layout.add_advantage(row, st.state, st.action, disc);
    layout.add_nature(row, st.state, st.action, s2, disc * g);
    disc *= g;
  }
  if (!w.end_terminal) {
    if (bootstrap) {
      target += disc * (*bootstrap)[static_cast<std::size_t>(w.end_state)];
    } else {
      row.emplace_back(layout.v_index(w.end_state), -disc);
    }
  }
}

inline FitReport fit_windows(std::span<const Window> windows, const PolicyTable& target,
                             const TransitionModel* model, double gamma, const std::vector<double>* bootstrap) {
  if (windows.empty()) throw FitError("fit: no windows to fit");
  const int S = target.num_states(), A = target.num_actions();
  if (bootstrap && static_cast<int>(bootstrap->size()) != S) throw ConfigError("fit: bootstrap table has wrong size");
  for (const auto& w : windows) {
    if (w.end_state < 0 || w.end_state >= S) throw FitError("fit: state index out of range");
    for (const auto& st : w.steps)
      if (st.state < 0 || st.state >= S || st.action < 0 || st.action >= A) throw FitError("fit: index out of range");
  }
  DecompositionLayout layout(target, model, gamma);
  LeastSquares ls(layout.num_params());
  SparseRow row;
  double y = 0.0;
  std::vector<bool> state_seen(static_cast<std::size_t>(S), false), pair_seen(static_cast<std::size_t>(S * A), false);
  std::vector<bool> terminal_end(static_cast<std::size_t>(S), false);
  for (const auto& w : windows) {
    window_row(layout, w, bootstrap, row, y);
    ls.add_row(row, y, w.weight);
    for (const auto& st : w.steps) {
      state_seen[static_cast<std::size_t>(st.state)] = true;
      pair_seen[static_cast<std::size_t>(st.state * A + st.action)] = true;
    }
    if (w.end_terminal) terminal_end[static_cast<std::size_t>(w.end_state)] = true;
  }
  const auto sol = ls.solve();

  FitReport rep;
  rep.tables = layout.tables(sol.x);
  auto& t = rep.tables;
  for (int s = 0; s < S; ++s) {
    const auto k = static_cast<std::size_t>(s);
    t.v_known[k] = sol.column_touched[k];
    if (terminal_end[k] && !t.v_known[k]) {
      t.V[k] = 0.0;
      t.v_known[k] = true;
    }
  }
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const auto k = static_cast<std::size_t>(s * A + a);
      t.a_known[k] = pair_seen[k];
      if (!pair_seen[k]) continue;
      if (model) {
        t.B.set_row(s, a, layout.nature_row(sol.x, s, a));
      }
    }
  }
  if (!model) {
    // Plain DAE has no nature term: report B = 0 on the observed successors.
    std::vector<std::vector<NatureTable::Entry>> rows(static_cast<std::size_t>(S * A));
    for (const auto& w : windows) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        auto& r = rows[static_cast<std::size_t>(w.steps[i].state * A + w.steps[i].action)];
        const int s2 = w.state_at(i + 1);
        if (std::none_of(r.begin(), r.end(), [&](const auto& e) { return e.first == s2; })) r.emplace_back(s2, 0.0);
      }
    }
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a)
        if (!rows[static_cast<std::size_t>(s * A + a)].empty())
          t.B.set_row(s, a, std::move(rows[static_cast<std::size_t>(s * A + a)]));
  }
  rep.objective_value = sol.objective();
  rep.design_rank = sol.rank;
  rep.num_params = sol.touched;
  rep.unique = sol.unique();
  rep.v_identified.assign(static_cast<std::size_t>(S), false);
  for (int s = 0; s < S; ++s) rep.v_identified[static_cast<std::size_t>(s)] = sol.identified[static_cast<std::size_t>(s)];
  (void)state_seen;
  return rep;
}

inline void check_full_return_windows(std::span<const Window> windows, const std::vector<double>* bootstrap) {
  if (bootstrap) return;
  for (const auto& w : windows)
    if (!w.end_terminal) throw FitError("fit: truncated trajectory with full-return backup and no bootstrap table");
}

}  // namespace detail

/// DAE: least squares over (V, A) with A centred under `target`; B = 0.
/// Without a bootstrap table V_hat itself closes each window.
inline FitReport fit_dae(const Dataset& data, const PolicyTable& target, double gamma, BackupLength n,
                         const std::vector<double>* bootstrap = nullptr) {
  if (data.empty()) throw FitError("fit_dae: empty dataset");
  const auto windows = expand_windows(data, n);
  if (!n) detail::check_full_return_windows(windows, bootstrap);
  return detail::fit_windows(windows, target, nullptr, gamma, bootstrap);
}

/// Off-policy DAE: least squares over (V, A, B) with A centred under `target`
/// and B centred under `model`.
inline FitReport fit_offpolicy_dae(const Dataset& data, const PolicyTable& target, const TransitionModel& model,
                                   double gamma, BackupLength n, const std::vector<double>* bootstrap = nullptr) {
  if (data.empty()) throw FitError("fit_offpolicy_dae: empty dataset");
  const auto windows = expand_windows(data, n);
  if (!n) detail::check_full_return_windows(windows, bootstrap);
  return detail::fit_windows(windows, target, &model, gamma, bootstrap);
}

/// Weighted-window variants (population mode).  Windows are taken as given;
/// non-terminal ends are closed by V_hat unless a bootstrap table is passed.
inline FitReport fit_dae_windows(std::span<const Window> windows, const PolicyTable& target, double gamma,
                                 const std::vector<double>* bootstrap = nullptr) {
  return detail::fit_windows(windows, target, nullptr, gamma, bootstrap);
}

inline FitReport fit_offpolicy_dae_windows(std::span<const Window> windows, const PolicyTable& target,
                                           const TransitionModel& model, double gamma,
                                           const std::vector<double>* bootstrap = nullptr) {
  return detail::fit_windows(windows, target, &model, gamma, bootstrap);
}

}  // namespace offdae

#endif  // OFFDAE_ESTIMATORS_HPP
