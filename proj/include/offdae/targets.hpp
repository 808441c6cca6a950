#ifndef OFFDAE_TARGETS_HPP
#define OFFDAE_TARGETS_HPP

#include <string>
#include <vector>

#include "offdae/errors.hpp"
#include "offdae/estimators.hpp"
#include "offdae/mdp.hpp"
#include "offdae/windows.hpp"

namespace offdae {

enum class CriticMethod { Uncorrected, Dae, OffpolicyDae, Tree };

inline std::string method_name(CriticMethod m) {
  switch (m) {
    case CriticMethod::Uncorrected: return "uncorrected";
    case CriticMethod::Dae: return "dae";
    case CriticMethod::OffpolicyDae: return "offpolicy-dae";
    case CriticMethod::Tree: return "tree";
  }
  return "?";
}

inline CriticMethod parse_method(const std::string& text) {
  if (text == "uncorrected") return CriticMethod::Uncorrected;
  if (text == "dae") return CriticMethod::Dae;
  if (text == "offpolicy-dae" || text == "offpolicy_dae") return CriticMethod::OffpolicyDae;
  if (text == "tree") return CriticMethod::Tree;
  throw ConfigError("unknown method '" + text + "' (expected uncorrected, dae, offpolicy-dae or tree)");
}

/// The window of up to n + 1 transitions that starts at step t.
inline Window window_at(const Trajectory& traj, std::size_t t, BackupLength n) {
  if (t >= traj.size()) throw ConfigError("window_at: start index past the end of the trajectory");
  const std::size_t rest = traj.size() - t;
  const std::size_t L = n ? std::min(rest, static_cast<std::size_t>(*n) + 1) : rest;
  return {std::span<const Step>(traj.steps).subspan(t, L), traj.state_at(t + L), t + L == traj.size() && !traj.truncated,
          1.0};
}

inline double bootstrap_value(const Window& w, const std::vector<double>& values) {
  return w.end_terminal ? 0.0 : values[static_cast<std::size_t>(w.end_state)];
}

/// sum_t g^t r_t + g^L V_target(s_L), with 0 bootstrap at a terminal end.
inline double uncorrected_target(const Window& w, const std::vector<double>& bootstrap, double gamma) {
  double target = 0.0, disc = 1.0;
  for (const auto& st : w.steps) {
    target += disc * st.reward;
    disc *= gamma;
  }
  return target + disc * bootstrap_value(w, bootstrap);
}

/// Tree-backup target for (s_0, a_0), computed backwards from the window end:
///   G_t = r_t + g [ sum_{a != a_{t+1}} pi(a|s_{t+1}) Q(s_{t+1}, a) + pi(a_{t+1}|s_{t+1}) G_{t+1} ]
/// with the last step closed by the expected Q under pi (0 at a terminal).
/// `q_target` is row-major S x A.
inline double tree_backup_target(const Window& w, const std::vector<double>& q_target, const PolicyTable& target,
                                 double gamma) {
  if (w.size() == 0) throw ConfigError("tree_backup_target: empty window");
  const int A = target.num_actions();
  auto q = [&](int s, int a) { return q_target[static_cast<std::size_t>(s * A + a)]; };
  double g = 0.0;
  if (!w.end_terminal) {
    for (int a = 0; a < A; ++a) g += target(w.end_state, a) * q(w.end_state, a);
  }
  for (std::size_t k = w.size(); k-- > 0;) {
    const auto& st = w.steps[k];
    g = st.reward + gamma * g;
    if (k == 0) break;
    // Bracket for step k - 1: off-path actions at s_k bootstrap from Q.
    double mix = 0.0;
    for (int a = 0; a < A; ++a)
      if (a != st.action) mix += target(st.state, a) * q(st.state, a);
    g = mix + target(st.state, st.action) * g;
  }
  return g;
}

/// Regression target for V(s_0) in the family
///   uncorrected - sum_t g^t A(s_t, a_t) - sum_t g^(t+1) B(s_t, a_t, s_{t+1}),
/// truncated after the A term for dae and before it for uncorrected.
inline double critic_target_hierarchy(const Window& w, const DecompositionTables& tables,
                                      const std::vector<double>& bootstrap, double gamma, CriticMethod method) {
  if (method == CriticMethod::Tree) throw ConfigError("critic_target_hierarchy: tree backup is not part of the family");
  double target = uncorrected_target(w, bootstrap, gamma);
  if (method == CriticMethod::Uncorrected) return target;
  if (tables.A.empty()) throw ConfigError("critic_target_hierarchy: advantage table missing");
  double disc = 1.0;
  for (std::size_t t = 0; t < w.size(); ++t) {
    const auto& st = w.steps[t];
    target -= disc * tables.a(st.state, st.action);
    if (method == CriticMethod::OffpolicyDae) {
      const int s2 = w.state_at(t + 1);
      if (!tables.B.has(st.state, st.action, s2)) {
        throw ConfigError("critic_target_hierarchy: nature table has no entry for (" + std::to_string(st.state) +
                          "," + std::to_string(st.action) + "," + std::to_string(s2) + ")");
      }
      target -= disc * gamma * tables.B.at(st.state, st.action, s2);
    }
    disc *= gamma;
  }
  return target;
}

}  // namespace offdae

#endif  // OFFDAE_TARGETS_HPP
