#ifndef OFFDAE_FEATURES_HPP
#define OFFDAE_FEATURES_HPP

#include <compare>
#include <map>

#include "offdae/mdp.hpp"

namespace offdae {

enum class FeatureMode { StartState, StateAction, Transition };

/// Feature id: (s) for start-state indicators, (s, a) for state-action
/// occupancy, (s, a, s2) for transition occupancy.  Unused slots are -1.
struct FeatureKey {
  int s = -1;
  int a = -1;
  int s2 = -1;

  auto operator<=>(const FeatureKey&) const = default;
};

using FeatureVector = std::map<FeatureKey, double>;

/// Trajectory features for the regression view of return estimation:
/// start-state indicator, or discounted occupancies sum_t gamma^t 1(...).
inline FeatureVector build_features(const Trajectory& traj, double gamma, FeatureMode mode) {
  FeatureVector phi;
  if (mode == FeatureMode::StartState) {
    phi[{traj.state_at(0), -1, -1}] = 1.0;
    return phi;
  }
  double w = 1.0;
  for (std::size_t t = 0; t < traj.size() && w != 0.0; ++t) {
    const auto& st = traj.steps[t];
    const FeatureKey key = mode == FeatureMode::StateAction ? FeatureKey{st.state, st.action, -1}
                                                            : FeatureKey{st.state, st.action, traj.state_at(t + 1)};
    phi[key] += w;
    w *= gamma;
  }
  return phi;
}

}  // namespace offdae

#endif  // OFFDAE_FEATURES_HPP
