#ifndef OFFDAE_WINDOWS_HPP
#define OFFDAE_WINDOWS_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "offdae/errors.hpp"
#include "offdae/mdp.hpp"

namespace offdae {

/// Backup length n: a window spans n + 1 transitions.  nullopt means the full
/// remaining episode.
using BackupLength = std::optional<int>;
inline constexpr BackupLength kFullReturn = std::nullopt;

inline std::string backup_name(BackupLength n) { return n ? std::to_string(*n) : std::string("inf"); }

inline BackupLength parse_backup(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "full") return kFullReturn;
  std::size_t used = 0;
  int n = -1;
  try {
    n = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || n < 0) throw ConfigError("backup length must be a non-negative integer or 'inf': " + text);
  return n;
}

/// A contiguous piece of an episode used as one regression sample.  The
/// steps are borrowed; the owner must outlive the window.
struct Window {
  std::span<const Step> steps;
  int end_state = 0;
  bool end_terminal = false;  // end_state is terminal: bootstrap value 0
  double weight = 1.0;

  std::size_t size() const { return steps.size(); }
  int state_at(std::size_t t) const { return t < steps.size() ? steps[t].state : end_state; }
};

/// Sub-trajectory expansion.  With a finite n every time step of every
/// episode starts a window of up to n + 1 transitions; with n = inf each
/// episode contributes one window.  Empty episodes contribute nothing.
inline std::vector<Window> expand_windows(const Dataset& data, BackupLength n) {
  if (n && *n < 0) throw ConfigError("backup length must be >= 0");
  std::vector<Window> out;
  for (const auto& traj : data.trajectories) {
    const std::size_t T = traj.size();
    if (T == 0) continue;
    if (!n) {
      out.push_back({std::span<const Step>(traj.steps), traj.final_state, !traj.truncated, 1.0});
      continue;
    }
    const std::size_t len = static_cast<std::size_t>(*n) + 1;
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t L = std::min(len, T - t);
      out.push_back({std::span<const Step>(traj.steps).subspan(t, L), traj.state_at(t + L),
                     t + L == T && !traj.truncated, 1.0});
    }
  }
  return out;
}

/// An episode (or window) together with its probability weight.
struct WeightedTrajectory {
  Trajectory traj;
  double weight = 1.0;
};

/// Each weighted trajectory becomes exactly one window.
inline std::vector<Window> as_windows(std::span<const WeightedTrajectory> items) {
  std::vector<Window> out;
  out.reserve(items.size());
  for (const auto& w : items) {
    if (w.traj.size() == 0) continue;
    out.push_back({std::span<const Step>(w.traj.steps), w.traj.final_state, !w.traj.truncated, w.weight});
  }
  return out;
}

}  // namespace offdae

#endif  // OFFDAE_WINDOWS_HPP
