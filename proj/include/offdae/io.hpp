#ifndef OFFDAE_IO_HPP
#define OFFDAE_IO_HPP

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "offdae/actor_critic.hpp"
#include "offdae/errors.hpp"
#include "offdae/estimators.hpp"
#include "offdae/mdp.hpp"

// Plain-text formats.
//
// MDP file: one `key = values...` per line, `#` starts a comment.
//   num_states  S
//   num_actions A
//   discount    g
//   initial     S numbers
//   terminal    S flags (0/1)
//   available   S*A flags (optional, default all 1)
//   reward      S*A numbers, index s*A + a
//   transition  S*A*S numbers, index (s*A + a)*S + s2
//
// Dataset file: one trajectory per line, `s a r s a r ... s_final T|X`.

namespace offdae {

/// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed: " + path);
}

/// `key = value` lines; blank lines and `#` comments ignored.
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

inline std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError(what + ": not a number: " + tok);
    }
  }
  return out;
}

template <class T>
std::string join_numbers(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ' ';
    if constexpr (std::is_same_v<T, bool>) {
      out += xs[i] ? "1" : "0";
    } else {
      out += format_double(static_cast<double>(xs[i]));
    }
  }
  return out;
}

inline std::string write_mdp(const FiniteMdp& mdp) {
  std::string out;
  out += "num_states = " + std::to_string(mdp.num_states()) + "\n";
  out += "num_actions = " + std::to_string(mdp.num_actions()) + "\n";
  out += "discount = " + format_double(mdp.discount()) + "\n";
  out += "initial = " + join_numbers(mdp.initial_dist()) + "\n";
  out += "terminal = " + join_numbers(mdp.terminal_flags()) + "\n";
  out += "available = " + join_numbers(mdp.availability()) + "\n";
  out += "reward = " + join_numbers(mdp.reward_table()) + "\n";
  out += "transition = " + join_numbers(mdp.transition_tensor()) + "\n";
  return out;
}

inline FiniteMdp read_mdp(const std::string& text) {
  const auto kv = parse_key_values(text);
  auto need = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("mdp file: missing key '" + key + "'");
    return it->second;
  };
  auto as_int = [&](const std::string& key) {
    const auto v = parse_numbers(need(key), key);
    if (v.size() != 1 || v[0] != static_cast<int>(v[0])) throw ConfigError("mdp file: " + key + " must be an integer");
    return static_cast<int>(v[0]);
  };
  auto as_flags = [&](const std::vector<double>& v) {
    std::vector<bool> out;
    for (double x : v) out.push_back(x != 0.0);
    return out;
  };
  const auto discount = parse_numbers(need("discount"), "discount");
  if (discount.size() != 1) throw ConfigError("mdp file: discount must be one number");
  std::vector<bool> available;
  if (kv.count("available")) available = as_flags(parse_numbers(kv.at("available"), "available"));
  return FiniteMdp(as_int("num_states"), as_int("num_actions"), parse_numbers(need("transition"), "transition"),
                   parse_numbers(need("reward"), "reward"), discount[0], parse_numbers(need("initial"), "initial"),
                   as_flags(parse_numbers(need("terminal"), "terminal")), available);
}

inline std::string write_dataset(const Dataset& data) {
  std::string out;
  for (const auto& traj : data.trajectories) {
    for (const auto& st : traj.steps)
      out += std::to_string(st.state) + ' ' + std::to_string(st.action) + ' ' + format_double(st.reward) + ' ';
    out += std::to_string(traj.final_state) + (traj.truncated ? " X\n" : " T\n");
  }
  return out;
}

inline Dataset read_dataset(const std::string& text) {
  Dataset data;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = "dataset line " + std::to_string(lineno);
    if (tok.size() < 2 || (tok.size() - 2) % 3 != 0 || (tok.back() != "T" && tok.back() != "X")) {
      throw ConfigError(where + ": expected `s a r ... s_final T|X`");
    }
    Trajectory traj;
    auto to_int = [&](const std::string& t) {
      std::size_t used = 0;
      int v = -1;
      try {
        v = std::stoi(t, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != t.size() || v < 0) throw ConfigError(where + ": bad index " + t);
      return v;
    };
    for (std::size_t i = 0; i + 2 < tok.size(); i += 3) {
      traj.steps.push_back({to_int(tok[i]), to_int(tok[i + 1]), parse_numbers(tok[i + 2], where)[0]});
    }
    traj.final_state = to_int(tok[tok.size() - 2]);
    traj.truncated = tok.back() == "X";
    data.trajectories.push_back(std::move(traj));
  }
  return data;
}

/// `entity,index,value` rows for V (s), A (s:a) and B (s:a:s2); absent
/// entries are skipped.
inline std::string fit_report_csv(const FitReport& rep) {
  const auto& t = rep.tables;
  std::string out = "entity,index,value\n";
  for (int s = 0; s < t.num_states; ++s)
    if (t.v_known[static_cast<std::size_t>(s)]) out += "V," + std::to_string(s) + "," + format_double(t.v(s)) + "\n";
  for (int s = 0; s < t.num_states; ++s)
    for (int a = 0; a < t.num_actions; ++a)
      if (t.a_known[static_cast<std::size_t>(s * t.num_actions + a)])
        out += "A," + std::to_string(s) + ":" + std::to_string(a) + "," + format_double(t.a(s, a)) + "\n";
  for (int s = 0; s < t.num_states; ++s)
    for (int a = 0; a < t.num_actions; ++a)
      for (const auto& [s2, b] : t.B.row(s, a))
        out += "B," + std::to_string(s) + ":" + std::to_string(a) + ":" + std::to_string(s2) + "," + format_double(b) +
               "\n";
  out += "objective,," + format_double(rep.objective_value) + "\n";
  out += "rank,," + std::to_string(rep.design_rank) + "\n";
  out += "params,," + std::to_string(rep.num_params) + "\n";
  out += std::string("unique,,") + (rep.unique ? "1" : "0") + "\n";
  return out;
}

inline std::string curve_csv(const LearningCurve& curve) {
  std::string out = "step,mean_return,stderr\n";
  for (const auto& p : curve.points)
    out += std::to_string(p.step) + "," + format_double(p.mean_return) + "," + format_double(p.stderr_return) + "\n";
  return out;
}

/// Checkpoint: `key = values` lines holding dimensions, counters and every
/// raw table (current and EMA).  The replay buffer is not stored.
inline std::string write_checkpoint(const AgentState& agent) {
  std::string out;
  out += "num_states = " + std::to_string(agent.num_states) + "\n";
  out += "num_actions = " + std::to_string(agent.num_actions) + "\n";
  out += "env_steps = " + std::to_string(agent.env_steps) + "\n";
  out += "updates = " + std::to_string(agent.updates) + "\n";
  auto tables = [&](const std::string& prefix, const CriticParams& p) {
    out += prefix + "logits = " + join_numbers(p.logits) + "\n";
    out += prefix + "value = " + join_numbers(p.value) + "\n";
    out += prefix + "advantage = " + join_numbers(p.adv) + "\n";
    out += prefix + "nature = " + join_numbers(p.nature) + "\n";
  };
  tables("", agent.params);
  tables("ema_", agent.ema);
  return out;
}

/// Restores the tables of `agent` (which must already have the right shape).
inline void read_checkpoint(const std::string& text, AgentState& agent) {
  const auto kv = parse_key_values(text);
  auto need = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("checkpoint: missing key '" + key + "'");
    return parse_numbers(it->second, key);
  };
  if (need("num_states") != std::vector<double>{static_cast<double>(agent.num_states)} ||
      need("num_actions") != std::vector<double>{static_cast<double>(agent.num_actions)}) {
    throw ConfigError("checkpoint: shape does not match the agent");
  }
  agent.env_steps = static_cast<std::int64_t>(need("env_steps").at(0));
  agent.updates = static_cast<std::int64_t>(need("updates").at(0));
  auto load = [&](const std::string& key, std::vector<double>& dst) {
    auto v = need(key);
    if (v.size() != dst.size()) throw ConfigError("checkpoint: table '" + key + "' has wrong size");
    dst = std::move(v);
  };
  for (const std::string prefix : {"", "ema_"}) {
    CriticParams& p = prefix.empty() ? agent.params : agent.ema;
    load(prefix + "logits", p.logits);
    load(prefix + "value", p.value);
    load(prefix + "advantage", p.adv);
    load(prefix + "nature", p.nature);
  }
}

/// Applies `key = value` settings to a training config.  Unknown keys are
/// rejected.
inline void apply_train_settings(const std::map<std::string, std::string>& kv, TrainConfig& c) {
  for (const auto& [key, value] : kv) {
    auto num = [&] {
      const auto v = parse_numbers(value, key);
      if (v.size() != 1) throw ConfigError("config: " + key + " expects one number");
      return v[0];
    };
    auto integer = [&] {
      const double v = num();
      if (v != static_cast<double>(static_cast<long long>(v))) throw ConfigError("config: " + key + " must be an integer");
      return static_cast<int>(v);
    };
    if (key == "method") c.method = parse_method(value);
    else if (key == "n") c.n = integer();
    else if (key == "gamma") c.gamma = num();
    else if (key == "learning_rate") c.learning_rate = num();
    else if (key == "tau") c.tau = num();
    else if (key == "beta_kl") c.beta_kl = num();
    else if (key == "batch_size") c.batch_size = integer();
    else if (key == "steps_per_update") c.steps_per_update = integer();
    else if (key == "buffer_capacity") c.buffer_capacity = integer();
    else if (key == "initial_steps") c.initial_steps = integer();
    else if (key == "total_steps") c.total_steps = integer();
    else if (key == "num_actors") c.num_actors = integer();
    else if (key == "max_episode_steps") c.max_episode_steps = integer();
    else if (key == "eval_interval") c.eval_interval = integer();
    else if (key == "eval_episodes") c.eval_episodes = integer();
    else if (key == "learn_policy") c.learn_policy = integer() != 0;
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(integer());
    else if (key == "transition_model") {
      if (value == "oracle") c.transition_model = TransitionModel::Kind::Oracle;
      else if (value == "empirical") c.transition_model = TransitionModel::Kind::Empirical;
      else throw ConfigError("config: transition_model must be oracle or empirical");
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
}

}  // namespace offdae

#endif  // OFFDAE_IO_HPP
