#ifndef OFFDAE_EXPERIMENTS_HPP
#define OFFDAE_EXPERIMENTS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "offdae/actor_critic.hpp"
#include "offdae/analysis.hpp"
#include "offdae/environments.hpp"
#include "offdae/errors.hpp"
#include "offdae/estimators.hpp"
#include "offdae/io.hpp"
#include "offdae/rng.hpp"
#include "offdae/svg.hpp"

namespace offdae {

/// Files produced by an experiment, keyed by file name, plus a short text
/// summary and the exit code the CLI should return.
struct ExperimentResult {
  std::map<std::string, std::string> files;
  std::string summary;
  int exit_code = 0;
};

inline const std::vector<int>& default_sample_grid() {
  static const std::vector<int> grid = {10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000};
  return grid;
}

/// Named environments for the sample/fit/train commands.
inline FiniteMdp env_by_name(const std::string& name) {
  if (name == "fig3") return envs::fig3();
  if (name == "fig4") return envs::fig4();
  if (name == "fig4-deterministic") return envs::fig4(0.0);
  if (name == "counterexample") return envs::counterexample();
  if (name == "chain") return envs::chain();
  if (name == "gridworld") return envs::gridworld(5, 5, 0.2);
  if (name == "gridworld-deterministic") return envs::gridworld(5, 5, 0.0);
  throw ConfigError("unknown environment '" + name +
                    "' (expected fig3, fig4, fig4-deterministic, counterexample, chain, gridworld, "
                    "gridworld-deterministic)");
}

struct SampleStats {
  int count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // n - 1 denominator
  double stderr_mean = 0.0;
};

inline SampleStats sample_stats(const std::vector<double>& xs) {
  SampleStats st;
  st.count = static_cast<int>(xs.size());
  if (xs.empty()) return st;
  for (double x : xs) st.mean += x;
  st.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - st.mean) * (x - st.mean);
    st.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    st.stderr_mean = st.stddev / std::sqrt(static_cast<double>(xs.size()));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Start-state value estimation sweeps

struct SweepSpec {
  std::uint64_t seed = 0;
  int num_seeds = 1000;
  std::vector<int> sample_grid = default_sample_grid();
};

namespace detail {

using Estimator = std::function<ValueEstimate(const Dataset&)>;

inline ValueEstimate identified_values(const FitReport& rep) {
  ValueEstimate out(rep.tables.V.size());
  for (std::size_t s = 0; s < out.size(); ++s)
    if (rep.tables.v_known[s] && rep.v_identified[s]) out[s] = rep.tables.V[s];
  return out;
}

/// Runs every estimator on the same data for each (seed index, sample count)
/// and tabulates the start-state estimates.
/// CSV: estimator,state,samples,present,mean,std
inline std::string value_sweep_csv(const FiniteMdp& mdp, const PolicyTable& behavior, const SweepSpec& spec,
                                   const std::vector<std::pair<std::string, Estimator>>& estimators,
                                   const std::vector<int>& states) {
  if (spec.num_seeds <= 0) throw ConfigError("need at least one seed");
  if (spec.sample_grid.empty()) throw ConfigError("sample grid is empty");
  for (int k : spec.sample_grid)
    if (k <= 0) throw ConfigError("sample counts must be positive");
  const std::size_t E = estimators.size(), G = spec.sample_grid.size(), K = states.size();
  // values[e][g][k] collects the present estimates over seeds.
  std::vector<std::vector<std::vector<std::vector<double>>>> values(
      E, std::vector<std::vector<std::vector<double>>>(G, std::vector<std::vector<double>>(K)));
  for (std::size_t g = 0; g < G; ++g) {
    const int count = spec.sample_grid[g];
    for (int i = 0; i < spec.num_seeds; ++i) {
      const auto data = sample_dataset(mdp, behavior,
                                       derive_seed(spec.seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(count)}),
                                       static_cast<std::size_t>(count), 1000);
      for (std::size_t e = 0; e < E; ++e) {
        const auto v = estimators[e].second(data);
        for (std::size_t k = 0; k < K; ++k)
          if (const auto& x = v[static_cast<std::size_t>(states[k])]) values[e][g][k].push_back(*x);
      }
    }
  }
  std::string csv = "estimator,state,samples,present,mean,std\n";
  for (std::size_t e = 0; e < E; ++e)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t g = 0; g < G; ++g) {
        const auto st = sample_stats(values[e][g][k]);
        csv += estimators[e].first + "," + std::to_string(states[k]) + "," + std::to_string(spec.sample_grid[g]) + "," +
               std::to_string(st.count) + "," + (st.count ? format_double(st.mean) : "") + "," +
               (st.count > 1 ? format_double(st.stddev) : "") + "\n";
      }
  return csv;
}

inline std::string value_sweep_svg(const std::string& csv, int state, const std::string& title, double reference) {
  ChartColumns cols;
  cols.x = "samples";
  cols.y = "mean";
  cols.band = "std";
  cols.group = {"estimator"};
  cols.filter = {{"state", std::to_string(state)}};
  auto chart = chart_from_csv(parse_csv(csv), cols);
  chart.title = title;
  chart.log_x = true;
  chart.reference = reference;
  return render_line_chart(chart);
}

/// Per-(estimator, state, samples) row lookup on a sweep CSV.
struct SweepRow {
  int present = 0;
  std::optional<double> mean, std;
};

inline std::map<std::tuple<std::string, int, int>, SweepRow> read_sweep(const std::string& csv) {
  const auto t = parse_csv(csv);
  const int ec = t.column("estimator"), sc = t.column("state"), nc = t.column("samples"), pc = t.column("present"),
            mc = t.column("mean"), dc = t.column("std");
  std::map<std::tuple<std::string, int, int>, SweepRow> out;
  for (const auto& r : t.rows) {
    SweepRow row;
    row.present = std::stoi(r[static_cast<std::size_t>(pc)]);
    if (!r[static_cast<std::size_t>(mc)].empty()) row.mean = std::stod(r[static_cast<std::size_t>(mc)]);
    if (!r[static_cast<std::size_t>(dc)].empty()) row.std = std::stod(r[static_cast<std::size_t>(dc)]);
    out[{r[static_cast<std::size_t>(ec)], std::stoi(r[static_cast<std::size_t>(sc)]),
         std::stoi(r[static_cast<std::size_t>(nc)])}] = row;
  }
  return out;
}

}  // namespace detail

/// MC, batch TD(0) and full-return DAE on the two-start-state MDP under the
/// uniform policy.  State 0 is the frequent start, state 1 the rare one.
inline ExperimentResult run_fig3(const SweepSpec& spec) {
  const auto mdp = envs::fig3();
  const auto pi = PolicyTable::uniform(mdp);
  const std::vector<std::pair<std::string, detail::Estimator>> estimators = {
      {"mc", [](const Dataset& d) { return fit_mc(d, 1.0, 4); }},
      {"td0", [](const Dataset& d) { return fit_batch_td0(d, 1.0, 4); }},
      {"dae", [&](const Dataset& d) { return detail::identified_values(fit_dae(d, pi, 1.0, kFullReturn)); }},
  };
  ExperimentResult res;
  const auto csv = detail::value_sweep_csv(mdp, pi, spec, estimators, {0, 1});
  res.files["fig3.csv"] = csv;
  res.files["fig3_state0.svg"] = detail::value_sweep_svg(csv, 0, "Frequent start state", 0.5);
  res.files["fig3_state1.svg"] = detail::value_sweep_svg(csv, 1, "Rare start state", 0.5);
  res.summary = "wrote fig3.csv (" + std::to_string(spec.num_seeds) + " seeds)\n";
  return res;
}

/// DAE and off-policy DAE (empirical and oracle transition models) on the
/// two-start-state MDP followed by a fair coin flip.
inline ExperimentResult run_fig4(const SweepSpec& spec, double p_high = 0.5) {
  const auto mdp = envs::fig4(p_high);
  const auto pi = PolicyTable::uniform(mdp);
  const auto oracle = TransitionModel::oracle(mdp);
  const int S = mdp.num_states(), A = mdp.num_actions();
  const std::vector<std::pair<std::string, detail::Estimator>> estimators = {
      {"dae", [&](const Dataset& d) { return detail::identified_values(fit_dae(d, pi, 1.0, kFullReturn)); }},
      {"offpolicy-dae-empirical",
       [&](const Dataset& d) {
         return detail::identified_values(fit_offpolicy_dae(d, pi, estimate_transitions(d, S, A), 1.0, kFullReturn));
       }},
      {"offpolicy-dae-oracle",
       [&](const Dataset& d) { return detail::identified_values(fit_offpolicy_dae(d, pi, oracle, 1.0, kFullReturn)); }},
  };
  ExperimentResult res;
  const auto csv = detail::value_sweep_csv(mdp, pi, spec, estimators, {0, 1});
  const double reference = policy_evaluation_exact(mdp, pi)[0];
  res.files["fig4.csv"] = csv;
  res.files["fig4_state0.svg"] = detail::value_sweep_svg(csv, 0, "Frequent start state", reference);
  res.files["fig4_state1.svg"] = detail::value_sweep_svg(csv, 1, "Rare start state", reference);
  res.summary = "wrote fig4.csv (" + std::to_string(spec.num_seeds) + " seeds)\n";
  return res;
}

// ---------------------------------------------------------------------------
// Counterexample grid

struct CounterexampleSpec {
  std::vector<double> mu_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<double> pi_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double tolerance = 1e-8;
};

/// Closed form against the population plain-DAE solver at every grid point.
/// CSV: mu_u,pi_u,v_closed_form,v_solver,v_pi,bias,abs_diff
inline ExperimentResult run_counterexample(const CounterexampleSpec& spec) {
  for (double m : spec.mu_grid)
    if (!(m > 0.0 && m < 1.0)) throw DomainError("counterexample: mu_u must lie strictly between 0 and 1");
  const auto mdp = envs::counterexample();
  ExperimentResult res;
  std::string csv = "mu_u,pi_u,v_closed_form,v_solver,v_pi,bias,abs_diff\n";
  double worst = 0.0;
  for (double m : spec.mu_grid)
    for (double p : spec.pi_grid) {
      const auto cf = counterexample_closed_form(m, p);
      const auto rep = fit_dae_population(mdp, envs::counterexample_policy(m), envs::counterexample_policy(p), kFullReturn);
      const double v_hat = rep.tables.v(0);
      const double diff = std::abs(v_hat - cf.v_star);
      worst = std::max(worst, diff);
      csv += format_double(m) + "," + format_double(p) + "," + format_double(cf.v_star) + "," + format_double(v_hat) +
             "," + format_double(cf.v_pi) + "," + format_double(v_hat - cf.v_pi) + "," + format_double(diff) + "\n";
    }
  res.files["counterexample.csv"] = csv;
  const bool ok = worst <= spec.tolerance;
  res.summary = std::string(ok ? "PASS" : "FAIL") + " counterexample: max |solver - closed form| = " +
                format_double(worst) + "\n";
  res.exit_code = ok ? 0 : 1;
  return res;
}

// ---------------------------------------------------------------------------
// Identity verification on random instances

struct VerifySpec {
  std::uint64_t seed = 0;
  int instances = 100;
  int trajectories = 100;           // per instance, for the residual and hierarchy checks
  double perturb_advantage = 0.0;   // fault injection
  int nonexplorative_every = 0;     // every k-th instance gets a behaviour policy that never takes action 0 in state 0
  double tol_recovery = 1e-8;
  double tol_residual = 1e-9;
  double tol_improvement = 1e-9;
  double tol_hierarchy = 1e-12;
};

struct VerifyInstance {
  FiniteMdp mdp;
  PolicyTable behavior;
  PolicyTable target;
};

/// Instance i of a verify run: 3..6 states (one terminal), 2..3 actions.
inline VerifyInstance verify_instance(const VerifySpec& spec, int i) {
  const auto idx = static_cast<std::uint64_t>(i);
  Rng rng = make_rng(derive_seed(spec.seed, {idx, 0}));
  const int S = 3 + static_cast<int>(rng() % 4);
  const int A = 2 + static_cast<int>(rng() % 2);
  auto mdp = envs::random(derive_seed(spec.seed, {idx, 1}), S, A);
  auto mu = envs::random_policy(mdp, derive_seed(spec.seed, {idx, 2}));
  auto pi = envs::random_policy(mdp, derive_seed(spec.seed, {idx, 3}));
  if (spec.nonexplorative_every > 0 && i % spec.nonexplorative_every == spec.nonexplorative_every - 1) {
    auto probs = mu.table();
    const double rest = 1.0 - probs[0];
    probs[0] = 0.0;
    for (int a = 1; a < A; ++a) probs[static_cast<std::size_t>(a)] /= rest;
    double sum = 0.0;
    for (int a = 1; a < A; ++a) sum += probs[static_cast<std::size_t>(a)];
    probs[static_cast<std::size_t>(A - 1)] += 1.0 - sum;
    mu = PolicyTable(S, A, std::move(probs));
  }
  return {std::move(mdp), std::move(mu), std::move(pi)};
}

/// CSV verify_recovery.csv:
///   instance,num_states,num_actions,n,explorative,unique,rank,params,max_error_v,max_error_a,max_error_b,status
/// CSV verify_identities.csv:
///   instance,decomposition_residual,policy_improvement,hierarchy_cases,hierarchy_deviation,status
/// Status is PASS, FAIL or SKIP (behaviour policy not explorative).
inline ExperimentResult run_verify(const VerifySpec& spec) {
  if (spec.instances <= 0) throw ConfigError("verify: need at least one instance");
  ExperimentResult res;
  std::string recovery_csv =
      "instance,num_states,num_actions,n,explorative,unique,rank,params,max_error_v,max_error_a,max_error_b,status\n";
  std::string identity_csv = "instance,decomposition_residual,policy_improvement,hierarchy_cases,hierarchy_deviation,status\n";
  int pass = 0, fail = 0, skip = 0;
  double worst_v = 0.0, worst_a = 0.0, worst_b = 0.0, worst_res = 0.0, worst_imp = 0.0, worst_hier = 0.0;
  std::size_t hierarchy_cases = 0;
  for (int i = 0; i < spec.instances; ++i) {
    const auto inst = verify_instance(spec, i);
    const auto& mdp = inst.mdp;
    const std::string prefix = std::to_string(i) + "," + std::to_string(mdp.num_states()) + "," +
                               std::to_string(mdp.num_actions()) + ",";
    const bool explorative = unreached_transitions(mdp, inst.behavior).empty();
    for (BackupLength n : {BackupLength(0), BackupLength(1), BackupLength(2), kFullReturn}) {
      if (!explorative) {
        recovery_csv += prefix + backup_name(n) + ",0,,,,,,,SKIP\n";
        ++skip;
        continue;
      }
      const auto rep = verify_recovery(mdp, inst.behavior, inst.target, n, spec.perturb_advantage);
      const bool ok = rep.passed(spec.tol_recovery);
      ok ? ++pass : ++fail;
      worst_v = std::max(worst_v, rep.max_error_v);
      worst_a = std::max(worst_a, rep.max_error_a);
      worst_b = std::max(worst_b, rep.max_error_b);
      recovery_csv += prefix + backup_name(n) + ",1," + (rep.unique ? "1" : "0") + "," + std::to_string(rep.design_rank) +
                     "," + std::to_string(rep.num_params) + "," + format_double(rep.max_error_v) + "," +
                     format_double(rep.max_error_a) + "," + format_double(rep.max_error_b) + "," +
                     (ok ? "PASS" : "FAIL") + "\n";
    }

    const auto exact = DecompositionTables::exact(mdp, inst.target);
    const auto data = sample_dataset(mdp, inst.behavior, derive_seed(spec.seed, {static_cast<std::uint64_t>(i), 4}),
                                     static_cast<std::size_t>(spec.trajectories), 100000);
    double residual = 0.0;
    for (const auto& traj : data.trajectories)
      residual = std::max(residual, std::abs(decomposition_residual(traj, exact.V, exact.A, exact.B, mdp.discount())));
    const double improvement = policy_improvement_check(mdp, inst.behavior, inst.target);
    std::size_t cases = 0;
    double hier = 0.0;
    for (BackupLength n : {BackupLength(0), BackupLength(1), BackupLength(2), kFullReturn}) {
      const auto h = hierarchy_check(exact, data, mdp.discount(), n);
      cases += h.windows;
      hier = std::max(hier, h.max_deviation());
    }
    hierarchy_cases += cases;
    const bool ok = residual < spec.tol_residual && improvement < spec.tol_improvement && hier <= spec.tol_hierarchy;
    ok ? ++pass : ++fail;
    worst_res = std::max(worst_res, residual);
    worst_imp = std::max(worst_imp, improvement);
    worst_hier = std::max(worst_hier, hier);
    identity_csv += std::to_string(i) + "," + format_double(residual) + "," + format_double(improvement) + "," +
                    std::to_string(cases) + "," + format_double(hier) + "," + (ok ? "PASS" : "FAIL") + "\n";
  }
  res.files["verify_recovery.csv"] = recovery_csv;
  res.files["verify_identities.csv"] = identity_csv;
  res.exit_code = fail ? 1 : 0;
  res.summary = std::string(fail ? "FAIL" : "PASS") + " verify: " + std::to_string(pass) + " passed, " +
                std::to_string(fail) + " failed, " + std::to_string(skip) + " skipped (not explorative)\n" +
                "  max_error_v " + format_double(worst_v) + "  max_error_a " + format_double(worst_a) +
                "  max_error_b " + format_double(worst_b) + "\n" + "  max decomposition residual " +
                format_double(worst_res) + "  max improvement residual " + format_double(worst_imp) +
                "  hierarchy " + format_double(worst_hier) + " over " + std::to_string(hierarchy_cases) +
                " windows\n";
  return res;
}

// ---------------------------------------------------------------------------
// Actor-critic comparisons

struct TrainSpec {
  std::string env = "gridworld";
  int width = 5;
  int height = 5;
  double slip = 0.2;
  int chain_length = 4;
  int final_checkpoints = 5;  // per-seed final return = mean of the last k checkpoints
  std::vector<CriticMethod> methods = {CriticMethod::Uncorrected, CriticMethod::Dae, CriticMethod::OffpolicyDae,
                                       CriticMethod::Tree};
  std::vector<std::uint64_t> seeds;
  TrainConfig config;
};

/// Reads `key = value` text into a TrainSpec: the environment keys (env,
/// width, height, slip, chain_length, final_checkpoints) plus every
/// TrainConfig key.
inline TrainSpec parse_train_spec(const std::string& text) {
  TrainSpec spec;
  auto kv = parse_key_values(text);
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    auto v = it->second;
    kv.erase(it);
    return v;
  };
  auto to_int = [](const std::string& key, const std::string& v) {
    const auto xs = parse_numbers(v, key);
    if (xs.size() != 1 || xs[0] != std::floor(xs[0])) throw ConfigError("config: " + key + " must be an integer");
    return static_cast<int>(xs[0]);
  };
  if (auto v = take("env")) spec.env = *v;
  if (auto v = take("width")) spec.width = to_int("width", *v);
  if (auto v = take("height")) spec.height = to_int("height", *v);
  if (auto v = take("chain_length")) spec.chain_length = to_int("chain_length", *v);
  if (auto v = take("final_checkpoints")) spec.final_checkpoints = to_int("final_checkpoints", *v);
  if (auto v = take("slip")) {
    const auto xs = parse_numbers(*v, "slip");
    if (xs.size() != 1) throw ConfigError("config: slip expects one number");
    spec.slip = xs[0];
  }
  apply_train_settings(kv, spec.config);
  if (spec.final_checkpoints <= 0) throw ConfigError("config: final_checkpoints must be positive");
  return spec;
}

inline FiniteMdp train_environment(const TrainSpec& spec) {
  if (spec.env == "gridworld") return envs::gridworld(spec.width, spec.height, spec.slip, spec.config.gamma);
  if (spec.env == "chain") return envs::chain(spec.chain_length, spec.config.gamma);
  throw ConfigError("config: env must be gridworld or chain");
}

struct MethodSummary {
  CriticMethod method;
  SampleStats final_return;  // over seeds
};

/// sqrt(se_a^2 + se_b^2): standard error of the difference of two
/// independent means.
inline double pooled_stderr(const SampleStats& a, const SampleStats& b) {
  return std::sqrt(a.stderr_mean * a.stderr_mean + b.stderr_mean * b.stderr_mean);
}

/// Fraction of common checkpoints where the mean +- stderr bands of two
/// aggregated curves intersect.
inline double band_overlap_fraction(const std::vector<std::pair<double, double>>& a,
                                    const std::vector<std::pair<double, double>>& b) {
  const std::size_t m = std::min(a.size(), b.size());
  if (m == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double lo = std::max(a[i].first - a[i].second, b[i].first - b[i].second);
    const double hi = std::min(a[i].first + a[i].second, b[i].first + b[i].second);
    if (lo <= hi) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(m);
}

struct TrainOutcome {
  ExperimentResult result;
  std::vector<MethodSummary> finals;
  std::map<CriticMethod, std::vector<std::pair<double, double>>> curves;  // (mean, stderr) per checkpoint
};

/// Trains every (method, seed) pair.
/// CSV train_runs.csv:   method,seed,step,mean_return,stderr_return (greedy evaluation of one run)
/// CSV train_curves.csv: method,step,mean_return,stderr (across seeds)
/// CSV train_final.csv:  method,seeds,final_mean,final_stderr
inline TrainOutcome run_train_detailed(const TrainSpec& spec) {
  if (spec.seeds.empty()) throw ConfigError("train: need at least one seed");
  if (spec.methods.empty()) throw ConfigError("train: need at least one method");
  spec.config.validate();
  const auto mdp = train_environment(spec);
  TrainOutcome out;
  std::string runs_csv = "method,seed,step,mean_return,stderr_return\n";
  std::string curves_csv = "method,step,mean_return,stderr\n";
  std::string final_csv = "method,seeds,final_mean,final_stderr\n";
  for (const auto method : spec.methods) {
    std::vector<LearningCurve> curves;
    std::vector<double> finals;
    for (const auto seed : spec.seeds) {
      TrainConfig c = spec.config;
      c.method = method;
      c.seed = seed;
      TrainResult tr;
      try {
        tr = train(mdp, c);
      } catch (const DivergenceError& e) {
        throw DivergenceError("method " + method_name(method) + ", seed " + std::to_string(seed) + ": " + e.what());
      }
      for (const auto& p : tr.curve.points)
        runs_csv += method_name(method) + "," + std::to_string(seed) + "," + std::to_string(p.step) + "," +
                    format_double(p.mean_return) + "," + format_double(p.stderr_return) + "\n";
      const auto& pts = tr.curve.points;
      const std::size_t k = std::min(pts.size(), static_cast<std::size_t>(spec.final_checkpoints));
      double f = 0.0;
      for (std::size_t j = pts.size() - k; j < pts.size(); ++j) f += pts[j].mean_return;
      finals.push_back(k ? f / static_cast<double>(k) : 0.0);
      curves.push_back(tr.curve);
    }
    auto& agg = out.curves[method];
    const std::size_t P = curves.front().points.size();
    for (std::size_t j = 0; j < P; ++j) {
      std::vector<double> ys;
      for (const auto& c : curves) ys.push_back(c.points[j].mean_return);
      const auto st = sample_stats(ys);
      agg.emplace_back(st.mean, st.stderr_mean);
      curves_csv += method_name(method) + "," + std::to_string(curves.front().points[j].step) + "," +
                    format_double(st.mean) + "," + format_double(st.stderr_mean) + "\n";
    }
    const auto fs = sample_stats(finals);
    out.finals.push_back({method, fs});
    final_csv += method_name(method) + "," + std::to_string(fs.count) + "," + format_double(fs.mean) + "," +
                 format_double(fs.stderr_mean) + "\n";
  }
  auto& res = out.result;
  res.files["train_runs.csv"] = runs_csv;
  res.files["train_curves.csv"] = curves_csv;
  res.files["train_final.csv"] = final_csv;
  ChartColumns cols;
  cols.x = "step";
  cols.y = "mean_return";
  cols.band = "stderr";
  cols.group = {"method"};
  auto chart = chart_from_csv(parse_csv(curves_csv), cols);
  chart.title = "Greedy return";
  res.files["train_curves.svg"] = render_line_chart(chart);

  for (const auto& m : out.finals)
    res.summary += method_name(m.method) + ": final " + format_double(m.final_return.mean) + " +- " +
                   format_double(m.final_return.stderr_mean) + " (" + std::to_string(m.final_return.count) + " seeds)\n";
  for (std::size_t i = 0; i + 1 < out.finals.size(); ++i)
    for (std::size_t j = i + 1; j < out.finals.size(); ++j) {
      const auto& a = out.finals[i];
      const auto& b = out.finals[j];
      res.summary += method_name(b.method) + " - " + method_name(a.method) + " = " +
                     format_double(b.final_return.mean - a.final_return.mean) + " (pooled se " +
                     format_double(pooled_stderr(a.final_return, b.final_return)) + "), band overlap " +
                     format_double(band_overlap_fraction(out.curves[a.method], out.curves[b.method])) + "\n";
    }
  return out;
}

inline ExperimentResult run_train(const TrainSpec& spec) { return run_train_detailed(spec).result; }

}  // namespace offdae

#endif  // OFFDAE_EXPERIMENTS_HPP
