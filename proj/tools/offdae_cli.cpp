// Command-line front end for the experiments and the sample/fit/plot
// utilities.  Exit codes: 0 success, 1 verification or runtime failure,
// 2 configuration error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "offdae/experiments.hpp"
#include "offdae/io.hpp"
#include "offdae/svg.hpp"

namespace fs = std::filesystem;
using namespace offdae;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  for (auto& f : split_fields(text))
    if (!f.empty()) out.push_back(f);
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& f : split_list(text)) {
    const auto v = parse_numbers(f, what);
    if (v.size() != 1) throw ConfigError(what + ": bad entry '" + f + "'");
    out.push_back(v[0]);
  }
  if (out.empty()) throw ConfigError(what + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (double v : parse_double_list(text, what)) {
    if (v != static_cast<double>(static_cast<int>(v))) throw ConfigError(what + ": expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string default_out_dir() {
  const char* env = std::getenv("OFFDAE_OUT");
  return env && *env ? env : "out";
}

void write_outputs(const std::string& dir, const ExperimentResult& res) {
  fs::create_directories(dir);
  for (const auto& [name, content] : res.files) {
    const auto path = (fs::path(dir) / name).string();
    write_file(path, content);
    std::cout << "wrote " << path << "\n";
  }
  std::cout << res.summary;
}

FiniteMdp load_mdp(const std::string& env_name, const std::string& mdp_file) {
  if (!mdp_file.empty()) return read_mdp(read_file(mdp_file));
  return env_by_name(env_name);
}

/// Policy file: S * A whitespace-separated probabilities, row-major.
PolicyTable load_policy(const FiniteMdp& mdp, const std::string& path) {
  if (path.empty()) return PolicyTable::uniform(mdp);
  return PolicyTable(mdp.num_states(), mdp.num_actions(), parse_numbers(read_file(path), "policy file"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Return decomposition and off-policy advantage estimation workbench"};
  app.require_subcommand(1);

  std::string out_dir = default_out_dir();
  std::uint64_t seed = 0;
  app.add_option("--out", out_dir, "Output directory (default: $OFFDAE_OUT, else ./out)");
  app.add_option("--seed", seed, "Master seed; every sub-seed is derived from it");

  // fig3 / fig4
  int sweep_seeds = 1000;
  std::string samples;
  double p_high = 0.5;
  auto* fig3 = app.add_subcommand("fig3", "MC, TD(0) and DAE start-state estimates vs sample count");
  auto* fig4 = app.add_subcommand("fig4", "DAE vs off-policy DAE (empirical and oracle model) vs sample count");
  for (auto* sub : {fig3, fig4}) {
    sub->add_option("--seeds", sweep_seeds, "Number of seeds")->check(CLI::PositiveNumber);
    sub->add_option("--samples", samples, "Comma-separated trajectory counts (default 10,...,10000)");
  }
  fig4->add_option("--p-high", p_high, "Probability of the rewarding coin outcome (0 or 1 makes it deterministic)");

  // counterexample
  std::string mu_grid, pi_grid;
  auto* cex = app.add_subcommand("counterexample", "Plain DAE bias under off-policy data: closed form vs solver");
  cex->add_option("--mu", mu_grid, "Comma-separated behaviour probabilities of action 0, each in (0, 1)");
  cex->add_option("--pi", pi_grid, "Comma-separated target probabilities of action 0, each in [0, 1]");

  // verify
  VerifySpec vspec;
  auto* verify = app.add_subcommand("verify", "Check the identities and uniqueness result on random instances");
  verify->add_option("--instances", vspec.instances, "Number of random instances")->check(CLI::PositiveNumber);
  verify->add_option("--trajectories", vspec.trajectories, "Sampled trajectories per instance")
      ->check(CLI::PositiveNumber);
  verify->add_option("--perturb", vspec.perturb_advantage, "Add this to every fitted advantage (fault injection)");
  verify->add_option("--nonexplorative-every", vspec.nonexplorative_every,
                     "Make every k-th behaviour policy skip action 0 in state 0");

  // train
  std::string config_file, methods;
  int train_seeds = 20;
  int train_n = 0;
  auto* trainc = app.add_subcommand("train", "Actor-critic learning curves per critic method");
  trainc->add_option("--config", config_file, "key = value file (environment and training settings)");
  trainc->add_option("--method", methods, "Comma-separated methods: uncorrected, dae, offpolicy-dae, tree");
  trainc->add_option("--seeds", train_seeds, "Number of seeds (seed, seed+1, ...)")->check(CLI::PositiveNumber);
  trainc->add_option("--n", train_n, "Segment length (overrides the config)")->check(CLI::PositiveNumber);

  // sample
  std::string env_name = "fig3", mdp_file, policy_file, output;
  int sample_count = 100, max_len = 1000;
  auto* sample = app.add_subcommand("sample", "Sample trajectories to a dataset file");
  // fit
  std::string data_file, fit_method = "dae", model_kind = "oracle", fit_n = "inf";
  auto* fit = app.add_subcommand("fit", "Fit value or decomposition tables to a dataset file");
  for (auto* sub : {sample, fit}) {
    sub->add_option("--env", env_name, "Built-in environment name");
    sub->add_option("--mdp", mdp_file, "MDP file (overrides --env)");
    sub->add_option("--policy", policy_file, "Policy file with S*A probabilities (default uniform)");
    sub->add_option("--output", output, "Output file (default under --out)");
  }
  sample->add_option("--samples", sample_count, "Number of trajectories")->check(CLI::PositiveNumber);
  sample->add_option("--max-len", max_len, "Truncate trajectories after this many steps")->check(CLI::PositiveNumber);
  fit->add_option("--data", data_file, "Dataset file")->required();
  fit->add_option("--method", fit_method, "mc, td0, dae or offpolicy-dae");
  fit->add_option("--n", fit_n, "Backup length: integer >= 0 or inf");
  fit->add_option("--model", model_kind, "Transition model for offpolicy-dae: oracle or empirical");

  // plot
  std::string csv_file, x_col = "step", y_col = "mean_return", band_col, group_cols, filters, title;
  double reference = 0.0;
  bool log_x = false;
  auto* plot = app.add_subcommand("plot", "Render an SVG line chart from a CSV file");
  plot->add_option("--csv", csv_file, "Input CSV")->required();
  plot->add_option("--x", x_col, "x column");
  plot->add_option("--y", y_col, "y column");
  plot->add_option("--band", band_col, "Band half-width column");
  plot->add_option("--group", group_cols, "Comma-separated columns naming the series");
  plot->add_option("--filter", filters, "Comma-separated column=value filters");
  auto* ref_opt = plot->add_option("--ref", reference, "Horizontal reference line");
  plot->add_flag("--logx", log_x, "Logarithmic x axis");
  plot->add_option("--title", title, "Chart title");
  plot->add_option("--output", output, "Output SVG file (default under --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    auto out_path = [&](const std::string& name) {
      if (!output.empty()) return output;
      fs::create_directories(out_dir);
      return (fs::path(out_dir) / name).string();
    };

    if (*fig3 || *fig4) {
      SweepSpec spec;
      spec.seed = seed;
      spec.num_seeds = sweep_seeds;
      if (!samples.empty()) spec.sample_grid = parse_int_list(samples, "--samples");
      const auto res = *fig3 ? run_fig3(spec) : run_fig4(spec, p_high);
      write_outputs(out_dir, res);
      return res.exit_code;
    }
    if (*cex) {
      CounterexampleSpec spec;
      if (!mu_grid.empty()) spec.mu_grid = parse_double_list(mu_grid, "--mu");
      if (!pi_grid.empty()) spec.pi_grid = parse_double_list(pi_grid, "--pi");
      const auto res = run_counterexample(spec);
      write_outputs(out_dir, res);
      return res.exit_code;
    }
    if (*verify) {
      vspec.seed = seed;
      const auto res = run_verify(vspec);
      write_outputs(out_dir, res);
      return res.exit_code;
    }
    if (*trainc) {
      TrainSpec spec = config_file.empty() ? TrainSpec{} : parse_train_spec(read_file(config_file));
      if (!methods.empty()) {
        spec.methods.clear();
        for (const auto& m : split_list(methods)) spec.methods.push_back(parse_method(m));
      }
      if (train_n > 0) spec.config.n = train_n;
      spec.seeds.clear();
      for (int i = 0; i < train_seeds; ++i) spec.seeds.push_back(seed + static_cast<std::uint64_t>(i));
      const auto res = run_train(spec);
      write_outputs(out_dir, res);
      return res.exit_code;
    }
    if (*sample) {
      const auto mdp = load_mdp(env_name, mdp_file);
      const auto policy = load_policy(mdp, policy_file);
      const auto data = sample_dataset(mdp, policy, seed, static_cast<std::size_t>(sample_count), max_len);
      const auto path = out_path("dataset.txt");
      write_file(path, write_dataset(data));
      std::cout << "wrote " << path << " (" << data.trajectories.size() << " trajectories, " << data.num_steps()
                << " steps)\n";
      return 0;
    }
    if (*fit) {
      const auto mdp = load_mdp(env_name, mdp_file);
      const auto policy = load_policy(mdp, policy_file);
      const auto data = read_dataset(read_file(data_file));
      const double gamma = mdp.discount();
      std::string csv;
      if (fit_method == "mc" || fit_method == "td0") {
        const auto v = fit_method == "mc" ? fit_mc(data, gamma, mdp.num_states())
                                          : fit_batch_td0(data, gamma, mdp.num_states());
        csv = "entity,index,value\n";
        for (std::size_t s = 0; s < v.size(); ++s)
          if (v[s]) csv += "V," + std::to_string(s) + "," + format_double(*v[s]) + "\n";
      } else {
        const auto n = parse_backup(fit_n);
        check_state_range(data, mdp.num_states(), mdp.num_actions());
        FitReport rep;
        if (fit_method == "dae") {
          rep = fit_dae(data, policy, gamma, n);
        } else if (fit_method == "offpolicy-dae" || fit_method == "offpolicy_dae") {
          if (model_kind != "oracle" && model_kind != "empirical")
            throw ConfigError("--model must be oracle or empirical");
          const auto model = model_kind == "oracle" ? TransitionModel::oracle(mdp)
                                                    : estimate_transitions(data, mdp.num_states(), mdp.num_actions());
          rep = fit_offpolicy_dae(data, policy, model, gamma, n);
        } else {
          throw ConfigError("unknown fit method '" + fit_method + "' (expected mc, td0, dae or offpolicy-dae)");
        }
        csv = fit_report_csv(rep);
      }
      const auto path = out_path("fit.csv");
      write_file(path, csv);
      std::cout << "wrote " << path << "\n";
      return 0;
    }
    if (*plot) {
      ChartColumns cols;
      cols.x = x_col;
      cols.y = y_col;
      cols.band = band_col;
      cols.group = split_list(group_cols);
      for (const auto& f : split_list(filters)) {
        const auto eq = f.find('=');
        if (eq == std::string::npos) throw ConfigError("--filter expects column=value");
        cols.filter[f.substr(0, eq)] = f.substr(eq + 1);
      }
      auto chart = chart_from_csv(parse_csv(read_file(csv_file)), cols);
      chart.title = title;
      chart.log_x = log_x;
      if (*ref_opt) chart.reference = reference;
      const auto path = out_path(fs::path(csv_file).stem().string() + ".svg");
      write_file(path, render_line_chart(chart));
      std::cout << "wrote " << path << "\n";
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return 0;
}
