// ctrlz: run checkpoint-and-revert experiments and the statistics behind them.
//
//   ctrlz run      --env cartpole --threshold 0.1 --seeds 0..19 --lr 0.002 --out runs/
//   ctrlz baseline --seeds 0..19 --lr 0.002 --out runs-baseline/
//   ctrlz sweep    --thresholds 0,0.05,0.1,0.2,0.3,0.5 --seeds 0..49 --lr 0.002 --out sweep/
//   ctrlz hist     --episodes runs/episodes.csv --run-id 0 --cycles 1,10,20
//   ctrlz compare  current.txt previous.txt --comparator mann_whitney
//
// Experiment options may also come from a key=value file (--config); flags
// on the command line override it and CTRLZ_SEED overrides the master seed.
// Exit codes: 0 success, 1 runtime failure, 2 invalid input.

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctrlz/experiment.hpp"

namespace {

using namespace ctrlz;

struct CliOptions {
  std::string env = "cartpole";
  std::string comparator = "mann_whitney";
  std::string seeds = "0";
  std::string perturb;
  std::string eval_mode = "stochastic";
  std::string out = "ctrlz_out";
  std::string checkpoint_dir;
  std::size_t capacity = 0;
  bool baseline = false;
  bool with_baseline = false;

  std::string thresholds = "0,0.05,0.1,0.2,0.3,0.5";

  std::string episodes_file;
  std::size_t run_id = 0;
  std::string cycles = "1";
  std::size_t bins = 10;
  std::string phase = "eval";
  std::string hist_out;

  std::string file_a;
  std::string file_b;
};

Comparator comparator_from(const std::string& name) {
  if (auto c = parse_comparator(name)) return *c;
  throw ConfigError("unknown comparator '" + name + "'");
}

void finish_config(ExperimentConfig& config, const CliOptions& cli) {
  if (cli.env == "cartpole") {
    config.env = EnvironmentKind::cartpole;
  } else if (cli.env == "scripted") {
    config.env = EnvironmentKind::scripted;
  } else {
    throw ConfigError("unknown environment '" + cli.env + "'");
  }
  config.schedule.comparator = comparator_from(cli.comparator);
  config.seeds = parse_seed_list(cli.seeds);
  if (!cli.perturb.empty()) {
    const auto range = parse_real_list(cli.perturb);
    if (range.size() != 2) throw ConfigError("--perturb expects LOW,HIGH");
    config.perturbation = Perturbation{range[0], range[1]};
  }
  if (cli.eval_mode == "stochastic") {
    config.schedule.eval_mode = EvalActionMode::stochastic;
  } else if (cli.eval_mode == "mean_action") {
    config.schedule.eval_mode = EvalActionMode::mean_action;
  } else {
    throw ConfigError("unknown eval mode '" + cli.eval_mode + "'");
  }
  if (cli.capacity > 0) config.schedule.checkpoint_capacity = cli.capacity;
  config.validate();
}

void write_run_artifacts(const std::filesystem::path& dir, const ExperimentConfig& config, std::string_view command,
                         const std::vector<RunResult>& runs) {
  write_text(dir / "cycles.csv", cycles_csv(runs, config.schedule.comparator));
  write_text(dir / "episodes.csv", episodes_csv(runs));
  write_text(dir / "summary.json", summary_json(config, command, runs));
}

void print_runs(const std::vector<RunResult>& runs) {
  for (const auto& r : runs) {
    std::printf("run %zu seed %llu threshold %g: mean train reward %.3f (with eval %.3f), %zu reverts / %zu cycles\n",
                r.summary.run_id, static_cast<unsigned long long>(r.summary.seed), r.summary.threshold,
                r.summary.mean_lifetime_train_reward, r.summary.mean_lifetime_reward_with_eval,
                r.summary.revert_count, r.summary.cycles);
  }
}

std::optional<std::filesystem::path> checkpoint_dir(const CliOptions& cli) {
  if (cli.checkpoint_dir.empty()) return std::nullopt;
  return std::filesystem::path(cli.checkpoint_dir);
}

int cmd_run(ExperimentConfig& config, const CliOptions& cli, bool baseline) {
  finish_config(config, cli);
  const std::filesystem::path out(cli.out);
  const auto runs = execute_batch(config, seed_batch(config, config.schedule.threshold, baseline), checkpoint_dir(cli));
  write_run_artifacts(out, config, baseline ? "baseline" : "run", runs);
  print_runs(runs);
  if (cli.with_baseline && !baseline) {
    const auto base = execute_batch(config, seed_batch(config, 0.0, true));
    write_run_artifacts(out / "baseline", config, "baseline", base);
    print_runs(base);
  }
  return 0;
}

int cmd_sweep(ExperimentConfig& config, const CliOptions& cli) {
  finish_config(config, cli);
  const auto thresholds = parse_real_list(cli.thresholds);
  std::vector<RunRequest> requests;
  for (double t : thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("sweep thresholds must lie in [0, 1]");
    const auto batch = seed_batch(config, t, false, requests.size());
    requests.insert(requests.end(), batch.begin(), batch.end());
  }
  const auto runs = execute_batch(config, requests, checkpoint_dir(cli));
  const std::filesystem::path out(cli.out);
  write_run_artifacts(out, config, "sweep", runs);
  const auto table = sweep_table(runs);
  write_text(out / "sweep.csv", sweep_csv(table));
  std::printf("%-10s %-14s %-12s %s\n", "threshold", "mean_reward", "std_dev", "revert_rate");
  for (const auto& row : table) {
    std::printf("%-10g %-14.4f %-12.4f %.4f\n", row.threshold, row.mean_reward, row.std_dev, row.revert_rate);
  }
  return 0;
}

int cmd_hist(const CliOptions& cli) {
  if (cli.episodes_file.empty()) throw ConfigError("--episodes is required");
  std::vector<std::size_t> cycles;
  for (auto c : parse_seed_list(cli.cycles)) cycles.push_back(static_cast<std::size_t>(c));
  if (cli.bins == 0) throw ConfigError("--bins must be >= 1");
  const auto rows = read_episodes_csv(cli.episodes_file);
  const auto report = histogram_report(rows, cli.run_id, cycles, cli.bins, cli.phase);
  const std::string text = report.dump(2) + "\n";
  if (cli.hist_out.empty()) {
    std::cout << text;
  } else {
    write_text(cli.hist_out, text);
  }
  return 0;
}

int cmd_compare(const CliOptions& cli) {
  const auto comparator = comparator_from(cli.comparator);
  const RewardSamples current(read_reals(cli.file_a));
  const RewardSamples previous(read_reals(cli.file_b));
  std::printf("%.6f\n", compare(comparator, current, previous).value());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Checkpoint-and-revert training experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file with experiment options");

  ExperimentConfig config;
  CliOptions cli;

  app.add_option("--env", cli.env, "cartpole or scripted")->capture_default_str();
  app.add_option("--comparator", cli.comparator, "mann_whitney, empirical, gaussian or mean")->capture_default_str();
  app.add_option("--threshold", config.schedule.threshold, "revert when min score is below this")->capture_default_str();
  app.add_option("--train-episodes", config.schedule.train_episodes_per_cycle, "training episodes per cycle (N)")
      ->capture_default_str();
  app.add_option("--eval-episodes", config.schedule.eval_episodes, "evaluation episodes per cycle (M)")
      ->capture_default_str();
  app.add_option("--total-episodes", config.schedule.total_train_episodes, "training-episode budget per run")
      ->capture_default_str();
  app.add_option("--eval-mode", cli.eval_mode, "stochastic or mean_action")->capture_default_str();
  app.add_flag("--revert-optimizer", config.schedule.revert_optimizer_state, "also revert RMSProp accumulators");
  app.add_option("--capacity", cli.capacity, "keep at most this many checkpoints (0 = unlimited)");

  app.add_option("--lr", config.learner.learning_rate, "base learning rate")->capture_default_str();
  app.add_option("--gamma", config.learner.gamma, "discount factor")->capture_default_str();
  app.add_option("--hidden", config.learner.hidden, "hidden units per layer")->capture_default_str();
  app.add_option("--log-std-init", config.learner.log_std_init, "initial policy log std")->capture_default_str();
  app.add_option("--rms-decay", config.learner.rms_decay, "RMSProp decay")->capture_default_str();
  app.add_option("--batch", config.learner.batch_episodes, "episodes per REINFORCE update")->capture_default_str();

  app.add_option("--gravity", config.cartpole.gravity, "cart-pole gravity")->capture_default_str();
  app.add_option("--force", config.cartpole.force_magnitude, "cart-pole force magnitude")->capture_default_str();
  app.add_option("--max-steps", config.cartpole.max_steps, "cart-pole episode cap")->capture_default_str();
  app.add_option("--script-high", config.scripted.high, "scripted mean before degradation")->capture_default_str();
  app.add_option("--script-low", config.scripted.low, "scripted mean after degradation")->capture_default_str();
  app.add_option("--script-noise", config.scripted.noise_std, "scripted return noise std")->capture_default_str();
  app.add_option("--degrade-at", config.scripted.degrade_at, "scripted degradation cycle")->capture_default_str();

  app.add_option("--seeds", cli.seeds, "seed list, e.g. 0..19 or 1,4,9")->capture_default_str();
  app.add_option("--master-seed", config.master_seed, "master seed")->envname("CTRLZ_SEED")->capture_default_str();
  app.add_option("--perturb", cli.perturb, "LOW,HIGH multiplier range for hyperparameter perturbation");
  app.add_option("--jobs", config.jobs, "parallel runs")->capture_default_str();
  app.add_option("--out", cli.out, "output directory")->capture_default_str();
  app.add_option("--checkpoint-dir", cli.checkpoint_dir, "write every checkpoint as a binary file here");

  auto* run = app.add_subcommand("run", "seeded checkpoint-and-revert runs");
  run->add_flag("--baseline", cli.baseline, "disable judging and reverting");
  run->add_flag("--with-baseline", cli.with_baseline, "also run the baseline arm into OUT/baseline");
  auto* baseline = app.add_subcommand("baseline", "seeded runs with judging and reverting disabled");
  auto* sweep = app.add_subcommand("sweep", "threshold sweep over a seed batch");
  sweep->add_option("--thresholds", cli.thresholds, "comma-separated thresholds")->capture_default_str();
  auto* hist = app.add_subcommand("hist", "histograms and Gaussian fits of per-cycle returns");
  hist->add_option("--episodes", cli.episodes_file, "episodes.csv from a run")->required();
  hist->add_option("--run-id", cli.run_id, "run id within the file");
  hist->add_option("--cycles", cli.cycles, "cycles, e.g. 1,5,10 or 1..20")->capture_default_str();
  hist->add_option("--bins", cli.bins, "bin count")->capture_default_str();
  hist->add_option("--phase", cli.phase, "eval or train")->capture_default_str();
  hist->add_option("--hist-out", cli.hist_out, "write JSON here instead of stdout");
  auto* cmp = app.add_subcommand("compare", "score one reward file against another");
  cmp->add_option("current", cli.file_a, "newline-separated returns of the current policy")->required();
  cmp->add_option("previous", cli.file_b, "newline-separated returns of the previous policy")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) return cmd_run(config, cli, cli.baseline);
    if (*baseline) return cmd_run(config, cli, true);
    if (*sweep) return cmd_sweep(config, cli);
    if (*hist) return cmd_hist(cli);
    if (*cmp) return cmd_compare(cli);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
