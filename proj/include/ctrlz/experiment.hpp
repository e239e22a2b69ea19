#pragma once

// Experiment runner shared by the `ctrlz` command-line tool: seed batches,
// threshold sweeps, hyperparameter perturbation and the CSV/JSON artifacts.
//
// Output artifacts
//   cycles.csv    one row per (run, cycle)
//     run_id,seed,threshold,comparator,cycle,phase,episode_index,episode_return,
//     rho_min,reverted,reverted_to,checkpoint_saved
//     phase is the cycle outcome: store (saved without judging), keep (judged,
//     saved) or revert. episode_return is the mean training return of the cycle.
//   episodes.csv  one row per episode
//     run_id,seed,threshold,cycle,phase,episode_index,episode_return
//     phase is train or eval; train episodes are numbered over the run, eval
//     episodes within their cycle.
//   summary.json  configuration echo plus one RunSummary per run.
//   sweep.csv     threshold,mean_reward,std_dev,revert_rate

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ctrlz/envs.hpp"
#include "ctrlz/errors.hpp"
#include "ctrlz/harness.hpp"
#include "ctrlz/learner.hpp"
#include "ctrlz/rng.hpp"
#include "ctrlz/stat_tests.hpp"

namespace ctrlz {

struct LearnerHyperparameters {
  double learning_rate = 1e-3;
  double gamma = 0.95;
  double log_std_init = 0.0;
  double rms_decay = 0.99;
  std::size_t hidden = 32;
  std::size_t batch_episodes = 1;

  friend bool operator==(const LearnerHyperparameters&, const LearnerHyperparameters&) = default;
};

enum class EnvironmentKind { cartpole, scripted };

struct ScriptedSettings {
  double high = 10.0;
  double low = 0.0;
  double noise_std = 0.1;
  std::size_t degrade_at = 4;
};

struct Perturbation {
  double low = 0.5;
  double high = 1.5;
};

struct ExperimentConfig {
  ScheduleConfig schedule{.total_train_episodes = 1500};
  LearnerHyperparameters learner;
  EnvironmentKind env = EnvironmentKind::cartpole;
  CartPoleParams cartpole;
  ScriptedSettings scripted;
  std::vector<std::uint64_t> seeds{0};
  std::uint64_t master_seed = 0;
  std::optional<Perturbation> perturbation;
  unsigned jobs = 1;

  void validate() const {
    schedule.validate();
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (!(learner.learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
    if (!(learner.gamma > 0.0 && learner.gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
    if (!(learner.rms_decay >= 0.0 && learner.rms_decay < 1.0)) throw ConfigError("rms decay must lie in [0, 1)");
    if (learner.hidden == 0) throw ConfigError("hidden size must be >= 1");
    if (learner.batch_episodes == 0) throw ConfigError("batch size must be >= 1");
    if (perturbation && !(perturbation->low > 0.0 && perturbation->low <= perturbation->high)) {
      throw ConfigError("perturbation range must satisfy 0 < low <= high");
    }
    if (env == EnvironmentKind::scripted && !(scripted.noise_std >= 0.0)) {
      throw ConfigError("scripted noise must be non-negative");
    }
  }
};

// ---------------------------------------------------------------------------
// Parsing helpers

inline double parse_real(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidInput("not a real number: '" + std::string(text) + "'");
  }
  return value;
}

inline std::uint64_t parse_natural(std::string_view text) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidInput("not a natural number: '" + std::string(text) + "'");
  }
  return value;
}

/// "0..19", "3,5,8" or a mix such as "0..4,10".
inline std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const auto item = text.substr(start, comma - start);
    if (const auto dots = item.find(".."); dots != std::string_view::npos) {
      const auto lo = parse_natural(item.substr(0, dots));
      const auto hi = parse_natural(item.substr(dots + 2));
      if (hi < lo) throw InvalidInput("seed range is descending: '" + std::string(item) + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(parse_natural(item));
    }
    start = comma + 1;
  }
  return seeds;
}

inline std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    out.push_back(parse_real(text.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

/// Newline-separated reals; blank lines are skipped.
inline std::vector<double> read_reals(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      values.push_back(parse_real(line));
    } catch (const InvalidInput&) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": not a real number");
    }
  }
  return values;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Perturbation

/// Multiplies learning rate, discount, exploration std and RMSProp decay by
/// independent Uniform[low, high] factors drawn from (master_seed, seed) only,
/// so every arm of a comparison sees the same values for a given seed.
/// Discount is capped at 1 and decay at 0.999 to stay valid; the exploration
/// factor scales exp(log_std), i.e. it shifts log_std by log(factor).
inline LearnerHyperparameters perturb(const LearnerHyperparameters& base, const Perturbation& range,
                                      std::uint64_t master_seed, std::uint64_t seed) {
  Rng rng(derive_seed(derive_seed(master_seed, "perturbation"), seed));
  LearnerHyperparameters out = base;
  out.learning_rate *= rng.uniform(range.low, range.high);
  out.gamma = std::min(1.0, out.gamma * rng.uniform(range.low, range.high));
  out.log_std_init += std::log(rng.uniform(range.low, range.high));
  out.rms_decay = std::min(0.999, out.rms_decay * rng.uniform(range.low, range.high));
  return out;
}

// ---------------------------------------------------------------------------
// Runs

struct RunSummary {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  double threshold = 0.0;
  bool baseline = false;
  LearnerHyperparameters hyperparameters;
  double mean_lifetime_train_reward = 0.0;
  double mean_lifetime_reward_with_eval = 0.0;
  std::size_t revert_count = 0;
  std::size_t cycles = 0;
};

struct RunResult {
  RunSummary summary;
  std::vector<CycleRecord> records;
};

inline RunSummary summarize(const std::vector<CycleRecord>& records) {
  RunSummary s;
  double train_sum = 0.0, all_sum = 0.0;
  std::size_t train_n = 0, all_n = 0;
  for (const auto& rec : records) {
    for (double r : rec.train_returns) train_sum += r, ++train_n;
    all_sum += std::accumulate(rec.eval_returns.begin(), rec.eval_returns.end(), 0.0);
    all_n += rec.eval_returns.size();
    if (rec.reverted_to) ++s.revert_count;
  }
  all_sum += train_sum;
  all_n += train_n;
  s.mean_lifetime_train_reward = train_n ? train_sum / static_cast<double>(train_n) : 0.0;
  s.mean_lifetime_reward_with_eval = all_n ? all_sum / static_cast<double>(all_n) : 0.0;
  s.cycles = records.size();
  return s;
}

struct RunRequest {
  std::size_t run_id = 0;
  std::uint64_t seed = 0;
  double threshold = 0.1;
  bool baseline = false;
};

inline std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t seed) {
  return derive_seed(derive_seed(master_seed, "run"), seed);
}

/// Executes one seeded run. A baseline run records its threshold as 0, the
/// value whose behavior it reproduces.
inline RunResult execute_run(const ExperimentConfig& config, const RunRequest& req,
                             const RunOptions& options = {}) {
  ScheduleConfig schedule = config.schedule;
  schedule.threshold = req.baseline ? 0.0 : req.threshold;
  const auto hyper = config.perturbation ? perturb(config.learner, *config.perturbation, config.master_seed, req.seed)
                                         : config.learner;
  const std::uint64_t seed = run_seed(config.master_seed, req.seed);

  std::vector<CycleRecord> records;
  const auto drive = [&](auto& learner, auto& env) {
    records = req.baseline ? run_baseline(learner, env, schedule, seed, options)
                           : run_training(learner, env, schedule, seed, options);
  };
  if (config.env == EnvironmentKind::cartpole) {
    ReinforceConfig rc;
    rc.hidden = hyper.hidden;
    rc.gamma = hyper.gamma;
    rc.log_std_init = hyper.log_std_init;
    rc.optimizer.learning_rate = hyper.learning_rate;
    rc.optimizer.decay = hyper.rms_decay;
    rc.batch_episodes = hyper.batch_episodes;
    ReinforceLearner learner(4, 1, rc, derive_seed(seed, "init"));
    CartPole env(config.cartpole);
    drive(learner, env);
  } else {
    const auto& sc = config.scripted;
    auto [env, learner] = scripted_env_and_learner(ScriptedProcessSpec::step_down(
        sc.high, sc.low, sc.noise_std, sc.degrade_at, schedule.train_episodes_per_cycle));
    drive(learner, env);
  }

  RunResult result{summarize(records), std::move(records)};
  result.summary.run_id = req.run_id;
  result.summary.seed = req.seed;
  result.summary.threshold = schedule.threshold;
  result.summary.baseline = req.baseline;
  result.summary.hyperparameters = hyper;
  return result;
}

/// Runs every request, using up to config.jobs worker threads. Results come
/// back in request order regardless of scheduling.
inline std::vector<RunResult> execute_batch(const ExperimentConfig& config, const std::vector<RunRequest>& requests,
                                            const std::optional<std::filesystem::path>& checkpoint_dir = {}) {
  std::vector<std::optional<RunResult>> slots(requests.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        RunOptions options;
        if (checkpoint_dir) {
          options.checkpoint_dir = *checkpoint_dir;
          options.checkpoint_prefix = "run" + std::to_string(requests[i].run_id) + "_";
        }
        slots[i] = execute_run(config, requests[i], options);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(config.jobs, static_cast<unsigned>(requests.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<RunResult> results;
  results.reserve(slots.size());
  for (auto& s : slots) results.push_back(std::move(*s));
  return results;
}

inline std::vector<RunRequest> seed_batch(const ExperimentConfig& config, double threshold, bool baseline,
                                          std::size_t first_run_id = 0) {
  std::vector<RunRequest> out;
  for (std::size_t i = 0; i < config.seeds.size(); ++i) {
    out.push_back({first_run_id + i, config.seeds[i], threshold, baseline});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep table

struct SweepRow {
  double threshold = 0.0;
  double mean_reward = 0.0;
  double std_dev = 0.0;  // population std dev across runs
  double revert_rate = 0.0;  // reverting cycles / all cycles
};

/// Groups runs by threshold (in first-seen order) and aggregates their mean
/// lifetime training rewards.
inline std::vector<SweepRow> sweep_table(const std::vector<RunResult>& runs) {
  std::vector<SweepRow> rows;
  std::vector<std::vector<const RunSummary*>> groups;
  for (const auto& run : runs) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const SweepRow& r) { return r.threshold == run.summary.threshold; });
    if (it == rows.end()) {
      rows.push_back({run.summary.threshold});
      groups.emplace_back();
      it = rows.end() - 1;
    }
    groups[static_cast<std::size_t>(it - rows.begin())].push_back(&run.summary);
  }
  for (std::size_t g = 0; g < rows.size(); ++g) {
    double sum = 0.0, reverts = 0.0, cycles = 0.0;
    for (const auto* s : groups[g]) {
      sum += s->mean_lifetime_train_reward;
      reverts += static_cast<double>(s->revert_count);
      cycles += static_cast<double>(s->cycles);
    }
    const double n = static_cast<double>(groups[g].size());
    rows[g].mean_reward = sum / n;
    double sq = 0.0;
    for (const auto* s : groups[g]) sq += std::pow(s->mean_lifetime_train_reward - rows[g].mean_reward, 2);
    rows[g].std_dev = std::sqrt(sq / n);
    rows[g].revert_rate = cycles > 0.0 ? reverts / cycles : 0.0;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string_view cycle_phase(const CycleRecord& rec) {
  if (rec.reverted_to) return "revert";
  return rec.verdict ? "keep" : "store";
}

inline std::string cycles_csv(const std::vector<RunResult>& runs, Comparator comparator) {
  std::ostringstream out;
  out << "run_id,seed,threshold,comparator,cycle,phase,episode_index,episode_return,rho_min,reverted,reverted_to,"
         "checkpoint_saved\n";
  for (const auto& run : runs) {
    const auto& s = run.summary;
    for (const auto& rec : run.records) {
      const double mean_train = std::accumulate(rec.train_returns.begin(), rec.train_returns.end(), 0.0) /
                                static_cast<double>(rec.train_returns.size());
      out << s.run_id << ',' << s.seed << ',' << format_real(s.threshold) << ',' << to_string(comparator) << ','
          << rec.cycle << ',' << cycle_phase(rec) << ',' << rec.episode_index << ',' << format_real(mean_train) << ',';
      if (rec.verdict) out << format_real(rec.verdict->min_score.value());
      out << ',' << (rec.reverted_to ? 1 : 0) << ',';
      if (rec.reverted_to) out << *rec.reverted_to;
      out << ',';
      if (rec.checkpoint_saved) out << *rec.checkpoint_saved;
      out << '\n';
    }
  }
  return out.str();
}

inline std::string episodes_csv(const std::vector<RunResult>& runs) {
  std::ostringstream out;
  out << "run_id,seed,threshold,cycle,phase,episode_index,episode_return\n";
  for (const auto& run : runs) {
    const auto& s = run.summary;
    const std::string prefix = std::to_string(s.run_id) + ',' + std::to_string(s.seed) + ',' + format_real(s.threshold) + ',';
    std::uint64_t train_index = 0;
    for (const auto& rec : run.records) {
      for (double r : rec.train_returns) {
        out << prefix << rec.cycle << ",train," << ++train_index << ',' << format_real(r) << '\n';
      }
      for (std::size_t e = 0; e < rec.eval_returns.size(); ++e) {
        out << prefix << rec.cycle << ",eval," << e + 1 << ',' << format_real(rec.eval_returns[e]) << '\n';
      }
    }
  }
  return out.str();
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "threshold,mean_reward,std_dev,revert_rate\n";
  for (const auto& r : rows) {
    out << format_real(r.threshold) << ',' << format_real(r.mean_reward) << ',' << format_real(r.std_dev) << ','
        << format_real(r.revert_rate) << '\n';
  }
  return out.str();
}

inline nlohmann::ordered_json to_json(const LearnerHyperparameters& h) {
  return {{"learning_rate", h.learning_rate}, {"gamma", h.gamma},   {"log_std_init", h.log_std_init},
          {"rms_decay", h.rms_decay},         {"hidden", h.hidden}, {"batch_episodes", h.batch_episodes}};
}

inline nlohmann::ordered_json to_json(const RunSummary& s) {
  return {{"run_id", s.run_id},
          {"seed", s.seed},
          {"threshold", s.threshold},
          {"baseline", s.baseline},
          {"hyperparameters", to_json(s.hyperparameters)},
          {"mean_lifetime_train_reward", s.mean_lifetime_train_reward},
          {"mean_lifetime_reward_with_eval", s.mean_lifetime_reward_with_eval},
          {"revert_count", s.revert_count},
          {"cycles", s.cycles},
          {"cycles_csv", "cycles.csv"}};
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["env"] = c.env == EnvironmentKind::cartpole ? "cartpole" : "scripted";
  j["comparator"] = std::string(to_string(c.schedule.comparator));
  j["train_episodes_per_cycle"] = c.schedule.train_episodes_per_cycle;
  j["eval_episodes"] = c.schedule.eval_episodes;
  j["total_train_episodes"] = c.schedule.total_train_episodes;
  j["eval_mode"] = c.schedule.eval_mode == EvalActionMode::stochastic ? "stochastic" : "mean_action";
  j["revert_optimizer_state"] = c.schedule.revert_optimizer_state;
  j["checkpoint_capacity"] = c.schedule.checkpoint_capacity ? nlohmann::ordered_json(*c.schedule.checkpoint_capacity)
                                                            : nlohmann::ordered_json(nullptr);
  j["learner"] = to_json(c.learner);
  j["master_seed"] = c.master_seed;
  j["seeds"] = c.seeds;
  j["perturbation"] = c.perturbation ? nlohmann::ordered_json{c.perturbation->low, c.perturbation->high}
                                     : nlohmann::ordered_json(nullptr);
  return j;
}

inline std::string summary_json(const ExperimentConfig& config, std::string_view command,
                                 const std::vector<RunResult>& runs) {
  nlohmann::ordered_json j;
  j["command"] = std::string(command);
  j["config"] = to_json(config);
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : runs) j["runs"].push_back(to_json(r.summary));
  return j.dump(2) + "\n";
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Histograms

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;
};

/// `bins` equal-width bins over [min, max]; the top edge is inclusive. A
/// zero-width range collapses to a single bin.
inline Histogram histogram(std::span<const double> values, std::size_t bins = 10) {
  if (values.empty()) throw InvalidInput("histogram of an empty sample");
  if (bins == 0) throw InvalidInput("histogram needs at least one bin");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;
  Histogram h;
  if (hi == lo) {
    h.bin_edges = {lo, hi};
    h.counts = {values.size()};
    return h;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b <= bins; ++b) h.bin_edges.push_back(b == bins ? hi : lo + width * static_cast<double>(b));
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto idx = static_cast<std::size_t>((v - lo) / width);
    h.counts[std::min(idx, bins - 1)] += 1;
  }
  return h;
}

struct EpisodeRow {
  std::size_t run_id = 0;
  std::size_t cycle = 0;
  std::string phase;
  double episode_return = 0.0;
};

inline std::vector<EpisodeRow> read_episodes_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("run_id,seed,threshold,cycle,phase", 0) != 0) {
    throw InvalidInput(path.string() + ": not an episodes CSV");
  }
  std::vector<EpisodeRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      f.push_back(rest.substr(0, pos));
    }
    f.push_back(rest);
    if (f.size() != 7) throw InvalidInput(path.string() + ": malformed row");
    rows.push_back({static_cast<std::size_t>(parse_natural(f[0])), static_cast<std::size_t>(parse_natural(f[3])),
                    std::string(f[4]), parse_real(f[6])});
  }
  return rows;
}

/// Histogram JSON of the evaluation returns of `cycles` in run `run_id`.
inline nlohmann::ordered_json histogram_report(const std::vector<EpisodeRow>& rows, std::size_t run_id,
                                               const std::vector<std::size_t>& cycles, std::size_t bins,
                                               std::string_view phase = "eval") {
  nlohmann::ordered_json out;
  out["run_id"] = run_id;
  out["phase"] = std::string(phase);
  out["cycles"] = nlohmann::ordered_json::array();
  for (std::size_t c : cycles) {
    std::vector<double> values;
    for (const auto& r : rows) {
      if (r.run_id == run_id && r.cycle == c && r.phase == phase) values.push_back(r.episode_return);
    }
    if (values.empty()) {
      throw NotFound("no " + std::string(phase) + " episodes for run " + std::to_string(run_id) + " cycle " +
                     std::to_string(c));
    }
    const auto h = histogram(values, bins);
    const auto fit = gaussian_fit(RewardSamples(values));
    out["cycles"].push_back({{"cycle", c},
                             {"bin_edges", h.bin_edges},
                             {"counts", h.counts},
                             {"fit", {{"mean", fit.mean}, {"std_dev", fit.std_dev}}}});
  }
  return out;
}

}  // namespace ctrlz
