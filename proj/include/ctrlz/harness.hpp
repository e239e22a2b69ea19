#pragma once

// Train / evaluate / judge / revert loop.
//
// A run alternates N training episodes with M evaluation episodes of the
// frozen policy. After evaluation the returns are compared against every
// stored checkpoint; when the smallest improvement score falls below the
// threshold the learner is reset to the checkpoint that scored it lowest,
// otherwise the current parameters are stored as a new checkpoint.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctrlz/checkpoint_store.hpp"
#include "ctrlz/errors.hpp"
#include "ctrlz/parameters.hpp"
#include "ctrlz/rng.hpp"
#include "ctrlz/stat_tests.hpp"

namespace ctrlz {

using Observation = std::vector<double>;
using Action = std::vector<double>;

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
};

struct TrajectoryStep {
  Observation observation;
  Action action;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;

  double total_reward() const noexcept {
    double sum = 0.0;
    for (const auto& s : steps) sum += s.reward;
    return sum;
  }
};

template <class L>
concept Learner = requires(L learner, const L& const_learner, const Observation& obs, Rng& rng, const Trajectory& traj,
                           const ParameterVector& params) {
  { learner.act(obs, rng) } -> std::convertible_to<Action>;
  { learner.act_mean(obs) } -> std::convertible_to<Action>;
  learner.train_on_episode(traj);
  learner.ingest_offline(traj);
  { const_learner.get_parameters() } -> std::same_as<ParameterVector>;
  learner.set_parameters(params);
};

template <class E>
concept Environment = requires(E env, const E& const_env, Rng& rng, const Action& action) {
  { env.reset(rng) } -> std::convertible_to<Observation>;
  { env.step(action) } -> std::same_as<StepResult>;
  { const_env.max_episode_length() } -> std::convertible_to<std::size_t>;
};

enum class EvalActionMode { stochastic, mean_action };

struct ScheduleConfig {
  std::size_t train_episodes_per_cycle = 30;
  std::size_t eval_episodes = 20;
  double threshold = 0.1;
  Comparator comparator = Comparator::mann_whitney;
  std::size_t total_train_episodes = 3000;
  EvalActionMode eval_mode = EvalActionMode::stochastic;
  // Also restore optimizer accumulators on revert (parameters only by default).
  bool revert_optimizer_state = false;
  std::optional<std::size_t> checkpoint_capacity;

  void validate() const {
    if (train_episodes_per_cycle < 1) throw ConfigError("train episodes per cycle must be >= 1");
    if (eval_episodes < 1) throw ConfigError("eval episodes must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
    if (total_train_episodes < train_episodes_per_cycle) {
      throw ConfigError("total train episodes must be at least one cycle");
    }
    if (checkpoint_capacity && *checkpoint_capacity == 0) throw ConfigError("checkpoint capacity must be >= 1");
  }

  std::size_t cycles() const noexcept { return total_train_episodes / train_episodes_per_cycle; }
};

struct CycleRecord {
  std::size_t cycle = 0;  // 1-based
  std::uint64_t episode_index = 0;  // training episodes completed at the end of this cycle
  std::vector<double> train_returns;
  std::vector<double> eval_returns;
  std::optional<ComparisonVerdict> verdict;
  std::optional<CheckpointId> reverted_to;
  std::optional<CheckpointId> checkpoint_saved;
};

struct RunOptions {
  // Directory for per-checkpoint binary files; nothing is written when unset.
  std::optional<std::filesystem::path> checkpoint_dir;
  std::string checkpoint_prefix;
};

namespace detail {

template <Learner L, Environment E>
Trajectory play_episode(L& learner, E& env, Rng& policy_rng, Rng& env_rng, bool use_mean_action) {
  Trajectory traj;
  Observation obs = env.reset(env_rng);
  const std::size_t cap = env.max_episode_length();
  for (std::size_t t = 0; t < cap; ++t) {
    Action action = use_mean_action ? Action(learner.act_mean(obs)) : Action(learner.act(obs, policy_rng));
    StepResult step = env.step(action);
    if (!std::isfinite(step.reward)) throw ContractViolation("environment returned a non-finite reward");
    traj.steps.push_back({std::move(obs), std::move(action), step.reward});
    if (step.done) return traj;
    obs = std::move(step.observation);
  }
  throw ContractViolation("environment did not finish the episode within its maximum length");
}

enum class Mode { ctrl_z, baseline };

template <Learner L, Environment E>
std::vector<CycleRecord> run_loop(L& learner, E& env, const ScheduleConfig& schedule, std::uint64_t seed, Mode mode,
                                  const RunOptions& options) {
  schedule.validate();
  const Rng root(seed);
  Rng train_policy = root.substream("train-policy");
  Rng eval_policy = root.substream("eval-policy");
  Rng train_env = root.substream("train-env");
  Rng eval_env = root.substream("eval-env");

  CheckpointStore store(schedule.checkpoint_capacity);
  if (options.checkpoint_dir) store.persist_to(*options.checkpoint_dir, options.checkpoint_prefix);

  // A threshold of 0 can never be undercut, so judging is skipped entirely and
  // the run is indistinguishable from the baseline loop.
  const bool judging = mode == Mode::ctrl_z && schedule.threshold > 0.0;

  std::vector<CycleRecord> log;
  const std::size_t cycles = schedule.cycles();
  log.reserve(cycles);
  std::uint64_t episodes_done = 0;
  for (std::size_t cycle = 1; cycle <= cycles; ++cycle) {
    try {
      CycleRecord rec;
      rec.cycle = cycle;
      for (std::size_t e = 0; e < schedule.train_episodes_per_cycle; ++e) {
        Trajectory traj = play_episode(learner, env, train_policy, train_env, false);
        rec.train_returns.push_back(traj.total_reward());
        learner.train_on_episode(traj);
        ++episodes_done;
      }
      rec.episode_index = episodes_done;

      const bool mean_action = schedule.eval_mode == EvalActionMode::mean_action;
      for (std::size_t e = 0; e < schedule.eval_episodes; ++e) {
        Trajectory traj = play_episode(learner, env, eval_policy, eval_env, mean_action);
        rec.eval_returns.push_back(traj.total_reward());
        learner.ingest_offline(traj);
      }

      RewardSamples evaluation(rec.eval_returns);
      if (judging && !store.empty()) {
        rec.verdict = store.judge(evaluation, schedule.comparator, schedule.threshold);
      }
      if (rec.verdict && rec.verdict->revert) {
        const CheckpointId target = *rec.verdict->target_id;
        // Optimizer state is only present in the store when it is meant to be reverted.
        learner.set_parameters(store.restore(target));
        rec.reverted_to = target;
      } else {
        ParameterVector params = learner.get_parameters();
        if (!schedule.revert_optimizer_state) params.optimizer_state.reset();
        rec.checkpoint_saved = store.store(std::move(params), std::move(evaluation), episodes_done);
      }
      log.push_back(std::move(rec));
    } catch (const RunAborted&) {
      throw;
    } catch (const std::exception& ex) {
      throw RunAborted(cycle, ex.what());
    }
  }
  return log;
}

}  // namespace detail

/// Runs the checkpoint-and-revert loop until the training-episode budget is spent.
template <Learner L, Environment E>
std::vector<CycleRecord> run_training(L& learner, E& env, const ScheduleConfig& schedule, std::uint64_t seed,
                                      const RunOptions& options = {}) {
  return detail::run_loop(learner, env, schedule, seed, detail::Mode::ctrl_z, options);
}

/// Same loop with judging and reverting disabled. Evaluation still runs and
/// checkpoints are still recorded so both arms account rewards identically.
template <Learner L, Environment E>
std::vector<CycleRecord> run_baseline(L& learner, E& env, const ScheduleConfig& schedule, std::uint64_t seed,
                                      const RunOptions& options = {}) {
  return detail::run_loop(learner, env, schedule, seed, detail::Mode::baseline, options);
}

}  // namespace ctrlz
