// Plugging a user-defined learner and environment into the harness.
//
// The environment is a one-step bandit whose reward peaks when the action
// hits a hidden target. The learner keeps a single action estimate and moves
// it along a noisy reward signal with a large step, so it keeps jittering
// around the target; the checkpoint-and-revert loop holds on to good estimates.

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ctrlz/harness.hpp"

namespace {

class TargetBandit {
 public:
  explicit TargetBandit(double target) : target_(target) {}

  ctrlz::Observation reset(ctrlz::Rng& rng) {
    noise_ = 0.05 * rng.normal();
    return {0.0};
  }

  ctrlz::StepResult step(const ctrlz::Action& a) {
    const double miss = a.at(0) - target_;
    return {{0.0}, -miss * miss + noise_, true};
  }

  std::size_t max_episode_length() const { return 1; }

 private:
  double target_;
  double noise_ = 0.0;
};

// Finite-difference hill climber on a single scalar.
class HillClimber {
 public:
  explicit HillClimber(double step) : step_(step) {}

  ctrlz::Action act(const ctrlz::Observation&, ctrlz::Rng& rng) const { return {estimate_ + 0.3 * rng.normal()}; }
  ctrlz::Action act_mean(const ctrlz::Observation&) const { return {estimate_}; }

  void train_on_episode(const ctrlz::Trajectory& t) {
    const double tried = t.steps.front().action[0];
    const double reward = t.steps.front().reward;
    const double move = step_ * reward_baseline_delta(reward) * (tried - estimate_);
    estimate_ += std::clamp(move, -0.5, 0.5);
  }
  void ingest_offline(const ctrlz::Trajectory&) {}

  ctrlz::ParameterVector get_parameters() const { return {{estimate_, baseline_}, std::nullopt}; }
  void set_parameters(const ctrlz::ParameterVector& p) {
    estimate_ = p.values.at(0);
    baseline_ = p.values.at(1);
  }

 private:
  double reward_baseline_delta(double reward) {
    const double delta = reward - baseline_;
    baseline_ += 0.1 * delta;
    return delta;
  }

  double step_;
  double estimate_ = 0.0;
  double baseline_ = 0.0;
};

}  // namespace

int main() {
  ctrlz::ScheduleConfig schedule;
  schedule.train_episodes_per_cycle = 20;
  schedule.eval_episodes = 20;
  schedule.total_train_episodes = 400;
  schedule.eval_mode = ctrlz::EvalActionMode::mean_action;

  for (double threshold : {0.0, 0.1}) {
    schedule.threshold = threshold;
    HillClimber learner(4.0);
    TargetBandit env(2.0);
    const auto log = ctrlz::run_training(learner, env, schedule, 42);
    std::printf("threshold %.1f\n", threshold);
    for (const auto& rec : log) {
      double mean = 0.0;
      for (double r : rec.eval_returns) mean += r;
      mean /= static_cast<double>(rec.eval_returns.size());
      std::printf("  cycle %2zu  eval %8.4f  %s\n", rec.cycle, mean,
                  rec.reverted_to ? ("revert -> " + std::to_string(*rec.reverted_to)).c_str() : "store");
    }
    std::printf("  final estimate %.4f\n", learner.get_parameters().values[0]);
  }
}
