#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "ctrlz/errors.hpp"
#include "ctrlz/harness.hpp"
#include "ctrlz/parameters.hpp"
#include "ctrlz/rng.hpp"

namespace ctrlz {

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double force_magnitude = 10.0;
  double dt = 0.02;
  double x_limit = 2.4;
  double theta_limit = 12.0 * std::numbers::pi / 180.0;
  std::size_t max_steps = 200;
};

/// Classic cart-pole with a continuous force in [-1, 1] × force_magnitude,
/// integrated with semi-implicit Euler. Observation is (x, ẋ, θ, θ̇). Every
/// step that leaves the pole up earns +1; the episode ends when the cart or
/// pole leaves its limits or after max_steps.
class CartPole {
 public:
  using State = std::array<double, 4>;

  explicit CartPole(CartPoleParams params = {}) : params_(params) {}

  Observation reset(Rng& rng) {
    for (double& s : state_) s = rng.uniform(-0.05, 0.05);
    steps_ = 0;
    done_ = false;
    return observation();
  }

  // For tests: start from an exact state.
  void set_state(const State& state) {
    state_ = state;
    steps_ = 0;
    done_ = false;
  }

  StepResult step(const Action& action) {
    if (done_) throw ContractViolation("cart-pole step called after the episode finished");
    if (action.size() != 1) throw InvalidInput("cart-pole takes a one-dimensional action");
    const double a = std::isnan(action[0]) ? 0.0 : std::clamp(action[0], -1.0, 1.0);
    state_ = integrate(state_, params_.force_magnitude * a, params_);
    ++steps_;

    const bool fallen = std::abs(state_[0]) > params_.x_limit || std::abs(state_[2]) > params_.theta_limit;
    done_ = fallen || steps_ >= params_.max_steps;
    return {observation(), fallen ? 0.0 : 1.0, done_};
  }

  std::size_t max_episode_length() const noexcept { return params_.max_steps; }
  const State& state() const noexcept { return state_; }
  const CartPoleParams& params() const noexcept { return params_; }

  static State integrate(const State& s, double force, const CartPoleParams& p) {
    const auto [x, x_dot, theta, theta_dot] = s;
    const double total_mass = p.cart_mass + p.pole_mass;
    const double polemass_length = p.pole_mass * p.pole_half_length;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);

    const double temp = (force + polemass_length * theta_dot * theta_dot * sin_t) / total_mass;
    const double theta_acc = (p.gravity * sin_t - cos_t * temp) /
                             (p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - polemass_length * theta_acc * cos_t / total_mass;

    State next;
    next[1] = x_dot + p.dt * x_acc;
    next[0] = x + p.dt * next[1];
    next[3] = theta_dot + p.dt * theta_acc;
    next[2] = theta + p.dt * next[3];
    return next;
  }

 private:
  Observation observation() const { return {state_.begin(), state_.end()}; }

  CartPoleParams params_;
  State state_{};
  std::size_t steps_ = 0;
  bool done_ = true;
};

static_assert(Environment<CartPole>);

/// Piecewise-constant schedule of evaluation-return distributions for the
/// scripted process. Segment i covers cycles [start_cycle_i, start_cycle_{i+1}).
struct ScriptedProcessSpec {
  struct Segment {
    std::size_t start_cycle;
    double mean;
    double noise_std;
  };
  std::vector<Segment> segments;
  std::size_t episodes_per_cycle = 30;

  const Segment& at(std::size_t cycle) const {
    const Segment* found = nullptr;
    for (const auto& seg : segments) {
      if (seg.start_cycle <= cycle && (found == nullptr || seg.start_cycle >= found->start_cycle)) found = &seg;
    }
    if (found == nullptr) throw ConfigError("scripted schedule undefined for cycle " + std::to_string(cycle));
    return *found;
  }

  // Mean `high` before `degrade_at`, `low` from it on, same noise everywhere.
  static ScriptedProcessSpec step_down(double high, double low, double noise_std, std::size_t degrade_at,
                                       std::size_t episodes_per_cycle) {
    return {{{0, high, noise_std}, {degrade_at, low, noise_std}}, episodes_per_cycle};
  }
};

/// Learner whose only parameter counts the training episodes it has consumed.
/// It announces that counter as its action; reverting rewinds it.
class ScriptedLearner {
 public:
  Action act(const Observation&, Rng&) const { return {counter_}; }
  Action act_mean(const Observation&) const { return {counter_}; }
  void train_on_episode(const Trajectory&) { counter_ += 1.0; }
  void ingest_offline(const Trajectory&) {}
  ParameterVector get_parameters() const { return {{counter_}, std::nullopt}; }
  void set_parameters(const ParameterVector& p) {
    if (p.values.size() != 1) throw InvalidInput("scripted learner has exactly one parameter");
    counter_ = p.values[0];
  }
  double counter() const noexcept { return counter_; }

 private:
  double counter_ = 0.0;
};

/// One-step episodes whose return is drawn from the schedule entry of the
/// cycle implied by the learner's counter (counter / episodes_per_cycle), so a
/// policy evaluated after cycle c is scored with segment c. The noise draw is
/// taken from the reset stream.
class ScriptedEnvironment {
 public:
  explicit ScriptedEnvironment(ScriptedProcessSpec spec) : spec_(std::move(spec)) {
    if (spec_.episodes_per_cycle == 0) throw ConfigError("episodes per cycle must be >= 1");
    if (spec_.segments.empty()) throw ConfigError("scripted schedule has no segments");
  }

  Observation reset(Rng& rng) {
    noise_ = rng.normal();
    done_ = false;
    return {0.0};
  }

  StepResult step(const Action& action) {
    if (done_) throw ContractViolation("scripted step called after the episode finished");
    if (action.size() != 1 || !(action[0] >= 0.0)) throw ContractViolation("scripted action must be a counter");
    const auto cycle = static_cast<std::size_t>(action[0]) / spec_.episodes_per_cycle;
    const auto& seg = spec_.at(cycle);
    done_ = true;
    return {{0.0}, seg.mean + seg.noise_std * noise_, true};
  }

  std::size_t max_episode_length() const noexcept { return 1; }

 private:
  ScriptedProcessSpec spec_;
  double noise_ = 0.0;
  bool done_ = true;
};

static_assert(Learner<ScriptedLearner>);
static_assert(Environment<ScriptedEnvironment>);

inline std::pair<ScriptedEnvironment, ScriptedLearner> scripted_env_and_learner(const ScriptedProcessSpec& spec) {
  return {ScriptedEnvironment(spec), ScriptedLearner()};
}

}  // namespace ctrlz
