#pragma once

// Baseline-free REINFORCE with a diagonal Gaussian policy whose mean is a
// two-hidden-layer tanh MLP, optimized with RMSProp (no momentum).
//
// Parameter flattening order (the checkpoint interchange contract):
//   for each layer in input-to-output order: weights row-major [out][in], then biases
//   followed by one log standard deviation per action dimension.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "ctrlz/errors.hpp"
#include "ctrlz/harness.hpp"
#include "ctrlz/parameters.hpp"
#include "ctrlz/rng.hpp"

namespace ctrlz {

/// G_t = r_t + γ G_{t+1}, with G_T = r_T.
inline std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double running = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    running = (i + 1 == rewards.size()) ? rewards[i] : rewards[i] + gamma * running;
    out[i] = running;
  }
  return out;
}

inline std::vector<double> discounted_returns(const Trajectory& traj, double gamma) {
  std::vector<double> rewards;
  rewards.reserve(traj.steps.size());
  for (const auto& s : traj.steps) rewards.push_back(s.reward);
  return discounted_returns(rewards, gamma);
}

class PolicyNetwork {
 public:
  PolicyNetwork(std::size_t obs_dim, std::size_t hidden, std::size_t action_dim, double log_std_init = 0.0)
      : sizes_{obs_dim, hidden, hidden, action_dim} {
    if (obs_dim == 0 || hidden == 0 || action_dim == 0) throw InvalidInput("network dimensions must be positive");
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const std::size_t in = sizes_[l], out = sizes_[l + 1];
      layers_.push_back({in, out, offset, offset + in * out});
      offset += in * out + out;
    }
    log_std_offset_ = offset;
    params_.assign(offset + action_dim, 0.0);
    for (std::size_t d = 0; d < action_dim; ++d) params_[log_std_offset_ + d] = log_std_init;
  }

  /// Uniform(±1/sqrt(fan_in)) weights and biases; log_std is left untouched.
  void initialize(Rng& rng) {
    for (const auto& layer : layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
      for (std::size_t i = 0; i < layer.in * layer.out + layer.out; ++i) {
        params_[layer.w_offset + i] = rng.uniform(-bound, bound);
      }
    }
  }

  std::size_t obs_dim() const noexcept { return sizes_.front(); }
  std::size_t action_dim() const noexcept { return sizes_.back(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  void set_parameters(std::span<const double> values) {
    if (values.size() != params_.size()) throw InvalidInput("parameter vector length mismatch");
    std::copy(values.begin(), values.end(), params_.begin());
  }

  double log_std(std::size_t d) const { return params_[log_std_offset_ + d]; }

  std::vector<double> mean(std::span<const double> obs) const {
    check_obs(obs);
    Activations act;
    forward(obs, act);
    return act.back();
  }

  double log_prob(std::span<const double> obs, std::span<const double> action) const {
    check_obs(obs);
    check_action(action);
    Activations act;
    forward(obs, act);
    const auto& mu = act.back();
    double lp = 0.0;
    for (std::size_t d = 0; d < action.size(); ++d) {
      const double ls = log_std(d);
      const double z = (action[d] - mu[d]) / std::exp(ls);
      lp += -0.5 * z * z - ls - 0.5 * std::log(2.0 * std::numbers::pi);
    }
    return lp;
  }

  /// ∂ log π(action | obs) / ∂θ in flattening order.
  std::vector<double> log_prob_gradient(std::span<const double> obs, std::span<const double> action) const {
    std::vector<double> grad(params_.size(), 0.0);
    accumulate_log_prob_gradient(obs, action, 1.0, grad);
    return grad;
  }

  /// grad += weight · ∂ log π(action | obs) / ∂θ.
  void accumulate_log_prob_gradient(std::span<const double> obs, std::span<const double> action, double weight,
                                    std::span<double> grad) const {
    check_obs(obs);
    check_action(action);
    if (grad.size() != params_.size()) throw InvalidInput("gradient buffer length mismatch");
    Activations act;
    forward(obs, act);

    // Output layer: gradient wrt the Gaussian mean and log_std.
    const auto& mu = act.back();
    std::vector<double> delta(mu.size());
    for (std::size_t d = 0; d < mu.size(); ++d) {
      const double inv_var = std::exp(-2.0 * log_std(d));
      const double diff = action[d] - mu[d];
      delta[d] = diff * inv_var;
      grad[log_std_offset_ + d] += weight * (diff * diff * inv_var - 1.0);
    }

    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& layer = layers_[l];
      const auto& input = act[l];
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double g = weight * delta[o];
        double* gw = &grad[layer.w_offset + o * layer.in];
        for (std::size_t i = 0; i < layer.in; ++i) gw[i] += g * input[i];
        grad[layer.b_offset + o] += g;
      }
      if (l == 0) break;
      // Back through the weights and the tanh of the previous layer.
      std::vector<double> prev(layer.in, 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double* w = &params_[layer.w_offset + o * layer.in];
        for (std::size_t i = 0; i < layer.in; ++i) prev[i] += w[i] * delta[o];
      }
      for (std::size_t i = 0; i < layer.in; ++i) prev[i] *= 1.0 - input[i] * input[i];
      delta = std::move(prev);
    }
  }

 private:
  struct Layer {
    std::size_t in, out, w_offset, b_offset;
  };
  // act[0] is the input, act[l] the output of layer l (tanh for hidden layers).
  using Activations = std::vector<std::vector<double>>;

  void forward(std::span<const double> obs, Activations& act) const {
    act.assign(1, std::vector<double>(obs.begin(), obs.end()));
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& layer = layers_[l];
      const auto& input = act.back();
      std::vector<double> out(layer.out);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double* w = &params_[layer.w_offset + o * layer.in];
        double z = params_[layer.b_offset + o];
        for (std::size_t i = 0; i < layer.in; ++i) z += w[i] * input[i];
        out[o] = (l + 1 < layers_.size()) ? std::tanh(z) : z;
      }
      act.push_back(std::move(out));
    }
  }

  void check_obs(std::span<const double> obs) const {
    if (obs.size() != obs_dim()) throw InvalidInput("observation dimension mismatch");
  }
  void check_action(std::span<const double> action) const {
    if (action.size() != action_dim()) throw InvalidInput("action dimension mismatch");
  }

  std::vector<std::size_t> sizes_;
  std::vector<Layer> layers_;
  std::size_t log_std_offset_ = 0;
  std::vector<double> params_;
};

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double decay = 0.99;
  double epsilon = 1e-8;
};

class RmsProp {
 public:
  RmsProp(std::size_t n, RmsPropConfig config) : config_(config), accumulators_(n, 0.0) {
    if (!(config_.learning_rate >= 0.0)) throw InvalidInput("learning rate must be non-negative");
    if (!(config_.decay >= 0.0 && config_.decay < 1.0)) throw InvalidInput("RMSProp decay must lie in [0, 1)");
  }

  /// Gradient ascent step: params += lr · g / (sqrt(acc) + eps).
  void ascend(std::span<double> params, std::span<const double> grad) {
    if (params.size() != accumulators_.size() || grad.size() != accumulators_.size()) {
      throw InvalidInput("optimizer size mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      accumulators_[i] = config_.decay * accumulators_[i] + (1.0 - config_.decay) * grad[i] * grad[i];
      params[i] += config_.learning_rate * grad[i] / (std::sqrt(accumulators_[i]) + config_.epsilon);
    }
  }

  std::span<const double> accumulators() const noexcept { return accumulators_; }

  void set_accumulators(std::span<const double> values) {
    if (values.size() != accumulators_.size()) throw InvalidInput("optimizer state length mismatch");
    for (double v : values) {
      if (!(v >= 0.0)) throw InvalidInput("optimizer accumulators must be non-negative");
    }
    std::copy(values.begin(), values.end(), accumulators_.begin());
  }

  const RmsPropConfig& config() const noexcept { return config_; }

 private:
  RmsPropConfig config_;
  std::vector<double> accumulators_;
};

struct ReinforceConfig {
  std::size_t hidden = 32;
  double gamma = 0.95;
  double log_std_init = 0.0;
  RmsPropConfig optimizer{};
  // Trajectories per update.
  std::size_t batch_episodes = 1;
  double action_low = -1.0;
  double action_high = 1.0;
};

class ReinforceLearner {
 public:
  ReinforceLearner(std::size_t obs_dim, std::size_t action_dim, ReinforceConfig config, std::uint64_t init_seed)
      : config_(config),
        network_(obs_dim, config.hidden, action_dim, config.log_std_init),
        optimizer_(network_.parameter_count(), config.optimizer) {
    if (!(config_.gamma > 0.0 && config_.gamma <= 1.0)) throw InvalidInput("discount must lie in (0, 1]");
    if (config_.batch_episodes == 0) throw InvalidInput("batch size must be >= 1");
    if (!(config_.action_low <= config_.action_high)) throw InvalidInput("action bounds are inverted");
    Rng rng(init_seed);
    network_.initialize(rng);
  }

  Action act(const Observation& obs, Rng& rng) const {
    Action a = network_.mean(obs);
    for (std::size_t d = 0; d < a.size(); ++d) a[d] += std::exp(network_.log_std(d)) * rng.normal();
    return clip(std::move(a));
  }

  Action act_mean(const Observation& obs) const { return clip(network_.mean(obs)); }

  void train_on_episode(const Trajectory& traj) {
    pending_.push_back(traj);
    if (pending_.size() >= config_.batch_episodes) {
      reinforce_update(pending_);
      pending_.clear();
    }
  }

  void ingest_offline(const Trajectory&) {}

  /// One averaged REINFORCE gradient over `trajectories`, applied with RMSProp.
  void reinforce_update(std::span<const Trajectory> trajectories) {
    if (trajectories.empty()) throw InvalidInput("reinforce update needs at least one trajectory");
    std::vector<double> grad(network_.parameter_count(), 0.0);
    for (const auto& traj : trajectories) {
      if (traj.steps.empty()) throw InvalidInput("trajectory must not be empty");
      const auto returns = discounted_returns(traj, config_.gamma);
      for (std::size_t t = 0; t < traj.steps.size(); ++t) {
        if (returns[t] == 0.0) continue;
        network_.accumulate_log_prob_gradient(traj.steps[t].observation, traj.steps[t].action, returns[t], grad);
      }
    }
    const double scale = 1.0 / static_cast<double>(trajectories.size());
    for (double& g : grad) g *= scale;
    optimizer_.ascend(network_.parameters(), grad);
  }

  ParameterVector get_parameters() const {
    return {{network_.parameters().begin(), network_.parameters().end()},
            std::vector<double>(optimizer_.accumulators().begin(), optimizer_.accumulators().end())};
  }

  // Drops any partially filled batch: it was collected by the old parameters.
  void set_parameters(const ParameterVector& params) {
    network_.set_parameters(params.values);
    if (params.optimizer_state) optimizer_.set_accumulators(*params.optimizer_state);
    pending_.clear();
  }

  const PolicyNetwork& network() const noexcept { return network_; }
  const ReinforceConfig& config() const noexcept { return config_; }

 private:
  Action clip(Action a) const {
    for (double& v : a) v = std::clamp(v, config_.action_low, config_.action_high);
    return a;
  }

  ReinforceConfig config_;
  PolicyNetwork network_;
  RmsProp optimizer_;
  std::vector<Trajectory> pending_;
};

static_assert(Learner<ReinforceLearner>);

}  // namespace ctrlz
