#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctrlz/checkpoint_file.hpp"
#include "ctrlz/errors.hpp"
#include "ctrlz/parameters.hpp"
#include "ctrlz/stat_tests.hpp"

namespace ctrlz {

using CheckpointId = std::uint64_t;

struct Checkpoint {
  CheckpointId id = 0;
  std::uint64_t episode_index = 0;
  ParameterVector params;
  RewardSamples evaluation;
  double evaluation_mean = 0.0;
};

struct ComparisonVerdict {
  std::vector<std::pair<CheckpointId, ImprovementScore>> scores;
  ImprovementScore min_score;
  std::optional<CheckpointId> target_id;
  bool revert = false;
};

/// History of evaluated policies.
///
/// Ids start at 0 and increase by one per stored checkpoint. Restoring never
/// removes history. With a capacity k, a store keeps the newest checkpoint
/// plus the k-1 best by mean evaluation return.
class CheckpointStore {
 public:
  CheckpointStore() = default;
  explicit CheckpointStore(std::optional<std::size_t> capacity) : capacity_(capacity) {
    if (capacity_ && *capacity_ == 0) throw InvalidInput("checkpoint capacity must be at least 1");
  }

  // Every stored checkpoint is also written to `dir/<prefix>ckpt_<id>.bin`.
  void persist_to(std::filesystem::path dir, std::string prefix = {}) {
    persist_dir_ = std::move(dir);
    persist_prefix_ = std::move(prefix);
  }

  CheckpointId store(ParameterVector params, RewardSamples evaluation, std::uint64_t episode_index) {
    if (!params.all_finite()) throw InvalidInput("checkpoint parameters must be finite");
    if (!checkpoints_.empty() && episode_index < checkpoints_.back().episode_index) {
      throw InvalidInput("checkpoint episode index must not decrease");
    }
    const CheckpointId id = next_id_++;
    const double mean = evaluation.mean();
    checkpoints_.push_back(Checkpoint{id, episode_index, std::move(params), std::move(evaluation), mean});
    if (persist_dir_) persist(checkpoints_.back());
    evict();
    return id;
  }

  /// Scores `current_eval` against every stored checkpoint and picks the one
  /// with the lowest score as the revert target. Ties at the minimum go to the
  /// highest mean evaluation return, then the lowest id.
  ComparisonVerdict judge(const RewardSamples& current_eval, Comparator comparator, double threshold) const {
    if (checkpoints_.empty()) throw InvalidState("judge called on an empty checkpoint store");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidInput("threshold must lie in [0, 1]");

    ComparisonVerdict verdict;
    verdict.scores.reserve(checkpoints_.size());
    const Checkpoint* worst = nullptr;
    for (const auto& ckpt : checkpoints_) {
      const auto score = compare(comparator, current_eval, ckpt.evaluation);
      verdict.scores.emplace_back(ckpt.id, score);
      if (worst == nullptr || score < verdict.min_score ||
          (score == verdict.min_score && ckpt.evaluation_mean > worst->evaluation_mean)) {
        worst = &ckpt;
        verdict.min_score = score;
      }
    }
    verdict.revert = verdict.min_score.value() < threshold;
    if (verdict.revert) verdict.target_id = worst->id;
    return verdict;
  }

  const ParameterVector& restore(CheckpointId id) const { return get(id).params; }

  const Checkpoint& get(CheckpointId id) const {
    const auto it = std::find_if(checkpoints_.begin(), checkpoints_.end(), [&](const auto& c) { return c.id == id; });
    if (it == checkpoints_.end()) throw NotFound("no checkpoint with id " + std::to_string(id));
    return *it;
  }

  bool contains(CheckpointId id) const {
    return std::any_of(checkpoints_.begin(), checkpoints_.end(), [&](const auto& c) { return c.id == id; });
  }

  const std::vector<Checkpoint>& checkpoints() const noexcept { return checkpoints_; }
  std::size_t size() const noexcept { return checkpoints_.size(); }
  bool empty() const noexcept { return checkpoints_.empty(); }

 private:
  void evict() {
    if (!capacity_ || checkpoints_.size() <= *capacity_) return;
    // Rank everything but the newest by mean (desc), newer first on ties.
    std::vector<std::size_t> order(checkpoints_.size() - 1);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (checkpoints_[a].evaluation_mean != checkpoints_[b].evaluation_mean) {
        return checkpoints_[a].evaluation_mean > checkpoints_[b].evaluation_mean;
      }
      return checkpoints_[a].id > checkpoints_[b].id;
    });
    std::vector<bool> keep(checkpoints_.size(), false);
    keep.back() = true;
    for (std::size_t i = 0; i + 1 < *capacity_; ++i) keep[order[i]] = true;

    std::vector<Checkpoint> kept;
    kept.reserve(*capacity_);
    for (std::size_t i = 0; i < checkpoints_.size(); ++i) {
      if (keep[i]) kept.push_back(std::move(checkpoints_[i]));
    }
    checkpoints_ = std::move(kept);
  }

  void persist(const Checkpoint& ckpt) const {
    std::filesystem::create_directories(*persist_dir_);
    CheckpointRecord rec{ckpt.id, ckpt.episode_index, ckpt.params.values,
                         {ckpt.evaluation.values().begin(), ckpt.evaluation.values().end()}};
    write_checkpoint_file(*persist_dir_ / (persist_prefix_ + "ckpt_" + std::to_string(ckpt.id) + ".bin"), rec);
  }

  std::vector<Checkpoint> checkpoints_;
  CheckpointId next_id_ = 0;
  std::optional<std::size_t> capacity_;
  std::optional<std::filesystem::path> persist_dir_;
  std::string persist_prefix_;
};

}  // namespace ctrlz
