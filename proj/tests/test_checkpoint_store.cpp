#include <gtest/gtest.h>

#include <bit>
#include <filesystem>
#include <limits>
#include <random>

#include "ctrlz/checkpoint_file.hpp"
#include "ctrlz/checkpoint_store.hpp"
#include "oracles.hpp"

using namespace ctrlz;

namespace {

ParameterVector params(std::vector<double> v) { return {std::move(v), std::nullopt}; }

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ctrlz_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(CheckpointStore, IdsStartAtZeroAndIncrease) {
  CheckpointStore store;
  EXPECT_EQ(store.store(params({1}), {1.0}, 0), 0u);
  EXPECT_EQ(store.store(params({2}), {1.0}, 30), 1u);
  EXPECT_EQ(store.store(params({3}), {1.0}, 60), 2u);
  EXPECT_EQ(store.size(), 3u);
}

TEST(CheckpointStore, RejectsBadInput) {
  CheckpointStore store;
  EXPECT_THROW(store.store(params({NAN}), {1.0}, 0), InvalidInput);
  store.store(params({1}), {1.0}, 10);
  EXPECT_THROW(store.store(params({1}), {1.0}, 5), InvalidInput);
  EXPECT_THROW(CheckpointStore(std::optional<std::size_t>(0)), InvalidInput);
}

TEST(CheckpointStore, CapacityKeepsBestPlusNewest) {
  CheckpointStore store(std::optional<std::size_t>(2));
  store.store(params({0}), {5.0, 5.0}, 0);
  store.store(params({1}), {9.0, 9.0}, 1);
  store.store(params({2}), {7.0, 7.0}, 2);
  ASSERT_EQ(store.size(), 2u);
  EXPECT_EQ(store.checkpoints()[0].evaluation_mean, 9.0);
  EXPECT_EQ(store.checkpoints()[1].evaluation_mean, 7.0);
  EXPECT_FALSE(store.contains(0));
  // Newest is always kept even when it is the worst.
  store.store(params({3}), {1.0}, 3);
  EXPECT_TRUE(store.contains(1));
  EXPECT_TRUE(store.contains(3));
  EXPECT_EQ(store.store(params({4}), {1.0}, 4), 4u);
}

TEST(CheckpointStore, CapacityMatchesEnumeratedRule) {
  // Against a direct restatement: newest plus the k-1 best of the rest.
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> reward(0, 9);
  for (std::size_t k = 1; k <= 4; ++k) {
    CheckpointStore store(k);
    std::vector<std::pair<double, CheckpointId>> all;
    for (std::uint64_t i = 0; i < 25; ++i) {
      const double r = reward(gen);
      const auto id = store.store(params({r}), {r}, i);
      all.emplace_back(r, id);
      ASSERT_EQ(store.size(), std::min<std::size_t>(k, all.size()));
      ASSERT_EQ(store.checkpoints().back().id, id);
      // Nothing evicted beats a kept non-newest checkpoint.
      for (const auto& [mean, cid] : all) {
        if (store.contains(cid) || cid == id) continue;
        for (const auto& kept : store.checkpoints()) {
          if (kept.id == id) continue;
          ASSERT_GE(kept.evaluation_mean, mean);
        }
      }
    }
  }
}

TEST(CheckpointStore, JudgeExamples) {
  {
    CheckpointStore store;
    store.store(params({0}), {0, 1, 2}, 0);
    const auto v = store.judge({3, 4, 5}, Comparator::mann_whitney, 0.1);
    ASSERT_EQ(v.scores.size(), 1u);
    EXPECT_EQ(v.scores[0].first, 0u);
    EXPECT_EQ(v.scores[0].second.value(), 1.0);
    EXPECT_FALSE(v.revert);
    EXPECT_FALSE(v.target_id.has_value());
  }
  {
    CheckpointStore store;
    store.store(params({0}), {3, 4, 5}, 0);
    const auto v = store.judge({0, 1, 2}, Comparator::mann_whitney, 0.1);
    EXPECT_EQ(v.min_score.value(), 0.0);
    EXPECT_TRUE(v.revert);
    EXPECT_EQ(v.target_id, 0u);
  }
  {
    // Both score 0 against the current policy; A has the higher mean.
    CheckpointStore store;
    const auto a = store.store(params({1}), {10, 11, 12}, 0);
    store.store(params({2}), {5, 6, 7}, 1);
    const RewardSamples current{0, 1, 2};
    EXPECT_EQ(oracle::brute_force_rho(current.values(), std::vector<double>{10, 11, 12}), 0.0);
    EXPECT_EQ(oracle::brute_force_rho(current.values(), std::vector<double>{5, 6, 7}), 0.0);
    const auto v = store.judge(current, Comparator::mann_whitney, 0.1);
    EXPECT_EQ(v.scores[0].second.value(), 0.0);
    EXPECT_EQ(v.scores[1].second.value(), 0.0);
    EXPECT_EQ(v.target_id, a);
  }
}

TEST(CheckpointStore, TieOnMeanFallsBackToLowestId) {
  CheckpointStore store;
  store.store(params({1}), {4, 6}, 0);
  store.store(params({2}), {5, 5}, 1);
  const auto v = store.judge({0}, Comparator::mann_whitney, 0.5);
  EXPECT_EQ(v.target_id, 0u);
}

TEST(CheckpointStore, JudgeInvariants) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> d(0.0, 1.0);
  CheckpointStore store;
  for (std::uint64_t i = 0; i < 8; ++i) {
    std::vector<double> e(10);
    for (auto& x : e) x = d(gen);
    store.store(params({double(i)}), RewardSamples(e), i);
  }
  std::vector<double> cur(10);
  for (auto& x : cur) x = d(gen);
  const RewardSamples current(cur);
  for (auto c : {Comparator::mann_whitney, Comparator::gaussian, Comparator::mean}) {
    const auto v = store.judge(current, c, 0.3);
    double mn = 1.0;
    for (const auto& s : v.scores) mn = std::min(mn, s.second.value());
    EXPECT_EQ(v.min_score.value(), mn);
    EXPECT_EQ(v.revert, mn < 0.3);
    EXPECT_EQ(v.target_id.has_value(), v.revert);
    // Pure: same inputs, same verdict.
    const auto again = store.judge(current, c, 0.3);
    EXPECT_EQ(again.min_score, v.min_score);
    EXPECT_EQ(again.target_id, v.target_id);
    EXPECT_FALSE(store.judge(current, c, 0.0).revert);
  }
  // Strict domination of every stored evaluation never reverts.
  EXPECT_FALSE(store.judge({100, 101}, Comparator::mann_whitney, 1.0).revert);
}

TEST(CheckpointStore, JudgeErrors) {
  CheckpointStore store;
  EXPECT_THROW(store.judge({1}, Comparator::mann_whitney, 0.1), InvalidState);
  store.store(params({0}), {1}, 0);
  EXPECT_THROW(store.judge({1}, Comparator::mann_whitney, 1.5), InvalidInput);
}

TEST(CheckpointStore, RestoreIsBitExactAndKeepsHistory) {
  CheckpointStore store;
  const ParameterVector p{{0.1, -0.0, 1e-310, -7.25}, std::vector<double>{0.5, 0.0, 2.0, 1e-20}};
  const auto id = store.store(p, {1, 2}, 0);
  EXPECT_TRUE(bit_equal(store.restore(id), p));
  EXPECT_THROW(store.restore(7), NotFound);

  // Revert to 0 then keep storing; 0 is still intact.
  store.store(params({9}), {3}, 30);
  (void)store.restore(id);
  store.store(params({10}), {4}, 60);
  EXPECT_TRUE(bit_equal(store.restore(id), p));
}

TEST(CheckpointStore, PersistsFiles) {
  const auto dir = scratch_dir("persist");
  CheckpointStore store;
  store.persist_to(dir, "run3_");
  const auto id = store.store(params({1.5, -2.5}), {7, 8, 9}, 30);
  const auto rec = read_checkpoint_file(dir / ("run3_ckpt_" + std::to_string(id) + ".bin"));
  EXPECT_EQ(rec.id, id);
  EXPECT_EQ(rec.episode_index, 30u);
  EXPECT_EQ(rec.params, (std::vector<double>{1.5, -2.5}));
  EXPECT_EQ(rec.evaluation, (std::vector<double>{7, 8, 9}));
}

TEST(CheckpointFile, HeaderLayout) {
  const CheckpointRecord rec{0x0102030405060708ULL, 42, {1.0}, {2.0, 3.0}};
  const auto bytes = encode_checkpoint(rec);
  ASSERT_EQ(bytes.size(), 8u + 4 + 8 * 4 + 8 * 3);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "CTRLZCKP");
  EXPECT_EQ(bytes[8], 1);  // version, little-endian u32
  EXPECT_EQ(bytes[9] | bytes[10] | bytes[11], 0);
  EXPECT_EQ(bytes[12], 0x08);  // id low byte first
  EXPECT_EQ(bytes[19], 0x01);
  EXPECT_EQ(bytes[20], 42);
  // 1.0 = 0x3FF0000000000000, so the last byte of the first parameter is 0x3F.
  EXPECT_EQ(bytes[44 + 7], 0x3F);
  EXPECT_EQ(bytes[44 + 6], 0xF0);
}

TEST(CheckpointFile, RoundTripRandomBitPatterns) {
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 200; ++trial) {
    CheckpointRecord rec{gen(), gen() % 100000, {}, {}};
    const std::size_t np = gen() % 50, ne = 1 + gen() % 30;
    while (rec.params.size() < np) {
      const double v = std::bit_cast<double>(gen());
      if (std::isfinite(v)) rec.params.push_back(v);
    }
    for (std::size_t i = 0; i < ne; ++i) rec.evaluation.push_back(static_cast<double>(gen() % 400) - 200.0);
    const auto back = decode_checkpoint(encode_checkpoint(rec));
    ASSERT_EQ(back.id, rec.id);
    ASSERT_EQ(back.episode_index, rec.episode_index);
    ASSERT_TRUE(bit_equal(back.params, rec.params));
    ASSERT_TRUE(bit_equal(back.evaluation, rec.evaluation));
  }
}

TEST(CheckpointFile, RejectsCorruptInput) {
  auto bytes = encode_checkpoint({1, 2, {1.0, 2.0}, {3.0}});
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), InvalidInput);
  auto bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(decode_checkpoint(bad_version), InvalidInput);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), InvalidInput);
  EXPECT_THROW(decode_checkpoint(std::vector<unsigned char>(20, 0)), InvalidInput);
  EXPECT_THROW(read_checkpoint_file("/nonexistent/ckpt.bin"), NotFound);
}
