#pragma once

// Versioned binary checkpoint files.
//
// Layout (all integers and floats little-endian):
//   8 bytes  magic "CTRLZCKP"
//   u32      format version (1)
//   u64      checkpoint id
//   u64      episode index
//   u64      parameter count P
//   u64      evaluation count E
//   P × f64  parameters
//   E × f64  evaluation returns

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ctrlz/errors.hpp"

namespace ctrlz {

inline constexpr std::array<char, 8> kCheckpointMagic = {'C', 'T', 'R', 'L', 'Z', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct CheckpointRecord {
  std::uint64_t id = 0;
  std::uint64_t episode_index = 0;
  std::vector<double> params;
  std::vector<double> evaluation;
};

namespace detail {

template <class UInt>
void put_le(std::vector<unsigned char>& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

template <class UInt>
UInt get_le(const std::vector<unsigned char>& in, std::size_t& pos) {
  if (in.size() - pos < sizeof(UInt)) throw InvalidInput("checkpoint file truncated");
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(in[pos + i]) << (8 * i);
  pos += sizeof(UInt);
  return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const CheckpointRecord& rec) {
  std::vector<unsigned char> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  out.reserve(44 + 8 * (rec.params.size() + rec.evaluation.size()));
  detail::put_le<std::uint32_t>(out, kCheckpointFormatVersion);
  detail::put_le<std::uint64_t>(out, rec.id);
  detail::put_le<std::uint64_t>(out, rec.episode_index);
  detail::put_le<std::uint64_t>(out, rec.params.size());
  detail::put_le<std::uint64_t>(out, rec.evaluation.size());
  for (double v : rec.params) detail::put_le(out, std::bit_cast<std::uint64_t>(v));
  for (double v : rec.evaluation) detail::put_le(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline CheckpointRecord decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kCheckpointMagic.size() ||
      std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw InvalidInput("not a checkpoint file (bad magic)");
  }
  std::size_t pos = kCheckpointMagic.size();
  const auto version = detail::get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointFormatVersion) {
    throw InvalidInput("unsupported checkpoint format version " + std::to_string(version));
  }
  CheckpointRecord rec;
  rec.id = detail::get_le<std::uint64_t>(bytes, pos);
  rec.episode_index = detail::get_le<std::uint64_t>(bytes, pos);
  const auto n_params = detail::get_le<std::uint64_t>(bytes, pos);
  const auto n_eval = detail::get_le<std::uint64_t>(bytes, pos);
  if ((bytes.size() - pos) / 8 < n_params || (bytes.size() - pos) / 8 - n_params != n_eval ||
      (bytes.size() - pos) % 8 != 0) {
    throw InvalidInput("checkpoint payload size does not match header counts");
  }
  rec.params.reserve(n_params);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    rec.params.push_back(std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, pos)));
  }
  rec.evaluation.reserve(n_eval);
  for (std::uint64_t i = 0; i < n_eval; ++i) {
    rec.evaluation.push_back(std::bit_cast<double>(detail::get_le<std::uint64_t>(bytes, pos)));
  }
  return rec;
}

inline void write_checkpoint_file(const std::filesystem::path& path, const CheckpointRecord& rec) {
  const auto bytes = encode_checkpoint(rec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline CheckpointRecord read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open checkpoint file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace ctrlz
