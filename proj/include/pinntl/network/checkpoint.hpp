#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pinntl/network/network.hpp"

namespace pinntl {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
  std::string problem_tag;
};

/// Little-endian binary file: magic, version, meta, layer sizes, parameters
/// (row-major, layer order) with masks, then the optional LoRA section.
void save_checkpoint(const Network& net, const CheckpointMeta& meta,
                     const std::filesystem::path& path);

/// Throws LoadError on a bad magic, version mismatch or truncated file.
Network load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

}  // namespace pinntl
