#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ddil/net.hpp"
#include "ddil/schedule.hpp"

namespace ddil {

struct OptimizerSnapshot {
  AdamWConfig config;
  std::uint64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// Everything needed to resume or evaluate a model. Byte layout is documented
// in docs/checkpoint_format.md; all integers and doubles are little-endian.
struct Checkpoint {
  NoiseSchedule schedule;
  Mlp model;
  std::optional<OptimizerSnapshot> optimizer;
  std::optional<std::vector<double>> ema_params;
};

OptimizerSnapshot snapshot(const AdamW& optimizer);
AdamW restore_optimizer(const OptimizerSnapshot& snapshot, std::size_t n_params);

std::string encode_checkpoint(const Checkpoint& checkpoint);
// Throws DataError on a malformed or truncated buffer.
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ddil
