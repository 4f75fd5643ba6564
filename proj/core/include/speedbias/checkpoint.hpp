#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "speedbias/transformer.hpp"

namespace speedbias::nmt {

struct CheckpointInfo {
  bool quantized = false;
  std::string config_hash;
};

// Binary container: magic, JSON header (config, hash, tensor table), then
// per-tensor payload in layout order (f64, or int8 + scale for quantized
// projection weights). Writes are atomic (tmp file + rename).
void save_checkpoint(const std::filesystem::path& file, const Params& params,
                     bool quantized);

struct LoadedCheckpoint {
  Params params;  // dequantized when the file was quantized
  CheckpointInfo info;
};

// expected_config, when given, must hash-match the stored config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& file,
                                 const std::optional<ModelConfig>& expected_config =
                                     std::nullopt);

// digest of the raw parameter payload; equal for checkpoints saved from
// identical weights
std::string weights_digest(const Params& params);

}  // namespace speedbias::nmt
