#pragma once

// Checkpoint "TGM1": magic, format version byte, the ModelConfig, then every
// stored tensor (ModelParams::stored() order) as a shape header followed by
// little-endian float32 values. Loading narrows nothing further: a checkpoint
// re-saved after loading is byte-identical.

#include <filesystem>
#include <string>
#include <string_view>

#include "trailgrade/nn/model.hpp"

namespace trailgrade::nn {

std::string encode_checkpoint(const ModelParams& params);
ModelParams decode_checkpoint(std::string_view bytes);

// Also writes `<path>.txt` with the config as key=value lines.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

std::string describe_config(const ModelConfig& config);

}  // namespace trailgrade::nn
