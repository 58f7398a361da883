#pragma once

#include <filesystem>

#include <json.hpp>

#include "vpp/mini_mllm.hpp"

namespace vpp {

nlohmann::ordered_json to_json(const ModelConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Checkpoint {
  ModelConfig config;
  Vocab vocab;
  ModelParams params;
};

// Line-based: a version line, one JSON header line (config, vocabulary,
// group settings), then per parameter a "name group rows cols" line and a
// line of hex-float values. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace vpp
