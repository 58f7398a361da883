#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vpp/geometry.hpp"
#include "vpp/mini_mllm.hpp"

namespace vpp {

struct BoxParse {
  std::optional<NormBox> box;
  std::string reason;  // why box is empty
};

// First bracketed 4-tuple of decimals. Lenient mode clamps into [0,1] and
// swaps reversed corners; strict mode requires the exact serialized form
// ("[0.52, 0.59, 0.82, 0.83]") and a valid box.
BoxParse parse_box_detailed(std::string_view response, bool strict = false);
std::optional<NormBox> parse_box(std::string_view response, bool strict = false);

struct EvalRow {
  std::string split;
  std::size_t n = 0;
  double accuracy = 0.0;
  std::size_t parse_failures = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string fingerprint;
  double threshold = 0.5;
};

// Hex FNV-1a digest of arbitrary text.
std::string fingerprint_hex(std::string_view text);
std::string fingerprint(const ModelConfig& cfg, std::string_view dataset_id);

// Scores responder(i) against truths[i]; parse failures count as misses.
using Responder = std::function<std::string(std::size_t)>;
EvalRow evaluate_responses(const Responder& responder, std::span<const NormBox> truths,
                           const std::string& split, double threshold = 0.5,
                           bool strict = false);

// Greedy generation on every sample, then scoring. Samples must carry truth.
EvalRow evaluate(const MiniMLLM& model, const ModelParams& params,
                 std::span<const PreparedSample> samples, const std::string& split,
                 double threshold = 0.5, int max_len = 24);

}  // namespace vpp
