#include "vpp/eval_harness.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>

#include "vpp/checkpoint.hpp"
#include "vpp/errors.hpp"

namespace vpp {

BoxParse parse_box_detailed(std::string_view response, bool strict) {
  static const std::regex lenient(
      R"(\[\s*(-?\d+(?:\.\d+)?|-?\.\d+)\s*,\s*(-?\d+(?:\.\d+)?|-?\.\d+)\s*,\s*(-?\d+(?:\.\d+)?|-?\.\d+)\s*,\s*(-?\d+(?:\.\d+)?|-?\.\d+)\s*\])");
  static const std::regex exact(R"(\[(\d\.\d\d), (\d\.\d\d), (\d\.\d\d), (\d\.\d\d)\])");
  const std::string text(response);
  std::smatch m;
  if (!std::regex_search(text, m, strict ? exact : lenient)) {
    return {std::nullopt, strict ? "no [d.dd, d.dd, d.dd, d.dd] tuple" : "no bracketed 4-tuple"};
  }
  double v[4];
  for (int i = 0; i < 4; ++i) v[i] = std::stod(m[i + 1].str());
  NormBox b{v[0], v[1], v[2], v[3]};
  if (strict) {
    if (!b.valid()) return {std::nullopt, "tuple is not a valid box"};
    return {b, {}};
  }
  for (double* c : {&b.x1, &b.y1, &b.x2, &b.y2}) *c = std::clamp(*c, 0.0, 1.0);
  if (b.x1 > b.x2) std::swap(b.x1, b.x2);
  if (b.y1 > b.y2) std::swap(b.y1, b.y2);
  return {b, {}};
}

std::optional<NormBox> parse_box(std::string_view response, bool strict) {
  return parse_box_detailed(response, strict).box;
}

std::string fingerprint_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fingerprint(const ModelConfig& cfg, std::string_view dataset_id) {
  return fingerprint_hex(to_json(cfg).dump() + "|" + std::string(dataset_id));
}

EvalRow evaluate_responses(const Responder& responder, std::span<const NormBox> truths,
                           const std::string& split, double threshold, bool strict) {
  if (truths.empty()) throw ContractError("evaluate: empty dataset");
  std::vector<std::optional<NormBox>> preds(truths.size());
  EvalRow row;
  row.split = split;
  row.n = truths.size();
  for (std::size_t i = 0; i < truths.size(); ++i) {
    preds[i] = parse_box(responder(i), strict);
    if (!preds[i]) ++row.parse_failures;
  }
  row.accuracy = acc_at_iou(preds, truths, threshold);
  return row;
}

EvalRow evaluate(const MiniMLLM& model, const ModelParams& params,
                 std::span<const PreparedSample> samples, const std::string& split,
                 double threshold, int max_len) {
  std::vector<NormBox> truths;
  for (const PreparedSample& s : samples) {
    if (!s.truth) throw ContractError("evaluate: sample without ground-truth box");
    truths.push_back(*s.truth);
  }
  std::vector<std::string> responses(samples.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < long(samples.size()); ++i) {
    responses[i] = model.generate(params, samples[i], max_len);
  }
  return evaluate_responses([&](std::size_t i) { return responses[i]; }, truths, split,
                            threshold);
}

}  // namespace vpp
