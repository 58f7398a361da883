#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vpp/geometry.hpp"

namespace vpp {

enum class SourceKind { Llava665K, CbGrd, CbRef, Genixer };
enum class Role { Human, Assistant };
enum class Task { Grounding, RegionCaption };
enum class InstructionMode { None, System, SampleLevel };

const char* to_string(SourceKind k);
const char* to_string(Task t);
const char* to_string(InstructionMode m);
SourceKind parse_source_kind(const std::string& s);
InstructionMode parse_instruction_mode(const std::string& s);

inline constexpr std::string_view kImageToken = "<image>\n";
inline constexpr std::string_view kVppInstruction =
    "Each image is accompanied by axes. If the question pertains to the bounding box "
    "coordinates, refer to the axes for the response.";
inline constexpr std::string_view kGroundingTemplate =
    "Please provide the bounding box coordinate of the region this sentence describes: ";
inline constexpr std::string_view kCaptionTemplate =
    "Please provide a short description for this region: ";

// Grounding templates used to wrap bare expressions.
std::span<const std::string_view> grounding_templates();

struct Turn {
  Role role = Role::Human;
  std::string text;
  bool operator==(const Turn&) const = default;
};

struct BoxMention {
  NormBox box;
  std::string mention;
  bool operator==(const BoxMention&) const = default;
};

// One record of the unified instruction-tuning format.
struct Sample {
  std::string image_ref;
  ImageDims dims;
  std::vector<Turn> turns;
  std::vector<BoxMention> boxes;
  Task task = Task::Grounding;
  InstructionMode instruction_mode = InstructionMode::None;

  bool operator==(const Sample&) const = default;

  // Human text with the image token and any system instruction removed,
  // prefixed by the system instruction in System mode.
  std::string query_text() const;
  std::string answer_text() const;
};

// "[0.52, 0.59, 0.82, 0.83]"
std::string format_box(const NormBox& b);

// Image id -> original dimensions, read from "id width height" lines.
using DimsTable = std::map<std::string, ImageDims>;
DimsTable read_dims_table(const std::filesystem::path& path);

// Converts one native-schema record. Absolute coordinates go through
// normalize_box; all boxes are quantized to two decimals.
// Throws ParseError on schema violations and ValidationError for boxes
// outside the frame.
Sample ingest(SourceKind kind, const nlohmann::json& record, const ImageDims& dims,
              std::size_t record_index = 0);

// Line-delimited file of native records. Dims come from the record's "dims"
// field when present, otherwise from the sidecar table. Errors carry the file
// name and line number.
std::vector<Sample> ingest_file(SourceKind kind, const std::filesystem::path& path,
                                const DimsTable& dims);

// Unified record: {image, dims, conversations, task[, system]}.
nlohmann::ordered_json to_json(const Sample& s);
// Reads a unified record back (the Llava665K schema plus dims).
Sample from_json(const nlohmann::json& j);

void write_jsonl(const std::filesystem::path& path, std::span<const Sample> samples);
std::vector<Sample> read_jsonl(const std::filesystem::path& path);

// SampleLevel puts the instruction at the head of the first human turn,
// System moves it to the system prompt, None removes it. Idempotent.
Sample inject_instruction(const Sample& s, InstructionMode mode);

// Every invariant violation, one message per finding; empty when clean.
std::vector<std::string> validate(std::span<const Sample> samples);

}  // namespace vpp
