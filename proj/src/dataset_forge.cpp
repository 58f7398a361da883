#include "vpp/dataset_forge.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "vpp/errors.hpp"

namespace vpp {

namespace {

using nlohmann::json;

const std::regex& box_regex() {
  static const std::regex re(
      R"(\[\s*(-?\d*\.?\d+)\s*,\s*(-?\d*\.?\d+)\s*,\s*(-?\d*\.?\d+)\s*,\s*(-?\d*\.?\d+)\s*\])");
  return re;
}

// <phrase:[x1, y1, x2, y2]>
const std::regex& special_token_regex() {
  static const std::regex re(
      R"(<\s*([^<>:]+?)\s*:\s*\[\s*(-?\d*\.?\d+)\s*,\s*(-?\d*\.?\d+)\s*,\s*(-?\d*\.?\d+)\s*,\s*(-?\d*\.?\d+)\s*\]\s*>)");
  return re;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string strip_suffix_punct(std::string s) {
  s = trim(std::move(s));
  while (!s.empty() && (s.back() == '.' || s.back() == '?' || s.back() == '!')) s.pop_back();
  return trim(std::move(s));
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

std::string remove_all(std::string s, std::string_view needle) {
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle)) {
    s.erase(pos, needle.size());
  }
  return s;
}

double to_double(const std::string& s) { return std::stod(s); }

const json& require_field(const json& rec, const char* key) {
  if (!rec.is_object() || !rec.contains(key)) {
    throw ParseError(std::string("missing field \"") + key + "\"");
  }
  return rec.at(key);
}

std::string image_of(const json& rec) {
  const json& img = require_field(rec, "image");
  if (!img.is_string()) throw ParseError("field \"image\" must be a string");
  return img.get<std::string>();
}

std::vector<Turn> parse_turns(const json& rec) {
  const json& conv = require_field(rec, "conversations");
  if (!conv.is_array() || conv.empty()) {
    throw ParseError("field \"conversations\" must be a non-empty array");
  }
  std::vector<Turn> turns;
  for (std::size_t i = 0; i < conv.size(); ++i) {
    const json& t = conv[i];
    if (!t.is_object() || !t.contains("from") || !t.contains("value") ||
        !t["from"].is_string() || !t["value"].is_string()) {
      throw ParseError("conversation turn " + std::to_string(i) +
                       " needs string fields \"from\" and \"value\"");
    }
    const std::string from = t["from"].get<std::string>();
    Turn turn;
    if (from == "human" || from == "user") {
      turn.role = Role::Human;
    } else if (from == "gpt" || from == "assistant") {
      turn.role = Role::Assistant;
    } else {
      throw ParseError("conversation turn " + std::to_string(i) + " has unknown role \"" + from +
                       "\"");
    }
    turn.text = t["value"].get<std::string>();
    turns.push_back(std::move(turn));
  }
  return turns;
}

std::vector<NormBox> boxes_in(const std::string& text) {
  std::vector<NormBox> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), box_regex());
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.push_back({to_double(m[1]), to_double(m[2]), to_double(m[3]), to_double(m[4])});
  }
  return out;
}

NormBox checked_norm(const NormBox& b) {
  if (!b.valid()) {
    throw ValidationError("normalized box " + format_box(b) + " violates 0<=x1<=x2<=1, 0<=y1<=y2<=1");
  }
  return quantize_box(b);
}

NormBox from_pixels(double x1, double y1, double x2, double y2, const ImageDims& dims) {
  return quantize_box(normalize_box(PixelBox{x1, y1, x2, y2, dims}));
}

std::string grounding_question(std::string_view templ, const std::string& expression) {
  return std::string(kImageToken) + std::string(templ) + expression + ".";
}

Sample ingest_llava(const json& rec, const ImageDims& dims) {
  Sample s;
  s.image_ref = image_of(rec);
  s.dims = dims;
  s.turns = parse_turns(rec);
  if (rec.contains("system")) {
    if (!rec["system"].is_string()) throw ParseError("field \"system\" must be a string");
    if (rec["system"].get<std::string>() == kVppInstruction) {
      s.instruction_mode = InstructionMode::System;
    }
  }
  for (const Turn& t : s.turns) {
    if (t.role == Role::Human && t.text.find(kVppInstruction) != std::string::npos) {
      s.instruction_mode = InstructionMode::SampleLevel;
      break;
    }
  }
  const Turn* last_assistant = nullptr;
  for (const Turn& t : s.turns)
    if (t.role == Role::Assistant) last_assistant = &t;
  if (!last_assistant) throw ParseError("conversation has no assistant turn");

  const auto answer_boxes = boxes_in(last_assistant->text);
  if (!answer_boxes.empty()) {
    s.task = Task::Grounding;
    // The expression is whatever follows the template in the closest human turn.
    std::string mention;
    for (const Turn& t : s.turns) {
      if (t.role != Role::Human) continue;
      const auto pos = t.text.find("describes: ");
      if (pos != std::string::npos) {
        mention = strip_suffix_punct(t.text.substr(pos + 11));
      }
    }
    for (const NormBox& b : answer_boxes) s.boxes.push_back({checked_norm(b), mention});
    return s;
  }
  for (const Turn& t : s.turns) {
    if (t.role != Role::Human) continue;
    for (const NormBox& b : boxes_in(t.text)) {
      s.boxes.push_back({checked_norm(b), trim(last_assistant->text)});
    }
  }
  if (s.boxes.empty()) throw ParseError("conversation carries no box");
  s.task = Task::RegionCaption;
  return s;
}

struct SpecialToken {
  std::string phrase;
  double x1, y1, x2, y2;
};

std::vector<SpecialToken> special_tokens(const std::string& text) {
  std::vector<SpecialToken> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), special_token_regex());
       it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.push_back({trim(m[1]), to_double(m[2]), to_double(m[3]), to_double(m[4]),
                   to_double(m[5])});
  }
  return out;
}

Sample ingest_cb_grd(const json& rec, const ImageDims& dims) {
  const std::vector<Turn> turns = parse_turns(rec);
  std::vector<SpecialToken> tokens;
  for (const Turn& t : turns) {
    if (t.role != Role::Assistant) continue;
    for (auto& tok : special_tokens(t.text)) tokens.push_back(std::move(tok));
  }
  if (tokens.empty()) throw ParseError("no <phrase:[x1, y1, x2, y2]> token in assistant turns");
  const SpecialToken& tok = tokens.front();
  Sample s;
  s.image_ref = image_of(rec);
  s.dims = dims;
  s.task = Task::Grounding;
  const NormBox box = from_pixels(tok.x1, tok.y1, tok.x2, tok.y2, dims);
  s.turns = {{Role::Human, grounding_question(kGroundingTemplate, tok.phrase)},
             {Role::Assistant, format_box(box)}};
  s.boxes = {{box, tok.phrase}};
  return s;
}

Sample ingest_cb_ref(const json& rec, const ImageDims& dims) {
  const std::vector<Turn> turns = parse_turns(rec);
  std::vector<SpecialToken> tokens;
  std::string caption;
  for (const Turn& t : turns) {
    if (t.role == Role::Human) {
      for (auto& tok : special_tokens(t.text)) tokens.push_back(std::move(tok));
    } else if (caption.empty()) {
      caption = trim(t.text);
    }
  }
  if (tokens.empty()) throw ParseError("no <phrase:[x1, y1, x2, y2]> token in human turns");
  if (caption.empty()) throw ParseError("conversation has no assistant caption");
  const SpecialToken& tok = tokens.front();
  Sample s;
  s.image_ref = image_of(rec);
  s.dims = dims;
  s.task = Task::RegionCaption;
  const NormBox box = from_pixels(tok.x1, tok.y1, tok.x2, tok.y2, dims);
  s.turns = {{Role::Human, std::string(kImageToken) + std::string(kCaptionTemplate) +
                               format_box(box) + "."},
             {Role::Assistant, caption}};
  s.boxes = {{box, caption}};
  return s;
}

Sample ingest_genixer(const json& rec, const ImageDims& dims, std::size_t record_index) {
  const json& bbox = require_field(rec, "bbox");
  const json& expr = require_field(rec, "expression");
  if (!bbox.is_array() || bbox.size() != 4) throw ParseError("\"bbox\" must hold 4 numbers");
  for (const json& v : bbox)
    if (!v.is_number()) throw ParseError("\"bbox\" must hold 4 numbers");
  if (!expr.is_string()) throw ParseError("\"expression\" must be a string");
  const std::string expression = trim(expr.get<std::string>());
  Sample s;
  s.image_ref = image_of(rec);
  s.dims = dims;
  s.task = Task::Grounding;
  const NormBox box = from_pixels(bbox[0].get<double>(), bbox[1].get<double>(),
                                  bbox[2].get<double>(), bbox[3].get<double>(), dims);
  const auto templates = grounding_templates();
  s.turns = {{Role::Human,
              grounding_question(templates[record_index % templates.size()], expression)},
             {Role::Assistant, format_box(box)}};
  s.boxes = {{box, expression}};
  return s;
}

std::string human_text_without_instruction(std::string text) {
  const std::string with_space = std::string(kVppInstruction) + " ";
  text = remove_all(std::move(text), with_space);
  return remove_all(std::move(text), kVppInstruction);
}

}  // namespace

const char* to_string(SourceKind k) {
  switch (k) {
    case SourceKind::Llava665K: return "llava665k";
    case SourceKind::CbGrd: return "cb-grd";
    case SourceKind::CbRef: return "cb-ref";
    case SourceKind::Genixer: return "genixer";
  }
  return "?";
}

const char* to_string(Task t) { return t == Task::Grounding ? "grounding" : "region_caption"; }

const char* to_string(InstructionMode m) {
  switch (m) {
    case InstructionMode::None: return "none";
    case InstructionMode::System: return "system";
    case InstructionMode::SampleLevel: return "sample";
  }
  return "?";
}

SourceKind parse_source_kind(const std::string& s) {
  if (s == "llava665k" || s == "llava") return SourceKind::Llava665K;
  if (s == "cb-grd" || s == "cbgrd") return SourceKind::CbGrd;
  if (s == "cb-ref" || s == "cbref") return SourceKind::CbRef;
  if (s == "genixer") return SourceKind::Genixer;
  throw ContractError("unknown source kind '" + s + "' (llava665k, cb-grd, cb-ref, genixer)");
}

InstructionMode parse_instruction_mode(const std::string& s) {
  if (s == "none") return InstructionMode::None;
  if (s == "system") return InstructionMode::System;
  if (s == "sample" || s == "sample-level") return InstructionMode::SampleLevel;
  throw ContractError("unknown instruction mode '" + s + "' (none, system, sample)");
}

std::span<const std::string_view> grounding_templates() {
  static const std::array<std::string_view, 1> templates{kGroundingTemplate};
  return templates;
}

std::string Sample::query_text() const {
  std::string q;
  for (const Turn& t : turns) {
    if (t.role == Role::Human) {
      q = t.text;
      break;
    }
  }
  if (starts_with(q, kImageToken)) q.erase(0, kImageToken.size());
  q = remove_all(std::move(q), "<image>");
  if (instruction_mode == InstructionMode::System) {
    q = std::string(kVppInstruction) + " " + human_text_without_instruction(std::move(q));
  }
  return q;
}

std::string Sample::answer_text() const {
  for (auto it = turns.rbegin(); it != turns.rend(); ++it)
    if (it->role == Role::Assistant) return it->text;
  return {};
}

std::string format_box(const NormBox& b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "[%.2f, %.2f, %.2f, %.2f]", b.x1, b.y1, b.x2, b.y2);
  return buf;
}

DimsTable read_dims_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dims table " + path.string());
  DimsTable table;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    std::istringstream ls(line);
    std::string id;
    int w = 0, h = 0;
    if (!(ls >> id >> w >> h) || w < 1 || h < 1) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": expected \"<image> <width> <height>\"");
    }
    table[id] = ImageDims(w, h);
  }
  return table;
}

Sample ingest(SourceKind kind, const nlohmann::json& record, const ImageDims& dims,
              std::size_t record_index) {
  switch (kind) {
    case SourceKind::Llava665K: return ingest_llava(record, dims);
    case SourceKind::CbGrd: return ingest_cb_grd(record, dims);
    case SourceKind::CbRef: return ingest_cb_ref(record, dims);
    case SourceKind::Genixer: return ingest_genixer(record, dims, record_index);
  }
  throw ContractError("unknown source kind");
}

std::vector<Sample> ingest_file(SourceKind kind, const std::filesystem::path& path,
                                const DimsTable& dims) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t index = 0;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      const json rec = json::parse(line);
      ImageDims d;
      if (rec.is_object() && rec.contains("dims")) {
        const json& jd = rec["dims"];
        if (!jd.is_array() || jd.size() != 2) throw ParseError("\"dims\" must be [width, height]");
        d = ImageDims(jd[0].get<int>(), jd[1].get<int>());
      } else {
        const std::string img = image_of(rec);
        const auto it = dims.find(img);
        if (it == dims.end()) throw ValidationError("no dims entry for image \"" + img + "\"");
        d = it->second;
      }
      out.push_back(ingest(kind, rec, d, index++));
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    } catch (const ContractError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  return out;
}

nlohmann::ordered_json to_json(const Sample& s) {
  nlohmann::ordered_json j;
  j["image"] = s.image_ref;
  j["dims"] = {s.dims.width, s.dims.height};
  nlohmann::ordered_json conv = nlohmann::ordered_json::array();
  for (const Turn& t : s.turns) {
    nlohmann::ordered_json jt;
    jt["from"] = t.role == Role::Human ? "human" : "gpt";
    jt["value"] = t.text;
    conv.push_back(std::move(jt));
  }
  j["conversations"] = std::move(conv);
  j["task"] = to_string(s.task);
  if (s.instruction_mode == InstructionMode::System) j["system"] = std::string(kVppInstruction);
  return j;
}

Sample from_json(const nlohmann::json& j) {
  const json& jd = require_field(j, "dims");
  if (!jd.is_array() || jd.size() != 2) throw ParseError("\"dims\" must be [width, height]");
  return ingest_llava(j, ImageDims(jd[0].get<int>(), jd[1].get<int>()));
}

void write_jsonl(const std::filesystem::path& path, std::span<const Sample> samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const Sample& s : samples) out << to_json(s).dump() << '\n';
}

std::vector<Sample> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<Sample> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (trim(line).empty()) continue;
    try {
      out.push_back(from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Sample inject_instruction(const Sample& s, InstructionMode mode) {
  Sample out = s;
  for (Turn& t : out.turns) {
    if (t.role == Role::Human) t.text = human_text_without_instruction(t.text);
  }
  out.instruction_mode = mode;
  if (mode != InstructionMode::SampleLevel) return out;
  for (Turn& t : out.turns) {
    if (t.role != Role::Human) continue;
    const std::string instr = std::string(kVppInstruction) + " ";
    if (starts_with(t.text, kImageToken)) {
      t.text.insert(kImageToken.size(), instr);
    } else {
      t.text.insert(0, instr);
    }
    break;
  }
  return out;
}

std::vector<std::string> validate(std::span<const Sample> samples) {
  static const std::regex bracketed(R"(\[[^\[\]]*\])");
  static const std::regex strict(R"(\[(\d\.\d\d), (\d\.\d\d), (\d\.\d\d), (\d\.\d\d)\])");
  static const std::regex has_digit(R"(\d)");
  std::vector<std::string> report;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    const std::string who = "sample " + std::to_string(i) + " (" + s.image_ref + ")";
    for (const BoxMention& b : s.boxes) {
      if (!b.box.valid()) report.push_back(who + ": box " + format_box(b.box) + " out of range");
    }
    for (const Turn& t : s.turns) {
      for (auto it = std::sregex_iterator(t.text.begin(), t.text.end(), bracketed);
           it != std::sregex_iterator(); ++it) {
        const std::string tuple = it->str();
        if (!std::regex_search(tuple, has_digit)) continue;
        std::smatch m;
        if (!std::regex_match(tuple, m, strict)) {
          report.push_back(who + ": coordinate format violation in \"" + tuple + "\"");
          continue;
        }
        const NormBox b{to_double(m[1]), to_double(m[2]), to_double(m[3]), to_double(m[4])};
        if (!b.valid()) report.push_back(who + ": serialized box " + tuple + " out of range");
      }
    }
    if (s.task == Task::Grounding) {
      if (s.turns.empty() || s.turns.back().role != Role::Assistant) {
        report.push_back(who + ": grounding sample must end with an assistant turn");
      } else {
        const std::string& a = s.turns.back().text;
        const auto n = std::distance(std::sregex_iterator(a.begin(), a.end(), box_regex()),
                                     std::sregex_iterator());
        if (n != 1) {
          report.push_back(who + ": final assistant turn holds " + std::to_string(n) +
                           " boxes, expected exactly one");
        }
      }
    }
  }
  return report;
}

}  // namespace vpp
