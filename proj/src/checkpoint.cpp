#include "vpp/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vpp/errors.hpp"

namespace vpp {

namespace {

constexpr const char* kMagic = "vpp-checkpoint 1";

}  // namespace

nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["image_side"] = c.image_side;
  j["patch"] = c.patch;
  j["dim"] = c.dim;
  j["mlp_ratio"] = c.mlp_ratio;
  j["encoder_layers"] = c.encoder_layers;
  j["decoder_layers"] = c.decoder_layers;
  j["local_layers"] = c.local_layers;
  j["heads"] = c.heads;
  j["k_queries"] = c.k_queries;
  j["max_text_len"] = c.max_text_len;
  j["fusion"] = to_string(c.fusion);
  j["alpha"] = c.overlay.alpha;
  j["mask_width"] = c.overlay.mask_width;
  j["use_global"] = c.use_global;
  j["use_local"] = c.use_local;
  j["axis_variant"] = to_string(c.axis.variant);
  j["axis_unit"] = c.axis.unit_scale;
  j["axis_font"] = c.axis.font_size;
  j["axis_canvas"] = c.axis.canvas;
  j["seed"] = c.seed;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    if (k == "image_side") c.image_side = v.get<int>();
    else if (k == "patch") c.patch = v.get<int>();
    else if (k == "dim") c.dim = v.get<int>();
    else if (k == "mlp_ratio") c.mlp_ratio = v.get<int>();
    else if (k == "encoder_layers") c.encoder_layers = v.get<int>();
    else if (k == "decoder_layers") c.decoder_layers = v.get<int>();
    else if (k == "local_layers") c.local_layers = v.get<int>();
    else if (k == "heads") c.heads = v.get<int>();
    else if (k == "k_queries") c.k_queries = v.get<int>();
    else if (k == "max_text_len") c.max_text_len = v.get<int>();
    else if (k == "fusion") c.fusion = parse_fusion(v.get<std::string>());
    else if (k == "alpha") c.overlay.alpha = v.get<double>();
    else if (k == "mask_width") c.overlay.mask_width = v.get<int>();
    else if (k == "use_global") c.use_global = v.get<bool>();
    else if (k == "use_local") c.use_local = v.get<bool>();
    else if (k == "axis_variant") c.axis.variant = parse_axis_variant(v.get<std::string>());
    else if (k == "axis_unit") c.axis.unit_scale = v.get<double>();
    else if (k == "axis_font") c.axis.font_size = v.get<int>();
    else if (k == "axis_canvas") c.axis.canvas = v.get<int>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else throw ParseError("unknown model config key '" + k + "'");
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  nlohmann::ordered_json header;
  header["config"] = to_json(ck.config);
  header["vocab"] = ck.vocab.extras();
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  for (Group g : kAllGroups) {
    const GroupSettings& s = ck.params.settings(g);
    char lr[40];
    std::snprintf(lr, sizeof lr, "%a", s.lr);
    groups[to_string(g)] = {{"frozen", s.frozen}, {"lr", lr}};
  }
  header["groups"] = groups;
  out << kMagic << '\n' << header.dump() << '\n';
  char buf[40];
  for (const Param& p : ck.params.params) {
    out << p.name << ' ' << to_string(p.group) << ' ' << p.value.rows << ' ' << p.value.cols << '\n';
    for (std::size_t i = 0; i < p.value.v.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%a", p.value.v[i]);
      out << (i ? " " : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw ParseError(path.string() + ":1: not a checkpoint (expected '" + kMagic + "')");
  }
  if (!std::getline(in, line)) throw ParseError(path.string() + ":2: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ":2: " + e.what());
  }
  const auto extras = header.at("vocab").get<std::vector<std::string>>();
  Checkpoint ck{model_config_from_json(header.at("config")), Vocab::from_extras(extras), {}};
  for (Group g : kAllGroups) {
    const auto& s = header.at("groups").at(to_string(g));
    ck.params.settings(g).frozen = s.at("frozen").get<bool>();
    ck.params.settings(g).lr = std::strtod(s.at("lr").get<std::string>().c_str(), nullptr);
  }
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream hs(line);
    Param p;
    std::string group;
    int rows = 0, cols = 0;
    if (!(hs >> p.name >> group >> rows >> cols) || rows < 0 || cols < 0) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad parameter header");
    }
    p.group = parse_group(group);
    p.value = Matrix(rows, cols);
    if (!std::getline(in, line)) {
      throw ParseError(path.string() + ": truncated values for " + p.name);
    }
    ++lineno;
    const char* c = line.c_str();
    for (double& x : p.value.v) {
      char* end = nullptr;
      x = std::strtod(c, &end);
      if (end == c) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": too few values for " +
                         p.name);
      }
      c = end;
    }
    ck.params.params.push_back(std::move(p));
  }
  return ck;
}

}  // namespace vpp
