#include "vpp/sweep.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "vpp/checkpoint.hpp"
#include "vpp/errors.hpp"
#include "vpp/eval_harness.hpp"

namespace vpp {

const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::Alpha: return "alpha";
    case SweepParam::MaskWidth: return "mask-width";
    case SweepParam::AxisVariant: return "axis-variant";
    case SweepParam::FontSize: return "font-size";
    case SweepParam::Fusion: return "fusion";
    case SweepParam::InstructionMode: return "instruction";
    case SweepParam::Components: return "components";
  }
  return "?";
}

SweepParam parse_sweep_param(const std::string& s) {
  for (SweepParam p : {SweepParam::Alpha, SweepParam::MaskWidth, SweepParam::AxisVariant,
                       SweepParam::FontSize, SweepParam::Fusion, SweepParam::InstructionMode,
                       SweepParam::Components}) {
    if (s == to_string(p)) return p;
  }
  throw ContractError("unknown sweep parameter '" + s +
                      "' (alpha, mask-width, axis-variant, font-size, fusion, instruction, "
                      "components)");
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = vpp::to_json(model);
  j["schedule"] = {{"epochs", schedule.epochs},         {"batch_size", schedule.batch_size},
                   {"beta1", schedule.beta1},           {"beta2", schedule.beta2},
                   {"eps", schedule.eps},               {"weight_decay", schedule.weight_decay},
                   {"clip_norm", schedule.clip_norm},   {"warmup_frac", schedule.warmup_frac},
                   {"min_lr_frac", schedule.min_lr_frac}, {"seed", schedule.seed}};
  j["base_lr"] = base_lr;
  nlohmann::ordered_json shapes = nlohmann::ordered_json::array();
  for (Shape s : synth.shapes) shapes.push_back(to_string(s));
  j["synth"] = {{"seed", synth.seed},
                {"min_objects", synth.min_objects},
                {"max_objects", synth.max_objects},
                {"shapes", shapes},
                {"canvas", synth.canvas},
                {"min_side_frac", synth.min_side_frac},
                {"max_side_frac", synth.max_side_frac},
                {"superlative_rate", synth.superlative_rate},
                {"instruction", to_string(synth.instruction_mode)}};
  j["n_train"] = n_train;
  j["n_test"] = n_test;
  j["max_answer_tokens"] = max_answer_tokens;
  return j;
}

ExperimentConfig toy_experiment() {
  ExperimentConfig e;
  e.model.dim = 32;
  return e;
}

PreparedCorpus prepare_corpus(const ExperimentConfig& cfg) {
  const std::size_t n = 2 * std::max(cfg.n_train, cfg.n_test);
  const SynthCorpus sc = synth_corpus(cfg.synth, n);
  PreparedCorpus pc;
  std::vector<std::string> texts;
  const std::size_t n_train = std::min(cfg.n_train, sc.train.size());
  const std::size_t n_test = std::min(cfg.n_test, sc.test.size());
  for (std::size_t i = 0; i < n_train; ++i) {
    const Sample& s = sc.items[sc.train[i]].sample;
    texts.push_back(s.query_text());
    texts.push_back(s.answer_text());
  }
  pc.vocab = Vocab::harvest(texts);
  const MiniMLLM model(cfg.model, pc.vocab);
  pc.train.resize(n_train);
  pc.test.resize(n_test);
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < long(n_train + n_test); ++i) {
    if (std::size_t(i) < n_train) {
      const SynthItem& it = sc.items[sc.train[i]];
      pc.train[i] = model.prepare(it.image, it.sample);
    } else {
      const SynthItem& it = sc.items[sc.test[i - n_train]];
      pc.test[i - n_train] = model.prepare(it.image, it.sample);
    }
  }
  nlohmann::ordered_json id = cfg.to_json()["synth"];
  id["n"] = n;
  id["image_side"] = cfg.model.image_side;
  pc.id = fingerprint_hex(id.dump());
  return pc;
}

nlohmann::ordered_json to_json(const CellResult& c) {
  nlohmann::ordered_json j;
  j["value"] = c.value;
  j["seed"] = c.seed;
  j["ok"] = c.ok;
  j["accuracy"] = c.accuracy;
  j["parse_failures"] = c.parse_failures;
  j["n_test"] = c.n_test;
  j["epoch_loss"] = c.epoch_loss;
  j["error"] = c.error;
  j["fingerprint"] = c.fingerprint;
  return j;
}

CellResult cell_from_json(const nlohmann::json& j) {
  CellResult c;
  c.value = j.at("value").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.ok = j.at("ok").get<bool>();
  c.accuracy = j.at("accuracy").get<double>();
  c.parse_failures = j.at("parse_failures").get<std::size_t>();
  c.n_test = j.at("n_test").get<std::size_t>();
  c.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
  c.error = j.at("error").get<std::string>();
  c.fingerprint = j.at("fingerprint").get<std::string>();
  return c;
}

CellResult run_cell(const ExperimentConfig& cfg, const std::string& value, std::uint64_t seed,
                    const PreparedCorpus& corpus, const std::filesystem::path& cache_dir) {
  ExperimentConfig c = cfg;
  c.model.seed = seed;
  c.schedule.seed = seed;
  CellResult r;
  r.value = value;
  r.seed = seed;
  r.fingerprint = fingerprint_hex(c.to_json().dump() + "|" + corpus.id);
  const std::filesystem::path cache_file =
      cache_dir.empty() ? std::filesystem::path() : cache_dir / ("cell_" + r.fingerprint + ".json");
  if (!cache_file.empty() && std::filesystem::exists(cache_file)) {
    std::ifstream in(cache_file);
    try {
      CellResult cached = cell_from_json(nlohmann::json::parse(in));
      cached.value = value;
      cached.cached = true;
      return cached;
    } catch (const std::exception&) {
      // Unreadable cache entries are recomputed.
    }
  }
  try {
    const MiniMLLM model(c.model, corpus.vocab);
    ModelParams params = model.init_params();
    apply_toy_rates(params, c.base_lr);
    TrainResult tr = train(model, std::move(params), corpus.train, c.schedule);
    r.epoch_loss = tr.epoch_loss;
    const EvalRow row = evaluate(model, tr.params, corpus.test, "test", 0.5, c.max_answer_tokens);
    r.accuracy = row.accuracy;
    r.parse_failures = row.parse_failures;
    r.n_test = row.n;
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  if (!cache_file.empty() && r.ok) {
    std::filesystem::create_directories(cache_dir);
    std::ofstream out(cache_file);
    out << to_json(r).dump(1) << '\n';
  }
  return r;
}

std::vector<std::string> default_sweep_values(SweepParam p) {
  switch (p) {
    case SweepParam::Alpha: return {"0.85", "0.9", "0.95", "1.0"};
    case SweepParam::MaskWidth: return {"2", "4", "6", "none"};
    case SweepParam::AxisVariant: return {"edge", "cross", "external"};
    case SweepParam::FontSize: return {"5", "10"};
    case SweepParam::Fusion: return {"ca-lpq", "ca-gpq", "concat"};
    case SweepParam::InstructionMode: return {"none", "system", "sample"};
    case SweepParam::Components: return {"none", "global", "local", "both"};
  }
  return {};
}

ExperimentConfig apply_sweep_value(ExperimentConfig e, SweepParam p, const std::string& value) {
  auto number = [&](const std::string& what) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size()) throw ContractError(what + " value '" + value + "' is not a number");
    return v;
  };
  switch (p) {
    case SweepParam::Alpha:
      e.model.overlay.alpha = number("alpha");
      break;
    case SweepParam::MaskWidth:
      e.model.overlay.mask_width =
          value == "none" ? (e.model.image_side + 1) / 2 : int(number("mask-width"));
      break;
    case SweepParam::AxisVariant:
      e.model.axis.variant = parse_axis_variant(value);
      break;
    case SweepParam::FontSize:
      e.model.axis.font_size = int(number("font-size"));
      break;
    case SweepParam::Fusion:
      e.model.fusion = parse_fusion(value);
      e.model.use_local = true;
      break;
    case SweepParam::InstructionMode:
      e.synth.instruction_mode = parse_instruction_mode(value);
      break;
    case SweepParam::Components:
      if (value == "none") {
        e.model.use_global = false;
        e.model.use_local = false;
      } else if (value == "global") {
        e.model.use_global = true;
        e.model.use_local = false;
      } else if (value == "local") {
        e.model.use_global = false;
        e.model.use_local = true;
      } else if (value == "both") {
        e.model.use_global = true;
        e.model.use_local = true;
      } else {
        throw ContractError("components value '" + value + "' (none, global, local, both)");
      }
      break;
  }
  e.model.validate();
  return e;
}

void SweepSpec::normalize() {
  if (values.empty()) values = default_sweep_values(param);
  if (seeds.empty()) throw ContractError("sweep: at least one seed required");
  if (epochs < 1) throw ContractError("sweep: epochs must be >= 1");
  auto has = [&](auto pred) { return std::any_of(values.begin(), values.end(), pred); };
  if (param == SweepParam::Alpha &&
      !has([](const std::string& v) { return std::stod(v) == 1.0; })) {
    values.push_back("1.0");
  }
  if (param == SweepParam::MaskWidth && !has([](const std::string& v) { return v == "none"; })) {
    values.push_back("none");
  }
  const ExperimentConfig probe = toy_experiment();
  for (const std::string& v : values) (void)apply_sweep_value(probe, param, v);
}

SweepTable run_sweep(SweepSpec spec, const ExperimentConfig& base,
                     const std::filesystem::path& cache_dir, const CellCallback& on_cell) {
  spec.normalize();
  SweepTable table;
  table.param = spec.param;
  table.values = spec.values;
  std::ostringstream fp;
  fp << base.to_json().dump() << '|' << to_string(spec.param) << '|' << spec.epochs;
  for (const std::string& v : spec.values) fp << '|' << v;
  for (std::uint64_t s : spec.seeds) fp << '|' << s;
  table.fingerprint = fingerprint_hex(fp.str());

  std::map<std::string, PreparedCorpus> corpora;
  for (const std::string& v : spec.values) {
    ExperimentConfig cfg = apply_sweep_value(base, spec.param, v);
    cfg.schedule.epochs = spec.epochs;
    nlohmann::ordered_json key = cfg.to_json()["synth"];
    key["n_train"] = cfg.n_train;
    key["n_test"] = cfg.n_test;
    key["image_side"] = cfg.model.image_side;
    auto it = corpora.find(key.dump());
    if (it == corpora.end()) it = corpora.emplace(key.dump(), prepare_corpus(cfg)).first;
    for (std::uint64_t seed : spec.seeds) {
      CellResult r = run_cell(cfg, v, seed, it->second, cache_dir);
      if (on_cell) on_cell(r);
      table.cells.push_back(std::move(r));
    }
  }
  return table;
}

}  // namespace vpp
