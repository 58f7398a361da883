#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "vpp/axis_render.hpp"
#include "vpp/checkpoint.hpp"
#include "vpp/dataset_forge.hpp"
#include "vpp/errors.hpp"
#include "vpp/eval_harness.hpp"
#include "vpp/global_vpp.hpp"
#include "vpp/png_io.hpp"
#include "vpp/report.hpp"
#include "vpp/sweep.hpp"
#include "vpp/synth.hpp"
#include "vpp/threads.hpp"
#include "vpp/trainer.hpp"

namespace fs = std::filesystem;
using namespace vpp;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

struct Options {
  std::uint64_t seed = 1;
  std::string out = ".";
  bool quiet = false;
  std::string dump_config;

  // Axis and overlay, in axis-canvas pixels.
  std::string variant = "edge";
  double unit = 0.1;
  int font = 10;
  int canvas = 336;
  double alpha = 0.95;
  int mask_width = 30;

  // Toy experiment.
  int image_side = 64;
  int dim = 32;
  int heads = 4;
  int layers = 2;
  int queries = 8;
  std::string fusion = "concat";
  std::string components = "both";
  int epochs = 5;
  int batch_size = 8;
  double lr = 2e-3;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  std::uint64_t data_seed = 7;
  std::string instruction = "sample";
};

void log(const Options& o, const std::string& msg) {
  if (!o.quiet) std::cout << msg << '\n';
}

AxisSpec axis_spec(const Options& o) {
  AxisSpec s;
  s.variant = parse_axis_variant(o.variant);
  s.unit_scale = o.unit;
  s.font_size = o.font;
  s.canvas = o.canvas;
  s.validate();
  return s;
}

ExperimentConfig experiment(const Options& o) {
  ExperimentConfig e = toy_experiment();
  e.model.image_side = o.image_side;
  e.model.dim = o.dim;
  e.model.heads = o.heads;
  e.model.encoder_layers = o.layers;
  e.model.decoder_layers = o.layers;
  e.model.local_layers = o.layers;
  e.model.k_queries = o.queries;
  e.model.fusion = parse_fusion(o.fusion);
  e.model.axis = axis_spec(o);
  e.model.overlay.alpha = o.alpha;
  e.model.overlay.mask_width =
      int(std::lround(double(o.mask_width) * o.image_side / double(o.canvas)));
  e.model.seed = o.seed;
  e = apply_sweep_value(e, SweepParam::Components, o.components);
  e.schedule.epochs = o.epochs;
  e.schedule.batch_size = o.batch_size;
  e.schedule.seed = o.seed;
  e.base_lr = o.lr;
  e.n_train = o.n_train;
  e.n_test = o.n_test;
  e.synth.seed = o.data_seed;
  e.synth.instruction_mode = parse_instruction_mode(o.instruction);
  e.model.validate();
  return e;
}

fs::path out_dir(const Options& o) {
  fs::create_directories(o.out);
  return fs::path(o.out);
}

// A corpus either from a `synth` directory or generated from the flags.
struct LoadedSplit {
  std::vector<Raster> images;
  std::vector<Sample> samples;
};

LoadedSplit load_split(const fs::path& dir, const std::string& split) {
  LoadedSplit out;
  out.samples = read_jsonl(dir / (split + ".jsonl"));
  for (const Sample& s : out.samples) out.images.push_back(read_png(dir / "images" / s.image_ref));
  return out;
}

int cmd_render_axis(const Options& o, const std::string& name) {
  const AxisSpec spec = axis_spec(o);
  const AxisLayout layout = layout_axis(spec);
  const fs::path path = out_dir(o) / name;
  write_png(path, render_layout(layout));
  log(o, "wrote " + path.string() + " (" + std::to_string(layout.label_count_x()) + " x-labels, " +
             std::to_string(layout.label_count_y()) + " y-labels)");
  return kOk;
}

int cmd_preview(const Options& o, const std::string& image, std::uint64_t synth_index,
                const std::string& name) {
  Raster input;
  if (!image.empty()) {
    input = read_png(image);
  } else {
    SynthSceneSpec ss;
    ss.seed = o.data_seed;
    input = synth_corpus(ss, synth_index + 1).items[synth_index].image;
  }
  PreprocessConfig pc;
  pc.target_side = o.canvas;
  const GlobalVPP vpp = init_global_vpp(axis_spec(o), pc);
  const Raster preview = preview_overlay(input, vpp, make_mask(o.canvas, o.mask_width), o.alpha, pc);
  const fs::path path = out_dir(o) / name;
  write_png(path, preview);
  log(o, "wrote " + path.string());
  return kOk;
}

int cmd_forge(const Options& o, const std::string& kind, const std::vector<std::string>& inputs,
              const std::string& dims_path, const std::string& name) {
  const DimsTable dims = dims_path.empty() ? DimsTable{} : read_dims_table(dims_path);
  const InstructionMode mode = parse_instruction_mode(o.instruction);
  std::vector<Sample> all;
  for (const std::string& in : inputs) {
    for (Sample& s : ingest_file(parse_source_kind(kind), in, dims)) {
      all.push_back(inject_instruction(s, mode));
    }
  }
  const auto problems = validate(all);
  if (!problems.empty()) {
    for (const std::string& p : problems) std::cerr << "validation: " << p << '\n';
    return kData;
  }
  const fs::path path = out_dir(o) / name;
  write_jsonl(path, all);
  log(o, "wrote " + std::to_string(all.size()) + " samples to " + path.string());
  return kOk;
}

int cmd_synth(const Options& o, std::size_t n) {
  const ExperimentConfig e = experiment(o);
  const SynthCorpus corpus = synth_corpus(e.synth, n);
  const fs::path dir = out_dir(o);
  fs::create_directories(dir / "images");
  std::vector<Sample> train, test;
  for (std::size_t i : corpus.train) train.push_back(corpus.items[i].sample);
  for (std::size_t i : corpus.test) test.push_back(corpus.items[i].sample);
  for (const SynthItem& it : corpus.items) write_png(dir / "images" / it.sample.image_ref, it.image);
  write_jsonl(dir / "train.jsonl", train);
  write_jsonl(dir / "test.jsonl", test);
  log(o, "wrote " + std::to_string(n) + " scenes (" + std::to_string(train.size()) + " train, " +
             std::to_string(test.size()) + " test) to " + dir.string());
  return kOk;
}

PreparedCorpus corpus_for(const ExperimentConfig& e, const std::string& data_dir) {
  if (data_dir.empty()) return prepare_corpus(e);
  PreparedCorpus pc;
  const LoadedSplit train = load_split(data_dir, "train");
  std::vector<std::string> texts;
  for (std::size_t i = 0; i < std::min(e.n_train, train.samples.size()); ++i) {
    texts.push_back(train.samples[i].query_text());
    texts.push_back(train.samples[i].answer_text());
  }
  pc.vocab = Vocab::harvest(texts);
  const MiniMLLM model(e.model, pc.vocab);
  for (std::size_t i = 0; i < std::min(e.n_train, train.samples.size()); ++i)
    pc.train.push_back(model.prepare(train.images[i], train.samples[i]));
  pc.id = fingerprint_hex(fs::absolute(data_dir).string());
  return pc;
}

int cmd_train(const Options& o, const std::string& data_dir) {
  const ExperimentConfig e = experiment(o);
  const PreparedCorpus corpus = corpus_for(e, data_dir);
  const MiniMLLM model(e.model, corpus.vocab);
  ModelParams params = model.init_params();
  apply_toy_rates(params, e.base_lr);
  log(o, "training on " + std::to_string(corpus.train.size()) + " samples, " +
             std::to_string(params.count()) + " parameters");
  TrainResult r = train(model, std::move(params), corpus.train, e.schedule, [&](int ep, double l) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "epoch %d mean loss %.6f", ep, l);
    log(o, buf);
  });
  const fs::path dir = out_dir(o);
  save_checkpoint(dir / "model.ckpt", {e.model, corpus.vocab, r.params});
  write_loss_csv(dir / "loss.csv", r);
  log(o, "wrote " + (dir / "model.ckpt").string() + " and " + (dir / "loss.csv").string());
  return kOk;
}

int cmd_eval(const Options& o, const std::string& ckpt, const std::string& data_dir,
             const std::string& split) {
  const Checkpoint ck = load_checkpoint(ckpt);
  const MiniMLLM model(ck.config, ck.vocab);
  std::vector<PreparedSample> samples;
  std::string dataset_id;
  if (!data_dir.empty()) {
    const LoadedSplit s = load_split(data_dir, split);
    for (std::size_t i = 0; i < s.samples.size(); ++i)
      samples.push_back(model.prepare(s.images[i], s.samples[i]));
    dataset_id = fs::absolute(data_dir).string() + "/" + split;
  } else {
    ExperimentConfig e = experiment(o);
    e.model = ck.config;
    const SynthCorpus sc = synth_corpus(e.synth, 2 * std::max(e.n_train, e.n_test));
    const auto& idx = split == "train" ? sc.train : sc.test;
    const std::size_t n = std::min(split == "train" ? e.n_train : e.n_test, idx.size());
    for (std::size_t i = 0; i < n; ++i)
      samples.push_back(model.prepare(sc.items[idx[i]].image, sc.items[idx[i]].sample));
    dataset_id = "synth:" + std::to_string(e.synth.seed) + ":" + split + ":" + std::to_string(n);
  }
  if (samples.empty()) throw ValidationError("split '" + split + "' is empty");
  EvalReport rep;
  rep.fingerprint = fingerprint(ck.config, dataset_id);
  rep.rows.push_back(evaluate(model, ck.params, samples, split));
  const fs::path dir = out_dir(o);
  emit_report(dir / "eval.md", render(rep, ReportFormat::Markdown));
  emit_report(dir / "eval.csv", render(rep, ReportFormat::Csv));
  if (!o.quiet) std::cout << render(rep, ReportFormat::Markdown);
  return kOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int cmd_sweep(const Options& o, const std::string& param, const std::string& values,
              const std::string& seeds, const std::string& cache) {
  SweepSpec spec;
  spec.param = parse_sweep_param(param);
  spec.values = split_list(values);
  spec.seeds.clear();
  for (const std::string& s : split_list(seeds)) {
    try {
      spec.seeds.push_back(std::stoull(s));
    } catch (const std::exception&) {
      throw ContractError("--seeds: '" + s + "' is not an unsigned integer");
    }
  }
  spec.epochs = o.epochs;
  const fs::path dir = out_dir(o);
  const fs::path cache_dir = cache.empty() ? dir / "cache" : fs::path(cache);
  const SweepTable table = run_sweep(spec, experiment(o), cache_dir, [&](const CellResult& c) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s=%s seed %llu: %s acc %.4f%s", param.c_str(), c.value.c_str(),
                  static_cast<unsigned long long>(c.seed), c.ok ? "ok" : "FAILED", c.accuracy,
                  c.cached ? " (cached)" : "");
    log(o, buf);
    if (!c.ok) std::cerr << "cell " << c.value << " seed " << c.seed << ": " << c.error << '\n';
  });
  const SweepSummary s = summarize(table);
  const std::string base = "sweep_" + param;
  emit_report(dir / (base + ".md"), render(s, ReportFormat::Markdown));
  emit_report(dir / (base + ".csv"), render(s, ReportFormat::Csv));
  if (!o.quiet) std::cout << render(s, ReportFormat::Markdown);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();
  CLI::App app{"Visual position prompt toolkit: axis prompts, data forging, toy grounding model"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key=value config file; explicit flags win");
  Options o;
  app.add_option("--seed", o.seed, "Model and data-order seed")->capture_default_str();
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_flag("--quiet", o.quiet, "Suppress progress output");
  app.add_option("--dump-config", o.dump_config, "Write the effective configuration to this file");
  app.add_option("--variant", o.variant, "Axis variant: edge, cross, external")->capture_default_str();
  app.add_option("--unit", o.unit, "Axis unit scale")->capture_default_str();
  app.add_option("--font", o.font, "Axis label font size")->capture_default_str();
  app.add_option("--canvas", o.canvas, "Axis canvas side in pixels")->capture_default_str();
  app.add_option("--alpha", o.alpha, "Overlay blend weight")->capture_default_str();
  app.add_option("--mask-width", o.mask_width, "Mask border width in canvas pixels")
      ->capture_default_str();
  app.add_option("--image-side", o.image_side, "Toy model input side")->capture_default_str();
  app.add_option("--dim", o.dim, "Toy model width")->capture_default_str();
  app.add_option("--heads", o.heads, "Attention heads")->capture_default_str();
  app.add_option("--layers", o.layers, "Layers per transformer stack")->capture_default_str();
  app.add_option("--queries", o.queries, "Local prompt query count")->capture_default_str();
  app.add_option("--fusion", o.fusion, "concat, ca-lpq, ca-gpq")->capture_default_str();
  app.add_option("--components", o.components, "none, global, local, both")->capture_default_str();
  app.add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  app.add_option("--batch-size", o.batch_size, "Samples per optimizer step")->capture_default_str();
  app.add_option("--lr", o.lr, "Base learning rate")->capture_default_str();
  app.add_option("--n-train", o.n_train, "Training samples")->capture_default_str();
  app.add_option("--n-test", o.n_test, "Test samples")->capture_default_str();
  app.add_option("--data-seed", o.data_seed, "Synthetic corpus seed")->capture_default_str();
  app.add_option("--instruction", o.instruction, "none, system, sample")->capture_default_str();

  std::string axis_name = "axis.png";
  auto* render_cmd = app.add_subcommand("render-axis", "Render an axis image to PNG");
  render_cmd->add_option("--name", axis_name, "Output file name")->capture_default_str();

  std::string preview_image, preview_name = "preview.png";
  std::uint64_t preview_index = 0;
  auto* preview_cmd = app.add_subcommand("preview-overlay", "Overlay the prompt on an image");
  preview_cmd->add_option("--image", preview_image, "Input PNG (default: a synthetic scene)");
  preview_cmd->add_option("--synth-index", preview_index, "Synthetic scene index")
      ->capture_default_str();
  preview_cmd->add_option("--name", preview_name, "Output file name")->capture_default_str();

  std::string forge_kind, forge_dims, forge_name = "unified.jsonl";
  std::vector<std::string> forge_inputs;
  auto* forge_cmd = app.add_subcommand("forge", "Unify native annotation files");
  forge_cmd->add_option("--kind", forge_kind, "llava665k, cb-grd, cb-ref, genixer")->required();
  forge_cmd->add_option("--input", forge_inputs, "Line-delimited source files")->required();
  forge_cmd->add_option("--dims", forge_dims, "Dims sidecar: 'image width height' lines");
  forge_cmd->add_option("--name", forge_name, "Output file name")->capture_default_str();

  std::size_t synth_n = 2000;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic grounding corpus");
  synth_cmd->add_option("--n", synth_n, "Number of scenes")->capture_default_str();

  std::string train_data;
  auto* train_cmd = app.add_subcommand("train", "Train the toy model");
  train_cmd->add_option("--data", train_data, "Corpus directory from 'synth' (default: generate)");

  std::string eval_ckpt, eval_data, eval_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint at IoU 0.5");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "Corpus directory from 'synth' (default: generate)");
  eval_cmd->add_option("--split", eval_split, "train or test")->capture_default_str();

  std::string sweep_param = "components", sweep_values, sweep_seeds = "1,2,3", sweep_cache;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate a grid of configurations");
  sweep_cmd->add_option("--param", sweep_param,
                        "alpha, mask-width, axis-variant, font-size, fusion, instruction, "
                        "components")
      ->capture_default_str();
  sweep_cmd->add_option("--values", sweep_values, "Comma-separated values (default per param)");
  sweep_cmd->add_option("--seeds", sweep_seeds, "Comma-separated seeds")->capture_default_str();
  sweep_cmd->add_option("--cache", sweep_cache, "Cell cache directory (default <out>/cache)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (argc <= 1) std::cerr << app.help();
    return kUsage;
  }

  try {
    if (!o.dump_config.empty()) {
      std::ofstream cfg(o.dump_config);
      if (!cfg) throw std::runtime_error("--dump-config: cannot write " + o.dump_config);
      cfg << app.config_to_str(true, false);
    }
    if (*render_cmd) return cmd_render_axis(o, axis_name);
    if (*preview_cmd) return cmd_preview(o, preview_image, preview_index, preview_name);
    if (*forge_cmd) return cmd_forge(o, forge_kind, forge_inputs, forge_dims, forge_name);
    if (*synth_cmd) return cmd_synth(o, synth_n);
    if (*train_cmd) return cmd_train(o, train_data);
    if (*eval_cmd) return cmd_eval(o, eval_ckpt, eval_data, eval_split);
    if (*sweep_cmd) return cmd_sweep(o, sweep_param, sweep_values, sweep_seeds, sweep_cache);
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const vpp::ParseError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
