#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpp/mini_mllm.hpp"
#include "vpp/synth.hpp"
#include "vpp/trainer.hpp"

namespace vpp {

enum class SweepParam { Alpha, MaskWidth, AxisVariant, FontSize, Fusion, InstructionMode, Components };
const char* to_string(SweepParam p);
SweepParam parse_sweep_param(const std::string& s);

// Everything one training-and-evaluation cell depends on.
struct ExperimentConfig {
  ModelConfig model;
  TrainSchedule schedule;
  double base_lr = 2e-3;
  SynthSceneSpec synth;
  std::size_t n_train = 1000;
  std::size_t n_test = 200;
  int max_answer_tokens = 24;

  nlohmann::ordered_json to_json() const;
};

// The toy configuration used by the CLI defaults and the acceptance runs.
ExperimentConfig toy_experiment();

struct PreparedCorpus {
  Vocab vocab;
  std::vector<PreparedSample> train;
  std::vector<PreparedSample> test;
  std::string id;  // digest of the generating spec
};

// Synthesizes enough scenes for n_train/n_test, harvests the vocabulary from
// the training texts and converts every item to model space.
PreparedCorpus prepare_corpus(const ExperimentConfig& cfg);

struct CellResult {
  std::string value;
  std::uint64_t seed = 0;
  bool ok = false;
  double accuracy = 0.0;
  std::size_t parse_failures = 0;
  std::size_t n_test = 0;
  std::vector<double> epoch_loss;
  std::string error;
  std::string fingerprint;
  bool cached = false;
};

nlohmann::ordered_json to_json(const CellResult& c);
CellResult cell_from_json(const nlohmann::json& j);

// Trains with model seed = schedule seed = `seed`, then evaluates on the test
// split. With a cache directory, results are keyed by configuration digest.
// Failures are captured in the result rather than thrown.
CellResult run_cell(const ExperimentConfig& cfg, const std::string& value, std::uint64_t seed,
                    const PreparedCorpus& corpus, const std::filesystem::path& cache_dir = {});

struct SweepSpec {
  SweepParam param = SweepParam::Components;
  std::vector<std::string> values;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int epochs = 5;

  // Throws ContractError on empty values/seeds or unparsable values. Adds the
  // alpha 1.0 and "none" mask-width endpoints when they are missing.
  void normalize();
};

std::vector<std::string> default_sweep_values(SweepParam p);
ExperimentConfig apply_sweep_value(ExperimentConfig base, SweepParam p, const std::string& value);

struct SweepTable {
  SweepParam param = SweepParam::Components;
  std::vector<std::string> values;
  std::vector<CellResult> cells;  // value-major, seeds in spec order
  std::string fingerprint;
};

using CellCallback = std::function<void(const CellResult&)>;
SweepTable run_sweep(SweepSpec spec, const ExperimentConfig& base,
                     const std::filesystem::path& cache_dir = {}, const CellCallback& on_cell = {});

}  // namespace vpp
