#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "vpp/mini_mllm.hpp"

namespace vpp {

// Adaptive-moment optimizer with decoupled weight decay, per-group rates
// (taken from ModelParams::groups) and cosine decay after a linear warmup.
struct TrainSchedule {
  int epochs = 5;
  int batch_size = 8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double clip_norm = 1.0;  // <= 0 disables clipping
  double warmup_frac = 0.05;
  double min_lr_frac = 0.05;
  std::uint64_t seed = 1;  // data order

  void validate() const;
  // Multiplier on every group rate at `step` of `total`.
  double lr_factor(long step, long total) const;
};

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  // mean per-sample loss over each epoch
  long steps = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Deterministic for a fixed thread count and bit-identical across thread
// counts: per-sample gradients are summed in batch order.
// Throws TrainingError naming the first group with a non-finite value.
TrainResult train(const MiniMLLM& model, ModelParams params,
                  std::span<const PreparedSample> data, const TrainSchedule& schedule,
                  const EpochCallback& on_epoch = {});

void write_loss_csv(const std::filesystem::path& path, const TrainResult& result);

// Toy from-scratch rates: one base rate, with the prompt and the local
// projector at ten times the base as in the published recipe's ratios.
void apply_toy_rates(ModelParams& params, double base);

}  // namespace vpp
