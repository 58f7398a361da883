#include "vpp/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "vpp/errors.hpp"

namespace vpp {

namespace {

bool all_finite(const Matrix& m) {
  for (double x : m.v)
    if (!std::isfinite(x)) return false;
  return true;
}

std::string first_nonfinite_group(const ModelParams& params, const Gradients& grads) {
  // Values first: a bad value poisons the gradients of everything upstream.
  for (int pass = 0; pass < 2; ++pass) {
    for (Group g : kAllGroups) {
      for (std::size_t i = 0; i < params.params.size(); ++i) {
        if (params.params[i].group != g) continue;
        const bool bad = pass == 0 ? !all_finite(params.params[i].value)
                                   : i < grads.size() && !all_finite(grads[i]);
        if (bad) {
          return std::string(to_string(g)) + " (" + params.params[i].name +
                 (pass == 0 ? " value)" : " gradient)");
        }
      }
    }
  }
  return "none (loss only)";
}

}  // namespace

void TrainSchedule::validate() const {
  if (epochs < 0) throw ContractError("train: epochs must be >= 0");
  if (batch_size < 1) throw ContractError("train: batch_size must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0)) {
    throw ContractError("train: invalid moment parameters");
  }
  if (!(warmup_frac >= 0 && warmup_frac < 1 && min_lr_frac >= 0 && min_lr_frac <= 1)) {
    throw ContractError("train: warmup_frac in [0,1) and min_lr_frac in [0,1] required");
  }
}

double TrainSchedule::lr_factor(long step, long total) const {
  if (total <= 0) return 1.0;
  const long warm = long(std::floor(warmup_frac * double(total)));
  if (step < warm) return double(step + 1) / double(warm + 1);
  const double t = double(step - warm) / double(std::max(1L, total - warm));
  return min_lr_frac + (1.0 - min_lr_frac) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

TrainResult train(const MiniMLLM& model, ModelParams params,
                  std::span<const PreparedSample> data, const TrainSchedule& schedule,
                  const EpochCallback& on_epoch) {
  schedule.validate();
  if (data.empty()) throw ContractError("train: empty corpus");
  const std::size_t np = params.params.size();
  std::vector<Matrix> m1(np), m2(np);
  for (std::size_t i = 0; i < np; ++i) {
    m1[i] = Matrix(params.params[i].value.rows, params.params[i].value.cols);
    m2[i] = m1[i];
  }
  const std::size_t n = data.size();
  const std::size_t bs = std::size_t(schedule.batch_size);
  const long per_epoch = long((n + bs - 1) / bs);
  const long total = per_epoch * schedule.epochs;

  std::mt19937_64 rng(schedule.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  long step = 0;
  std::vector<Gradients> per_sample(bs);
  std::vector<double> losses(bs);
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < n; start += bs, ++step) {
      const std::size_t count = std::min(bs, n - start);
#pragma omp parallel for schedule(dynamic, 1)
      for (long b = 0; b < long(count); ++b) {
        for (Matrix& g : per_sample[b]) std::fill(g.v.begin(), g.v.end(), 0.0);
        losses[b] = model.loss_and_grad(params, data[order[start + b]], per_sample[b]);
      }
      Gradients grad = per_sample[0];
      double batch_loss = losses[0];
      for (std::size_t b = 1; b < count; ++b) {
        batch_loss += losses[b];
        for (std::size_t i = 0; i < np; ++i) {
          double* d = grad[i].v.data();
          const double* s = per_sample[b][i].v.data();
          for (std::size_t j = 0; j < grad[i].v.size(); ++j) d[j] += s[j];
        }
      }
      const double inv = 1.0 / double(count);
      double norm2 = 0.0;
      for (std::size_t i = 0; i < np; ++i) {
        for (double& x : grad[i].v) {
          x *= inv;
          norm2 += x * x;
        }
      }
      if (!std::isfinite(batch_loss) || !std::isfinite(norm2)) {
        throw TrainingError("non-finite loss or gradient at epoch " + std::to_string(epoch + 1) +
                            ", step " + std::to_string(step + 1) +
                            "; first non-finite parameter group: " +
                            first_nonfinite_group(params, grad));
      }
      epoch_sum += batch_loss;
      const double clip = (schedule.clip_norm > 0 && std::sqrt(norm2) > schedule.clip_norm)
                              ? schedule.clip_norm / std::sqrt(norm2)
                              : 1.0;
      const double factor = schedule.lr_factor(step, total);
      const double t = double(step + 1);
      const double c1 = 1.0 - std::pow(schedule.beta1, t);
      const double c2 = 1.0 - std::pow(schedule.beta2, t);
      for (std::size_t i = 0; i < np; ++i) {
        Param& p = params.params[i];
        const GroupSettings& gs = params.settings(p.group);
        if (gs.frozen) continue;
        const double lr = gs.lr * factor;
        double* w = p.value.v.data();
        double* a = m1[i].v.data();
        double* v = m2[i].v.data();
        const double* g = grad[i].v.data();
        for (std::size_t j = 0; j < p.value.v.size(); ++j) {
          const double gj = g[j] * clip;
          a[j] = schedule.beta1 * a[j] + (1.0 - schedule.beta1) * gj;
          v[j] = schedule.beta2 * v[j] + (1.0 - schedule.beta2) * gj * gj;
          const double upd = (a[j] / c1) / (std::sqrt(v[j] / c2) + schedule.eps);
          w[j] -= lr * (upd + schedule.weight_decay * w[j]);
        }
      }
    }
    result.epoch_loss.push_back(epoch_sum / double(n));
    if (on_epoch) on_epoch(epoch + 1, result.epoch_loss.back());
  }
  result.steps = step;
  result.params = std::move(params);
  return result;
}

void write_loss_csv(const std::filesystem::path& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%.17g", result.epoch_loss[e]);
    out << e + 1 << ',' << buf << '\n';
  }
}

void apply_toy_rates(ModelParams& params, double base) {
  for (Group g : kAllGroups) params.settings(g).lr = base;
  params.settings(Group::GlobalVpp).lr = 10.0 * base;
  params.settings(Group::ProjectorL).lr = 10.0 * base;
}

}  // namespace vpp
