#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <random>

#include "vpp/autodiff.hpp"
#include "vpp/errors.hpp"
#include "vpp/trainer.hpp"

using namespace vpp;

namespace {

ModelConfig tiny() {
  ModelConfig c;
  c.image_side = 16;
  c.patch = 4;
  c.dim = 8;
  c.heads = 2;
  c.k_queries = 2;
  c.encoder_layers = c.decoder_layers = c.local_layers = 1;
  c.overlay.mask_width = 3;
  return c;
}

std::vector<PreparedSample> corpus(const MiniMLLM& m, int n) {
  std::vector<PreparedSample> out;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  for (int i = 0; i < n; ++i) {
    Raster r(16, 16, 3, 0.0, ColorSpace::Standardized);
    for (double& x : r.data) x = d(rng);
    char ans[64];
    std::snprintf(ans, sizeof ans, "[0.%02d, 0.20, 0.%02d, 0.90]", i * 7 % 50, 50 + i * 3 % 40);
    out.push_back(m.prepare_standardized(r, "find it", ans));
  }
  return out;
}

}  // namespace

TEST_CASE("schedule shape") {
  TrainSchedule s;
  const long total = 1000;
  CHECK(s.lr_factor(0, total) == doctest::Approx(1.0 / 51));
  CHECK(s.lr_factor(49, total) == doctest::Approx(50.0 / 51));
  CHECK(s.lr_factor(50, total) == doctest::Approx(1.0));
  CHECK(s.lr_factor(total, total) == doctest::Approx(0.05));
  for (long i = 51; i < total; ++i) CHECK(s.lr_factor(i, total) <= s.lr_factor(i - 1, total));
  s.batch_size = 0;
  CHECK_THROWS_AS(s.validate(), ContractError);
}

TEST_CASE("cross entropy falls monotonically as the correct logit margin grows") {
  double prev = 1e300;
  for (int k = 0; k <= 40; ++k) {
    ad::Tape t;
    Matrix logits(1, 4);
    logits(0, 2) = 0.5 * k;
    const int target[] = {2};
    const double l = t.value(t.cross_entropy(t.constant(logits), target))(0, 0);
    CHECK(l < prev);
    prev = l;
  }
  CHECK(prev < 1e-8);
}

TEST_CASE("training lowers the loss, respects freezing and is reproducible") {
  const MiniMLLM m(tiny(), Vocab::harvest(std::vector<std::string>{"find it"}));
  const auto data = corpus(m, 12);
  ModelParams p = m.init_params();
  apply_toy_rates(p, 3e-3);
  p.settings(Group::Encoder).frozen = true;
  TrainSchedule s;
  s.epochs = 8;
  s.batch_size = 4;
  const TrainResult a = train(m, p, data, s);
  REQUIRE(a.epoch_loss.size() == 8);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());
  CHECK(a.steps == 24);
  for (std::size_t i = 0; i < p.params.size(); ++i) {
    const bool same = a.params.params[i].value.v == p.params[i].value.v;
    if (p.params[i].group == Group::Encoder) CHECK(same);
  }
  CHECK(a.params.get("dec.head.w").v != p.get("dec.head.w").v);
  CHECK(a.params.get("delta_g").v != p.get("delta_g").v);

  const int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  const TrainResult b = train(m, p, data, s);
  omp_set_num_threads(saved);
  CHECK(b.epoch_loss == a.epoch_loss);
  for (std::size_t i = 0; i < p.params.size(); ++i) CHECK(b.params.params[i].value.v == a.params.params[i].value.v);
}

TEST_CASE("non-finite parameters abort with the group name") {
  const MiniMLLM m(tiny(), Vocab::harvest(std::vector<std::string>{"find it"}));
  const auto data = corpus(m, 4);
  ModelParams p = m.init_params();
  p.get("pl.w1").v[0] = std::nan("");
  TrainSchedule s;
  s.epochs = 1;
  try {
    train(m, p, data, s);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("projector_l") != std::string::npos);
  }
}

TEST_CASE("toy rates") {
  const MiniMLLM m(tiny(), Vocab{});
  ModelParams p = m.init_params();
  apply_toy_rates(p, 2e-3);
  CHECK(p.settings(Group::Decoder).lr == 2e-3);
  CHECK(p.settings(Group::GlobalVpp).lr == doctest::Approx(2e-2));
  CHECK(p.settings(Group::ProjectorL).lr == doctest::Approx(2e-2));
}
