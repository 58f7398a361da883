#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "vpp/checkpoint.hpp"
#include "vpp/errors.hpp"
#include "vpp/mini_mllm.hpp"

using namespace vpp;

namespace {

ModelConfig tiny(Fusion f = Fusion::Concat) {
  ModelConfig c;
  c.image_side = 16;
  c.patch = 4;
  c.dim = 8;
  c.heads = 2;
  c.k_queries = 2;
  c.encoder_layers = c.decoder_layers = c.local_layers = 1;
  c.overlay.mask_width = 3;
  c.fusion = f;
  return c;
}

const Vocab& vocab() {
  static const Vocab v = Vocab::harvest(std::vector<std::string>{"find the red ellipse"});
  return v;
}

PreparedSample sample(const MiniMLLM& m, std::uint64_t seed, const std::string& answer = "[0.10, 0.20, 0.30, 0.40]") {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  const int side = m.config().image_side;
  Raster r(side, side, 3, 0.0, ColorSpace::Standardized);
  for (double& x : r.data) x = n(rng);
  return m.prepare_standardized(r, "find the red ellipse", answer);
}

}  // namespace

TEST_CASE("parameter groups and deterministic init") {
  for (Fusion f : {Fusion::Concat, Fusion::CrossAttnLpQ, Fusion::CrossAttnGpQ}) {
    const MiniMLLM m(tiny(f), vocab());
    const ModelParams a = m.init_params(), b = m.init_params();
    REQUIRE(a.params.size() == b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i].value.v == b.params[i].value.v);
    for (Group g : kAllGroups) CHECK(a.count(g) > 0);
    CHECK(a.params[a.index_of("delta_g")].group == Group::GlobalVpp);
    if (f != Fusion::Concat) CHECK(a.params[a.index_of("fuse.attn.wq")].group == Group::ProjectorL);
  }
  ModelConfig other = tiny();
  other.seed = 2;
  CHECK(MiniMLLM(other, vocab()).init_params().get("enc.patch.w").v !=
        MiniMLLM(tiny(), vocab()).init_params().get("enc.patch.w").v);
}

TEST_CASE("prompt initialization is the standardized axis brought to model size") {
  const ModelConfig c = tiny();
  const MiniMLLM m(c, vocab());
  PreprocessConfig at_canvas = c.preprocess();
  at_canvas.target_side = c.axis.canvas;
  const Raster expect = interpolate_to(standardize(render_axis(c.axis), at_canvas), c.image_side);
  CHECK(m.init_params().get("delta_g").v == expect.data);
}

TEST_CASE("visual row counts per fusion mode") {
  for (Fusion f : {Fusion::Concat, Fusion::CrossAttnLpQ, Fusion::CrossAttnGpQ}) {
    const MiniMLLM m(tiny(f), vocab());
    const ModelParams p = m.init_params();
    Graph g(p, false);
    const ad::Var v = m.visual_features(g, sample(m, 1).image, {});
    CHECK(g.tape.value(v).rows == m.config().visual_rows());
    CHECK(g.tape.value(v).cols == m.config().dim);
  }
}

TEST_CASE("empty answers cost nothing and shapes are checked") {
  const MiniMLLM m(tiny(), vocab());
  const ModelParams p = m.init_params();
  CHECK(m.loss(p, sample(m, 2, "")) == 0.0);
  Gradients g;
  CHECK(m.loss_and_grad(p, sample(m, 2, ""), g) == 0.0);
  CHECK(g.size() == p.params.size());
  Raster wrong(8, 8, 3, 0.0, ColorSpace::Standardized);
  CHECK_THROWS_AS(m.prepare_standardized(wrong, "q", "a"), ContractError);
  ModelConfig bad = tiny();
  bad.overlay.mask_width = 9;
  CHECK_THROWS_AS(MiniMLLM(bad, vocab()), ContractError);
}

TEST_CASE("answer logits are causal") {
  const MiniMLLM m(tiny(), vocab());
  const ModelParams p = m.init_params();
  const PreparedSample a = sample(m, 3, "[0.10, 0.20, 0.30, 0.40]");
  const PreparedSample b = sample(m, 3, "[0.10, 0.90, 0.30, 0.40]");
  const Matrix la = m.answer_logits(p, a), lb = m.answer_logits(p, b);
  // Answer tokens differ first at index 4; logits at rows 0..4 see only the shared prefix.
  for (int r = 0; r <= 4; ++r)
    for (int c = 0; c < la.cols; ++c) CHECK(la(r, c) == lb(r, c));
  bool differs = false;
  for (int c = 0; c < la.cols; ++c) differs |= la(5, c) != lb(5, c);
  CHECK(differs);
}

TEST_CASE("gradient check on the full tiny model") {
  for (Fusion f : {Fusion::Concat, Fusion::CrossAttnGpQ}) {
    const MiniMLLM m(tiny(f), vocab());
    const std::vector<PreparedSample> batch = {sample(m, 4), sample(m, 5, "[0.50, 0.55, 0.90, 1.00]")};
    const GradCheckReport r = grad_check(m, m.init_params(), batch, 120, 9);
    CHECK(r.pass_fraction >= 0.99);
    for (Group g : kAllGroups) CHECK(r.per_group[std::size_t(g)] > 0);
    CHECK(r.masked_checked > 0);
    CHECK(r.masked_exact_zero == r.masked_checked);
    CHECK(r.masked_max_fd < 1e-8);
  }
}

TEST_CASE("alpha one removes the prompt from the computation") {
  ModelConfig with = tiny();
  with.use_local = false;
  with.overlay.alpha = 1.0;
  ModelConfig without = with;
  without.use_global = false;
  const MiniMLLM a(with, vocab()), b(without, vocab());
  ModelParams pa = a.init_params();
  const ModelParams pb = b.init_params();
  const PreparedSample s = sample(a, 6);
  CHECK(a.answer_logits(pa, s).v == b.answer_logits(pb, s).v);
  for (double& x : pa.get("delta_g").v) x += 3.0;
  CHECK(a.answer_logits(pa, s).v == b.answer_logits(pb, s).v);
}

TEST_CASE("local ablation hides the local rows") {
  const MiniMLLM m(tiny(), vocab());
  ModelParams p = m.init_params();
  const PreparedSample s = sample(m, 7);
  const ForwardOptions ablate{true};
  const double base = m.loss(p, s, ablate);
  const double full = m.loss(p, s);
  for (double& x : p.get("loc.queries").v) x *= -2.0;
  CHECK(m.loss(p, s, ablate) == base);
  CHECK(m.loss(p, s) != full);
  CHECK_THROWS_AS(MiniMLLM(tiny(Fusion::CrossAttnLpQ), vocab()).loss(p, s, ablate), ContractError);
}

TEST_CASE("greedy generation is deterministic and bounded") {
  const MiniMLLM m(tiny(), vocab());
  const ModelParams p = m.init_params();
  const PreparedSample s = sample(m, 8);
  const auto ids = m.generate_ids(p, s, 7);
  CHECK(ids.size() <= 7);
  CHECK(ids == m.generate_ids(p, s, 7));
  CHECK(m.generate_ids(p, s, 0).empty());
  // Teacher forcing the generated prefix reproduces each greedy choice.
  PreparedSample forced = s;
  forced.answer = ids;
  const Matrix logits = m.answer_logits(p, forced);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double* row = logits.row(int(i));
    CHECK(int(std::max_element(row, row + logits.cols) - row) == ids[i]);
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  ModelConfig c = tiny(Fusion::CrossAttnLpQ);
  c.overlay.alpha = 0.3;
  c.seed = 11;
  const MiniMLLM m(c, vocab());
  Checkpoint ck{c, vocab(), m.init_params()};
  ck.params.settings(Group::Encoder).frozen = true;
  ck.params.settings(Group::GlobalVpp).lr = 1.0 / 3.0;
  ck.params.get("dec.head.b").v[0] = -1e-300;
  const auto path = std::filesystem::temp_directory_path() / "vpp_test.ckpt";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(to_json(back.config) == to_json(c));
  CHECK(back.vocab.extras() == vocab().extras());
  REQUIRE(back.params.params.size() == ck.params.params.size());
  for (std::size_t i = 0; i < ck.params.params.size(); ++i) {
    CHECK(back.params.params[i].name == ck.params.params[i].name);
    CHECK(back.params.params[i].group == ck.params.params[i].group);
    CHECK(back.params.params[i].value.v == ck.params.params[i].value.v);
  }
  CHECK(back.params.settings(Group::Encoder).frozen);
  CHECK(back.params.settings(Group::GlobalVpp).lr == 1.0 / 3.0);
  CHECK_THROWS(model_config_from_json(nlohmann::json{{"no_such_key", 1}}));
}
