#include "vpp/mini_mllm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vpp/errors.hpp"
#include "vpp/synth.hpp"

namespace vpp {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct Normal {
  std::mt19937_64 eng;
  explicit Normal(std::uint64_t s) : eng(s) {}
  double uniform() { return (double(eng() >> 11) + 0.5) * 0x1.0p-53; }
  double operator()() {
    const double u1 = uniform(), u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
};

// Row r of a grid x grid sin/cos position code; half of the width encodes y.
void sincos_2d(Matrix& m, int grid) {
  const int quarter = m.cols / 4;
  for (int r = 0; r < m.rows; ++r) {
    const double pos[2] = {double(r / grid), double(r % grid)};
    for (int axis = 0; axis < 2; ++axis) {
      for (int i = 0; i < quarter; ++i) {
        const double w = std::pow(100.0, -double(i) / quarter);
        m(r, axis * 2 * quarter + 2 * i) = std::sin(pos[axis] * w);
        m(r, axis * 2 * quarter + 2 * i + 1) = std::cos(pos[axis] * w);
      }
    }
  }
}

void sincos_1d(Matrix& m) {
  const int half = m.cols / 2;
  for (int r = 0; r < m.rows; ++r) {
    for (int i = 0; i < half; ++i) {
      const double w = std::pow(1000.0, -double(i) / half);
      m(r, 2 * i) = std::sin(r * w);
      m(r, 2 * i + 1) = std::cos(r * w);
    }
  }
}

// Smooth code for coordinate value c/100: low-frequency Fourier features so
// neighbouring coordinates start out similar.
double coord_code(int c, int j) {
  const double t = std::numbers::pi * c / 100.0;
  const int f = j / 2 + 1;
  return (j % 2 == 0 ? std::cos(f * t) : std::sin(f * t)) * std::sqrt(2.0);
}

struct Builder {
  const ModelConfig& cfg;
  ModelParams out;

  void add(const std::string& name, Group g, int rows, int cols, double stddev) {
    Matrix m(rows, cols);
    if (stddev > 0.0) {
      Normal rng(mix_seed(cfg.seed, fnv1a(name)));
      for (double& x : m.v) x = stddev * rng();
    }
    out.params.push_back({name, g, std::move(m)});
  }
  void ones(const std::string& name, Group g, int cols) {
    out.params.push_back({name, g, Matrix(1, cols, 1.0)});
  }
  void layernorm(const std::string& prefix, Group g) {
    ones(prefix + ".g", g, cfg.dim);
    add(prefix + ".b", g, 1, cfg.dim, 0.0);
  }
  void mlp(const std::string& prefix, Group g, int layers) {
    const int d = cfg.dim, h = cfg.dim * cfg.mlp_ratio;
    add(prefix + ".w1", g, d, h, 1.0 / std::sqrt(d));
    add(prefix + ".b1", g, 1, h, 0.0);
    add(prefix + ".w2", g, h, d, 1.0 / std::sqrt(h) / std::sqrt(2.0 * layers));
    add(prefix + ".b2", g, 1, d, 0.0);
  }
  void attn(const std::string& prefix, Group g, int layers) {
    const int d = cfg.dim;
    for (const char* w : {".wq", ".wk", ".wv"}) add(prefix + w, g, d, d, 1.0 / std::sqrt(d));
    add(prefix + ".wo", g, d, d, 1.0 / std::sqrt(d) / std::sqrt(2.0 * layers));
    add(prefix + ".bo", g, 1, d, 0.0);
  }
  void block(const std::string& prefix, Group g, int layers) {
    layernorm(prefix + ".ln1", g);
    attn(prefix + ".attn", g, layers);
    layernorm(prefix + ".ln2", g);
    mlp(prefix + ".mlp", g, layers);
  }
};

}  // namespace

const char* to_string(Fusion f) {
  switch (f) {
    case Fusion::Concat: return "concat";
    case Fusion::CrossAttnLpQ: return "ca-lpq";
    case Fusion::CrossAttnGpQ: return "ca-gpq";
  }
  return "?";
}

Fusion parse_fusion(const std::string& s) {
  if (s == "concat" || s == "cat") return Fusion::Concat;
  if (s == "ca-lpq" || s == "ca1") return Fusion::CrossAttnLpQ;
  if (s == "ca-gpq" || s == "ca2") return Fusion::CrossAttnGpQ;
  throw ContractError("unknown fusion '" + s + "' (concat, ca-lpq, ca-gpq)");
}

const char* to_string(Group g) {
  switch (g) {
    case Group::GlobalVpp: return "global_vpp";
    case Group::Encoder: return "encoder";
    case Group::LocalVpp: return "local_vpp";
    case Group::ProjectorG: return "projector_g";
    case Group::ProjectorL: return "projector_l";
    case Group::Decoder: return "decoder";
  }
  return "?";
}

Group parse_group(const std::string& s) {
  for (Group g : kAllGroups)
    if (s == to_string(g)) return g;
  throw ContractError("unknown parameter group '" + s + "'");
}

void ModelConfig::validate() const {
  if (image_side < 8 || patch < 1 || image_side % patch != 0) {
    throw ContractError("model: image_side must be a positive multiple of patch");
  }
  if (dim < 4 || heads < 1 || dim % heads != 0) {
    throw ContractError("model: dim must be divisible by heads");
  }
  if (dim % 4 != 0) throw ContractError("model: dim must be a multiple of 4");
  if (encoder_layers < 0 || decoder_layers < 0 || local_layers < 0 || mlp_ratio < 1) {
    throw ContractError("model: negative layer count or mlp_ratio < 1");
  }
  if (k_queries < 1) throw ContractError("model: k_queries must be >= 1");
  if (max_text_len < 2) throw ContractError("model: max_text_len must be >= 2");
  overlay.validate();
  if (overlay.mask_width > (image_side + 1) / 2) {
    throw ContractError("model: mask_width exceeds half the image side");
  }
  axis.validate();
}

int ModelConfig::visual_rows() const {
  if (!use_local) return patches();
  switch (fusion) {
    case Fusion::Concat: return patches() + k_queries;
    case Fusion::CrossAttnLpQ: return k_queries;
    case Fusion::CrossAttnGpQ: return patches();
  }
  return patches();
}

PreprocessConfig ModelConfig::preprocess() const {
  PreprocessConfig p;
  p.target_side = image_side;
  return p;
}

int ModelParams::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == name) return int(i);
  return -1;
}

const Matrix& ModelParams::get(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw ContractError("no parameter named '" + name + "'");
  return params[i].value;
}

Matrix& ModelParams::get(const std::string& name) {
  return const_cast<Matrix&>(static_cast<const ModelParams&>(*this).get(name));
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const Param& p : params) n += p.value.size();
  return n;
}

std::size_t ModelParams::count(Group g) const {
  std::size_t n = 0;
  for (const Param& p : params)
    if (p.group == g) n += p.value.size();
  return n;
}

Graph::Graph(const ModelParams& params, bool with_grad)
    : params_(params), with_grad_(with_grad), leaves_(params.params.size(), -1) {}

ad::Var Graph::p(const std::string& name) {
  const int i = params_.index_of(name);
  if (i < 0) throw ContractError("no parameter named '" + name + "'");
  if (leaves_[i] < 0) {
    const Param& prm = params_.params[i];
    const bool rg = with_grad_ && !params_.settings(prm.group).frozen;
    leaves_[i] = tape.leaf(prm.value, rg);
  }
  return leaves_[i];
}

Gradients Graph::gradients() {
  Gradients out(params_.params.size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    if (leaves_[i] >= 0 && tape.requires_grad(leaves_[i])) out[i] = tape.grad(leaves_[i]);
  }
  return out;
}

MiniMLLM::MiniMLLM(ModelConfig cfg, Vocab vocab) : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
  cfg_.validate();
  mask_ = make_mask(cfg_.image_side, cfg_.overlay.mask_width);
  AxisSpec spec = cfg_.axis;
  PreprocessConfig pc = cfg_.preprocess();
  // Render at the axis canvas, standardize there, then bring to model size.
  PreprocessConfig at_canvas = pc;
  at_canvas.target_side = spec.canvas;
  const Raster full = init_global_vpp(spec, at_canvas).values;
  const Raster small = interpolate_to(full, cfg_.image_side);
  axis_init_ = Matrix(cfg_.image_side * cfg_.image_side, 3);
  axis_init_.v = small.data;
}

ModelParams MiniMLLM::init_params() const {
  Builder b{cfg_, {}};
  const int d = cfg_.dim, pw = cfg_.patch_width();
  b.out.params.push_back({"delta_g", Group::GlobalVpp, axis_init_});

  b.add("enc.patch.w", Group::Encoder, pw, d, 1.0 / std::sqrt(pw));
  b.add("enc.patch.b", Group::Encoder, 1, d, 0.0);
  b.add("enc.pos", Group::Encoder, cfg_.patches(), d, 0.0);
  sincos_2d(b.out.params.back().value, cfg_.image_side / cfg_.patch);
  for (int l = 0; l < cfg_.encoder_layers; ++l)
    b.block("enc." + std::to_string(l), Group::Encoder, cfg_.encoder_layers);
  b.layernorm("enc.lnf", Group::Encoder);

  b.add("loc.trunk.w", Group::LocalVpp, pw, d, 1.0 / std::sqrt(pw));
  b.add("loc.trunk.b", Group::LocalVpp, 1, d, 0.0);
  b.add("loc.pos", Group::LocalVpp, cfg_.patches(), d, 0.0);
  sincos_2d(b.out.params.back().value, cfg_.image_side / cfg_.patch);
  b.layernorm("loc.kvln", Group::LocalVpp);
  b.add("loc.queries", Group::LocalVpp, cfg_.k_queries, d, 1.0);
  for (int l = 0; l < cfg_.local_layers; ++l) {
    const std::string pre = "loc." + std::to_string(l);
    b.block(pre, Group::LocalVpp, cfg_.local_layers);
  }
  b.layernorm("loc.lnf", Group::LocalVpp);

  b.mlp("pg", Group::ProjectorG, 1);
  b.mlp("pl", Group::ProjectorL, 1);
  if (cfg_.fusion != Fusion::Concat) {
    b.layernorm("fuse.lnq", Group::ProjectorL);
    b.layernorm("fuse.lnkv", Group::ProjectorL);
    b.attn("fuse.attn", Group::ProjectorL, 1);
  }

  const int V = vocab_.size();
  b.add("dec.tok", Group::Decoder, V, d, 1.0);
  {
    Matrix& tok = b.out.params.back().value;
    for (int c = 0; c < Vocab::kCoordCount; ++c)
      for (int j = 0; j < d; ++j) tok(Vocab::kFirstCoord + c, j) = coord_code(c, j);
  }
  b.add("dec.pos", Group::Decoder, cfg_.max_text_len, d, 0.0);
  sincos_1d(b.out.params.back().value);
  for (int l = 0; l < cfg_.decoder_layers; ++l)
    b.block("dec." + std::to_string(l), Group::Decoder, cfg_.decoder_layers);
  b.layernorm("dec.lnf", Group::Decoder);
  b.add("dec.head.w", Group::Decoder, d, V, 1.0 / std::sqrt(d));
  {
    Matrix& head = b.out.params.back().value;
    for (int c = 0; c < Vocab::kCoordCount; ++c)
      for (int j = 0; j < d; ++j) head(j, Vocab::kFirstCoord + c) = coord_code(c, j) / std::sqrt(d);
  }
  b.add("dec.head.b", Group::Decoder, 1, V, 0.0);
  return std::move(b.out);
}

PreparedSample MiniMLLM::prepare(const Raster& image_pixel01, const Sample& sample) const {
  const Raster x = preprocess(image_pixel01, cfg_.preprocess());
  PreparedSample s = prepare_standardized(x, sample.query_text(), sample.answer_text());
  if (sample.task == Task::Grounding && !sample.boxes.empty()) s.truth = sample.boxes.back().box;
  return s;
}

PreparedSample MiniMLLM::prepare_standardized(const Raster& image, const std::string& query,
                                              const std::string& answer) const {
  require_space(image, ColorSpace::Standardized, "model input");
  if (image.height != cfg_.image_side || image.width != cfg_.image_side || image.channels != 3) {
    throw ContractError("model input must be " + std::to_string(cfg_.image_side) + "x" +
                        std::to_string(cfg_.image_side) + "x3");
  }
  PreparedSample s;
  s.image = Matrix(image.height * image.width, 3);
  s.image.v = image.data;
  s.query = vocab_.tokenize(query);
  s.answer = vocab_.tokenize(answer);
  return s;
}

ad::Var MiniMLLM::overlay_input(Graph& g, ad::Var image) const {
  return g.tape.masked_blend(image, g.p("delta_g"), mask_.bits, cfg_.overlay.alpha);
}

namespace {

ad::Var linear(Graph& g, ad::Var x, const std::string& w, const std::string& b) {
  return g.tape.add_row(g.tape.matmul(x, g.p(w)), g.p(b));
}

ad::Var layer_norm(Graph& g, ad::Var x, const std::string& prefix) {
  return g.tape.layernorm(x, g.p(prefix + ".g"), g.p(prefix + ".b"));
}

ad::Var mlp(Graph& g, ad::Var x, const std::string& prefix) {
  ad::Var h = g.tape.gelu(linear(g, x, prefix + ".w1", prefix + ".b1"));
  return linear(g, h, prefix + ".w2", prefix + ".b2");
}

ad::Var attend(Graph& g, ad::Var q_in, ad::Var kv_in, const std::string& prefix, int heads,
               bool causal, std::span<const unsigned char> key_mask = {}) {
  ad::Var q = g.tape.matmul(q_in, g.p(prefix + ".wq"));
  ad::Var k = g.tape.matmul(kv_in, g.p(prefix + ".wk"));
  ad::Var v = g.tape.matmul(kv_in, g.p(prefix + ".wv"));
  ad::Var a = g.tape.attention(q, k, v, heads, causal, key_mask);
  return linear(g, a, prefix + ".wo", prefix + ".bo");
}

// Pre-norm transformer block with self-attention.
ad::Var self_block(Graph& g, ad::Var x, const std::string& prefix, int heads, bool causal,
                   std::span<const unsigned char> key_mask = {}) {
  ad::Var h = layer_norm(g, x, prefix + ".ln1");
  x = g.tape.add(x, attend(g, h, h, prefix + ".attn", heads, causal, key_mask));
  return g.tape.add(x, mlp(g, layer_norm(g, x, prefix + ".ln2"), prefix + ".mlp"));
}

}  // namespace

ad::Var MiniMLLM::encode_image(Graph& g, ad::Var x_gp) const {
  ad::Var x = g.tape.patchify(x_gp, cfg_.image_side, cfg_.patch);
  x = linear(g, x, "enc.patch.w", "enc.patch.b");
  x = g.tape.add_rows(x, g.p("enc.pos"), 0);
  for (int l = 0; l < cfg_.encoder_layers; ++l)
    x = self_block(g, x, "enc." + std::to_string(l), cfg_.heads, false);
  return layer_norm(g, x, "enc.lnf");
}

ad::Var MiniMLLM::local_vpp(Graph& g, ad::Var x_gp) const {
  ad::Var t = g.tape.patchify(x_gp, cfg_.image_side, cfg_.patch);
  t = linear(g, t, "loc.trunk.w", "loc.trunk.b");
  t = g.tape.gelu(g.tape.add_rows(t, g.p("loc.pos"), 0));
  ad::Var kv = layer_norm(g, t, "loc.kvln");
  ad::Var q = g.p("loc.queries");
  // Queries only read the trunk; they never attend to each other.
  for (int l = 0; l < cfg_.local_layers; ++l) {
    const std::string pre = "loc." + std::to_string(l);
    q = g.tape.add(q, attend(g, layer_norm(g, q, pre + ".ln1"), kv, pre + ".attn", cfg_.heads,
                             false));
    q = g.tape.add(q, mlp(g, layer_norm(g, q, pre + ".ln2"), pre + ".mlp"));
  }
  return layer_norm(g, q, "loc.lnf");
}

ad::Var MiniMLLM::project(Graph& g, ad::Var f, Group which) const {
  if (g.tape.value(f).cols != cfg_.dim) throw ContractError("project: width mismatch");
  if (which == Group::ProjectorG) return mlp(g, f, "pg");
  if (which == Group::ProjectorL) return mlp(g, f, "pl");
  throw ContractError("project: group must be projector_g or projector_l");
}

ad::Var MiniMLLM::fuse(Graph& g, ad::Var f_gp, ad::Var f_lp) const {
  if (g.tape.value(f_gp).cols != g.tape.value(f_lp).cols) {
    throw ContractError("fuse: feature widths differ");
  }
  if (cfg_.fusion == Fusion::Concat) return g.tape.concat_rows(f_gp, f_lp);
  const bool lp_query = cfg_.fusion == Fusion::CrossAttnLpQ;
  ad::Var q = lp_query ? f_lp : f_gp;
  ad::Var kv = lp_query ? f_gp : f_lp;
  ad::Var a = attend(g, layer_norm(g, q, "fuse.lnq"), layer_norm(g, kv, "fuse.lnkv"),
                     "fuse.attn", cfg_.heads, false);
  return g.tape.add(q, a);
}

ad::Var MiniMLLM::visual_features(Graph& g, const Matrix& image, const ForwardOptions& opt,
                                  int* local_rows) const {
  if (image.rows != cfg_.image_side * cfg_.image_side || image.cols != 3) {
    throw ContractError("visual_features: image shape mismatch");
  }
  ad::Var x = g.tape.constant(image);
  ad::Var x_gp = cfg_.use_global ? overlay_input(g, x) : x;
  ad::Var f = project(g, encode_image(g, x_gp), Group::ProjectorG);
  if (local_rows) *local_rows = 0;
  if (!cfg_.use_local) return f;
  ad::Var l = project(g, local_vpp(g, x_gp), Group::ProjectorL);
  if (opt.ablate_local) {
    if (cfg_.fusion != Fusion::Concat) throw ContractError("local ablation needs concat fusion");
    l = g.tape.scale(l, 0.0);
    if (local_rows) *local_rows = cfg_.k_queries;
  }
  return fuse(g, f, l);
}

ad::Var MiniMLLM::decoder_logits(Graph& g, ad::Var visual, std::span<const int> text,
                                 int first_row, int count,
                                 std::span<const unsigned char> key_mask) const {
  if (int(text.size()) > cfg_.max_text_len) {
    throw ContractError("sequence of " + std::to_string(text.size()) +
                        " tokens exceeds max_text_len " + std::to_string(cfg_.max_text_len));
  }
  const int vis = g.tape.value(visual).rows;
  ad::Var e = g.tape.gather_rows(g.p("dec.tok"), text);
  e = g.tape.add_rows(e, g.p("dec.pos"), 0);
  ad::Var x = g.tape.concat_rows(visual, e);
  for (int l = 0; l < cfg_.decoder_layers; ++l)
    x = self_block(g, x, "dec." + std::to_string(l), cfg_.heads, true, key_mask);
  x = g.tape.slice_rows(x, vis + first_row, count);
  x = layer_norm(g, x, "dec.lnf");
  return linear(g, x, "dec.head.w", "dec.head.b");
}

std::vector<int> MiniMLLM::text_ids(const PreparedSample& s, bool with_answer) const {
  std::vector<int> t{Vocab::kBos};
  t.insert(t.end(), s.query.begin(), s.query.end());
  if (with_answer) t.insert(t.end(), s.answer.begin(), s.answer.end());
  return t;
}

namespace {

std::vector<unsigned char> ablation_mask(int vis, int local_rows, int text_len) {
  if (local_rows == 0) return {};
  std::vector<unsigned char> m(std::size_t(vis + text_len), 1);
  for (int r = vis - local_rows; r < vis; ++r) m[r] = 0;
  return m;
}

}  // namespace

Matrix MiniMLLM::answer_logits(const ModelParams& params, const PreparedSample& s,
                               const ForwardOptions& opt) const {
  Graph g(params, false);
  int local_rows = 0;
  ad::Var vis = visual_features(g, s.image, opt, &local_rows);
  const std::vector<int> text = text_ids(s, true);
  const auto km = ablation_mask(g.tape.value(vis).rows, local_rows, int(text.size()));
  ad::Var logits = decoder_logits(g, vis, text, int(s.query.size()), int(s.answer.size()) + 1, km);
  return g.tape.value(logits);
}

namespace {

std::vector<int> targets_of(const PreparedSample& s) {
  std::vector<int> t = s.answer;
  t.push_back(Vocab::kEos);
  return t;
}

}  // namespace

double MiniMLLM::loss(const ModelParams& params, const PreparedSample& s,
                      const ForwardOptions& opt) const {
  if (s.answer.empty()) return 0.0;
  Graph g(params, false);
  int local_rows = 0;
  ad::Var vis = visual_features(g, s.image, opt, &local_rows);
  const std::vector<int> text = text_ids(s, true);
  const auto km = ablation_mask(g.tape.value(vis).rows, local_rows, int(text.size()));
  const std::vector<int> targets = targets_of(s);
  ad::Var logits = decoder_logits(g, vis, text, int(s.query.size()), int(targets.size()), km);
  return g.tape.value(g.tape.cross_entropy(logits, targets)).v[0];
}

double MiniMLLM::loss_and_grad(const ModelParams& params, const PreparedSample& s,
                               Gradients& grads) const {
  if (grads.size() != params.params.size()) {
    grads.assign(params.params.size(), Matrix());
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].empty()) grads[i] = Matrix(params.params[i].value.rows, params.params[i].value.cols);
  }
  if (s.answer.empty()) return 0.0;
  Graph g(params, true);
  ad::Var vis = visual_features(g, s.image, {});
  const std::vector<int> text = text_ids(s, true);
  const std::vector<int> targets = targets_of(s);
  ad::Var logits = decoder_logits(g, vis, text, int(s.query.size()), int(targets.size()));
  ad::Var loss = g.tape.cross_entropy(logits, targets);
  g.tape.backward(loss);
  Gradients local = g.gradients();
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (local[i].empty()) continue;
    for (std::size_t j = 0; j < local[i].v.size(); ++j) grads[i].v[j] += local[i].v[j];
  }
  return g.tape.value(loss).v[0];
}

std::vector<int> MiniMLLM::generate_ids(const ModelParams& params, const PreparedSample& s,
                                        int max_len, const ForwardOptions& opt) const {
  std::vector<int> out;
  if (max_len <= 0) return out;
  Matrix visual;
  int local_rows = 0;
  {
    Graph g(params, false);
    visual = g.tape.value(visual_features(g, s.image, opt, &local_rows));
  }
  std::vector<int> text = text_ids(s, false);
  while (int(out.size()) < max_len && int(text.size()) < cfg_.max_text_len) {
    Graph g(params, false);
    ad::Var vis = g.tape.constant(visual);
    const auto km = ablation_mask(visual.rows, local_rows, int(text.size()));
    const Matrix& logits =
        g.tape.value(decoder_logits(g, vis, text, int(text.size()) - 1, 1, km));
    const int next = int(std::max_element(logits.v.begin(), logits.v.end()) - logits.v.begin());
    if (next == Vocab::kEos) break;
    out.push_back(next);
    text.push_back(next);
  }
  return out;
}

std::string MiniMLLM::generate(const ModelParams& params, const PreparedSample& s, int max_len,
                               const ForwardOptions& opt) const {
  return vocab_.detokenize(generate_ids(params, s, max_len, opt));
}

GradCheckReport grad_check(const MiniMLLM& model, ModelParams params,
                           std::span<const PreparedSample> batch, int coords, std::uint64_t seed,
                           double step, double tol, int masked, double floor) {
  if (batch.empty()) throw ContractError("grad_check: empty batch");
  for (GroupSettings& gs : params.groups) gs.frozen = false;
  auto total_loss = [&](const ModelParams& p) {
    double sum = 0.0;
    for (const PreparedSample& s : batch) sum += model.loss(p, s);
    return sum / double(batch.size());
  };
  Gradients grads;
  for (const PreparedSample& s : batch) model.loss_and_grad(params, s, grads);
  for (Matrix& g : grads)
    for (double& v : g.v) v /= double(batch.size());

  const BinaryMask& mask = model.mask();
  const int delta = params.index_of("delta_g");
  std::mt19937_64 rng(seed);
  auto pick = [&](std::uint64_t n) { return std::size_t(rng() % n); };

  auto fd = [&](int pi, std::size_t idx) {
    double& x = params.params[pi].value.v[idx];
    const double orig = x;
    x = orig + step;
    const double up = total_loss(params);
    x = orig - step;
    const double down = total_loss(params);
    x = orig;
    return (up - down) / (2.0 * step);
  };

  GradCheckReport rep;
  const int per_group = (coords + kGroupCount - 1) / kGroupCount;
  for (Group grp : kAllGroups) {
    std::vector<int> members;
    std::vector<std::size_t> sizes;
    std::size_t total = 0;
    for (std::size_t i = 0; i < params.params.size(); ++i) {
      if (params.params[i].group != grp) continue;
      members.push_back(int(i));
      total += params.params[i].value.size();
      sizes.push_back(total);
    }
    if (total == 0) continue;
    if (grp == Group::GlobalVpp && mask.ones() == 0) continue;
    for (int n = 0; n < per_group; ++n) {
      int pi = 0;
      std::size_t idx = 0;
      if (grp == Group::GlobalVpp) {
        // Only entries the mask lets through carry gradient.
        std::size_t pixel;
        do pixel = pick(mask.bits.size());
        while (!mask.bits[pixel]);
        pi = delta;
        idx = pixel * 3 + pick(3);
      } else {
        const std::size_t flat = pick(total);
        const auto it = std::upper_bound(sizes.begin(), sizes.end(), flat);
        const std::size_t m = std::size_t(it - sizes.begin());
        pi = members[m];
        idx = flat - (m == 0 ? 0 : sizes[m - 1]);
      }
      GradCheckEntry e;
      e.param = params.params[pi].name;
      e.group = grp;
      e.index = idx;
      e.analytic = grads[pi].v[idx];
      e.numeric = fd(pi, idx);
      e.rel_error = std::abs(e.analytic - e.numeric) /
                    std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
      e.pass = e.rel_error <= tol;
      rep.max_rel_error = std::max(rep.max_rel_error, e.rel_error);
      rep.per_group[std::size_t(grp)]++;
      rep.entries.push_back(std::move(e));
    }
  }
  std::size_t passed = 0;
  for (const GradCheckEntry& e : rep.entries) passed += e.pass ? 1 : 0;
  rep.pass_fraction = rep.entries.empty() ? 0.0 : double(passed) / double(rep.entries.size());

  const bool has_zeros = mask.ones() < mask.bits.size();
  for (int n = 0; has_zeros && n < masked; ++n) {
    std::size_t pixel;
    do pixel = pick(mask.bits.size());
    while (mask.bits[pixel]);
    const std::size_t idx = pixel * 3 + pick(3);
    rep.masked_checked++;
    if (grads[delta].v[idx] == 0.0) rep.masked_exact_zero++;
    rep.masked_max_fd = std::max(rep.masked_max_fd, std::abs(fd(delta, idx)));
  }
  return rep;
}

}  // namespace vpp
