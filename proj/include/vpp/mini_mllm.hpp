#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vpp/autodiff.hpp"
#include "vpp/axis_render.hpp"
#include "vpp/dataset_forge.hpp"
#include "vpp/global_vpp.hpp"
#include "vpp/image_pipeline.hpp"
#include "vpp/matrix.hpp"
#include "vpp/raster.hpp"
#include "vpp/tokenizer.hpp"

namespace vpp {

enum class Fusion { Concat, CrossAttnLpQ, CrossAttnGpQ };
const char* to_string(Fusion f);
Fusion parse_fusion(const std::string& s);

enum class Group { GlobalVpp, Encoder, LocalVpp, ProjectorG, ProjectorL, Decoder };
inline constexpr int kGroupCount = 6;
inline constexpr std::array<Group, kGroupCount> kAllGroups{
    Group::GlobalVpp, Group::Encoder,    Group::LocalVpp,
    Group::ProjectorG, Group::ProjectorL, Group::Decoder};
const char* to_string(Group g);
Group parse_group(const std::string& s);

struct ModelConfig {
  int image_side = 64;
  int patch = 8;
  int dim = 64;
  int mlp_ratio = 2;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int local_layers = 2;
  int heads = 4;
  int k_queries = 8;
  int max_text_len = 96;
  Fusion fusion = Fusion::Concat;
  // Mask width is in model pixels: 30 px at 336 maps to 6 px at 64.
  OverlayConfig overlay{0.95, 6};
  bool use_global = true;
  bool use_local = true;
  AxisSpec axis;  // rendered at axis.canvas, then preprocessed down to image_side
  std::uint64_t seed = 1;

  void validate() const;
  int patches() const { return (image_side / patch) * (image_side / patch); }
  int patch_width() const { return patch * patch * 3; }
  int visual_rows() const;
  PreprocessConfig preprocess() const;
};

struct Param {
  std::string name;
  Group group;
  Matrix value;
};

struct GroupSettings {
  bool frozen = false;
  double lr = 1e-3;
};

// Every learnable array, each owned by exactly one group.
struct ModelParams {
  std::vector<Param> params;
  std::array<GroupSettings, kGroupCount> groups{};

  int index_of(const std::string& name) const;  // -1 when absent
  const Matrix& get(const std::string& name) const;
  Matrix& get(const std::string& name);
  std::size_t count() const;
  std::size_t count(Group g) const;
  GroupSettings& settings(Group g) { return groups[std::size_t(g)]; }
  const GroupSettings& settings(Group g) const { return groups[std::size_t(g)]; }
};

using Gradients = std::vector<Matrix>;  // aligned with ModelParams::params

// A training/eval example already in model space.
struct PreparedSample {
  Matrix image;  // (side*side) x 3 standardized pixels
  std::vector<int> query;
  std::vector<int> answer;
  std::optional<NormBox> truth;
};

struct ForwardOptions {
  // Keeps local rows in the sequence but zeroes them and hides them from
  // decoder attention.
  bool ablate_local = false;
};

// One forward pass recorded on a tape, with parameter leaves bound lazily.
class Graph {
 public:
  Graph(const ModelParams& params, bool with_grad);
  ad::Tape tape;
  ad::Var p(const std::string& name);
  // Gradients of every parameter bound in this graph (zeros elsewhere).
  Gradients gradients();

 private:
  const ModelParams& params_;
  bool with_grad_;
  std::vector<ad::Var> leaves_;
};

class MiniMLLM {
 public:
  MiniMLLM(ModelConfig cfg, Vocab vocab);

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  const BinaryMask& mask() const { return mask_; }

  ModelParams init_params() const;
  PreparedSample prepare(const Raster& image_pixel01, const Sample& sample) const;
  PreparedSample prepare_standardized(const Raster& image, const std::string& query,
                                      const std::string& answer) const;

  // Pieces of the architecture, each recorded on g.tape.
  ad::Var overlay_input(Graph& g, ad::Var image) const;
  ad::Var encode_image(Graph& g, ad::Var x_gp) const;
  ad::Var local_vpp(Graph& g, ad::Var x_gp) const;
  ad::Var project(Graph& g, ad::Var f, Group which) const;
  ad::Var fuse(Graph& g, ad::Var f_gp, ad::Var f_lp) const;
  // F' rows, and how many of them belong to the local path (trailing rows).
  ad::Var visual_features(Graph& g, const Matrix& image, const ForwardOptions& opt,
                          int* local_rows = nullptr) const;
  // Logits (rows = text.size()) over the decoder output for text rows.
  ad::Var decoder_logits(Graph& g, ad::Var visual, std::span<const int> text, int first_row,
                         int count, std::span<const unsigned char> key_mask = {}) const;

  // Mean NLL over answer tokens plus EOS; 0 for an empty answer.
  double loss(const ModelParams& params, const PreparedSample& s,
              const ForwardOptions& opt = {}) const;
  // As loss(), accumulating d loss / d params into grads (sized lazily).
  double loss_and_grad(const ModelParams& params, const PreparedSample& s, Gradients& grads) const;
  // Logits for every answer target position (teacher forced).
  Matrix answer_logits(const ModelParams& params, const PreparedSample& s,
                       const ForwardOptions& opt = {}) const;
  std::vector<int> generate_ids(const ModelParams& params, const PreparedSample& s,
                                int max_len, const ForwardOptions& opt = {}) const;
  std::string generate(const ModelParams& params, const PreparedSample& s, int max_len,
                       const ForwardOptions& opt = {}) const;

 private:
  std::vector<int> text_ids(const PreparedSample& s, bool with_answer) const;
  ModelConfig cfg_;
  Vocab vocab_;
  BinaryMask mask_;
  Matrix axis_init_;
};

struct GradCheckEntry {
  std::string param;
  Group group;
  std::size_t index;
  double analytic;
  double numeric;
  double rel_error;
  bool pass;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double pass_fraction = 0.0;
  std::array<int, kGroupCount> per_group{};
  // Masked-out prompt coordinates: analytic must be exactly 0, FD tiny.
  int masked_checked = 0;
  int masked_exact_zero = 0;
  double masked_max_fd = 0.0;
};

// Central differences with the given step on `coords` sampled coordinates,
// spread evenly over the six groups, plus `masked` masked-out prompt entries.
// rel = |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const MiniMLLM& model, ModelParams params,
                           std::span<const PreparedSample> batch, int coords,
                           std::uint64_t seed, double step = 1e-4, double tol = 1e-4,
                           int masked = 16, double floor = 1e-6);

}  // namespace vpp
