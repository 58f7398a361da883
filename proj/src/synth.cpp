#include "vpp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include "vpp/errors.hpp"
#include "vpp/geometry.hpp"

namespace vpp {

namespace {

constexpr int kMaxPlacementTries = 200;
constexpr int kMaxSceneTries = 50;
constexpr double kBackground = 0.92;

// Explicit arithmetic on raw mt19937_64 output keeps draws identical across
// standard library implementations.
struct Rng {
  std::mt19937_64 eng;
  explicit Rng(std::uint64_t s) : eng(s) {}
  double uniform() { return double(eng() >> 11) * 0x1.0p-53; }
  int below(int n) { return int(eng() % std::uint64_t(n)); }
  int between(int lo, int hi) { return lo + below(hi - lo + 1); }
};

bool overlaps(const SynthObject& a, const SynthObject& b, int gap) {
  return a.x0 < b.x1 + gap && b.x0 < a.x1 + gap && a.y0 < b.y1 + gap && b.y0 < a.y1 + gap;
}

bool inside_shape(const SynthObject& o, int x, int y) {
  if (x < o.x0 || x >= o.x1 || y < o.y0 || y >= o.y1) return false;
  if (o.shape == Shape::Rectangle) return true;
  const double rx = (o.x1 - o.x0) / 2.0, ry = (o.y1 - o.y0) / 2.0;
  const double dx = (x + 0.5 - o.x0 - rx) / rx, dy = (y + 0.5 - o.y0 - ry) / ry;
  return dx * dx + dy * dy <= 1.0;
}

Raster paint(const std::vector<SynthObject>& objects, const SynthSceneSpec& spec) {
  Raster img(spec.canvas, spec.canvas, 3, kBackground);
  for (const SynthObject& o : objects) {
    const NamedColor& c = spec.palette[o.color];
    for (int y = o.y0; y < o.y1; ++y) {
      for (int x = o.x0; x < o.x1; ++x) {
        if (!inside_shape(o, x, y)) continue;
        img.at(y, x, 0) = c.r;
        img.at(y, x, 1) = c.g;
        img.at(y, x, 2) = c.b;
      }
    }
  }
  return img;
}

std::vector<SynthObject> place_objects(Rng& rng, const SynthSceneSpec& spec) {
  const int n = rng.between(spec.min_objects, spec.max_objects);
  const int lo = std::max(1, int(std::lround(spec.min_side_frac * spec.canvas)));
  const int hi = std::max(lo, int(std::lround(spec.max_side_frac * spec.canvas)));
  std::vector<int> colors(spec.palette.size());
  std::iota(colors.begin(), colors.end(), 0);
  for (std::size_t i = colors.size(); i > 1; --i) std::swap(colors[i - 1], colors[rng.below(int(i))]);

  std::vector<SynthObject> objects;
  for (int k = 0; k < n; ++k) {
    for (int attempt = 0; attempt < kMaxPlacementTries; ++attempt) {
      SynthObject o;
      o.shape = spec.shapes[rng.below(int(spec.shapes.size()))];
      o.color = colors[k];
      const int w = rng.between(lo, hi), h = rng.between(lo, hi);
      o.x0 = rng.between(0, spec.canvas - w);
      o.y0 = rng.between(0, spec.canvas - h);
      o.x1 = o.x0 + w;
      o.y1 = o.y0 + h;
      const bool clash = std::any_of(objects.begin(), objects.end(),
                                     [&](const SynthObject& p) { return overlaps(o, p, 2); });
      if (!clash) {
        objects.push_back(o);
        break;
      }
    }
  }
  return objects;
}

struct Superlative {
  const char* word;
  double (*key)(const SynthObject&);
};

const Superlative kSuperlatives[] = {
    {"leftmost", [](const SynthObject& o) { return double(o.x0 + o.x1); }},
    {"rightmost", [](const SynthObject& o) { return -double(o.x0 + o.x1); }},
    {"topmost", [](const SynthObject& o) { return double(o.y0 + o.y1); }},
    {"bottommost", [](const SynthObject& o) { return -double(o.y0 + o.y1); }},
};

// The superlative must single out its object by a clear margin among objects
// of the same shape.
bool superlative_expression(Rng& rng, const std::vector<SynthObject>& objects,
                            const SynthSceneSpec& spec, int& target, std::string& expr) {
  const Superlative& s = kSuperlatives[rng.below(4)];
  const Shape shape = spec.shapes[rng.below(int(spec.shapes.size()))];
  std::vector<int> same;
  for (int i = 0; i < int(objects.size()); ++i)
    if (objects[i].shape == shape) same.push_back(i);
  if (same.size() < 2) return false;
  std::sort(same.begin(), same.end(),
            [&](int a, int b) { return s.key(objects[a]) < s.key(objects[b]); });
  const double margin = 0.1 * spec.canvas;  // in doubled-center units
  if (s.key(objects[same[1]]) - s.key(objects[same[0]]) < margin) return false;
  target = same[0];
  expr = std::string("the ") + s.word + " " + to_string(shape);
  return true;
}

SynthItem make_item(const SynthSceneSpec& spec, std::size_t index) {
  Rng rng(mix_seed(spec.seed, index));
  for (int attempt = 0; attempt < kMaxSceneTries; ++attempt) {
    std::vector<SynthObject> objects = place_objects(rng, spec);
    if (int(objects.size()) < spec.min_objects) continue;
    SynthItem item;
    bool phrased = false;
    if (rng.uniform() < spec.superlative_rate) {
      phrased = superlative_expression(rng, objects, spec, item.target, item.expression);
    }
    if (!phrased) {
      item.target = rng.below(int(objects.size()));
      const SynthObject& t = objects[item.target];
      item.expression = "the " + spec.palette[t.color].name + " " + to_string(t.shape);
    }
    item.objects = std::move(objects);
    item.image = paint(item.objects, spec);
    const SynthObject& t = item.objects[item.target];
    const double c = spec.canvas;
    const NormBox box{t.x0 / c, t.y0 / c, t.x1 / c, t.y1 / c};

    Sample& s = item.sample;
    s.image_ref = "synth_" + std::to_string(spec.seed) + "_" + std::to_string(index) + ".png";
    s.dims = ImageDims(spec.canvas, spec.canvas);
    s.task = Task::Grounding;
    s.turns = {{Role::Human, std::string(kImageToken) + std::string(kGroundingTemplate) +
                                 item.expression + "."},
               {Role::Assistant, format_box(quantize_box(box))}};
    s.boxes = {{quantize_box(box), item.expression}};
    s = inject_instruction(s, spec.instruction_mode);
    if (target_coverage(item, spec) < 0.9) continue;
    return item;
  }
  throw std::runtime_error("synthetic scene " + std::to_string(index) +
                           " could not be constructed; loosen object sizes or counts");
}

}  // namespace

const char* to_string(Shape s) { return s == Shape::Rectangle ? "rectangle" : "ellipse"; }

const std::vector<NamedColor>& default_palette() {
  static const std::vector<NamedColor> palette{
      {"red", 0.85, 0.12, 0.12},   {"green", 0.13, 0.62, 0.20}, {"blue", 0.15, 0.30, 0.85},
      {"yellow", 0.95, 0.85, 0.10}, {"purple", 0.58, 0.20, 0.70}, {"orange", 0.96, 0.55, 0.08},
  };
  return palette;
}

void SynthSceneSpec::validate() const {
  if (min_objects < 1 || max_objects < min_objects) {
    throw ContractError("synth: need 1 <= min_objects <= max_objects");
  }
  if (std::size_t(max_objects) > palette.size()) {
    throw ContractError("synth: max_objects exceeds the palette size (colors must be distinct)");
  }
  if (shapes.empty()) throw ContractError("synth: empty shape set");
  if (canvas < 16) throw ContractError("synth: canvas must be at least 16 px");
  if (!(min_side_frac >= 0.08 && max_side_frac >= min_side_frac && max_side_frac <= 1.0)) {
    throw ContractError("synth: need 0.08 <= min_side_frac <= max_side_frac <= 1");
  }
  if (!(superlative_rate >= 0.0 && superlative_rate <= 1.0)) {
    throw ContractError("synth: superlative_rate must lie in [0,1]");
  }
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ULL + stream + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double target_coverage(const SynthItem& item, const SynthSceneSpec& spec) {
  const NamedColor& c = spec.palette[item.objects[item.target].color];
  const NormBox& b = item.sample.boxes.front().box;
  const int bx0 = int(std::lround(b.x1 * spec.canvas)), by0 = int(std::lround(b.y1 * spec.canvas));
  const int bx1 = int(std::lround(b.x2 * spec.canvas)), by1 = int(std::lround(b.y2 * spec.canvas));
  long total = 0, inside = 0;
  for (int y = 0; y < item.image.height; ++y) {
    for (int x = 0; x < item.image.width; ++x) {
      if (item.image.at(y, x, 0) != c.r || item.image.at(y, x, 1) != c.g ||
          item.image.at(y, x, 2) != c.b) {
        continue;
      }
      ++total;
      if (x >= bx0 && x < bx1 && y >= by0 && y < by1) ++inside;
    }
  }
  return total == 0 ? 0.0 : double(inside) / double(total);
}

SynthCorpus synth_corpus(const SynthSceneSpec& spec, std::size_t n_samples) {
  spec.validate();
  if (n_samples < 1) throw ContractError("synth: n_samples must be >= 1");
  SynthCorpus corpus;
  corpus.items.resize(n_samples);
  std::vector<std::exception_ptr> failures(n_samples);
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < long(n_samples); ++i) {
    try {
      corpus.items[i] = make_item(spec, std::size_t(i));
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(spec.seed, 0xD1B54A32D192ED03ULL));
  for (std::size_t i = n_samples; i > 1; --i) std::swap(order[i - 1], order[rng.below(int(i))]);
  for (std::size_t p = 0; p < n_samples; ++p) (p % 2 == 0 ? corpus.train : corpus.test).push_back(order[p]);
  std::sort(corpus.train.begin(), corpus.train.end());
  std::sort(corpus.test.begin(), corpus.test.end());
  return corpus;
}

}  // namespace vpp
