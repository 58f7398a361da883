#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpp/dataset_forge.hpp"
#include "vpp/raster.hpp"

namespace vpp {

enum class Shape { Rectangle, Ellipse };
const char* to_string(Shape s);

struct NamedColor {
  std::string name;
  double r, g, b;
};

const std::vector<NamedColor>& default_palette();

struct SynthSceneSpec {
  std::uint64_t seed = 7;
  int min_objects = 2;
  int max_objects = 5;
  std::vector<Shape> shapes{Shape::Rectangle, Shape::Ellipse};
  std::vector<NamedColor> palette = default_palette();
  int canvas = 100;
  // Object sides are drawn from [min_side_frac, max_side_frac] * canvas.
  double min_side_frac = 0.16;
  double max_side_frac = 0.40;
  // Share of expressions phrased as a superlative ("the leftmost ellipse").
  double superlative_rate = 0.15;
  InstructionMode instruction_mode = InstructionMode::SampleLevel;

  void validate() const;
};

struct SynthObject {
  Shape shape;
  int color;  // index into the palette
  int x0, y0, x1, y1;  // half-open pixel rectangle
};

struct SynthItem {
  Raster image;  // Pixel01, canvas x canvas
  Sample sample;
  std::vector<SynthObject> objects;
  int target = 0;
  std::string expression;
};

struct SynthCorpus {
  std::vector<SynthItem> items;
  std::vector<std::size_t> train;  // ascending item indices
  std::vector<std::size_t> test;
};

// Deterministic in (spec, n_samples); each item is generated from its own
// seeded stream so the corpus prefix does not depend on n_samples.
SynthCorpus synth_corpus(const SynthSceneSpec& spec, std::size_t n_samples);

// Share of the target object's colored pixels that fall inside its box.
double target_coverage(const SynthItem& item, const SynthSceneSpec& spec);

// Portable generator helpers shared by the synthetic data and model init.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace vpp
