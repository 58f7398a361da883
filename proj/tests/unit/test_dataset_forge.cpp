#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "vpp/dataset_forge.hpp"
#include "vpp/errors.hpp"
#include "vpp/synth.hpp"

using namespace vpp;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = VPP_FIXTURE_DIR;

std::vector<Sample> load(SourceKind kind, const char* file) {
  return ingest_file(kind, kFixtures / file, read_dims_table(kFixtures / "dims.txt"));
}

double two_dp(double v) { return std::round(v * 100.0) / 100.0; }

void check_box(const NormBox& b, double x1, double y1, double x2, double y2) {
  CHECK(b.x1 == doctest::Approx(x1).epsilon(1e-12));
  CHECK(b.y1 == doctest::Approx(y1).epsilon(1e-12));
  CHECK(b.x2 == doctest::Approx(x2).epsilon(1e-12));
  CHECK(b.y2 == doctest::Approx(y2).epsilon(1e-12));
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream(p) << content;
  return p;
}

}  // namespace

TEST_CASE("llava grounding record keeps its box") {
  const auto s = load(SourceKind::Llava665K, "llava665k.jsonl");
  REQUIRE(s.size() == 2);
  CHECK(s[1].task == Task::Grounding);
  REQUIRE(s[1].boxes.size() == 1);
  check_box(s[1].boxes[0].box, 0.52, 0.59, 0.82, 0.83);
  CHECK(s[1].boxes[0].mention == "white frosting");
  CHECK(s[1].answer_text() == "[0.52, 0.59, 0.82, 0.83]");
  CHECK(s[0].task == Task::RegionCaption);
  check_box(s[0].boxes[0].box, 0.52, 0.59, 0.82, 0.83);
}

TEST_CASE("cb-grd special token becomes a grounding question") {
  const auto s = load(SourceKind::CbGrd, "cb_grd.jsonl");
  REQUIRE(s.size() == 2);
  // 1000 x 1000 image: each coordinate divides by 1000, then the two-decimal grid.
  check_box(s[0].boxes[0].box, two_dp(0.245), two_dp(0.384), two_dp(0.283), two_dp(0.502));
  CHECK(s[0].boxes[0].mention == "black pants");
  for (const Sample& x : s) {
    for (const Turn& t : x.turns) {
      CHECK(t.text.find(":[") == std::string::npos);
      std::string rest = t.text;
      if (rest.rfind(kImageToken, 0) == 0) rest.erase(0, std::string(kImageToken).size());
      CHECK(rest.find('<') == std::string::npos);
    }
  }
  CHECK(s[0].turns[0].text.find("black pants") != std::string::npos);
  CHECK(s[1].boxes[0].mention == "red and hanging and blue jacket");
  CHECK(s[0].answer_text() == format_box(s[0].boxes[0].box));
}

TEST_CASE("cb-ref becomes a region caption") {
  const auto s = load(SourceKind::CbRef, "cb_ref.jsonl");
  REQUIRE(s.size() == 2);
  CHECK(s[0].task == Task::RegionCaption);
  CHECK(s[0].answer_text() == "It is a black charger.");
  check_box(s[0].boxes[0].box, two_dp(0.354), two_dp(0.435), two_dp(0.451), two_dp(0.561));
  CHECK(s[0].turns[0].text.find("black charger:") == std::string::npos);
}

TEST_CASE("genixer box is normalized in the padded square") {
  const auto s = load(SourceKind::Genixer, "genixer.jsonl");
  REQUIRE(s.size() == 2);
  // 480 x 360: side 480, vertical offset 60.
  check_box(s[0].boxes[0].box, two_dp(75.0 / 480), two_dp(73.0 / 480), two_dp(240.0 / 480),
            two_dp(127.0 / 480));
  check_box(s[0].boxes[0].box, 0.16, 0.15, 0.50, 0.26);
  CHECK(s[0].turns[0].text ==
        std::string(kImageToken) + std::string(kGroundingTemplate) + "the watch has a black strap.");
}

TEST_CASE("every fixture validates and round-trips through the unified format") {
  std::vector<Sample> all;
  for (auto [kind, file] : {std::pair{SourceKind::Llava665K, "llava665k.jsonl"},
                            std::pair{SourceKind::CbGrd, "cb_grd.jsonl"},
                            std::pair{SourceKind::CbRef, "cb_ref.jsonl"},
                            std::pair{SourceKind::Genixer, "genixer.jsonl"}}) {
    for (const Sample& s : load(kind, file)) all.push_back(s);
  }
  CHECK(validate(all).empty());
  for (InstructionMode mode :
       {InstructionMode::None, InstructionMode::System, InstructionMode::SampleLevel}) {
    for (const Sample& s : all) {
      const Sample with = inject_instruction(s, mode);
      const Sample back = from_json(nlohmann::json::parse(to_json(with).dump()));
      CHECK(back == with);
    }
  }
  const fs::path p = fs::temp_directory_path() / "vpp_unified_test.jsonl";
  write_jsonl(p, all);
  CHECK(read_jsonl(p) == all);
}

TEST_CASE("instruction injection is idempotent per mode") {
  const Sample s = load(SourceKind::Genixer, "genixer.jsonl")[0];
  const Sample once = inject_instruction(s, InstructionMode::SampleLevel);
  CHECK(inject_instruction(once, InstructionMode::SampleLevel) == once);
  CHECK(once.turns[0].text.find(kVppInstruction) == kImageToken.size());
  const Sample none = inject_instruction(once, InstructionMode::None);
  CHECK(none.turns[0].text.find(kVppInstruction) == std::string::npos);
  CHECK(none == inject_instruction(s, InstructionMode::None));
  const Sample sys = inject_instruction(once, InstructionMode::System);
  CHECK(sys.turns[0].text.find(kVppInstruction) == std::string::npos);
  CHECK(sys.query_text().rfind(std::string(kVppInstruction), 0) == 0);
}

TEST_CASE("validate flags range and format violations") {
  Sample s = load(SourceKind::Genixer, "genixer.jsonl")[0];
  Sample bad_range = s;
  bad_range.boxes[0].box = {1.2, 0.0, 1.5, 1.0};
  bad_range.turns[1].text = "[1.20, 0.00, 1.50, 1.00]";
  const auto r1 = validate(std::vector{bad_range});
  CHECK(r1.size() == 2);
  Sample three = s;
  three.turns[1].text = "[0.156, 0.152, 0.500, 0.265]";
  const auto r2 = validate(std::vector{three});
  REQUIRE(r2.size() == 1);
  CHECK(r2[0].find("format") != std::string::npos);
  Sample two_boxes = s;
  two_boxes.turns[1].text = "[0.10, 0.10, 0.20, 0.20] [0.30, 0.30, 0.40, 0.40]";
  CHECK(validate(std::vector{two_boxes}).size() == 1);
}

TEST_CASE("ingest errors carry location") {
  const DimsTable dims = read_dims_table(kFixtures / "dims.txt");
  const fs::path broken = temp_file("vpp_broken.jsonl", "{\"image\": \"cb/grd_000001.jpg\"}\n{oops\n");
  try {
    ingest_file(SourceKind::Genixer, broken, dims);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("vpp_broken.jsonl:1") != std::string::npos);
  }
  const fs::path outside = temp_file(
      "vpp_outside.jsonl",
      "{\"image\": \"genixer/watch_000001.jpg\", \"bbox\": [75, 13, 600, 67], \"expression\": \"x\"}\n");
  CHECK_THROWS_AS(ingest_file(SourceKind::Genixer, outside, dims), ValidationError);
  const fs::path nodims = temp_file(
      "vpp_nodims.jsonl", "{\"image\": \"unknown.jpg\", \"bbox\": [1, 1, 2, 2], \"expression\": \"x\"}\n");
  CHECK_THROWS_AS(ingest_file(SourceKind::Genixer, nodims, dims), ValidationError);
}

TEST_CASE("synthetic corpus is deterministic and well formed") {
  SynthSceneSpec spec;
  spec.seed = 7;
  const SynthCorpus a = synth_corpus(spec, 120);
  const SynthCorpus b = synth_corpus(spec, 120);
  REQUIRE(a.items.size() == 120);
  CHECK(a.train == b.train);
  CHECK(a.train.size() + a.test.size() == 120);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < a.items.size(); ++i) {
    CHECK(a.items[i].image.data == b.items[i].image.data);
    CHECK(a.items[i].sample == b.items[i].sample);
    CHECK(a.items[i].sample.boxes[0].box.valid());
    CHECK(target_coverage(a.items[i], spec) >= 0.9);
    samples.push_back(a.items[i].sample);
  }
  CHECK(validate(samples).empty());
  // Prefix stability: item i depends only on (seed, i).
  const SynthCorpus small = synth_corpus(spec, 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(small.items[i].sample == a.items[i].sample);
}

TEST_CASE("synthetic expressions name exactly one object") {
  SynthSceneSpec spec;
  const SynthCorpus c = synth_corpus(spec, 300);
  for (const SynthItem& it : c.items) {
    int matches = 0;
    for (const SynthObject& o : it.objects) {
      const std::string color_expr =
          "the " + spec.palette[o.color].name + " " + to_string(o.shape);
      if (color_expr == it.expression) ++matches;
    }
    if (it.expression.find("most") != std::string::npos) {
      CHECK(matches == 0);
    } else {
      CHECK(matches == 1);
    }
  }
}

TEST_CASE("synthetic target colors and shapes are balanced") {
  SynthSceneSpec spec;
  spec.seed = 11;
  const SynthCorpus c = synth_corpus(spec, 600);
  std::map<int, int> colors;
  std::map<Shape, int> shapes;
  for (const SynthItem& it : c.items) {
    colors[it.objects[it.target].color]++;
    shapes[it.objects[it.target].shape]++;
  }
  const double per_color = 600.0 / double(spec.palette.size());
  for (std::size_t k = 0; k < spec.palette.size(); ++k) {
    CHECK(colors[int(k)] >= 0.8 * per_color);
    CHECK(colors[int(k)] <= 1.2 * per_color);
  }
  for (Shape s : spec.shapes) {
    CHECK(shapes[s] >= 0.8 * 300);
    CHECK(shapes[s] <= 1.2 * 300);
  }
}
