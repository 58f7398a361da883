#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <regex>

#include "vpp/errors.hpp"
#include "vpp/eval_harness.hpp"
#include "vpp/report.hpp"
#include "vpp/sweep.hpp"

using namespace vpp;

TEST_CASE("box parsing") {
  const auto a = parse_box("I have provided the region: [0.52, 0.59, 0.82, 0.83]");
  REQUIRE(a);
  CHECK(*a == NormBox{0.52, 0.59, 0.82, 0.83});
  CHECK_FALSE(parse_box("no box here"));
  const auto r = parse_box("[0.9, 0.9, 0.1, 0.1]");
  REQUIRE(r);
  CHECK(*r == NormBox{0.1, 0.1, 0.9, 0.9});
  const auto c = parse_box("[-0.2, 0.1, 1.4, 0.5]");
  REQUIRE(c);
  CHECK(*c == NormBox{0.0, 0.1, 1.0, 0.5});
  CHECK_FALSE(parse_box("[0.1, 0.2, 0.3]"));
  CHECK(parse_box("first [0.10, 0.20, 0.30, 0.40] then [0.5, 0.5, 0.6, 0.6]")->x1 == 0.10);

  CHECK(parse_box("[0.52, 0.59, 0.82, 0.83]", true));
  CHECK_FALSE(parse_box("[0.9, 0.9, 0.1, 0.1]", true));
  CHECK_FALSE(parse_box("[0.5,0.59,0.82,0.83]", true));
  CHECK_FALSE(parse_box_detailed("nothing").reason.empty());
}

TEST_CASE("scoring responders") {
  const std::vector<NormBox> truths = {{0.1, 0.1, 0.5, 0.5}, {0.2, 0.3, 0.6, 0.9}, {0.0, 0.0, 1.0, 1.0}};
  auto echo = [&](std::size_t i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "[%.2f, %.2f, %.2f, %.2f]", truths[i].x1, truths[i].y1, truths[i].x2, truths[i].y2);
    return std::string(buf);
  };
  const EvalRow e = evaluate_responses(echo, truths, "test");
  CHECK(e.accuracy == 1.0);
  CHECK(e.parse_failures == 0);
  CHECK(e.n == 3);
  const EvalRow none = evaluate_responses([](std::size_t) { return std::string("nope"); }, truths, "test");
  CHECK(none.accuracy == 0.0);
  CHECK(none.parse_failures == 3);
  // IoU exactly 0.5 counts: half-width box inside the truth.
  const std::vector<NormBox> one = {{0.0, 0.0, 0.4, 0.4}};
  CHECK(evaluate_responses([](std::size_t) { return std::string("[0.00, 0.00, 0.40, 0.20]"); }, one, "t").accuracy == 1.0);
  CHECK(evaluate_responses([](std::size_t) { return std::string("[0.00, 0.00, 0.40, 0.19]"); }, one, "t").accuracy == 0.0);
}

TEST_CASE("fingerprints") {
  CHECK(fingerprint_hex("") == "cbf29ce484222325");
  CHECK(fingerprint_hex("a") == "af63dc4c8601ec8c");
  ModelConfig c;
  CHECK(fingerprint(c, "d") == fingerprint(c, "d"));
  CHECK(fingerprint(c, "d") != fingerprint(c, "e"));
  ModelConfig other = c;
  other.overlay.alpha = 0.5;
  CHECK(fingerprint(c, "d") != fingerprint(other, "d"));
}

namespace {

SweepTable table_of(const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  SweepTable t;
  t.fingerprint = "abc";
  for (const auto& [v, accs] : rows) {
    t.values.push_back(v);
    std::uint64_t seed = 1;
    for (double a : accs) {
      CellResult c;
      c.value = v;
      c.seed = seed++;
      c.ok = a >= 0;
      c.accuracy = a;
      t.cells.push_back(c);
    }
  }
  return t;
}

}  // namespace

TEST_CASE("sweep summaries and rendering") {
  const SweepTable t = table_of({{"none", {0.10, 0.125, 0.2}},
                                 {"global", {0.3, 0.3, 0.3}},
                                 {"local", {0.5, -1.0, 0.25}},
                                 {"both", {0.40, 0.45, 0.5}}});
  const SweepSummary s = summarize(t);
  REQUIRE(s.rows.size() == 4);
  // Oracle: mean and n-1 standard deviation by hand, in percent.
  const double m0 = (10.0 + 12.5 + 20.0) / 3;
  const double sd0 = std::sqrt(((10 - m0) * (10 - m0) + (12.5 - m0) * (12.5 - m0) + (20 - m0) * (20 - m0)) / 2);
  CHECK(s.rows[0].mean_pct == doctest::Approx(m0));
  CHECK(s.rows[0].std_pct == doctest::Approx(sd0));
  CHECK(s.rows[1].std_pct == doctest::Approx(0.0));
  CHECK(s.rows[2].runs == 2);
  CHECK(s.rows[2].failures == 1);
  REQUIRE(s.delta_pct);
  CHECK(*s.delta_pct == doctest::Approx(45.00 - 14.17));

  const std::string md = render(s, ReportFormat::Markdown);
  const std::string csv = render(s, ReportFormat::Csv);
  CHECK(md.find("+30.83") != std::string::npos);
  CHECK(csv.find("+30.83") != std::string::npos);
  // Every numeral with two decimals appears in both renderings, in the same order.
  const std::regex num(R"([+-]?\d+\.\d\d)");
  std::vector<std::string> a, b;
  for (std::sregex_iterator it(md.begin(), md.end(), num), end; it != end; ++it) a.push_back(it->str());
  for (std::sregex_iterator it(csv.begin(), csv.end(), num), end; it != end; ++it) b.push_back(it->str());
  CHECK(a.size() == 9);
  CHECK(a == b);

  CHECK(format_pct(-0.001) == "0.00");
  CHECK(format_pct(0.0, true) == "+0.00");
  CHECK(format_pct(2.345, true) == "+2.35");

  const auto path = std::filesystem::temp_directory_path() / "vpp_sweep_test.csv";
  emit_report(path, csv);
  const auto rows = read_csv(path);
  REQUIRE(rows.size() == 6);
  CHECK(rows[1][1] == "none");
  CHECK(rows[1][2] == format_pct(m0));
  CHECK(rows[5][2] == "+30.83");
}

TEST_CASE("sweep specs") {
  SweepSpec a;
  a.param = SweepParam::Alpha;
  a.values = {"0.5"};
  a.normalize();
  CHECK(a.values == std::vector<std::string>{"0.5", "1.0"});
  SweepSpec w;
  w.param = SweepParam::MaskWidth;
  w.values = {"2"};
  w.normalize();
  CHECK(w.values.back() == "none");
  SweepSpec bad;
  bad.param = SweepParam::Fusion;
  bad.values = {"sideways"};
  CHECK_THROWS_AS(bad.normalize(), ContractError);
  SweepSpec empty;
  empty.values = {};
  empty.seeds = {};
  CHECK_THROWS_AS(empty.normalize(), ContractError);
  CHECK(default_sweep_values(SweepParam::Components) ==
        std::vector<std::string>{"none", "global", "local", "both"});

  const ExperimentConfig base = toy_experiment();
  const ExperimentConfig none = apply_sweep_value(base, SweepParam::MaskWidth, "none");
  CHECK(none.model.overlay.mask_width == (base.model.image_side + 1) / 2);
  const ExperimentConfig off = apply_sweep_value(base, SweepParam::Components, "none");
  CHECK_FALSE(off.model.use_global);
  CHECK_FALSE(off.model.use_local);
  const ExperimentConfig g = apply_sweep_value(base, SweepParam::Components, "global");
  CHECK(g.model.use_global);
  CHECK_FALSE(g.model.use_local);
}

TEST_CASE("a tiny sweep runs, caches and reproduces") {
  ExperimentConfig e = toy_experiment();
  e.model.image_side = 16;
  e.model.patch = 4;
  e.model.dim = 8;
  e.model.heads = 2;
  e.model.k_queries = 2;
  e.model.encoder_layers = e.model.decoder_layers = e.model.local_layers = 1;
  e.model.overlay.mask_width = 2;
  e.n_train = 8;
  e.n_test = 4;
  e.schedule.epochs = 1;
  SweepSpec spec;
  spec.param = SweepParam::Components;
  spec.values = {"none", "both"};
  spec.seeds = {1, 2};
  spec.epochs = 1;
  const auto cache = std::filesystem::temp_directory_path() / "vpp_sweep_cache_test";
  std::filesystem::remove_all(cache);
  const SweepTable first = run_sweep(spec, e, cache);
  REQUIRE(first.cells.size() == 4);
  for (const CellResult& c : first.cells) {
    CHECK(c.ok);
    CHECK_FALSE(c.cached);
    CHECK(c.n_test == 4);
    CHECK(c.epoch_loss.size() == 1);
  }
  const SweepTable second = run_sweep(spec, e, cache);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(second.cells[i].cached);
    CHECK(second.cells[i].accuracy == first.cells[i].accuracy);
    CHECK(second.cells[i].epoch_loss == first.cells[i].epoch_loss);
    CHECK(second.cells[i].fingerprint == first.cells[i].fingerprint);
  }
  CHECK(first.fingerprint == second.fingerprint);
  std::filesystem::remove_all(cache);
  const SweepTable third = run_sweep(spec, e, cache);
  for (std::size_t i = 0; i < 4; ++i) CHECK(third.cells[i].epoch_loss == first.cells[i].epoch_loss);
}
