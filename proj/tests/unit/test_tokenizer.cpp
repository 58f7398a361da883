#include <doctest.h>

#include <string>
#include <vector>

#include "vpp/tokenizer.hpp"

using vpp::Vocab;

TEST_CASE("coordinates occupy one contiguous block") {
  const Vocab v;
  for (int i = 0; i <= 100; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%.2f", i / 100.0);
    const int id = v.id_of(buf);
    CHECK(id == Vocab::kFirstCoord + i);
    CHECK(v.is_coord(id));
  }
  CHECK_FALSE(v.is_coord(Vocab::kEos));
  CHECK_FALSE(v.is_coord(Vocab::kFirstCoord + Vocab::kCoordCount));
}

TEST_CASE("box strings tokenize to coordinate and punctuation pieces") {
  const Vocab v;
  const auto ids = v.tokenize("[0.52, 0.59, 0.82, 0.83]");
  REQUIRE(ids.size() == 12);
  CHECK(ids[1] == Vocab::kFirstCoord + 52);
  CHECK(ids[4] == Vocab::kFirstCoord + 59);
  CHECK(ids[7] == Vocab::kFirstCoord + 82);
  CHECK(ids[10] == Vocab::kFirstCoord + 83);
  CHECK(v.detokenize(ids) == "[0.52, 0.59, 0.82, 0.83]");
  for (int id : ids) CHECK(id != Vocab::kUnk);
}

TEST_CASE("harvested vocabulary round-trips its texts") {
  const std::vector<std::string> texts = {
      "Please output the bounding box of: the red ellipse.",
      "the largest blue rectangle",
      "[0.10, 0.20, 0.30, 0.40]",
  };
  const Vocab v = Vocab::harvest(texts);
  for (const auto& t : texts) {
    const auto ids = v.tokenize(t);
    for (int id : ids) CHECK(id != Vocab::kUnk);
    CHECK(v.detokenize(ids) == t);
  }
  const auto seq = v.encode_sequence(texts[1]);
  CHECK(seq.front() == Vocab::kBos);
  CHECK(seq.back() == Vocab::kEos);
  CHECK(v.detokenize(seq) == texts[1]);

  // Unknown words fall back to kUnk; harvest order does not depend on input order.
  CHECK(v.tokenize(" zebra").front() == Vocab::kUnk);
  const std::vector<std::string> reversed(texts.rbegin(), texts.rend());
  CHECK(Vocab::harvest(reversed).extras() == v.extras());
  const Vocab rebuilt = Vocab::from_extras(v.extras());
  CHECK(rebuilt.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(rebuilt.token(i) == v.token(i));
}

TEST_CASE("three-decimal numbers are not coordinate tokens") {
  const Vocab v = Vocab::harvest(std::vector<std::string>{"0.123"});
  for (int id : v.tokenize("0.123")) CHECK_FALSE(v.is_coord(id));
}
