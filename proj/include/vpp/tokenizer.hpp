#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vpp {

// Closed toy vocabulary: specials, the 101 two-decimal coordinates as one
// contiguous id range, four punctuation marks, then harvested words and
// characters in sorted order. Words carry their leading space (" red").
class Vocab {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr int kFirstCoord = 4;
  static constexpr int kCoordCount = 101;

  Vocab();
  // Adds every word/character piece of `texts` that is not already a token.
  static Vocab harvest(std::span<const std::string> texts);
  // Rebuilds a vocabulary from its harvested extras (as saved in checkpoints).
  static Vocab from_extras(std::span<const std::string> extras);

  std::vector<int> tokenize(std::string_view text) const;
  std::string detokenize(std::span<const int> ids) const;
  // BOS + tokenize(text) + EOS.
  std::vector<int> encode_sequence(std::string_view text) const;

  int size() const { return int(tokens_.size()); }
  int id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const { return tokens_.at(id); }
  bool is_coord(int id) const { return id >= kFirstCoord && id < kFirstCoord + kCoordCount; }
  std::vector<std::string> extras() const;

  // Splits text into pieces: coordinates, optionally space-led words, single characters.
  static std::vector<std::string> pieces(std::string_view text);

 private:
  void add(const std::string& token);
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
  int first_extra_ = 0;
};

}  // namespace vpp
