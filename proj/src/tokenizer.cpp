#include "vpp/tokenizer.hpp"

#include <cctype>
#include <cstdio>
#include <set>

namespace vpp {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Length of a "d.dd" coordinate at position i, or 0.
std::size_t coord_at(std::string_view s, std::size_t i) {
  if (i + 4 > s.size()) return 0;
  if (!is_digit(s[i]) || s[i + 1] != '.' || !is_digit(s[i + 2]) || !is_digit(s[i + 3])) return 0;
  if (i + 4 < s.size() && is_digit(s[i + 4])) return 0;
  if (i > 0 && (is_digit(s[i - 1]) || s[i - 1] == '.')) return 0;
  return 4;
}

}  // namespace

Vocab::Vocab() {
  for (const char* s : {"<bos>", "<eos>", "<pad>", "<unk>"}) add(s);
  for (int i = 0; i < kCoordCount; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "%d.%02d", i / 100, i % 100);
    add(buf);
  }
  for (const char* s : {"[", "]", ",", " "}) add(s);
  first_extra_ = size();
}

void Vocab::add(const std::string& token) {
  if (ids_.count(token)) return;
  ids_[token] = int(tokens_.size());
  tokens_.push_back(token);
}

std::vector<std::string> Vocab::pieces(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::size_t n = coord_at(text, i)) {
      out.emplace_back(text.substr(i, n));
      i += n;
      continue;
    }
    const std::size_t start = i;
    std::size_t j = i;
    if (text[j] == ' ' && j + 1 < text.size() && is_alpha(text[j + 1])) ++j;
    if (is_alpha(text[j])) {
      while (j < text.size() && is_alpha(text[j])) ++j;
      out.emplace_back(text.substr(start, j - start));
      i = j;
      continue;
    }
    out.emplace_back(text.substr(i, 1));
    ++i;
  }
  return out;
}

Vocab Vocab::harvest(std::span<const std::string> texts) {
  std::set<std::string> found;
  Vocab base;
  for (const std::string& t : texts)
    for (std::string& p : pieces(t))
      if (!base.ids_.count(p)) found.insert(std::move(p));
  for (const std::string& p : found) base.add(p);
  return base;
}

Vocab Vocab::from_extras(std::span<const std::string> extras) {
  Vocab v;
  for (const std::string& e : extras) v.add(e);
  return v;
}

std::vector<std::string> Vocab::extras() const {
  return {tokens_.begin() + first_extra_, tokens_.end()};
}

int Vocab::id_of(const std::string& token) const {
  const auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::tokenize(std::string_view text) const {
  std::vector<int> ids;
  for (const std::string& p : pieces(text)) ids.push_back(id_of(p));
  return ids;
}

std::string Vocab::detokenize(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kBos || id == kEos || id == kPad) continue;
    if (id < 0 || id >= size()) continue;
    out += tokens_[id];
  }
  return out;
}

std::vector<int> Vocab::encode_sequence(std::string_view text) const {
  std::vector<int> ids{kBos};
  for (int id : tokenize(text)) ids.push_back(id);
  ids.push_back(kEos);
  return ids;
}

}  // namespace vpp
