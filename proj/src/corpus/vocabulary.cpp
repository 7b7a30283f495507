#include "wm/corpus/vocabulary.hpp"

#include <algorithm>
#include <map>

#include "wm/corpus/utf8.hpp"
#include "wm/error.hpp"

namespace wm {

Vocabulary::Vocabulary() : char_of_{"<pad>", "<unk>", "<bos>"} {}

Vocabulary::Vocabulary(const std::vector<std::string>& chars) : Vocabulary() {
  for (const auto& ch : chars) {
    if (id_of_.count(ch)) throw DataError("duplicate vocabulary entry '" + ch + "'");
    id_of_[ch] = static_cast<int>(char_of_.size());
    char_of_.push_back(ch);
  }
}

int Vocabulary::id_of(std::string_view ch) const {
  auto it = id_of_.find(std::string(ch));
  return it == id_of_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::char_of(int id) const {
  if (id < 0 || id >= size()) throw DataError("token id " + std::to_string(id) + " outside vocabulary");
  return char_of_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(std::string_view line) const {
  std::vector<int> ids;
  for (const auto& ch : split_chars(line)) ids.push_back(id_of(ch));
  return ids;
}

std::string Vocabulary::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) out += char_of(id);
  return out;
}

std::vector<std::string> Vocabulary::characters() const {
  return {char_of_.begin() + kReserved, char_of_.end()};
}

Vocabulary build_vocabulary(const std::vector<std::string>& lines, int min_count) {
  std::map<std::string, long> counts;
  for (const auto& line : lines) {
    for (const auto& ch : split_chars(line)) ++counts[ch];
  }
  if (counts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, long>> entries(counts.begin(), counts.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return code_point(a.first) < code_point(b.first);
  });
  std::vector<std::string> chars;
  for (const auto& [ch, n] : entries) {
    if (n >= min_count) chars.push_back(ch);
  }
  return Vocabulary(chars);
}

}  // namespace wm
