#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wm {

// Character vocabulary. Ids 0..2 are reserved; characters follow in
// descending corpus frequency, ties broken by code point.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kReserved = 3;

  Vocabulary();
  // Characters in id order, excluding the reserved entries.
  explicit Vocabulary(const std::vector<std::string>& chars);

  int size() const { return static_cast<int>(char_of_.size()); }
  int id_of(std::string_view ch) const;
  const std::string& char_of(int id) const;
  bool contains(std::string_view ch) const { return id_of_.count(std::string(ch)) != 0; }
  bool is_reserved(int id) const { return id < kReserved; }

  std::vector<int> encode(std::string_view line) const;
  std::string decode(const std::vector<int>& ids) const;

  // Non-reserved characters in id order.
  std::vector<std::string> characters() const;

 private:
  std::vector<std::string> char_of_;
  std::unordered_map<std::string, int> id_of_;
};

// Builds a vocabulary from text lines. Throws DataError on an empty corpus.
Vocabulary build_vocabulary(const std::vector<std::string>& lines, int min_count);

}  // namespace wm
