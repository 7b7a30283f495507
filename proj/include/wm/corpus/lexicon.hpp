#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace wm {

class Vocabulary;

// Character -> phonology category. Categories 0..35 are real; 36 (FREE)
// marks unconstrained positions and unknown characters.
class PhonologyLexicon {
 public:
  static constexpr int kNumCategories = 36;
  static constexpr int kFree = 36;
  static constexpr int kTableRows = kNumCategories + 1;

  PhonologyLexicon() = default;

  // Parses "char category [rhyme_class]" lines; '#' starts a comment.
  static PhonologyLexicon parse(std::string_view text);
  static PhonologyLexicon load(const std::filesystem::path& path);

  void set(const std::string& ch, int category, int rhyme_class = -1);
  int category_of(std::string_view ch) const;
  // Rhyme class of a character, or -1 when unknown. Defaults to the category.
  int rhyme_class_of(std::string_view ch) const;
  bool contains(std::string_view ch) const;
  std::size_t size() const { return entries_.size(); }

  // Category per vocabulary id (FREE for reserved or unknown ids).
  std::vector<int> categories_for(const Vocabulary& vocab) const;

  std::string serialize() const;

 private:
  struct Entry {
    int category;
    int rhyme_class;
  };
  std::map<std::string, Entry, std::less<>> entries_;
};

}  // namespace wm
