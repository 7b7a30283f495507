#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "wm/corpus/genre_pattern.hpp"
#include "wm/corpus/vocabulary.hpp"

namespace wm {

inline constexpr int kMaxKeywords = 4;
inline constexpr char kLineDelimiter = '|';

// One corpus entry before encoding.
struct RawPoem {
  std::vector<std::string> lines;
  std::vector<std::string> keywords;  // empty unless pre-attached in the corpus file
};

// Corpus format: one poem per line, poem lines joined by '|', optionally a tab
// followed by keywords separated by spaces or commas. Blank lines and lines
// starting with '#' are skipped.
std::vector<RawPoem> parse_corpus(std::string_view text);
std::vector<RawPoem> load_corpus(const std::filesystem::path& path);

// One training/evaluation record: keywords, encoded lines and the pattern
// the lines follow.
struct PoemExample {
  std::vector<std::string> keywords;
  std::vector<std::vector<int>> keyword_tokens;
  std::vector<std::string> line_text;
  std::vector<std::vector<int>> lines;
  GenrePattern pattern;
  Genre genre = Genre::Quatrain;

  int char_count() const;
  // Throws DataError unless 1..4 keywords are present and every line length
  // matches the pattern.
  void validate() const;
};

PoemExample make_example(const std::vector<std::string>& keywords, const std::vector<std::string>& lines,
                         const GenrePattern& pattern, Genre genre, const Vocabulary& vocab);

// One pair per keyword prefix: {k1}, {k1,k2}, ... up to four.
std::vector<PoemExample> build_training_pairs(const PoemExample& poem);

nlohmann::json example_to_json(const PoemExample& example);
PoemExample example_from_json(const nlohmann::json& j, const Vocabulary& vocab);

// JSON-lines dataset files.
void save_examples(const std::filesystem::path& path, const std::vector<PoemExample>& examples);
std::vector<PoemExample> load_examples(const std::filesystem::path& path, const Vocabulary& vocab);

}  // namespace wm
