#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wm/corpus/lexicon.hpp"

namespace wm {

enum class Genre { Quatrain, Iambic, Lyric };

std::string to_string(Genre genre);
Genre parse_genre(const std::string& name);

// Structural and phonological template of a poem: line count, line lengths
// and the required category of every position.
struct GenrePattern {
  std::string name;
  Genre genre = Genre::Quatrain;
  std::vector<std::vector<int>> lines;
  // Line-final positions sharing the dominant rhyme class.
  std::vector<std::pair<int, int>> rhyme_positions;
  // {line, position, earlier_position}: position may repeat the character at earlier_position.
  std::vector<std::array<int, 3>> repeats;

  int line_count() const { return static_cast<int>(lines.size()); }
  int line_length(int line) const { return static_cast<int>(lines.at(static_cast<std::size_t>(line)).size()); }
  int max_line_length() const;
  int total_positions() const;
  bool allows_repeat(int line, int position, int earlier_position) const;

  // Throws DataError when the invariants (>= 2 lines, lengths >= 1, categories in range) fail.
  void validate() const;
};

void to_json(nlohmann::json& j, const GenrePattern& p);
void from_json(const nlohmann::json& j, GenrePattern& p);

// An all-FREE pattern from a "lengths:7,7,7,7" style spec.
GenrePattern pattern_from_lengths(const std::string& spec, Genre genre = Genre::Quatrain);

struct PatternLibrary {
  std::vector<GenrePattern> patterns;

  const GenrePattern* find(const std::string& name) const;
  static PatternLibrary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct Compliance {
  bool structure_ok = true;        // line count and every line length match
  int constrained_positions = 0;   // non-FREE positions checked
  int matched_positions = 0;
  int lines_expected = 0;
  int lines_matching_length = 0;

  double category_rate() const {
    return constrained_positions == 0 ? 1.0
                                      : static_cast<double>(matched_positions) / constrained_positions;
  }
  bool fully_compliant() const { return structure_ok && matched_positions == constrained_positions; }
};

// Checks poem lines (split into characters) against a pattern.
Compliance check_compliance(const GenrePattern& pattern,
                            const std::vector<std::vector<std::string>>& poem_chars,
                            const PhonologyLexicon& lexicon);

// Library tune whose line lengths and categories fit the poem, else a pattern
// synthesized from the poem itself. `unknown_chars` counts lexicon misses.
GenrePattern derive_genre_pattern(const std::vector<std::string>& lines, const PhonologyLexicon& lexicon,
                                  const PatternLibrary* library, Genre genre, int* unknown_chars = nullptr);

}  // namespace wm
