#include "wm/corpus/genre_pattern.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "wm/corpus/utf8.hpp"
#include "wm/error.hpp"

namespace wm {

std::string to_string(Genre genre) {
  switch (genre) {
    case Genre::Quatrain: return "quatrain";
    case Genre::Iambic: return "iambic";
    case Genre::Lyric: return "lyric";
  }
  return "quatrain";
}

Genre parse_genre(const std::string& name) {
  if (name == "quatrain") return Genre::Quatrain;
  if (name == "iambic") return Genre::Iambic;
  if (name == "lyric") return Genre::Lyric;
  throw ConfigError("unknown genre '" + name + "' (expected quatrain, iambic or lyric)");
}

int GenrePattern::max_line_length() const {
  int m = 0;
  for (const auto& l : lines) m = std::max(m, static_cast<int>(l.size()));
  return m;
}

int GenrePattern::total_positions() const {
  int n = 0;
  for (const auto& l : lines) n += static_cast<int>(l.size());
  return n;
}

bool GenrePattern::allows_repeat(int line, int position, int earlier_position) const {
  return std::any_of(repeats.begin(), repeats.end(), [&](const auto& r) {
    return r[0] == line && r[1] == position && r[2] == earlier_position;
  });
}

void GenrePattern::validate() const {
  if (lines.size() < 2) throw DataError("pattern '" + name + "' needs at least 2 lines");
  for (const auto& l : lines) {
    if (l.empty()) throw DataError("pattern '" + name + "' has an empty line");
    for (int c : l) {
      if (c < 0 || c > PhonologyLexicon::kFree) {
        throw DataError("pattern '" + name + "' has category " + std::to_string(c) + " out of range");
      }
    }
  }
  for (const auto& [line, pos] : rhyme_positions) {
    if (line < 0 || line >= line_count() || pos < 0 || pos >= line_length(line)) {
      throw DataError("pattern '" + name + "' has a rhyme position outside the pattern");
    }
  }
  for (const auto& r : repeats) {
    if (r[0] < 0 || r[0] >= line_count() || r[1] >= line_length(r[0]) || r[2] < 0 || r[2] >= r[1]) {
      throw DataError("pattern '" + name + "' has an invalid repeat entry");
    }
  }
}

void to_json(nlohmann::json& j, const GenrePattern& p) {
  j = nlohmann::json{{"name", p.name}, {"genre", to_string(p.genre)}, {"lines", p.lines}};
  nlohmann::json rhymes = nlohmann::json::array();
  for (const auto& [l, pos] : p.rhyme_positions) rhymes.push_back({l, pos});
  j["rhyme_positions"] = rhymes;
  if (!p.repeats.empty()) j["repeats"] = p.repeats;
}

void from_json(const nlohmann::json& j, GenrePattern& p) {
  try {
    p.name = j.value("name", std::string{});
    p.genre = parse_genre(j.value("genre", std::string("quatrain")));
    p.lines = j.at("lines").get<std::vector<std::vector<int>>>();
    p.rhyme_positions.clear();
    for (const auto& r : j.value("rhyme_positions", nlohmann::json::array())) {
      p.rhyme_positions.emplace_back(r.at(0).get<int>(), r.at(1).get<int>());
    }
    p.repeats = j.value("repeats", std::vector<std::array<int, 3>>{});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed pattern: ") + e.what());
  }
  p.validate();
}

GenrePattern pattern_from_lengths(const std::string& spec, Genre genre) {
  const std::string prefix = "lengths:";
  if (spec.rfind(prefix, 0) != 0) throw ConfigError("pattern spec must start with 'lengths:'");
  GenrePattern p;
  p.name = spec;
  p.genre = genre;
  for (const auto& field : split(spec.substr(prefix.size()), ',')) {
    int n = 0;
    try {
      n = std::stoi(field);
    } catch (const std::exception&) {
      throw ConfigError("bad line length '" + field + "' in pattern spec");
    }
    if (n < 1) throw ConfigError("line lengths in a pattern spec must be >= 1");
    p.lines.emplace_back(static_cast<std::size_t>(n), PhonologyLexicon::kFree);
  }
  p.validate();
  return p;
}

const GenrePattern* PatternLibrary::find(const std::string& name) const {
  for (const auto& p : patterns) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

PatternLibrary PatternLibrary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pattern library " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("pattern library " + path.string() + ": " + e.what());
  }
  PatternLibrary lib;
  const auto& list = j.is_object() ? j.at("patterns") : j;
  for (const auto& entry : list) lib.patterns.push_back(entry.get<GenrePattern>());
  return lib;
}

void PatternLibrary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pattern library " + path.string());
  out << nlohmann::json{{"patterns", patterns}}.dump(1) << '\n';
}

Compliance check_compliance(const GenrePattern& pattern,
                            const std::vector<std::vector<std::string>>& poem_chars,
                            const PhonologyLexicon& lexicon) {
  Compliance c;
  c.lines_expected = pattern.line_count();
  c.structure_ok = static_cast<int>(poem_chars.size()) == pattern.line_count();
  const std::size_t n = std::min(poem_chars.size(), pattern.lines.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& req = pattern.lines[i];
    const auto& got = poem_chars[i];
    if (got.size() == req.size()) {
      ++c.lines_matching_length;
    } else {
      c.structure_ok = false;
    }
    for (std::size_t p = 0; p < req.size(); ++p) {
      if (req[p] == PhonologyLexicon::kFree) continue;
      ++c.constrained_positions;
      if (p < got.size() && lexicon.category_of(got[p]) == req[p]) ++c.matched_positions;
    }
  }
  return c;
}

namespace {

bool library_fits(const GenrePattern& tune, const std::vector<std::vector<int>>& categories) {
  if (tune.lines.size() != categories.size()) return false;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (tune.lines[i].size() != categories[i].size()) return false;
    for (std::size_t p = 0; p < categories[i].size(); ++p) {
      const int want = tune.lines[i][p];
      if (want != PhonologyLexicon::kFree && want != categories[i][p]) return false;
    }
  }
  return true;
}

}  // namespace

GenrePattern derive_genre_pattern(const std::vector<std::string>& lines, const PhonologyLexicon& lexicon,
                                  const PatternLibrary* library, Genre genre, int* unknown_chars) {
  if (lines.empty()) throw DataError("cannot derive a pattern from an empty poem");
  std::vector<std::vector<std::string>> chars;
  std::vector<std::vector<int>> categories;
  int unknown = 0;
  for (const auto& line : lines) {
    chars.push_back(split_chars(line));
    std::vector<int> cats;
    for (const auto& ch : chars.back()) {
      if (!lexicon.contains(ch)) ++unknown;
      cats.push_back(lexicon.category_of(ch));
    }
    categories.push_back(std::move(cats));
  }
  if (unknown_chars) *unknown_chars += unknown;

  if (library) {
    for (const auto& tune : library->patterns) {
      if (library_fits(tune, categories)) return tune;
    }
  }

  GenrePattern p;
  p.genre = genre;
  p.lines = categories;
  // Rhyme: the largest group of line endings sharing a rhyme class.
  std::map<int, std::vector<std::pair<int, int>>> by_class;
  for (std::size_t i = 0; i < chars.size(); ++i) {
    if (chars[i].empty()) continue;
    const int cls = lexicon.rhyme_class_of(chars[i].back());
    if (cls >= 0) by_class[cls].emplace_back(static_cast<int>(i), static_cast<int>(chars[i].size()) - 1);
  }
  for (const auto& [cls, positions] : by_class) {
    if (positions.size() >= 2 && positions.size() > p.rhyme_positions.size()) p.rhyme_positions = positions;
  }
  for (std::size_t i = 0; i < chars.size(); ++i) {
    for (std::size_t pos = 0; pos < chars[i].size(); ++pos) {
      for (std::size_t earlier = 0; earlier < pos; ++earlier) {
        if (chars[i][pos] == chars[i][earlier]) {
          p.repeats.push_back({static_cast<int>(i), static_cast<int>(pos), static_cast<int>(earlier)});
        }
      }
    }
  }
  p.validate();
  return p;
}

}  // namespace wm
