#include "wm/corpus/poem.hpp"

#include <fstream>
#include <sstream>

#include "wm/corpus/utf8.hpp"
#include "wm/error.hpp"

namespace wm {

std::vector<RawPoem> parse_corpus(std::string_view text) {
  std::vector<RawPoem> poems;
  int line_no = 0;
  for (const auto& raw : split(text, '\n')) {
    ++line_no;
    const std::string entry = trim(raw);
    if (entry.empty() || entry[0] == '#') continue;
    RawPoem poem;
    const auto tab = entry.find('\t');
    const std::string body = trim(entry.substr(0, tab));
    for (const auto& l : split(body, kLineDelimiter)) {
      std::string line = trim(l);
      if (line.empty()) throw DataError("corpus line " + std::to_string(line_no) + ": empty poem line");
      poem.lines.push_back(std::move(line));
    }
    if (tab != std::string::npos) {
      std::string kws = entry.substr(tab + 1);
      for (char& c : kws) {
        if (c == ',') c = ' ';
      }
      std::istringstream in(kws);
      for (std::string w; in >> w;) poem.keywords.push_back(w);
    }
    poems.push_back(std::move(poem));
  }
  return poems;
}

std::vector<RawPoem> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str());
}

int PoemExample::char_count() const {
  int n = 0;
  for (const auto& l : lines) n += static_cast<int>(l.size());
  return n;
}

void PoemExample::validate() const {
  if (keywords.empty() || keywords.size() > static_cast<std::size_t>(kMaxKeywords)) {
    throw DataError("a poem example needs 1 to 4 keywords, got " + std::to_string(keywords.size()));
  }
  if (keyword_tokens.size() != keywords.size()) throw DataError("keyword tokens do not match keywords");
  for (const auto& kw : keyword_tokens) {
    if (kw.empty()) throw DataError("empty keyword");
  }
  if (static_cast<int>(lines.size()) != pattern.line_count()) {
    throw DataError("poem has " + std::to_string(lines.size()) + " lines but pattern '" + pattern.name +
                    "' has " + std::to_string(pattern.line_count()));
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (static_cast<int>(lines[i].size()) != pattern.line_length(static_cast<int>(i))) {
      throw DataError("line " + std::to_string(i + 1) + " has length " + std::to_string(lines[i].size()) +
                      " but the pattern requires " + std::to_string(pattern.line_length(static_cast<int>(i))));
    }
  }
}

PoemExample make_example(const std::vector<std::string>& keywords, const std::vector<std::string>& lines,
                         const GenrePattern& pattern, Genre genre, const Vocabulary& vocab) {
  PoemExample ex;
  ex.keywords = keywords;
  for (const auto& kw : keywords) ex.keyword_tokens.push_back(vocab.encode(kw));
  ex.line_text = lines;
  for (const auto& line : lines) ex.lines.push_back(vocab.encode(line));
  ex.pattern = pattern;
  ex.genre = genre;
  ex.validate();
  return ex;
}

std::vector<PoemExample> build_training_pairs(const PoemExample& poem) {
  std::vector<PoemExample> pairs;
  const std::size_t n = std::min(poem.keywords.size(), static_cast<std::size_t>(kMaxKeywords));
  for (std::size_t count = 1; count <= n; ++count) {
    PoemExample ex = poem;
    ex.keywords.assign(poem.keywords.begin(), poem.keywords.begin() + static_cast<std::ptrdiff_t>(count));
    ex.keyword_tokens.assign(poem.keyword_tokens.begin(),
                             poem.keyword_tokens.begin() + static_cast<std::ptrdiff_t>(count));
    pairs.push_back(std::move(ex));
  }
  return pairs;
}

nlohmann::json example_to_json(const PoemExample& example) {
  return nlohmann::json{{"keywords", example.keywords},
                        {"lines", example.line_text},
                        {"genre", to_string(example.genre)},
                        {"pattern", example.pattern}};
}

PoemExample example_from_json(const nlohmann::json& j, const Vocabulary& vocab) {
  try {
    return make_example(j.at("keywords").get<std::vector<std::string>>(),
                        j.at("lines").get<std::vector<std::string>>(), j.at("pattern").get<GenrePattern>(),
                        parse_genre(j.value("genre", std::string("quatrain"))), vocab);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed example: ") + e.what());
  }
}

void save_examples(const std::filesystem::path& path, const std::vector<PoemExample>& examples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& ex : examples) out << example_to_json(ex).dump() << '\n';
}

std::vector<PoemExample> load_examples(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::vector<PoemExample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(example_from_json(j, vocab));
  }
  return out;
}

}  // namespace wm
