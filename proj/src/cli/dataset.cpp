#include "wm/cli/dataset.hpp"

#include <algorithm>
#include <fstream>

#include "wm/corpus/textrank.hpp"
#include "wm/error.hpp"

namespace wm {

namespace fs = std::filesystem;

namespace {

fs::path vocab_file(const fs::path& d) { return d / "vocab.json"; }
fs::path lexicon_file(const fs::path& d) { return d / "lexicon.txt"; }
fs::path patterns_file(const fs::path& d) { return d / "patterns.json"; }
fs::path train_file(const fs::path& d) { return d / "train.jsonl"; }
fs::path test_file(const fs::path& d) { return d / "test.jsonl"; }
fs::path poems_file(const fs::path& d) { return d / "poems.jsonl"; }
fs::path relevance_file(const fs::path& d) { return d / "relevance.json"; }
fs::path embeddings_file(const fs::path& d) { return d / "embeddings.bin"; }
fs::path summary_file(const fs::path& d) { return d / "prepare.json"; }

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(path.string() + " is not valid JSON");
  return j;
}

}  // namespace

PreparedData prepare_data(const std::vector<RawPoem>& corpus, const PhonologyLexicon& lexicon,
                          const PatternLibrary& library, const RunConfig& config, bool pretrain) {
  if (corpus.empty()) throw DataError("corpus has no poems");
  if (config.holdout >= static_cast<int>(corpus.size())) {
    throw ConfigError("holdout " + std::to_string(config.holdout) + " leaves no training poems");
  }
  const Genre genre = parse_genre(config.genre);
  PreparedData out;
  out.lexicon = lexicon;
  out.patterns = library;

  std::vector<std::string> all_lines;
  for (const auto& p : corpus) all_lines.insert(all_lines.end(), p.lines.begin(), p.lines.end());
  out.vocab = build_vocabulary(all_lines, config.min_count);

  const std::size_t n_train = corpus.size() - static_cast<std::size_t>(config.holdout);
  std::vector<std::vector<std::string>> train_poems;
  std::vector<std::string> keywords_seen;
  int unknown = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& poem = corpus[i];
    auto keywords = poem.keywords.empty() ? extract_keywords_textrank(poem.lines, kMaxKeywords) : poem.keywords;
    if (keywords.size() > static_cast<std::size_t>(kMaxKeywords)) keywords.resize(kMaxKeywords);
    if (keywords.empty()) throw DataError("poem " + std::to_string(i + 1) + " yields no keywords");
    GenrePattern pattern = derive_genre_pattern(poem.lines, lexicon, &library, genre, &unknown);
    if (pattern.name.empty()) {
      pattern.name = "poem" + std::to_string(i + 1);
      out.patterns.patterns.push_back(pattern);
    }
    PoemExample ex = make_example(keywords, poem.lines, pattern, genre, out.vocab);
    out.poems.push_back(ex);
    if (i < n_train) {
      auto pairs = build_training_pairs(ex);
      out.train.insert(out.train.end(), pairs.begin(), pairs.end());
      train_poems.push_back(poem.lines);
      keywords_seen.insert(keywords_seen.end(), keywords.begin(), keywords.end());
    } else {
      out.test.push_back(std::move(ex));
    }
  }
  std::sort(keywords_seen.begin(), keywords_seen.end());
  keywords_seen.erase(std::unique(keywords_seen.begin(), keywords_seen.end()), keywords_seen.end());
  out.relevance = build_relevance_map(train_poems, keywords_seen, config.relevance_top_n, default_stopwords());

  if (pretrain) {
    std::vector<std::vector<int>> sequences;
    for (const auto& lines : train_poems) {
      for (const auto& line : lines) sequences.push_back(out.vocab.encode(line));
    }
    SkipGramOptions opt;
    opt.dim = config.model.word_dim;
    opt.epochs = config.pretrain_epochs;
    opt.window = config.pretrain_window;
    opt.negatives = config.pretrain_negatives;
    Rng rng(config.train.seed);
    out.embeddings = pretrain_embeddings(sequences, out.vocab.size(), opt, rng);
  }

  out.summary = {{"poems", corpus.size()},
                 {"train_poems", n_train},
                 {"train_pairs", out.train.size()},
                 {"test_poems", out.test.size()},
                 {"vocab_size", out.vocab.size()},
                 {"unknown_lexicon_chars", unknown},
                 {"genre", config.genre},
                 {"pretrained_embeddings", pretrain}};
  return out;
}

void save_prepared(const PreparedData& data, const fs::path& directory) {
  fs::create_directories(directory);
  write_json(vocab_file(directory), {{"characters", data.vocab.characters()}});
  {
    std::ofstream lex(lexicon_file(directory));
    if (!lex) throw IoError("cannot write " + lexicon_file(directory).string());
    lex << data.lexicon.serialize();
  }
  data.patterns.save(patterns_file(directory));
  save_examples(train_file(directory), data.train);
  save_examples(test_file(directory), data.test);
  save_examples(poems_file(directory), data.poems);
  save_relevance_map(relevance_file(directory), data.relevance);
  if (data.embeddings) {
    save_embeddings(embeddings_file(directory), *data.embeddings);
  } else if (fs::exists(embeddings_file(directory))) {
    fs::remove(embeddings_file(directory));
  }
  write_json(summary_file(directory), data.summary);
}

PreparedData load_prepared(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw IoError("data directory " + directory.string() + " does not exist");
  PreparedData data;
  try {
    data.vocab = Vocabulary(read_json(vocab_file(directory)).at("characters").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed vocabulary: ") + e.what());
  }
  data.lexicon = PhonologyLexicon::load(lexicon_file(directory));
  data.patterns = PatternLibrary::load(patterns_file(directory));
  data.train = load_examples(train_file(directory), data.vocab);
  data.test = load_examples(test_file(directory), data.vocab);
  data.poems = load_examples(poems_file(directory), data.vocab);
  if (fs::exists(relevance_file(directory))) data.relevance = load_relevance_map(relevance_file(directory));
  if (fs::exists(embeddings_file(directory))) data.embeddings = load_embeddings(embeddings_file(directory));
  if (fs::exists(summary_file(directory))) data.summary = read_json(summary_file(directory));
  return data;
}

}  // namespace wm
