#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "wm/corpus/embeddings.hpp"
#include "wm/corpus/genre_pattern.hpp"
#include "wm/corpus/poem.hpp"
#include "wm/corpus/textrank.hpp"
#include "wm/corpus/utf8.hpp"
#include "wm/corpus/vocabulary.hpp"
#include "wm/error.hpp"

using namespace wm;

namespace {

PhonologyLexicon small_lexicon() {
  return PhonologyLexicon::parse(
      "# char category rhyme\n"
      "春 0\n花 1\n秋 2\n月 3\n山 4 9\n水 5 9\n风 6\n雨 7\n江 8 9\n云 10\n天 11\n");
}

// Brute-force PageRank by power iteration on an explicit adjacency matrix.
std::vector<double> brute_force_pagerank(const std::vector<std::vector<double>>& adj, double d, int iters) {
  const std::size_t n = adj.size();
  std::vector<double> s(n, 1.0 / n);
  for (int it = 0; it < iters; ++it) {
    std::vector<double> next(n, (1.0 - d) / n);
    for (std::size_t u = 0; u < n; ++u) {
      const double out = std::accumulate(adj[u].begin(), adj[u].end(), 0.0);
      for (std::size_t v = 0; v < n; ++v) {
        if (adj[u][v] > 0) next[v] += d * adj[u][v] / out * s[u];
      }
    }
    s = next;
  }
  return s;
}

}  // namespace

TEST_SUITE("corpus") {

TEST_CASE("utf8 splitting and code points") {
  auto chars = split_chars("春a花");
  REQUIRE(chars.size() == 3);
  CHECK(chars[0] == "春");
  CHECK(chars[1] == "a");
  CHECK(code_point("春") == 0x6625);
  CHECK(code_point("a") == 'a');
  CHECK_THROWS_AS(split_chars(std::string("\xE6\x98", 2)), DataError);
}

TEST_CASE("build_vocabulary orders by frequency and applies min_count") {
  Vocabulary v = build_vocabulary({"aa", "b"}, 1);
  CHECK(v.size() == Vocabulary::kReserved + 2);
  CHECK(v.id_of("a") < v.id_of("b"));
  CHECK(v.id_of("a") == Vocabulary::kReserved);

  Vocabulary v2 = build_vocabulary({"aa", "b"}, 2);
  CHECK(v2.id_of("b") == Vocabulary::kUnk);

  // Ties by code point.
  Vocabulary v3 = build_vocabulary({"cba"}, 1);
  CHECK(v3.char_of(3) == "a");
  CHECK(v3.char_of(5) == "c");

  CHECK_THROWS_AS(build_vocabulary({}, 1), DataError);
  CHECK_THROWS_AS(build_vocabulary({""}, 1), DataError);
}

TEST_CASE("vocabulary encode/decode is the identity on in-vocabulary text") {
  Vocabulary v = build_vocabulary({"春眠不觉晓", "处处闻啼鸟"}, 1);
  for (const auto& line : {"春眠不觉晓", "处处闻啼鸟", "鸟春", ""}) {
    CHECK(v.decode(v.encode(line)) == line);
  }
  CHECK(v.encode("").empty());
  auto ids = v.encode("春X");
  CHECK(ids[1] == Vocabulary::kUnk);
  for (int id = 0; id < v.size(); ++id) CHECK(v.id_of(v.char_of(id)) == (id < 3 ? Vocabulary::kUnk : id));
}

TEST_CASE("lexicon parsing") {
  auto lex = small_lexicon();
  CHECK(lex.category_of("春") == 0);
  CHECK(lex.category_of("无") == PhonologyLexicon::kFree);
  CHECK(lex.rhyme_class_of("山") == 9);
  CHECK(lex.rhyme_class_of("春") == 0);
  CHECK_THROWS_AS(PhonologyLexicon::parse("春 36\n"), DataError);
  CHECK_THROWS_AS(PhonologyLexicon::parse("春\n"), DataError);
}

TEST_CASE("textrank: symmetric pair scores equal") {
  auto r = textrank({{"a", "b"}, {"b", "a"}, {"a", "b"}});
  REQUIRE(r.ranked.size() == 2);
  CHECK(std::abs(r.ranked[0].score - r.ranked[1].score) < 1e-6);
  CHECK(r.ranked[0].word == "a");  // tie -> first occurrence
}

TEST_CASE("textrank: single word") {
  auto r = textrank({{"solo"}});
  REQUIRE(r.ranked.size() == 1);
  CHECK(r.ranked[0].word == "solo");
}

TEST_CASE("textrank: star graph selects the hub, matching brute-force PageRank") {
  std::vector<std::vector<std::string>> sentences = {{"hub", "l1"}, {"l2", "hub"}, {"hub", "l3"}, {"l4", "hub"}};
  auto r = textrank(sentences, TextRankOptions{2, 0.85, 1000, 1e-12});
  CHECK(r.ranked[0].word == "hub");
  // Node order: hub, l1, l2, l3, l4.
  std::vector<std::vector<double>> adj(5, std::vector<double>(5, 0.0));
  for (int leaf = 1; leaf <= 4; ++leaf) adj[0][leaf] = adj[leaf][0] = 1.0;
  auto oracle = brute_force_pagerank(adj, 0.85, 1000);
  CHECK(r.ranked[0].score == doctest::Approx(oracle[0]).epsilon(1e-9));
  for (std::size_t i = 1; i < r.ranked.size(); ++i) {
    CHECK(r.ranked[i].score == doctest::Approx(oracle[1]).epsilon(1e-9));
    CHECK(r.ranked[0].score > r.ranked[i].score);
  }
}

TEST_CASE("textrank: total score is conserved on a connected graph") {
  std::vector<std::vector<std::string>> sentences = {{"a", "b", "c", "d"}, {"c", "e", "a"}, {"d", "e"}};
  auto r = textrank(sentences);
  REQUIRE_FALSE(r.score_totals.empty());
  for (double total : r.score_totals) CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("extract_keywords_textrank prefers bigrams then unigrams") {
  // Bigram graph: 春风-风明 (line 1), 月春-春风 (line 2); 春风 is the hub.
  // Every unigram is already inside a chosen bigram, so only three come back.
  auto kws = extract_keywords_textrank({"春风明", "月春风"}, 4);
  REQUIRE(kws.size() == 3);
  CHECK(kws[0] == "春风");
  for (const auto& kw : kws) CHECK(split_chars(kw).size() <= 2);

  auto fill = extract_keywords_textrank({"春风", "明月"}, 4);
  CHECK(fill == std::vector<std::string>{"春风", "明月"});

  auto single = extract_keywords_textrank({"山"}, 4);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == "山");

  // Stopword characters never appear inside a keyword.
  auto with_stop = extract_keywords_textrank({"山之水", "山之水"}, 4);
  for (const auto& kw : with_stop) CHECK(kw.find("之") == std::string::npos);
}

TEST_CASE("build_training_pairs makes nested keyword prefixes") {
  Vocabulary v = build_vocabulary({"春花秋月", "山水风雨"}, 1);
  auto lex = small_lexicon();
  auto pattern = derive_genre_pattern({"春花秋月", "山水风雨"}, lex, nullptr, Genre::Quatrain);
  auto poem = make_example({"春花", "秋月", "山水", "风雨"}, {"春花秋月", "山水风雨"}, pattern, Genre::Quatrain, v);
  auto pairs = build_training_pairs(poem);
  REQUIRE(pairs.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(pairs[i].keywords.size() == i + 1);
    for (std::size_t j = 0; j <= i; ++j) CHECK(pairs[i].keywords[j] == poem.keywords[j]);
    CHECK(pairs[i].lines == poem.lines);
  }
  auto two = poem;
  two.keywords.resize(2);
  two.keyword_tokens.resize(2);
  CHECK(build_training_pairs(two).size() == 2);
}

TEST_CASE("derive_genre_pattern copies structure and falls back to FREE") {
  auto lex = small_lexicon();
  int unknown = 0;
  auto p = derive_genre_pattern({"春花秋月山", "水风雨江云", "天春花秋月", "山水风雨江"}, lex, nullptr,
                                Genre::Quatrain, &unknown);
  CHECK(p.line_count() == 4);
  for (int i = 0; i < 4; ++i) CHECK(p.line_length(i) == 5);
  CHECK(unknown == 0);
  CHECK(p.lines[0][0] == 0);
  // Lines 1 and 4 end in rhyme class 9 (山, 江); the others differ.
  REQUIRE(p.rhyme_positions.size() == 2);
  CHECK(p.rhyme_positions[0] == std::make_pair(0, 4));
  CHECK(p.rhyme_positions[1] == std::make_pair(3, 4));

  auto q = derive_genre_pattern({"春无花", "秋月有"}, lex, nullptr, Genre::Quatrain, &unknown);
  CHECK(unknown == 2);
  CHECK(q.lines[0][1] == PhonologyLexicon::kFree);
  CHECK_NOTHROW(q.validate());
}

TEST_CASE("derive_genre_pattern attaches a matching library tune") {
  auto lex = small_lexicon();
  PatternLibrary lib;
  GenrePattern tune;
  tune.name = "two_by_two";
  tune.lines = {{0, PhonologyLexicon::kFree}, {PhonologyLexicon::kFree, 3}};
  lib.patterns.push_back(tune);
  auto p = derive_genre_pattern({"春花", "秋月"}, lex, &lib, Genre::Quatrain);
  CHECK(p.name == "two_by_two");
  auto miss = derive_genre_pattern({"花春", "秋月"}, lex, &lib, Genre::Quatrain);
  CHECK(miss.name.empty());
}

TEST_CASE("property: a poem always validates against its derived pattern") {
  auto lex = small_lexicon();
  const std::vector<std::string> pool = {"春", "花", "秋", "月", "山", "水", "风", "雨", "江", "云", "天", "无"};
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int n_lines = 2 + static_cast<int>(rng.below(4));
    std::vector<std::string> lines;
    std::vector<std::vector<std::string>> chars;
    for (int i = 0; i < n_lines; ++i) {
      const int len = 1 + static_cast<int>(rng.below(8));
      std::vector<std::string> cs;
      for (int j = 0; j < len; ++j) cs.push_back(pool[rng.below(pool.size())]);
      chars.push_back(cs);
      lines.push_back(join(cs));
    }
    auto p = derive_genre_pattern(lines, lex, nullptr, Genre::Lyric);
    auto c = check_compliance(p, chars, lex);
    CHECK(c.fully_compliant());
  }
}

TEST_CASE("pattern json and lengths spec") {
  auto p = pattern_from_lengths("lengths:7,7,7,3,7", Genre::Iambic);
  CHECK(p.line_count() == 5);
  CHECK(p.line_length(3) == 3);
  nlohmann::json j = p;
  auto back = j.get<GenrePattern>();
  CHECK(back.lines == p.lines);
  CHECK(back.genre == Genre::Iambic);
  CHECK_THROWS_AS(pattern_from_lengths("lengths:7", Genre::Quatrain), DataError);
  CHECK_THROWS_AS(pattern_from_lengths("7,7", Genre::Quatrain), ConfigError);
}

TEST_CASE("corpus parsing") {
  auto poems = parse_corpus("# comment\n春花|秋月\t春花,秋月\n\n山水|风雨\n");
  REQUIRE(poems.size() == 2);
  CHECK(poems[0].lines.size() == 2);
  CHECK(poems[0].keywords == std::vector<std::string>{"春花", "秋月"});
  CHECK(poems[1].keywords.empty());
  CHECK_THROWS_AS(parse_corpus("春花||秋月\n"), DataError);
}

TEST_CASE("example validation") {
  Vocabulary v = build_vocabulary({"春花秋月"}, 1);
  auto lex = small_lexicon();
  auto p = derive_genre_pattern({"春花", "秋月"}, lex, nullptr, Genre::Quatrain);
  CHECK_THROWS_AS(make_example({}, {"春花", "秋月"}, p, Genre::Quatrain, v), DataError);
  CHECK_THROWS_AS(make_example({"a", "b", "c", "d", "e"}, {"春花", "秋月"}, p, Genre::Quatrain, v), DataError);
  CHECK_THROWS_AS(make_example({"春"}, {"春花", "秋"}, p, Genre::Quatrain, v), DataError);
  auto ex = make_example({"春"}, {"春花", "秋月"}, p, Genre::Quatrain, v);
  auto back = example_from_json(example_to_json(ex), v);
  CHECK(back.lines == ex.lines);
  CHECK(back.keywords == ex.keywords);
}

TEST_CASE("skip-gram embeddings: exclusive co-occurrence yields higher similarity") {
  // Six groups of two tokens; a sequence only ever mixes the tokens of one group,
  // so 3 and 4 co-occur exclusively with each other.
  Rng data_rng(3);
  std::vector<std::vector<int>> seqs;
  for (int s = 0; s < 600; ++s) {
    const int group = static_cast<int>(data_rng.below(6));
    std::vector<int> seq;
    for (int i = 0; i < 6; ++i) seq.push_back(3 + 2 * group + static_cast<int>(data_rng.below(2)));
    seqs.push_back(seq);
  }
  Rng rng(5);
  SkipGramOptions opt;
  opt.dim = 16;
  opt.epochs = 5;
  auto table = pretrain_embeddings(seqs, 15, opt, rng);
  CHECK(table.rows() == 15);
  CHECK(table.cols() == 16);
  auto cosine = [&](int a, int b) {
    return table.row(a).dot(table.row(b)) / (table.row(a).norm() * table.row(b).norm());
  };
  double avg = 0.0;
  int pairs = 0;
  for (int a = 3; a < 15; ++a) {
    for (int b = a + 1; b < 15; ++b) {
      avg += cosine(a, b);
      ++pairs;
    }
  }
  avg /= pairs;
  INFO("cos(3,4) = " << cosine(3, 4) << ", average " << avg);
  CHECK(cosine(3, 4) > avg);
}

TEST_CASE("embedding table shape and fallback") {
  Rng rng(1);
  SkipGramOptions opt;
  auto t = pretrain_embeddings({{3, 4, 5}}, 6, opt, rng);
  CHECK(t.cols() == 256);
  auto r = random_embeddings(6, 256, rng);
  CHECK(r.cwiseAbs().maxCoeff() <= 0.08f);
  auto path = std::filesystem::temp_directory_path() / "wm_emb_test.bin";
  save_embeddings(path, r);
  CHECK(load_embeddings(path) == r);
  std::filesystem::remove(path);
}

TEST_CASE("relevance map ranks co-occurring words") {
  std::vector<std::vector<std::string>> poems = {
      {"春花秋月", "山水"}, {"春花山水", "风雨"}, {"云天", "江月"}, {"云天", "风雨"}};
  auto map = build_relevance_map(poems, {"春花", "云天"}, 10, default_stopwords());
  REQUIRE(map.count("春花"));
  const auto& rel = map["春花"];
  REQUIRE_FALSE(rel.empty());
  // 山水 appears in both 春花 poems, only there -> maximal PMI.
  CHECK(std::find(rel.begin(), rel.end(), "山水") != rel.end());
  CHECK(std::find(rel.begin(), rel.end(), "春") == rel.end());
  CHECK(rel.size() <= 10);
}

}  // TEST_SUITE
