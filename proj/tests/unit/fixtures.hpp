#pragma once

#include <string>
#include <vector>

#include "wm/corpus/lexicon.hpp"
#include "wm/corpus/utf8.hpp"
#include "wm/model/model.hpp"

namespace wm::testing {

inline PoemExample random_poem(Rng& rng, int vocab, const std::vector<int>& lengths, int keywords) {
  auto token = [&] { return Vocabulary::kReserved + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab - Vocabulary::kReserved))); };
  PoemExample ex;
  for (int k = 0; k < keywords; ++k) {
    ex.keywords.push_back("k" + std::to_string(k));
    ex.keyword_tokens.push_back({token(), token()});
  }
  ex.pattern.name = "test";
  for (int len : lengths) {
    std::vector<int> line, cats;
    for (int t = 0; t < len; ++t) {
      line.push_back(token());
      cats.push_back(static_cast<int>(rng.below(PhonologyLexicon::kTableRows)));
    }
    ex.lines.push_back(line);
    ex.line_text.push_back(std::string(static_cast<std::size_t>(len), 'x'));
    ex.pattern.lines.push_back(cats);
  }
  return ex;
}

inline ModelConfig small_config(int vocab) {
  ModelConfig c;
  c.word_dim = 16;
  c.phonology_dim = 8;
  c.length_dim = 4;
  c.hidden = 24;
  c.d_h = 48;
  c.trace_dim = 16;
  c.topic_content_dim = 6;
  c.address_dim = 16;
  c.k1 = 4;
  c.k2 = 4;
  c.k3 = 7;
  c.max_line_length = 7;
  c.vocab_size = vocab;
  return c;
}

// Characters U+4E00.. with categories cycling through 0..3.
struct ToyWorld {
  Vocabulary vocab;
  PhonologyLexicon lexicon;
};

inline std::string cjk(int offset) {
  const unsigned cp = 0x4E00u + static_cast<unsigned>(offset);
  std::string s;
  s += static_cast<char>(0xE0 | (cp >> 12));
  s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
  s += static_cast<char>(0x80 | (cp & 0x3F));
  return s;
}

inline ToyWorld toy_world(int chars) {
  std::vector<std::string> list;
  ToyWorld w;
  for (int i = 0; i < chars; ++i) {
    list.push_back(cjk(i));
    w.lexicon.set(cjk(i), i % 4);
  }
  w.vocab = Vocabulary(list);
  return w;
}

inline GenrePattern toy_pattern(const std::vector<int>& lengths) {
  GenrePattern p;
  p.name = "toy";
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    std::vector<int> cats;
    for (int t = 0; t < lengths[i]; ++t) cats.push_back(t % 2 == 0 ? PhonologyLexicon::kFree : (t + static_cast<int>(i)) % 4);
    p.lines.push_back(cats);
  }
  return p;
}

}  // namespace wm::testing
