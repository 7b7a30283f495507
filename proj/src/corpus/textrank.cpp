#include "wm/corpus/textrank.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "wm/corpus/utf8.hpp"
#include "wm/error.hpp"

namespace wm {

TextRankResult textrank(const std::vector<std::vector<std::string>>& sentences,
                        const TextRankOptions& options) {
  if (options.window < 2) throw ConfigError("TextRank window must be >= 2");
  std::map<std::string, int> index;
  std::vector<ScoredWord> words;
  int position = 0;
  for (const auto& sentence : sentences) {
    for (const auto& w : sentence) {
      if (!index.count(w)) {
        index[w] = static_cast<int>(words.size());
        words.push_back(ScoredWord{w, 0.0, position});
      }
      ++position;
    }
  }
  TextRankResult result;
  const std::size_t n = words.size();
  if (n == 0) return result;

  std::vector<std::map<int, double>> edges(n);
  for (const auto& sentence : sentences) {
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const int a = index[sentence[i]];
      const std::size_t end = std::min(sentence.size(), i + static_cast<std::size_t>(options.window));
      for (std::size_t j = i + 1; j < end; ++j) {
        const int b = index[sentence[j]];
        if (a == b) continue;
        edges[a][b] += 1.0;
        edges[b][a] += 1.0;
      }
    }
  }
  std::vector<double> out_weight(n, 0.0);
  for (std::size_t v = 0; v < n; ++v) {
    for (const auto& [u, w] : edges[v]) out_weight[v] += w;
  }

  const double base = (1.0 - options.damping) / static_cast<double>(n);
  std::vector<double> score(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  for (int iter = 0; iter < options.max_iter; ++iter) {
    double max_change = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      double acc = 0.0;
      for (const auto& [u, w] : edges[v]) acc += w / out_weight[static_cast<std::size_t>(u)] * score[static_cast<std::size_t>(u)];
      next[v] = base + options.damping * acc;
      max_change = std::max(max_change, std::abs(next[v] - score[v]));
    }
    score.swap(next);
    result.iterations = iter + 1;
    double total = 0.0;
    for (double s : score) total += s;
    result.score_totals.push_back(total);
    if (max_change < options.tol) break;
  }
  for (std::size_t v = 0; v < n; ++v) words[v].score = score[v];
  std::stable_sort(words.begin(), words.end(), [](const ScoredWord& a, const ScoredWord& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.first_occurrence < b.first_occurrence;
  });
  result.ranked = std::move(words);
  return result;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "之", "乎", "者", "也", "而", "以", "其", "兮", "于", "与", "且", "则", "焉", "矣", "哉",
      "的", "了", "是", "在", "不", "我", "你", "他", "一", "有", "这", "那", "亦", "又", "所"};
  return words;
}

std::vector<std::string> extract_keywords_textrank(const std::vector<std::string>& poem_lines, int k,
                                                   const TextRankOptions& options,
                                                   const std::set<std::string>& stopwords) {
  if (k < 1) throw ConfigError("keyword count k must be >= 1");
  std::vector<std::vector<std::string>> bigram_sentences;
  std::vector<std::vector<std::string>> unigram_sentences;
  for (const auto& line : poem_lines) {
    const auto chars = split_chars(line);
    std::vector<std::string> bigrams;
    std::vector<std::string> unigrams;
    for (std::size_t i = 0; i < chars.size(); ++i) {
      if (stopwords.count(chars[i])) continue;
      unigrams.push_back(chars[i]);
      if (i + 1 < chars.size() && !stopwords.count(chars[i + 1])) bigrams.push_back(chars[i] + chars[i + 1]);
    }
    bigram_sentences.push_back(std::move(bigrams));
    unigram_sentences.push_back(std::move(unigrams));
  }
  std::vector<std::string> keywords;
  for (const auto& w : textrank(bigram_sentences, options).ranked) {
    if (static_cast<int>(keywords.size()) == k) return keywords;
    keywords.push_back(w.word);
  }
  for (const auto& w : textrank(unigram_sentences, options).ranked) {
    if (static_cast<int>(keywords.size()) == k) break;
    const bool covered = std::any_of(keywords.begin(), keywords.end(), [&](const std::string& kw) {
      return kw.find(w.word) != std::string::npos;
    });
    if (!covered) keywords.push_back(w.word);
  }
  return keywords;
}

}  // namespace wm
