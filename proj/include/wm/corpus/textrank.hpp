#pragma once

#include <set>
#include <string>
#include <vector>

namespace wm {

struct TextRankOptions {
  int window = 2;
  double damping = 0.85;
  int max_iter = 100;
  double tol = 1e-6;
};

struct ScoredWord {
  std::string word;
  double score = 0.0;
  int first_occurrence = 0;
};

struct TextRankResult {
  // All candidates, best first (ties by first occurrence).
  std::vector<ScoredWord> ranked;
  int iterations = 0;
  // Total score after each iteration.
  std::vector<double> score_totals;
};

// TextRank over an undirected co-occurrence graph: words within `window`
// positions of each other in a sentence are linked, edge weight = count.
// Scores start at 1/N and follow S(v) = (1-d)/N + d * sum_u w(u,v)/W(u) * S(u).
TextRankResult textrank(const std::vector<std::vector<std::string>>& sentences,
                        const TextRankOptions& options = {});

const std::set<std::string>& default_stopwords();

// Keywords of a poem: character bigrams ranked by TextRank, then unigrams to
// fill up to k. Stopword characters never appear in a candidate.
std::vector<std::string> extract_keywords_textrank(const std::vector<std::string>& poem_lines, int k,
                                                   const TextRankOptions& options = {},
                                                   const std::set<std::string>& stopwords = default_stopwords());

}  // namespace wm
