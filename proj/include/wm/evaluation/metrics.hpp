#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wm/corpus/embeddings.hpp"
#include "wm/model/model.hpp"

namespace wm {

// A poem as a list of lines; BLEU treats each poem as one character
// sequence (lines concatenated).
using PoemLines = std::vector<std::string>;

struct BleuStats {
  std::vector<long> matches;  // clipped n-gram matches, n = 1..4
  std::vector<long> totals;   // hypothesis n-grams, n = 1..4
  long hypothesis_length = 0;
  long reference_length = 0;
};

BleuStats bleu_statistics(const std::vector<PoemLines>& hypotheses, const std::vector<PoemLines>& references);

// Corpus BLEU-4 in percent: pooled clipped precisions, geometric mean,
// brevity penalty exp(1 - r/c) when c < r, no smoothing. Empty or misaligned
// input throws DataError.
double bleu_corpus(const std::vector<PoemLines>& hypotheses, const std::vector<PoemLines>& references);

struct PerplexityResult {
  double perplexity = 0.0;
  double total_nll = 0.0;
  long characters = 0;
  // Per line position (line 1, 2, ...): perplexity over that line across poems.
  std::vector<double> per_line;
  std::vector<double> per_poem_nll;
};

// exp(total teacher-forced cross entropy / characters) with dropout off and
// hard history writes. Poem j draws its slot biases from a generator seeded
// by (seed, j), so the result does not depend on `workers`.
PerplexityResult perplexity(const PoetModel<float>& model, const std::vector<PoemExample>& dataset,
                            std::uint64_t seed, int workers = 1);

std::uint64_t example_seed(std::uint64_t seed, std::size_t index);

// A topic counts as expressed when the poem contains the keyword or any of
// its relevant words.
double topic_expression_ratio(const std::vector<PoemLines>& poems,
                              const std::vector<std::vector<std::string>>& keyword_sets,
                              const RelevanceMap& relevance);

}  // namespace wm
