#include "wm/evaluation/metrics.hpp"

#include <cmath>
#include <map>

#include "wm/corpus/utf8.hpp"
#include "wm/error.hpp"
#include "wm/util/parallel.hpp"

namespace wm {

namespace {

constexpr int kMaxOrder = 4;

std::vector<std::string> poem_chars(const PoemLines& poem) {
  std::vector<std::string> out;
  for (const auto& line : poem) {
    auto chars = split_chars(line);
    out.insert(out.end(), chars.begin(), chars.end());
  }
  return out;
}

std::map<std::vector<std::string>, long> ngram_counts(const std::vector<std::string>& chars, int n) {
  std::map<std::vector<std::string>, long> counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= chars.size(); ++i) {
    ++counts[std::vector<std::string>(chars.begin() + static_cast<std::ptrdiff_t>(i),
                                      chars.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return counts;
}

}  // namespace

BleuStats bleu_statistics(const std::vector<PoemLines>& hypotheses, const std::vector<PoemLines>& references) {
  if (hypotheses.empty()) throw DataError("BLEU needs at least one hypothesis");
  if (hypotheses.size() != references.size()) {
    throw DataError("BLEU: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                    std::to_string(references.size()) + " references");
  }
  BleuStats stats;
  stats.matches.assign(kMaxOrder, 0);
  stats.totals.assign(kMaxOrder, 0);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = poem_chars(hypotheses[i]);
    const auto ref = poem_chars(references[i]);
    stats.hypothesis_length += static_cast<long>(hyp.size());
    stats.reference_length += static_cast<long>(ref.size());
    for (int n = 1; n <= kMaxOrder; ++n) {
      const auto hyp_counts = ngram_counts(hyp, n);
      const auto ref_counts = ngram_counts(ref, n);
      for (const auto& [gram, count] : hyp_counts) {
        stats.totals[static_cast<std::size_t>(n - 1)] += count;
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) stats.matches[static_cast<std::size_t>(n - 1)] += std::min(count, it->second);
      }
    }
  }
  return stats;
}

double bleu_corpus(const std::vector<PoemLines>& hypotheses, const std::vector<PoemLines>& references) {
  const BleuStats s = bleu_statistics(hypotheses, references);
  double log_precision = 0.0;
  for (int n = 0; n < kMaxOrder; ++n) {
    if (s.matches[static_cast<std::size_t>(n)] == 0) return 0.0;
    log_precision += std::log(static_cast<double>(s.matches[static_cast<std::size_t>(n)]) /
                              static_cast<double>(s.totals[static_cast<std::size_t>(n)]));
  }
  const double c = static_cast<double>(s.hypothesis_length);
  const double r = static_cast<double>(s.reference_length);
  const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * brevity * std::exp(log_precision / kMaxOrder);
}

std::uint64_t example_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 finalizer over the pair.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

PerplexityResult perplexity(const PoetModel<float>& model, const std::vector<PoemExample>& dataset,
                            std::uint64_t seed, int workers) {
  if (dataset.empty()) throw DataError("perplexity over an empty dataset");
  std::vector<PoemLoss<float>> losses(dataset.size());
  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    NoGradGuard guard;
    Rng rng(example_seed(seed, i));
    ForwardOptions opt;
    auto loss = model.poem_nll(dataset[i], opt, rng);
    loss.total = Tensor<float>();
    losses[i] = std::move(loss);
  });
  PerplexityResult out;
  std::vector<double> line_nll;
  std::vector<long> line_chars;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    double poem_total = 0.0;
    for (std::size_t l = 0; l < losses[i].line_nll.size(); ++l) {
      if (line_nll.size() <= l) {
        line_nll.push_back(0.0);
        line_chars.push_back(0);
      }
      line_nll[l] += losses[i].line_nll[l];
      line_chars[l] += static_cast<long>(dataset[i].lines[l].size());
      poem_total += losses[i].line_nll[l];
    }
    out.per_poem_nll.push_back(poem_total);
    out.total_nll += poem_total;
    out.characters += losses[i].characters;
  }
  out.perplexity = std::exp(out.total_nll / static_cast<double>(out.characters));
  for (std::size_t l = 0; l < line_nll.size(); ++l) {
    out.per_line.push_back(std::exp(line_nll[l] / static_cast<double>(line_chars[l])));
  }
  return out;
}

double topic_expression_ratio(const std::vector<PoemLines>& poems,
                              const std::vector<std::vector<std::string>>& keyword_sets,
                              const RelevanceMap& relevance) {
  if (poems.size() != keyword_sets.size()) throw DataError("expression ratio: poems and keyword sets differ in count");
  long topics = 0;
  long expressed = 0;
  for (std::size_t i = 0; i < poems.size(); ++i) {
    std::string text;
    for (const auto& line : poems[i]) text += line + "\n";
    for (const auto& kw : keyword_sets[i]) {
      ++topics;
      bool found = text.find(kw) != std::string::npos;
      if (!found) {
        auto it = relevance.find(kw);
        if (it != relevance.end()) {
          for (const auto& w : it->second) {
            if (!w.empty() && text.find(w) != std::string::npos) {
              found = true;
              break;
            }
          }
        }
      }
      expressed += found ? 1 : 0;
    }
  }
  return topics == 0 ? 0.0 : static_cast<double>(expressed) / static_cast<double>(topics);
}

}  // namespace wm
