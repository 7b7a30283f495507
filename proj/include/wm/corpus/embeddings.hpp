#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wm/numerics/rng.hpp"

namespace wm {

struct SkipGramOptions {
  int dim = 256;
  int epochs = 5;
  int window = 2;
  int negatives = 5;
  double learning_rate = 0.025;
};

using EmbeddingTable = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Skip-gram with negative sampling over token sequences (one per poem line).
// Returns a vocab_size x dim table of input vectors.
EmbeddingTable pretrain_embeddings(const std::vector<std::vector<int>>& sequences, int vocab_size,
                                   const SkipGramOptions& options, Rng& rng);

// Random fallback when pretraining is skipped: uniform(-0.08, 0.08).
EmbeddingTable random_embeddings(int vocab_size, int dim, Rng& rng);

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

// keyword -> relevant words, highest PMI first.
using RelevanceMap = std::map<std::string, std::vector<std::string>>;

// For each keyword, the top `top_n` candidate words (character unigrams and
// bigrams of the poems) by poem-level pointwise mutual information.
RelevanceMap build_relevance_map(const std::vector<std::vector<std::string>>& poems,
                                 const std::vector<std::string>& keywords, int top_n,
                                 const std::set<std::string>& stopwords);

void save_relevance_map(const std::filesystem::path& path, const RelevanceMap& map);
RelevanceMap load_relevance_map(const std::filesystem::path& path);

}  // namespace wm
