#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "wm/cli/run_config.hpp"
#include "wm/corpus/embeddings.hpp"
#include "wm/corpus/genre_pattern.hpp"
#include "wm/corpus/lexicon.hpp"
#include "wm/corpus/poem.hpp"

namespace wm {

// Output of the prepare step. Training poems come first in corpus order; the
// last `holdout` poems form the test split (one example each, all keywords).
struct PreparedData {
  Vocabulary vocab;
  PhonologyLexicon lexicon;
  PatternLibrary patterns;  // input tunes plus one derived pattern per poem that fits none
  std::vector<PoemExample> train;  // keyword-prefix pairs
  std::vector<PoemExample> test;
  std::vector<PoemExample> poems;  // every poem, all keywords
  RelevanceMap relevance;
  std::optional<EmbeddingTable> embeddings;
  nlohmann::json summary;
};

PreparedData prepare_data(const std::vector<RawPoem>& corpus, const PhonologyLexicon& lexicon,
                          const PatternLibrary& library, const RunConfig& config, bool pretrain);

void save_prepared(const PreparedData& data, const std::filesystem::path& directory);
PreparedData load_prepared(const std::filesystem::path& directory);

}  // namespace wm
