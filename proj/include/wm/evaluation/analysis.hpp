#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wm/evaluation/metrics.hpp"
#include "wm/generation/generator.hpp"
#include "wm/training/trainer.hpp"

namespace wm {

struct AttentionTable {
  std::vector<std::string> columns;  // "segment:slot:content"
  std::vector<std::string> characters;
  std::vector<std::vector<double>> alpha;
};

// Attention of one generated line (0-based) as a comma-delimited matrix: one
// row per character, one column per memory slot. Throws DataError when the
// diagnostics are missing or the line does not exist.
AttentionTable attention_table(const std::vector<LineDiagnostics>& diagnostics, int line);
void dump_attention(const std::vector<LineDiagnostics>& diagnostics, int line, const std::filesystem::path& path);
AttentionTable read_attention_csv(const std::filesystem::path& path);

struct EvalOptions {
  int beam_size = 20;
  bool hard_constraint = true;
  bool repetition_guard = true;
  bool generate = true;  // false skips BLEU and expression ratio
  std::uint64_t seed = 1;
  int workers = 1;
};

struct PoemRecord {
  std::vector<std::string> keywords;
  std::vector<std::string> reference;
  std::vector<std::string> generated;
  double nll = 0.0;
  double category_rate = 1.0;
  bool structure_ok = true;
};

struct EvalReport {
  double bleu = 0.0;
  double perplexity = 0.0;
  double expression_ratio = 0.0;
  long characters = 0;
  double compliance_rate = 1.0;  // matched / constrained positions over all generated poems
  std::vector<double> per_line_perplexity;
  std::vector<PoemRecord> records;
};

void to_json(nlohmann::json& j, const PoemRecord& r);
void to_json(nlohmann::json& j, const EvalReport& r);

// Perplexity on `test`, plus (when options.generate) one poem per example
// from its keywords and pattern, scored by BLEU against the example and by
// topic-expression ratio.
EvalReport evaluate(const PoetModel<float>& model, const Vocabulary& vocab, const PhonologyLexicon& lexicon,
                    const std::vector<PoemExample>& test, const RelevanceMap& relevance, const EvalOptions& options);

// Fresh model seeded from train.seed, trained on `train`. Identical inputs give
// bit-identical parameters. `on_epoch` sees the trainer after every epoch.
std::unique_ptr<PoetModel<float>> train_model(
    const ModelConfig& model_config, const TrainConfig& train_config, const std::vector<PoemExample>& train,
    const std::vector<PoemExample>* valid, const Matrix<float>* embeddings, int workers,
    TrainerState* final_state = nullptr,
    const std::function<void(const Trainer&, const EpochReport&)>& on_epoch = {});

struct SweepRecipe {
  ModelConfig model;
  TrainConfig train;
  std::vector<PoemExample> train_set;
  std::vector<PoemExample> test_set;
  std::optional<Matrix<float>> embeddings;
  EvalOptions eval;
};

struct SweepRow {
  int k2 = 0;
  double bleu = 0.0;
  double perplexity = 0.0;
  std::vector<double> per_line_perplexity;
  double final_loss = 0.0;
  int epochs = 0;
};

void to_json(nlohmann::json& j, const SweepRow& r);

// One model per history size, everything else fixed.
std::vector<SweepRow> slot_sweep(const SweepRecipe& recipe, const std::vector<int>& k2_values,
                                 const Vocabulary& vocab, const PhonologyLexicon& lexicon,
                                 const std::function<void(const SweepRow&)>& on_row = {});

}  // namespace wm
