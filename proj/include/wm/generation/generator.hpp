#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "wm/corpus/genre_pattern.hpp"
#include "wm/corpus/lexicon.hpp"
#include "wm/corpus/vocabulary.hpp"
#include "wm/model/model.hpp"

namespace wm {

struct GenerationRequest {
  std::vector<std::string> keywords;  // 1..4
  GenrePattern pattern;
  std::uint64_t seed = 1;
  int beam_size = 20;
  bool hard_constraint = true;
  bool repetition_guard = true;
  int n_best = 1;  // alternatives kept per line in the diagnostics
};

struct BeamHypothesis {
  std::vector<int> tokens;
  std::vector<double> step_log_probs;
  double log_prob = 0.0;
  DecoderContext<float> ctx;  // state after the last step, including its read log
};

struct BeamOptions {
  int beam_size = 20;
  bool hard_constraint = true;
  bool repetition_guard = true;
};

struct LineDiagnostics {
  std::vector<std::vector<double>> alpha;  // characters x K
  std::vector<int> history_targets;        // history slot (0-based within the segment) per character of L_{i-2}; -1 = null
  std::vector<std::string> slot_labels;    // topic / history / local
  std::vector<std::string> slot_contents;  // character or keyword held by each slot
  std::vector<std::string> characters;
  double log_prob = 0.0;
  std::vector<std::pair<std::string, double>> alternatives;  // n-best lines
};

struct GenerationResult {
  std::vector<std::string> lines;
  std::vector<LineDiagnostics> diagnostics;
  Compliance compliance;
};

void to_json(nlohmann::json& j, const LineDiagnostics& d);
void from_json(const nlohmann::json& j, LineDiagnostics& d);
nlohmann::json diagnostics_to_json(const GenerationRequest& request, const GenerationResult& result);

class Generator {
 public:
  Generator(const PoetModel<float>& model, const Vocabulary& vocab, const PhonologyLexicon& lexicon);

  // Decodes one line against frozen memory. Every hypothesis carries its own
  // decoder context; all share one slot-bias draw per step. Returns the
  // surviving hypotheses sorted by log probability.
  std::vector<BeamHypothesis> beam_search_line(const DecoderContext<float>& start, const WorkingMemoryState<float>& memory,
                                               const GenrePattern& pattern, int line, const BeamOptions& options,
                                               Rng& rng) const;

  GenerationResult generate(const GenerationRequest& request) const;

  const Vocabulary& vocabulary() const { return vocab_; }
  const PhonologyLexicon& lexicon() const { return lexicon_; }

 private:
  const PoetModel<float>& model_;
  const Vocabulary& vocab_;
  const PhonologyLexicon& lexicon_;
  std::vector<int> categories_;  // per vocabulary id
};

}  // namespace wm
