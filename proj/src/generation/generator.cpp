#include "wm/generation/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wm/corpus/utf8.hpp"
#include "wm/error.hpp"
#include "wm/numerics/ops.hpp"

namespace wm {

namespace {

struct Candidate {
  double score;
  std::size_t parent;
  int token;
  double step;
};

bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.parent != b.parent) return a.parent < b.parent;
  return a.token < b.token;
}

}  // namespace

void to_json(nlohmann::json& j, const LineDiagnostics& d) {
  nlohmann::json alts = nlohmann::json::array();
  for (const auto& [text, lp] : d.alternatives) alts.push_back({{"line", text}, {"log_prob", lp}});
  j = nlohmann::json{{"alpha", d.alpha},
                     {"history_targets", d.history_targets},
                     {"slot_labels", d.slot_labels},
                     {"slot_contents", d.slot_contents},
                     {"characters", d.characters},
                     {"log_prob", d.log_prob},
                     {"alternatives", alts}};
}

void from_json(const nlohmann::json& j, LineDiagnostics& d) {
  try {
    d.alpha = j.at("alpha").get<std::vector<std::vector<double>>>();
    d.history_targets = j.at("history_targets").get<std::vector<int>>();
    d.slot_labels = j.at("slot_labels").get<std::vector<std::string>>();
    d.slot_contents = j.value("slot_contents", std::vector<std::string>{});
    d.characters = j.at("characters").get<std::vector<std::string>>();
    d.log_prob = j.value("log_prob", 0.0);
    d.alternatives.clear();
    for (const auto& a : j.value("alternatives", nlohmann::json::array())) {
      d.alternatives.emplace_back(a.at("line").get<std::string>(), a.at("log_prob").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed line diagnostics: ") + e.what());
  }
}

nlohmann::json diagnostics_to_json(const GenerationRequest& request, const GenerationResult& result) {
  return nlohmann::json{{"keywords", request.keywords},
                        {"pattern", request.pattern.name},
                        {"seed", request.seed},
                        {"beam_size", request.beam_size},
                        {"hard_constraint", request.hard_constraint},
                        {"lines", result.lines},
                        {"compliance",
                         {{"structure_ok", result.compliance.structure_ok},
                          {"constrained_positions", result.compliance.constrained_positions},
                          {"matched_positions", result.compliance.matched_positions},
                          {"category_rate", result.compliance.category_rate()}}},
                        {"line_diagnostics", result.diagnostics}};
}

Generator::Generator(const PoetModel<float>& model, const Vocabulary& vocab, const PhonologyLexicon& lexicon)
    : model_(model), vocab_(vocab), lexicon_(lexicon), categories_(lexicon.categories_for(vocab)) {
  if (vocab.size() != model.config().vocab_size) {
    throw ContractError("vocabulary has " + std::to_string(vocab.size()) + " entries but the model expects " +
                        std::to_string(model.config().vocab_size));
  }
}

std::vector<BeamHypothesis> Generator::beam_search_line(const DecoderContext<float>& start,
                                                        const WorkingMemoryState<float>& memory,
                                                        const GenrePattern& pattern, int line,
                                                        const BeamOptions& options, Rng& rng) const {
  if (options.beam_size < 1) throw ConfigError("beam_size must be at least 1");
  NoGradGuard guard;
  const auto& categories = pattern.lines.at(static_cast<std::size_t>(line));
  const int len = static_cast<int>(categories.size());
  const int vocab = vocab_.size();
  const ForwardOptions opt;
  const Tensor<float> projected = model_.project_memory(memory);

  std::vector<BeamHypothesis> beam(1);
  beam[0].ctx = start;
  for (int t = 0; t < len; ++t) {
    const int required = categories[static_cast<std::size_t>(t)];
    const Tensor<float> g = model_.genre_embedding(required, len - t - 1);
    const auto bias = draw_slot_bias(memory.size(), model_.config().slot_bias, rng);

    std::vector<Candidate> candidates;
    std::vector<DecoderContext<float>> next_ctx(beam.size());
    for (std::size_t h = 0; h < beam.size(); ++h) {
      next_ctx[h] = beam[h].ctx;
      const int y_prev = t == 0 ? Vocabulary::kBos : beam[h].tokens.back();
      auto step = model_.decode_step(next_ctx[h], y_prev, memory, projected, g, bias, opt, rng);
      const Matrix<float>& z = step.logits.value();
      const double m = z.maxCoeff();
      double denom = 0.0;
      for (int k = 0; k < vocab; ++k) denom += std::exp(static_cast<double>(z(0, k)) - m);
      const double log_z = m + std::log(denom);
      for (int k = Vocabulary::kReserved; k < vocab; ++k) {
        if (options.hard_constraint && required != PhonologyLexicon::kFree &&
            categories_[static_cast<std::size_t>(k)] != required) {
          continue;
        }
        if (options.repetition_guard) {
          bool blocked = false;
          for (int p = 0; p < t && !blocked; ++p) {
            blocked = beam[h].tokens[static_cast<std::size_t>(p)] == k && !pattern.allows_repeat(line, t, p);
          }
          if (blocked) continue;
        }
        const double lp = static_cast<double>(z(0, k)) - log_z;
        candidates.push_back({beam[h].log_prob + lp, h, k, lp});
      }
    }
    if (candidates.empty()) {
      throw ConstraintInfeasibleError("no admissible character at line " + std::to_string(line + 1) +
                                      " position " + std::to_string(t + 1) + " (category " +
                                      std::to_string(required) + ")");
    }
    const std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(options.beam_size));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      better);
    std::vector<BeamHypothesis> next;
    next.reserve(keep);
    for (std::size_t r = 0; r < keep; ++r) {
      const Candidate& c = candidates[r];
      BeamHypothesis hyp;
      hyp.tokens = beam[c.parent].tokens;
      hyp.tokens.push_back(c.token);
      hyp.step_log_probs = beam[c.parent].step_log_probs;
      hyp.step_log_probs.push_back(c.step);
      hyp.log_prob = c.score;
      hyp.ctx = next_ctx[c.parent];
      next.push_back(std::move(hyp));
    }
    beam = std::move(next);
  }
  return beam;
}

GenerationResult Generator::generate(const GenerationRequest& request) const {
  const ModelConfig& config = model_.config();
  if (request.keywords.empty() || static_cast<int>(request.keywords.size()) > std::min(kMaxKeywords, config.k1)) {
    throw DataError("generation needs 1 to " + std::to_string(std::min(kMaxKeywords, config.k1)) +
                    " keywords, got " + std::to_string(request.keywords.size()));
  }
  request.pattern.validate();
  if (request.pattern.max_line_length() > config.max_line_length) {
    throw DataError("pattern '" + request.pattern.name + "' has a line longer than max_line_length " +
                    std::to_string(config.max_line_length));
  }
  std::vector<std::vector<int>> keyword_tokens;
  for (const auto& kw : request.keywords) {
    auto ids = vocab_.encode(kw);
    if (ids.empty()) throw DataError("empty keyword");
    if (static_cast<int>(ids.size()) > config.max_line_length) {
      throw DataError("keyword '" + kw + "' is longer than the encoder limit of " +
                      std::to_string(config.max_line_length) + " characters");
    }
    keyword_tokens.push_back(std::move(ids));
  }

  NoGradGuard guard;
  Rng rng(request.seed);
  const ForwardOptions opt;
  BeamOptions beam;
  beam.beam_size = request.beam_size;
  beam.hard_constraint = request.hard_constraint;
  beam.repetition_guard = request.repetition_guard;

  WorkingMemoryState<float> memory = model_.start_memory();
  DecoderContext<float> ctx = model_.start_context();
  model_.write_topics(memory, keyword_tokens, opt, rng);

  std::vector<std::string> contents(static_cast<std::size_t>(memory.size()));
  for (std::size_t k = 0; k < request.keywords.size(); ++k) contents[k] = request.keywords[k];

  GenerationResult result;
  std::vector<EncodedLine<float>> encoded;
  std::vector<std::vector<std::string>> line_chars;
  for (int i = 0; i < request.pattern.line_count(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    LineDiagnostics diag;
    diag.history_targets = model_.prepare_line(memory, ctx, i >= 2 ? &encoded[idx - 2] : nullptr,
                                               i >= 1 ? &encoded[idx - 1] : nullptr, opt, rng);
    for (std::size_t t = 0; t < diag.history_targets.size(); ++t) {
      const int slot = diag.history_targets[t];
      if (slot >= 0) contents[static_cast<std::size_t>(memory.history_begin() + slot)] = line_chars[idx - 2][t];
    }
    for (int k = memory.local_begin(); k < memory.size(); ++k) {
      const auto pos = static_cast<std::size_t>(k - memory.local_begin());
      contents[static_cast<std::size_t>(k)] = i >= 1 && pos < line_chars[idx - 1].size() ? line_chars[idx - 1][pos] : "";
    }

    auto hyps = beam_search_line(ctx, memory, request.pattern, i, beam, rng);
    BeamHypothesis& best = hyps.front();
    ctx = best.ctx;
    for (const auto& a : ctx.alpha_log) {
      const auto& v = a.value();
      diag.alpha.emplace_back(v.data(), v.data() + v.size());
    }
    for (int k = 0; k < memory.size(); ++k) diag.slot_labels.push_back(memory.segment_of(k));
    diag.slot_contents = contents;
    for (int id : best.tokens) diag.characters.push_back(vocab_.char_of(id));
    diag.log_prob = best.log_prob;
    const std::size_t n_best = std::min(hyps.size(), static_cast<std::size_t>(std::max(1, request.n_best)));
    for (std::size_t r = 0; r < n_best; ++r) diag.alternatives.emplace_back(vocab_.decode(hyps[r].tokens), hyps[r].log_prob);

    result.lines.push_back(vocab_.decode(best.tokens));
    line_chars.push_back(diag.characters);
    EncodedLine<float> enc = model_.encode_line(best.tokens, opt, rng);
    model_.finish_line(ctx, memory, enc);
    encoded.push_back(std::move(enc));
    result.diagnostics.push_back(std::move(diag));
  }
  result.compliance = check_compliance(request.pattern, line_chars, lexicon_);
  return result;
}

}  // namespace wm
