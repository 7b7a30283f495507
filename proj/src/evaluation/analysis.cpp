#include "wm/evaluation/analysis.hpp"

#include <fstream>
#include <sstream>

#include "wm/error.hpp"
#include "wm/util/parallel.hpp"

namespace wm {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

AttentionTable attention_table(const std::vector<LineDiagnostics>& diagnostics, int line) {
  if (diagnostics.empty()) throw DataError("no generation diagnostics available");
  if (line < 0 || line >= static_cast<int>(diagnostics.size())) {
    throw DataError("line " + std::to_string(line + 1) + " not in diagnostics with " +
                    std::to_string(diagnostics.size()) + " lines");
  }
  const auto& d = diagnostics[static_cast<std::size_t>(line)];
  if (d.alpha.empty() || d.slot_labels.empty()) throw DataError("line " + std::to_string(line + 1) + " has no attention record");
  AttentionTable table;
  for (std::size_t k = 0; k < d.slot_labels.size(); ++k) {
    const std::string content = k < d.slot_contents.size() ? d.slot_contents[k] : "";
    table.columns.push_back(d.slot_labels[k] + ":" + std::to_string(k) + ":" + content);
  }
  for (std::size_t t = 0; t < d.alpha.size(); ++t) {
    if (d.alpha[t].size() != d.slot_labels.size()) throw DataError("attention row width does not match slot count");
    table.characters.push_back(t < d.characters.size() ? d.characters[t] : "");
    table.alpha.push_back(d.alpha[t]);
  }
  return table;
}

void dump_attention(const std::vector<LineDiagnostics>& diagnostics, int line, const std::filesystem::path& path) {
  const AttentionTable table = attention_table(diagnostics, line);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "char";
  for (const auto& c : table.columns) out << ',' << csv_field(c);
  out << '\n';
  out.precision(17);
  for (std::size_t t = 0; t < table.alpha.size(); ++t) {
    out << csv_field(table.characters[t]);
    for (double a : table.alpha[t]) out << ',' << a;
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

AttentionTable read_attention_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  AttentionTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty attention file " + path.string());
  auto header = parse_csv_row(line);
  table.columns.assign(header.begin() + 1, header.end());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = parse_csv_row(line);
    if (fields.size() != header.size()) throw DataError("ragged row in " + path.string());
    table.characters.push_back(fields[0]);
    std::vector<double> row;
    for (std::size_t k = 1; k < fields.size(); ++k) row.push_back(std::stod(fields[k]));
    table.alpha.push_back(std::move(row));
  }
  return table;
}

void to_json(nlohmann::json& j, const PoemRecord& r) {
  j = nlohmann::json{{"keywords", r.keywords},         {"reference", r.reference},
                     {"generated", r.generated},       {"nll", r.nll},
                     {"category_rate", r.category_rate}, {"structure_ok", r.structure_ok}};
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"bleu", r.bleu},
                     {"perplexity", r.perplexity},
                     {"expression_ratio", r.expression_ratio},
                     {"characters", r.characters},
                     {"compliance_rate", r.compliance_rate},
                     {"per_line_perplexity", r.per_line_perplexity},
                     {"records", r.records}};
}

EvalReport evaluate(const PoetModel<float>& model, const Vocabulary& vocab, const PhonologyLexicon& lexicon,
                    const std::vector<PoemExample>& test, const RelevanceMap& relevance, const EvalOptions& options) {
  if (test.empty()) throw DataError("evaluation set is empty");
  EvalReport report;
  const auto pp = perplexity(model, test, options.seed, options.workers);
  report.perplexity = pp.perplexity;
  report.characters = pp.characters;
  report.per_line_perplexity = pp.per_line;
  report.records.resize(test.size());
  for (std::size_t j = 0; j < test.size(); ++j) {
    report.records[j].keywords = test[j].keywords;
    report.records[j].reference = test[j].line_text;
    report.records[j].nll = pp.per_poem_nll[j];
  }
  if (!options.generate) return report;

  Generator generator(model, vocab, lexicon);
  std::vector<GenerationResult> results(test.size());
  parallel_for(test.size(), options.workers, [&](std::size_t j) {
    GenerationRequest request;
    request.keywords = test[j].keywords;
    request.pattern = test[j].pattern;
    request.seed = example_seed(options.seed, j);
    request.beam_size = options.beam_size;
    request.hard_constraint = options.hard_constraint;
    request.repetition_guard = options.repetition_guard;
    results[j] = generator.generate(request);
  });

  std::vector<PoemLines> hyps, refs;
  std::vector<std::vector<std::string>> keyword_sets;
  long constrained = 0, matched = 0;
  for (std::size_t j = 0; j < test.size(); ++j) {
    auto& rec = report.records[j];
    rec.generated = results[j].lines;
    rec.category_rate = results[j].compliance.category_rate();
    rec.structure_ok = results[j].compliance.structure_ok;
    constrained += results[j].compliance.constrained_positions;
    matched += results[j].compliance.matched_positions;
    hyps.push_back(rec.generated);
    refs.push_back(rec.reference);
    keyword_sets.push_back(rec.keywords);
  }
  report.bleu = bleu_corpus(hyps, refs);
  report.expression_ratio = topic_expression_ratio(hyps, keyword_sets, relevance);
  report.compliance_rate = constrained == 0 ? 1.0 : static_cast<double>(matched) / static_cast<double>(constrained);
  return report;
}

std::unique_ptr<PoetModel<float>> train_model(
    const ModelConfig& model_config, const TrainConfig& train_config, const std::vector<PoemExample>& train,
    const std::vector<PoemExample>* valid, const Matrix<float>* embeddings, int workers, TrainerState* final_state,
    const std::function<void(const Trainer&, const EpochReport&)>& on_epoch) {
  model_config.validate();
  Rng rng(train_config.seed);
  auto model = std::make_unique<PoetModel<float>>(model_config, rng);
  if (embeddings != nullptr) model->set_word_embeddings(*embeddings);
  Trainer trainer(*model, train_config, rng.fork());
  trainer.set_workers(workers);
  trainer.fit(train, valid, [&](const EpochReport& report) {
    if (on_epoch) on_epoch(trainer, report);
  });
  if (final_state != nullptr) *final_state = trainer.state();
  return model;
}

void to_json(nlohmann::json& j, const SweepRow& r) {
  j = nlohmann::json{{"k2", r.k2},
                     {"bleu", r.bleu},
                     {"perplexity", r.perplexity},
                     {"per_line_perplexity", r.per_line_perplexity},
                     {"final_loss", r.final_loss},
                     {"epochs", r.epochs}};
}

std::vector<SweepRow> slot_sweep(const SweepRecipe& recipe, const std::vector<int>& k2_values,
                                 const Vocabulary& vocab, const PhonologyLexicon& lexicon,
                                 const std::function<void(const SweepRow&)>& on_row) {
  if (k2_values.empty()) throw ConfigError("slot sweep needs at least one K2 value");
  std::vector<SweepRow> rows;
  for (int k2 : k2_values) {
    ModelConfig config = recipe.model;
    config.k2 = k2;
    TrainerState state;
    auto model = train_model(config, recipe.train, recipe.train_set, nullptr,
                             recipe.embeddings ? &*recipe.embeddings : nullptr, recipe.eval.workers, &state);
    const EvalReport report = evaluate(*model, vocab, lexicon, recipe.test_set, {}, recipe.eval);
    SweepRow row;
    row.k2 = k2;
    row.bleu = report.bleu;
    row.perplexity = report.perplexity;
    row.per_line_perplexity = report.per_line_perplexity;
    row.epochs = state.epoch;
    row.final_loss = state.history.empty() ? 0.0 : state.history.back().mean_loss;
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

}  // namespace wm
