#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "wm/cli/dataset.hpp"
#include "wm/cli/run_config.hpp"
#include "wm/corpus/embeddings.hpp"
#include "wm/corpus/poem.hpp"
#include "wm/corpus/utf8.hpp"
#include "wm/error.hpp"
#include "wm/evaluation/analysis.hpp"
#include "wm/generation/generator.hpp"
#include "wm/training/checkpoint.hpp"
#include "wm/util/parallel.hpp"

namespace fs = std::filesystem;
using namespace wm;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError(path.string() + " is not valid JSON");
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<PoemExample> pick_split(const PreparedData& data, const std::string& split) {
  if (split == "train") return data.train;
  if (split == "test") return data.test;
  if (split == "all") return data.poems;
  throw ConfigError("unknown split '" + split + "' (expected train, test or all)");
}

std::vector<std::string> split_keywords(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (const auto& ch : split_chars(text)) {
    if (ch == "," || ch == " " || ch == "\t" || ch == "，" || ch == "、") {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  for (const auto& field : split(text, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw ConfigError("'" + field + "' is not an integer");
    }
  }
  return out;
}

void log_line(const std::string& text) { std::cerr << text << '\n'; }

struct LoadedModel {
  Checkpoint checkpoint;
  Vocabulary vocab;
  PhonologyLexicon lexicon;
  std::unique_ptr<PoetModel<float>> model;
};

LoadedModel load_model(const fs::path& path) {
  LoadedModel m;
  m.checkpoint = load_checkpoint(path);
  m.vocab = m.checkpoint.make_vocabulary();
  m.lexicon = m.checkpoint.make_lexicon();
  Rng unused(0);
  m.model = std::make_unique<PoetModel<float>>(m.checkpoint.model_config, unused);
  restore_parameters(m.model->params(), m.checkpoint.parameters);
  return m;
}

GenrePattern resolve_pattern(const std::string& name, const PatternLibrary& library, Genre genre) {
  if (name.rfind("lengths:", 0) == 0) return pattern_from_lengths(name, genre);
  if (const GenrePattern* p = library.find(name)) return *p;
  std::string known;
  for (const auto& p : library.patterns) {
    if (!p.name.empty()) known += (known.empty() ? "" : ", ") + p.name;
  }
  throw ConfigError("unknown pattern '" + name + "' (known: " + (known.empty() ? "none" : known) +
                    "; or use lengths:N,N,...)");
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string corpus, lexicon, patterns, out, config;
  std::vector<std::string> overrides;
  bool pretrain = false;
};

void run_prepare(const PrepareArgs& a) {
  const RunConfig run = load_run_config(a.config.empty() ? std::nullopt : std::optional<fs::path>(a.config), a.overrides);
  PatternLibrary library;
  if (!a.patterns.empty()) library = PatternLibrary::load(a.patterns);
  const PreparedData data =
      prepare_data(load_corpus(a.corpus), PhonologyLexicon::load(a.lexicon), library, run, a.pretrain);
  save_prepared(data, a.out);
  log_line("prepared " + data.summary.dump());
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string data, config, out, resume;
  std::vector<std::string> overrides;
  int workers = 0;
};

void run_train(const TrainArgs& a) {
  RunConfig run = load_run_config(a.config.empty() ? std::nullopt : std::optional<fs::path>(a.config), a.overrides);
  if (a.workers > 0) run.workers = a.workers;
  const PreparedData data = load_prepared(a.data);
  const std::vector<PoemExample>* valid = data.test.empty() ? nullptr : &data.test;
  run.model.vocab_size = data.vocab.size();
  fs::create_directories(a.out);

  std::unique_ptr<Checkpoint> resume;
  if (!a.resume.empty()) {
    resume = std::make_unique<Checkpoint>(load_checkpoint(a.resume));
    if (resume->vocabulary != data.vocab.characters()) throw VersionError("checkpoint vocabulary differs from " + a.data);
    run.model = resume->model_config;
  }
  const nlohmann::json effective = run_config_to_json(run);
  log_line("config " + effective.dump());
  write_text(fs::path(a.out) / "run_config.json", effective.dump(1) + "\n");

  std::ofstream log(fs::path(a.out) / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  auto on_epoch = [&](const Trainer& trainer, const EpochReport& report) {
    const nlohmann::json j = report;
    log << j.dump() << '\n';
    log.flush();
    log_line("epoch " + j.dump());
    const Checkpoint ck = make_checkpoint(trainer.model(), trainer, effective, data.vocab,
                                          data.lexicon, data.patterns);
    save_checkpoint_archive(ck, fs::path(a.out) / "last.wmc");
    if (report.improved) save_checkpoint_archive(ck, fs::path(a.out) / "best.wmc");
  };

  std::unique_ptr<PoetModel<float>> model;
  TrainerState state;
  if (resume) {
    Rng unused(0);
    model = std::make_unique<PoetModel<float>>(resume->model_config, unused);
    restore_parameters(model->params(), resume->parameters);
    Trainer trainer(*model, run.train, Rng(0));
    trainer.restore(resume->trainer);
    trainer.set_workers(run.workers);
    log_line("resuming from " + a.resume + " at epoch " + std::to_string(resume->trainer.epoch));
    trainer.fit(data.train, valid, [&](const EpochReport& r) { on_epoch(trainer, r); });
    state = trainer.state();
    save_checkpoint_archive(make_checkpoint(*model, trainer, effective, data.vocab, data.lexicon, data.patterns),
                            fs::path(a.out) / "model.wmc");
  } else {
    const Matrix<float>* embeddings = nullptr;
    if (data.embeddings) {
      if (data.embeddings->rows() == data.vocab.size() && data.embeddings->cols() == run.model.word_dim) {
        embeddings = &*data.embeddings;
      } else {
        log_line("skipping pretrained embeddings with shape " + std::to_string(data.embeddings->rows()) + "x" +
                 std::to_string(data.embeddings->cols()));
      }
    }
    std::unique_ptr<Checkpoint> last;
    model = train_model(run.model, run.train, data.train, valid, embeddings, run.workers, &state,
                        [&](const Trainer& trainer, const EpochReport& r) {
                          on_epoch(trainer, r);
                          last = std::make_unique<Checkpoint>(make_checkpoint(trainer.model(),
                                                                              trainer, effective, data.vocab,
                                                                              data.lexicon, data.patterns));
                        });
    if (!last) throw ConfigError("no epochs to train (epochs = " + std::to_string(run.train.epochs) + ")");
    save_checkpoint_archive(*last, fs::path(a.out) / "model.wmc");
  }
  log_line("trained " + std::to_string(state.epoch) + " epochs, " + std::to_string(state.step) + " steps" +
           (state.stopped ? " (early stop)" : ""));
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string model, keywords, keywords_file, pattern, diagnostics, out, config;
  std::vector<std::string> overrides;
  std::optional<int> beam;
  std::optional<int> n_best;
  std::uint64_t seed = 1;
  bool soft = false;
  bool no_repetition_guard = false;
  int workers = 0;
};

void run_generate(const GenerateArgs& a) {
  LoadedModel m = load_model(a.model);
  nlohmann::json base = m.checkpoint.run_config;
  RunConfig run = parse_config(base, {});
  if (!a.config.empty() || !a.overrides.empty()) {
    nlohmann::json file = a.config.empty() ? nlohmann::json::object() : read_json(a.config);
    nlohmann::json merged = base;
    merged.update(file);
    run = parse_config(merged, a.overrides);
  }
  if (a.beam) run.beam_size = *a.beam;
  if (a.n_best) run.n_best = *a.n_best;
  if (a.soft) run.hard_constraint = false;
  if (a.no_repetition_guard) run.repetition_guard = false;
  if (a.workers > 0) run.workers = a.workers;
  if (run.beam_size < 1) throw ConfigError("beam size must be at least 1");

  std::vector<std::vector<std::string>> requests;
  if (!a.keywords.empty()) requests.push_back(split_keywords(a.keywords));
  if (!a.keywords_file.empty()) {
    std::ifstream in(a.keywords_file);
    if (!in) throw IoError("cannot read " + a.keywords_file);
    std::string line;
    while (std::getline(in, line)) {
      auto kws = split_keywords(trim(line));
      if (!kws.empty()) requests.push_back(kws);
    }
  }
  if (requests.empty()) throw ConfigError("no keywords given (use --keywords or --keywords-file)");
  const GenrePattern pattern = resolve_pattern(a.pattern, m.checkpoint.patterns, parse_genre(run.genre));

  Generator generator(*m.model, m.vocab, m.lexicon);
  std::vector<GenerationRequest> reqs(requests.size());
  std::vector<GenerationResult> results(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    auto& r = reqs[i];
    r.keywords = requests[i];
    r.pattern = pattern;
    r.seed = requests.size() == 1 ? a.seed : example_seed(a.seed, i);
    r.beam_size = run.beam_size;
    r.hard_constraint = run.hard_constraint;
    r.repetition_guard = run.repetition_guard;
    r.n_best = run.n_best;
  }
  parallel_for(reqs.size(), run.workers, [&](std::size_t i) { results[i] = generator.generate(reqs[i]); });

  std::ostringstream text;
  nlohmann::json diag = nlohmann::json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (i > 0) text << '\n';
    for (const auto& line : results[i].lines) text << line << '\n';
    diag.push_back(diagnostics_to_json(reqs[i], results[i]));
    if (!run.hard_constraint) {
      const auto& c = results[i].compliance;
      log_line("poem " + std::to_string(i + 1) + " compliance " + std::to_string(100.0 * c.category_rate()) + "% (" +
               std::to_string(c.matched_positions) + "/" + std::to_string(c.constrained_positions) + " positions)");
    }
  }
  if (a.out.empty()) {
    std::cout << text.str();
  } else {
    write_text(a.out, text.str());
  }
  if (!a.diagnostics.empty()) write_text(a.diagnostics, (results.size() == 1 ? diag[0] : diag).dump(1) + "\n");
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string model, data, split = "test", report, relevance;
  std::optional<int> beam;
  std::uint64_t seed = 1;
  bool no_generate = false;
  bool soft = false;
  int workers = 0;
};

void run_eval(const EvalArgs& a) {
  LoadedModel m = load_model(a.model);
  const PreparedData data = load_prepared(a.data);
  if (data.vocab.characters() != m.vocab.characters()) throw VersionError("model vocabulary differs from " + a.data);
  const auto examples = pick_split(data, a.split);
  const RelevanceMap relevance = a.relevance.empty() ? data.relevance : load_relevance_map(a.relevance);

  nlohmann::json base = m.checkpoint.run_config;
  RunConfig run = parse_config(base, {});
  EvalOptions opt;
  opt.beam_size = a.beam.value_or(run.beam_size);
  opt.hard_constraint = !a.soft && run.hard_constraint;
  opt.repetition_guard = run.repetition_guard;
  opt.generate = !a.no_generate;
  opt.seed = a.seed;
  opt.workers = a.workers > 0 ? a.workers : run.workers;
  const EvalReport report = evaluate(*m.model, m.vocab, m.lexicon, examples, relevance, opt);
  nlohmann::json j = report;
  j["split"] = a.split;
  j["poems"] = examples.size();
  const std::string text = j.dump(1) + "\n";
  if (a.report.empty()) {
    std::cout << text;
  } else {
    write_text(a.report, text);
  }
  log_line("bleu " + std::to_string(report.bleu) + " perplexity " + std::to_string(report.perplexity) +
           " expression_ratio " + std::to_string(report.expression_ratio));
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string diagnostics, out;
  int line = 1;
  int poem = 1;
};

void run_inspect(const InspectArgs& a) {
  nlohmann::json j = read_json(a.diagnostics);
  if (j.is_array()) {
    if (a.poem < 1 || a.poem > static_cast<int>(j.size())) {
      throw DataError("poem " + std::to_string(a.poem) + " not in diagnostics with " + std::to_string(j.size()) + " poems");
    }
    j = j[static_cast<std::size_t>(a.poem - 1)];
  }
  if (!j.is_object() || !j.contains("line_diagnostics")) throw DataError(a.diagnostics + " holds no line diagnostics");
  std::vector<LineDiagnostics> lines;
  try {
    lines = j.at("line_diagnostics").get<std::vector<LineDiagnostics>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed diagnostics: ") + e.what());
  }
  dump_attention(lines, a.line - 1, a.out);
  log_line("wrote attention of line " + std::to_string(a.line) + " to " + a.out);
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string data, config, report, k2 = "0,2,4,6";
  std::vector<std::string> overrides;
  int workers = 0;
};

void run_sweep(const SweepArgs& a) {
  RunConfig run = load_run_config(a.config.empty() ? std::nullopt : std::optional<fs::path>(a.config), a.overrides);
  if (a.workers > 0) run.workers = a.workers;
  const PreparedData data = load_prepared(a.data);
  run.model.vocab_size = data.vocab.size();

  SweepRecipe recipe;
  recipe.model = run.model;
  recipe.train = run.train;
  recipe.train_set = data.train;
  recipe.test_set = data.test.empty() ? data.poems : data.test;
  if (data.embeddings && data.embeddings->rows() == data.vocab.size() &&
      data.embeddings->cols() == run.model.word_dim) {
    recipe.embeddings = *data.embeddings;
  }
  recipe.eval.beam_size = run.beam_size;
  recipe.eval.hard_constraint = run.hard_constraint;
  recipe.eval.repetition_guard = run.repetition_guard;
  recipe.eval.seed = run.train.seed;
  recipe.eval.workers = run.workers;
  log_line("config " + run_config_to_json(run).dump());

  const auto rows = slot_sweep(recipe, parse_int_list(a.k2), data.vocab, data.lexicon, [](const SweepRow& row) {
    log_line("k2 " + nlohmann::json(row).dump());
  });
  nlohmann::json j = {{"rows", rows}, {"config", run_config_to_json(run)}};
  std::ostringstream table;
  table << "K2\tBLEU\tPP\n";
  for (const auto& r : rows) table << r.k2 << '\t' << r.bleu << '\t' << r.perplexity << '\n';
  j["table"] = table.str();
  if (a.report.empty()) {
    std::cout << table.str();
  } else {
    write_text(a.report, j.dump(1) + "\n");
    std::cout << table.str();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Working-memory poetry generator"};
  app.name("wm-poet");
  app.require_subcommand(1);

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "Build vocabulary, keywords, pairs, patterns and relevance map");
  p->add_option("--corpus", prepare.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  p->add_option("--lexicon", prepare.lexicon, "Phonology lexicon")->required()->check(CLI::ExistingFile);
  p->add_option("--patterns", prepare.patterns, "Pattern library (JSON)")->check(CLI::ExistingFile);
  p->add_option("--out", prepare.out, "Output data directory")->required();
  p->add_option("--config", prepare.config, "Run config (JSON)")->check(CLI::ExistingFile);
  p->add_option("--set", prepare.overrides, "Config override key=value");
  p->add_flag("--pretrain-embeddings", prepare.pretrain, "Pretrain character embeddings");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--data", train.data, "Prepared data directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--config", train.config, "Run config (JSON)")->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Checkpoint directory")->required();
  t->add_option("--resume", train.resume, "Checkpoint to resume from")->check(CLI::ExistingPath);
  t->add_option("--set", train.overrides, "Config override key=value");
  t->add_option("--workers", train.workers, "Validation threads");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate poems");
  g->add_option("--model", gen.model, "Checkpoint")->required()->check(CLI::ExistingPath);
  g->add_option("--keywords", gen.keywords, "Comma-separated keywords");
  g->add_option("--keywords-file", gen.keywords_file, "One keyword set per line")->check(CLI::ExistingFile);
  g->add_option("--pattern", gen.pattern, "Pattern name or lengths:N,N,...")->required();
  g->add_option("--beam,--beam-size", gen.beam, "Beam size");
  g->add_option("--n-best", gen.n_best, "Alternatives per line in diagnostics");
  g->add_option("--seed", gen.seed, "Seed");
  g->add_flag("--soft-constraints", gen.soft, "Rely on genre embeddings only");
  g->add_flag("--no-repetition-guard", gen.no_repetition_guard, "Allow repeated characters within a line");
  g->add_option("--diagnostics", gen.diagnostics, "Write diagnostics JSON");
  g->add_option("--out", gen.out, "Write poems here instead of stdout");
  g->add_option("--config", gen.config, "Run config (JSON)")->check(CLI::ExistingFile);
  g->add_option("--set", gen.overrides, "Config override key=value");
  g->add_option("--workers", gen.workers, "Threads across keyword sets");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "BLEU, perplexity and topic-expression ratio");
  e->add_option("--model", eval.model, "Checkpoint")->required()->check(CLI::ExistingPath);
  e->add_option("--data", eval.data, "Prepared data directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--split", eval.split, "train, test or all");
  e->add_option("--report", eval.report, "Report file (JSON)");
  e->add_option("--relevance", eval.relevance, "Relevance map (JSON)")->check(CLI::ExistingFile);
  e->add_option("--beam,--beam-size", eval.beam, "Beam size");
  e->add_option("--seed", eval.seed, "Seed");
  e->add_flag("--no-generate", eval.no_generate, "Perplexity only");
  e->add_flag("--soft-constraints", eval.soft, "Generate without the hard mask");
  e->add_option("--workers", eval.workers, "Threads");

  InspectArgs inspect;
  auto* i = app.add_subcommand("inspect", "Export one line's attention as CSV");
  i->add_option("--diagnostics", inspect.diagnostics, "Diagnostics JSON")->required()->check(CLI::ExistingFile);
  i->add_option("--line", inspect.line, "Line number (1-based)");
  i->add_option("--poem", inspect.poem, "Poem number (1-based) for multi-poem diagnostics");
  i->add_option("--out", inspect.out, "CSV file")->required();

  SweepArgs sweep;
  auto* s = app.add_subcommand("sweep", "Train and evaluate one model per history slot count");
  s->add_option("--data", sweep.data, "Prepared data directory")->required()->check(CLI::ExistingDirectory);
  s->add_option("--config", sweep.config, "Run config (JSON)")->check(CLI::ExistingFile);
  s->add_option("--k2", sweep.k2, "Comma-separated K2 values");
  s->add_option("--report", sweep.report, "Report file (JSON)");
  s->add_option("--set", sweep.overrides, "Config override key=value");
  s->add_option("--workers", sweep.workers, "Threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "wm-poet: usage-error: " << ex.what() << '\n';
    return 2;
  }

  try {
    if (*p) run_prepare(prepare);
    if (*t) run_train(train);
    if (*g) run_generate(gen);
    if (*e) run_eval(eval);
    if (*i) run_inspect(inspect);
    if (*s) run_sweep(sweep);
  } catch (const wm::Error& ex) {
    std::cerr << "wm-poet: " << ex.kind() << ": " << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "wm-poet: internal-error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
