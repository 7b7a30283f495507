#include "wm/model/model.hpp"

#include <set>

#include "wm/corpus/lexicon.hpp"
#include "wm/error.hpp"
#include "wm/numerics/ops.hpp"

namespace wm {

namespace {

const std::set<std::string>& model_config_keys() {
  static const std::set<std::string> keys = {
      "word_dim",      "phonology_dim", "length_dim",     "hidden",           "trace_dim",
      "topic_content_dim", "d_h",       "k1",             "k2",               "k3",
      "address_dim",   "vocab_size",    "max_line_length", "max_lines",       "slot_bias",
      "use_genre_embedding", "use_topic_trace", "truncate_bptt", "usage_sum_per_step"};
  return keys;
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be positive, got " + std::to_string(v));
  };
  positive(word_dim, "word_dim");
  positive(phonology_dim, "phonology_dim");
  positive(length_dim, "length_dim");
  positive(hidden, "hidden");
  positive(trace_dim, "trace_dim");
  positive(topic_content_dim, "topic_content_dim");
  positive(address_dim, "address_dim");
  positive(max_line_length, "max_line_length");
  if (d_h != 2 * hidden) {
    throw ConfigError("d_h must equal 2 * hidden (" + std::to_string(2 * hidden) + "), got " + std::to_string(d_h));
  }
  if (k1 < 1) throw ConfigError("k1 must be at least 1");
  if (k2 < 0) throw ConfigError("k2 must be non-negative");
  if (k3 < max_line_length) {
    throw ConfigError("k3 (" + std::to_string(k3) + ") must hold a full line of " + std::to_string(max_line_length));
  }
  if (vocab_size <= Vocabulary::kReserved) throw ConfigError("vocab_size must exceed the reserved tokens");
  if (slot_bias < 0) throw ConfigError("slot_bias must be non-negative");
  if (max_lines < 0) throw ConfigError("max_lines must be non-negative");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"word_dim", c.word_dim},
                     {"phonology_dim", c.phonology_dim},
                     {"length_dim", c.length_dim},
                     {"hidden", c.hidden},
                     {"trace_dim", c.trace_dim},
                     {"topic_content_dim", c.topic_content_dim},
                     {"d_h", c.d_h},
                     {"k1", c.k1},
                     {"k2", c.k2},
                     {"k3", c.k3},
                     {"address_dim", c.address_dim},
                     {"vocab_size", c.vocab_size},
                     {"max_line_length", c.max_line_length},
                     {"max_lines", c.max_lines},
                     {"slot_bias", c.slot_bias},
                     {"use_genre_embedding", c.use_genre_embedding},
                     {"use_topic_trace", c.use_topic_trace},
                     {"truncate_bptt", c.truncate_bptt},
                     {"usage_sum_per_step", c.usage_sum_per_step}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!model_config_keys().count(key)) throw ConfigError("unknown model config key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("word_dim", c.word_dim);
    get("phonology_dim", c.phonology_dim);
    get("length_dim", c.length_dim);
    get("hidden", c.hidden);
    get("trace_dim", c.trace_dim);
    get("topic_content_dim", c.topic_content_dim);
    get("d_h", c.d_h);
    get("k1", c.k1);
    get("k2", c.k2);
    get("k3", c.k3);
    get("address_dim", c.address_dim);
    get("vocab_size", c.vocab_size);
    get("max_line_length", c.max_line_length);
    get("max_lines", c.max_lines);
    get("slot_bias", c.slot_bias);
    get("use_genre_embedding", c.use_genre_embedding);
    get("use_topic_trace", c.use_topic_trace);
    get("truncate_bptt", c.truncate_bptt);
    get("usage_sum_per_step", c.usage_sum_per_step);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config type mismatch: ") + e.what());
  }
}

template <typename T>
Tensor<T> DecoderContext<T>::topic_trace() const {
  return concat_cols<T>({c, u});
}

template <typename T>
PoetModel<T>::PoetModel(const ModelConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const auto& c = config_;
  embedding_ = &params_.add("embedding", c.vocab_size, c.word_dim, Init::Uniform, rng);
  enc_fwd_ = GruCellParams<T>::create(params_, "encoder.fwd", c.word_dim, c.hidden, rng);
  enc_bwd_ = GruCellParams<T>::create(params_, "encoder.bwd", c.word_dim, c.hidden, rng);
  topic_w_ = &params_.add("topic.W", c.d_h, c.d_h, Init::Uniform, rng);
  topic_b_ = &params_.add("topic.b", 1, c.d_h, Init::Zeros, rng);
  if (c.use_genre_embedding) {
    phonology_ = &params_.add("genre.phonology", PhonologyLexicon::kTableRows, c.phonology_dim, Init::Uniform, rng);
    length_ = &params_.add("genre.length", c.max_line_length + 1, c.length_dim, Init::Uniform, rng);
  }
  decoder_ = GruCellParams<T>::create(params_, "decoder", c.decoder_input_dim(), c.hidden, rng);
  init_w_ = &params_.add("decoder.init.W", c.d_h, c.hidden, Init::Uniform, rng);
  init_b_ = &params_.add("decoder.init.b", 1, c.hidden, Init::Zeros, rng);
  out_w_ = &params_.add("output.W", c.hidden, c.vocab_size, Init::Uniform, rng);
  out_b_ = &params_.add("output.b", 1, c.vocab_size, Init::Zeros, rng);
  trace_w_ = &params_.add("trace.W", c.trace_dim + c.d_h, c.trace_dim, Init::Uniform, rng);
  trace_b_ = &params_.add("trace.b", 1, c.trace_dim, Init::Zeros, rng);
  if (c.use_topic_trace) {
    topic_trace_w_ =
        &params_.add("topic_trace.W", c.topic_content_dim + c.d_h, c.topic_content_dim, Init::Uniform, rng);
    topic_trace_b_ = &params_.add("topic_trace.b", 1, c.topic_content_dim, Init::Zeros, rng);
  }
  read_ = AddressingParams<T>::create(params_, "read", c.d_h, c.read_query_dim(), c.address_dim, rng);
  write_ = AddressingParams<T>::create(params_, "write", c.d_h, c.d_h + c.trace_dim, c.address_dim, rng);
}

template <typename T>
void PoetModel<T>::set_word_embeddings(const Matrix<T>& table) {
  if (table.rows() != config_.vocab_size || table.cols() != config_.word_dim) {
    throw DimensionError("embedding table " + std::to_string(table.rows()) + "x" + std::to_string(table.cols()) +
                         " does not match " + std::to_string(config_.vocab_size) + "x" +
                         std::to_string(config_.word_dim));
  }
  embedding_->tensor.mutable_value() = table;
}

template <typename T>
Tensor<T> PoetModel<T>::embed(std::span<const int> tokens, const ForwardOptions& opt, Rng& rng) const {
  for (int id : tokens) {
    if (id < 0 || id >= config_.vocab_size) throw ContractError("token id " + std::to_string(id) + " out of range");
  }
  return dropout(gather_rows(embedding_->tensor, tokens), opt.dropout, opt.training, rng);
}

template <typename T>
EncodedLine<T> PoetModel<T>::encode_line(std::span<const int> tokens, const ForwardOptions& opt, Rng& rng) const {
  if (tokens.empty()) throw ContractError("cannot encode an empty line");
  const Eigen::Index n = static_cast<Eigen::Index>(tokens.size());
  Tensor<T> x = embed(tokens, opt, rng);
  std::vector<Tensor<T>> fwd(tokens.size()), bwd(tokens.size());
  Tensor<T> h = Tensor<T>::zeros(1, config_.hidden);
  for (Eigen::Index t = 0; t < n; ++t) {
    h = gru_cell_forward(slice_rows(x, t, 1), h, enc_fwd_);
    fwd[static_cast<std::size_t>(t)] = h;
  }
  h = Tensor<T>::zeros(1, config_.hidden);
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    h = gru_cell_forward(slice_rows(x, t, 1), h, enc_bwd_);
    bwd[static_cast<std::size_t>(t)] = h;
  }
  std::vector<Tensor<T>> rows;
  rows.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) rows.push_back(concat_cols<T>({fwd[t], bwd[t]}));
  EncodedLine<T> out;
  out.states = concat_rows<T>(std::span<const Tensor<T>>(rows));
  out.mean = mean_rows(out.states);
  return out;
}

template <typename T>
Tensor<T> PoetModel<T>::topic_vector(std::span<const int> keyword, const ForwardOptions& opt, Rng& rng) const {
  if (keyword.empty()) throw ContractError("empty keyword");
  return tanh(linear(encode_line(keyword, opt, rng).mean, topic_w_->tensor, topic_b_->tensor));
}

template <typename T>
Tensor<T> PoetModel<T>::genre_embedding(int category, int remaining) const {
  if (category < 0 || category >= PhonologyLexicon::kTableRows) {
    throw ContractError("phonology category " + std::to_string(category) + " out of range");
  }
  if (remaining < 0 || remaining > config_.max_line_length) {
    throw ContractError("remaining length " + std::to_string(remaining) + " out of range");
  }
  if (!config_.use_genre_embedding) return Tensor<T>::zeros(1, 0);
  const int cat[] = {category};
  const int rem[] = {remaining};
  return concat_cols<T>({gather_rows(phonology_->tensor, std::span<const int>(cat)),
                         gather_rows(length_->tensor, std::span<const int>(rem))});
}

template <typename T>
DecoderContext<T> PoetModel<T>::start_context() const {
  DecoderContext<T> ctx;
  ctx.s = Tensor<T>::zeros(1, config_.hidden);
  ctx.v = Tensor<T>::zeros(1, config_.trace_dim);
  ctx.c = Tensor<T>::zeros(1, config_.topic_content_dim);
  ctx.u = Tensor<T>::zeros(1, config_.k1);
  return ctx;
}

template <typename T>
WorkingMemoryState<T> PoetModel<T>::start_memory() const {
  return init_memory<T>(config_.k1, config_.k2, config_.k3, config_.d_h);
}

template <typename T>
void PoetModel<T>::write_topics(WorkingMemoryState<T>& memory, const std::vector<std::vector<int>>& keywords,
                                const ForwardOptions& opt, Rng& rng) const {
  std::vector<Tensor<T>> topics;
  topics.reserve(keywords.size());
  for (const auto& kw : keywords) topics.push_back(topic_vector(kw, opt, rng));
  write_topic_memory(memory, topics);
}

template <typename T>
std::vector<int> PoetModel<T>::prepare_line(WorkingMemoryState<T>& memory, DecoderContext<T>& ctx,
                                            const EncodedLine<T>* before_previous, const EncodedLine<T>* previous,
                                            const ForwardOptions& opt, Rng& rng) const {
  std::vector<int> targets;
  if (before_previous != nullptr) {
    targets = step_history_from_line(memory, before_previous->states, ctx.v,
                                     opt.training ? WriteMode::Soft : WriteMode::Hard, write_, opt.gamma, rng,
                                     config_.slot_bias);
  }
  if (previous != nullptr) {
    write_local_memory(memory, previous->states);
    ctx.s = tanh(linear(previous->mean, init_w_->tensor, init_b_->tensor));
  } else {
    ctx.s = Tensor<T>::zeros(1, config_.hidden);
  }
  ctx.alpha_log.clear();
  return targets;
}

template <typename T>
Tensor<T> PoetModel<T>::project_memory(const WorkingMemoryState<T>& memory) const {
  return read_.project(memory.slots);
}

template <typename T>
StepOutput<T> PoetModel<T>::decode_step(DecoderContext<T>& ctx, int y_prev, const WorkingMemoryState<T>& memory,
                                        const Tensor<T>& projected_slots, const Tensor<T>& genre,
                                        const std::vector<double>& slot_bias, const ForwardOptions& opt,
                                        Rng& rng) const {
  Tensor<T> query = config_.use_topic_trace ? concat_cols<T>({ctx.s, ctx.v, ctx.c, ctx.u})
                                            : concat_cols<T>({ctx.s, ctx.v});
  auto read = read_memory(memory, projected_slots, query, read_, slot_bias);
  const int ids[] = {y_prev};
  Tensor<T> e = embed(std::span<const int>(ids), opt, rng);
  std::vector<Tensor<T>> parts = {e, read.output};
  if (config_.use_genre_embedding) parts.push_back(genre);
  parts.push_back(ctx.v);
  Tensor<T> input = concat_cols<T>(std::span<const Tensor<T>>(parts));
  ctx.s = gru_cell_forward(input, ctx.s, decoder_);
  StepOutput<T> out;
  out.logits = linear(dropout(ctx.s, opt.dropout, opt.training, rng), out_w_->tensor, out_b_->tensor);
  out.alpha = read.alpha;
  ctx.alpha_log.push_back(read.alpha);
  return out;
}

template <typename T>
Tensor<T> PoetModel<T>::update_global_trace(const Tensor<T>& v, const Tensor<T>& mean_state) const {
  return tanh(linear(concat_cols<T>({v, mean_state}), trace_w_->tensor, trace_b_->tensor));
}

template <typename T>
void PoetModel<T>::update_topic_trace(DecoderContext<T>& ctx, const WorkingMemoryState<T>& memory) const {
  if (ctx.alpha_log.empty()) return;
  Tensor<T> steps = concat_rows<T>(std::span<const Tensor<T>>(ctx.alpha_log));
  Tensor<T> mean_alpha = mean_rows(steps);
  Tensor<T> topic_alpha = slice_cols(mean_alpha, 0, config_.k1);
  Tensor<T> topics = slice_rows(memory.slots, 0, config_.k1);
  Tensor<T> content = mean_rows(scale_rows(topics, topic_alpha));
  ctx.c = tanh(linear(concat_cols<T>({ctx.c, content}), topic_trace_w_->tensor, topic_trace_b_->tensor));
  Tensor<T> usage = config_.usage_sum_per_step
                        ? scale(topic_alpha, static_cast<T>(ctx.alpha_log.size()))
                        : topic_alpha;
  ctx.u = add(ctx.u, usage);
}

template <typename T>
void PoetModel<T>::finish_line(DecoderContext<T>& ctx, WorkingMemoryState<T>& memory,
                               const EncodedLine<T>& line) const {
  ctx.v = update_global_trace(ctx.v, line.mean);
  if (config_.use_topic_trace) update_topic_trace(ctx, memory);
  ctx.alpha_log.clear();
  ++ctx.line_index;
  if (config_.truncate_bptt) {
    ctx.v = detach(ctx.v);
    ctx.c = detach(ctx.c);
    ctx.u = detach(ctx.u);
    memory.slots = detach(memory.slots);
  }
}

template <typename T>
PoemLoss<T> PoetModel<T>::poem_nll(const PoemExample& example, const ForwardOptions& opt, Rng& rng,
                                   bool record_trace) const {
  example.validate();
  if (static_cast<int>(example.keyword_tokens.size()) > config_.k1) {
    throw DataError(std::to_string(example.keyword_tokens.size()) + " keywords exceed " +
                    std::to_string(config_.k1) + " topic slots");
  }
  PoemLoss<T> result;
  WorkingMemoryState<T> memory = start_memory();
  DecoderContext<T> ctx = start_context();
  write_topics(memory, example.keyword_tokens, opt, rng);

  std::vector<Tensor<T>> terms;
  std::vector<EncodedLine<T>> encoded;
  for (std::size_t i = 0; i < example.lines.size(); ++i) {
    const auto& line = example.lines[i];
    const auto& categories = example.pattern.lines[i];
    if (static_cast<int>(line.size()) > config_.max_line_length) {
      throw DataError("line of " + std::to_string(line.size()) + " characters exceeds max_line_length " +
                      std::to_string(config_.max_line_length));
    }
    const EncodedLine<T>* before_previous = i >= 2 ? &encoded[i - 2] : nullptr;
    const EncodedLine<T>* previous = i >= 1 ? &encoded[i - 1] : nullptr;
    LineTrace trace;
    trace.history_targets = prepare_line(memory, ctx, before_previous, previous, opt, rng);
    Tensor<T> projected = project_memory(memory);
    int y_prev = Vocabulary::kBos;
    const int len = static_cast<int>(line.size());
    for (int t = 0; t < len; ++t) {
      Tensor<T> g = genre_embedding(categories[static_cast<std::size_t>(t)], len - t - 1);
      auto bias = draw_slot_bias(memory.size(), config_.slot_bias, rng);
      auto step = decode_step(ctx, y_prev, memory, projected, g, bias, opt, rng);
      terms.push_back(cross_entropy(step.logits, line[static_cast<std::size_t>(t)]));
      if (record_trace) {
        const auto& a = step.alpha.value();
        trace.alpha.emplace_back(a.data(), a.data() + a.size());
      }
      y_prev = line[static_cast<std::size_t>(t)];
    }
    double line_nll = 0.0;
    for (std::size_t k = terms.size() - static_cast<std::size_t>(len); k < terms.size(); ++k) line_nll += terms[k].item();
    result.line_nll.push_back(line_nll);
    result.characters += len;
    EncodedLine<T> enc = encode_line(line, opt, rng);
    if (config_.truncate_bptt) {
      enc.states = detach(enc.states);
      enc.mean = detach(enc.mean);
    }
    finish_line(ctx, memory, enc);
    encoded.push_back(std::move(enc));
    if (record_trace) {
      for (int k = 0; k < memory.size(); ++k) trace.slot_labels.push_back(memory.segment_of(k));
      const auto& u = ctx.u.value();
      trace.usage.assign(u.data(), u.data() + u.size());
      result.lines.push_back(std::move(trace));
    }
  }
  Tensor<T> per_char = concat_cols<T>(std::span<const Tensor<T>>(terms));
  result.total = sum(per_char);
  return result;
}

template <typename T>
Tensor<T> PoetModel<T>::poem_forward_loss(const PoemExample& example, const ForwardOptions& opt, Rng& rng) const {
  auto nll = poem_nll(example, opt, rng);
  return scale(nll.total, static_cast<T>(1.0 / nll.characters));
}

template struct DecoderContext<float>;
template struct DecoderContext<double>;
template class PoetModel<float>;
template class PoetModel<double>;

}  // namespace wm
