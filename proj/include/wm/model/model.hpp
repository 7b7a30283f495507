#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "wm/corpus/poem.hpp"
#include "wm/memory/working_memory.hpp"
#include "wm/numerics/gru.hpp"

namespace wm {

struct ModelConfig {
  int word_dim = 256;
  int phonology_dim = 64;
  int length_dim = 32;
  int hidden = 512;
  int trace_dim = 512;
  int topic_content_dim = 20;
  int d_h = 1024;
  int k1 = 4;
  int k2 = 4;
  int k3 = 9;
  int address_dim = 512;
  int vocab_size = 0;
  int max_line_length = 9;
  int max_lines = 0;  // informational; 0 = unbounded
  double slot_bias = 0.05;
  bool use_genre_embedding = true;
  bool use_topic_trace = true;
  // Detach memory and traces between lines.
  bool truncate_bptt = false;
  // Topic usage accumulates the per-step sum instead of the per-line mean.
  bool usage_sum_per_step = false;

  int topic_trace_dim() const { return topic_content_dim + k1; }
  int genre_dim() const { return use_genre_embedding ? phonology_dim + length_dim : 0; }
  int read_query_dim() const { return hidden + trace_dim + (use_topic_trace ? topic_trace_dim() : 0); }
  int decoder_input_dim() const { return word_dim + d_h + genre_dim() + trace_dim; }
  int memory_slots() const { return k1 + k2 + k3; }

  // Throws ConfigError on any violated invariant.
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
// Missing keys keep their defaults; unknown keys throw ConfigError.
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ForwardOptions {
  bool training = false;  // soft history writes and dropout
  double dropout = 0.0;
  double gamma = 50.0;
};

template <typename T>
struct EncodedLine {
  Tensor<T> states;  // T_enc x d_h
  Tensor<T> mean;    // 1 x d_h
};

template <typename T>
struct DecoderContext {
  Tensor<T> s;  // 1 x hidden
  Tensor<T> v;  // 1 x trace_dim
  Tensor<T> c;  // 1 x topic_content_dim
  Tensor<T> u;  // 1 x K1
  int line_index = 0;
  std::vector<Tensor<T>> alpha_log;  // 1 x K per decode step of the current line

  Tensor<T> topic_trace() const;  // [c; u]
};

template <typename T>
struct StepOutput {
  Tensor<T> logits;  // 1 x V
  Tensor<T> alpha;   // 1 x K
};

// Per-line record of a forward pass.
struct LineTrace {
  std::vector<std::vector<double>> alpha;  // steps x K
  std::vector<int> history_targets;        // slot per character of L_{i-2}; -1 = null
  std::vector<std::string> slot_labels;    // K entries
  std::vector<double> usage;               // u after the line
};

template <typename T>
struct PoemLoss {
  Tensor<T> total;  // summed cross entropy, 1 x 1
  int characters = 0;
  std::vector<double> line_nll;    // summed cross entropy per line
  std::vector<LineTrace> lines;    // filled when requested
};

template <typename T>
class PoetModel {
 public:
  PoetModel(const ModelConfig& config, Rng& rng);
  PoetModel(const PoetModel&) = delete;
  PoetModel& operator=(const PoetModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterStore<T>& params() { return params_; }
  const ParameterStore<T>& params() const { return params_; }

  // Replaces the word embedding table; shape must be vocab_size x word_dim.
  void set_word_embeddings(const Matrix<T>& table);

  // Bidirectional GRU over the line's embeddings; rows are [fwd_t; bwd_t].
  EncodedLine<T> encode_line(std::span<const int> tokens, const ForwardOptions& opt, Rng& rng) const;
  // tanh(W mean(states) + b).
  Tensor<T> topic_vector(std::span<const int> keyword, const ForwardOptions& opt, Rng& rng) const;
  // [phonology(category); length(remaining)]. Out-of-range ids throw ContractError.
  Tensor<T> genre_embedding(int category, int remaining) const;

  DecoderContext<T> start_context() const;
  WorkingMemoryState<T> start_memory() const;
  void write_topics(WorkingMemoryState<T>& memory, const std::vector<std::vector<int>>& keywords,
                    const ForwardOptions& opt, Rng& rng) const;

  // Memory writes before line `line_index`: history from L_{i-2} (if any),
  // then local from L_{i-1}; sets the context's initial state s_0. Returns
  // the history write targets.
  std::vector<int> prepare_line(WorkingMemoryState<T>& memory, DecoderContext<T>& ctx,
                                const EncodedLine<T>* before_previous, const EncodedLine<T>* previous,
                                const ForwardOptions& opt, Rng& rng) const;

  // Slot projection reused by every read while memory is unchanged.
  Tensor<T> project_memory(const WorkingMemoryState<T>& memory) const;

  // One decoder step. `slot_bias` holds one draw per slot (draw_slot_bias).
  StepOutput<T> decode_step(DecoderContext<T>& ctx, int y_prev, const WorkingMemoryState<T>& memory,
                            const Tensor<T>& projected_slots, const Tensor<T>& genre,
                            const std::vector<double>& slot_bias, const ForwardOptions& opt, Rng& rng) const;

  Tensor<T> update_global_trace(const Tensor<T>& v, const Tensor<T>& mean_state) const;
  // Consumes ctx.alpha_log and advances c and u.
  void update_topic_trace(DecoderContext<T>& ctx, const WorkingMemoryState<T>& memory) const;
  // Global and topic trace updates after a line; clears the alpha log.
  void finish_line(DecoderContext<T>& ctx, WorkingMemoryState<T>& memory, const EncodedLine<T>& line) const;

  // Teacher-forced cross entropy over the whole poem.
  PoemLoss<T> poem_nll(const PoemExample& example, const ForwardOptions& opt, Rng& rng,
                       bool record_trace = false) const;
  // Mean cross entropy per character.
  Tensor<T> poem_forward_loss(const PoemExample& example, const ForwardOptions& opt, Rng& rng) const;

 private:
  Tensor<T> embed(std::span<const int> tokens, const ForwardOptions& opt, Rng& rng) const;

  ModelConfig config_;
  ParameterStore<T> params_;
  Parameter<T>* embedding_ = nullptr;
  GruCellParams<T> enc_fwd_;
  GruCellParams<T> enc_bwd_;
  Parameter<T>* topic_w_ = nullptr;
  Parameter<T>* topic_b_ = nullptr;
  Parameter<T>* phonology_ = nullptr;
  Parameter<T>* length_ = nullptr;
  GruCellParams<T> decoder_;
  Parameter<T>* init_w_ = nullptr;
  Parameter<T>* init_b_ = nullptr;
  Parameter<T>* out_w_ = nullptr;
  Parameter<T>* out_b_ = nullptr;
  Parameter<T>* trace_w_ = nullptr;
  Parameter<T>* trace_b_ = nullptr;
  Parameter<T>* topic_trace_w_ = nullptr;
  Parameter<T>* topic_trace_b_ = nullptr;
  AddressingParams<T> read_;
  AddressingParams<T> write_;
};

extern template class PoetModel<float>;
extern template class PoetModel<double>;

}  // namespace wm
