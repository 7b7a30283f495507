#pragma once

#include <string>
#include <vector>

#include "wm/numerics/parameter.hpp"

namespace wm {

// Slot matrix laid out as [topic (K1); history (K2); local (K3)]. The null
// slot used by history writes is implicit: it is always the zero row.
template <typename T>
struct WorkingMemoryState {
  int k1 = 0;
  int k2 = 0;
  int k3 = 0;
  int slot_dim = 0;
  Tensor<T> slots;             // K x d_h
  std::vector<bool> occupied;  // K flags
  bool topics_written = false;

  int size() const { return k1 + k2 + k3; }
  int history_begin() const { return k1; }
  int local_begin() const { return k1 + k2; }
  // "topic", "history" or "local".
  std::string segment_of(int slot) const;
};

template <typename T>
WorkingMemoryState<T> init_memory(int k1, int k2, int k3, int slot_dim);

// z_k = b^T tanh(M[k] W_mem + q W_query + bias); alpha = softmax(z).
template <typename T>
struct AddressingParams {
  int slot_dim = 0;
  int query_dim = 0;
  int address_dim = 0;
  Parameter<T>* w_mem = nullptr;
  Parameter<T>* w_query = nullptr;
  Parameter<T>* bias = nullptr;
  Parameter<T>* score = nullptr;  // address_dim x 1

  static AddressingParams create(ParameterStore<T>& store, const std::string& prefix, int slot_dim,
                                 int query_dim, int address_dim, Rng& rng);

  // rows x address_dim; reusable while the memory rows are unchanged.
  Tensor<T> project(const Tensor<T>& rows) const;
};

// One uniform(-epsilon, epsilon) draw per row. Callers that share a bias
// across several queries (beam hypotheses) draw once and reuse it.
std::vector<double> draw_slot_bias(int rows, double epsilon, Rng& rng);

// Addressing over pre-projected rows. `bias[k]` is added to z_k wherever
// occupied[k] is false. Returns a 1 x rows probability row.
template <typename T>
Tensor<T> address_projected(const Tensor<T>& projected_rows, const Tensor<T>& query,
                            const AddressingParams<T>& params, const std::vector<bool>& occupied,
                            const std::vector<double>& bias);

// Empty rows throw ContractError.
template <typename T>
Tensor<T> address(const Tensor<T>& rows, const Tensor<T>& query, const AddressingParams<T>& params,
                  const std::vector<bool>& occupied, Rng& rng, double epsilon);

template <typename T>
struct ReadResult {
  Tensor<T> output;  // 1 x d_h
  Tensor<T> alpha;   // 1 x K
};

template <typename T>
ReadResult<T> read_memory(const WorkingMemoryState<T>& memory, const Tensor<T>& projected_slots,
                          const Tensor<T>& query, const AddressingParams<T>& params,
                          const std::vector<double>& bias);

template <typename T>
ReadResult<T> read_memory(const WorkingMemoryState<T>& memory, const Tensor<T>& query,
                          const AddressingParams<T>& params, Rng& rng, double epsilon);

// Fills topic rows 0..n-1. More than K1 vectors throws ConfigError; a second
// call on the same memory throws ContractError.
template <typename T>
void write_topic_memory(WorkingMemoryState<T>& memory, const std::vector<Tensor<T>>& topics);

// Replaces the local segment: rows 0..T-1 get the states, the rest are zeroed
// and released. T > K3 throws ConfigError.
template <typename T>
void write_local_memory(WorkingMemoryState<T>& memory, const Tensor<T>& states);

// History write addressing runs over [history; null]. The returned index is
// the chosen history slot, or -1 for the null slot.
template <typename T>
int write_history_hard(WorkingMemoryState<T>& memory, const Tensor<T>& h, const Tensor<T>& trace,
                       const AddressingParams<T>& params, Rng& rng, double epsilon);

// beta = tanh(gamma (alpha_w - max alpha_w)) + 1, blended into every history
// row; the null row's blend is dropped. Returns beta (1 x (K2 + 1)).
template <typename T>
Tensor<T> write_history_soft(WorkingMemoryState<T>& memory, const Tensor<T>& h, const Tensor<T>& trace,
                             const AddressingParams<T>& params, double gamma, Rng& rng, double epsilon);

enum class WriteMode { Soft, Hard };

// Writes every row of `line_states` into history, in order. Hard mode
// returns the chosen slot per character (-1 = null); soft mode returns the
// slot with the largest beta.
template <typename T>
std::vector<int> step_history_from_line(WorkingMemoryState<T>& memory, const Tensor<T>& line_states,
                                        const Tensor<T>& trace, WriteMode mode,
                                        const AddressingParams<T>& params, double gamma, Rng& rng,
                                        double epsilon);

extern template struct AddressingParams<float>;
extern template struct AddressingParams<double>;

}  // namespace wm
