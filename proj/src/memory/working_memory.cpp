#include "wm/memory/working_memory.hpp"

#include "wm/error.hpp"
#include "wm/numerics/ops.hpp"

namespace wm {

template <typename T>
std::string WorkingMemoryState<T>::segment_of(int slot) const {
  if (slot < 0 || slot >= size()) throw ContractError("slot " + std::to_string(slot) + " outside memory");
  if (slot < k1) return "topic";
  if (slot < k1 + k2) return "history";
  return "local";
}

template <typename T>
WorkingMemoryState<T> init_memory(int k1, int k2, int k3, int slot_dim) {
  if (k1 < 0 || k2 < 0 || k3 < 0 || slot_dim < 1) {
    throw ConfigError("memory sizes must be non-negative and the slot width positive");
  }
  WorkingMemoryState<T> m;
  m.k1 = k1;
  m.k2 = k2;
  m.k3 = k3;
  m.slot_dim = slot_dim;
  m.slots = Tensor<T>::zeros(k1 + k2 + k3, slot_dim);
  m.occupied.assign(static_cast<std::size_t>(k1 + k2 + k3), false);
  return m;
}

template <typename T>
AddressingParams<T> AddressingParams<T>::create(ParameterStore<T>& store, const std::string& prefix,
                                                int slot_dim, int query_dim, int address_dim, Rng& rng) {
  AddressingParams p;
  p.slot_dim = slot_dim;
  p.query_dim = query_dim;
  p.address_dim = address_dim;
  p.w_mem = &store.add(prefix + ".W_mem", slot_dim, address_dim, Init::Uniform, rng);
  p.w_query = &store.add(prefix + ".W_query", query_dim, address_dim, Init::Uniform, rng);
  p.bias = &store.add(prefix + ".bias", 1, address_dim, Init::Zeros, rng);
  p.score = &store.add(prefix + ".score", address_dim, 1, Init::Uniform, rng);
  return p;
}

template <typename T>
Tensor<T> AddressingParams<T>::project(const Tensor<T>& rows) const {
  return matmul(rows, w_mem->tensor);
}

std::vector<double> draw_slot_bias(int rows, double epsilon, Rng& rng) {
  std::vector<double> bias(static_cast<std::size_t>(rows));
  for (auto& b : bias) b = rng.uniform(-epsilon, epsilon);
  return bias;
}

template <typename T>
Tensor<T> address_projected(const Tensor<T>& projected_rows, const Tensor<T>& query,
                            const AddressingParams<T>& params, const std::vector<bool>& occupied,
                            const std::vector<double>& bias) {
  const Eigen::Index n = projected_rows.rows();
  if (n == 0) throw ContractError("addressing an empty memory");
  if (query.rows() != 1 || query.cols() != params.query_dim) {
    throw DimensionError("address query " + query.shape_string() + ", expected 1x" +
                         std::to_string(params.query_dim));
  }
  if (static_cast<Eigen::Index>(occupied.size()) != n || static_cast<Eigen::Index>(bias.size()) != n) {
    throw DimensionError("occupancy/bias length does not match " + std::to_string(n) + " rows");
  }
  Tensor<T> q = linear(query, params.w_query->tensor, params.bias->tensor);
  Tensor<T> hidden = tanh(add_bias(projected_rows, q));
  Tensor<T> z = transpose(matmul(hidden, params.score->tensor));
  Matrix<T> offsets = Matrix<T>::Zero(1, n);
  bool any = false;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!occupied[static_cast<std::size_t>(k)]) {
      offsets(0, k) = static_cast<T>(bias[static_cast<std::size_t>(k)]);
      any = true;
    }
  }
  if (any) z = add(z, Tensor<T>::constant(std::move(offsets)));
  return softmax(z);
}

template <typename T>
Tensor<T> address(const Tensor<T>& rows, const Tensor<T>& query, const AddressingParams<T>& params,
                  const std::vector<bool>& occupied, Rng& rng, double epsilon) {
  if (rows.rows() == 0) throw ContractError("addressing an empty memory");
  auto bias = draw_slot_bias(static_cast<int>(rows.rows()), epsilon, rng);
  return address_projected(params.project(rows), query, params, occupied, bias);
}

template <typename T>
ReadResult<T> read_memory(const WorkingMemoryState<T>& memory, const Tensor<T>& projected_slots,
                          const Tensor<T>& query, const AddressingParams<T>& params,
                          const std::vector<double>& bias) {
  ReadResult<T> r;
  r.alpha = address_projected(projected_slots, query, params, memory.occupied, bias);
  r.output = matmul(r.alpha, memory.slots);
  return r;
}

template <typename T>
ReadResult<T> read_memory(const WorkingMemoryState<T>& memory, const Tensor<T>& query,
                          const AddressingParams<T>& params, Rng& rng, double epsilon) {
  auto bias = draw_slot_bias(memory.size(), epsilon, rng);
  return read_memory(memory, params.project(memory.slots), query, params, bias);
}

template <typename T>
void write_topic_memory(WorkingMemoryState<T>& memory, const std::vector<Tensor<T>>& topics) {
  if (memory.topics_written) throw ContractError("topic memory is already filled for this poem");
  if (static_cast<int>(topics.size()) > memory.k1) {
    throw ConfigError(std::to_string(topics.size()) + " topics exceed the " + std::to_string(memory.k1) +
                      " topic slots");
  }
  for (std::size_t i = 0; i < topics.size(); ++i) {
    memory.slots = set_rows(memory.slots, static_cast<Eigen::Index>(i), topics[i]);
    memory.occupied[i] = true;
  }
  memory.topics_written = true;
}

template <typename T>
void write_local_memory(WorkingMemoryState<T>& memory, const Tensor<T>& states) {
  const int t = static_cast<int>(states.rows());
  if (t > memory.k3) {
    throw ConfigError("line of " + std::to_string(t) + " characters does not fit " + std::to_string(memory.k3) +
                      " local slots");
  }
  if (states.cols() != memory.slot_dim) throw DimensionError("local write " + states.shape_string());
  if (memory.k3 == 0) return;
  Tensor<T> block = t == memory.k3 ? states
                                   : concat_rows<T>({states, Tensor<T>::zeros(memory.k3 - t, memory.slot_dim)});
  memory.slots = set_rows(memory.slots, memory.local_begin(), block);
  for (int k = 0; k < memory.k3; ++k) memory.occupied[static_cast<std::size_t>(memory.local_begin() + k)] = k < t;
}

namespace {

// Write addressing over [history; null] for query [h; trace].
template <typename T>
Tensor<T> history_write_alpha(const WorkingMemoryState<T>& memory, const Tensor<T>& h, const Tensor<T>& trace,
                              const AddressingParams<T>& params, Rng& rng, double epsilon) {
  Tensor<T> history = slice_rows(memory.slots, memory.history_begin(), memory.k2);
  Tensor<T> projected =
      concat_rows<T>({params.project(history), Tensor<T>::zeros(1, params.address_dim)});
  std::vector<bool> occupied(memory.occupied.begin() + memory.history_begin(),
                             memory.occupied.begin() + memory.local_begin());
  occupied.push_back(false);
  auto bias = draw_slot_bias(memory.k2 + 1, epsilon, rng);
  return address_projected(projected, concat_cols<T>({h, trace}), params, occupied, bias);
}

}  // namespace

template <typename T>
int write_history_hard(WorkingMemoryState<T>& memory, const Tensor<T>& h, const Tensor<T>& trace,
                       const AddressingParams<T>& params, Rng& rng, double epsilon) {
  if (memory.k2 == 0) return -1;
  Tensor<T> alpha = history_write_alpha(memory, h, trace, params, rng, epsilon);
  const auto& a = alpha.value();
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < a.cols(); ++k) {
    if (a(0, k) > a(0, best)) best = k;
  }
  if (best == memory.k2) return -1;
  const int slot = memory.history_begin() + static_cast<int>(best);
  memory.slots = set_rows(memory.slots, slot, h);
  memory.occupied[static_cast<std::size_t>(slot)] = true;
  return static_cast<int>(best);
}

template <typename T>
Tensor<T> write_history_soft(WorkingMemoryState<T>& memory, const Tensor<T>& h, const Tensor<T>& trace,
                             const AddressingParams<T>& params, double gamma, Rng& rng, double epsilon) {
  if (gamma <= 0) throw ConfigError("gamma must be positive");
  if (memory.k2 == 0) return Tensor<T>::constant(Matrix<T>::Ones(1, 1));
  Tensor<T> alpha = history_write_alpha(memory, h, trace, params, rng, epsilon);
  Tensor<T> beta = add_scalar(tanh(scale(subtract_row_max(alpha), static_cast<T>(gamma))), T(1));
  Tensor<T> beta_hist = slice_cols(beta, 0, memory.k2);
  Tensor<T> history = slice_rows(memory.slots, memory.history_begin(), memory.k2);
  Tensor<T> blended = add(sub(history, scale_rows(history, beta_hist)), matmul(transpose(beta_hist), h));
  memory.slots = set_rows(memory.slots, memory.history_begin(), blended);
  for (int k = 0; k < memory.k2; ++k) {
    if (beta_hist.value()(0, k) > T(0.5)) memory.occupied[static_cast<std::size_t>(memory.history_begin() + k)] = true;
  }
  return beta;
}

template <typename T>
std::vector<int> step_history_from_line(WorkingMemoryState<T>& memory, const Tensor<T>& line_states,
                                        const Tensor<T>& trace, WriteMode mode,
                                        const AddressingParams<T>& params, double gamma, Rng& rng,
                                        double epsilon) {
  std::vector<int> targets;
  for (Eigen::Index t = 0; t < line_states.rows(); ++t) {
    Tensor<T> h = slice_rows(line_states, t, 1);
    if (mode == WriteMode::Hard) {
      targets.push_back(write_history_hard(memory, h, trace, params, rng, epsilon));
      continue;
    }
    Tensor<T> beta = write_history_soft(memory, h, trace, params, gamma, rng, epsilon);
    Eigen::Index best = 0;
    beta.value().row(0).maxCoeff(&best);
    targets.push_back(best >= memory.k2 ? -1 : static_cast<int>(best));
  }
  return targets;
}

#define WM_INSTANTIATE_MEMORY(T)                                                                               \
  template struct WorkingMemoryState<T>;                                                                       \
  template struct AddressingParams<T>;                                                                         \
  template WorkingMemoryState<T> init_memory<T>(int, int, int, int);                                           \
  template Tensor<T> address_projected(const Tensor<T>&, const Tensor<T>&, const AddressingParams<T>&,         \
                                       const std::vector<bool>&, const std::vector<double>&);                  \
  template Tensor<T> address(const Tensor<T>&, const Tensor<T>&, const AddressingParams<T>&,                   \
                             const std::vector<bool>&, Rng&, double);                                          \
  template ReadResult<T> read_memory(const WorkingMemoryState<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                     const AddressingParams<T>&, const std::vector<double>&);                  \
  template ReadResult<T> read_memory(const WorkingMemoryState<T>&, const Tensor<T>&,                           \
                                     const AddressingParams<T>&, Rng&, double);                                \
  template void write_topic_memory(WorkingMemoryState<T>&, const std::vector<Tensor<T>>&);                     \
  template void write_local_memory(WorkingMemoryState<T>&, const Tensor<T>&);                                  \
  template int write_history_hard(WorkingMemoryState<T>&, const Tensor<T>&, const Tensor<T>&,                  \
                                  const AddressingParams<T>&, Rng&, double);                                   \
  template Tensor<T> write_history_soft(WorkingMemoryState<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                        const AddressingParams<T>&, double, Rng&, double);                     \
  template std::vector<int> step_history_from_line(WorkingMemoryState<T>&, const Tensor<T>&, const Tensor<T>&, \
                                                   WriteMode, const AddressingParams<T>&, double, Rng&, double);

WM_INSTANTIATE_MEMORY(float)
WM_INSTANTIATE_MEMORY(double)

}  // namespace wm
