#include "wm/numerics/gru.hpp"

#include "wm/error.hpp"
#include "wm/numerics/ops.hpp"

namespace wm {

template <typename T>
GruCellParams<T> GruCellParams<T>::create(ParameterStore<T>& store, const std::string& prefix,
                                          int input_size, int hidden_size, Rng& rng) {
  GruCellParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  auto weights = [&](const char* gate, Parameter<T>*& w, Parameter<T>*& u, Parameter<T>*& b) {
    w = &store.add(prefix + ".W_" + gate, input_size, hidden_size, Init::Uniform, rng);
    u = &store.add(prefix + ".U_" + gate, hidden_size, hidden_size, Init::Uniform, rng);
    b = &store.add(prefix + ".b_" + gate, 1, hidden_size, Init::Zeros, rng);
  };
  weights("z", p.w_z, p.u_z, p.b_z);
  weights("r", p.w_r, p.u_r, p.b_r);
  weights("n", p.w_n, p.u_n, p.b_n);
  return p;
}

template <typename T>
Tensor<T> gru_cell_forward(const Tensor<T>& x, const Tensor<T>& h_prev, const GruCellParams<T>& p) {
  if (x.cols() != p.input_size || h_prev.cols() != p.hidden_size || x.rows() != h_prev.rows()) {
    throw DimensionError("gru_cell_forward: x " + x.shape_string() + ", h " + h_prev.shape_string() +
                         " for cell " + std::to_string(p.input_size) + "->" +
                         std::to_string(p.hidden_size));
  }
  auto gate = [&](const Parameter<T>* w, const Parameter<T>* u, const Parameter<T>* b,
                  const Tensor<T>& h) {
    return add_bias(add(matmul(x, w->tensor), matmul(h, u->tensor)), b->tensor);
  };
  Tensor<T> z = sigmoid(gate(p.w_z, p.u_z, p.b_z, h_prev));
  Tensor<T> r = sigmoid(gate(p.w_r, p.u_r, p.b_r, h_prev));
  Tensor<T> n = tanh(gate(p.w_n, p.u_n, p.b_n, mul(r, h_prev)));
  return add(mul(one_minus(z), n), mul(z, h_prev));
}

template struct GruCellParams<float>;
template struct GruCellParams<double>;
template Tensor<float> gru_cell_forward(const Tensor<float>&, const Tensor<float>&,
                                        const GruCellParams<float>&);
template Tensor<double> gru_cell_forward(const Tensor<double>&, const Tensor<double>&,
                                         const GruCellParams<double>&);

}  // namespace wm
