#pragma once

#include <string>

#include "wm/numerics/parameter.hpp"

namespace wm {

// GRU cell (Cho et al. 2014):
//   z  = sigmoid(x W_z + h U_z + b_z)
//   r  = sigmoid(x W_r + h U_r + b_r)
//   n  = tanh(x W_n + (r * h) U_n + b_n)
//   h' = (1 - z) * n + z * h
template <typename T>
struct GruCellParams {
  int input_size = 0;
  int hidden_size = 0;
  Parameter<T>* w_z = nullptr;
  Parameter<T>* u_z = nullptr;
  Parameter<T>* b_z = nullptr;
  Parameter<T>* w_r = nullptr;
  Parameter<T>* u_r = nullptr;
  Parameter<T>* b_r = nullptr;
  Parameter<T>* w_n = nullptr;
  Parameter<T>* u_n = nullptr;
  Parameter<T>* b_n = nullptr;

  static GruCellParams create(ParameterStore<T>& store, const std::string& prefix, int input_size,
                              int hidden_size, Rng& rng);
};

// x: batch x input_size, h_prev: batch x hidden_size.
template <typename T>
Tensor<T> gru_cell_forward(const Tensor<T>& x, const Tensor<T>& h_prev, const GruCellParams<T>& p);

extern template struct GruCellParams<float>;
extern template struct GruCellParams<double>;

}  // namespace wm
