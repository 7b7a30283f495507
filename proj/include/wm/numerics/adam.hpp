#pragma once

#include "wm/numerics/parameter.hpp"

namespace wm {

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double l2 = 0.0;
};

// One Adam update with bias correction over every parameter in the store.
// The L2 term (l2 * p) is added to the gradient before the moment updates.
// Gradients are zeroed afterwards.
template <typename T>
void adam_step(ParameterStore<T>& params, const AdamOptions& opt);

// Global L2 norm of all gradients.
template <typename T>
double global_grad_norm(const ParameterStore<T>& params);

// Rescales gradients so their global norm is at most max_norm. Returns the
// post-clip norm.
template <typename T>
double clip_grad_norm(ParameterStore<T>& params, double max_norm);

}  // namespace wm
