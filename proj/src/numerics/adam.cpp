#include "wm/numerics/adam.hpp"

#include <cmath>

namespace wm {

template <typename T>
void adam_step(ParameterStore<T>& params, const AdamOptions& opt) {
  const T beta1 = static_cast<T>(opt.beta1);
  const T beta2 = static_cast<T>(opt.beta2);
  const T eps = static_cast<T>(opt.eps);
  const T l2 = static_cast<T>(opt.l2);
  for (auto& p : params) {
    p.step_count += 1;
    Matrix<T>& value = p.tensor.mutable_value();
    Matrix<T>& grad = p.tensor.mutable_grad();
    if (opt.l2 != 0.0) grad.noalias() += l2 * value;
    p.adam_m = beta1 * p.adam_m + (T(1) - beta1) * grad;
    p.adam_v = beta2 * p.adam_v + (T(1) - beta2) * grad.cwiseAbs2();
    const double t = static_cast<double>(p.step_count);
    const T m_corr = static_cast<T>(1.0 / (1.0 - std::pow(opt.beta1, t)));
    const T v_corr = static_cast<T>(1.0 / (1.0 - std::pow(opt.beta2, t)));
    const T lr = static_cast<T>(opt.lr);
    value.array() -= lr * (p.adam_m.array() * m_corr) /
                     ((p.adam_v.array() * v_corr).sqrt() + eps);
    grad.setZero();
  }
}

template <typename T>
double global_grad_norm(const ParameterStore<T>& params) {
  double total = 0.0;
  for (const auto& p : params) {
    if (p.tensor.has_grad()) total += p.tensor.grad().template cast<double>().squaredNorm();
  }
  return std::sqrt(total);
}

template <typename T>
double clip_grad_norm(ParameterStore<T>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return norm;
  // The small offset keeps the rescaled norm strictly under max_norm after rounding.
  const T factor = static_cast<T>(max_norm / (norm + 1e-6));
  for (auto& p : params) {
    if (p.tensor.has_grad()) p.tensor.mutable_grad() *= factor;
  }
  return global_grad_norm(params);
}

template void adam_step(ParameterStore<float>&, const AdamOptions&);
template void adam_step(ParameterStore<double>&, const AdamOptions&);
template double global_grad_norm(const ParameterStore<float>&);
template double global_grad_norm(const ParameterStore<double>&);
template double clip_grad_norm(ParameterStore<float>&, double);
template double clip_grad_norm(ParameterStore<double>&, double);

}  // namespace wm
