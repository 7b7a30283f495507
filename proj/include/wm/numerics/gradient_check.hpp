#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wm/numerics/parameter.hpp"

namespace wm {

enum class Stencil {
  Central,    // (f(x+h) - f(x-h)) / 2h
  FivePoint,  // fourth-order central difference
};

struct GradCheckOptions {
  double epsilon = 1e-3;
  Stencil stencil = Stencil::Central;
  // 0 checks every entry; otherwise a seeded sample of this many per tensor.
  std::size_t max_entries_per_tensor = 0;
  std::uint64_t sample_seed = 7;
};

struct TensorCheck {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  Eigen::Index worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  std::string worst_tensor;

  bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

using LossClosure = std::function<Tensor<double>()>;

// Compares reverse-mode gradients of `closure` against finite differences.
// Relative error is |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-8).
// Throws ContractError when two evaluations of the closure disagree.
GradCheckReport gradient_check(const std::vector<std::pair<std::string, Tensor<double>>>& leaves,
                               const LossClosure& closure, const GradCheckOptions& options = {});

GradCheckReport gradient_check(ParameterStore<double>& params, const LossClosure& closure,
                               const GradCheckOptions& options = {});

}  // namespace wm
