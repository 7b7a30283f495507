#include "wm/numerics/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wm/error.hpp"

namespace wm {

namespace {

double evaluate(const LossClosure& closure) {
  NoGradGuard guard;
  Tensor<double> loss = closure();
  if (loss.size() != 1) throw ContractError("gradient_check: closure must return a scalar");
  return loss.item();
}

double numeric_derivative(const LossClosure& closure, double& entry, const GradCheckOptions& opt) {
  const double original = entry;
  const double h = opt.epsilon;
  auto at = [&](double offset) {
    entry = original + offset;
    const double v = evaluate(closure);
    entry = original;
    return v;
  };
  if (opt.stencil == Stencil::Central) return (at(h) - at(-h)) / (2.0 * h);
  return (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h);
}

}  // namespace

GradCheckReport gradient_check(const std::vector<std::pair<std::string, Tensor<double>>>& leaves,
                               const LossClosure& closure, const GradCheckOptions& options) {
  for (const auto& [name, t] : leaves) {
    if (!t.requires_grad()) throw ContractError("gradient_check: '" + name + "' does not require grad");
  }
  for (auto [name, t] : leaves) t.zero_grad();

  Tensor<double> loss = closure();
  if (loss.size() != 1) throw ContractError("gradient_check: closure must return a scalar");
  const double first = loss.item();
  const double second = evaluate(closure);
  if (first != second) {
    throw ContractError("gradient_check: closure is not deterministic (" + std::to_string(first) +
                        " vs " + std::to_string(second) + ")");
  }
  backward(loss);

  GradCheckReport report;
  Rng sampler(options.sample_seed);
  for (auto [name, t] : leaves) {
    const Matrix<double> analytic =
        t.has_grad() ? t.grad() : Matrix<double>::Zero(t.rows(), t.cols());
    std::vector<Eigen::Index> entries(static_cast<std::size_t>(t.size()));
    std::iota(entries.begin(), entries.end(), Eigen::Index{0});
    if (options.max_entries_per_tensor != 0 && entries.size() > options.max_entries_per_tensor) {
      sampler.shuffle(entries);
      entries.resize(options.max_entries_per_tensor);
      std::sort(entries.begin(), entries.end());
    }
    TensorCheck check;
    check.name = name;
    for (Eigen::Index i : entries) {
      double& entry = t.mutable_value().data()[i];
      const double numeric = numeric_derivative(closure, entry, options);
      const double ad = analytic.data()[i];
      const double denom = std::max({std::abs(ad), std::abs(numeric), 1e-8});
      const double rel = std::abs(ad - numeric) / denom;
      ++check.checked;
      if (rel > check.max_rel_error || check.worst_index < 0) {
        check.max_rel_error = rel;
        check.worst_index = i;
        check.analytic_at_worst = ad;
        check.numeric_at_worst = numeric;
      }
    }
    if (check.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = check.max_rel_error;
      report.worst_tensor = name;
    }
    report.tensors.push_back(std::move(check));
  }
  for (auto [name, t] : leaves) t.zero_grad();
  return report;
}

GradCheckReport gradient_check(ParameterStore<double>& params, const LossClosure& closure,
                               const GradCheckOptions& options) {
  std::vector<std::pair<std::string, Tensor<double>>> leaves;
  for (auto& p : params) leaves.emplace_back(p.name, p.tensor);
  return gradient_check(leaves, closure, options);
}

}  // namespace wm
