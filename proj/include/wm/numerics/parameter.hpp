#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "wm/numerics/rng.hpp"
#include "wm/numerics/tensor.hpp"

namespace wm {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;  // leaf, requires_grad
  Matrix<T> adam_m;
  Matrix<T> adam_v;
  std::int64_t step_count = 0;

  Eigen::Index rows() const { return tensor.rows(); }
  Eigen::Index cols() const { return tensor.cols(); }
};

enum class Init { Zeros, Uniform };

// Ordered registry of named parameters. Addresses of registered parameters
// stay valid for the life of the store.
template <typename T>
class ParameterStore {
 public:
  static constexpr double kInitRange = 0.08;

  Parameter<T>& add(const std::string& name, Eigen::Index rows, Eigen::Index cols, Init init,
                    Rng& rng);

  Parameter<T>& get(const std::string& name);
  const Parameter<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  std::size_t element_count() const;

 private:
  std::deque<Parameter<T>> params_;
  std::map<std::string, std::size_t> index_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace wm
