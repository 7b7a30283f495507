#include "wm/numerics/parameter.hpp"

#include "wm/error.hpp"

namespace wm {

template <typename T>
Parameter<T>& ParameterStore<T>::add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                                     Init init, Rng& rng) {
  if (index_.count(name)) throw ContractError("duplicate parameter name '" + name + "'");
  Matrix<T> value = Matrix<T>::Zero(rows, cols);
  if (init == Init::Uniform) {
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      value.data()[i] = static_cast<T>(rng.uniform(-kInitRange, kInitRange));
    }
  }
  Parameter<T> p;
  p.name = name;
  p.tensor = Tensor<T>::leaf(std::move(value), true);
  p.adam_m = Matrix<T>::Zero(rows, cols);
  p.adam_v = Matrix<T>::Zero(rows, cols);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename T>
Parameter<T>& ParameterStore<T>::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return params_[it->second];
}

template <typename T>
const Parameter<T>& ParameterStore<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
  return params_[it->second];
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
std::size_t ParameterStore<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.tensor.size());
  return n;
}

template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace wm
