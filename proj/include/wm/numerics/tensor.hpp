#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace wm {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Node {
  Matrix<T> value;
  // Allocated lazily by ensure_grad(); empty means "no gradient yet".
  Matrix<T> grad;
  bool requires_grad = false;
  // Leaves that outlive a backward pass (parameters) keep their gradient.
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() == 0) grad = Matrix<T>::Zero(value.rows(), value.cols());
  }
};

// Dynamic-graph tensor. Every op result records its parents and a backward
// closure while gradient recording is enabled; the graph is released when
// backward() completes or when the last handle goes out of scope.
//
// Shapes are always two-dimensional (rows x cols). Vectors are 1 x n rows.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor constant(Matrix<T> value);
  static Tensor leaf(Matrix<T> value, bool requires_grad);
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols);

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  Eigen::Index size() const { return node_->value.size(); }
  std::string shape_string() const;

  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  // Value of a 1x1 tensor.
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  const Matrix<T>& grad() const { return node_->grad; }
  Matrix<T>& mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad();

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Thread-local switch for graph recording, as in inference passes.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool on);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable leaf with requires_grad; the recorded graph is cleared afterwards.
template <typename T>
void backward(const Tensor<T>& loss);

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template void backward<float>(const Tensor<float>&);
extern template void backward<double>(const Tensor<double>&);

}  // namespace wm
