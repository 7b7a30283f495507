#include "wm/numerics/tensor.hpp"

#include <unordered_set>

#include "wm/error.hpp"

namespace wm {

namespace {
thread_local bool grad_mode_enabled = true;
}

bool GradMode::enabled() { return grad_mode_enabled; }
void GradMode::set_enabled(bool on) { grad_mode_enabled = on; }

template <typename T>
Tensor<T> Tensor<T>::constant(Matrix<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::leaf(Matrix<T> value, bool requires_grad) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  if (requires_grad) node->ensure_grad();
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Eigen::Index rows, Eigen::Index cols) {
  return constant(Matrix<T>::Zero(rows, cols));
}

template <typename T>
std::string Tensor<T>::shape_string() const {
  if (!node_) return "[undefined]";
  return "[" + std::to_string(rows()) + "x" + std::to_string(cols()) + "]";
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw DimensionError("item() on non-scalar tensor " + shape_string());
  return node_->value(0, 0);
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_->grad.size() != 0) node_->grad.setZero();
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() requires a scalar loss, got " + loss.shape_string());
  }
  Node<T>* root = loss.node();
  if (!root->requires_grad) return;

  // Iterative post-order DFS; graphs for a full poem are thousands of nodes deep.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad.array() += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && node->grad.size() != 0) node->backward(*node);
  }

  // Release the recorded graph; leaves keep their accumulated gradients.
  for (Node<T>* node : order) {
    if (node->is_leaf) continue;
    node->parents.clear();
    node->backward = nullptr;
    node->grad.resize(0, 0);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace wm
