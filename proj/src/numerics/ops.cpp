#include "wm/numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include "wm/error.hpp"

namespace wm {

namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
Tensor<T> record(Matrix<T> value, std::vector<NodePtr<T>> parents,
                 std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->is_leaf = false;
  if (GradMode::enabled()) {
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const NodePtr<T>& p) { return p->requires_grad; });
    if (any) {
      node->requires_grad = true;
      node->parents = std::move(parents);
      node->backward = std::move(backward_fn);
    }
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Matrix<T>* grad_of(Node<T>& parent) {
  if (!parent.requires_grad) return nullptr;
  parent.ensure_grad();
  return &parent.grad;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

template <typename T>
void require_row_vector(const Tensor<T>& x, const char* op) {
  if (x.rows() != 1) throw DimensionError(std::string(op) + ": expected a 1 x n row, got " + x.shape_string());
}

template <typename T>
void check_finite(const Matrix<T>& m, const char* op) {
  if (!m.allFinite()) throw NumericError(std::string(op) + ": non-finite input");
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix<T> out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  return record<T>(std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node<T>& self) {
    Node<T>& pa = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    if (auto* ga = grad_of(pa)) ga->noalias() += self.grad * pb.value.transpose();
    if (auto* gb = grad_of(pb)) gb->noalias() += pa.value.transpose() * self.grad;
  });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.cols() != w.rows()) {
    throw DimensionError("linear: input " + x.shape_string() + " vs weight " + w.shape_string());
  }
  Tensor<T> y = matmul(x, w);
  if (!b.defined()) return y;
  if (b.rows() != 1 || b.cols() != w.cols()) {
    throw DimensionError("linear: bias " + b.shape_string() + " vs weight " + w.shape_string());
  }
  return add_bias(y, b);
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  return record<T>(a.value() + b.value(), {a.node_ptr(), b.node_ptr()}, [](Node<T>& self) {
    if (auto* ga = grad_of(*self.parents[0])) *ga += self.grad;
    if (auto* gb = grad_of(*self.parents[1])) *gb += self.grad;
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  return record<T>(a.value() - b.value(), {a.node_ptr(), b.node_ptr()}, [](Node<T>& self) {
    if (auto* ga = grad_of(*self.parents[0])) *ga += self.grad;
    if (auto* gb = grad_of(*self.parents[1])) *gb -= self.grad;
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Matrix<T> out = a.value().cwiseProduct(b.value());
  return record<T>(std::move(out), {a.node_ptr(), b.node_ptr()}, [](Node<T>& self) {
    Node<T>& pa = *self.parents[0];
    Node<T>& pb = *self.parents[1];
    if (auto* ga = grad_of(pa)) *ga += self.grad.cwiseProduct(pb.value);
    if (auto* gb = grad_of(pb)) *gb += self.grad.cwiseProduct(pa.value);
  });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw DimensionError("add_bias: " + x.shape_string() + " + " + bias.shape_string());
  }
  Matrix<T> out = x.value().rowwise() + bias.value().row(0);
  return record<T>(std::move(out), {x.node_ptr(), bias.node_ptr()}, [](Node<T>& self) {
    if (auto* gx = grad_of(*self.parents[0])) *gx += self.grad;
    if (auto* gb = grad_of(*self.parents[1])) *gb += self.grad.colwise().sum();
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return record<T>(x.value() * factor, {x.node_ptr()}, [factor](Node<T>& self) {
    if (auto* gx = grad_of(*self.parents[0])) *gx += self.grad * factor;
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  Matrix<T> out = x.value().array() + value;
  return record<T>(std::move(out), {x.node_ptr()}, [](Node<T>& self) {
    if (auto* gx = grad_of(*self.parents[0])) *gx += self.grad;
  });
}

template <typename T>
Tensor<T> one_minus(const Tensor<T>& x) {
  Matrix<T> out = (T(1) - x.value().array()).matrix();
  return record<T>(std::move(out), {x.node_ptr()}, [](Node<T>& self) {
    if (auto* gx = grad_of(*self.parents[0])) *gx -= self.grad;
  });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  Matrix<T> out = x.value().array().tanh().matrix();
  return record<T>(std::move(out), {x.node_ptr()}, [](Node<T>& self) {
    if (auto* gx = grad_of(*self.parents[0])) {
      gx->array() += self.grad.array() * (T(1) - self.value.array().square());
    }
  });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Matrix<T> out = (T(1) / (T(1) + (-x.value().array()).exp())).matrix();
  return record<T>(std::move(out), {x.node_ptr()}, [](Node<T>& self) {
    if (auto* gx = grad_of(*self.parents[0])) {
      gx->array() += self.grad.array() * self.value.array() * (T(1) - self.value.array());
    }
  });
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& z) {
  if (z.cols() < 1) throw DimensionError("softmax: empty input");
  check_finite(z.value(), "softmax");
  Matrix<T> out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const T m = z.value().row(r).maxCoeff();
    out.row(r) = (z.value().row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return record<T>(std::move(out), {z.node_ptr()}, [](Node<T>& self) {
    if (auto* gz = grad_of(*self.parents[0])) {
      for (Eigen::Index r = 0; r < self.value.rows(); ++r) {
        const T dot = self.grad.row(r).dot(self.value.row(r));
        gz->row(r).array() += self.value.row(r).array() * (self.grad.row(r).array() - dot);
      }
    }
  });
}

template <typename T>
Tensor<T> log_softmax(const Tensor<T>& z) {
  if (z.cols() < 1) throw DimensionError("log_softmax: empty input");
  check_finite(z.value(), "log_softmax");
  Matrix<T> out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const T m = z.value().row(r).maxCoeff();
    const T lse = m + std::log((z.value().row(r).array() - m).exp().sum());
    out.row(r) = (z.value().row(r).array() - lse).matrix();
  }
  return record<T>(std::move(out), {z.node_ptr()}, [](Node<T>& self) {
    if (auto* gz = grad_of(*self.parents[0])) {
      for (Eigen::Index r = 0; r < self.value.rows(); ++r) {
        const T total = self.grad.row(r).sum();
        gz->row(r).array() += self.grad.row(r).array() - self.value.row(r).array().exp() * total;
      }
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, int target) {
  require_row_vector(logits, "cross_entropy");
  if (target < 0 || target >= logits.cols()) {
    throw DimensionError("cross_entropy: target " + std::to_string(target) + " outside " +
                         logits.shape_string());
  }
  check_finite(logits.value(), "cross_entropy");
  const auto row = logits.value().row(0).array();
  const T m = row.maxCoeff();
  Matrix<T> probs = (row - m).exp().matrix();
  const T total = probs.sum();
  probs /= total;
  Matrix<T> out(1, 1);
  out(0, 0) = -(row(target) - m - std::log(total));
  return record<T>(std::move(out), {logits.node_ptr()},
                   [probs = std::move(probs), target](Node<T>& self) {
                     if (auto* gz = grad_of(*self.parents[0])) {
                       const T g = self.grad(0, 0);
                       *gz += probs * g;
                       (*gz)(0, target) -= g;
                     }
                   });
}

template <typename T>
Tensor<T> subtract_row_max(const Tensor<T>& x) {
  require_row_vector(x, "subtract_row_max");
  Eigen::Index arg = 0;
  // Ties resolve to the lowest index.
  const T m = x.value().row(0).maxCoeff(&arg);
  Matrix<T> out = (x.value().array() - m).matrix();
  return record<T>(std::move(out), {x.node_ptr()}, [arg](Node<T>& self) {
    if (auto* gx = grad_of(*self.parents[0])) {
      *gx += self.grad;
      (*gx)(0, arg) -= self.grad.sum();
    }
  });
}

template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw DimensionError("concat_cols: row mismatch " + p.shape_string());
    cols += p.cols();
  }
  Matrix<T> out(rows, cols);
  std::vector<NodePtr<T>> parents;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    offsets.push_back(at);
    parents.push_back(p.node_ptr());
    at += p.cols();
  }
  return record<T>(std::move(out), std::move(parents), [offsets](Node<T>& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node<T>& p = *self.parents[i];
      if (auto* g = grad_of(p)) *g += self.grad.middleCols(offsets[i], p.value.cols());
    }
  });
}

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionError("concat_rows: column mismatch " + p.shape_string());
    rows += p.rows();
  }
  Matrix<T> out(rows, cols);
  std::vector<NodePtr<T>> parents;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    offsets.push_back(at);
    parents.push_back(p.node_ptr());
    at += p.rows();
  }
  return record<T>(std::move(out), std::move(parents), [offsets](Node<T>& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node<T>& p = *self.parents[i];
      if (auto* g = grad_of(p)) *g += self.grad.middleRows(offsets[i], p.value.rows());
    }
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") of " + x.shape_string());
  }
  Matrix<T> out = x.value().middleCols(start, count);
  return record<T>(std::move(out), {x.node_ptr()}, [start, count](Node<T>& self) {
    if (auto* g = grad_of(*self.parents[0])) g->middleCols(start, count) += self.grad;
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", +" + std::to_string(count) +
                         ") of " + x.shape_string());
  }
  Matrix<T> out = x.value().middleRows(start, count);
  return record<T>(std::move(out), {x.node_ptr()}, [start, count](Node<T>& self) {
    if (auto* g = grad_of(*self.parents[0])) g->middleRows(start, count) += self.grad;
  });
}

template <typename T>
Tensor<T> set_rows(const Tensor<T>& x, Eigen::Index start, const Tensor<T>& r) {
  if (r.cols() != x.cols() || start < 0 || start + r.rows() > x.rows()) {
    throw DimensionError("set_rows: " + r.shape_string() + " at row " + std::to_string(start) +
                         " of " + x.shape_string());
  }
  Matrix<T> out = x.value();
  out.middleRows(start, r.rows()) = r.value();
  const Eigen::Index count = r.rows();
  return record<T>(std::move(out), {x.node_ptr(), r.node_ptr()}, [start, count](Node<T>& self) {
    if (auto* gx = grad_of(*self.parents[0])) {
      *gx += self.grad;
      gx->middleRows(start, count) -= self.grad.middleRows(start, count);
    }
    if (auto* gr = grad_of(*self.parents[1])) *gr += self.grad.middleRows(start, count);
  });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& table, std::span<const int> ids) {
  Matrix<T> out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw DimensionError("gather_rows: id " + std::to_string(ids[i]) + " outside table " +
                           table.shape_string());
    }
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return record<T>(std::move(out), {table.node_ptr()}, [idx = std::move(idx)](Node<T>& self) {
    if (auto* g = grad_of(*self.parents[0])) {
      for (std::size_t i = 0; i < idx.size(); ++i) {
        g->row(idx[i]) += self.grad.row(static_cast<Eigen::Index>(i));
      }
    }
  });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  if (x.rows() < 1) throw DimensionError("mean_rows: no rows");
  Matrix<T> out = x.value().colwise().mean();
  return record<T>(std::move(out), {x.node_ptr()}, [](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (auto* g = grad_of(p)) {
      const T inv = T(1) / static_cast<T>(p.value.rows());
      g->rowwise() += self.grad.row(0) * inv;
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  Matrix<T> out(1, 1);
  out(0, 0) = x.value().sum();
  return record<T>(std::move(out), {x.node_ptr()}, [](Node<T>& self) {
    if (auto* g = grad_of(*self.parents[0])) g->array() += self.grad(0, 0);
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  Matrix<T> out = x.value().transpose();
  return record<T>(std::move(out), {x.node_ptr()}, [](Node<T>& self) {
    if (auto* g = grad_of(*self.parents[0])) *g += self.grad.transpose();
  });
}

template <typename T>
Tensor<T> scale_rows(const Tensor<T>& x, const Tensor<T>& w) {
  if (w.rows() != 1 || w.cols() != x.rows()) {
    throw DimensionError("scale_rows: weights " + w.shape_string() + " for " + x.shape_string());
  }
  Matrix<T> out = w.value().row(0).transpose().asDiagonal() * x.value();
  return record<T>(std::move(out), {x.node_ptr(), w.node_ptr()}, [](Node<T>& self) {
    Node<T>& px = *self.parents[0];
    Node<T>& pw = *self.parents[1];
    if (auto* gx = grad_of(px)) gx->noalias() += pw.value.row(0).transpose().asDiagonal() * self.grad;
    if (auto* gw = grad_of(pw)) {
      gw->row(0) += self.grad.cwiseProduct(px.value).rowwise().sum().transpose();
    }
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  Matrix<T> mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.bernoulli(rate) ? T(0) : keep_scale;
  }
  return mul(x, Tensor<T>::constant(std::move(mask)));
}

template <typename T>
Tensor<T> detach(const Tensor<T>& x) {
  return Tensor<T>::constant(x.value());
}

#define WM_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> scale(const Tensor<T>&, T);                                               \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                          \
  template Tensor<T> one_minus(const Tensor<T>&);                                              \
  template Tensor<T> tanh(const Tensor<T>&);                                                   \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                \
  template Tensor<T> softmax(const Tensor<T>&);                                                \
  template Tensor<T> log_softmax(const Tensor<T>&);                                            \
  template Tensor<T> cross_entropy(const Tensor<T>&, int);                                     \
  template Tensor<T> subtract_row_max(const Tensor<T>&);                                       \
  template Tensor<T> concat_cols(std::span<const Tensor<T>>);                                  \
  template Tensor<T> concat_rows(std::span<const Tensor<T>>);                                  \
  template Tensor<T> slice_cols(const Tensor<T>&, Eigen::Index, Eigen::Index);                 \
  template Tensor<T> slice_rows(const Tensor<T>&, Eigen::Index, Eigen::Index);                 \
  template Tensor<T> set_rows(const Tensor<T>&, Eigen::Index, const Tensor<T>&);               \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const int>);                      \
  template Tensor<T> mean_rows(const Tensor<T>&);                                              \
  template Tensor<T> sum(const Tensor<T>&);                                                    \
  template Tensor<T> transpose(const Tensor<T>&);                                              \
  template Tensor<T> scale_rows(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng&);                            \
  template Tensor<T> detach(const Tensor<T>&);

WM_INSTANTIATE_OPS(float)
WM_INSTANTIATE_OPS(double)

#undef WM_INSTANTIATE_OPS

}  // namespace wm
