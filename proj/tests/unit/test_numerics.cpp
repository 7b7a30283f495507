#include <doctest.h>

#include <cmath>
#include <vector>

#include "wm/error.hpp"
#include "wm/numerics/adam.hpp"
#include "wm/numerics/gradient_check.hpp"
#include "wm/numerics/gru.hpp"
#include "wm/numerics/ops.hpp"

using namespace wm;

namespace {

using Md = Matrix<double>;

Md random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Md m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

Tensor<double> random_leaf(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  return Tensor<double>::leaf(random_matrix(rng, r, c, scale), true);
}

// Projects an op output to a scalar with fixed random weights so every
// output entry contributes a distinct gradient.
Tensor<double> project(const Tensor<double>& y, const Md& weights) {
  return sum(mul(y, Tensor<double>::constant(weights)));
}

void check_op(const char* label, std::vector<std::pair<std::string, Tensor<double>>> inputs,
              const std::function<Tensor<double>()>& op, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> probe;
  {
    NoGradGuard guard;
    probe = op();
  }
  const Md weights = random_matrix(rng, probe.rows(), probe.cols());
  GradCheckOptions opt;
  opt.epsilon = 1e-3;
  const auto report = gradient_check(inputs, [&] { return project(op(), weights); }, opt);
  INFO(label << " worst tensor " << report.worst_tensor << " rel err " << report.max_rel_error);
  CHECK(report.passed(1e-4));
}

// Independent scalar-loop GRU reference.
std::vector<double> gru_reference(const std::vector<double>& x, const std::vector<double>& h,
                                  const GruCellParams<double>& p) {
  const int in = p.input_size;
  const int hid = p.hidden_size;
  auto gate = [&](const Parameter<double>* w, const Parameter<double>* u,
                  const Parameter<double>* b, const std::vector<double>& hv, int j) {
    double acc = b->tensor.value()(0, j);
    for (int i = 0; i < in; ++i) acc += x[i] * w->tensor.value()(i, j);
    for (int i = 0; i < hid; ++i) acc += hv[i] * u->tensor.value()(i, j);
    return acc;
  };
  std::vector<double> z(hid), r(hid), rh(hid), out(hid);
  for (int j = 0; j < hid; ++j) {
    z[j] = 1.0 / (1.0 + std::exp(-gate(p.w_z, p.u_z, p.b_z, h, j)));
    r[j] = 1.0 / (1.0 + std::exp(-gate(p.w_r, p.u_r, p.b_r, h, j)));
  }
  for (int j = 0; j < hid; ++j) rh[j] = r[j] * h[j];
  for (int j = 0; j < hid; ++j) {
    const double n = std::tanh(gate(p.w_n, p.u_n, p.b_n, rh, j));
    out[j] = (1.0 - z[j]) * n + z[j] * h[j];
  }
  return out;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("linear forward examples") {
  Md x(1, 2);
  x << 1, 2;
  Tensor<double> y = linear(Tensor<double>::constant(x), Tensor<double>::constant(Md::Identity(2, 2)),
                            Tensor<double>());
  CHECK(y.value()(0, 0) == 1.0);
  CHECK(y.value()(0, 1) == 2.0);

  Md x2(1, 2), w(2, 2), b(1, 2);
  x2 << 1, 0;
  w << 2, 3, 4, 5;
  b << 1, 1;
  Tensor<double> y2 = linear(Tensor<double>::constant(x2), Tensor<double>::constant(w),
                             Tensor<double>::constant(b));
  CHECK(y2.value()(0, 0) == 3.0);
  CHECK(y2.value()(0, 1) == 4.0);

  Rng rng(3);
  Tensor<double> y3 = linear(Tensor<double>::zeros(1, 3), random_leaf(rng, 3, 4),
                             Tensor<double>::zeros(1, 4));
  CHECK(y3.value().isZero());

  CHECK_THROWS_AS(linear(Tensor<double>::zeros(1, 3), Tensor<double>::zeros(2, 2), Tensor<double>()),
                  DimensionError);
}

TEST_CASE("softmax examples and stability") {
  auto sm = [](std::initializer_list<double> v) {
    Md z(1, static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) z(0, i++) = x;
    return softmax(Tensor<double>::constant(z)).value();
  };
  Md a = sm({0, 0, 0});
  for (int i = 0; i < 3; ++i) CHECK(a(0, i) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  Md b = sm({std::log(2.0), 0});
  CHECK(b(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(b(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  Md c = sm({1000, 0});
  CHECK(c.allFinite());
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(c(0, 1) < 1e-300);

  Md nan(1, 2);
  nan << std::nan(""), 0;
  CHECK_THROWS_AS(softmax(Tensor<double>::constant(nan)), NumericError);
}

TEST_CASE("softmax property: positive and sums to one") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + rng.below(30));
    Tensor<float> z = Tensor<float>::constant(random_matrix(rng, 1, n, 50.0).cast<float>());
    Matrix<float> p = softmax(z).value();
    CHECK((p.array() > 0.0f).all());
    CHECK(std::abs(p.sum() - 1.0f) < 1e-6f);
  }
}

TEST_CASE("backward closed forms") {
  Md xv(1, 3);
  xv << 0.5, -2.0, 3.0;
  Tensor<double> w = Tensor<double>::leaf(Md::Constant(1, 3, 0.3), true);
  Tensor<double> loss = sum(mul(w, Tensor<double>::constant(xv)));
  backward(loss);
  CHECK((w.grad() - xv).cwiseAbs().maxCoeff() == 0.0);

  Tensor<double> logits = Tensor<double>::leaf(Md::Zero(1, 2), true);
  backward(cross_entropy(logits, 0));
  CHECK(logits.grad()(0, 0) == doctest::Approx(-0.5));
  CHECK(logits.grad()(0, 1) == doctest::Approx(0.5));

  CHECK_THROWS_AS(backward(mul(w, w)), ContractError);
}

TEST_CASE("backward releases the graph and leaves unreachable grads at zero") {
  Rng rng(5);
  Tensor<double> used = random_leaf(rng, 1, 3);
  Tensor<double> unused = random_leaf(rng, 1, 3);
  Tensor<double> mid = tanh(used);
  Tensor<double> loss = sum(mid);
  backward(loss);
  CHECK(mid.node()->parents.empty());
  CHECK(unused.grad().isZero());
  CHECK_FALSE(used.grad().isZero());
}

TEST_CASE("no-grad mode records nothing") {
  Rng rng(5);
  Tensor<double> a = random_leaf(rng, 2, 2);
  NoGradGuard guard;
  Tensor<double> b = tanh(a);
  CHECK_FALSE(b.requires_grad());
  CHECK(b.node()->parents.empty());
}

TEST_CASE("every op matches central finite differences (float64)") {
  Rng rng(42);
  auto a = random_leaf(rng, 3, 4);
  auto b = random_leaf(rng, 3, 4);
  auto w = random_leaf(rng, 4, 5);
  auto row = random_leaf(rng, 1, 4);
  auto row5 = random_leaf(rng, 1, 5);
  auto k = random_leaf(rng, 1, 3);
  auto table = random_leaf(rng, 6, 4);
  std::vector<int> ids = {2, 0, 2, 5};

  check_op("matmul", {{"a", a}, {"w", w}}, [&] { return matmul(a, w); }, 1);
  check_op("linear", {{"a", a}, {"w", w}, {"b", row5}}, [&] { return linear(a, w, row5); }, 2);
  check_op("add", {{"a", a}, {"b", b}}, [&] { return add(a, b); }, 3);
  check_op("sub", {{"a", a}, {"b", b}}, [&] { return sub(a, b); }, 4);
  check_op("mul", {{"a", a}, {"b", b}}, [&] { return mul(a, b); }, 5);
  check_op("add_bias", {{"a", a}, {"row", row}}, [&] { return add_bias(a, row); }, 6);
  check_op("scale", {{"a", a}}, [&] { return scale(a, -1.7); }, 7);
  check_op("add_scalar", {{"a", a}}, [&] { return add_scalar(a, 0.3); }, 8);
  check_op("one_minus", {{"a", a}}, [&] { return one_minus(a); }, 9);
  check_op("tanh", {{"a", a}}, [&] { return tanh(a); }, 10);
  check_op("sigmoid", {{"a", a}}, [&] { return sigmoid(a); }, 11);
  check_op("softmax", {{"a", a}}, [&] { return softmax(a); }, 12);
  check_op("log_softmax", {{"a", a}}, [&] { return log_softmax(a); }, 13);
  check_op("cross_entropy", {{"row5", row5}}, [&] { return cross_entropy(row5, 3); }, 14);
  check_op("subtract_row_max", {{"row5", row5}}, [&] { return subtract_row_max(row5); }, 15);
  check_op("concat_cols", {{"a", a}, {"b", b}}, [&] { return concat_cols({a, b}); }, 16);
  check_op("concat_rows", {{"a", a}, {"row", row}}, [&] { return concat_rows({a, row}); }, 17);
  check_op("slice_cols", {{"a", a}}, [&] { return slice_cols(a, 1, 2); }, 18);
  check_op("slice_rows", {{"a", a}}, [&] { return slice_rows(a, 1, 2); }, 19);
  check_op("set_rows", {{"a", a}, {"row", row}}, [&] { return set_rows(a, 1, row); }, 20);
  check_op("gather_rows", {{"table", table}}, [&] { return gather_rows(table, std::span<const int>(ids)); }, 21);
  check_op("mean_rows", {{"a", a}}, [&] { return mean_rows(a); }, 22);
  check_op("sum", {{"a", a}}, [&] { return sum(a); }, 23);
  check_op("transpose", {{"a", a}}, [&] { return transpose(a); }, 24);
  check_op("scale_rows", {{"a", a}, {"k", k}}, [&] { return scale_rows(a, k); }, 25);
  check_op("composite", {{"a", a}, {"w", w}, {"row5", row5}},
           [&] { return softmax(add_bias(tanh(matmul(a, w)), row5)); }, 26);
}

TEST_CASE("gru: zero parameters keep the zero state") {
  Rng rng(1);
  ParameterStore<double> store;
  auto p = GruCellParams<double>::create(store, "gru", 3, 4, rng);
  for (auto& param : store) param.tensor.mutable_value().setZero();
  Tensor<double> h = gru_cell_forward(Tensor<double>::constant(random_matrix(rng, 2, 3)),
                                      Tensor<double>::zeros(2, 4), p);
  CHECK(h.value().isZero());
}

TEST_CASE("gru: saturated update gate copies the previous state") {
  Rng rng(2);
  ParameterStore<double> store;
  auto p = GruCellParams<double>::create(store, "gru", 3, 4, rng);
  p.b_z->tensor.mutable_value().setConstant(1e3);
  Md h_prev = random_matrix(rng, 2, 4, 0.9);
  Tensor<double> h = gru_cell_forward(Tensor<double>::constant(random_matrix(rng, 2, 3)),
                                      Tensor<double>::constant(h_prev), p);
  CHECK((h.value() - h_prev).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("gru: matches scalar-loop reference") {
  Rng rng(3);
  ParameterStore<float> store;
  auto p = GruCellParams<float>::create(store, "gru", 3, 5, rng);
  for (auto& param : store) {
    param.tensor.mutable_value() = random_matrix(rng, param.rows(), param.cols(), 0.5).cast<float>();
  }
  ParameterStore<double> dstore;
  auto dp = GruCellParams<double>::create(dstore, "gru", 3, 5, rng);
  for (auto& param : dstore) {
    param.tensor.mutable_value() = store.get(param.name).tensor.value().cast<double>();
  }
  const Md x = random_matrix(rng, 2, 3);
  const Md h = random_matrix(rng, 2, 5, 0.9);
  Tensor<float> out = gru_cell_forward(Tensor<float>::constant(x.cast<float>()),
                                       Tensor<float>::constant(h.cast<float>()), p);
  for (int row = 0; row < 2; ++row) {
    std::vector<double> xv(3), hv(5);
    for (int i = 0; i < 3; ++i) xv[i] = static_cast<float>(x(row, i));
    for (int i = 0; i < 5; ++i) hv[i] = static_cast<float>(h(row, i));
    auto ref = gru_reference(xv, hv, dp);
    for (int j = 0; j < 5; ++j) CHECK(std::abs(out.value()(row, j) - ref[j]) < 1e-5);
    for (int j = 0; j < 5; ++j) CHECK(std::abs(out.value()(row, j)) < 1.0f);
  }
  CHECK_THROWS_AS(gru_cell_forward(Tensor<float>::zeros(1, 4), Tensor<float>::zeros(1, 5), p),
                  DimensionError);
}

TEST_CASE("gradient_check: linear+softmax toy and one GRU step") {
  Rng rng(9);
  ParameterStore<double> store;
  auto& w = store.add("w", 4, 3, Init::Uniform, rng);
  auto& b = store.add("b", 1, 3, Init::Uniform, rng);
  const Md x = random_matrix(rng, 1, 4);
  auto toy = [&] {
    return cross_entropy(linear(Tensor<double>::constant(x), w.tensor, b.tensor), 1);
  };
  CHECK(gradient_check(store, toy).passed(1e-4));

  ParameterStore<double> gstore;
  auto p = GruCellParams<double>::create(gstore, "gru", 3, 4, rng);
  for (auto& param : gstore) param.tensor.mutable_value() = random_matrix(rng, param.rows(), param.cols(), 0.5);
  const Md gx = random_matrix(rng, 1, 3);
  const Md gh = random_matrix(rng, 1, 4, 0.5);
  auto gru_loss = [&] {
    return cross_entropy(gru_cell_forward(Tensor<double>::constant(gx), Tensor<double>::constant(gh), p), 2);
  };
  const auto report = gradient_check(gstore, gru_loss);
  INFO("worst " << report.worst_tensor << " " << report.max_rel_error);
  CHECK(report.passed(1e-4));
}

TEST_CASE("gradient_check rejects non-deterministic closures") {
  Rng rng(1);
  ParameterStore<double> store;
  auto& w = store.add("w", 1, 3, Init::Uniform, rng);
  Rng noise(2);
  auto flaky = [&] {
    return sum(add_scalar(w.tensor, noise.uniform()));
  };
  CHECK_THROWS_AS(gradient_check(store, flaky), ContractError);
}

TEST_CASE("adam: zero gradient leaves parameters bit-identical") {
  Rng rng(4);
  ParameterStore<float> store;
  store.add("w", 3, 3, Init::Uniform, rng);
  const Matrix<float> before = store.get("w").tensor.value();
  adam_step(store, AdamOptions{});
  adam_step(store, AdamOptions{});
  CHECK((store.get("w").tensor.value().array() == before.array()).all());
}

TEST_CASE("adam: first step with unit gradient moves by lr") {
  Rng rng(4);
  ParameterStore<double> store;
  auto& p = store.add("p", 1, 1, Init::Zeros, rng);
  p.tensor.mutable_value()(0, 0) = 0.5;
  p.tensor.mutable_grad()(0, 0) = 1.0;
  adam_step(store, AdamOptions{});
  // m_hat / sqrt(v_hat) = 1, so the step is lr * 1 / (1 + eps).
  CHECK(p.tensor.value()(0, 0) == doctest::Approx(0.5 - 0.001).epsilon(1e-9));
  CHECK(p.tensor.grad()(0, 0) == 0.0);
  CHECK(p.step_count == 1);
}

TEST_CASE("adam: l2 shrinks a parameter with zero gradient") {
  Rng rng(4);
  ParameterStore<double> store;
  auto& p = store.add("p", 1, 2, Init::Zeros, rng);
  p.tensor.mutable_value() << 2.0, -2.0;
  AdamOptions opt;
  opt.l2 = 1e-2;
  adam_step(store, opt);
  // Effective gradient l2 * p; the first bias-corrected step is lr * sign(p).
  CHECK(p.tensor.value()(0, 0) == doctest::Approx(2.0 - 0.001).epsilon(1e-9));
  CHECK(p.tensor.value()(0, 1) == doctest::Approx(-2.0 + 0.001).epsilon(1e-9));
}

TEST_CASE("gradient clipping bounds the global norm") {
  Rng rng(4);
  ParameterStore<float> store;
  auto& a = store.add("a", 2, 2, Init::Zeros, rng);
  auto& b = store.add("b", 1, 3, Init::Zeros, rng);
  a.tensor.mutable_grad().setConstant(10.0f);
  b.tensor.mutable_grad().setConstant(-7.0f);
  const double before = global_grad_norm(store);
  CHECK(before == doctest::Approx(std::sqrt(4 * 100.0 + 3 * 49.0)));
  const double after = clip_grad_norm(store, 5.0);
  CHECK(after <= 5.0);
  CHECK(after == doctest::Approx(5.0).epsilon(1e-5));
  CHECK(clip_grad_norm(store, 5.0) <= 5.0);
}

TEST_CASE("dropout") {
  Rng rng(1234);
  Tensor<float> ones = Tensor<float>::constant(Matrix<float>::Ones(1, 100000));
  CHECK((dropout(ones, 0.0, true, rng).value().array() == 1.0f).all());
  CHECK((dropout(ones, 0.25, false, rng).value().array() == 1.0f).all());
  Matrix<float> out = dropout(ones, 0.25, true, rng).value();
  const double mean = out.cast<double>().mean();
  const double zero_fraction = (out.array() == 0.0f).cast<double>().mean();
  CHECK(std::abs(mean - 1.0) < 0.01);
  CHECK(std::abs(zero_fraction - 0.25) < 0.01);
  CHECK_THROWS_AS(dropout(ones, 1.0, true, rng), ConfigError);
}

TEST_CASE("rng state round-trips") {
  Rng a(77);
  a.next_u64();
  Rng b(0);
  b.deserialize(a.serialize());
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.below(10) < 10);
}

}  // TEST_SUITE
