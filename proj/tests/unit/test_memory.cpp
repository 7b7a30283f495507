#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <tuple>

#include "wm/error.hpp"
#include "wm/memory/working_memory.hpp"
#include "wm/numerics/gradient_check.hpp"
#include "wm/numerics/ops.hpp"

using namespace wm;

namespace {

using Md = Matrix<double>;
using Td = Tensor<double>;

Md random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Md m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

int changed_rows(const Md& a, const Md& b) {
  int n = 0;
  for (Eigen::Index r = 0; r < a.rows(); ++r) n += (a.row(r).array() != b.row(r).array()).any() ? 1 : 0;
  return n;
}

// Addressing with a single address unit whose activation reads feature 0 of
// each slot; a large score makes the softmax effectively one-hot.
struct ForcedAddressing {
  ParameterStore<double> store;
  AddressingParams<double> params;

  ForcedAddressing(int slot_dim, int query_dim, double score) {
    Rng rng(1);
    params = AddressingParams<double>::create(store, "A", slot_dim, query_dim, 1, rng);
    params.w_mem->tensor.mutable_value().setZero();
    params.w_mem->tensor.mutable_value()(0, 0) = 10.0;
    params.w_query->tensor.mutable_value().setZero();
    params.score->tensor.mutable_value()(0, 0) = score;
  }
};

}  // namespace

TEST_SUITE("memory") {

TEST_CASE("init_memory is zero and unoccupied") {
  auto m = init_memory<float>(4, 4, 9, 1024);
  CHECK(m.slots.rows() == 17);
  CHECK(m.slots.cols() == 1024);
  CHECK(m.slots.value().cwiseAbs().sum() == 0.0f);
  CHECK(std::none_of(m.occupied.begin(), m.occupied.end(), [](bool b) { return b; }));
  CHECK(m.segment_of(0) == "topic");
  CHECK(m.segment_of(4) == "history");
  CHECK(m.segment_of(16) == "local");
  CHECK_THROWS_AS(init_memory<float>(-1, 0, 0, 4), ConfigError);
}

TEST_CASE("address examples") {
  ParameterStore<double> store;
  Rng rng(3);
  auto p = AddressingParams<double>::create(store, "A", 6, 5, 4, rng);
  Td q = Td::constant(random_matrix(rng, 1, 5));

  SUBCASE("single row gives [1]") {
    Td a = address(Td::constant(random_matrix(rng, 1, 6)), q, p, {true}, rng, 0.05);
    CHECK(a.value()(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("identical occupied rows give uniform weights") {
    Md row = random_matrix(rng, 1, 6);
    Md rows = row.replicate(3, 1);
    Td a = address(Td::constant(rows), q, p, {true, true, true}, rng, 0.05);
    for (int k = 0; k < 3; ++k) CHECK(a.value()(0, k) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }
  SUBCASE("unoccupied rows are separated by the random bias") {
    Td a = address(Td::zeros(2, 6), q, p, {false, false}, rng, 0.05);
    CHECK(a.value()(0, 0) != a.value()(0, 1));
  }
  SUBCASE("empty memory is a contract error") {
    CHECK_THROWS_AS(address(Td::zeros(0, 6), q, p, {}, rng, 0.05), ContractError);
  }
  SUBCASE("a constant shift of every score leaves alpha and its argmax unchanged") {
    Td rows = Td::constant(random_matrix(rng, 5, 6));
    std::vector<bool> empty(5, false);
    std::vector<double> bias = draw_slot_bias(5, 0.05, rng);
    std::vector<double> shifted = bias;
    for (auto& b : shifted) b += 3.7;
    Td a = address_projected(p.project(rows), q, p, empty, bias);
    Td b = address_projected(p.project(rows), q, p, empty, shifted);
    Eigen::Index ia = 0, ib = 0;
    a.value().row(0).maxCoeff(&ia);
    b.value().row(0).maxCoeff(&ib);
    CHECK(ia == ib);
    CHECK((a.value() - b.value()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("address and read invariants over 1000 random trials") {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int k1 = static_cast<int>(rng.below(4)) + 1;
    const int k2 = static_cast<int>(rng.below(5));
    const int k3 = static_cast<int>(rng.below(5)) + 1;
    const int d = static_cast<int>(rng.below(6)) + 2;
    const int qd = static_cast<int>(rng.below(6)) + 1;
    ParameterStore<double> store;
    auto p = AddressingParams<double>::create(store, "R", d, qd, 3, rng);
    p.score->tensor.mutable_value() = random_matrix(rng, 3, 1, 5.0);
    auto m = init_memory<double>(k1, k2, k3, d);
    m.slots = Td::constant(random_matrix(rng, m.size(), d, 3.0));
    for (std::size_t k = 0; k < m.occupied.size(); ++k) m.occupied[k] = rng.bernoulli(0.5);
    Td q = Td::constant(random_matrix(rng, 1, qd, 3.0));

    auto r = read_memory(m, q, p, rng, 0.05);
    REQUIRE(r.alpha.cols() == m.size());
    CHECK(r.alpha.value().minCoeff() >= 0.0);
    CHECK(std::abs(r.alpha.value().sum() - 1.0) < 1e-6);
    const Md& s = m.slots.value();
    for (int j = 0; j < d; ++j) {
      CHECK(r.output.value()(0, j) >= s.col(j).minCoeff() - 1e-12);
      CHECK(r.output.value()(0, j) <= s.col(j).maxCoeff() + 1e-12);
    }
  }
}

TEST_CASE("read examples") {
  SUBCASE("all-zero memory reads zero") {
    ParameterStore<double> store;
    Rng rng(5);
    auto p = AddressingParams<double>::create(store, "R", 4, 3, 2, rng);
    auto m = init_memory<double>(2, 2, 3, 4);
    auto r = read_memory(m, Td::constant(random_matrix(rng, 1, 3)), p, rng, 0.05);
    CHECK(r.output.value().cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.alpha.cols() == 7);
  }
  SUBCASE("saturated scores read exactly one slot") {
    ForcedAddressing f(4, 2, 1000.0);
    Rng rng(6);
    auto m = init_memory<double>(2, 1, 2, 4);
    Md slots = random_matrix(rng, 5, 4, 0.5);
    slots.col(0).setConstant(-1.0);
    slots(3, 0) = 1.0;
    m.slots = Td::constant(slots);
    m.occupied.assign(5, true);
    auto r = read_memory(m, Td::zeros(1, 2), f.params, rng, 0.05);
    CHECK(r.alpha.value()(0, 3) == doctest::Approx(1.0));
    CHECK((r.output.value() - slots.row(3)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("topic writes") {
  auto m = init_memory<double>(4, 2, 3, 3);
  Rng rng(8);
  std::vector<Td> topics = {Td::constant(random_matrix(rng, 1, 3)), Td::constant(random_matrix(rng, 1, 3))};
  write_topic_memory(m, topics);
  CHECK(m.occupied[0]);
  CHECK(m.occupied[1]);
  CHECK_FALSE(m.occupied[2]);
  CHECK_FALSE(m.occupied[3]);
  CHECK(m.slots.value().row(1) == topics[1].value());
  CHECK(m.slots.value().row(2).cwiseAbs().sum() == 0.0);
  CHECK_THROWS_AS(write_topic_memory(m, topics), ContractError);

  auto full = init_memory<double>(4, 2, 3, 3);
  write_topic_memory(full, std::vector<Td>(4, Td::constant(random_matrix(rng, 1, 3))));
  CHECK(std::all_of(full.occupied.begin(), full.occupied.begin() + 4, [](bool b) { return b; }));
  auto small = init_memory<double>(2, 2, 3, 3);
  CHECK_THROWS_AS(write_topic_memory(small, std::vector<Td>(3, Td::zeros(1, 3))), ConfigError);
}

TEST_CASE("local writes replace the previous line") {
  auto m = init_memory<double>(1, 1, 9, 2);
  Rng rng(9);
  Md first = random_matrix(rng, 7, 2);
  write_local_memory(m, Td::constant(first));
  CHECK(m.slots.value().block(2, 0, 7, 2) == first);
  Md second = random_matrix(rng, 5, 2);
  write_local_memory(m, Td::constant(second));
  CHECK(m.slots.value().block(2, 0, 5, 2) == second);
  CHECK(m.slots.value().block(7, 0, 4, 2).cwiseAbs().sum() == 0.0);
  int occupied = 0;
  for (int k = 2; k < 11; ++k) occupied += m.occupied[static_cast<std::size_t>(k)] ? 1 : 0;
  CHECK(occupied == 5);
  CHECK_THROWS_AS(write_local_memory(m, Td::zeros(10, 2)), ConfigError);
}

TEST_CASE("hard history writes") {
  Rng rng(10);
  auto setup = [&](double feature_of_slot1) {
    auto m = init_memory<double>(1, 3, 2, 3);
    Md s = random_matrix(rng, 6, 3, 0.5);
    s.col(0).setConstant(1.0);
    s(2, 0) = feature_of_slot1;
    m.slots = Td::constant(s);
    m.occupied.assign(6, true);
    return m;
  };
  // Score -100: occupied history rows with feature +1 score about -100, the null row 0.
  ForcedAddressing f(3, 3 + 2, -100.0);
  Td h = Td::constant(random_matrix(rng, 1, 3));
  Td v = Td::constant(random_matrix(rng, 1, 2));

  SUBCASE("null-slot argmax leaves memory bit-identical") {
    auto m = setup(1.0);
    Md before = m.slots.value();
    auto occ = m.occupied;
    CHECK(write_history_hard(m, h, v, f.params, rng, 0.05) == -1);
    CHECK(m.slots.value() == before);
    CHECK(m.occupied == occ);
  }
  SUBCASE("argmax on a history slot replaces exactly that row") {
    auto m = setup(-1.0);  // slot 1 of history scores about +100
    Md before = m.slots.value();
    CHECK(write_history_hard(m, h, v, f.params, rng, 0.05) == 1);
    CHECK(changed_rows(before, m.slots.value()) == 1);
    CHECK(m.slots.value().row(2) == h.value());
  }
  SUBCASE("random parameters modify at most one row and never the topic or local rows") {
    for (int trial = 0; trial < 200; ++trial) {
      ParameterStore<double> store;
      auto p = AddressingParams<double>::create(store, "W", 3, 5, 4, rng);
      p.score->tensor.mutable_value() = random_matrix(rng, 4, 1, 3.0);
      auto m = init_memory<double>(2, 3, 2, 3);
      m.slots = Td::constant(random_matrix(rng, 7, 3));
      for (std::size_t k = 0; k < 7; ++k) m.occupied[k] = rng.bernoulli(0.5);
      Md before = m.slots.value();
      const int target = write_history_hard(m, Td::constant(random_matrix(rng, 1, 3)), v, p, rng, 0.05);
      const int changed = changed_rows(before, m.slots.value());
      CHECK(changed <= 1);
      CHECK(changed == (target < 0 ? 0 : 1));
      CHECK(m.slots.value().topRows(2) == before.topRows(2));
      CHECK(m.slots.value().bottomRows(2) == before.bottomRows(2));
    }
  }
}

TEST_CASE("soft history writes") {
  Rng rng(11);
  Td v = Td::constant(random_matrix(rng, 1, 2));

  SUBCASE("beta formula values") {
    Td alpha = Td::constant(Md{{0.7, 0.2, 0.1}});
    Td beta = add_scalar(tanh(scale(subtract_row_max(alpha), 50.0)), 1.0);
    CHECK(beta.value()(0, 0) == 1.0);
    CHECK(beta.value()(0, 1) < 1e-10);
    CHECK(beta.value()(0, 2) < 1e-10);
    CHECK(std::tanh(-5.0) + 1.0 == doctest::Approx(9.1e-5).epsilon(0.01));
  }
  SUBCASE("rows follow the blend formula and the largest beta is exactly 1") {
    for (int trial = 0; trial < 300; ++trial) {
      ParameterStore<double> store;
      auto p = AddressingParams<double>::create(store, "W", 3, 5, 4, rng);
      p.score->tensor.mutable_value() = random_matrix(rng, 4, 1, 20.0);
      auto m = init_memory<double>(1, 3, 1, 3);
      m.slots = Td::constant(random_matrix(rng, 5, 3));
      m.occupied.assign(5, true);
      Md before = m.slots.value();
      Td h = Td::constant(random_matrix(rng, 1, 3));
      Td beta = write_history_soft(m, h, v, p, 50.0, rng, 0.05);
      Md b = beta.value();
      for (int k = 0; k < 3; ++k) {
        Md expect = (1.0 - b(0, k)) * before.row(1 + k) + b(0, k) * h.value();
        CHECK((m.slots.value().row(1 + k) - expect).cwiseAbs().maxCoeff() < 1e-12);
      }
      CHECK(m.slots.value().row(0) == before.row(0));
      CHECK(m.slots.value().row(4) == before.row(4));
      CHECK(b.maxCoeff() == 1.0);
    }
  }
  SUBCASE("top-two margin of at least 0.1 gives beta(others) < 1e-3") {
    int checked = 0;
    for (int trial = 0; trial < 2000 && checked < 200; ++trial) {
      ParameterStore<double> store;
      auto p = AddressingParams<double>::create(store, "W", 3, 5, 4, rng);
      p.score->tensor.mutable_value() = random_matrix(rng, 4, 1, 20.0);
      auto m = init_memory<double>(1, 3, 1, 3);
      m.slots = Td::constant(random_matrix(rng, 5, 3));
      m.occupied.assign(5, true);
      Td h = Td::constant(random_matrix(rng, 1, 3));
      // Same draws as the write: compute alpha first with a copy of the generator.
      Rng copy = rng;
      Td history = slice_rows(m.slots, 1, 3);
      Td projected = concat_rows<double>({p.project(history), Td::zeros(1, 4)});
      std::vector<bool> occ = {true, true, true, false};
      Td alpha = address_projected(projected, concat_cols<double>({h, v}), p, occ, draw_slot_bias(4, 0.05, copy));
      Md a = alpha.value();
      Md sorted = a;
      std::sort(sorted.data(), sorted.data() + sorted.size(), std::greater<>());
      Td beta = write_history_soft(m, h, v, p, 50.0, rng, 0.05);
      if (sorted(0, 0) - sorted(0, 1) < 0.1) continue;
      ++checked;
      Eigen::Index arg = 0;
      a.row(0).maxCoeff(&arg);
      for (Eigen::Index k = 0; k < 4; ++k) {
        if (k == arg) {
          CHECK(beta.value()(0, k) == 1.0);
        } else {
          CHECK(beta.value()(0, k) < 1e-3);
        }
      }
    }
    CHECK(checked == 200);
  }
  SUBCASE("gamma near zero overwrites every history row") {
    ParameterStore<double> store;
    auto p = AddressingParams<double>::create(store, "W", 3, 5, 4, rng);
    auto m = init_memory<double>(1, 3, 1, 3);
    m.slots = Td::constant(random_matrix(rng, 5, 3));
    Td h = Td::constant(random_matrix(rng, 1, 3));
    write_history_soft(m, h, v, p, 1e-9, rng, 0.05);
    for (int k = 1; k <= 3; ++k) CHECK((m.slots.value().row(k) - h.value()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK_THROWS_AS(write_history_soft(m, h, v, p, 0.0, rng, 0.05), ConfigError);
  }
}

TEST_CASE("line history writes") {
  Rng init(12);
  ParameterStore<double> store;
  auto p = AddressingParams<double>::create(store, "W", 4, 6, 5, init);
  Md states = random_matrix(init, 5, 4);
  Td v = Td::constant(random_matrix(init, 1, 2));
  Md topics = random_matrix(init, 2, 4);

  auto run = [&](WriteMode mode, std::uint64_t seed) {
    auto m = init_memory<double>(2, 4, 5, 4);
    m.slots = set_rows(m.slots, 0, Td::constant(topics));
    Rng rng(seed);
    Md before = m.slots.value();
    auto targets = step_history_from_line(m, Td::constant(states), v, mode, p, 50.0, rng, 0.05);
    return std::make_tuple(before, m, targets);
  };
  auto [before, hard, targets] = run(WriteMode::Hard, 4);
  CHECK(targets.size() == 5);
  CHECK(changed_rows(before, hard.slots.value()) <= 5);
  CHECK(hard.slots.value().topRows(2) == before.topRows(2));

  auto [b1, s1, t1] = run(WriteMode::Soft, 9);
  auto [b2, s2, t2] = run(WriteMode::Soft, 9);
  (void)b1;
  (void)b2;
  CHECK(s1.slots.value() == s2.slots.value());
  CHECK(t1 == t2);

  auto empty = init_memory<double>(2, 4, 5, 4);
  Rng rng(1);
  step_history_from_line(empty, Td::zeros(0, 4), v, WriteMode::Hard, p, 50.0, rng, 0.05);
  CHECK(empty.slots.value().cwiseAbs().sum() == 0.0);
}

TEST_CASE("gradients flow through soft writes and reads") {
  Rng init(13);
  ParameterStore<double> store;
  auto read_p = AddressingParams<double>::create(store, "R", 4, 3, 5, init);
  auto write_p = AddressingParams<double>::create(store, "W", 4, 6, 5, init);
  auto& states = store.add("states", 3, 4, Init::Uniform, init);
  states.tensor.mutable_value() = random_matrix(init, 3, 4);
  auto& topic = store.add("topic", 1, 4, Init::Uniform, init);
  auto& query = store.add("query", 1, 3, Init::Uniform, init);
  for (auto& prm : store) prm.tensor.mutable_value() = random_matrix(init, prm.rows(), prm.cols());
  Td v = Td::constant(random_matrix(init, 1, 2));

  auto closure = [&]() {
    Rng rng(77);
    auto m = init_memory<double>(1, 2, 3, 4);
    write_topic_memory(m, {topic.tensor});
    // A low gamma keeps the blend smooth enough for finite differences.
    step_history_from_line(m, states.tensor, v, WriteMode::Soft, write_p, 2.0, rng, 0.05);
    write_local_memory(m, states.tensor);
    auto r = read_memory(m, query.tensor, read_p, rng, 0.05);
    return sum(mul(r.output, r.output));
  };
  GradCheckOptions opt;
  opt.stencil = Stencil::FivePoint;
  auto report = gradient_check(store, closure, opt);
  INFO("worst tensor " << report.worst_tensor << " rel " << report.max_rel_error);
  CHECK(report.passed(1e-4));
}

}  // TEST_SUITE
