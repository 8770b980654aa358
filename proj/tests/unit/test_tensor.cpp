#include <cmath>
#include <limits>

#include "../support/fd.hpp"
#include "../support/random_graph.hpp"
#include "adedgedrop/error.hpp"
#include "adedgedrop/graph.hpp"
#include "adedgedrop/tensor.hpp"
#include "doctest.h"

using namespace adedgedrop;
using adedgedrop::testing::finite_difference_check;
using adedgedrop::testing::random_matrix;

TEST_CASE("Matrix: ragged initializer is a shape error") {
  CHECK_THROWS_AS((Matrix{{1.0, 2.0}, {3.0}}), ShapeError);
}

TEST_CASE("SparseMatrix: constructor validates column order") {
  CHECK_THROWS_AS(SparseMatrix(1, 3, {0, 2}, {2, 1}, {1.0, 1.0}), ContractError);
  CHECK_THROWS_AS(SparseMatrix(1, 3, {0, 1}, {4}, {1.0}), ContractError);
  const SparseMatrix s(2, 2, {0, 1, 2}, {1, 0}, {2.0, 3.0});
  CHECK(s.at(0, 1) == 2.0);
  CHECK(s.at(0, 0) == 0.0);
  CHECK(s.transpose().at(1, 0) == 2.0);
}

TEST_CASE("spmm: identity, zero and the normalized single edge") {
  Tape t;
  const Matrix d = random_matrix(3, 2, 4);
  const SparseMatrix id = SparseMatrix::identity(3);
  CHECK(t.value(t.spmm(id, t.constant(d))) == d);

  const SparseMatrix zero(3, 3, {0, 0, 0, 0}, {}, {});
  CHECK(t.value(t.spmm(zero, t.constant(d))) == Matrix(3, 2));

  const std::vector<Edge> e{{0, 1}};
  const SparseMatrix k2 = normalize_adjacency(Graph::from_edges(2, e).adjacency());
  const Matrix out = t.value(t.spmm(k2, t.constant(Matrix{{1.0}, {3.0}})));
  CHECK(out(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(out(1, 0) == doctest::Approx(2.0).epsilon(1e-15));

  CHECK_THROWS_AS(t.spmm(id, t.constant(Matrix(2, 2))), ShapeError);
}

TEST_CASE("dense ops: definitions") {
  Tape t;
  CHECK(t.value(t.relu(t.constant(Matrix{{-1.0, 0.0, 2.0}}))) == Matrix{{0.0, 0.0, 2.0}});
  CHECK(t.value(t.row_softmax(t.constant(Matrix{{0.0, 0.0}}))) == Matrix{{0.5, 0.5}});
  CHECK(t.value(t.sigmoid(t.constant(Matrix{{0.0}}))) == Matrix{{0.5}});
  CHECK(t.value(t.matmul(t.constant(Matrix{{1.0, 2.0}}), t.constant(Matrix{{3.0}, {4.0}}))) == Matrix{{11.0}});
  CHECK(t.value(t.add(t.constant(Matrix{{1.0, 2.0}, {3.0, 4.0}}), t.constant(Matrix{{10.0, 20.0}}))) ==
        Matrix{{11.0, 22.0}, {13.0, 24.0}});
  CHECK_THROWS_AS(t.matmul(t.constant(Matrix(2, 3)), t.constant(Matrix(2, 3))), ShapeError);
  CHECK_THROWS_AS(t.add(t.constant(Matrix(2, 3)), t.constant(Matrix(3, 2))), ShapeError);
  CHECK_THROWS_AS(t.hadamard(t.constant(Matrix(2, 3)), t.constant(Matrix(1, 3))), ShapeError);
}

TEST_CASE("row_softmax: rows sum to one, entries in (0, 1), large logits stay finite") {
  Matrix m = random_matrix(32, 7, 5, 30.0);
  m(0, 0) = 700.0;
  m(1, 1) = -700.0;
  const Matrix s = row_softmax(m);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    double sum = 0.0;
    for (double v : s.row(r)) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  const Matrix small = row_softmax(random_matrix(8, 3, 6));
  for (double v : small.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("sigmoid is stable for large magnitudes") {
  Tape t;
  const Matrix s = t.value(t.sigmoid(t.constant(Matrix{{-800.0, 800.0}})));
  CHECK(s(0, 0) >= 0.0);
  CHECK(s(0, 1) == 1.0);
}

TEST_CASE("non-finite values raise") {
  Tape t;
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(t.constant(Matrix{{inf}}), NumericError);
  CHECK_THROWS_AS(t.matmul(t.constant(Matrix{{1e300}}), t.constant(Matrix{{1e300}})), NumericError);
}

TEST_CASE("backward: sum(W) gives ones") {
  Parameter w("w", Matrix{{1.0, 2.0}, {3.0, 4.0}});
  Tape t;
  t.backward(t.sum(t.parameter(w)));
  CHECK(w.grad == Matrix(2, 2, 1.0));
  CHECK(w.has_grad);
}

TEST_CASE("backward: sum(W * W) gives 2W") {
  Parameter w("w", Matrix{{1.0, 2.0}, {3.0, 4.0}});
  Tape t;
  const Var v = t.parameter(w);
  t.backward(t.sum(t.hadamard(v, v)));
  CHECK(w.grad == Matrix{{2.0, 4.0}, {6.0, 8.0}});
}

TEST_CASE("backward: non-scalar loss is a contract error") {
  Tape t;
  const Var v = t.variable(Matrix(2, 2, 1.0));
  CHECK_THROWS_AS(t.backward(v), ContractError);
}

TEST_CASE("backward: repeated calls accumulate parameter grads") {
  Parameter w("w", Matrix{{1.0, -2.0}});
  Tape t;
  const Var loss = t.sum(t.parameter(w));
  t.backward(loss);
  t.backward(loss);
  CHECK(w.grad == Matrix(1, 2, 2.0));
  w.zero_grad();
  CHECK(w.grad == Matrix(1, 2, 0.0));
  CHECK_FALSE(w.has_grad);
}

TEST_CASE("backward: bit-identical grads across runs") {
  const Graph g = adedgedrop::testing::erdos_renyi(12, 0.3, 2);
  const SparseMatrix p = normalize_adjacency(g.adjacency());
  const Matrix x = random_matrix(12, 4, 3);
  auto run = [&] {
    Parameter w("w", random_matrix(4, 3, 4));
    Tape t;
    const Var h = t.row_softmax(t.spmm(p, t.matmul(t.constant(x), t.parameter(w))));
    const std::vector<std::size_t> rows{0, 1, 2}, cols{0, 1, 2};
    t.backward(t.nll(h, rows, cols, 1.0));
    return w.grad;
  };
  CHECK(run() == run());
}

TEST_CASE("nll: definition, floor and zero gradient below the floor") {
  Tape t;
  const Var p = t.variable(Matrix{{0.5, 0.5}, {0.25, 0.75}, {0.0, 1.0}});
  const std::vector<std::size_t> rows{0, 1, 2}, cols{0, 0, 0};
  const Var loss = t.nll(p, rows, cols, 1.0);
  CHECK(t.value(loss)(0, 0) == doctest::Approx(std::log(2.0) + std::log(4.0) - std::log(1e-12)));
  t.backward(loss);
  CHECK(t.grad(p)(0, 0) == doctest::Approx(-2.0));
  CHECK(t.grad(p)(1, 0) == doctest::Approx(-4.0));
  CHECK(t.grad(p)(2, 0) == 0.0);
}

TEST_CASE("finite differences: every op composed on a random graph") {
  const Graph g = adedgedrop::testing::random_graph_with_edges(10, 20, 7);
  const SparseMatrix prop = normalize_adjacency(g.adjacency());
  const Matrix x = random_matrix(10, 5, 8);
  Parameter w1("w1", random_matrix(5, 6, 9, 0.5));
  Parameter w2("w2", random_matrix(6, 3, 10, 0.5));
  Parameter b("b", random_matrix(1, 6, 11, 0.5));
  Parameter s("s", random_matrix(10, 3, 12, 0.5));
  const std::vector<std::size_t> rows{0, 2, 4, 6, 8}, cols{0, 1, 2, 0, 1};

  auto build = [&](Tape& t) {
    const Var h = t.relu(t.add(t.spmm(prop, t.matmul(t.constant(x), t.parameter(w1))), t.parameter(b)));
    const Var z = t.spmm(prop, t.matmul(h, t.parameter(w2)));
    const Var gate = t.sigmoid(t.parameter(s));
    const Var probs = t.row_softmax(t.add(z, t.hadamard(gate, z)));
    return t.add(t.nll(probs, rows, cols, 0.7), t.sum(t.hadamard(gate, gate)));
  };
  auto value = [&] {
    Tape t;
    return t.value(build(t))(0, 0);
  };
  {
    Tape t;
    t.backward(build(t));
  }
  for (Parameter* p : {&w1, &w2, &b, &s}) {
    const Matrix analytic = p->grad;
    const auto r = finite_difference_check(p->value, analytic, value);
    INFO(p->name << " max_rel " << r.max_rel);
    CHECK(r.ok);
  }
}

TEST_CASE("sgd_step: definition, identity and linearity") {
  Parameter p("p", Matrix{{1.0}});
  p.grad = Matrix{{0.5}};
  p.has_grad = true;
  Parameter* ps[] = {&p};
  sgd_step(ps, 0.01);
  CHECK(p.value(0, 0) == doctest::Approx(0.995).epsilon(1e-15));
  CHECK(p.grad == Matrix{{0.0}});
  CHECK_FALSE(p.has_grad);

  CHECK_THROWS_AS(sgd_step(ps, 0.01), ContractError);

  p.grad = Matrix{{0.5}};
  p.has_grad = true;
  sgd_step(ps, 0.0);
  CHECK(p.value(0, 0) == doctest::Approx(0.995).epsilon(1e-15));

  Parameter q("q", Matrix{{2.0, -1.0}});
  Parameter* qs[] = {&q};
  for (int i = 0; i < 2; ++i) {
    q.grad = Matrix{{0.3, -0.2}};
    q.has_grad = true;
    sgd_step(qs, 0.1);
  }
  CHECK(q.value(0, 0) == doctest::Approx(2.0 - 2 * 0.1 * 0.3));
  CHECK(q.value(0, 1) == doctest::Approx(-1.0 + 2 * 0.1 * 0.2));
}

TEST_CASE("adam_step: first step moves each entry by lr against the gradient sign") {
  Parameter p("p", Matrix{{1.0, 1.0, 1.0}});
  p.grad = Matrix{{0.3, -2.0, 0.0}};
  p.has_grad = true;
  Parameter* ps[] = {&p};
  adam_step(ps, AdamOptions{});
  CHECK(p.value(0, 0) == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(1.01).epsilon(1e-6));
  CHECK(p.value(0, 2) == 1.0);
  CHECK(p.adam_m.same_shape(p.value));
  CHECK(p.adam_v.same_shape(p.value));
  CHECK(p.adam_step == 1);
}

TEST_CASE("scale_grads") {
  Parameter p("p", Matrix{{1.0}});
  p.grad = Matrix{{4.0}};
  p.has_grad = true;
  Parameter* ps[] = {&p};
  scale_grads(ps, 0.25);
  CHECK(p.grad == Matrix{{1.0}});
}
