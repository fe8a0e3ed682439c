#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "mamgrid/tensornet/optim.hpp"
#include "mamgrid/tensornet/parameters.hpp"
#include "mamgrid/tensornet/tape.hpp"

using namespace mamgrid::tensornet;
using mamgrid::testing::check_gradients;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Parameter& random_param(ParameterSet& ps, const std::string& name, Eigen::Index r, Eigen::Index c,
                        std::mt19937_64& rng) {
  Parameter& p = ps.add(name, r, c);
  p.value = random_matrix(r, c, rng);
  return p;
}

Matrix path_adjacency(int n) {
  Matrix a = Matrix::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) a(i, i + 1) = a(i + 1, i) = 1.0;
  return a;
}

Matrix permutation(const std::vector<int>& order) {
  const auto n = static_cast<Eigen::Index>(order.size());
  Matrix p = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p(i, order[static_cast<std::size_t>(i)]) = 1.0;
  return p;
}

constexpr double kGradTol = 1e-4;

}  // namespace

TEST_CASE("normalize_adjacency on small graphs") {
  CHECK(normalize_adjacency(Matrix::Zero(3, 3)).isApprox(Matrix::Identity(3, 3), 0.0));

  const Matrix two = normalize_adjacency(path_adjacency(2));
  CHECK(two.isApprox(Matrix::Constant(2, 2, 0.5), 1e-15));

  // Degrees of A + I on a 3-path are (2, 3, 2).
  const Matrix three = normalize_adjacency(path_adjacency(3));
  Matrix expected(3, 3);
  const double e = 1.0 / std::sqrt(6.0);
  expected << 1.0 / 2, e, 0, e, 1.0 / 3, e, 0, e, 1.0 / 2;
  CHECK((three - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("gcn_layer examples") {
  std::mt19937_64 rng(1);
  const Matrix eye = Matrix::Identity(4, 4);
  const Matrix h = random_matrix(4, 3, rng).cwiseAbs();

  Tape t;
  Var out = gcn_layer(t, eye, t.constant(h), t.constant(Matrix::Identity(3, 3)));
  CHECK(t.value(out) == h);

  Var zero = gcn_layer(t, eye, t.constant(random_matrix(4, 3, rng)), t.constant(Matrix::Zero(3, 5)));
  CHECK(t.value(zero).isZero(0.0));

  const Matrix a = normalize_adjacency(path_adjacency(4));
  const Matrix x = random_matrix(4, 3, rng);
  const Matrix w = random_matrix(3, 2, rng);
  Var y = gcn_layer(t, a, t.constant(x), t.constant(w));
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 2; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) {
        for (int l = 0; l < 3; ++l) s += a(i, k) * x(k, l) * w(l, j);
      }
      CHECK(t.value(y)(i, j) == doctest::Approx(std::max(0.0, s)).epsilon(1e-12));
    }
  }
}

TEST_CASE("propagate handles stacked batches graph by graph") {
  std::mt19937_64 rng(2);
  const Matrix a = normalize_adjacency(path_adjacency(5));
  const Matrix g0 = random_matrix(5, 3, rng);
  const Matrix g1 = random_matrix(5, 3, rng);
  Matrix stacked(10, 3);
  stacked << g0, g1;
  Tape t;
  const Matrix& out = t.value(t.propagate(a, t.constant(stacked)));
  CHECK(out.topRows(5).isApprox(a * g0, 1e-14));
  CHECK(out.bottomRows(5).isApprox(a * g1, 1e-14));
}

TEST_CASE("gcn_layer is permutation equivariant") {
  std::mt19937_64 rng(3);
  const Matrix adj = [&] {
    Matrix m = Matrix::Zero(6, 6);
    const int edges[][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 3}, {1, 4}};
    for (auto& e : edges) m(e[0], e[1]) = m(e[1], e[0]) = 1.0;
    return m;
  }();
  const Matrix a = normalize_adjacency(adj);
  const Matrix h = random_matrix(6, 4, rng);
  const Matrix w = random_matrix(4, 3, rng);
  const Matrix p = permutation({3, 0, 5, 1, 4, 2});
  const Matrix pa = p * a * p.transpose();
  Tape t;
  const Matrix base = t.value(gcn_layer(t, a, t.constant(h), t.constant(w)));
  const Matrix moved = t.value(gcn_layer(t, pa, t.constant(p * h), t.constant(w)));
  CHECK((moved - p * base).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(normalize_adjacency(p * adj * p.transpose()).isApprox(pa, 1e-14));
}

TEST_CASE("softmax examples and properties") {
  const Eigen::VectorXd u = softmax(Eigen::VectorXd::Zero(4));
  for (int i = 0; i < 4; ++i) CHECK(u(i) == doctest::Approx(0.25).epsilon(1e-15));

  Eigen::VectorXd v(3);
  v << std::log(1.0), std::log(2.0), std::log(3.0);
  const Eigen::VectorXd s = softmax(v);
  CHECK(std::abs(s(0) - 1.0 / 6) < 1e-12);
  CHECK(std::abs(s(1) - 2.0 / 6) < 1e-12);
  CHECK(std::abs(s(2) - 3.0 / 6) < 1e-12);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::VectorXd x = random_matrix(7, 1, rng, 5.0);
    const Eigen::VectorXd y = softmax(x);
    CHECK(std::abs(y.sum() - 1.0) < 1e-9);
    CHECK(y.minCoeff() > 0.0);
    CHECK(y.maxCoeff() < 1.0);
    const Eigen::VectorXd shifted = softmax((x.array() + 123.4).matrix());
    CHECK((shifted - y).cwiseAbs().maxCoeff() < 1e-12);
  }
  Eigen::VectorXd big(3);
  big << 1000.0, 0.0, -1000.0;
  CHECK(softmax(big)(0) > 1.0 - 1e-12);

  Tape t;
  Matrix rows = random_matrix(3, 5, rng);
  const Matrix& r = t.value(t.softmax_rows(t.constant(rows)));
  for (int i = 0; i < 3; ++i) {
    CHECK((r.row(i).transpose() - softmax(rows.row(i).transpose())).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("masked softmax zeroes masked entries") {
  Matrix logits(1, 3);
  logits << 0.0, std::log(3.0), 5.0;
  Matrix mask(2, 3);
  mask << 1, 1, 0, 0, 0, 1;
  Tape t;
  const Matrix& s = t.value(t.masked_softmax_rows(t.constant(logits), mask));
  CHECK(s(0, 0) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(s(0, 1) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(s(0, 2) == 0.0);
  CHECK(s(1, 2) == 1.0);
  CHECK_THROWS_AS(t.masked_softmax_rows(t.constant(logits), Matrix::Zero(1, 3)), ShapeError);
}

TEST_CASE("dueling, pick, mse, node pooling forward values") {
  Tape t;
  Matrix v(2, 1);
  v << 1.0, -2.0;
  Matrix adv(2, 3);
  adv << 1, 2, 3, 0, 0, 6;
  const Matrix& q = t.value(t.dueling(t.constant(v), t.constant(adv)));
  Matrix expected(2, 3);
  expected << 0, 1, 2, -4, -4, 2;
  CHECK(q.isApprox(expected, 1e-15));

  Var qv = t.constant(expected);
  const Matrix& picked = t.value(t.pick(qv, {2, 0}));
  CHECK(picked(0, 0) == 2.0);
  CHECK(picked(1, 0) == -4.0);

  Matrix target(2, 1);
  target << 1.0, -1.0;
  CHECK(t.value(t.mse(t.constant(picked), target))(0, 0) == doctest::Approx((1.0 + 9.0) / 2).epsilon(1e-15));

  Matrix x(4, 2);  // two graphs of two nodes
  x << 1, 2, 3, 4, 5, 6, 7, 8;
  Matrix w(2, 2);
  w << 1, 0, 0.25, 0.75;
  const Matrix& pooled = t.value(t.weighted_node_sum(t.constant(w), t.constant(x)));
  CHECK(pooled(0, 0) == 1.0);
  CHECK(pooled(0, 1) == 2.0);
  CHECK(pooled(1, 0) == doctest::Approx(0.25 * 5 + 0.75 * 7).epsilon(1e-15));
  const Matrix& mean = t.value(t.node_mean(t.constant(x), 2));
  CHECK(mean(0, 0) == 2.0);
  CHECK(mean(1, 1) == 7.0);

  Matrix z(2, 2);
  z << 1, 1, 0, 1;
  const Matrix& s = t.value(t.node_scores(t.constant(x), t.constant(z)));
  CHECK(s(0, 0) == 3.0);
  CHECK(s(0, 1) == 7.0);
  CHECK(s(1, 0) == 6.0);
  CHECK(s(1, 1) == 8.0);
}

TEST_CASE("every op matches finite differences") {
  std::mt19937_64 rng(5);
  const Matrix a = normalize_adjacency(path_adjacency(3));
  const Matrix target = random_matrix(2, 1, rng);

  SUBCASE("matmul, add, add_bias, relu, sum") {
    ParameterSet ps;
    auto& x = random_param(ps, "x", 4, 3, rng);
    auto& w = random_param(ps, "w", 3, 2, rng);
    auto& b = random_param(ps, "b", 1, 2, rng);
    auto& c = random_param(ps, "c", 4, 2, rng);
    const auto r = check_gradients(ps, [&](Tape& t) {
      Var h = t.add_bias(t.matmul(t.param(x), t.param(w)), t.param(b));
      return t.sum(t.relu(t.add(h, t.param(c))));
    });
    CHECK_MESSAGE(r.max_rel_error < kGradTol, r.worst);
  }
  SUBCASE("propagate and node pooling") {
    ParameterSet ps;
    auto& h = random_param(ps, "h", 6, 3, rng);
    auto& z = random_param(ps, "z", 2, 3, rng);
    const auto r = check_gradients(ps, [&](Tape& t) {
      Var x = t.propagate(a, t.param(h));
      Var rho = t.softmax_rows(t.node_scores(x, t.param(z)));
      Var pooled = t.weighted_node_sum(rho, x);
      Var mean = t.node_mean(x, 3);
      return t.mse(t.matmul(t.concat_cols(pooled, mean), t.constant(Matrix::Ones(6, 1))), target);
    });
    CHECK_MESSAGE(r.max_rel_error < kGradTol, r.worst);
  }
  SUBCASE("masked softmax with broadcast logits") {
    ParameterSet ps;
    auto& l = random_param(ps, "l", 1, 3, rng);
    auto& y = random_param(ps, "y", 3, 2, rng);
    Matrix mask(2, 3);
    mask << 1, 1, 0, 1, 1, 1;
    const auto r = check_gradients(ps, [&](Tape& t) {
      Var s = t.masked_softmax_rows(t.param(l), mask);
      Var out = t.matmul(s, t.param(y));
      return t.sum(t.relu(out));
    });
    CHECK_MESSAGE(r.max_rel_error < kGradTol, r.worst);
  }
  SUBCASE("dueling and pick") {
    ParameterSet ps;
    auto& v = random_param(ps, "v", 2, 1, rng);
    auto& adv = random_param(ps, "adv", 2, 4, rng);
    const auto r = check_gradients(ps, [&](Tape& t) {
      Var q = t.dueling(t.param(v), t.param(adv));
      return t.mse(t.pick(q, {3, 1}), target);
    });
    CHECK_MESSAGE(r.max_rel_error < kGradTol, r.worst);
  }
}

TEST_CASE("backward semantics") {
  ParameterSet ps;
  auto& w = ps.add("w", 2, 3);
  w.value << 1, 2, 3, 4, 5, 6;
  auto& unused = ps.add("unused", 2, 2);
  unused.value.setOnes();
  Matrix x(3, 1);
  x << 0.5, -1.0, 2.0;

  Tape t;
  Var loss = t.sum(t.matmul(t.param(w), t.constant(x)));
  t.backward(loss);
  for (int i = 0; i < 2; ++i) CHECK(w.grad.row(i) == x.transpose());
  CHECK(unused.grad.isZero(0.0));
  CHECK_THROWS_AS(t.backward(loss), std::logic_error);

  Tape shapes;
  CHECK_THROWS_AS(shapes.matmul(shapes.constant(Matrix::Zero(2, 3)), shapes.constant(Matrix::Zero(2, 3))), ShapeError);
  CHECK_THROWS_AS(shapes.backward(shapes.constant(Matrix::Zero(2, 2))), ShapeError);
}

TEST_CASE("non-finite values raise") {
  Tape t;
  Matrix bad = Matrix::Zero(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(t.constant(bad), NumericError);
  Matrix huge = Matrix::Constant(1, 1, 1e300);
  Var h = t.constant(huge);
  CHECK_THROWS_AS(t.matmul(h, h), NumericError);
}

TEST_CASE("adam update") {
  ParameterSet ps;
  auto& p = ps.add("p", 1, 3);
  p.value << 1.0, -2.0, 3.0;
  AdamState st;
  adam_step(ps, st);
  CHECK(st.step == 1);
  CHECK(p.value == Matrix((Matrix(1, 3) << 1.0, -2.0, 3.0).finished()));

  AdamState first;
  ps[0].grad << 0.5, -4.0, 0.0;
  const Matrix before = p.value;
  adam_step(ps, first);
  // t = 1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  for (int i = 0; i < 3; ++i) {
    const double g = ps[0].grad(0, i);
    const double expected = before(0, i) - 1e-3 * g / (std::abs(g) + 1e-8);
    CHECK(std::abs(p.value(0, i) - expected) < 1e-15);
  }

  ParameterSet a = ps;
  ParameterSet b = ps;
  AdamState sa;
  AdamState sb;
  std::mt19937_64 rng(9);
  for (int k = 0; k < 50; ++k) {
    const Matrix g = random_matrix(1, 3, rng);
    a[0].grad = g;
    b[0].grad = g;
    adam_step(a, sa);
    adam_step(b, sb);
  }
  CHECK(a[0].value == b[0].value);
}

TEST_CASE("gradient clipping") {
  ParameterSet ps;
  ps.add("a", 1, 2).grad << 30.0, 40.0;
  ps.add("b", 1, 1).grad << 0.0;
  CHECK(clip_grad_norm(ps, 10.0) == doctest::Approx(50.0));
  CHECK(ps.grad_norm() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(ps[0].grad(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(clip_grad_norm(ps, 100.0) == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(ps[0].grad(0, 0) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("parameter sets copy, sync and serialize exactly") {
  std::mt19937_64 rng(6);
  ParameterSet ps;
  glorot_uniform(ps.add("w", 5, 7), rng);
  ps.add("b", 1, 7);
  const double limit = std::sqrt(6.0 / 12.0);
  CHECK(ps.at("w").value.cwiseAbs().maxCoeff() <= limit);
  CHECK(ps.at("w").value.cwiseAbs().maxCoeff() > 0.5 * limit);

  ParameterSet copy = ps;
  copy.at("w").value(0, 0) += 1.0;
  CHECK(copy.at("w").value(0, 0) != ps.at("w").value(0, 0));
  copy.copy_values_from(ps);
  CHECK(copy.at("w").value == ps.at("w").value);

  ParameterSet loaded;
  loaded.add("w", 5, 7);
  loaded.add("b", 1, 7);
  parameters_from_json(nlohmann::json::parse(parameters_to_json(ps).dump()), loaded);
  CHECK(loaded.at("w").value == ps.at("w").value);

  ParameterSet wrong;
  wrong.add("w", 7, 5);
  wrong.add("b", 1, 7);
  CHECK_THROWS_AS(parameters_from_json(parameters_to_json(ps), wrong), ShapeError);
  CHECK_THROWS_AS(ps.add("w", 1, 1), ShapeError);
  CHECK(ps.scalar_count() == 42);
}
