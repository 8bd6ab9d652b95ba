#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "latdyn/net.hpp"
#include "latdyn/rng.hpp"
#include "latdyn/tape.hpp"

using namespace latdyn;
using namespace latdyn::nn;

namespace {

// Central-difference gradient check of a scalar tape program against the
// analytic backward pass. Returns the max relative error over all entries.
double grad_check(Param& p, const std::function<double()>& loss_value,
                  const std::function<Matrix()>& analytic_grad, double h = 1e-6) {
  Matrix g = analytic_grad();
  double worst = 0.0;
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    double keep = p.value.data[i];
    p.value.data[i] = keep + h;
    double up = loss_value();
    p.value.data[i] = keep - h;
    double dn = loss_value();
    p.value.data[i] = keep;
    double num = (up - dn) / (2.0 * h);
    double den = std::max({std::abs(num), std::abs(g.data[i]), 1e-8});
    worst = std::max(worst, std::abs(num - g.data[i]) / den);
  }
  return worst;
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double s = 1.0) {
  Matrix m(r, c);
  for (double& x : m.data) x = s * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("scalar activation helpers") {
  CHECK(softplus_scalar(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(softplus_scalar(100.0) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(softplus_scalar(-100.0) > 0.0);
  CHECK(softplus_scalar(-100.0) < 1e-40);
  for (double x = -50.0; x <= 50.0; x += 0.73) CHECK(softplus_scalar(x) > 0.0);
  CHECK(gelu_scalar(0.0) == 0.0);
  // GELU tanh approximation at x=1: 0.5*(1+tanh(sqrt(2/pi)*1.044715))
  double expect = 0.5 * (1.0 + std::tanh(std::sqrt(2.0 / 3.14159265358979323846) * 1.044715));
  CHECK(gelu_scalar(1.0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("gradcheck: every primitive") {
  Rng rng(101);
  Param p("p", 3, 4);
  p.value = random_matrix(3, 4, rng, 0.7);
  Param q("q", 3, 4);
  q.value = random_matrix(3, 4, rng, 0.7);
  for (double& x : q.value.data) x += 2.5;  // keep divisors away from zero
  Matrix target = random_matrix(3, 4, rng);
  Matrix target1 = random_matrix(3, 1, rng);

  auto check_unary = [&](const char* name,
                         const std::function<VarId(Tape&, VarId)>& op,
                         const Matrix& tgt) {
    CAPTURE(name);
    auto value = [&]() {
      Tape t;
      return t.value(t.mean_sq_diff(op(t, t.leaf(p)), tgt))(0, 0);
    };
    auto grad = [&]() {
      Tape t;
      p.zero_grad();
      t.backward(t.mean_sq_diff(op(t, t.leaf(p)), tgt));
      return p.grad;
    };
    CHECK(grad_check(p, value, grad) < 1e-5);
  };

  check_unary("gelu", [](Tape& t, VarId x) { return t.gelu(x); }, target);
  check_unary("softplus", [](Tape& t, VarId x) { return t.softplus(x); }, target);
  check_unary("scale", [](Tape& t, VarId x) { return t.scale(x, -1.7); }, target);
  check_unary("row_norm", [](Tape& t, VarId x) { return t.row_norm(x); }, target1);
  check_unary("identity-mse", [](Tape& t, VarId x) { return x; }, target);

  auto check_binary = [&](const char* name,
                          const std::function<VarId(Tape&, VarId, VarId)>& op) {
    CAPTURE(name);
    for (Param* who : {&p, &q}) {
      auto value = [&]() {
        Tape t;
        return t.value(t.mean_sq_diff(op(t, t.leaf(p), t.leaf(q)), target))(0, 0);
      };
      auto grad = [&]() {
        Tape t;
        who->zero_grad();
        t.backward(t.mean_sq_diff(op(t, t.leaf(p), t.leaf(q)), target));
        return who->grad;
      };
      CHECK(grad_check(*who, value, grad) < 1e-5);
    }
  };

  check_binary("add", [](Tape& t, VarId a, VarId b) { return t.add(a, b); });
  check_binary("sub", [](Tape& t, VarId a, VarId b) { return t.sub(a, b); });
  check_binary("mul", [](Tape& t, VarId a, VarId b) { return t.mul(a, b); });
  check_binary("div", [](Tape& t, VarId a, VarId b) { return t.div(a, b); });

  // concat_cols: both operands appear twice in a 3x8 product
  Matrix wide = random_matrix(3, 8, rng);
  for (Param* who : {&p, &q}) {
    auto program = [&](Tape& t) {
      return t.mean_sq_diff(
          t.mul(t.concat_cols({t.leaf(p), t.leaf(q)}), t.concat_cols({t.leaf(q), t.leaf(p)})),
          wide);
    };
    auto value = [&]() {
      Tape t;
      return t.value(program(t))(0, 0);
    };
    auto grad = [&]() {
      Tape t;
      who->zero_grad();
      t.backward(program(t));
      return who->grad;
    };
    CHECK(grad_check(*who, value, grad) < 1e-5);
  }
}

TEST_CASE("gradcheck: dense layer wrt weights, bias and input") {
  Rng rng(55);
  Param x("x", 4, 3);
  x.value = random_matrix(4, 3, rng);
  Param w("w", 2, 3);
  w.value = random_matrix(2, 3, rng, 0.5);
  Param b("b", 1, 2);
  b.value = random_matrix(1, 2, rng, 0.1);
  Matrix tgt = random_matrix(4, 2, rng);

  for (Param* who : {&x, &w, &b}) {
    auto value = [&]() {
      Tape t;
      return t.value(t.mean_sq_diff(t.gelu(t.dense(t.leaf(x), w, b)), tgt))(0, 0);
    };
    auto grad = [&]() {
      Tape t;
      who->zero_grad();
      t.backward(t.mean_sq_diff(t.gelu(t.dense(t.leaf(x), w, b)), tgt));
      return who->grad;
    };
    CHECK(grad_check(*who, value, grad) < 1e-5);
  }
}

TEST_CASE("loss = half norm squared has gradient theta") {
  Param p("p", 1, 5);
  p.value.data = {0.3, -1.2, 0.0, 2.0, -0.5};
  Tape t;
  // mean_sq_diff against zero = (1/5) sum p^2, grad = (2/5) p
  t.backward(t.mean_sq_diff(t.leaf(p), Matrix(1, 5)));
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(p.grad.data[i] == doctest::Approx(0.4 * p.value.data[i]).epsilon(1e-13));
}

TEST_CASE("one dense layer quadratic loss matches hand chain rule") {
  // y = w x + b (1x1), loss = (y - t)^2, dL/dw = 2 (y - t) x
  Param x("x", 1, 1), w("w", 1, 1), b("b", 1, 1);
  x.value(0, 0) = 1.5;
  w.value(0, 0) = 0.8;
  b.value(0, 0) = -0.2;
  Matrix tgt(1, 1);
  tgt(0, 0) = 2.0;
  Tape t;
  t.backward(t.mean_sq_diff(t.dense(t.leaf(x), w, b), tgt));
  double y = 0.8 * 1.5 - 0.2;
  CHECK(w.grad(0, 0) == doctest::Approx(2.0 * (y - 2.0) * 1.5).epsilon(1e-13));
  CHECK(b.grad(0, 0) == doctest::Approx(2.0 * (y - 2.0)).epsilon(1e-13));
}

TEST_CASE("replace_rows blocks gradient on replaced rows") {
  Param p("p", 3, 2);
  p.value.fill(1.0);
  Matrix sub(3, 2);
  sub.fill(9.0);
  std::vector<std::uint8_t> mask = {0, 1, 0};
  Tape t;
  VarId y = t.replace_rows(t.leaf(p), sub, mask);
  CHECK(t.value(y)(1, 0) == 9.0);
  CHECK(t.value(y)(0, 0) == 1.0);
  t.backward(t.mean_sq_diff(y, Matrix(3, 2)));
  CHECK(p.grad(1, 0) == 0.0);
  CHECK(p.grad(1, 1) == 0.0);
  CHECK(p.grad(0, 0) != 0.0);
}

TEST_CASE("grad_of rejects untouched parameters") {
  Param p("p", 1, 1), other("other", 1, 1);
  Tape t;
  t.backward(t.mean_sq_diff(t.leaf(p), Matrix(1, 1)));
  CHECK_THROWS(t.grad_of(other));
}

TEST_CASE("dense net forward closed forms") {
  // zero weights, zero biases
  DenseNet lin("lin", {3, 4, 2}, HeadKind::linear);
  Vec out = lin.forward({0.5, -1.0, 2.0});
  CHECK(out.size() == 2);
  for (double x : out) CHECK(x == 0.0);

  DenseNet sp("sp", {3, 4, 2}, HeadKind::softplus);
  for (double x : sp.forward({0.5, -1.0, 2.0}))
    CHECK(x == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  // single 1x1 affine layer
  DenseNet aff("aff", {1, 1}, HeadKind::linear);
  aff.params()[0]->value(0, 0) = 3.0;
  aff.params()[1]->value(0, 0) = 0.25;
  CHECK(aff.forward({2.0})[0] == doctest::Approx(6.25).epsilon(1e-15));

  CHECK_THROWS_AS(lin.forward({1.0}), DimensionError);
}

TEST_CASE("softplus head positivity over wide input range") {
  Rng rng(6);
  DenseNet sp("sp", {5, 8, 8, 3}, HeadKind::softplus);
  sp.init(rng);
  for (int i = 0; i < 1000; ++i) {
    Vec x(5);
    for (double& v : x) v = rng.uniform(-50.0, 50.0);
    for (double y : sp.forward(x)) CHECK(y > 0.0);
  }
}

TEST_CASE("tape forward agrees with plain forward") {
  // the tape batches rows through BLAS while the plain path is a scalar loop,
  // so agreement is to rounding, not bitwise
  Rng rng(8);
  for (HeadKind hk : {HeadKind::linear, HeadKind::softplus}) {
    DenseNet net("n", {6, 16, 16, 4}, hk);
    net.init(rng);
    Matrix x = random_matrix(5, 6, rng);
    Tape t;
    VarId y = net.forward(t, t.constant(x));
    for (std::size_t r = 0; r < 5; ++r) {
      Vec row(x.row(r), x.row(r) + 6);
      Vec plain = net.forward(row);
      for (std::size_t k = 0; k < 4; ++k)
        CHECK(t.value(y)(r, k) == doctest::Approx(plain[k]).epsilon(1e-13));
    }
  }
}

TEST_CASE("init reproducibility and bounds") {
  Rng a(33), b(33), c(34);
  DenseNet n1("n", {10, 16, 4}, HeadKind::linear);
  DenseNet n2("n", {10, 16, 4}, HeadKind::linear);
  DenseNet n3("n", {10, 16, 4}, HeadKind::linear);
  n1.init(a);
  n2.init(b);
  n3.init(c);
  auto p1 = n1.params(), p2 = n2.params(), p3 = n3.params();
  bool all_same = true, any_diff = false;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    all_same = all_same && (p1[i]->value.data == p2[i]->value.data);
    any_diff = any_diff || (p1[i]->value.data != p3[i]->value.data);
  }
  CHECK(all_same);
  CHECK(any_diff);

  // Kaiming-uniform bound sqrt(6/fan_in); biases zero
  double bound0 = std::sqrt(6.0 / 10.0), bound1 = std::sqrt(6.0 / 16.0);
  for (double x : p1[0]->value.data) CHECK(std::abs(x) <= bound0);
  for (double x : p1[2]->value.data) CHECK(std::abs(x) <= bound1);
  for (double x : p1[1]->value.data) CHECK(x == 0.0);
  for (double x : p1[3]->value.data) CHECK(x == 0.0);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Param p("p", 2, 2);
  p.value.fill(0.7);
  p.zero_grad();
  AdamState adam(1e-3);
  adam.step({&p});
  for (double x : p.value.data) CHECK(x == 0.7);
}

TEST_CASE("adam: constant gradient step magnitude approaches lr") {
  Param p("p", 1, 1);
  p.value(0, 0) = 0.0;
  AdamState adam(1e-3);
  double prev = 0.0;
  for (int i = 0; i < 2000; ++i) {
    p.grad(0, 0) = 3.7;  // constant positive gradient
    prev = p.value(0, 0);
    adam.step({&p});
  }
  double last_step = prev - p.value(0, 0);
  CHECK(last_step == doctest::Approx(1e-3).epsilon(1e-3));
  CHECK(p.value(0, 0) < 0.0);
}

TEST_CASE("adam determinism") {
  auto run = [&]() {
    Rng rng(77);
    DenseNet net("n", {4, 8, 2}, HeadKind::linear);
    net.init(rng);
    AdamState adam(1e-3);
    Matrix x = random_matrix(6, 4, rng);
    Matrix tgt = random_matrix(6, 2, rng);
    for (int i = 0; i < 20; ++i) {
      net.zero_grad();
      Tape t;
      t.backward(t.mean_sq_diff(net.forward(t, t.constant(x)), tgt));
      adam.step(net.params());
    }
    Vec flat;
    for (const Param* p : std::as_const(net).params())
      flat.insert(flat.end(), p->value.data.begin(), p->value.data.end());
    return flat;
  };
  CHECK(run() == run());
}
