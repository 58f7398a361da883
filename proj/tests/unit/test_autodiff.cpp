#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "vpp/autodiff.hpp"

using vpp::Matrix;
using vpp::ad::Tape;
using vpp::ad::Var;

namespace {

Matrix random_matrix(int r, int c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(r, c);
  for (double& x : m.v) x = d(rng);
  return m;
}

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Reduces the op output to a scalar through a fixed random projection and a
// cross-entropy, so every output entry influences the loss differently.
double scalar_loss(Tape& t, Var out, Var& loss_var) {
  const Matrix& o = t.value(out);
  const Var proj = t.constant(random_matrix(o.cols, 5, 99));
  const Var logits = t.matmul(out, proj);
  std::vector<int> targets(o.rows);
  for (int i = 0; i < o.rows; ++i) targets[i] = i % 5;
  loss_var = t.cross_entropy(logits, targets);
  return t.value(loss_var)(0, 0);
}

double eval(std::vector<Matrix>& inputs, const Builder& f) {
  Tape t;
  std::vector<Var> vars;
  for (auto& m : inputs) vars.push_back(t.leaf(m, false));
  Var l;
  return scalar_loss(t, f(t, vars), l);
}

// Central differences against the tape over every input coordinate.
void check_grad(std::vector<Matrix> inputs, const Builder& f, double tol = 1e-6) {
  Tape t;
  std::vector<Var> vars;
  for (auto& m : inputs) vars.push_back(t.leaf(m, true));
  Var l;
  scalar_loss(t, f(t, vars), l);
  t.backward(l);
  std::vector<Matrix> analytic;
  for (Var v : vars) analytic.push_back(t.grad(v));

  const double h = 1e-5;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].v.size(); ++i) {
      const double keep = inputs[k].v[i];
      inputs[k].v[i] = keep + h;
      const double up = eval(inputs, f);
      inputs[k].v[i] = keep - h;
      const double down = eval(inputs, f);
      inputs[k].v[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[k].v[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      CHECK_MESSAGE(rel < tol, "input ", k, " coord ", i, " analytic ", a, " numeric ", numeric);
    }
  }
}

}  // namespace

TEST_CASE("elementwise and linear ops") {
  check_grad({random_matrix(3, 4, 1), random_matrix(4, 6, 2)},
             [](Tape& t, const std::vector<Var>& v) { return t.matmul(v[0], v[1]); });
  check_grad({random_matrix(3, 4, 3), random_matrix(3, 4, 4)},
             [](Tape& t, const std::vector<Var>& v) { return t.add(v[0], v[1]); });
  check_grad({random_matrix(3, 4, 5), random_matrix(1, 4, 6)},
             [](Tape& t, const std::vector<Var>& v) { return t.add_row(v[0], v[1]); });
  check_grad({random_matrix(3, 4, 7), random_matrix(6, 4, 8)},
             [](Tape& t, const std::vector<Var>& v) { return t.add_rows(v[0], v[1], 2); });
  check_grad({random_matrix(3, 4, 9)},
             [](Tape& t, const std::vector<Var>& v) { return t.scale(v[0], -1.7); });
  check_grad({random_matrix(3, 4, 10, 2.0)},
             [](Tape& t, const std::vector<Var>& v) { return t.gelu(v[0]); });
}

TEST_CASE("layernorm") {
  check_grad({random_matrix(4, 6, 11), random_matrix(1, 6, 12), random_matrix(1, 6, 13)},
             [](Tape& t, const std::vector<Var>& v) { return t.layernorm(v[0], v[1], v[2]); });
  Tape t;
  const Var x = t.constant(random_matrix(2, 8, 14, 3.0));
  const Var y = t.layernorm(x, t.constant(Matrix(1, 8, 1.0)), t.constant(Matrix(1, 8, 0.0)));
  for (int r = 0; r < 2; ++r) {
    double mean = 0, var = 0;
    for (int c = 0; c < 8; ++c) mean += t.value(y)(r, c) / 8;
    for (int c = 0; c < 8; ++c) var += std::pow(t.value(y)(r, c) - mean, 2) / 8;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("row plumbing ops") {
  check_grad({random_matrix(2, 3, 15), random_matrix(4, 3, 16)},
             [](Tape& t, const std::vector<Var>& v) { return t.concat_rows(v[0], v[1]); });
  check_grad({random_matrix(5, 3, 17)},
             [](Tape& t, const std::vector<Var>& v) { return t.slice_rows(v[0], 1, 3); });
  check_grad({random_matrix(5, 3, 18)}, [](Tape& t, const std::vector<Var>& v) {
    const int ids[] = {4, 0, 4, 2};
    return t.gather_rows(v[0], ids);
  });
  check_grad({random_matrix(16, 3, 19)},
             [](Tape& t, const std::vector<Var>& v) { return t.patchify(v[0], 4, 2); });
}

TEST_CASE("attention gradients, plain, causal and masked") {
  const std::vector<Matrix> qkv = {random_matrix(3, 8, 20), random_matrix(5, 8, 21),
                                   random_matrix(5, 8, 22)};
  check_grad(qkv, [](Tape& t, const std::vector<Var>& v) {
    return t.attention(v[0], v[1], v[2], 2, false);
  });
  check_grad(qkv, [](Tape& t, const std::vector<Var>& v) {
    return t.attention(v[0], v[1], v[2], 4, true);
  });
  check_grad(qkv, [](Tape& t, const std::vector<Var>& v) {
    static const unsigned char mask[] = {1, 0, 1, 1, 0};
    return t.attention(v[0], v[1], v[2], 2, false, mask);
  });
}

TEST_CASE("attention semantics") {
  Tape t;
  const Var q = t.constant(random_matrix(4, 4, 23));
  const Var k = t.constant(random_matrix(4, 4, 24));
  Matrix vm = random_matrix(4, 4, 25);
  const Var v = t.constant(vm);
  // Causal: the first query only sees the first key, so it returns v row 0.
  const Var o = t.attention(q, k, v, 1, true);
  for (int c = 0; c < 4; ++c) CHECK(t.value(o)(0, c) == doctest::Approx(vm(0, c)));

  // A hidden key has no influence.
  const unsigned char mask[] = {1, 1, 0, 1};
  const Var a = t.attention(q, k, v, 2, false, mask);
  Matrix vm2 = vm;
  for (int c = 0; c < 4; ++c) vm2(2, c) += 50.0;
  const Var b = t.attention(q, k, t.constant(vm2), 2, false, mask);
  CHECK(t.value(a).v == t.value(b).v);

  // No visible key gives a zero row.
  const unsigned char none[] = {0, 0, 0, 0};
  for (double x : t.value(t.attention(q, k, v, 2, false, none)).v) CHECK(x == 0.0);
}

TEST_CASE("masked blend gradient vanishes off the mask") {
  const unsigned char mask[] = {1, 0, 0, 1, 1, 0};
  check_grad({random_matrix(6, 3, 26), random_matrix(6, 3, 27)},
             [&](Tape& t, const std::vector<Var>& v) { return t.masked_blend(v[0], v[1], mask, 0.7); });
  Tape t;
  const Var x = t.leaf(random_matrix(6, 3, 28), true);
  const Var p = t.leaf(random_matrix(6, 3, 29), true);
  Var l;
  scalar_loss(t, t.masked_blend(x, p, mask, 0.7), l);
  t.backward(l);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 3; ++c)
      if (!mask[r]) CHECK(t.grad(p)(r, c) == 0.0);
}

TEST_CASE("cross entropy value") {
  Tape t;
  Matrix logits(2, 3);
  logits(0, 0) = 1.0;
  logits(1, 2) = 2.0;
  const int targets[] = {0, 1};
  const Var l = t.cross_entropy(t.constant(logits), targets);
  const double r0 = -(1.0 - std::log(std::exp(1.0) + 2.0));
  const double r1 = -(0.0 - std::log(2.0 + std::exp(2.0)));
  CHECK(t.value(l)(0, 0) == doctest::Approx((r0 + r1) / 2).epsilon(1e-12));
}
