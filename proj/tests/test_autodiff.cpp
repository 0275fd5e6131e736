#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "pinn/autodiff.hpp"
#include "pinn/rng.hpp"

using namespace pinn::ad;

namespace {

double eval1(const Tape& t, NodeId out, std::vector<double> inputs,
             std::vector<double> params = {}) {
  return evaluate(t, inputs, params, std::array{out})[0];
}

// central difference in one coordinate of a callable double(double)
template <typename F>
double central_fd(F f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

struct RandomTape {
  Tape tape;
  NodeId output = kNoNode;
  std::vector<NodeId> inputs;
  std::vector<NodeId> params;
};

// Builds a smooth random expression over 2 inputs and 3 parameters, with a
// first-order input derivative spliced into the middle so parameter gradients
// exercise the tangent extension path.
RandomTape make_random_tape(std::uint64_t seed, bool with_derivative_node) {
  RandomTape r;
  Tape& t = r.tape;
  std::mt19937_64 gen(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(gen() % n); };

  r.inputs = {t.input(), t.input()};
  r.params = {t.parameter(), t.parameter(), t.parameter()};
  std::vector<NodeId> pool(r.inputs);
  pool.insert(pool.end(), r.params.begin(), r.params.end());
  pool.push_back(t.constant(0.7));

  auto grow = [&](std::size_t steps) {
    for (std::size_t s = 0; s < steps; ++s) {
      NodeId a = pool[pick(pool.size())];
      NodeId b = pool[pick(pool.size())];
      switch (gen() % 10) {
        case 0: pool.push_back(t.add(a, b)); break;
        case 1: pool.push_back(t.sub(a, b)); break;
        case 2: pool.push_back(t.mul(a, b)); break;
        case 3: pool.push_back(t.sin(a)); break;
        case 4: pool.push_back(t.cos(a)); break;
        case 5: pool.push_back(t.tanh(a)); break;
        case 6: pool.push_back(t.sigmoid(a)); break;
        case 7: pool.push_back(t.swish(a)); break;
        case 8: pool.push_back(t.div(a, t.add(t.constant(1.5), t.mul(b, b)))); break;
        default: pool.push_back(t.exp(t.tanh(a))); break;
      }
    }
  };
  grow(8);
  if (with_derivative_node) {
    pool.push_back(t.derivative(pool[pool.size() - 1 - pick(4)], r.inputs[pick(2)], 1));
    grow(4);
  }
  r.output = t.tanh(t.mul(t.constant(0.5), pool.back()));
  return r;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("unary op values match the standard library") {
  Tape t;
  NodeId x = t.input();
  struct Row {
    NodeId node;
    double (*ref)(double);
  };
  std::vector<Row> rows = {
      {t.sin(x), [](double v) { return std::sin(v); }},
      {t.cos(x), [](double v) { return std::cos(v); }},
      {t.exp(x), [](double v) { return std::exp(v); }},
      {t.tanh(x), [](double v) { return std::tanh(v); }},
      {t.sigmoid(x), [](double v) { return 1.0 / (1.0 + std::exp(-v)); }},
      {t.swish(x), [](double v) { return v / (1.0 + std::exp(-v)); }},
      {t.relu(x), [](double v) { return v > 0 ? v : 0.0; }},
      {t.step(x), [](double v) { return v > 0 ? 1.0 : 0.0; }},
      {t.neg(x), [](double v) { return -v; }},
  };
  for (double v : {-2.3, -0.4, 0.0, 0.9, 3.1}) {
    for (const auto& row : rows)
      CHECK(eval1(t, row.node, {v}) == doctest::Approx(row.ref(v)).epsilon(1e-15));
  }
}

TEST_CASE("binary ops and pow evaluate correctly") {
  Tape t;
  NodeId x = t.input(), y = t.input();
  NodeId sum = t.add(x, y), dif = t.sub(x, y), prd = t.mul(x, y), quo = t.div(x, y);
  NodeId pw = t.pow(x, 1.7);
  CHECK(eval1(t, sum, {2.5, -1.25}) == 1.25);
  CHECK(eval1(t, dif, {2.5, -1.25}) == 3.75);
  CHECK(eval1(t, prd, {2.5, -1.25}) == -3.125);
  CHECK(eval1(t, quo, {2.5, -1.25}) == -2.0);
  CHECK(eval1(t, pw, {2.5, 1.0}) == doctest::Approx(std::pow(2.5, 1.7)).epsilon(1e-15));
}

TEST_CASE("first derivatives match finite differences per op") {
  Tape t;
  NodeId x = t.input();
  struct Row {
    NodeId d;
    double (*f)(double);
  };
  std::vector<Row> rows = {
      {t.derivative(t.sin(x), x), [](double v) { return std::sin(v); }},
      {t.derivative(t.cos(x), x), [](double v) { return std::cos(v); }},
      {t.derivative(t.exp(x), x), [](double v) { return std::exp(v); }},
      {t.derivative(t.tanh(x), x), [](double v) { return std::tanh(v); }},
      {t.derivative(t.sigmoid(x), x), [](double v) { return 1.0 / (1.0 + std::exp(-v)); }},
      {t.derivative(t.swish(x), x), [](double v) { return v / (1.0 + std::exp(-v)); }},
      {t.derivative(t.pow(t.add(t.mul(x, x), t.constant(0.5)), 1.3), x),
       [](double v) { return std::pow(v * v + 0.5, 1.3); }},
  };
  for (double v : {-1.7, -0.3, 0.45, 1.9}) {
    for (const auto& row : rows) {
      double fd = central_fd(row.f, v, 1e-6);
      CHECK(eval1(t, row.d, {v}) == doctest::Approx(fd).epsilon(1e-7));
    }
  }
}

TEST_CASE("second derivative of composite matches closed form") {
  // f(x) = sin(2x) * exp(x/3); f'' computed symbolically
  Tape t;
  NodeId x = t.input();
  NodeId f = t.mul(t.sin(t.mul(t.constant(2.0), x)), t.exp(t.div(x, t.constant(3.0))));
  NodeId fxx = t.derivative(f, x, 2);
  auto ref = [](double v) {
    double s = std::sin(2 * v), c = std::cos(2 * v), e = std::exp(v / 3.0);
    return e * (-4.0 * s + (4.0 / 3.0) * c + s / 9.0);
  };
  for (double v : {-1.1, 0.0, 0.37, 2.2})
    CHECK(eval1(t, fxx, {v}) == doctest::Approx(ref(v)).epsilon(1e-12));
}

TEST_CASE("mixed partials commute") {
  Tape t;
  NodeId x = t.input(), y = t.input();
  NodeId f = t.add(t.mul(t.sin(t.mul(x, y)), t.exp(t.mul(t.constant(0.3), y))),
                   t.mul(t.mul(x, x), t.tanh(y)));
  NodeId dxy = t.derivative(t.derivative(f, x, 1), y, 1);
  NodeId dyx = t.derivative(t.derivative(f, y, 1), x, 1);
  std::mt19937_64 gen(11);
  for (int i = 0; i < 25; ++i) {
    double px = 3.0 * pinn::uniform01(gen) - 1.5;
    double py = 3.0 * pinn::uniform01(gen) - 1.5;
    double a = eval1(t, dxy, {px, py});
    double b = eval1(t, dyx, {px, py});
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("step derivative is zero and relu derivative is a step") {
  Tape t;
  NodeId x = t.input();
  NodeId ds = t.derivative(t.step(x), x);
  NodeId dr = t.derivative(t.relu(x), x);
  CHECK(eval1(t, ds, {-1.0}) == 0.0);
  CHECK(eval1(t, ds, {2.0}) == 0.0);
  CHECK(eval1(t, dr, {-1.0}) == 0.0);
  CHECK(eval1(t, dr, {2.0}) == 1.0);
}

TEST_CASE("derivative results are cached per direction") {
  Tape t;
  NodeId x = t.input();
  NodeId f = t.sin(t.mul(x, x));
  NodeId d1 = t.derivative(f, x, 1);
  std::size_t size_after = t.size();
  CHECK(t.derivative(f, x, 1) == d1);
  CHECK(t.size() == size_after);  // no new nodes
}

TEST_CASE("constants are deduplicated") {
  Tape t;
  NodeId a = t.constant(2.5);
  NodeId b = t.constant(2.5);
  NodeId c = t.constant(-2.5);
  CHECK(a == b);
  CHECK(a != c);
}

TEST_CASE("derivative argument validation") {
  Tape t;
  NodeId x = t.input();
  NodeId p = t.parameter();
  NodeId f = t.mul(x, p);
  CHECK_THROWS_AS((void)t.derivative(f, p, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)t.derivative(f, x, 3), std::invalid_argument);
  CHECK_THROWS_AS((void)t.derivative(f, x, 0), std::invalid_argument);
}

TEST_CASE("affine matches an explicit dot product") {
  Tape t;
  std::vector<NodeId> xs = {t.input(), t.input(), t.input()};
  std::vector<NodeId> ws = {t.parameter(), t.parameter(), t.parameter()};
  NodeId bias = t.parameter();
  NodeId fused = t.affine(xs, ws, bias);
  NodeId manual = t.add(
      t.add(t.add(t.mul(xs[0], ws[0]), t.mul(xs[1], ws[1])), t.mul(xs[2], ws[2])), bias);

  std::vector<double> in = {0.3, -1.2, 2.1};
  std::vector<double> th = {0.5, -0.25, 1.5, 0.75};
  auto vals = evaluate(t, in, th, std::array{fused, manual});
  CHECK(vals[0] == doctest::Approx(vals[1]).epsilon(1e-15));

  auto g1 = grad_parameters(t, fused, in, th);
  auto g2 = grad_parameters(t, manual, in, th);
  REQUIRE(g1.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-15));

  // input tangents go through the fused op too
  NodeId dfused = t.derivative(fused, xs[1], 1);
  CHECK(eval1(t, dfused, in, th) == doctest::Approx(-0.25).epsilon(1e-15));
}

TEST_CASE("parameter gradients of random tapes match finite differences") {
  std::mt19937_64 gen(99);
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    RandomTape r = make_random_tape(1000 + trial, trial % 2 == 1);
    std::vector<double> in = {3.0 * pinn::uniform01(gen) - 1.5,
                              3.0 * pinn::uniform01(gen) - 1.5};
    std::vector<double> th = {2.0 * pinn::uniform01(gen) - 1.0,
                              2.0 * pinn::uniform01(gen) - 1.0,
                              2.0 * pinn::uniform01(gen) - 1.0};
    auto grad = grad_parameters(r.tape, r.output, in, th);
    REQUIRE(grad.size() == th.size());
    for (std::size_t k = 0; k < th.size(); ++k) {
      auto f = [&](double v) {
        std::vector<double> tk = th;
        tk[k] = v;
        return eval1(r.tape, r.output, in, tk);
      };
      double fd = central_fd(f, th[k], 1e-5);
      CHECK(grad[k] ==
            doctest::Approx(fd).epsilon(5e-6).scale(std::max(1.0, std::abs(fd))));
    }
  }
}

TEST_CASE("input derivatives of random tapes match finite differences") {
  std::mt19937_64 gen(7);
  for (std::uint64_t trial = 0; trial < 60; ++trial) {
    RandomTape r = make_random_tape(5000 + trial, false);
    NodeId d0 = r.tape.derivative(r.output, r.inputs[0], 1);
    NodeId d00 = r.tape.derivative(r.output, r.inputs[0], 2);
    std::vector<double> in = {3.0 * pinn::uniform01(gen) - 1.5,
                              3.0 * pinn::uniform01(gen) - 1.5};
    std::vector<double> th = {2.0 * pinn::uniform01(gen) - 1.0,
                              2.0 * pinn::uniform01(gen) - 1.0,
                              2.0 * pinn::uniform01(gen) - 1.0};
    auto f = [&](double v) { return eval1(r.tape, r.output, {v, in[1]}, th); };
    double fd1 = central_fd(f, in[0], 1e-6);
    double fd2 = (f(in[0] + 1e-4) - 2.0 * f(in[0]) + f(in[0] - 1e-4)) / 1e-8;
    CHECK(eval1(r.tape, d0, in, th) ==
          doctest::Approx(fd1).epsilon(1e-6).scale(std::max(1.0, std::abs(fd1))));
    CHECK(eval1(r.tape, d00, in, th) ==
          doctest::Approx(fd2).epsilon(5e-5).scale(std::max(1.0, std::abs(fd2))));
  }
}

TEST_CASE("batched lanes agree with single-point evaluation") {
  RandomTape r = make_random_tape(42, true);
  NodeId dx = r.tape.derivative(r.output, r.inputs[0], 1);
  std::vector<double> th = {0.4, -0.9, 0.15};

  const std::size_t lanes = 64, active = 37;
  Workspace ws(r.tape, lanes);
  ws.bind_parameters(th);
  std::mt19937_64 gen(3);
  std::vector<double> rows(active * 2);
  for (auto& v : rows) v = 3.0 * pinn::uniform01(gen) - 1.5;
  ws.evaluate(rows, active);

  for (std::size_t k = 0; k < active; ++k) {
    std::vector<double> in = {rows[2 * k], rows[2 * k + 1]};
    CHECK(ws.value(r.output, k) == eval1(r.tape, r.output, in, th));
    CHECK(ws.value(dx, k) == eval1(r.tape, dx, in, th));
  }
}

TEST_CASE("per-lane reverse seeds fold a weighted sum into one sweep") {
  RandomTape r = make_random_tape(77, true);
  std::vector<double> th = {0.3, 0.8, -0.5};
  const std::size_t active = 5;
  Workspace ws(r.tape, 8);
  ws.bind_parameters(th);
  std::mt19937_64 gen(13);
  std::vector<double> rows(active * 2);
  for (auto& v : rows) v = 2.0 * pinn::uniform01(gen) - 1.0;
  std::vector<double> seed = {0.2, 1.0, -0.7, 0.0, 2.5};

  ws.evaluate(rows, active);
  ws.reverse(r.output, seed, active);
  std::vector<double> folded(th.size(), 0.0);
  ws.accumulate_param_grad(folded, active);

  std::vector<double> expected(th.size(), 0.0);
  for (std::size_t k = 0; k < active; ++k) {
    std::array<double, 2> in{rows[2 * k], rows[2 * k + 1]};
    auto g = grad_parameters(r.tape, r.output, in, th);
    for (std::size_t i = 0; i < th.size(); ++i) expected[i] += seed[k] * g[i];
  }
  for (std::size_t i = 0; i < th.size(); ++i)
    CHECK(folded[i] == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("per-lane gradient norms match per-point gradients") {
  RandomTape r = make_random_tape(123, false);
  std::vector<double> th = {-0.2, 0.6, 0.9};
  const std::size_t active = 6;
  Workspace ws(r.tape, 8);
  ws.bind_parameters(th);
  std::mt19937_64 gen(29);
  std::vector<double> rows(active * 2);
  for (auto& v : rows) v = 2.0 * pinn::uniform01(gen) - 1.0;
  std::vector<double> ones(active, 1.0);

  ws.evaluate(rows, active);
  ws.reverse(r.output, ones, active);
  std::vector<double> norms(active);
  ws.param_grad_sq_norms(norms, active);

  for (std::size_t k = 0; k < active; ++k) {
    std::array<double, 2> in{rows[2 * k], rows[2 * k + 1]};
    auto g = grad_parameters(r.tape, r.output, in, th);
    double sq = 0.0;
    for (double v : g) sq += v * v;
    CHECK(norms[k] == doctest::Approx(sq).epsilon(1e-12));
  }
}

}  // TEST_SUITE
