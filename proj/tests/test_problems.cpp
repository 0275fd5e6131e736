#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "pinn/errors.hpp"
#include "pinn/problems.hpp"
#include "pinn/rng.hpp"

using namespace pinn;
using namespace pinn::problems;
using ad::NodeId;

namespace {

constexpr double kPi = std::numbers::pi;

std::string write_hex_polygon() {
  static const std::string path =
      (std::filesystem::temp_directory_path() / "problems_test_hex.poly").string();
  std::ofstream out(path);
  for (int k = 0; k < 6; ++k) {
    double a = 2.0 * kPi * k / 6.0;
    out << 1.2 * std::cos(a) << " " << 1.2 * std::sin(a) << "\n";
  }
  return path;
}

ProblemConfig elasticity_config() {
  ProblemConfig pc;
  pc.name = "elasticity";
  pc.geometry_path = write_hex_polygon();
  pc.net.hidden = {6, 6};
  pc.net.activation = nn::Activation::kSine;
  pc.net.init_seed = 3;
  return pc;
}

SamplingConfig small_sampling(std::size_t n = 64, std::size_t s = 16) {
  SamplingConfig sc;
  sc.n_collocation = n;
  sc.n_seeds = s;
  sc.rng_seed = 5;
  return sc;
}

std::vector<double> zero_theta(const Problem& p) {
  return std::vector<double>(nn::init_glorot(p.net).flat_size(), 0.0);
}

// closed-form manufactured displacement for finite differencing
double mf_u(double x, double y) { return elasticity_exact(x, y)[0]; }
double mf_v(double x, double y) { return elasticity_exact(x, y)[1]; }

template <typename F>
double fd_xx(F f, double x, double y, double h) {
  return (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h);
}
template <typename F>
double fd_yy(F f, double x, double y, double h) {
  return (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h);
}
template <typename F>
double fd_xy(F f, double x, double y, double h) {
  return (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) /
         (4.0 * h * h);
}

// transient part of the initial profile, expanded in the sine series
double series_gap(double x) { return 10.0 * (x - x * x) - (x - x * x * x) / 2.0; }

double simpson(double (*f)(double, int), int n_mode, int intervals) {
  const double h = 1.0 / intervals;
  double s = f(0.0, n_mode) + f(1.0, n_mode);
  for (int i = 1; i < intervals; ++i)
    s += f(i * h, n_mode) * ((i % 2 == 1) ? 4.0 : 2.0);
  return s * h / 3.0;
}

double series_integrand(double x, int n) { return series_gap(x) * std::sin(n * kPi * x); }

// Crank-Nicolson solve of u_t = u_xx + 3x with zero Dirichlet data,
// tridiagonal systems by the Thomas algorithm.
std::vector<double> crank_nicolson(std::size_t nodes, std::size_t steps, double t_end) {
  const std::size_t m = nodes - 2;  // interior unknowns
  const double dx = 1.0 / static_cast<double>(nodes - 1);
  const double dt = t_end / static_cast<double>(steps);
  const double r = dt / (dx * dx);

  std::vector<double> u(m), f(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = static_cast<double>(i + 1) * dx;
    u[i] = 10.0 * (x - x * x);
    f[i] = 3.0 * x;
  }
  const double diag = 1.0 + r, off = -r / 2.0;
  std::vector<double> cp(m), rhs(m);
  for (std::size_t step = 0; step < steps; ++step) {
    for (std::size_t i = 0; i < m; ++i) {
      const double left = i > 0 ? u[i - 1] : 0.0;
      const double right = i + 1 < m ? u[i + 1] : 0.0;
      rhs[i] = u[i] + 0.5 * r * (left - 2.0 * u[i] + right) + dt * f[i];
    }
    cp[0] = off / diag;
    rhs[0] /= diag;
    for (std::size_t i = 1; i < m; ++i) {
      const double denom = diag - off * cp[i - 1];
      cp[i] = off / denom;
      rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
    }
    u[m - 1] = rhs[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) u[i] = rhs[i] - cp[i] * u[i + 1];
  }
  std::vector<double> full(nodes, 0.0);
  for (std::size_t i = 0; i < m; ++i) full[i + 1] = u[i];
  return full;
}

}  // namespace

TEST_SUITE("problems") {

TEST_CASE("manufactured displacement nodes match the closed form") {
  ad::Tape t;
  NodeId x = t.input(), y = t.input();
  auto [u, v] = append_manufactured_displacement(t, x, y);
  std::mt19937_64 gen(2);
  for (int i = 0; i < 50; ++i) {
    double px = 3.0 * uniform01(gen) - 1.5, py = 3.0 * uniform01(gen) - 1.5;
    auto vals = ad::evaluate(t, std::array{px, py}, {}, std::array{u, v});
    auto ref = elasticity_exact(px, py);
    CHECK(vals[0] == doctest::Approx(ref[0]).epsilon(1e-15));
    CHECK(vals[1] == doctest::Approx(ref[1]).epsilon(1e-15));
  }
}

TEST_CASE("manufactured field is an exact root of the residual graph") {
  ad::Tape t;
  NodeId x = t.input(), y = t.input();
  auto [u, v] = append_manufactured_displacement(t, x, y);
  auto mat = lame_from_enu(0.25, 0.2);
  auto res = append_elasticity_residuals(t, u, v, x, y, mat);
  std::mt19937_64 gen(4);
  for (int i = 0; i < 100; ++i) {
    double px = 3.0 * uniform01(gen) - 1.5, py = 3.0 * uniform01(gen) - 1.5;
    auto vals = ad::evaluate(t, std::array{px, py}, {}, std::array{res.n1, res.n2});
    CHECK(vals[0] == 0.0);  // forcing cancels the operator bitwise
    CHECK(vals[1] == 0.0);
  }
}

TEST_CASE("tape-derived forcing matches finite differences of the closed form") {
  ad::Tape t;
  NodeId x = t.input(), y = t.input();
  auto [u, v] = append_manufactured_displacement(t, x, y);
  auto mat = lame_from_enu(0.25, 0.2);
  auto res = append_elasticity_residuals(t, u, v, x, y, mat);

  const double h = 1e-4;
  std::mt19937_64 gen(6);
  for (int i = 0; i < 20; ++i) {
    double px = 2.0 * uniform01(gen) - 1.0, py = 2.0 * uniform01(gen) - 1.0;
    auto vals = ad::evaluate(t, std::array{px, py}, {}, std::array{res.fx, res.fy});
    const double uxx = fd_xx(mf_u, px, py, h), uyy = fd_yy(mf_u, px, py, h);
    const double vxx = fd_xx(mf_v, px, py, h), vyy = fd_yy(mf_v, px, py, h);
    const double uxy = fd_xy(mf_u, px, py, h), vxy = fd_xy(mf_v, px, py, h);
    const double lm = mat.lambda + mat.mu;
    const double fx = -(lm * (uxx + vxy) + mat.mu * (uxx + uyy));
    const double fy = -(lm * (uxy + vyy) + mat.mu * (vxx + vyy));
    CHECK(vals[0] == doctest::Approx(fx).epsilon(1e-6).scale(1.0));
    CHECK(vals[1] == doctest::Approx(fy).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("elasticity problem geometry, pairing, and zero-network probes") {
  auto pc = elasticity_config();
  auto sc = small_sampling(50, 10);
  sc.n_boundary = 7;
  Problem p = build_problem(pc, sc);

  CHECK(p.term_names == std::vector<std::string>{"residual", "boundary"});
  CHECK(p.term_weights == std::vector<double>{1.0, 1.0});
  CHECK(p.tape_inputs() == 4);
  REQUIRE(p.collocation.size() == 50);
  REQUIRE(p.collocation.inputs.size() == 200);

  for (std::size_t j = 0; j < 50; ++j) {
    auto pt = p.collocation.interior.point(j);
    CHECK(p.domain.contains(pt[0], pt[1]));
    CHECK(p.collocation.inputs[j * 4 + 0] == pt[0]);
    CHECK(p.collocation.inputs[j * 4 + 1] == pt[1]);
    // paired boundary slots repeat with period n_boundary
    if (j >= 7) {
      CHECK(p.collocation.inputs[j * 4 + 2] == p.collocation.inputs[(j - 7) * 4 + 2]);
      CHECK(p.collocation.inputs[j * 4 + 3] == p.collocation.inputs[(j - 7) * 4 + 3]);
    }
  }

  // with zero parameters the network vanishes, so the residual probe reduces
  // to the forcing and the boundary term to the squared exact displacement
  auto theta = zero_theta(p);
  for (std::size_t j = 0; j < 8; ++j) {
    std::span<const double> row{p.collocation.inputs.data() + j * 4, 4};
    auto vals = ad::evaluate(p.tape, row, theta,
                             std::array{p.probes.at("N1"), p.probes.at("fx"),
                                        p.term_nodes[1]});
    CHECK(vals[0] == vals[1]);
    auto exact = elasticity_exact(row[2], row[3]);
    CHECK(vals[2] ==
          doctest::Approx(exact[0] * exact[0] + exact[1] * exact[1]).epsilon(1e-14));
  }
}

TEST_CASE("diffusion term values at a zero network") {
  ProblemConfig pc;
  pc.name = "diffusion";
  pc.net.hidden = {5};
  pc.net.activation = nn::Activation::kTanh;
  Problem p = build_problem(pc, small_sampling());
  auto theta = zero_theta(p);

  // inputs: t, x, x_init, tb, xb
  std::array<double, 5> row{0.3, 0.5, 0.5, 0.2, 1.0};
  auto vals = ad::evaluate(p.tape, row, theta,
                           std::array{p.term_nodes[0], p.term_nodes[1], p.term_nodes[2]});
  CHECK(vals[0] == 2.25);  // (-3x)^2 at x = 0.5
  CHECK(vals[1] == 6.25);  // (10(x - x^2))^2 at x = 0.5
  CHECK(vals[2] == 0.0);

  CHECK(p.term_weights == std::vector<double>{1.0, 500.0, 500.0});
  for (std::size_t j = 0; j < p.collocation.size(); ++j) {
    CHECK(p.collocation.inputs[j * 5 + 0] >= 0.0);
    CHECK(p.collocation.inputs[j * 5 + 0] <= 1.0);
    CHECK(p.collocation.inputs[j * 5 + 2] >= 0.0);  // x at t=0
    CHECK(p.collocation.inputs[j * 5 + 2] <= 1.0);
    double xb = p.collocation.inputs[j * 5 + 4];
    CHECK((xb == 0.0 || xb == 1.0));
  }
}

TEST_CASE("diffusion series reproduces the initial profile at t = 0") {
  for (double x : {0.1, 0.3, 0.5, 0.7, 0.9})
    CHECK(diffusion_reference(0.0, x) ==
          doctest::Approx(10.0 * (x - x * x)).epsilon(1e-8));
}

TEST_CASE("series coefficients match numerical quadrature") {
  constexpr double pi3 = kPi * kPi * kPi;
  for (int n = 1; n <= 6; ++n) {
    const double expected = ((n % 2 == 1) ? 74.0 : 6.0) / (n * n * n * pi3);
    const double quad = 2.0 * simpson(series_integrand, n, 20000);
    CHECK(quad == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("series satisfies the equation by finite differences") {
  const double h = 1e-4;
  for (double t : {0.05, 0.2, 0.6}) {
    for (double x : {0.2, 0.5, 0.8}) {
      const double ut =
          (diffusion_reference(t + h, x) - diffusion_reference(t - h, x)) / (2.0 * h);
      const double uxx = (diffusion_reference(t, x + h) - 2.0 * diffusion_reference(t, x) +
                          diffusion_reference(t, x - h)) /
                         (h * h);
      CHECK(std::abs(ut - uxx - 3.0 * x) < 1e-5);
    }
  }
}

TEST_CASE("series boundary values vanish") {
  for (double t : {0.0, 0.1, 0.5, 1.0}) {
    CHECK(std::abs(diffusion_reference(t, 0.0)) < 1e-12);
    CHECK(std::abs(diffusion_reference(t, 1.0)) < 1e-12);
  }
}

TEST_CASE("series agrees with an implicit finite-difference solve") {
  const std::size_t nodes = 201, steps = 1000;
  const double t_end = 0.25;
  auto u = crank_nicolson(nodes, steps, t_end);
  double worst = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(nodes - 1);
    worst = std::max(worst, std::abs(u[i] - diffusion_reference(t_end, x)));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("plane stress domain is normalized and masks are one-hot") {
  ProblemConfig pc;
  pc.name = "planestress";
  pc.net.hidden = {6};
  pc.net.activation = nn::Activation::kSwish;
  Problem p = build_problem(pc, small_sampling(400, 40));

  auto bb = p.domain.bbox();
  CHECK(bb[0] == doctest::Approx(-55.0 / 70.0).epsilon(1e-15));
  CHECK(bb[1] == doctest::Approx(55.0 / 70.0).epsilon(1e-15));
  CHECK(bb[2] == -1.0);
  CHECK(bb[3] == 1.0);
  REQUIRE(p.domain.holes().size() == 3);
  CHECK(p.domain.holes()[0].r == doctest::Approx(7.5 / 35.0).epsilon(1e-15));
  CHECK(p.domain.holes()[0].cy == doctest::Approx(20.0 / 35.0).epsilon(1e-15));

  REQUIRE(p.term_nodes.size() == 9);
  CHECK(p.term_weights ==
        std::vector<double>{500, 1000, 1000, 75, 75, 200, 75, 75, 75});
  CHECK(p.tape_inputs() == 11);

  const auto& holes = p.domain.holes();
  for (std::size_t j = 0; j < p.collocation.size(); ++j) {
    const double* row = p.collocation.inputs.data() + j * 11;
    double mask_sum = 0.0;
    int active = -1;
    for (int r = 0; r < 7; ++r) {
      mask_sum += row[4 + r];
      if (row[4 + r] == 1.0) active = r;
    }
    CHECK(mask_sum == 1.0);
    REQUIRE(active >= 0);

    const double bx = row[2], by = row[3];
    // identify whether the paired boundary point sits on a hole rim
    int on_hole = -1;
    for (std::size_t h = 0; h < 3; ++h) {
      if (std::abs(std::hypot(bx - holes[h].cx, by - holes[h].cy) - holes[h].r) < 1e-9)
        on_hole = static_cast<int>(h);
    }
    if (on_hole >= 0) {
      const double ang =
          std::atan2(by - holes[on_hole].cy, bx - holes[on_hole].cx);
      const bool top_quarter = ang >= kPi / 4.0 && ang <= 3.0 * kPi / 4.0;
      if (top_quarter)
        CHECK(active == 0);  // rim quarter joins the fixed region
      else
        CHECK(active == 4 + on_hole);
    } else {
      CHECK(active <= 3);
    }
  }
}

TEST_CASE("plane stress term values at a zero network") {
  ProblemConfig pc;
  pc.name = "planestress";
  pc.net.hidden = {6};
  pc.net.activation = nn::Activation::kSwish;
  Problem p = build_problem(pc, small_sampling(100, 20));
  auto theta = zero_theta(p);

  // row: x y xb yb m0..m6, imposed-displacement mask set
  std::array<double, 11> row{0.1, 0.2, 0.3, -1.0, 0, 1, 0, 0, 0, 0, 0};
  std::vector<NodeId> outs(p.term_nodes.begin(), p.term_nodes.end());
  auto vals = ad::evaluate(p.tape, row, theta, outs);
  CHECK(vals[0] == 0.0);  // equilibrium of a zero stress field
  CHECK(vals[1] == 0.0);  // fixed mask off
  CHECK(vals[2] == 1.0);  // (v + 1)^2 with v = 0
  CHECK(vals[5] == 0.0);  // constitutive residual of all-zero fields
  for (std::size_t i : {3u, 4u, 6u, 7u, 8u}) CHECK(vals[i] == 0.0);
}

TEST_CASE("views are deterministic, substreams decorrelate, seeds alias at S = N") {
  ProblemConfig pc;
  pc.name = "diffusion";
  pc.net.hidden = {4};
  Problem p = build_problem(pc, small_sampling(60, 60));

  CHECK(p.seeds.inputs == p.collocation.inputs);
  std::vector<std::uint32_t> iota(60);
  std::iota(iota.begin(), iota.end(), 0u);
  CHECK(p.rho == iota);

  auto v0 = p.sample_view(60, 0);
  CHECK(v0.inputs == p.collocation.inputs);  // substream 0 reproduces collocation
  auto v1 = p.sample_view(30, 1);
  auto v1b = p.sample_view(30, 1);
  CHECK(v1.inputs == v1b.inputs);
  auto v2 = p.sample_view(30, 2);
  CHECK(v1.inputs != v2.inputs);

  Problem q = build_problem(pc, small_sampling(60, 12));
  CHECK(q.seeds.size() == 12);
  CHECK(q.rho == geom::nearest_seed(q.collocation.interior, q.seeds.interior));
}

TEST_CASE("builder rejects invalid configurations") {
  ProblemConfig pc;
  pc.name = "vortex";
  pc.net.hidden = {4};
  CHECK_THROWS_AS(build_problem(pc, small_sampling()), ConfigError);

  auto el = elasticity_config();
  el.net.activation = nn::Activation::kRelu;
  CHECK_THROWS_AS(build_problem(el, small_sampling()), ConfigError);

  ProblemConfig diff;
  diff.name = "diffusion";
  diff.net.hidden = {4};
  diff.net.activation = nn::Activation::kRelu;
  CHECK_THROWS_AS(build_problem(diff, small_sampling()), ConfigError);

  // first-order problem accepts relu
  ProblemConfig ps;
  ps.name = "planestress";
  ps.net.hidden = {4};
  ps.net.activation = nn::Activation::kRelu;
  CHECK_NOTHROW(build_problem(ps, small_sampling()));

  auto el2 = elasticity_config();
  el2.geometry_path.clear();
  CHECK_THROWS_AS(build_problem(el2, small_sampling()), ConfigError);

  auto sc = small_sampling();
  sc.n_seeds = sc.n_collocation + 1;
  ProblemConfig diff2;
  diff2.name = "diffusion";
  diff2.net.hidden = {4};
  CHECK_THROWS_AS(build_problem(diff2, sc), ConfigError);
}

TEST_CASE("total loss is the weighted sum of the terms") {
  auto pc = elasticity_config();
  pc.lambda_boundary = 2.5;
  Problem p = build_problem(pc, small_sampling(40, 8));
  auto params = nn::init_glorot(p.net);
  auto theta = params.flatten();
  for (std::size_t j = 0; j < 6; ++j) {
    std::span<const double> row{p.collocation.inputs.data() + j * 4, 4};
    auto vals = ad::evaluate(p.tape, row, theta,
                             std::array{p.total_loss, p.term_nodes[0], p.term_nodes[1]});
    CHECK(vals[0] == doctest::Approx(vals[1] + 2.5 * vals[2]).epsilon(1e-15));
  }
}

}  // TEST_SUITE
