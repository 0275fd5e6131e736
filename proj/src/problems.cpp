#include "pinn/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "pinn/errors.hpp"
#include "pinn/rng.hpp"

namespace pinn::problems {

namespace {

constexpr double kPi = std::numbers::pi;

using ad::NodeId;
using ad::Tape;

NodeId square(Tape& t, NodeId x) { return t.pow(x, 2.0); }

// (lam+mu) d/dxi (du/dx + dv/dy) + mu * laplacian(component), written exactly
// in that grouping.
struct NavierOp {
  NodeId n1, n2;
};

NavierOp append_navier_operator(Tape& t, NodeId u, NodeId v, NodeId x, NodeId y,
                                const LameConstants& mat) {
  NodeId lam_mu = t.constant(mat.lambda + mat.mu);
  NodeId mu = t.constant(mat.mu);
  NodeId divergence = t.add(t.derivative(u, x, 1), t.derivative(v, y, 1));
  NodeId lap_u = t.add(t.derivative(u, x, 2), t.derivative(u, y, 2));
  NodeId lap_v = t.add(t.derivative(v, x, 2), t.derivative(v, y, 2));
  NodeId n1 = t.add(t.mul(lam_mu, t.derivative(divergence, x, 1)), t.mul(mu, lap_u));
  NodeId n2 = t.add(t.mul(lam_mu, t.derivative(divergence, y, 1)), t.mul(mu, lap_v));
  return {n1, n2};
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

struct PairedBoundary {
  geom::PointSet points;
  std::vector<int> regions;  // only filled when region tags are requested
};

// dim coordinates of boundary point (j mod boundary count) appended to row j.
void pair_boundary_into_rows(std::vector<double>& rows, std::size_t n, std::size_t row_width,
                             std::size_t offset, const geom::PointSet& boundary) {
  const std::size_t nb = boundary.size();
  for (std::size_t j = 0; j < n; ++j) {
    auto p = boundary.point(j % nb);
    for (std::size_t d = 0; d < p.size(); ++d) rows[j * row_width + offset + d] = p[d];
  }
}

}  // namespace

LameConstants lame_from_enu(double E, double nu) {
  LameConstants m;
  m.E = E;
  m.nu = nu;
  m.lambda = nu * E / ((1.0 + nu) * (1.0 - nu));
  m.mu = E / (2.0 * (1.0 + nu));
  return m;
}

std::array<double, 2> elasticity_exact(double x, double y) {
  double u = 0.8 * std::sin(kPi / 2.0 * (x + 0.78)) * std::cos(y - 1.0) -
             0.8 * std::sin(kPi / 2.0 * (x + 1.50)) * std::cos(y + 1.0);
  double v = 0.72 - 0.65 * (std::exp(-x * x * y / 2.0) + x);
  return {u, v};
}

std::pair<NodeId, NodeId> append_manufactured_displacement(Tape& t, NodeId x, NodeId y) {
  NodeId half_pi = t.constant(kPi / 2.0);
  NodeId amp = t.constant(0.8);
  NodeId one = t.constant(1.0);
  NodeId u1 = t.mul(amp, t.mul(t.sin(t.mul(half_pi, t.add(x, t.constant(0.78)))),
                               t.cos(t.sub(y, one))));
  NodeId u2 = t.mul(amp, t.mul(t.sin(t.mul(half_pi, t.add(x, t.constant(1.50)))),
                               t.cos(t.add(y, one))));
  NodeId u = t.sub(u1, u2);

  NodeId xx = t.mul(x, x);
  NodeId arg = t.neg(t.div(t.mul(xx, y), t.constant(2.0)));
  NodeId v = t.sub(t.constant(0.72), t.mul(t.constant(0.65), t.add(t.exp(arg), x)));
  return {u, v};
}

ElasticityResiduals append_elasticity_residuals(Tape& t, NodeId u, NodeId v, NodeId x, NodeId y,
                                                const LameConstants& mat) {
  auto field_op = append_navier_operator(t, u, v, x, y, mat);
  auto [us, vs] = append_manufactured_displacement(t, x, y);
  auto exact_op = append_navier_operator(t, us, vs, x, y, mat);
  ElasticityResiduals r;
  r.fx = t.neg(exact_op.n1);
  r.fy = t.neg(exact_op.n2);
  r.n1 = t.add(field_op.n1, r.fx);
  r.n2 = t.add(field_op.n2, r.fy);
  return r;
}

NodeId append_diffusion_residual(Tape& t, NodeId u, NodeId time, NodeId x) {
  NodeId ut = t.derivative(u, time, 1);
  NodeId uxx = t.derivative(u, x, 2);
  return t.sub(t.sub(ut, uxx), t.mul(t.constant(3.0), x));
}

double diffusion_reference(double t, double x, double tol) {
  // steady part plus an eigenfunction expansion of the transient remainder
  double u = (x - x * x * x) / 2.0;
  constexpr double pi3 = kPi * kPi * kPi;
  for (std::size_t n = 1; n <= 500000; ++n) {
    double nd = static_cast<double>(n);
    double bn = ((n % 2 == 1) ? 74.0 : 6.0) / (nd * nd * nd * pi3);
    u += bn * std::sin(nd * kPi * x) * std::exp(-nd * nd * kPi * kPi * t);
    double tail = std::exp(-(nd + 1.0) * (nd + 1.0) * kPi * kPi * t) * 74.0 / (pi3 * 2.0 * nd * nd);
    if (tail < tol) break;
  }
  return u;
}

namespace {

// Shared by the three builders: generate the collocation view once, remember
// where the Halton stream stops, and derive per-substream RNG seeds so views
// are independent draws. assemble() owns the per-problem row layout.
template <typename AssembleFn>
void finalize_views(Problem& p, const SamplingConfig& sc, AssembleFn assemble) {
  const std::size_t n = sc.n_collocation;
  auto first = geom::sample_interior(p.domain, n, sc.interior_generator,
                                     derive_seed(sc.rng_seed, 0), 1, sc.halton_scramble);
  const std::uint64_t next_index = first.next_halton_index;
  const geom::Domain domain = p.domain;
  const SamplingConfig sc_copy = sc;

  p.view_fn = [domain, sc_copy, next_index, assemble](std::size_t count,
                                                      std::uint64_t substream) -> View {
    auto smp = geom::sample_interior(domain, count, sc_copy.interior_generator,
                                     derive_seed(sc_copy.rng_seed, substream * 8),
                                     substream == 0 ? 1 : next_index, sc_copy.halton_scramble);
    return assemble(std::move(smp.points), count, substream);
  };

  p.collocation = assemble(std::move(first.points), n, 0);
  if (sc.n_seeds == n) {
    p.seeds = p.collocation;
    p.rho.resize(n);
    std::iota(p.rho.begin(), p.rho.end(), 0u);
  } else {
    p.seeds = p.view_fn(sc.n_seeds, 1);
    p.rho = geom::nearest_seed(p.collocation.interior, p.seeds.interior);
  }
}

Problem build_elasticity(const ProblemConfig& pc, const SamplingConfig& sc) {
  Problem p;
  p.name = "elasticity";
  p.second_order = true;
  require(!pc.geometry_path.empty(), "elasticity needs a geometry file ('geometry' key)");
  p.domain = geom::load_polygon(pc.geometry_path);
  p.net = pc.net;
  p.net.n_inputs = 2;
  p.net.n_outputs = 2;

  Tape& t = p.tape;
  NodeId x = t.input(), y = t.input(), xb = t.input(), yb = t.input();
  auto net = nn::append_network(t, p.net, std::array{x, y});
  p.param_nodes = net.params;
  p.net_outputs = net.outputs;
  auto net_b = nn::append_network(t, p.net, std::array{xb, yb}, net.params);

  auto mat = lame_from_enu(pc.E, pc.nu);
  auto res = append_elasticity_residuals(t, net.outputs[0], net.outputs[1], x, y, mat);
  NodeId j1 = pc.split_residual_squares
                  ? t.add(square(t, res.n1), square(t, res.n2))
                  : square(t, t.add(res.n1, res.n2));

  auto [ub, vb] = append_manufactured_displacement(t, xb, yb);
  NodeId j2 = t.add(square(t, t.sub(net_b.outputs[0], ub)), square(t, t.sub(net_b.outputs[1], vb)));

  p.term_nodes = {j1, j2};
  p.term_names = {"residual", "boundary"};
  p.term_weights = {1.0, pc.lambda_boundary};
  p.total_loss = t.add(j1, t.mul(t.constant(pc.lambda_boundary), j2));
  p.probes = {{"N1", res.n1}, {"N2", res.n2}, {"fx", res.fx}, {"fy", res.fy},
              {"u_boundary_exact", ub}, {"v_boundary_exact", vb}};

  auto mk = [domain = p.domain, sc](geom::PointSet interior, std::size_t n,
                                    std::uint64_t substream) -> View {
    View v;
    v.interior = std::move(interior);
    const std::size_t nb = (substream == 0 && sc.n_boundary > 0) ? sc.n_boundary : n;
    auto boundary = geom::sample_boundary(domain, nb, sc.boundary_generator,
                                          derive_seed(sc.rng_seed, substream * 8 + 1));
    v.inputs.assign(n * 4, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      auto pt = v.interior.point(j);
      v.inputs[j * 4 + 0] = pt[0];
      v.inputs[j * 4 + 1] = pt[1];
    }
    pair_boundary_into_rows(v.inputs, n, 4, 2, boundary);
    return v;
  };
  finalize_views(p, sc, mk);

  p.reference = [](std::span<const double> pt) {
    auto uv = elasticity_exact(pt[0], pt[1]);
    return std::vector<double>{uv[0], uv[1]};
  };
  return p;
}

Problem build_diffusion(const ProblemConfig& pc, const SamplingConfig& sc) {
  Problem p;
  p.name = "diffusion";
  p.second_order = true;
  p.domain = geom::Domain::space_time_box();
  p.net = pc.net;
  p.net.n_inputs = 2;
  p.net.n_outputs = 1;

  Tape& t = p.tape;
  NodeId time = t.input(), x = t.input();
  NodeId x_init = t.input();
  NodeId tb = t.input(), xb = t.input();

  auto net = nn::append_network(t, p.net, std::array{time, x});
  p.param_nodes = net.params;
  p.net_outputs = net.outputs;
  auto net_init = nn::append_network(t, p.net, std::array{t.constant(0.0), x_init}, net.params);
  auto net_bnd = nn::append_network(t, p.net, std::array{tb, xb}, net.params);

  NodeId residual = append_diffusion_residual(t, net.outputs[0], time, x);
  NodeId j1 = square(t, residual);
  // initial profile 10(x - x^2)
  NodeId profile = t.mul(t.constant(10.0), t.sub(x_init, t.mul(x_init, x_init)));
  NodeId j2 = square(t, t.sub(net_init.outputs[0], profile));
  NodeId j3 = square(t, net_bnd.outputs[0]);

  p.term_nodes = {j1, j2, j3};
  p.term_names = {"residual", "initial", "boundary"};
  p.term_weights = {1.0, pc.lambda_initial, pc.lambda_diffusion_boundary};
  p.total_loss = t.add(j1, t.add(t.mul(t.constant(pc.lambda_initial), j2),
                                 t.mul(t.constant(pc.lambda_diffusion_boundary), j3)));
  p.probes = {{"residual", residual},
              {"u_interior", net.outputs[0]},
              {"u_initial", net_init.outputs[0]},
              {"u_boundary", net_bnd.outputs[0]}};

  const std::vector<std::string> init_filter{"initial"};
  const std::vector<std::string> bnd_filter{"left", "right"};
  auto mk = [domain = p.domain, sc, init_filter, bnd_filter](geom::PointSet interior, std::size_t n,
                                                             std::uint64_t substream) -> View {
    View v;
    v.interior = std::move(interior);
    const std::size_t nb = (substream == 0 && sc.n_boundary > 0) ? sc.n_boundary : n;
    auto initial = geom::sample_boundary(domain, nb, sc.boundary_generator,
                                         derive_seed(sc.rng_seed, substream * 8 + 2), init_filter);
    auto boundary = geom::sample_boundary(domain, nb, sc.boundary_generator,
                                          derive_seed(sc.rng_seed, substream * 8 + 1), bnd_filter);
    v.inputs.assign(n * 5, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      auto pt = v.interior.point(j);
      v.inputs[j * 5 + 0] = pt[0];
      v.inputs[j * 5 + 1] = pt[1];
      v.inputs[j * 5 + 2] = initial.point(j % initial.size())[1];  // x at t = 0
    }
    pair_boundary_into_rows(v.inputs, n, 5, 3, boundary);
    return v;
  };
  finalize_views(p, sc, mk);

  p.reference = [](std::span<const double> pt) {
    return std::vector<double>{diffusion_reference(pt[0], pt[1])};
  };
  return p;
}

Problem build_planestress(const ProblemConfig& pc, const SamplingConfig& sc) {
  Problem p;
  p.name = "planestress";
  p.second_order = false;
  const double L = pc.length_scale;
  require(L > 0 && pc.displacement_scale > 0, "plane stress scales must be positive");
  const double hw = pc.plate_width / 2.0 / L, hh = pc.plate_height / 2.0 / L;
  const double r = pc.hole_radius / L;
  std::vector<geom::Circle> holes;
  for (const auto& c : pc.hole_centers) holes.push_back({c[0] / L, c[1] / L, r});
  p.domain = geom::Domain::rectangle_with_holes(-hw, hw, -hh, hh, holes);
  p.net = pc.net;
  p.net.n_inputs = 2;
  p.net.n_outputs = 5;  // u, v, sxx, sxy, syy

  // normalized Lame constants: mu_c = mu so mu_hat = 1, lambda_hat from nu
  // alone, then the plane-stress effective coefficient
  const double nu = pc.poisson_planestress;
  require(nu > 0 && nu < 0.5, "plane stress Poisson ratio must lie in (0, 0.5)");
  const double lambda_hat = 2.0 * nu / (1.0 - 2.0 * nu);
  const double mu_hat = 1.0;
  const double lambda_eff = 2.0 * lambda_hat * mu_hat / (lambda_hat + 2.0 * mu_hat);

  Tape& t = p.tape;
  NodeId x = t.input(), y = t.input(), xb = t.input(), yb = t.input();
  // one-hot region indicators for the boundary terms, J2..J5 then J7..J9
  std::array<NodeId, 7> mask{};
  for (auto& m : mask) m = t.input();

  auto net = nn::append_network(t, p.net, std::array{x, y});
  p.param_nodes = net.params;
  p.net_outputs = net.outputs;
  auto nb = nn::append_network(t, p.net, std::array{xb, yb}, net.params);

  NodeId u = net.outputs[0], v = net.outputs[1];
  NodeId sxx = net.outputs[2], sxy = net.outputs[3], syy = net.outputs[4];

  // J1: interior equilibrium of the stress outputs
  NodeId j1 = t.add(square(t, t.add(t.derivative(sxx, x, 1), t.derivative(sxy, y, 1))),
                    square(t, t.add(t.derivative(sxy, x, 1), t.derivative(syy, y, 1))));

  // J6: stresses recomputed from the displacement outputs
  NodeId ex = t.derivative(u, x, 1);
  NodeId ey = t.derivative(v, y, 1);
  NodeId trace = t.add(ex, ey);
  NodeId sxx_hat = t.add(t.mul(t.constant(lambda_eff), trace), t.mul(t.constant(2.0 * mu_hat), ex));
  NodeId syy_hat = t.add(t.mul(t.constant(lambda_eff), trace), t.mul(t.constant(2.0 * mu_hat), ey));
  NodeId sxy_hat = t.mul(t.constant(mu_hat), t.add(t.derivative(u, y, 1), t.derivative(v, x, 1)));
  NodeId j6 = t.add(t.add(square(t, t.sub(sxx_hat, sxx)), square(t, t.sub(sxy_hat, sxy))),
                    square(t, t.sub(syy_hat, syy)));

  // boundary terms at (xb, yb)
  NodeId ub = nb.outputs[0], vb = nb.outputs[1];
  NodeId sxx_b = nb.outputs[2], sxy_b = nb.outputs[3];
  NodeId j2 = t.add(square(t, ub), square(t, vb));
  NodeId j3 = t.add(square(t, ub), square(t, t.add(vb, t.constant(1.0))));
  NodeId free_edge = t.add(square(t, sxx_b), square(t, sxy_b));

  std::array<NodeId, 3> traction{};
  for (std::size_t h = 0; h < 3; ++h) {
    NodeId nx = t.div(t.sub(xb, t.constant(holes[h].cx)), t.constant(r));
    NodeId ny = t.div(t.sub(yb, t.constant(holes[h].cy)), t.constant(r));
    traction[h] = square(t, t.add(t.mul(sxx_b, nx), t.mul(sxy_b, ny)));
  }

  p.term_nodes = {j1,
                  t.mul(mask[0], j2),
                  t.mul(mask[1], j3),
                  t.mul(mask[2], free_edge),
                  t.mul(mask[3], free_edge),
                  j6,
                  t.mul(mask[4], traction[0]),
                  t.mul(mask[5], traction[1]),
                  t.mul(mask[6], traction[2])};
  p.term_names = {"equilibrium", "fixed",        "imposed",  "left-edge", "right-edge",
                  "constitutive", "hole-top", "hole-bl",  "hole-br"};
  p.term_weights.assign(pc.term_lambdas.begin(), pc.term_lambdas.end());
  NodeId total = ad::kNoNode;
  for (std::size_t i = 0; i < p.term_nodes.size(); ++i) {
    NodeId w = t.mul(t.constant(p.term_weights[i]), p.term_nodes[i]);
    total = (i == 0) ? w : t.add(total, w);
  }
  p.total_loss = total;
  p.probes = {{"sigma_hat_xx", sxx_hat}, {"sigma_hat_xy", sxy_hat}, {"sigma_hat_yy", syy_hat}};

  // region of a boundary point: edges map to the fixed / imposed / free
  // conditions by segment name; hole arcs split by angle, the top quarter
  // [pi/4, 3pi/4] joining the fixed region, the rest keeping the hole's
  // traction term. Returned value indexes mask[], -1 + offset style below.
  auto segment_names = [&] {
    std::vector<std::string> names;
    for (const auto& s : p.domain.segments()) names.push_back(s.name);
    return names;
  }();
  auto region_of = [segment_names, holes](double px, double py, std::int32_t seg) -> std::size_t {
    const std::string& name = segment_names.at(static_cast<std::size_t>(seg));
    if (name == "top-edge") return 0;
    if (name == "bottom-edge") return 1;
    if (name == "left-edge") return 2;
    if (name == "right-edge") return 3;
    if (name.rfind("hole-", 0) == 0) {
      std::size_t h = static_cast<std::size_t>(name[5] - '1');
      if (h >= holes.size())
        throw std::invalid_argument("plane stress: unexpected segment '" + name + "'");
      double ang = std::atan2(py - holes[h].cy, px - holes[h].cx);
      if (ang >= kPi / 4.0 && ang <= 3.0 * kPi / 4.0) return 0;  // fixed quarter
      return 4 + h;
    }
    throw std::invalid_argument("plane stress: unknown boundary segment '" + name + "'");
  };

  auto mk = [domain = p.domain, sc, region_of](geom::PointSet interior, std::size_t n,
                                               std::uint64_t substream) -> View {
    View v;
    v.interior = std::move(interior);
    const std::size_t nbp = (substream == 0 && sc.n_boundary > 0) ? sc.n_boundary : n;
    auto boundary = geom::sample_boundary(domain, nbp, sc.boundary_generator,
                                          derive_seed(sc.rng_seed, substream * 8 + 1));
    const std::size_t w = 11;
    v.inputs.assign(n * w, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      auto pt = v.interior.point(j);
      v.inputs[j * w + 0] = pt[0];
      v.inputs[j * w + 1] = pt[1];
      std::size_t bj = j % boundary.size();
      auto bp = boundary.point(bj);
      v.inputs[j * w + 2] = bp[0];
      v.inputs[j * w + 3] = bp[1];
      std::size_t region = region_of(bp[0], bp[1], boundary.segment_ids[bj]);
      v.inputs[j * w + 4 + region] = 1.0;
    }
    return v;
  };
  finalize_views(p, sc, mk);
  return p;
}

}  // namespace

Problem build_problem(const ProblemConfig& pc, const SamplingConfig& sc) {
  require(sc.n_collocation >= 1, "n_collocation must be at least 1");
  require(sc.n_seeds >= 1, "n_seeds must be at least 1");
  require(sc.n_seeds <= sc.n_collocation, "n_seeds must not exceed n_collocation");

  const bool second_order = pc.name == "elasticity" || pc.name == "diffusion";
  if (second_order && pc.net.activation == nn::Activation::kRelu) {
    throw ConfigError("relu activation has a zero second derivative almost everywhere and cannot "
                      "represent this problem's residual; use sine, tanh, swish, or sigmoid");
  }

  Problem p;
  if (pc.name == "elasticity") {
    p = build_elasticity(pc, sc);
  } else if (pc.name == "diffusion") {
    p = build_diffusion(pc, sc);
  } else if (pc.name == "planestress") {
    p = build_planestress(pc, sc);
  } else {
    throw ConfigError("unknown problem '" + pc.name +
                      "' (expected elasticity, planestress, or diffusion)");
  }
  p.sampling = sc;
  return p;
}

}  // namespace pinn::problems
