#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pinn/autodiff.hpp"
#include "pinn/geometry.hpp"
#include "pinn/nn.hpp"

namespace pinn::problems {

// Isotropic material constants. lambda/mu follow the 2D form
// lambda = nu*E/((1+nu)(1-nu)), mu = E/(2(1+nu)).
struct LameConstants {
  double E = 0.0;
  double nu = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
};

LameConstants lame_from_enu(double E, double nu);

struct ProblemConfig {
  std::string name;  // "elasticity" | "planestress" | "diffusion"

  // elasticity
  double E = 0.25;
  double nu = 0.2;
  double lambda_boundary = 1.0;
  // Square each PDE residual separately instead of squaring their sum.
  bool split_residual_squares = false;
  std::string geometry_path;  // polygon file for the elasticity domain

  // plane stress (lengths in mm, scaled internally by length_scale)
  double plate_width = 55.0;
  double plate_height = 70.0;
  double hole_radius = 7.5;
  std::array<std::array<double, 2>, 3> hole_centers{{{0.0, 20.0}, {-9.67, -10.0}, {9.67, -10.0}}};
  double length_scale = 35.0;        // characteristic length L
  double displacement_scale = 1.5;   // characteristic displacement U
  double poisson_planestress = 0.3;  // nu used for the normalized Lame constants
  std::array<double, 9> term_lambdas{500.0, 1000.0, 1000.0, 75.0, 75.0, 200.0, 75.0, 75.0, 75.0};

  // diffusion
  double lambda_initial = 500.0;
  double lambda_diffusion_boundary = 500.0;

  nn::NetworkConfig net;  // hidden/activation/init_seed; in/out dims set by the builder
};

struct SamplingConfig {
  std::size_t n_collocation = 0;
  std::size_t n_boundary = 0;  // 0 means "same as n_collocation"
  std::size_t n_seeds = 0;
  geom::Generator interior_generator = geom::Generator::kHalton;
  geom::Generator boundary_generator = geom::Generator::kUniformRandom;
  std::uint64_t rng_seed = 1;
  std::uint64_t halton_scramble = 0;  // 0 keeps the plain Halton sequence
};

// A set of composite collocation rows: interior holds the spatial (or
// space-time) coordinates used for nearest-seed assignment, inputs holds the
// full tape input rows (interior coords, paired boundary/initial coords,
// region indicators).
struct View {
  geom::PointSet interior;
  std::vector<double> inputs;  // row-major [n x tape inputs]
  std::size_t size() const { return interior.size(); }
};

struct Problem {
  std::string name;
  ad::Tape tape;
  nn::NetworkConfig net;

  std::vector<ad::NodeId> param_nodes;
  std::vector<ad::NodeId> net_outputs;  // network evaluated at the interior point
  ad::NodeId total_loss = ad::kNoNode;
  std::vector<ad::NodeId> term_nodes;   // unweighted per-term values
  std::vector<double> term_weights;
  std::vector<std::string> term_names;
  bool second_order = false;

  // named intermediate nodes for white-box checks
  std::map<std::string, ad::NodeId> probes;

  geom::Domain domain;
  SamplingConfig sampling;

  View collocation;
  View seeds;
  std::vector<std::uint32_t> rho;  // nearest seed per collocation point

  // evaluates the reference solution at a spatial/space-time point; empty
  // when the problem has no closed-form reference
  std::function<std::vector<double>(std::span<const double>)> reference;

  std::size_t tape_inputs() const { return tape.num_inputs(); }

  // Draws a fresh view of n composite rows. Substream 0 reproduces the
  // collocation set; positive substreams give independent auxiliary sets
  // (seed candidates, evaluation grids) that continue the Halton sequence
  // past the collocation block.
  View sample_view(std::size_t n, std::uint64_t substream) const { return view_fn(n, substream); }

  std::function<View(std::size_t, std::uint64_t)> view_fn;
};

Problem build_problem(const ProblemConfig& problem_cfg, const SamplingConfig& sampling_cfg);

// Manufactured displacement field used by the elasticity example.
std::array<double, 2> elasticity_exact(double x, double y);

// Appends the manufactured displacement fields u(x,y), v(x,y) to the tape.
std::pair<ad::NodeId, ad::NodeId> append_manufactured_displacement(ad::Tape& tape, ad::NodeId x,
                                                                   ad::NodeId y);

struct ElasticityResiduals {
  ad::NodeId n1 = ad::kNoNode;
  ad::NodeId n2 = ad::kNoNode;
  ad::NodeId fx = ad::kNoNode;
  ad::NodeId fy = ad::kNoNode;
};

// Builds the two Navier residuals for displacement nodes (u,v) at input
// nodes (x,y), with the forcing back-derived on the tape from the
// manufactured solution so that the manufactured field is an exact root.
ElasticityResiduals append_elasticity_residuals(ad::Tape& tape, ad::NodeId u, ad::NodeId v,
                                                ad::NodeId x, ad::NodeId y,
                                                const LameConstants& mat);

// Residual of the scalar transient problem: du/dt - d2u/dx2 - 3x.
ad::NodeId append_diffusion_residual(ad::Tape& tape, ad::NodeId u, ad::NodeId t, ad::NodeId x);

// Series solution of the transient problem on [0,1]^2 with source 3x,
// zero boundary values and initial profile 10(x - x^2). The series tail is
// truncated once its bound drops below tol.
double diffusion_reference(double t, double x, double tol = 1e-10);

}  // namespace pinn::problems
