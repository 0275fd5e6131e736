#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pinn/importance.hpp"
#include "pinn/nn.hpp"
#include "pinn/problems.hpp"

namespace pinn::trainer {

struct TrainConfig {
  std::size_t batch = 0;
  double learning_rate = 0.0;
  std::size_t max_iterations = 0;
  double tolerance = 0.0;
  importance::Mode mode = importance::Mode::kUniform;
  std::uint64_t rng_seed = 1;
  double adam_eps = 1e-8;
  // 0 reads PINN_IS_THREADS (default 1). Thread count never changes results:
  // all reductions run in a fixed chunk order.
  std::size_t threads = 0;
};

struct TrainingRecord {
  std::size_t iteration = 0;
  double wall_s = 0.0;
  double total_loss = 0.0;
  std::vector<double> term_losses;  // unweighted per-term means
  double proposal_entropy = 0.0;
  std::uint64_t batch_hash = 0;
};

struct TrainResult {
  nn::Parameters params;
  std::vector<TrainingRecord> records;
  bool aborted = false;
  std::string abort_reason;
};

// Runs the selected training loop on a built problem. Collocation, boundary
// and seed sets were fixed when the problem was built; every iteration
// estimates the loss (full-set mean in exact and grad-norm modes, seed mean
// in pwc and uniform modes so curves are comparable across modes; uniform
// falls back to the batch mean when the problem has no seed view), records
// it, stops once it reaches cfg.tolerance, then samples a batch from the
// mode's proposal and applies one reweighted Adam step. Deterministic in
// (problem, cfg).
TrainResult train(const problems::Problem& problem, const TrainConfig& cfg);

struct ErrorReport {
  std::vector<double> per_component;
  double aggregate = 0.0;
};

// Relative L2 error of the network against the problem's reference solution
// on n_eval fresh Halton interior points. Throws std::logic_error when the
// problem has no reference.
ErrorReport evaluate_error(const problems::Problem& problem, const nn::Parameters& params,
                           std::size_t n_eval, std::uint64_t seed);

// Relative L2 distance between the exact per-collocation-point losses and
// their piecewise-constant approximation through the given seed view and
// nearest-seed map.
double pwc_approximation_error(const problems::Problem& problem, const nn::Parameters& params,
                               const problems::View& seeds, std::span<const std::uint32_t> rho);

std::uint64_t fnv1a_hash(std::span<const std::uint32_t> values);

}  // namespace pinn::trainer
