#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pinn::importance {

enum class Mode { kUniform, kExactLoss, kPwcLoss, kGradNorm };

Mode mode_from_string(const std::string& name);
std::string to_string(Mode m);

struct ProposalDistribution {
  std::vector<double> q;  // nonnegative, sums to 1
  Mode mode = Mode::kUniform;
};

struct Batch {
  std::vector<std::uint32_t> indices;
  std::vector<double> weights;  // 1/(N q_j); exactly 1 under uniform mode
};

ProposalDistribution uniform_proposal(std::size_t n);

// q_j proportional to the given per-point losses. An all-zero vector falls
// back to uniform; negative or non-finite entries are rejected.
ProposalDistribution build_proposal_exact(std::span<const double> losses);

// Piecewise-constant variant: point j takes the loss of its nearest seed
// rho[j], then normalizes exactly like build_proposal_exact.
ProposalDistribution build_proposal_pwc(std::span<const double> seed_losses,
                                        std::span<const std::uint32_t> rho);

// q_j proportional to per-point gradient norms.
ProposalDistribution build_proposal_gradnorm(std::span<const double> norms);

// m independent draws with replacement. Entries with q_j = 0 are never drawn.
// Deterministic in rng_seed.
Batch sample_batch(const ProposalDistribution& proposal, std::size_t m,
                   std::uint64_t rng_seed);

// (1/m) sum_k weights[k] * grads[k]; the unbiased estimate of the mean
// full-population gradient.
std::vector<double> reweighted_gradient(
    const std::vector<std::vector<double>>& grads,
    std::span<const double> weights);

double entropy(const ProposalDistribution& proposal);

}  // namespace pinn::importance
