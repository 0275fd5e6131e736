#include "pinn/importance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pinn/errors.hpp"
#include "pinn/rng.hpp"

namespace pinn::importance {

Mode mode_from_string(const std::string& name) {
  if (name == "uniform") return Mode::kUniform;
  if (name == "exact-loss") return Mode::kExactLoss;
  if (name == "pwc-loss") return Mode::kPwcLoss;
  if (name == "grad-norm") return Mode::kGradNorm;
  throw ConfigError("unknown sampling mode '" + name +
                    "' (expected uniform, exact-loss, pwc-loss or grad-norm)");
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kUniform: return "uniform";
    case Mode::kExactLoss: return "exact-loss";
    case Mode::kPwcLoss: return "pwc-loss";
    case Mode::kGradNorm: return "grad-norm";
  }
  return "?";
}

ProposalDistribution uniform_proposal(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_proposal: n must be >= 1");
  return {std::vector<double>(n, 1.0 / static_cast<double>(n)),
          Mode::kUniform};
}

namespace {

ProposalDistribution normalize(std::span<const double> values, Mode mode,
                               const char* what) {
  if (values.empty())
    throw std::invalid_argument(std::string(what) + ": empty input");
  double sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(what) +
                                  ": entries must be finite and nonnegative");
    sum += v;
  }
  ProposalDistribution out;
  out.mode = mode;
  out.q.resize(values.size());
  if (sum == 0.0) {
    const double u = 1.0 / static_cast<double>(values.size());
    std::fill(out.q.begin(), out.q.end(), u);
    return out;
  }
  for (std::size_t j = 0; j < values.size(); ++j) out.q[j] = values[j] / sum;
  return out;
}

}  // namespace

ProposalDistribution build_proposal_exact(std::span<const double> losses) {
  return normalize(losses, Mode::kExactLoss, "build_proposal_exact");
}

ProposalDistribution build_proposal_pwc(std::span<const double> seed_losses,
                                        std::span<const std::uint32_t> rho) {
  if (seed_losses.empty())
    throw std::invalid_argument("build_proposal_pwc: empty seed losses");
  std::vector<double> gathered(rho.size());
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (rho[j] >= seed_losses.size())
      throw std::out_of_range("build_proposal_pwc: rho index out of range");
    gathered[j] = seed_losses[rho[j]];
  }
  return normalize(gathered, Mode::kPwcLoss, "build_proposal_pwc");
}

ProposalDistribution build_proposal_gradnorm(std::span<const double> norms) {
  return normalize(norms, Mode::kGradNorm, "build_proposal_gradnorm");
}

Batch sample_batch(const ProposalDistribution& proposal, std::size_t m,
                   std::uint64_t rng_seed) {
  const auto& q = proposal.q;
  const std::size_t n = q.size();
  if (n == 0) throw std::invalid_argument("sample_batch: empty proposal");
  std::vector<double> cum(n);
  double run = 0.0;
  std::size_t last_positive = n;  // index of the last q_j > 0
  for (std::size_t j = 0; j < n; ++j) {
    run += q[j];
    cum[j] = run;
    if (q[j] > 0.0) last_positive = j;
  }
  if (last_positive == n)
    throw std::invalid_argument("sample_batch: proposal has no mass");

  Batch out;
  out.indices.resize(m);
  out.weights.resize(m);
  std::mt19937_64 gen(rng_seed);
  const double nd = static_cast<double>(n);
  for (std::size_t k = 0; k < m; ++k) {
    const double u = uniform01(gen) * cum.back();
    std::size_t idx =
        std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
    if (idx > last_positive) idx = last_positive;
    out.indices[k] = static_cast<std::uint32_t>(idx);
    out.weights[k] = proposal.mode == Mode::kUniform
                         ? 1.0
                         : 1.0 / (nd * q[idx]);
  }
  return out;
}

std::vector<double> reweighted_gradient(
    const std::vector<std::vector<double>>& grads,
    std::span<const double> weights) {
  if (grads.empty())
    throw std::invalid_argument("reweighted_gradient: empty batch");
  if (grads.size() != weights.size())
    throw std::invalid_argument("reweighted_gradient: size mismatch");
  const std::size_t p = grads[0].size();
  std::vector<double> out(p, 0.0);
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (grads[k].size() != p)
      throw std::invalid_argument(
          "reweighted_gradient: inconsistent gradient dimensions");
    for (std::size_t i = 0; i < p; ++i) out[i] += weights[k] * grads[k][i];
  }
  const double inv_m = 1.0 / static_cast<double>(grads.size());
  for (double& v : out) v *= inv_m;
  return out;
}

double entropy(const ProposalDistribution& proposal) {
  double h = 0.0;
  for (double v : proposal.q)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

}  // namespace pinn::importance
