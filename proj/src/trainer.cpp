#include "pinn/trainer.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "pinn/errors.hpp"
#include "pinn/rng.hpp"

namespace pinn::trainer {

namespace {

constexpr std::size_t kLanes = 64;

std::size_t resolve_threads(std::size_t configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("PINN_IS_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError("PINN_IS_THREADS must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  }
  return 1;
}

// Runs fn(thread_id, chunk_index) for every chunk. Chunks are claimed
// dynamically, so callers must make all outputs chunk-indexed (or
// point-indexed) to stay independent of scheduling.
void parallel_chunks(std::size_t n_chunks, std::size_t threads,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
  if (threads <= 1 || n_chunks <= 1) {
    for (std::size_t ci = 0; ci < n_chunks; ++ci) fn(0, ci);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&](std::size_t tid) {
    try {
      for (;;) {
        std::size_t ci = next.fetch_add(1);
        if (ci >= n_chunks) break;
        fn(tid, ci);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t tid = 1; tid < threads; ++tid) pool.emplace_back(worker, tid);
  worker(0);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Chunked, optionally threaded sweeps over composite rows. Every reduction
// (term sums, gradients) is accumulated per chunk and folded in chunk order,
// so results are bit-identical for any thread count.
class Evaluator {
 public:
  Evaluator(const problems::Problem& p, std::size_t threads)
      : problem_(p), threads_(threads), n_inputs_(p.tape.num_inputs()),
        n_params_(p.tape.num_params()), n_terms_(p.term_nodes.size()) {
    for (std::size_t i = 0; i < threads; ++i) {
      workspaces_.emplace_back(p.tape, kLanes);
      gather_.emplace_back(kLanes * n_inputs_, 0.0);
    }
  }

  void bind(std::span<const double> theta) {
    for (auto& ws : workspaces_) ws.bind_parameters(theta);
  }

  // Forward pass over contiguous rows; fills per-row total losses and, when
  // term_means is non-null, the per-term means over all rows.
  void forward_losses(std::span<const double> inputs, std::size_t n, std::vector<double>& losses,
                      std::vector<double>* term_means) {
    losses.resize(n);
    const std::size_t n_chunks = (n + kLanes - 1) / kLanes;
    std::vector<double> partial(term_means ? n_chunks * n_terms_ : 0, 0.0);
    parallel_chunks(n_chunks, threads_, [&](std::size_t tid, std::size_t ci) {
      auto& ws = workspaces_[tid];
      const std::size_t start = ci * kLanes;
      const std::size_t count = std::min(kLanes, n - start);
      ws.evaluate(inputs.subspan(start * n_inputs_, count * n_inputs_), count);
      for (std::size_t k = 0; k < count; ++k) {
        losses[start + k] = ws.value(problem_.total_loss, k);
      }
      if (term_means) accumulate_terms(ws, count, &partial[ci * n_terms_]);
    });
    if (term_means) reduce_terms(partial, n_chunks, n, *term_means);
  }

  // Forward plus unit-seeded reverse pass; fills per-row parameter-gradient
  // norms alongside the losses.
  void forward_gradnorms(std::span<const double> inputs, std::size_t n,
                         std::vector<double>& norms, std::vector<double>& losses,
                         std::vector<double>* term_means) {
    losses.resize(n);
    norms.resize(n);
    const std::size_t n_chunks = (n + kLanes - 1) / kLanes;
    std::vector<double> partial(term_means ? n_chunks * n_terms_ : 0, 0.0);
    std::vector<double> ones(kLanes, 1.0);
    parallel_chunks(n_chunks, threads_, [&](std::size_t tid, std::size_t ci) {
      auto& ws = workspaces_[tid];
      const std::size_t start = ci * kLanes;
      const std::size_t count = std::min(kLanes, n - start);
      ws.evaluate(inputs.subspan(start * n_inputs_, count * n_inputs_), count);
      for (std::size_t k = 0; k < count; ++k) {
        losses[start + k] = ws.value(problem_.total_loss, k);
      }
      if (term_means) accumulate_terms(ws, count, &partial[ci * n_terms_]);
      ws.reverse(problem_.total_loss, std::span<const double>(ones.data(), count), count);
      ws.param_grad_sq_norms(std::span<double>(norms.data() + start, count), count);
      for (std::size_t k = 0; k < count; ++k) norms[start + k] = std::sqrt(norms[start + k]);
    });
    if (term_means) reduce_terms(partial, n_chunks, n, *term_means);
  }

  // Fused forward/reverse pass over the sampled rows. Lane k of a chunk is
  // seeded with weights[k]/m, so the accumulated parameter gradient is the
  // reweighted batch-mean estimate.
  void batch_gradient(std::span<const double> inputs, const importance::Batch& batch,
                      std::vector<double>& grad, std::vector<double>& losses,
                      std::vector<double>* term_means) {
    const std::size_t m = batch.indices.size();
    losses.resize(m);
    grad.assign(n_params_, 0.0);
    const std::size_t n_chunks = (m + kLanes - 1) / kLanes;
    std::vector<double> partial_grad(n_chunks * n_params_, 0.0);
    std::vector<double> partial(term_means ? n_chunks * n_terms_ : 0, 0.0);
    const double inv_m = 1.0 / static_cast<double>(m);
    parallel_chunks(n_chunks, threads_, [&](std::size_t tid, std::size_t ci) {
      auto& ws = workspaces_[tid];
      auto& rows = gather_[tid];
      const std::size_t start = ci * kLanes;
      const std::size_t count = std::min(kLanes, m - start);
      std::array<double, kLanes> seed{};
      for (std::size_t k = 0; k < count; ++k) {
        const double* src = inputs.data() +
                            static_cast<std::size_t>(batch.indices[start + k]) * n_inputs_;
        std::copy(src, src + n_inputs_, rows.begin() + k * n_inputs_);
        seed[k] = batch.weights[start + k] * inv_m;
      }
      ws.evaluate(std::span<const double>(rows.data(), count * n_inputs_), count);
      for (std::size_t k = 0; k < count; ++k) {
        losses[start + k] = ws.value(problem_.total_loss, k);
      }
      if (term_means) accumulate_terms(ws, count, &partial[ci * n_terms_]);
      ws.reverse(problem_.total_loss, std::span<const double>(seed.data(), count), count);
      ws.accumulate_param_grad(std::span<double>(&partial_grad[ci * n_params_], n_params_), count);
    });
    for (std::size_t ci = 0; ci < n_chunks; ++ci) {
      const double* src = &partial_grad[ci * n_params_];
      for (std::size_t i = 0; i < n_params_; ++i) grad[i] += src[i];
    }
    if (term_means) reduce_terms(partial, n_chunks, m, *term_means);
  }

 private:
  void accumulate_terms(const ad::Workspace& ws, std::size_t count, double* sums) {
    for (std::size_t i = 0; i < n_terms_; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < count; ++k) s += ws.value(problem_.term_nodes[i], k);
      sums[i] += s;
    }
  }

  void reduce_terms(const std::vector<double>& partial, std::size_t n_chunks, std::size_t n,
                    std::vector<double>& means) {
    means.assign(n_terms_, 0.0);
    for (std::size_t ci = 0; ci < n_chunks; ++ci) {
      for (std::size_t i = 0; i < n_terms_; ++i) means[i] += partial[ci * n_terms_ + i];
    }
    for (auto& v : means) v /= static_cast<double>(n);
  }

  const problems::Problem& problem_;
  std::size_t threads_;
  std::size_t n_inputs_, n_params_, n_terms_;
  std::vector<ad::Workspace> workspaces_;
  std::vector<std::vector<double>> gather_;
};

double mean_of(const std::vector<double>& v) {
  double s = std::accumulate(v.begin(), v.end(), 0.0);
  return s / static_cast<double>(v.size());
}

}  // namespace

std::uint64_t fnv1a_hash(std::span<const std::uint32_t> values) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::uint32_t v : values) {
    for (int shift = 0; shift < 32; shift += 8) {
      h ^= (v >> shift) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

TrainResult train(const problems::Problem& problem, const TrainConfig& cfg) {
  const std::size_t n = problem.collocation.size();
  const std::size_t s = problem.seeds.size();
  if (cfg.batch < 1 || cfg.batch > n) {
    throw ConfigError("batch size must lie in [1, n_collocation]");
  }
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(cfg.tolerance >= 0.0)) throw ConfigError("tolerance must be nonnegative");

  const std::size_t threads = resolve_threads(cfg.threads);
  Evaluator ev(problem, threads);

  std::vector<double> theta = nn::init_glorot(problem.net).flatten();
  nn::AdamState adam(theta.size(), cfg.adam_eps);
  const std::uint64_t batch_seed = derive_seed(cfg.rng_seed, 0xba7c4);

  TrainResult result;
  const auto t_start = std::chrono::steady_clock::now();
  auto wall = [&t_start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  importance::ProposalDistribution uniform_q;
  if (cfg.mode == importance::Mode::kUniform) uniform_q = importance::uniform_proposal(n);

  std::vector<double> losses, norms, batch_losses, grad, terms;

  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    ev.bind(theta);

    importance::ProposalDistribution q;
    double total = 0.0;
    bool stats_from_batch = false;
    switch (cfg.mode) {
      case importance::Mode::kUniform:
        q = uniform_q;
        // Record the loss on the fixed seed view so curves from different
        // modes estimate the same quantity; the training batch is a biased
        // probe of solution quality once the net adapts to the collocation
        // set. Hand-built problems without seeds fall back to the batch mean.
        if (s > 0) {
          ev.forward_losses(problem.seeds.inputs, s, losses, &terms);
          total = mean_of(losses);
        } else {
          stats_from_batch = true;
        }
        break;
      case importance::Mode::kExactLoss:
        ev.forward_losses(problem.collocation.inputs, n, losses, &terms);
        total = mean_of(losses);
        if (std::isfinite(total)) q = importance::build_proposal_exact(losses);
        break;
      case importance::Mode::kPwcLoss:
        ev.forward_losses(problem.seeds.inputs, s, losses, &terms);
        total = mean_of(losses);
        if (std::isfinite(total)) q = importance::build_proposal_pwc(losses, problem.rho);
        break;
      case importance::Mode::kGradNorm:
        ev.forward_gradnorms(problem.collocation.inputs, n, norms, losses, &terms);
        total = mean_of(losses);
        if (std::isfinite(total)) q = importance::build_proposal_gradnorm(norms);
        break;
    }
    if (!stats_from_batch && !std::isfinite(total)) {
      result.records.push_back({iter, wall(), total, terms, 0.0, 0});
      result.aborted = true;
      result.abort_reason = "non-finite loss estimate at iteration " + std::to_string(iter);
      break;
    }

    importance::Batch batch = importance::sample_batch(q, cfg.batch, derive_seed(batch_seed, iter));
    ev.batch_gradient(problem.collocation.inputs, batch, grad, batch_losses,
                      stats_from_batch ? &terms : nullptr);
    if (stats_from_batch) total = mean_of(batch_losses);

    result.records.push_back({iter, wall(), total, terms, importance::entropy(q),
                              fnv1a_hash(batch.indices)});
    if (!std::isfinite(total)) {
      result.aborted = true;
      result.abort_reason = "non-finite loss estimate at iteration " + std::to_string(iter);
      break;
    }
    if (total <= cfg.tolerance) break;

    try {
      nn::adam_step(adam, theta, grad, cfg.learning_rate);
    } catch (const TrainingError& e) {
      result.aborted = true;
      result.abort_reason = std::string(e.what()) + " at iteration " + std::to_string(iter);
      break;
    }
  }

  result.params = nn::Parameters::from_flat(problem.net, theta);
  return result;
}

ErrorReport evaluate_error(const problems::Problem& problem, const nn::Parameters& params,
                           std::size_t n_eval, std::uint64_t seed) {
  if (!problem.reference) {
    throw std::logic_error("problem '" + problem.name + "' has no reference solution");
  }
  auto sample = geom::sample_interior(problem.domain, n_eval, geom::Generator::kHalton,
                                      derive_seed(seed, 0xe7a1), 1,
                                      problem.sampling.halton_scramble);
  ad::Workspace ws(problem.tape, kLanes);
  ws.bind_parameters(params.flatten());

  const std::size_t ni = problem.tape.num_inputs();
  const std::size_t no = problem.net_outputs.size();
  std::vector<double> rows(kLanes * ni, 0.0);
  std::vector<double> num(no, 0.0), den(no, 0.0);
  for (std::size_t start = 0; start < n_eval; start += kLanes) {
    const std::size_t count = std::min(kLanes, n_eval - start);
    std::fill(rows.begin(), rows.end(), 0.0);
    for (std::size_t k = 0; k < count; ++k) {
      auto pt = sample.points.point(start + k);
      rows[k * ni + 0] = pt[0];
      rows[k * ni + 1] = pt[1];
    }
    ws.evaluate(std::span<const double>(rows.data(), count * ni), count);
    for (std::size_t k = 0; k < count; ++k) {
      auto ref = problem.reference(sample.points.point(start + k));
      for (std::size_t c = 0; c < no; ++c) {
        double diff = ws.value(problem.net_outputs[c], k) - ref[c];
        num[c] += diff * diff;
        den[c] += ref[c] * ref[c];
      }
    }
  }
  ErrorReport report;
  double num_all = 0.0, den_all = 0.0;
  for (std::size_t c = 0; c < no; ++c) {
    num_all += num[c];
    den_all += den[c];
    report.per_component.push_back(den[c] > 0.0 ? std::sqrt(num[c] / den[c])
                                                : (num[c] > 0.0 ? INFINITY : 0.0));
  }
  report.aggregate = den_all > 0.0 ? std::sqrt(num_all / den_all) : (num_all > 0.0 ? INFINITY : 0.0);
  return report;
}

double pwc_approximation_error(const problems::Problem& problem, const nn::Parameters& params,
                               const problems::View& seeds, std::span<const std::uint32_t> rho) {
  Evaluator ev(problem, 1);
  ev.bind(params.flatten());
  std::vector<double> exact, at_seeds;
  ev.forward_losses(problem.collocation.inputs, problem.collocation.size(), exact, nullptr);
  ev.forward_losses(seeds.inputs, seeds.size(), at_seeds, nullptr);
  if (rho.size() != exact.size()) {
    throw std::invalid_argument("pwc_approximation_error: rho size mismatch");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < exact.size(); ++j) {
    double diff = exact[j] - at_seeds[rho[j]];
    num += diff * diff;
    den += exact[j] * exact[j];
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace pinn::trainer
