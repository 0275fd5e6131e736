#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pinn/config.hpp"
#include "pinn/geometry.hpp"
#include "pinn/importance.hpp"
#include "pinn/problems.hpp"
#include "pinn/trainer.hpp"
#include "pinn/version.hpp"

namespace py = pybind11;
using namespace pinn;

namespace {

py::dict record_to_dict(const trainer::TrainingRecord& r) {
  py::dict d;
  d["iteration"] = r.iteration;
  d["wall_s"] = r.wall_s;
  d["total_loss"] = r.total_loss;
  d["term_losses"] = r.term_losses;
  d["proposal_entropy"] = r.proposal_entropy;
  d["batch_hash"] = r.batch_hash;
  return d;
}

py::dict train_from_config(const std::string& path, std::optional<std::size_t> max_iterations,
                           std::optional<std::string> mode, std::optional<std::size_t> n_eval) {
  auto cfg = config::load_config(path);
  if (max_iterations) cfg.training.max_iterations = *max_iterations;
  if (mode) cfg.training.mode = importance::mode_from_string(*mode);
  if (n_eval) cfg.n_eval = *n_eval;

  auto problem = problems::build_problem(cfg.problem, cfg.sampling);
  auto result = trainer::train(problem, cfg.training);

  py::dict out;
  out["aborted"] = result.aborted;
  out["abort_reason"] = result.abort_reason;
  out["term_names"] = problem.term_names;
  py::list records;
  for (const auto& r : result.records) records.append(record_to_dict(r));
  out["records"] = records;
  out["params"] = result.params.flatten();
  if (!result.aborted && problem.reference && cfg.n_eval > 0) {
    auto err = trainer::evaluate_error(problem, result.params, cfg.n_eval, cfg.training.rng_seed);
    out["rel_l2_error"] = err.aggregate;
    out["rel_l2_components"] = err.per_component;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "physics-informed network training with loss-proportional importance sampling";
  m.attr("__version__") = kVersion;

  m.def("radical_inverse",
        [](std::uint64_t index, unsigned base) { return geom::radical_inverse(index, base); },
        py::arg("index"), py::arg("base"));
  m.def("halton", &geom::halton, py::arg("index"), py::arg("base"));

  m.def("diffusion_reference", &problems::diffusion_reference, py::arg("t"), py::arg("x"),
        py::arg("tol") = 1e-10);
  m.def("elasticity_exact", &problems::elasticity_exact, py::arg("x"), py::arg("y"));

  m.def("build_proposal_exact",
        [](const std::vector<double>& losses) { return importance::build_proposal_exact(losses).q; },
        py::arg("losses"));
  m.def("build_proposal_pwc",
        [](const std::vector<double>& seed_losses, const std::vector<std::uint32_t>& rho) {
          return importance::build_proposal_pwc(seed_losses, rho).q;
        },
        py::arg("seed_losses"), py::arg("rho"));
  m.def("sample_batch",
        [](const std::vector<double>& q, std::size_t m, std::uint64_t seed) {
          importance::ProposalDistribution p{q, importance::Mode::kExactLoss};
          auto batch = importance::sample_batch(p, m, seed);
          return py::make_tuple(batch.indices, batch.weights);
        },
        py::arg("q"), py::arg("m"), py::arg("seed"));
  m.def("proposal_entropy",
        [](const std::vector<double>& q) {
          return importance::entropy({q, importance::Mode::kExactLoss});
        },
        py::arg("q"));

  m.def("train_from_config", &train_from_config, py::arg("config_path"),
        py::arg("max_iterations") = py::none(), py::arg("mode") = py::none(),
        py::arg("n_eval") = py::none());
}
