#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pinn/config.hpp"
#include "pinn/errors.hpp"
#include "pinn/report.hpp"
#include "pinn/rng.hpp"
#include "pinn/trainer.hpp"
#include "pinn/version.hpp"

namespace fs = std::filesystem;
using namespace pinn;

namespace {

// exit codes: 0 success, 1 check failure, 2 config error, 3 runtime abort
constexpr int kOk = 0, kCheckFailed = 1, kConfigError = 2, kAborted = 3;

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const fs::path& dir, const std::string& config_path,
                    const config::RunConfig& cfg, const std::vector<std::string>& outputs,
                    const std::string& started, const std::string& extra) {
  std::ofstream out(dir / "manifest.txt");
  out << "tool pinn-is " << kVersion << "\n";
  out << "started " << started << "\n";
  out << "finished " << timestamp_utc() << "\n";
  out << "config_path " << config_path << "\n";
  out << "rng_seed " << cfg.training.rng_seed << "\n";
  out << "init_seed " << cfg.problem.net.init_seed << "\n";
  out << "mode " << importance::to_string(cfg.training.mode) << "\n";
  for (const auto& o : outputs) out << "output " << o << "\n";
  if (!extra.empty()) out << extra;
  out << "config_snapshot_begin\n";
  std::ifstream in(config_path);
  std::string line;
  while (std::getline(in, line)) out << "  " << line << "\n";
  out << "config_snapshot_end\n";
}

void write_run_outputs(const fs::path& dir, const problems::Problem& problem,
                       const trainer::TrainResult& result) {
  report::write_records_csv((dir / "records.csv").string(), result.records, problem.term_names);
  nn::save_checkpoint((dir / "checkpoint.txt").string(), problem.net, result.params);

  report::Series by_iter{"total loss", {}, {}}, by_time{"total loss", {}, {}};
  for (const auto& r : result.records) {
    by_iter.x.push_back(static_cast<double>(r.iteration));
    by_iter.y.push_back(r.total_loss);
    by_time.x.push_back(r.wall_s);
    by_time.y.push_back(r.total_loss);
  }
  report::write_svg_plot((dir / "loss_vs_iter.svg").string(), "training loss", "iteration",
                         "total loss", {by_iter});
  report::write_svg_plot((dir / "loss_vs_time.svg").string(), "training loss", "wall time [s]",
                         "total loss", {by_time});
}

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  const std::string started = timestamp_utc();
  auto cfg = config::load_config(config_path);
  auto problem = problems::build_problem(cfg.problem, cfg.sampling);

  fs::path dir(out_dir);
  fs::create_directories(dir);

  auto result = trainer::train(problem, cfg.training);
  write_run_outputs(dir, problem, result);

  std::ostringstream extra;
  if (!result.aborted && problem.reference && cfg.n_eval > 0) {
    auto err = trainer::evaluate_error(problem, result.params, cfg.n_eval, cfg.training.rng_seed);
    std::cout << "relative L2 error vs reference (n_eval=" << cfg.n_eval << "): aggregate "
              << report::format_double(err.aggregate);
    extra << "rel_l2_aggregate " << report::format_double(err.aggregate) << "\n";
    for (std::size_t c = 0; c < err.per_component.size(); ++c) {
      std::cout << ", component" << c << " " << report::format_double(err.per_component[c]);
      extra << "rel_l2_component" << c << " " << report::format_double(err.per_component[c])
            << "\n";
    }
    std::cout << "\n";
  }
  write_manifest(dir, config_path, cfg,
                 {"records.csv", "checkpoint.txt", "loss_vs_iter.svg", "loss_vs_time.svg"},
                 started, extra.str());

  if (result.aborted) {
    std::cerr << "training aborted: " << result.abort_reason << "\n";
    return kAborted;
  }
  std::cout << "wrote " << (dir / "records.csv").string() << " (" << result.records.size()
            << " iterations, final loss "
            << report::format_double(result.records.empty() ? NAN
                                                            : result.records.back().total_loss)
            << ")\n";
  return kOk;
}

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return NAN;
  double h = (static_cast<double>(v.size()) - 1.0) * p;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

int cmd_compare(const std::string& config_path, const std::string& modes_csv, int repeats,
                const std::string& out_dir) {
  const std::string started = timestamp_utc();
  auto cfg = config::load_config(config_path);

  std::vector<importance::Mode> modes;
  {
    std::stringstream ss(modes_csv);
    std::string item;
    while (std::getline(ss, item, ',')) modes.push_back(importance::mode_from_string(item));
    if (modes.empty()) throw ConfigError("--modes must name at least one sampling mode");
  }
  if (repeats < 1) throw ConfigError("--repeats must be at least 1");

  fs::path dir(out_dir);
  fs::create_directories(dir);

  // records[mode][repeat]; every mode in repeat r shares the same point sets
  // and network init so comparisons are paired
  std::vector<std::vector<std::vector<trainer::TrainingRecord>>> records(
      modes.size(), std::vector<std::vector<trainer::TrainingRecord>>(repeats));
  std::vector<std::string> outputs;
  std::vector<std::string> term_names;
  bool any_aborted = false;

  for (int rep = 0; rep < repeats; ++rep) {
    auto rep_cfg = cfg;
    if (repeats > 1) {
      rep_cfg.sampling.rng_seed = derive_seed(cfg.sampling.rng_seed, 100 + rep);
      rep_cfg.training.rng_seed = rep_cfg.sampling.rng_seed;
      rep_cfg.problem.net.init_seed = derive_seed(cfg.problem.net.init_seed, 200 + rep);
    }
    auto problem = problems::build_problem(rep_cfg.problem, rep_cfg.sampling);
    term_names = problem.term_names;
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
      auto tc = rep_cfg.training;
      tc.mode = modes[mi];
      auto result = trainer::train(problem, tc);
      if (result.aborted) {
        std::cerr << importance::to_string(modes[mi]) << " rep " << rep
                  << " aborted: " << result.abort_reason << "\n";
        any_aborted = true;
      }
      std::string name = importance::to_string(modes[mi]) + "_rep" + std::to_string(rep) + ".csv";
      report::write_records_csv((dir / name).string(), result.records, problem.term_names);
      outputs.push_back(name);
      records[mi][rep] = std::move(result.records);
    }
  }

  // pointwise medians across repeats
  std::vector<report::Series> med_iter, med_time;
  std::ostringstream summary;
  summary << "mode final_loss_median final_loss_iqr wall_s_median\n";
  for (std::size_t mi = 0; mi < modes.size(); ++mi) {
    const auto& runs = records[mi];
    std::size_t len = runs[0].size();
    for (const auto& r : runs) len = std::min(len, r.size());
    report::Series si{importance::to_string(modes[mi]), {}, {}};
    report::Series st = si;
    for (std::size_t i = 0; i < len; ++i) {
      std::vector<double> losses, walls;
      for (const auto& r : runs) {
        losses.push_back(r[i].total_loss);
        walls.push_back(r[i].wall_s);
      }
      si.x.push_back(static_cast<double>(i));
      si.y.push_back(quantile(losses, 0.5));
      st.x.push_back(quantile(walls, 0.5));
      st.y.push_back(quantile(losses, 0.5));
    }
    med_iter.push_back(si);
    med_time.push_back(st);

    std::vector<double> finals, total_walls;
    for (const auto& r : runs) {
      if (!r.empty()) {
        finals.push_back(r.back().total_loss);
        total_walls.push_back(r.back().wall_s);
      }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s %.10g %.10g %.10g\n",
                  importance::to_string(modes[mi]).c_str(), quantile(finals, 0.5),
                  quantile(finals, 0.75) - quantile(finals, 0.25), quantile(total_walls, 0.5));
    summary << buf;
  }

  report::write_svg_plot((dir / "compare_loss_vs_iter.svg").string(), "median training loss",
                         "iteration", "total loss", med_iter);
  report::write_svg_plot((dir / "compare_loss_vs_time.svg").string(), "median training loss",
                         "wall time [s]", "total loss", med_time);
  {
    std::ofstream out(dir / "summary.txt");
    out << summary.str();
  }
  std::cout << summary.str();
  outputs.insert(outputs.end(),
                 {"summary.txt", "compare_loss_vs_iter.svg", "compare_loss_vs_time.svg"});
  write_manifest(dir, config_path, cfg, outputs, started, "repeats " + std::to_string(repeats) +
                                                              "\nmodes " + modes_csv + "\n");
  return any_aborted ? kAborted : kOk;
}

int cmd_checkgrad(const std::string& config_path) {
  auto cfg = config::load_config(config_path);
  auto problem = problems::build_problem(cfg.problem, cfg.sampling);

  auto theta = nn::init_glorot(problem.net).flatten();
  const auto& tape = problem.tape;
  const std::size_t ni = tape.num_inputs();

  const bool inject = [] {
    const char* v = std::getenv("PINN_IS_FAULT_INJECT");
    return v != nullptr && std::strcmp(v, "0") != 0;
  }();

  std::mt19937_64 gen(derive_seed(cfg.training.rng_seed, 0xc6ad));
  constexpr std::size_t kPoints = 4, kCoords = 150;
  double worst = 0.0;
  std::size_t worst_point = 0, worst_coord = 0;

  for (std::size_t pi = 0; pi < kPoints; ++pi) {
    std::size_t row = gen() % problem.collocation.size();
    std::span<const double> inputs(problem.collocation.inputs.data() + row * ni, ni);
    auto grad = ad::grad_parameters(tape, problem.total_loss, inputs, theta);
    if (inject) grad[gen() % grad.size()] *= 1.001;

    double scale = 1e-8;
    for (double g : grad) scale = std::max(scale, std::abs(g));

    for (std::size_t c = 0; c < std::min(kCoords, grad.size()); ++c) {
      std::size_t i = gen() % grad.size();
      double h = 1e-4 * std::max(1.0, std::abs(theta[i]));
      double saved = theta[i];
      theta[i] = saved + h;
      double jp = ad::evaluate(tape, inputs, theta, std::array{problem.total_loss})[0];
      theta[i] = saved - h;
      double jm = ad::evaluate(tape, inputs, theta, std::array{problem.total_loss})[0];
      theta[i] = saved;
      double fd = (jp - jm) / (2.0 * h);
      double rel = std::abs(fd - grad[i]) / std::max(std::abs(fd) + std::abs(grad[i]), 1e-3 * scale);
      if (rel > worst) {
        worst = rel;
        worst_point = row;
        worst_coord = i;
      }
    }
  }

  std::cout << "max relative gradient error " << report::format_double(worst)
            << " (threshold 0.0001)\n";
  if (worst >= 1e-4) {
    std::cerr << "gradient check failed at collocation row " << worst_point << ", parameter "
              << worst_coord << "\n";
    return kCheckFailed;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"physics-informed network training with loss-proportional importance sampling"};
  app.require_subcommand(1);

  std::string config_path, out_dir, modes = "uniform,pwc-loss";
  int repeats = 1;

  auto* run = app.add_subcommand("run", "train once and write records/plots/checkpoint");
  run->add_option("config", config_path, "run config file")->required();
  run->add_option("-o,--output", out_dir, "output directory")->required();

  auto* compare = app.add_subcommand("compare", "train under several sampling modes");
  compare->add_option("config", config_path, "run config file")->required();
  compare->add_option("--modes", modes, "comma-separated sampling modes");
  compare->add_option("--repeats", repeats, "independent repeats per mode");
  compare->add_option("-o,--output", out_dir, "output directory")->required();

  auto* checkgrad = app.add_subcommand("checkgrad", "finite-difference audit of the gradients");
  checkgrad->add_option("config", config_path, "run config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir);
    if (compare->parsed()) return cmd_compare(config_path, modes, repeats, out_dir);
    return cmd_checkgrad(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kAborted;
  }
}
