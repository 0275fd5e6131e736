#pragma once

#include <string>

#include "pinn/problems.hpp"
#include "pinn/trainer.hpp"

namespace pinn::config {

struct RunConfig {
  problems::ProblemConfig problem;
  problems::SamplingConfig sampling;
  trainer::TrainConfig training;
  // reference-error evaluation points after training; 0 disables, and
  // problems without a reference solution skip it regardless
  std::size_t n_eval = 0;
};

// Parses an INI-style run description with [problem], [network] and
// [training] sections. Unknown sections or keys, malformed values and missing
// required keys raise ConfigError; line-level messages carry
// "<path>:<line>:" context. The geometry path is resolved relative to the
// config file's directory.
RunConfig load_config(const std::string& path);

}  // namespace pinn::config
