#pragma once

#include <stdexcept>
#include <string>

namespace pinn {

// Malformed user input: config files, geometry files, checkpoints.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Training could not continue (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// A sampling domain with (near-)zero feasible volume.
class DegenerateDomainError : public std::runtime_error {
 public:
  explicit DegenerateDomainError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace pinn
