#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pinn/autodiff.hpp"

namespace pinn::nn {

enum class Activation { kSine, kTanh, kSwish, kSigmoid, kRelu };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation a);

struct NetworkConfig {
  std::size_t n_inputs = 0;
  std::vector<std::size_t> hidden;
  std::size_t n_outputs = 0;
  Activation activation = Activation::kTanh;
  std::uint64_t init_seed = 1;

  // [n_inputs, hidden..., n_outputs]
  std::vector<std::size_t> layer_widths() const;
};

// Dense layer parameters. weights[l] is row-major [fan_in x fan_out] so that
// y = x W + b with x a row vector; biases[l] has fan_out entries. The flat
// order (per layer: W row-major, then b) matches the tape parameter order
// produced by append_network.
struct Parameters {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  std::size_t flat_size() const;
  std::vector<double> flatten() const;
  static Parameters from_flat(const NetworkConfig& cfg,
                              std::span<const double> theta);
};

// Glorot-uniform weights, bound sqrt(6/(fan_in+fan_out)); zero biases.
// Deterministic in cfg.init_seed.
Parameters init_glorot(const NetworkConfig& cfg);

struct NetworkGraph {
  std::vector<ad::NodeId> outputs;
  std::vector<ad::NodeId> params;  // flat order, matches Parameters::flatten
};

// Appends one network instantiation to the tape. inputs.size() must equal
// cfg.n_inputs; the final layer is affine (no activation). When shared_params
// is non-empty it must hold the parameter nodes of a previous instantiation
// with the same shape, which are then reused instead of creating new ones.
NetworkGraph append_network(ad::Tape& tape, const NetworkConfig& cfg,
                            std::span<const ad::NodeId> inputs,
                            std::span<const ad::NodeId> shared_params = {});

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;

  explicit AdamState(std::size_t n, double eps_ = 1e-8)
      : eps(eps_), m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update in place. Throws TrainingError on non-finite
// gradient entries.
void adam_step(AdamState& state, std::span<double> theta,
               std::span<const double> grad, double lr);

// Text checkpoint: version line, activation, layer widths, then per layer the
// row-major weight matrix and bias vector, printed with 17 significant digits
// so values round-trip exactly.
void save_checkpoint(const std::string& path, const NetworkConfig& cfg,
                     const Parameters& params);
std::pair<NetworkConfig, Parameters> load_checkpoint(const std::string& path);

}  // namespace pinn::nn
