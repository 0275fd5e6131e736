#include "pinn/nn.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "pinn/errors.hpp"

namespace pinn::nn {

Activation activation_from_string(const std::string& name) {
  if (name == "sine") return Activation::kSine;
  if (name == "tanh") return Activation::kTanh;
  if (name == "swish") return Activation::kSwish;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name +
                    "' (expected sine, tanh, swish, sigmoid or relu)");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kSine: return "sine";
    case Activation::kTanh: return "tanh";
    case Activation::kSwish: return "swish";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
  }
  return "?";
}

std::vector<std::size_t> NetworkConfig::layer_widths() const {
  std::vector<std::size_t> w;
  w.reserve(hidden.size() + 2);
  w.push_back(n_inputs);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(n_outputs);
  return w;
}

std::size_t Parameters::flat_size() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

std::vector<double> Parameters::flatten() const {
  std::vector<double> out;
  out.reserve(flat_size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].begin(), weights[l].end());
    out.insert(out.end(), biases[l].begin(), biases[l].end());
  }
  return out;
}

Parameters Parameters::from_flat(const NetworkConfig& cfg,
                                 std::span<const double> theta) {
  const auto widths = cfg.layer_widths();
  Parameters p;
  std::size_t pos = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t nw = widths[l] * widths[l + 1];
    const std::size_t nb = widths[l + 1];
    if (pos + nw + nb > theta.size())
      throw std::invalid_argument("from_flat: parameter vector too short");
    p.weights.emplace_back(theta.begin() + pos, theta.begin() + pos + nw);
    pos += nw;
    p.biases.emplace_back(theta.begin() + pos, theta.begin() + pos + nb);
    pos += nb;
  }
  if (pos != theta.size())
    throw std::invalid_argument("from_flat: parameter vector too long");
  return p;
}

namespace {

// Uniform double in [0, 1) from the top 53 bits, so draws are identical on
// every platform for a given seed.
double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

Parameters init_glorot(const NetworkConfig& cfg) {
  const auto widths = cfg.layer_widths();
  std::mt19937_64 gen(cfg.init_seed);
  Parameters p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    const double bound =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out);
    for (double& x : w) x = bound * (2.0 * uniform01(gen) - 1.0);
    p.weights.push_back(std::move(w));
    p.biases.emplace_back(fan_out, 0.0);
  }
  return p;
}

NetworkGraph append_network(ad::Tape& tape, const NetworkConfig& cfg,
                            std::span<const ad::NodeId> inputs,
                            std::span<const ad::NodeId> shared_params) {
  if (inputs.size() != cfg.n_inputs)
    throw std::invalid_argument("append_network: expected " +
                                std::to_string(cfg.n_inputs) + " inputs, got " +
                                std::to_string(inputs.size()));
  const auto widths = cfg.layer_widths();
  std::size_t flat_size = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    flat_size += widths[l] * widths[l + 1] + widths[l + 1];
  if (!shared_params.empty() && shared_params.size() != flat_size)
    throw std::invalid_argument(
        "append_network: shared parameter count does not match shape");

  NetworkGraph g;
  g.params.reserve(flat_size);
  std::size_t pos = 0;
  auto next_param = [&]() {
    if (!shared_params.empty()) {
      ad::NodeId id = shared_params[pos++];
      g.params.push_back(id);
      return id;
    }
    ad::NodeId id = tape.parameter();
    g.params.push_back(id);
    return id;
  };

  std::vector<ad::NodeId> cur(inputs.begin(), inputs.end());
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l];
    const std::size_t fan_out = widths[l + 1];
    std::vector<ad::NodeId> w(fan_in * fan_out);
    for (auto& id : w) id = next_param();
    std::vector<ad::NodeId> b(fan_out);
    for (auto& id : b) id = next_param();

    const bool last = l + 2 == widths.size();
    std::vector<ad::NodeId> nxt(fan_out);
    std::vector<ad::NodeId> col(fan_in);
    for (std::size_t j = 0; j < fan_out; ++j) {
      for (std::size_t i = 0; i < fan_in; ++i) col[i] = w[i * fan_out + j];
      ad::NodeId pre = tape.affine(cur, col, b[j]);
      if (last) {
        nxt[j] = pre;
      } else {
        switch (cfg.activation) {
          case Activation::kSine: nxt[j] = tape.sin(pre); break;
          case Activation::kTanh: nxt[j] = tape.tanh(pre); break;
          case Activation::kSwish: nxt[j] = tape.swish(pre); break;
          case Activation::kSigmoid: nxt[j] = tape.sigmoid(pre); break;
          case Activation::kRelu: nxt[j] = tape.relu(pre); break;
        }
      }
    }
    cur = std::move(nxt);
  }
  g.outputs = std::move(cur);
  return g;
}

void adam_step(AdamState& state, std::span<double> theta,
               std::span<const double> grad, double lr) {
  if (theta.size() != grad.size() || theta.size() != state.m.size())
    throw std::invalid_argument("adam_step: size mismatch");
  for (double gk : grad)
    if (!std::isfinite(gk))
      throw TrainingError("adam_step: non-finite gradient entry");
  state.t += 1;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < theta.size(); ++k) {
    state.m[k] = b1 * state.m[k] + (1.0 - b1) * grad[k];
    state.v[k] = b2 * state.v[k] + (1.0 - b2) * grad[k] * grad[k];
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    theta[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void save_checkpoint(const std::string& path, const NetworkConfig& cfg,
                     const Parameters& params) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint file for writing: " + path);
  out << "pinn-net-v1\n";
  out << "activation " << to_string(cfg.activation) << "\n";
  out << "widths";
  for (std::size_t w : cfg.layer_widths()) out << " " << w;
  out << "\n";
  char buf[40];
  auto emit = [&](const std::vector<double>& vals, std::size_t per_line) {
    for (std::size_t i = 0; i < vals.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", vals[i]);
      out << buf << ((i + 1) % per_line == 0 || i + 1 == vals.size() ? "\n" : " ");
    }
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    const std::size_t fan_out = params.biases[l].size();
    out << "layer " << l << "\n";
    emit(params.weights[l], fan_out);
    out << "bias " << l << "\n";
    emit(params.biases[l], fan_out);
  }
  if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

std::pair<NetworkConfig, Parameters> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint file: " + path);
  std::string tag;
  std::getline(in, tag);
  if (tag != "pinn-net-v1")
    throw ConfigError("checkpoint " + path + ": unknown version tag '" + tag +
                      "'");
  std::string word;
  NetworkConfig cfg;
  in >> word;
  if (word != "activation")
    throw ConfigError("checkpoint " + path + ": expected 'activation'");
  in >> word;
  cfg.activation = activation_from_string(word);
  in >> word;
  if (word != "widths")
    throw ConfigError("checkpoint " + path + ": expected 'widths'");
  std::vector<std::size_t> widths;
  std::string rest;
  std::getline(in, rest);
  std::istringstream ws(rest);
  std::size_t v;
  while (ws >> v) widths.push_back(v);
  if (widths.size() < 2)
    throw ConfigError("checkpoint " + path + ": needs at least two widths");
  cfg.n_inputs = widths.front();
  cfg.n_outputs = widths.back();
  cfg.hidden.assign(widths.begin() + 1, widths.end() - 1);

  Parameters p;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    std::size_t idx;
    in >> word >> idx;
    if (!in || word != "layer" || idx != l)
      throw ConfigError("checkpoint " + path + ": expected 'layer " +
                        std::to_string(l) + "'");
    std::vector<double> w(widths[l] * widths[l + 1]);
    for (double& x : w)
      if (!(in >> x))
        throw ConfigError("checkpoint " + path + ": truncated weights");
    in >> word >> idx;
    if (!in || word != "bias" || idx != l)
      throw ConfigError("checkpoint " + path + ": expected 'bias " +
                        std::to_string(l) + "'");
    std::vector<double> b(widths[l + 1]);
    for (double& x : b)
      if (!(in >> x))
        throw ConfigError("checkpoint " + path + ": truncated biases");
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return {cfg, p};
}

}  // namespace pinn::nn
