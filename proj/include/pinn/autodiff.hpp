#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace pinn::ad {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xffffffffu;

enum class Op : std::uint8_t {
  kConst,
  kInput,
  kParam,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kPow,  // exponent is a fixed real, not a node
  kSin,
  kCos,
  kExp,
  kTanh,
  kSigmoid,
  kSwish,
  kRelu,
  kStep,    // unit step; derivative taken as zero everywhere
  kAffine,  // fused dot(x, w) + bias over an argument pool
};

struct Node {
  Op op;
  NodeId a = kNoNode;  // operand 1, or pool offset for kAffine
  NodeId b = kNoNode;  // operand 2, or input width for kAffine
  double c = 0.0;      // value for kConst, exponent for kPow
};

// A flat expression graph in topological order. Nodes are appended through the
// builder methods below and never mutated, so a fully built tape is immutable
// and safe to share across threads; all evaluation state lives in Workspace.
//
// derivative() extends the tape with nodes computing d(output)/d(input) by
// forward-tangent rules. The returned node is an ordinary graph node, so it
// can be differentiated again (for second order) and participates in reverse
// sweeps, which is what makes parameter gradients of residuals containing
// input partials exact.
class Tape {
 public:
  NodeId constant(double v);
  NodeId input();
  NodeId parameter();

  NodeId add(NodeId x, NodeId y);
  NodeId sub(NodeId x, NodeId y);
  NodeId mul(NodeId x, NodeId y);
  NodeId div(NodeId x, NodeId y);
  NodeId neg(NodeId x);
  NodeId pow(NodeId x, double exponent);
  NodeId sin(NodeId x);
  NodeId cos(NodeId x);
  NodeId exp(NodeId x);
  NodeId tanh(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId swish(NodeId x);
  NodeId relu(NodeId x);
  NodeId step(NodeId x);
  // out = sum_i xs[i] * ws[i] + bias. xs and ws must have equal size >= 1.
  NodeId affine(std::span<const NodeId> xs, std::span<const NodeId> ws,
                NodeId bias);

  // Node computing the order-th partial derivative of output w.r.t. wrt.
  // wrt must be an input node; order must be 1 or 2. Results are cached per
  // (wrt, node) pair, so repeated calls share subgraphs.
  NodeId derivative(NodeId output, NodeId wrt, int order = 1);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeId id) const { return nodes_[id]; }
  std::span<const NodeId> affine_pool(const Node& n) const;

  std::size_t num_inputs() const { return inputs_.size(); }
  std::size_t num_params() const { return params_.size(); }
  const std::vector<NodeId>& input_ids() const { return inputs_; }
  const std::vector<NodeId>& param_ids() const { return params_; }

 private:
  NodeId push(Op op, NodeId a, NodeId b, double c = 0.0);
  NodeId tangent_of(NodeId node, std::vector<NodeId>& t);

  std::vector<Node> nodes_;
  std::vector<NodeId> pool_;  // argument lists for kAffine nodes
  std::vector<NodeId> inputs_;
  std::vector<NodeId> params_;
  std::unordered_map<double, NodeId> const_cache_;

  struct TangentDir {
    std::vector<NodeId> t;  // tangent node per node id, kNoNode if zero
    std::size_t upto = 0;   // node ids below this have been processed
  };
  std::unordered_map<NodeId, TangentDir> tangent_dirs_;
};

// Evaluation and reverse-sweep state for one tape, vectorized over a small
// batch of lanes so per-node dispatch amortizes. A workspace is bound to a
// finished tape; create one per thread.
class Workspace {
 public:
  Workspace(const Tape& tape, std::size_t lanes);

  std::size_t lanes() const { return lanes_; }

  // Broadcasts one parameter vector to all lanes. Call whenever parameters
  // change; input-independent rows keep their values across evaluate() calls.
  void bind_parameters(std::span<const double> theta);

  // inputs is row-major [n_active x num_inputs]; n_active <= lanes().
  void evaluate(std::span<const double> inputs, std::size_t n_active);

  // Reverse sweep from `output` with per-lane seed adjoints.
  void reverse(NodeId output, std::span<const double> seed,
               std::size_t n_active);

  double value(NodeId id, std::size_t lane) const {
    return values_[static_cast<std::size_t>(id) * lanes_ + lane];
  }
  std::span<const double> values(NodeId id) const {
    return {values_.data() + static_cast<std::size_t>(id) * lanes_, lanes_};
  }
  double adjoint(NodeId id, std::size_t lane) const {
    return adjoints_[static_cast<std::size_t>(id) * lanes_ + lane];
  }

  // Adds sum over lanes of each parameter adjoint into grad (size num_params),
  // lane order fixed for determinism.
  void accumulate_param_grad(std::span<double> grad, std::size_t n_active) const;

  // Per-lane squared L2 norm of the parameter adjoint vector.
  void param_grad_sq_norms(std::span<double> out, std::size_t n_active) const;

 private:
  const Tape* tape_;
  std::size_t lanes_;
  std::vector<double> values_;
  std::vector<double> adjoints_;
};

// Single-point convenience wrappers.

// Values of `outputs` given one input vector and one parameter vector.
std::vector<double> evaluate(const Tape& tape, std::span<const double> inputs,
                             std::span<const double> params,
                             std::span<const NodeId> outputs);

// d(output)/d(theta_k) for every parameter node, in tape parameter order.
std::vector<double> grad_parameters(const Tape& tape, NodeId output,
                                    std::span<const double> inputs,
                                    std::span<const double> params);

}  // namespace pinn::ad
