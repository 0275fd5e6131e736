#include "pinn/autodiff.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace pinn::ad {

namespace {

double apply_unary(Op op, double x) {
  switch (op) {
    case Op::kNeg: return -x;
    case Op::kSin: return std::sin(x);
    case Op::kCos: return std::cos(x);
    case Op::kExp: return std::exp(x);
    case Op::kTanh: return std::tanh(x);
    case Op::kSigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Op::kSwish: return x / (1.0 + std::exp(-x));
    case Op::kRelu: return x > 0.0 ? x : 0.0;
    case Op::kStep: return x > 0.0 ? 1.0 : 0.0;
    default: throw std::logic_error("apply_unary: not a unary op");
  }
}

}  // namespace

NodeId Tape::push(Op op, NodeId a, NodeId b, double c) {
  nodes_.push_back(Node{op, a, b, c});
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(double v) {
  if (v == 0.0) v = 0.0;  // collapse -0.0 so the cache key is unique
  auto it = const_cache_.find(v);
  if (it != const_cache_.end()) return it->second;
  NodeId id = push(Op::kConst, kNoNode, kNoNode, v);
  const_cache_.emplace(v, id);
  return id;
}

NodeId Tape::input() {
  NodeId id = push(Op::kInput, kNoNode, kNoNode);
  inputs_.push_back(id);
  return id;
}

NodeId Tape::parameter() {
  NodeId id = push(Op::kParam, kNoNode, kNoNode);
  params_.push_back(id);
  return id;
}

#define PINN_AD_CHECK_ID(x)                                        \
  do {                                                             \
    if ((x) >= nodes_.size())                                      \
      throw std::out_of_range("tape: operand id out of range");    \
  } while (0)

NodeId Tape::add(NodeId x, NodeId y) {
  PINN_AD_CHECK_ID(x);
  PINN_AD_CHECK_ID(y);
  const Node& nx = nodes_[x];
  const Node& ny = nodes_[y];
  if (nx.op == Op::kConst && ny.op == Op::kConst)
    return constant(nx.c + ny.c);
  if (nx.op == Op::kConst && nx.c == 0.0) return y;
  if (ny.op == Op::kConst && ny.c == 0.0) return x;
  return push(Op::kAdd, x, y);
}

NodeId Tape::sub(NodeId x, NodeId y) {
  PINN_AD_CHECK_ID(x);
  PINN_AD_CHECK_ID(y);
  const Node& nx = nodes_[x];
  const Node& ny = nodes_[y];
  if (nx.op == Op::kConst && ny.op == Op::kConst)
    return constant(nx.c - ny.c);
  if (ny.op == Op::kConst && ny.c == 0.0) return x;
  if (nx.op == Op::kConst && nx.c == 0.0) return neg(y);
  return push(Op::kSub, x, y);
}

NodeId Tape::mul(NodeId x, NodeId y) {
  PINN_AD_CHECK_ID(x);
  PINN_AD_CHECK_ID(y);
  const Node& nx = nodes_[x];
  const Node& ny = nodes_[y];
  if (nx.op == Op::kConst && ny.op == Op::kConst)
    return constant(nx.c * ny.c);
  if (nx.op == Op::kConst) {
    if (nx.c == 0.0) return constant(0.0);
    if (nx.c == 1.0) return y;
  }
  if (ny.op == Op::kConst) {
    if (ny.c == 0.0) return constant(0.0);
    if (ny.c == 1.0) return x;
  }
  return push(Op::kMul, x, y);
}

NodeId Tape::div(NodeId x, NodeId y) {
  PINN_AD_CHECK_ID(x);
  PINN_AD_CHECK_ID(y);
  const Node& nx = nodes_[x];
  const Node& ny = nodes_[y];
  if (nx.op == Op::kConst && ny.op == Op::kConst && ny.c != 0.0)
    return constant(nx.c / ny.c);
  if (ny.op == Op::kConst && ny.c == 1.0) return x;
  return push(Op::kDiv, x, y);
}

NodeId Tape::neg(NodeId x) {
  PINN_AD_CHECK_ID(x);
  const Node& nx = nodes_[x];
  if (nx.op == Op::kConst) return constant(-nx.c);
  if (nx.op == Op::kNeg) return nx.a;
  return push(Op::kNeg, x, kNoNode);
}

NodeId Tape::pow(NodeId x, double exponent) {
  PINN_AD_CHECK_ID(x);
  const Node& nx = nodes_[x];
  if (exponent == 0.0) return constant(1.0);
  if (exponent == 1.0) return x;
  if (nx.op == Op::kConst) return constant(std::pow(nx.c, exponent));
  return push(Op::kPow, x, kNoNode, exponent);
}

#define PINN_AD_UNARY(name, opcode)                                  \
  NodeId Tape::name(NodeId x) {                                      \
    PINN_AD_CHECK_ID(x);                                             \
    if (nodes_[x].op == Op::kConst)                                  \
      return constant(apply_unary(opcode, nodes_[x].c));             \
    return push(opcode, x, kNoNode);                                 \
  }

PINN_AD_UNARY(sin, Op::kSin)
PINN_AD_UNARY(cos, Op::kCos)
PINN_AD_UNARY(exp, Op::kExp)
PINN_AD_UNARY(tanh, Op::kTanh)
PINN_AD_UNARY(sigmoid, Op::kSigmoid)
PINN_AD_UNARY(swish, Op::kSwish)
PINN_AD_UNARY(relu, Op::kRelu)
PINN_AD_UNARY(step, Op::kStep)
#undef PINN_AD_UNARY

NodeId Tape::affine(std::span<const NodeId> xs, std::span<const NodeId> ws,
                    NodeId bias) {
  if (xs.empty() || xs.size() != ws.size())
    throw std::invalid_argument("affine: xs and ws must have equal size >= 1");
  for (NodeId id : xs) PINN_AD_CHECK_ID(id);
  for (NodeId id : ws) PINN_AD_CHECK_ID(id);
  PINN_AD_CHECK_ID(bias);
  NodeId offset = static_cast<NodeId>(pool_.size());
  pool_.insert(pool_.end(), xs.begin(), xs.end());
  pool_.insert(pool_.end(), ws.begin(), ws.end());
  pool_.push_back(bias);
  return push(Op::kAffine, offset, static_cast<NodeId>(xs.size()));
}

std::span<const NodeId> Tape::affine_pool(const Node& n) const {
  return {pool_.data() + n.a, 2 * static_cast<std::size_t>(n.b) + 1};
}

NodeId Tape::tangent_of(NodeId id, std::vector<NodeId>& t) {
  const Node n = nodes_[id];  // copy: builders below may reallocate nodes_
  const NodeId ta = n.a != kNoNode && n.op != Op::kAffine ? t[n.a] : kNoNode;
  const NodeId tb =
      n.b != kNoNode && n.op != Op::kAffine && n.op != Op::kPow ? t[n.b]
                                                                : kNoNode;
  switch (n.op) {
    case Op::kConst:
    case Op::kParam:
    case Op::kInput:  // the derivative direction itself is seeded by caller
    case Op::kStep:
      return kNoNode;
    case Op::kAdd:
      if (ta == kNoNode) return tb;
      if (tb == kNoNode) return ta;
      return add(ta, tb);
    case Op::kSub:
      if (tb == kNoNode) return ta;
      if (ta == kNoNode) return neg(tb);
      return sub(ta, tb);
    case Op::kMul: {
      NodeId left = ta != kNoNode ? mul(ta, n.b) : kNoNode;
      NodeId right = tb != kNoNode ? mul(n.a, tb) : kNoNode;
      if (left == kNoNode) return right;
      if (right == kNoNode) return left;
      return add(left, right);
    }
    case Op::kDiv: {
      // d(a/b) = (da - (a/b) db) / b
      if (ta == kNoNode && tb == kNoNode) return kNoNode;
      if (tb == kNoNode) return div(ta, n.b);
      NodeId num = ta == kNoNode ? neg(mul(id, tb)) : sub(ta, mul(id, tb));
      return div(num, n.b);
    }
    case Op::kNeg:
      return ta == kNoNode ? kNoNode : neg(ta);
    case Op::kPow: {
      if (ta == kNoNode) return kNoNode;
      NodeId deriv = mul(constant(n.c), pow(n.a, n.c - 1.0));
      return mul(deriv, ta);
    }
    case Op::kSin:
      return ta == kNoNode ? kNoNode : mul(cos(n.a), ta);
    case Op::kCos:
      return ta == kNoNode ? kNoNode : neg(mul(sin(n.a), ta));
    case Op::kExp:
      return ta == kNoNode ? kNoNode : mul(id, ta);
    case Op::kTanh:
      return ta == kNoNode ? kNoNode
                           : mul(sub(constant(1.0), mul(id, id)), ta);
    case Op::kSigmoid:
      return ta == kNoNode ? kNoNode
                           : mul(mul(id, sub(constant(1.0), id)), ta);
    case Op::kSwish: {
      if (ta == kNoNode) return kNoNode;
      NodeId s = sigmoid(n.a);
      NodeId deriv = add(s, mul(id, sub(constant(1.0), s)));
      return mul(deriv, ta);
    }
    case Op::kRelu:
      return ta == kNoNode ? kNoNode : mul(step(n.a), ta);
    case Op::kAffine: {
      const std::size_t d = n.b;
      // Copy the pool slice: appending nodes may reallocate pool_.
      std::vector<NodeId> args(affine_pool(n).begin(), affine_pool(n).end());
      bool weight_tangent = t[args[2 * d]] != kNoNode;
      for (std::size_t j = 0; j < d && !weight_tangent; ++j)
        weight_tangent = t[args[d + j]] != kNoNode;
      if (!weight_tangent) {
        std::vector<NodeId> txs, tws;
        for (std::size_t j = 0; j < d; ++j) {
          if (t[args[j]] != kNoNode) {
            txs.push_back(t[args[j]]);
            tws.push_back(args[d + j]);
          }
        }
        if (txs.empty()) return kNoNode;
        if (txs.size() == 1) return mul(tws[0], txs[0]);
        return affine(txs, tws, constant(0.0));
      }
      // Rare general case: some weight or bias slot has a tangent.
      NodeId acc = kNoNode;
      auto add_term = [&](NodeId term) {
        acc = acc == kNoNode ? term : add(acc, term);
      };
      for (std::size_t j = 0; j < d; ++j) {
        if (t[args[j]] != kNoNode) add_term(mul(t[args[j]], args[d + j]));
        if (t[args[d + j]] != kNoNode) add_term(mul(args[j], t[args[d + j]]));
      }
      if (t[args[2 * d]] != kNoNode) add_term(t[args[2 * d]]);
      return acc;
    }
  }
  throw std::logic_error("tangent_of: unhandled op");
}

NodeId Tape::derivative(NodeId output, NodeId wrt, int order) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("derivative: order must be 1 or 2, got " +
                                std::to_string(order));
  PINN_AD_CHECK_ID(output);
  PINN_AD_CHECK_ID(wrt);
  if (nodes_[wrt].op != Op::kInput)
    throw std::invalid_argument("derivative: direction must be an input node");
  if (order == 2) return derivative(derivative(output, wrt, 1), wrt, 1);

  TangentDir& dir = tangent_dirs_[wrt];
  const std::size_t limit = static_cast<std::size_t>(output) + 1;
  if (limit > dir.upto) {
    if (dir.t.size() < limit) dir.t.resize(limit, kNoNode);
    if (dir.upto <= wrt && wrt < limit) dir.t[wrt] = constant(1.0);
    for (std::size_t i = dir.upto; i < limit; ++i) {
      if (i == wrt) continue;
      dir.t[i] = tangent_of(static_cast<NodeId>(i), dir.t);
    }
    dir.upto = limit;
  }
  NodeId t = dir.t[output];
  return t == kNoNode ? constant(0.0) : t;
}

#undef PINN_AD_CHECK_ID

Workspace::Workspace(const Tape& tape, std::size_t lanes)
    : tape_(&tape),
      lanes_(lanes),
      values_(tape.size() * lanes, 0.0),
      adjoints_(tape.size() * lanes, 0.0) {
  if (lanes == 0) throw std::invalid_argument("workspace: lanes must be >= 1");
  for (NodeId i = 0; i < tape.size(); ++i) {
    const Node& n = tape.node(i);
    if (n.op == Op::kConst) {
      double* row = values_.data() + static_cast<std::size_t>(i) * lanes_;
      for (std::size_t k = 0; k < lanes_; ++k) row[k] = n.c;
    }
  }
}

void Workspace::bind_parameters(std::span<const double> theta) {
  if (theta.size() != tape_->num_params())
    throw std::invalid_argument("bind_parameters: expected " +
                                std::to_string(tape_->num_params()) +
                                " values, got " + std::to_string(theta.size()));
  const auto& ids = tape_->param_ids();
  for (std::size_t p = 0; p < ids.size(); ++p) {
    double* row = values_.data() + static_cast<std::size_t>(ids[p]) * lanes_;
    for (std::size_t k = 0; k < lanes_; ++k) row[k] = theta[p];
  }
}

void Workspace::evaluate(std::span<const double> inputs, std::size_t n_active) {
  const std::size_t ni = tape_->num_inputs();
  if (n_active > lanes_)
    throw std::invalid_argument("evaluate: n_active exceeds lane count");
  if (inputs.size() != ni * n_active)
    throw std::invalid_argument("evaluate: expected " +
                                std::to_string(ni * n_active) +
                                " input values, got " +
                                std::to_string(inputs.size()));
  const auto& ids = tape_->input_ids();
  for (std::size_t idx = 0; idx < ni; ++idx) {
    double* row = values_.data() + static_cast<std::size_t>(ids[idx]) * lanes_;
    for (std::size_t k = 0; k < n_active; ++k) row[k] = inputs[k * ni + idx];
  }

  const std::size_t B = lanes_;
  double* vals = values_.data();
  const std::size_t n_nodes = tape_->size();
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const Node& n = tape_->node(i);
    double* v = vals + i * B;
    const double* va = n.a != kNoNode ? vals + static_cast<std::size_t>(n.a) * B
                                      : nullptr;
    const double* vb = n.b != kNoNode ? vals + static_cast<std::size_t>(n.b) * B
                                      : nullptr;
    switch (n.op) {
      case Op::kConst:
      case Op::kInput:
      case Op::kParam:
        break;
      case Op::kAdd:
        for (std::size_t k = 0; k < n_active; ++k) v[k] = va[k] + vb[k];
        break;
      case Op::kSub:
        for (std::size_t k = 0; k < n_active; ++k) v[k] = va[k] - vb[k];
        break;
      case Op::kMul:
        for (std::size_t k = 0; k < n_active; ++k) v[k] = va[k] * vb[k];
        break;
      case Op::kDiv:
        for (std::size_t k = 0; k < n_active; ++k) v[k] = va[k] / vb[k];
        break;
      case Op::kNeg:
        for (std::size_t k = 0; k < n_active; ++k) v[k] = -va[k];
        break;
      case Op::kPow:
        if (n.c == 2.0) {
          for (std::size_t k = 0; k < n_active; ++k) v[k] = va[k] * va[k];
        } else if (n.c == 3.0) {
          for (std::size_t k = 0; k < n_active; ++k)
            v[k] = va[k] * va[k] * va[k];
        } else {
          for (std::size_t k = 0; k < n_active; ++k)
            v[k] = std::pow(va[k], n.c);
        }
        break;
      case Op::kSin:
        for (std::size_t k = 0; k < n_active; ++k) v[k] = std::sin(va[k]);
        break;
      case Op::kCos:
        for (std::size_t k = 0; k < n_active; ++k) v[k] = std::cos(va[k]);
        break;
      case Op::kExp:
        for (std::size_t k = 0; k < n_active; ++k) v[k] = std::exp(va[k]);
        break;
      case Op::kTanh:
        for (std::size_t k = 0; k < n_active; ++k) v[k] = std::tanh(va[k]);
        break;
      case Op::kSigmoid:
        for (std::size_t k = 0; k < n_active; ++k)
          v[k] = 1.0 / (1.0 + std::exp(-va[k]));
        break;
      case Op::kSwish:
        for (std::size_t k = 0; k < n_active; ++k)
          v[k] = va[k] / (1.0 + std::exp(-va[k]));
        break;
      case Op::kRelu:
        for (std::size_t k = 0; k < n_active; ++k)
          v[k] = va[k] > 0.0 ? va[k] : 0.0;
        break;
      case Op::kStep:
        for (std::size_t k = 0; k < n_active; ++k)
          v[k] = va[k] > 0.0 ? 1.0 : 0.0;
        break;
      case Op::kAffine: {
        const auto pool = tape_->affine_pool(n);
        const std::size_t d = n.b;
        const double* bias =
            vals + static_cast<std::size_t>(pool[2 * d]) * B;
        for (std::size_t k = 0; k < n_active; ++k) v[k] = bias[k];
        for (std::size_t j = 0; j < d; ++j) {
          const double* x = vals + static_cast<std::size_t>(pool[j]) * B;
          const double* w = vals + static_cast<std::size_t>(pool[d + j]) * B;
          for (std::size_t k = 0; k < n_active; ++k) v[k] += x[k] * w[k];
        }
        break;
      }
    }
  }
}

void Workspace::reverse(NodeId output, std::span<const double> seed,
                        std::size_t n_active) {
  if (output >= tape_->size())
    throw std::out_of_range("reverse: output id out of range");
  if (seed.size() != n_active)
    throw std::invalid_argument("reverse: seed size must equal n_active");
  const std::size_t B = lanes_;
  std::fill(adjoints_.begin(),
            adjoints_.begin() + (static_cast<std::size_t>(output) + 1) * B,
            0.0);
  double* adj = adjoints_.data();
  const double* vals = values_.data();
  {
    double* row = adj + static_cast<std::size_t>(output) * B;
    for (std::size_t k = 0; k < n_active; ++k) row[k] = seed[k];
  }
  for (std::size_t i = output + 1; i-- > 0;) {
    const Node& n = tape_->node(i);
    const double* g = adj + i * B;
    const double* v = vals + i * B;
    double* aa = n.a != kNoNode ? adj + static_cast<std::size_t>(n.a) * B
                                : nullptr;
    double* ab = n.b != kNoNode ? adj + static_cast<std::size_t>(n.b) * B
                                : nullptr;
    const double* va = n.a != kNoNode
                           ? vals + static_cast<std::size_t>(n.a) * B
                           : nullptr;
    const double* vb = n.b != kNoNode
                           ? vals + static_cast<std::size_t>(n.b) * B
                           : nullptr;
    switch (n.op) {
      case Op::kConst:
      case Op::kInput:
      case Op::kParam:
      case Op::kStep:
        break;
      case Op::kAdd:
        for (std::size_t k = 0; k < n_active; ++k) aa[k] += g[k];
        for (std::size_t k = 0; k < n_active; ++k) ab[k] += g[k];
        break;
      case Op::kSub:
        for (std::size_t k = 0; k < n_active; ++k) aa[k] += g[k];
        for (std::size_t k = 0; k < n_active; ++k) ab[k] -= g[k];
        break;
      case Op::kMul:
        for (std::size_t k = 0; k < n_active; ++k) aa[k] += g[k] * vb[k];
        for (std::size_t k = 0; k < n_active; ++k) ab[k] += g[k] * va[k];
        break;
      case Op::kDiv:
        for (std::size_t k = 0; k < n_active; ++k) aa[k] += g[k] / vb[k];
        for (std::size_t k = 0; k < n_active; ++k)
          ab[k] -= g[k] * v[k] / vb[k];
        break;
      case Op::kNeg:
        for (std::size_t k = 0; k < n_active; ++k) aa[k] -= g[k];
        break;
      case Op::kPow:
        if (n.c == 2.0) {
          for (std::size_t k = 0; k < n_active; ++k)
            aa[k] += g[k] * 2.0 * va[k];
        } else if (n.c == 3.0) {
          for (std::size_t k = 0; k < n_active; ++k)
            aa[k] += g[k] * 3.0 * va[k] * va[k];
        } else {
          for (std::size_t k = 0; k < n_active; ++k)
            aa[k] += g[k] * n.c * std::pow(va[k], n.c - 1.0);
        }
        break;
      case Op::kSin:
        for (std::size_t k = 0; k < n_active; ++k)
          aa[k] += g[k] * std::cos(va[k]);
        break;
      case Op::kCos:
        for (std::size_t k = 0; k < n_active; ++k)
          aa[k] -= g[k] * std::sin(va[k]);
        break;
      case Op::kExp:
        for (std::size_t k = 0; k < n_active; ++k) aa[k] += g[k] * v[k];
        break;
      case Op::kTanh:
        for (std::size_t k = 0; k < n_active; ++k)
          aa[k] += g[k] * (1.0 - v[k] * v[k]);
        break;
      case Op::kSigmoid:
        for (std::size_t k = 0; k < n_active; ++k)
          aa[k] += g[k] * v[k] * (1.0 - v[k]);
        break;
      case Op::kSwish:
        for (std::size_t k = 0; k < n_active; ++k) {
          double s = 1.0 / (1.0 + std::exp(-va[k]));
          aa[k] += g[k] * (s + v[k] * (1.0 - s));
        }
        break;
      case Op::kRelu:
        for (std::size_t k = 0; k < n_active; ++k)
          if (va[k] > 0.0) aa[k] += g[k];
        break;
      case Op::kAffine: {
        const auto pool = tape_->affine_pool(n);
        const std::size_t d = n.b;
        double* abias = adj + static_cast<std::size_t>(pool[2 * d]) * B;
        for (std::size_t k = 0; k < n_active; ++k) abias[k] += g[k];
        for (std::size_t j = 0; j < d; ++j) {
          double* ax = adj + static_cast<std::size_t>(pool[j]) * B;
          double* aw = adj + static_cast<std::size_t>(pool[d + j]) * B;
          const double* x = vals + static_cast<std::size_t>(pool[j]) * B;
          const double* w = vals + static_cast<std::size_t>(pool[d + j]) * B;
          for (std::size_t k = 0; k < n_active; ++k) ax[k] += g[k] * w[k];
          for (std::size_t k = 0; k < n_active; ++k) aw[k] += g[k] * x[k];
        }
        break;
      }
    }
  }
}

void Workspace::accumulate_param_grad(std::span<double> grad,
                                      std::size_t n_active) const {
  const auto& ids = tape_->param_ids();
  if (grad.size() != ids.size())
    throw std::invalid_argument("accumulate_param_grad: size mismatch");
  for (std::size_t p = 0; p < ids.size(); ++p) {
    const double* row =
        adjoints_.data() + static_cast<std::size_t>(ids[p]) * lanes_;
    double s = 0.0;
    for (std::size_t k = 0; k < n_active; ++k) s += row[k];
    grad[p] += s;
  }
}

void Workspace::param_grad_sq_norms(std::span<double> out,
                                    std::size_t n_active) const {
  if (out.size() != n_active)
    throw std::invalid_argument("param_grad_sq_norms: size mismatch");
  std::fill(out.begin(), out.end(), 0.0);
  for (NodeId id : tape_->param_ids()) {
    const double* row =
        adjoints_.data() + static_cast<std::size_t>(id) * lanes_;
    for (std::size_t k = 0; k < n_active; ++k) out[k] += row[k] * row[k];
  }
}

std::vector<double> evaluate(const Tape& tape, std::span<const double> inputs,
                             std::span<const double> params,
                             std::span<const NodeId> outputs) {
  Workspace ws(tape, 1);
  ws.bind_parameters(params);
  ws.evaluate(inputs, 1);
  std::vector<double> out(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    if (outputs[i] >= tape.size())
      throw std::out_of_range("evaluate: output id out of range");
    out[i] = ws.value(outputs[i], 0);
  }
  return out;
}

std::vector<double> grad_parameters(const Tape& tape, NodeId output,
                                    std::span<const double> inputs,
                                    std::span<const double> params) {
  if (output >= tape.size())
    throw std::out_of_range("grad_parameters: output id out of range");
  Workspace ws(tape, 1);
  ws.bind_parameters(params);
  ws.evaluate(inputs, 1);
  const double one = 1.0;
  ws.reverse(output, {&one, 1}, 1);
  std::vector<double> grad(tape.num_params(), 0.0);
  ws.accumulate_param_grad(grad, 1);
  return grad;
}

}  // namespace pinn::ad
