#include "certlab/tape.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace certlab {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace

const Tape::Node& Tape::node(int id) const {
  require(id >= 0 && id < static_cast<int>(nodes_.size()), "tape: node id out of range");
  return nodes_[static_cast<size_t>(id)];
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(Tensor v) {
  require(v.all_finite(), "tape: leaf value must be finite");
  Node n{Op::kLeaf};
  n.val = std::move(v);
  return {this, push(std::move(n))};
}

Var Tape::constant(Tensor v) {
  Node n{Op::kConst};
  n.val = std::move(v);
  return {this, push(std::move(n))};
}

Var Tape::check2(Var a, Var b, const char* opname) {
  require(a.tape == this && b.tape == this, std::string(opname) + ": operand from another tape");
  const Tensor& ta = node(a.id).val;
  const Tensor& tb = node(b.id).val;
  require(ta.same_shape(tb),
          std::string(opname) + ": shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  return a;
}

void Tape::eval_node(const Node& n, const std::vector<Node>& nodes, Tensor& out) {
  auto val = [&](int id) -> const Tensor& { return nodes[static_cast<size_t>(id)].val; };
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
    case Op::kOpaque:
      out = n.val;
      return;
    case Op::kAdd: {
      const Tensor &a = val(n.a), &b = val(n.b);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
      return;
    }
    case Op::kSub: {
      const Tensor &a = val(n.a), &b = val(n.b);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
      return;
    }
    case Op::kMul: {
      const Tensor &a = val(n.a), &b = val(n.b);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
      return;
    }
    case Op::kDiv: {
      const Tensor &a = val(n.a), &b = val(n.b);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = a[i] / b[i];
      return;
    }
    case Op::kNeg: {
      const Tensor& a = val(n.a);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = -a[i];
      return;
    }
    case Op::kSMul: {
      const Tensor& a = val(n.a);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = a[i] * n.sc;
      return;
    }
    case Op::kSAdd: {
      const Tensor& a = val(n.a);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = a[i] + n.sc;
      return;
    }
    case Op::kMatVec: {
      const Tensor &m = val(n.a), &v = val(n.b);
      int rows = m.rows(), cols = m.cols();
      out = Tensor({rows});
      const double* md = m.data();
      const double* vd = v.data();
      for (int r = 0; r < rows; ++r) {
        double acc = 0.0;
        const double* row = md + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) acc += row[c] * vd[c];
        out[r] = acc;
      }
      return;
    }
    case Op::kMatMul: {
      const Tensor &a = val(n.a), &b = val(n.b);
      int m = a.rows(), k = a.cols(), p = b.cols();
      out = Tensor::zeros({m, p});
      for (int i = 0; i < m; ++i) {
        const double* arow = a.data() + static_cast<size_t>(i) * k;
        double* orow = out.data() + static_cast<size_t>(i) * p;
        for (int t = 0; t < k; ++t) {
          double av = arow[t];
          if (av == 0.0) continue;
          const double* brow = b.data() + static_cast<size_t>(t) * p;
          for (int j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
      }
      return;
    }
    case Op::kScaleCols: {
      const Tensor &m = val(n.a), &v = val(n.b);
      int rows = m.rows(), cols = m.cols();
      out = Tensor({rows, cols});
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) out.at(r, c) = m.at(r, c) * v[c];
      return;
    }
    case Op::kRelu: {
      const Tensor& a = val(n.a);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
      return;
    }
    case Op::kAbs: {
      const Tensor& a = val(n.a);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = std::fabs(a[i]);
      return;
    }
    case Op::kMax: {
      const Tensor &a = val(n.a), &b = val(n.b);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = a[i] >= b[i] ? a[i] : b[i];
      return;
    }
    case Op::kMin: {
      const Tensor &a = val(n.a), &b = val(n.b);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = a[i] <= b[i] ? a[i] : b[i];
      return;
    }
    case Op::kSelectSign: {
      const Tensor &s = val(n.a), &a = val(n.b), &b = val(n.c);
      out = Tensor(a.shape());
      for (int i = 0; i < a.size(); ++i) out[i] = s[i] >= 0.0 ? a[i] : b[i];
      return;
    }
    case Op::kSum: {
      const Tensor& a = val(n.a);
      double acc = 0.0;
      for (int i = 0; i < a.size(); ++i) acc += a[i];
      out = Tensor::scalar(acc);
      return;
    }
    case Op::kDot: {
      const Tensor &a = val(n.a), &b = val(n.b);
      double acc = 0.0;
      for (int i = 0; i < a.size(); ++i) acc += a[i] * b[i];
      out = Tensor::scalar(acc);
      return;
    }
    case Op::kLogSumExp: {
      const Tensor& a = val(n.a);
      double mx = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < a.size(); ++i) mx = std::max(mx, a[i]);
      double acc = 0.0;
      for (int i = 0; i < a.size(); ++i) acc += std::exp(a[i] - mx);
      out = Tensor::scalar(mx + std::log(acc));
      return;
    }
    case Op::kPack: {
      out = Tensor({static_cast<int>(n.extra.size())});
      for (size_t i = 0; i < n.extra.size(); ++i) out[static_cast<int>(i)] = val(n.extra[i]).item();
      return;
    }
    case Op::kIndex: {
      const Tensor& a = val(n.a);
      out = Tensor::scalar(a[static_cast<int>(n.sc)]);
      return;
    }
  }
  throw Error("tape: unknown op");
}

#define CERTLAB_BINOP(NAME, OP)                    \
  Var Tape::NAME(Var a, Var b) {                   \
    check2(a, b, #NAME);                           \
    Node n{Op::OP};                                \
    n.a = a.id;                                    \
    n.b = b.id;                                    \
    eval_node(n, nodes_, n.val);                   \
    return {this, push(std::move(n))};             \
  }

CERTLAB_BINOP(add, kAdd)
CERTLAB_BINOP(sub, kSub)
CERTLAB_BINOP(mul, kMul)
CERTLAB_BINOP(div, kDiv)
CERTLAB_BINOP(maximum, kMax)
CERTLAB_BINOP(minimum, kMin)
#undef CERTLAB_BINOP

Var Tape::neg(Var a) {
  Node n{Op::kNeg};
  n.a = a.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::smul(Var a, double c) {
  Node n{Op::kSMul};
  n.a = a.id;
  n.sc = c;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::sadd(Var a, double c) {
  Node n{Op::kSAdd};
  n.a = a.id;
  n.sc = c;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::matvec(Var m, Var v) {
  const Tensor& tm = node(m.id).val;
  const Tensor& tv = node(v.id).val;
  require(tm.rank() == 2 && tv.rank() == 1, "matvec: expects matrix and vector");
  require(tm.cols() == tv.size(),
          "matvec: shape mismatch " + tm.shape_str() + " vs " + tv.shape_str());
  Node n{Op::kMatVec};
  n.a = m.id;
  n.b = v.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = node(a.id).val;
  const Tensor& tb = node(b.id).val;
  require(ta.rank() == 2 && tb.rank() == 2 && ta.cols() == tb.rows(),
          "matmul: shape mismatch " + ta.shape_str() + " vs " + tb.shape_str());
  Node n{Op::kMatMul};
  n.a = a.id;
  n.b = b.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::scale_cols(Var m, Var v) {
  const Tensor& tm = node(m.id).val;
  const Tensor& tv = node(v.id).val;
  require(tm.rank() == 2 && tv.rank() == 1 && tm.cols() == tv.size(),
          "scale_cols: shape mismatch " + tm.shape_str() + " vs " + tv.shape_str());
  Node n{Op::kScaleCols};
  n.a = m.id;
  n.b = v.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::relu(Var a) {
  Node n{Op::kRelu};
  n.a = a.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::abs(Var a) {
  Node n{Op::kAbs};
  n.a = a.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::select_sign(Var s, Var a, Var b) {
  check2(s, a, "select_sign");
  check2(a, b, "select_sign");
  Node n{Op::kSelectSign};
  n.a = s.id;
  n.b = a.id;
  n.c = b.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::sum(Var a) {
  Node n{Op::kSum};
  n.a = a.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::dot(Var a, Var b) {
  check2(a, b, "dot");
  Node n{Op::kDot};
  n.a = a.id;
  n.b = b.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::log_sum_exp(Var a) {
  require(node(a.id).val.rank() == 1, "log_sum_exp: expects vector");
  Node n{Op::kLogSumExp};
  n.a = a.id;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::pack(std::span<const Var> scalars) {
  Node n{Op::kPack};
  n.extra.reserve(scalars.size());
  for (const Var& v : scalars) {
    require(v.tape == this, "pack: operand from another tape");
    require(node(v.id).val.size() == 1, "pack: operands must be scalars");
    n.extra.push_back(v.id);
  }
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::index(Var v, int i) {
  const Tensor& tv = node(v.id).val;
  require(tv.rank() == 1 && i >= 0 && i < tv.size(), "index: out of range");
  Node n{Op::kIndex};
  n.a = v.id;
  n.sc = i;
  eval_node(n, nodes_, n.val);
  return {this, push(std::move(n))};
}

Var Tape::opaque_scalar(double value, std::vector<std::pair<Var, double>> partials) {
  Node n{Op::kOpaque};
  n.val = Tensor::scalar(value);
  n.extra.reserve(partials.size());
  n.extra_w.reserve(partials.size());
  for (auto& [v, w] : partials) {
    require(v.tape == this, "opaque_scalar: partial refers to another tape");
    n.extra.push_back(v.id);
    n.extra_w.push_back(w);
  }
  return {this, push(std::move(n))};
}

void Tape::backward(Var output) {
  require(output.tape == this, "backward: output not on this tape");
  require(node(output.id).val.size() == 1, "backward: output must be a scalar");

  adjoints_.assign(nodes_.size(), Tensor());
  auto adj = [&](int id) -> Tensor& {
    Tensor& t = adjoints_[static_cast<size_t>(id)];
    if (t.size() == 0 && nodes_[static_cast<size_t>(id)].val.size() != 0) t = Tensor::zeros(nodes_[static_cast<size_t>(id)].val.shape());
    return t;
  };
  adj(output.id)[0] = 1.0;

  for (int id = output.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = adjoints_[static_cast<size_t>(id)];
    if (g.size() == 0) continue;  // node not on any path to the output
    auto val = [&](int i) -> const Tensor& { return nodes_[static_cast<size_t>(i)].val; };
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConst:
        break;
      case Op::kAdd: {
        Tensor &ga = adj(n.a), &gb = adj(n.b);
        for (int i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        Tensor &ga = adj(n.a), &gb = adj(n.b);
        for (int i = 0; i < g.size(); ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        Tensor &ga = adj(n.a), &gb = adj(n.b);
        const Tensor &a = val(n.a), &b = val(n.b);
        for (int i = 0; i < g.size(); ++i) {
          ga[i] += g[i] * b[i];
          gb[i] += g[i] * a[i];
        }
        break;
      }
      case Op::kDiv: {
        Tensor &ga = adj(n.a), &gb = adj(n.b);
        const Tensor &a = val(n.a), &b = val(n.b);
        for (int i = 0; i < g.size(); ++i) {
          ga[i] += g[i] / b[i];
          gb[i] -= g[i] * a[i] / (b[i] * b[i]);
        }
        break;
      }
      case Op::kNeg: {
        Tensor& ga = adj(n.a);
        for (int i = 0; i < g.size(); ++i) ga[i] -= g[i];
        break;
      }
      case Op::kSMul: {
        Tensor& ga = adj(n.a);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * n.sc;
        break;
      }
      case Op::kSAdd: {
        Tensor& ga = adj(n.a);
        for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
        break;
      }
      case Op::kMatVec: {
        Tensor &gm = adj(n.a), &gv = adj(n.b);
        const Tensor &m = val(n.a), &v = val(n.b);
        int rows = m.rows(), cols = m.cols();
        for (int r = 0; r < rows; ++r) {
          double gr = g[r];
          if (gr == 0.0) continue;
          double* gmrow = gm.data() + static_cast<size_t>(r) * cols;
          const double* mrow = m.data() + static_cast<size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) {
            gmrow[c] += gr * v[c];
            gv[c] += gr * mrow[c];
          }
        }
        break;
      }
      case Op::kMatMul: {
        Tensor &ga = adj(n.a), &gb = adj(n.b);
        const Tensor &a = val(n.a), &b = val(n.b);
        int m = a.rows(), k = a.cols(), p = b.cols();
        // dA = g * B^T, dB = A^T * g
        for (int i = 0; i < m; ++i) {
          const double* grow = g.data() + static_cast<size_t>(i) * p;
          double* garow = ga.data() + static_cast<size_t>(i) * k;
          const double* arow = a.data() + static_cast<size_t>(i) * k;
          for (int t = 0; t < k; ++t) {
            const double* brow = b.data() + static_cast<size_t>(t) * p;
            double accA = 0.0;
            double av = arow[t];
            double* gbrow = gb.data() + static_cast<size_t>(t) * p;
            for (int j = 0; j < p; ++j) {
              accA += grow[j] * brow[j];
              gbrow[j] += av * grow[j];
            }
            garow[t] += accA;
          }
        }
        break;
      }
      case Op::kScaleCols: {
        Tensor &gm = adj(n.a), &gv = adj(n.b);
        const Tensor &m = val(n.a), &v = val(n.b);
        int rows = m.rows(), cols = m.cols();
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) {
            double gr = g.at(r, c);
            gm.at(r, c) += gr * v[c];
            gv[c] += gr * m.at(r, c);
          }
        break;
      }
      case Op::kRelu: {
        Tensor& ga = adj(n.a);
        const Tensor& a = val(n.a);
        for (int i = 0; i < g.size(); ++i)
          if (a[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Op::kAbs: {
        Tensor& ga = adj(n.a);
        const Tensor& a = val(n.a);
        for (int i = 0; i < g.size(); ++i) ga[i] += a[i] >= 0.0 ? g[i] : -g[i];
        break;
      }
      case Op::kMax: {
        Tensor &ga = adj(n.a), &gb = adj(n.b);
        const Tensor &a = val(n.a), &b = val(n.b);
        for (int i = 0; i < g.size(); ++i) {
          if (a[i] >= b[i])
            ga[i] += g[i];
          else
            gb[i] += g[i];
        }
        break;
      }
      case Op::kMin: {
        Tensor &ga = adj(n.a), &gb = adj(n.b);
        const Tensor &a = val(n.a), &b = val(n.b);
        for (int i = 0; i < g.size(); ++i) {
          if (a[i] <= b[i])
            ga[i] += g[i];
          else
            gb[i] += g[i];
        }
        break;
      }
      case Op::kSelectSign: {
        Tensor &ga = adj(n.b), &gb = adj(n.c);
        const Tensor& s = val(n.a);
        for (int i = 0; i < g.size(); ++i) {
          if (s[i] >= 0.0)
            ga[i] += g[i];
          else
            gb[i] += g[i];
        }
        break;
      }
      case Op::kSum: {
        Tensor& ga = adj(n.a);
        double gs = g[0];
        for (int i = 0; i < ga.size(); ++i) ga[i] += gs;
        break;
      }
      case Op::kDot: {
        Tensor &ga = adj(n.a), &gb = adj(n.b);
        const Tensor &a = val(n.a), &b = val(n.b);
        double gs = g[0];
        for (int i = 0; i < a.size(); ++i) {
          ga[i] += gs * b[i];
          gb[i] += gs * a[i];
        }
        break;
      }
      case Op::kLogSumExp: {
        Tensor& ga = adj(n.a);
        const Tensor& a = val(n.a);
        double lse = n.val[0];
        double gs = g[0];
        for (int i = 0; i < a.size(); ++i) ga[i] += gs * std::exp(a[i] - lse);
        break;
      }
      case Op::kPack: {
        double const* gd = g.data();
        for (size_t i = 0; i < n.extra.size(); ++i) adj(n.extra[i])[0] += gd[i];
        break;
      }
      case Op::kIndex: {
        adj(n.a)[static_cast<int>(n.sc)] += g[0];
        break;
      }
      case Op::kOpaque: {
        double gs = g[0];
        for (size_t i = 0; i < n.extra.size(); ++i) {
          Tensor& gp = adj(n.extra[i]);
          gp[0] += gs * n.extra_w[i];
        }
        break;
      }
    }
  }
}

Tensor Tape::adjoint(Var v) const {
  require(v.tape == this, "adjoint: node not on this tape");
  if (adjoints_.empty()) throw Error("adjoint: backward() has not been run");
  const Tensor& t = adjoints_[static_cast<size_t>(v.id)];
  if (t.size() == 0) return Tensor::zeros(node(v.id).val.shape());
  return t;
}

bool Tape::replay_matches() const {
  Tensor out;
  for (const Node& n : nodes_) {
    if (n.op == Op::kLeaf || n.op == Op::kConst || n.op == Op::kOpaque) continue;
    eval_node(n, nodes_, out);
    if (out.size() != n.val.size()) return false;
    if (std::memcmp(out.data(), n.val.data(), sizeof(double) * static_cast<size_t>(out.size())) != 0) return false;
  }
  return true;
}

void Tape::clear() {
  nodes_.clear();
  adjoints_.clear();
}

Tensor gradient(Tape& tape, Var output, Var leaf) {
  tape.backward(output);
  return tape.adjoint(leaf);
}

double finite_diff_check(const std::function<Var(Tape&, std::span<const Var>)>& expr, std::vector<Tensor> inputs,
                         double h) {
  // Reverse-mode gradient at the nominal point.
  std::vector<Tensor> grads;
  {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& t : inputs) vars.push_back(tape.leaf(t));
    Var out = expr(tape, vars);
    tape.backward(out);
    for (const Var& v : vars) grads.push_back(tape.adjoint(v));
  }

  auto eval_at = [&](const std::vector<Tensor>& pt) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(pt.size());
    for (const Tensor& t : pt) vars.push_back(tape.leaf(t));
    return tape.value(expr(tape, vars)).item();
  };

  double worst = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    for (int i = 0; i < inputs[k].size(); ++i) {
      double keep = inputs[k][i];
      inputs[k][i] = keep + h;
      double fp = eval_at(inputs);
      inputs[k][i] = keep - h;
      double fm = eval_at(inputs);
      inputs[k][i] = keep;
      double fd = (fp - fm) / (2.0 * h);
      double err = std::fabs(grads[k][i] - fd) / std::max(1.0, std::fabs(fd));
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace certlab
