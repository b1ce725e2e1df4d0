#include "certlab/bounds.hpp"

#include <cmath>

#include "certlab/lp_relax.hpp"

namespace certlab {

namespace {
constexpr double kStableWidth = 1e-12;

// min(t, 0) elementwise.
Var min_zero(Tape& t, Var a) { return t.neg(t.relu(t.neg(a))); }
}  // namespace

std::string kind_name(RelaxationKind k) {
  switch (k) {
    case RelaxationKind::kBox: return "box";
    case RelaxationKind::kHBox: return "hbox";
    case RelaxationKind::kDeepZ: return "deepz";
    case RelaxationKind::kCrown: return "crown";
    case RelaxationKind::kCrown0: return "crown0";
    case RelaxationKind::kCrownIbpR: return "crown-ibp-r";
    case RelaxationKind::kTriangle: return "triangle";
    case RelaxationKind::kParallelogram: return "parallelogram";
  }
  throw Error("unknown relaxation kind");
}

RelaxationKind kind_from_name(const std::string& name) {
  for (RelaxationKind k :
       {RelaxationKind::kBox, RelaxationKind::kHBox, RelaxationKind::kDeepZ, RelaxationKind::kCrown,
        RelaxationKind::kCrown0, RelaxationKind::kCrownIbpR, RelaxationKind::kTriangle,
        RelaxationKind::kParallelogram})
    if (kind_name(k) == name) return k;
  throw Error("unknown relaxation kind: " + name);
}

bool is_lp_kind(RelaxationKind k) {
  return k == RelaxationKind::kTriangle || k == RelaxationKind::kParallelogram;
}

InputBox::InputBox(Tensor lo_, Tensor hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (!lo.same_shape(hi)) throw Error("input box: shape mismatch");
  for (int i = 0; i < lo.size(); ++i)
    if (lo[i] > hi[i]) throw Error("input box: lower exceeds upper at coordinate " + std::to_string(i));
}

InputBox InputBox::around(const Tensor& x, double eps, bool clip01) {
  if (eps < 0) throw Error("input box: negative radius");
  Tensor lo(x.shape()), hi(x.shape());
  for (int i = 0; i < x.size(); ++i) {
    lo[i] = x[i] - eps;
    hi[i] = x[i] + eps;
    if (clip01) {
      lo[i] = std::max(0.0, std::min(1.0, lo[i]));
      hi[i] = std::max(0.0, std::min(1.0, hi[i]));
    }
  }
  return InputBox(std::move(lo), std::move(hi));
}

LayerBounds TapedLayerBounds::values() const {
  LayerBounds out;
  for (size_t i = 0; i < lower.size(); ++i) {
    out.lower.push_back(lower[i].tape->value(lower[i]));
    out.upper.push_back(upper[i].tape->value(upper[i]));
  }
  return out;
}

ReluCase relu_case(double l, double u) {
  if (l > u) throw Error("relu_case: l > u");
  if (u <= 0.0) return ReluCase::kNeg;
  if (l >= 0.0) return ReluCase::kPos;
  // Degenerate sliver straddling zero; u > 0 here, so collapse to identity.
  if (u - l < kStableWidth) return ReluCase::kPos;
  return ReluCase::kUnstable;
}

ReluRelax relu_relax(RelaxationKind kind, double l, double u) {
  if (l > u) throw Error("relu_relax: l > u");
  if (kind == RelaxationKind::kBox || is_lp_kind(kind))
    throw Error("relu_relax: kind " + kind_name(kind) + " is served by a different engine");
  if (kind == RelaxationKind::kCrownIbpR) kind = RelaxationKind::kCrown;

  ReluCase c = relu_case(l, u);
  if (c == ReluCase::kNeg) return {0, 0, 0, 0};
  if (c == ReluCase::kPos) {
    ReluRelax r{1, 0, 1, 0};
    if (kind == RelaxationKind::kCrown0) r.lo_slope = 0;
    return r;
  }

  double lambda = u / (u - l);
  switch (kind) {
    case RelaxationKind::kHBox:
      return {0, 0, 0, u};
    case RelaxationKind::kDeepZ:
      return {lambda, 0, lambda, -lambda * l};
    case RelaxationKind::kCrown:
      return {-l >= u ? 0.0 : 1.0, 0, lambda, -lambda * l};
    case RelaxationKind::kCrown0:
      return {0, 0, lambda, -lambda * l};
    default:
      break;
  }
  throw Error("relu_relax: unhandled kind");
}

namespace {

// Tape-level relaxation of one ReLU layer: four width-sized vectors
// (lo_slope, lo_off, up_slope, up_off) built from the preactivation bounds.
struct TapedRelax {
  Var lo_slope, lo_off, up_slope, up_off;
};

TapedRelax build_relax(Tape& t, RelaxationKind kind, Var pre_lo, Var pre_hi) {
  const Tensor& lo = t.value(pre_lo);
  const Tensor& hi = t.value(pre_hi);
  int m = lo.size();
  Var zero = t.scalar(0.0);
  Var one = t.scalar(1.0);
  std::vector<Var> ls, lf, us, uf;
  ls.reserve(m); lf.reserve(m); us.reserve(m); uf.reserve(m);
  for (int j = 0; j < m; ++j) {
    double l = lo[j], u = hi[j];
    ReluRelax r = relu_relax(kind, l, u);  // shared case analysis
    if (relu_case(l, u) != ReluCase::kUnstable) {
      ls.push_back(r.lo_slope == 0 ? zero : one);
      lf.push_back(zero);
      us.push_back(r.up_slope == 0 ? zero : one);
      uf.push_back(zero);
      continue;
    }
    Var lj = t.index(pre_lo, j);
    Var uj = t.index(pre_hi, j);
    if (kind == RelaxationKind::kHBox) {
      ls.push_back(zero);
      lf.push_back(zero);
      us.push_back(zero);
      uf.push_back(uj);
      continue;
    }
    Var lambda = t.div(uj, t.sub(uj, lj));
    Var up_off = t.neg(t.mul(lambda, lj));
    us.push_back(lambda);
    uf.push_back(up_off);
    switch (kind) {
      case RelaxationKind::kDeepZ:
        ls.push_back(lambda);
        lf.push_back(zero);
        break;
      case RelaxationKind::kCrown:
        ls.push_back(-l >= u ? zero : one);
        lf.push_back(zero);
        break;
      case RelaxationKind::kCrown0:
        ls.push_back(zero);
        lf.push_back(zero);
        break;
      default:
        throw Error("build_relax: unsupported kind " + kind_name(kind));
    }
  }
  return {t.pack(ls), t.pack(lf), t.pack(us), t.pack(uf)};
}

// Linear bound pair over an earlier layer: row r of coef/off brackets one
// target neuron.
struct Expr {
  Var coef;  // rows x layer_width
  Var off;   // rows
};

// Rewrites an expression over ReLU outputs into one over the preactivations,
// picking the upper or lower neuron relaxation by coefficient sign.
Expr substitute_relu(Tape& t, const Expr& e, const TapedRelax& rel, bool upper) {
  Var cpos = t.relu(e.coef);
  Var cneg = min_zero(t, e.coef);
  Var sa = upper ? rel.up_slope : rel.lo_slope;
  Var sb = upper ? rel.lo_slope : rel.up_slope;
  Var fa = upper ? rel.up_off : rel.lo_off;
  Var fb = upper ? rel.lo_off : rel.up_off;
  Expr out;
  out.coef = t.add(t.scale_cols(cpos, sa), t.scale_cols(cneg, sb));
  out.off = t.add(e.off, t.add(t.matvec(cpos, fa), t.matvec(cneg, fb)));
  return out;
}

Expr substitute_linear(Tape& t, const Expr& e, Var w, Var b) {
  return {t.matmul(e.coef, w), t.add(e.off, t.matvec(e.coef, b))};
}

// Concretizes an input-layer expression against the input box.
Var concretize(Tape& t, const Expr& e, Var lo0, Var hi0, bool upper) {
  Var cpos = t.relu(e.coef);
  Var cneg = min_zero(t, e.coef);
  Var a = upper ? hi0 : lo0;
  Var b = upper ? lo0 : hi0;
  return t.add(t.add(t.matvec(cpos, a), t.matvec(cneg, b)), e.off);
}

Var identity_matrix(Tape& t, int n) {
  Tensor id = Tensor::zeros({n, n});
  for (int i = 0; i < n; ++i) id.at(i, i) = 1.0;
  return t.constant(id);
}

// Backsubstitutes the expressions of layer `layer` all the way to the input
// and concretizes. rel[k] holds the relaxation of ReLU layer k.
std::pair<Var, Var> backsub_layer(Tape& t, const TapedNetwork& net, int layer,
                                  const std::vector<TapedRelax>& rel, Var lo0, Var hi0) {
  int width = t.value(net.weights[static_cast<size_t>((layer - 1) / 2)]).rows();
  Expr up{identity_matrix(t, width), t.constant(Tensor::zeros({width}))};
  Expr down = up;
  for (int k = layer; k >= 1; --k) {
    if (Network::is_relu_layer(k)) {
      up = substitute_relu(t, up, rel[static_cast<size_t>(k)], /*upper=*/true);
      down = substitute_relu(t, down, rel[static_cast<size_t>(k)], /*upper=*/false);
    } else {
      Var w = net.weights[static_cast<size_t>((k - 1) / 2)];
      Var b = net.biases[static_cast<size_t>((k - 1) / 2)];
      up = substitute_linear(t, up, w, b);
      down = substitute_linear(t, down, w, b);
    }
  }
  return {concretize(t, down, lo0, hi0, false), concretize(t, up, lo0, hi0, true)};
}

int taped_num_layers(const TapedNetwork& net) { return 2 * static_cast<int>(net.weights.size()) - 1; }

}  // namespace

TapedLayerBounds box_propagate(Tape& t, const TapedNetwork& net, Var lo0, Var hi0) {
  TapedLayerBounds out;
  out.lower.push_back(lo0);
  out.upper.push_back(hi0);
  Var lo = lo0, hi = hi0;
  int blocks = static_cast<int>(net.weights.size());
  for (int i = 0; i < blocks; ++i) {
    Var w = net.weights[static_cast<size_t>(i)];
    Var b = net.biases[static_cast<size_t>(i)];
    Var wp = t.relu(w);
    Var wn = min_zero(t, w);
    Var nlo = t.add(t.add(t.matvec(wp, lo), t.matvec(wn, hi)), b);
    Var nhi = t.add(t.add(t.matvec(wp, hi), t.matvec(wn, lo)), b);
    out.lower.push_back(nlo);
    out.upper.push_back(nhi);
    lo = nlo;
    hi = nhi;
    if (i + 1 < blocks) {
      lo = t.relu(lo);
      hi = t.relu(hi);
      out.lower.push_back(lo);
      out.upper.push_back(hi);
    }
  }
  return out;
}

TapedLayerBounds backsub_bounds(Tape& t, const TapedNetwork& net, RelaxationKind kind, Var lo0, Var hi0) {
  if (kind != RelaxationKind::kHBox && kind != RelaxationKind::kDeepZ && kind != RelaxationKind::kCrown &&
      kind != RelaxationKind::kCrown0)
    throw Error("backsub_bounds: kind " + kind_name(kind) + " is served by a different engine");

  int L = taped_num_layers(net);
  TapedLayerBounds out;
  out.lower.assign(static_cast<size_t>(L) + 1, Var{});
  out.upper.assign(static_cast<size_t>(L) + 1, Var{});
  out.lower[0] = lo0;
  out.upper[0] = hi0;
  std::vector<TapedRelax> rel(static_cast<size_t>(L) + 1);

  for (int i = 1; i <= L; ++i) {
    if (Network::is_relu_layer(i)) {
      rel[static_cast<size_t>(i)] = build_relax(t, kind, out.lower[static_cast<size_t>(i - 1)],
                                                out.upper[static_cast<size_t>(i - 1)]);
      // Single-variable expressions with nonnegative slopes concretize
      // directly against the preactivation bounds.
      const TapedRelax& r = rel[static_cast<size_t>(i)];
      out.lower[static_cast<size_t>(i)] =
          t.add(t.mul(r.lo_slope, out.lower[static_cast<size_t>(i - 1)]), r.lo_off);
      out.upper[static_cast<size_t>(i)] =
          t.add(t.mul(r.up_slope, out.upper[static_cast<size_t>(i - 1)]), r.up_off);
    } else {
      auto [lo, hi] = backsub_layer(t, net, i, rel, lo0, hi0);
      out.lower[static_cast<size_t>(i)] = lo;
      out.upper[static_cast<size_t>(i)] = hi;
    }
  }
  return out;
}

TapedLayerBounds crown_ibp_r_bounds(Tape& t, const TapedNetwork& net, Var lo0, Var hi0) {
  TapedLayerBounds out = box_propagate(t, net, lo0, hi0);
  int L = taped_num_layers(net);
  std::vector<TapedRelax> rel(static_cast<size_t>(L) + 1);
  for (int k = 2; k < L; k += 2)
    rel[static_cast<size_t>(k)] = build_relax(t, RelaxationKind::kCrown, out.lower[static_cast<size_t>(k - 1)],
                                              out.upper[static_cast<size_t>(k - 1)]);
  auto [lo, hi] = backsub_layer(t, net, L, rel, lo0, hi0);
  out.lower[static_cast<size_t>(L)] = lo;
  out.upper[static_cast<size_t>(L)] = hi;
  return out;
}

namespace {

LayerBounds untaped(const Network& net, const InputBox& box,
                    TapedLayerBounds (*fn)(Tape&, const TapedNetwork&, Var, Var)) {
  Tape tape;
  TapedNetwork tnet = TapedNetwork::make(tape, net);
  Var lo = tape.leaf(box.lo);
  Var hi = tape.leaf(box.hi);
  return fn(tape, tnet, lo, hi).values();
}

}  // namespace

LayerBounds box_propagate(const Network& net, const InputBox& box) { return untaped(net, box, &box_propagate); }

LayerBounds backsub_bounds(const Network& net, RelaxationKind kind, const InputBox& box) {
  Tape tape;
  TapedNetwork tnet = TapedNetwork::make(tape, net);
  Var lo = tape.leaf(box.lo);
  Var hi = tape.leaf(box.hi);
  return backsub_bounds(tape, tnet, kind, lo, hi).values();
}

LayerBounds crown_ibp_r_bounds(const Network& net, const InputBox& box) {
  return untaped(net, box, &crown_ibp_r_bounds);
}

TapedLayerBounds bounds(Tape& tape, const TapedNetwork& net, RelaxationKind kind, Var lo0, Var hi0) {
  switch (kind) {
    case RelaxationKind::kBox:
      return box_propagate(tape, net, lo0, hi0);
    case RelaxationKind::kHBox:
    case RelaxationKind::kDeepZ:
    case RelaxationKind::kCrown:
    case RelaxationKind::kCrown0:
      return backsub_bounds(tape, net, kind, lo0, hi0);
    case RelaxationKind::kCrownIbpR:
      return crown_ibp_r_bounds(tape, net, lo0, hi0);
    default:
      throw Error("bounds: LP kind " + kind_name(kind) + " has no taped dispatch here; use lp_relax");
  }
}

LayerBounds bounds(const Network& net, RelaxationKind kind, const Tensor& x, double eps, bool clip01) {
  InputBox box = InputBox::around(x, eps, clip01);
  if (is_lp_kind(kind))
    return lp_bounds(net, kind == RelaxationKind::kTriangle ? LpEncoding::kTriangle : LpEncoding::kParallelogram,
                     box);
  Tape tape;
  TapedNetwork tnet = TapedNetwork::make(tape, net);
  Var lo = tape.leaf(box.lo);
  Var hi = tape.leaf(box.hi);
  return bounds(tape, tnet, kind, lo, hi).values();
}

}  // namespace certlab
