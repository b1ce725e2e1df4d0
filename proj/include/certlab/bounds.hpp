#pragma once

#include <optional>
#include <string>
#include <vector>

#include "certlab/network.hpp"
#include "certlab/tape.hpp"
#include "certlab/tensor.hpp"

namespace certlab {

enum class RelaxationKind {
  kBox,
  kHBox,
  kDeepZ,
  kCrown,
  kCrown0,
  kCrownIbpR,
  kTriangle,
  kParallelogram,
};

std::string kind_name(RelaxationKind k);
RelaxationKind kind_from_name(const std::string& name);
/// True for the kinds whose bounds come from per-neuron linear programs.
bool is_lp_kind(RelaxationKind k);

struct InputBox {
  Tensor lo, hi;
  InputBox() = default;
  InputBox(Tensor lo_, Tensor hi_);
  static InputBox around(const Tensor& x, double eps, bool clip01 = false);
};

/// Concrete lower/upper vectors for layers 0..L (0 is the input box).
struct LayerBounds {
  std::vector<Tensor> lower, upper;
  int num_layers() const { return static_cast<int>(lower.size()) - 1; }
};

/// Same, as live tape nodes.
struct TapedLayerBounds {
  std::vector<Var> lower, upper;
  LayerBounds values() const;
};

/// One ReLU neuron's linear relaxation on [l, u]:
///   lo_slope * t + lo_off  <=  relu(t)  <=  up_slope * t + up_off.
struct ReluRelax {
  double lo_slope = 0, lo_off = 0, up_slope = 0, up_off = 0;
};

/// Stability of a ReLU input interval. Exact zeros at either end count as
/// stable, and intervals narrower than 1e-12 collapse to the stable case so
/// the slope u/(u-l) stays bounded. Shared by every relaxation, including
/// the LP encodings.
enum class ReluCase { kNeg, kPos, kUnstable };
ReluCase relu_case(double l, double u);

/// Per-neuron relaxation rule. Stable cases are shared by all kinds
/// (zero map for u <= 0, identity for l >= 0, boundaries counted as stable),
/// except that the fixed-lower-bound CROWN variant keeps lo = 0 even on the
/// stable-positive side. kBox and the LP kinds are not served here.
ReluRelax relu_relax(RelaxationKind kind, double l, double u);

/// Interval propagation: sign-split linear layers, clamped ReLUs.
TapedLayerBounds box_propagate(Tape& tape, const TapedNetwork& net, Var lo0, Var hi0);

/// Backsubstitution down to the input for kHBox/kDeepZ/kCrown/kCrown0.
/// Rejects kinds served by other engines.
TapedLayerBounds backsub_bounds(Tape& tape, const TapedNetwork& net, RelaxationKind kind, Var lo0, Var hi0);

/// Interval bounds everywhere except the last layer, which gets one full
/// adaptive-lower-bound backsubstitution.
TapedLayerBounds crown_ibp_r_bounds(Tape& tape, const TapedNetwork& net, Var lo0, Var hi0);

/// Untaped convenience wrappers.
LayerBounds box_propagate(const Network& net, const InputBox& box);
LayerBounds backsub_bounds(const Network& net, RelaxationKind kind, const InputBox& box);
LayerBounds crown_ibp_r_bounds(const Network& net, const InputBox& box);

/// Dispatches to the right engine for any kind, starting from the eps-ball
/// around x (optionally intersected with [0,1] per coordinate).
LayerBounds bounds(const Network& net, RelaxationKind kind, const Tensor& x, double eps, bool clip01 = false);

/// Taped dispatch for the non-LP kinds (LP kinds carry their own taped entry
/// point in lp_relax.hpp).
TapedLayerBounds bounds(Tape& tape, const TapedNetwork& net, RelaxationKind kind, Var lo0, Var hi0);

}  // namespace certlab
