#pragma once

#include <optional>
#include <string>
#include <vector>

#include "certlab/bounds.hpp"
#include "certlab/lp.hpp"
#include "certlab/network.hpp"
#include "certlab/tape.hpp"

namespace certlab {

/// Relaxations expressed as per-neuron min/max linear programs. The first
/// two are the kinds of interest; the last three re-encode existing
/// relaxations for cross-checking against their native engines.
enum class LpEncoding { kTriangle, kParallelogram, kBoxLp, kDeepZLp, kCrownLp };

std::string lp_encoding_name(LpEncoding e);
LpEncoding lp_encoding_from_name(const std::string& name);

/// Constraint rows a layer contributes, in the literal per-layer form:
/// linear layers add equality rows (inequality rows for kBoxLp), ReLU layers
/// add the per-case rows, with equalities for stable neurons. Variables are
/// numbered contiguously by layer (layer 0 first); auxiliary variables of
/// kDeepZLp start at aux_var_start.
struct LpRowSet {
  std::vector<LpProblem::Row> eq;
  std::vector<LpProblem::Row> ineq;
  int aux_vars = 0;                          // auxiliary variables appended
  std::vector<std::pair<double, double>> aux_bounds;
};

LpRowSet encode_layer(LpEncoding enc, int layer, const Network& net, const LayerBounds& prior,
                      int aux_var_start);

struct LpStats {
  long solves = 0;
  long pivots = 0;
  long degenerate = 0;  // optima with non-unique duals (flagged, not resolved)
};

/// Sequential per-neuron min/max bounds; each layer's programs reuse the
/// bounds computed for earlier layers inside their encodings. ReLU outputs
/// and the first linear layer have closed forms equal to their LP optima and
/// are computed directly.
LayerBounds lp_bounds(const Network& net, LpEncoding enc, const InputBox& box, LpStats* stats = nullptr);

/// Taped variant: every LP optimum becomes a scalar node whose partials
/// w.r.t. the constraint data follow the optimal multipliers, so one
/// backward pass differentiates the whole multilevel chain. Gradients flow
/// into the network parameters; the input box is held constant.
TapedLayerBounds lp_bounds(Tape& tape, const TapedNetwork& tnet, LpEncoding enc, const InputBox& box,
                           LpStats* stats = nullptr);

/// Upper bounds of the final layer only (intermediate layers still get the
/// full treatment the encodings need). With stop_when_above set, remaining
/// outputs are skipped once one upper bound reaches the threshold and are
/// returned as +inf; certification only needs the first failure.
Tensor lp_final_upper(const Network& net, LpEncoding enc, const InputBox& box,
                      std::optional<double> stop_when_above = {}, LpStats* stats = nullptr);

/// Derivative data of one LP's constraint system w.r.t. a scalar parameter.
struct LpDataGrad {
  std::vector<LpProblem::Row> d_eq;    // d(coefficients), rhs = d(b)
  std::vector<LpProblem::Row> d_ineq;  // d(coefficients), rhs = d(h)
  std::vector<double> d_lo, d_hi;      // d(variable bounds); empty means zero
};

/// Sensitivity of the optimal value to the constraint data, contracted with
/// the supplied data derivatives via the optimal multipliers. Sets
/// *degenerate when the optimum had non-unique duals (the solver's dual is
/// used regardless).
double lp_value_gradient(const LpProblem& p, const LpSolution& s, const LpDataGrad& g,
                         bool* degenerate = nullptr);

}  // namespace certlab
