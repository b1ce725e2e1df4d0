#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "certlab/tensor.hpp"

namespace certlab {

/// min or max of one coordinate subject to Ax = b, Gx <= h and per-variable
/// boxes lo <= x <= hi. Boxes are the carrier of boundedness: every
/// structural variable except possibly the objective one must have finite
/// bounds. Rows are stored sparse.
struct LpProblem {
  struct Row {
    std::vector<std::pair<int, double>> terms;  // (variable, coefficient)
    double rhs = 0;
  };

  int num_vars = 0;
  std::vector<Row> eq;
  std::vector<Row> ineq;
  std::vector<double> lo, hi;  // +-inf allowed only where rows imply bounds
  int objective_var = 0;
  bool maximize = false;

  int add_var(double lo_v, double hi_v);
};

/// Optimum with multipliers. Conventions follow the Lagrangian of the
/// minimization form,
///   L = c^T x + mu^T (Ax - b) + lambda^T (Gx - h)
///     - pi_lo^T (x - lo) + pi_hi^T (x - hi),
/// with lambda, pi_lo, pi_hi >= 0; a maximization problem is solved as
/// min(-x) and reports that problem's multipliers, which coincide with the
/// multipliers of the max-form Lagrangian.
struct LpSolution {
  double value = 0;
  std::vector<double> x;
  std::vector<double> eq_dual;         // mu
  std::vector<double> ineq_dual;       // lambda >= 0
  std::vector<double> lo_dual;         // pi_lo >= 0
  std::vector<double> hi_dual;         // pi_hi >= 0
  std::vector<int> active_ineq;        // tight general rows
  bool degenerate = false;             // basic variable at a bound: duals may be non-unique
  int pivots = 0;
};

/// Two-phase primal simplex with bounded variables and an explicit dense
/// basis inverse. Deterministic: Dantzig pricing with smallest-index ties,
/// switching to Bland's rule after 2*rows pivots; errors out (reporting the
/// final basis) if 10*(rows+cols) further pivots do not terminate.
LpSolution simplex_solve(const LpProblem& p);

/// KKT residuals, for tests: returns max of primal infeasibility, dual
/// infeasibility, complementary-slackness violation and duality gap.
double kkt_residual(const LpProblem& p, const LpSolution& s);

/// Debug dump: `eq|le coeff ... rhs` rows (boxes emitted as `le` unit rows)
/// and a final `min|max <var>` line.
void dump_lp(const LpProblem& p, std::ostream& os);

}  // namespace certlab
