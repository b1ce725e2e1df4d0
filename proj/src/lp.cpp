#include "certlab/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace certlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-8;
constexpr double kFeasTol = 1e-7;
constexpr int kRefactorEvery = 150;

enum class Status : uint8_t { kBasic, kAtLower, kAtUpper, kFreeAtZero };

struct Col {
  std::vector<std::pair<int, double>> rows;  // (row, coefficient)
  double lo = 0, hi = 0;
  double cost1 = 0, cost2 = 0;  // phase-1 / phase-2 objective
  bool artificial = false;
};

class Simplex {
 public:
  explicit Simplex(const LpProblem& p) : p_(p) { build(); }

  LpSolution run() {
    // Phase 1: drive artificial variables to zero.
    phase_ = 1;
    iterate();
    double art_sum = 0;
    for (size_t j = 0; j < cols_.size(); ++j)
      if (cols_[j].artificial) art_sum += x_[j];
    if (art_sum > 1e-6) throw Error("lp: infeasible (phase-1 residual " + std::to_string(art_sum) + ")");
    drive_out_artificials();
    recompute_basic_values();
    for (Col& c : cols_)
      if (c.artificial) c.lo = c.hi = 0.0;

    // Phase 2: optimize the real objective.
    phase_ = 2;
    iterate();
    refactor();
    return extract();
  }

 private:
  int m() const { return static_cast<int>(p_.eq.size() + p_.ineq.size()); }
  int me() const { return static_cast<int>(p_.eq.size()); }

  void build() {
    int rows = m();
    rhs_.resize(static_cast<size_t>(rows));
    for (int k = 0; k < me(); ++k) rhs_[static_cast<size_t>(k)] = p_.eq[static_cast<size_t>(k)].rhs;
    for (size_t k = 0; k < p_.ineq.size(); ++k) rhs_[p_.eq.size() + k] = p_.ineq[k].rhs;

    cols_.resize(static_cast<size_t>(p_.num_vars));
    for (int j = 0; j < p_.num_vars; ++j) {
      cols_[static_cast<size_t>(j)].lo = p_.lo[static_cast<size_t>(j)];
      cols_[static_cast<size_t>(j)].hi = p_.hi[static_cast<size_t>(j)];
    }
    auto add_terms = [&](const LpProblem::Row& row, int r) {
      for (auto [v, c] : row.terms) {
        if (v < 0 || v >= p_.num_vars) throw Error("lp: row references undeclared variable");
        if (c != 0.0) cols_[static_cast<size_t>(v)].rows.push_back({r, c});
      }
    };
    for (int k = 0; k < me(); ++k) add_terms(p_.eq[static_cast<size_t>(k)], k);
    for (size_t k = 0; k < p_.ineq.size(); ++k) add_terms(p_.ineq[k], me() + static_cast<int>(k));

    cols_[static_cast<size_t>(p_.objective_var)].cost2 = p_.maximize ? -1.0 : 1.0;

    // Initial point: structural variables at a finite bound (or zero when
    // free); one basic slack or artificial per row.
    x_.assign(cols_.size(), 0.0);
    status_.assign(cols_.size(), Status::kAtLower);
    for (size_t j = 0; j < cols_.size(); ++j) {
      Col& c = cols_[j];
      if (std::isfinite(c.lo)) {
        x_[j] = c.lo;
        status_[j] = Status::kAtLower;
      } else if (std::isfinite(c.hi)) {
        x_[j] = c.hi;
        status_[j] = Status::kAtUpper;
      } else {
        x_[j] = 0.0;
        status_[j] = Status::kFreeAtZero;
      }
    }

    std::vector<double> resid = rhs_;
    for (size_t j = 0; j < cols_.size(); ++j) {
      if (x_[j] == 0.0) continue;
      for (auto [r, c] : cols_[j].rows) resid[static_cast<size_t>(r)] -= c * x_[j];
    }

    basis_.assign(static_cast<size_t>(rows), -1);
    slack_col_.assign(p_.ineq.size(), -1);
    for (size_t k = 0; k < p_.ineq.size(); ++k) {
      int r = me() + static_cast<int>(k);
      Col slack;
      slack.rows = {{r, 1.0}};
      slack.lo = 0;
      slack.hi = kInf;
      cols_.push_back(std::move(slack));
      slack_col_[k] = static_cast<int>(cols_.size()) - 1;
      x_.push_back(0.0);
      status_.push_back(Status::kAtLower);
    }
    for (int r = 0; r < rows; ++r) {
      double res = resid[static_cast<size_t>(r)];
      if (r >= me()) {
        int sc = slack_col_[static_cast<size_t>(r - me())];
        if (res >= 0.0) {
          basis_[static_cast<size_t>(r)] = sc;
          status_[static_cast<size_t>(sc)] = Status::kBasic;
          x_[static_cast<size_t>(sc)] = res;
          continue;
        }
      }
      Col art;
      art.rows = {{r, res >= 0.0 ? 1.0 : -1.0}};
      art.lo = 0;
      art.hi = kInf;
      art.cost1 = 1.0;
      art.artificial = true;
      cols_.push_back(std::move(art));
      int ac = static_cast<int>(cols_.size()) - 1;
      basis_[static_cast<size_t>(r)] = ac;
      status_.push_back(Status::kBasic);
      x_.push_back(std::fabs(res));
    }

    binv_.assign(static_cast<size_t>(rows) * rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      int bc = basis_[static_cast<size_t>(r)];
      binv_[static_cast<size_t>(r) * rows + r] = 1.0 / cols_[static_cast<size_t>(bc)].rows[0].second;
    }
  }

  double cost(int j) const {
    const Col& c = cols_[static_cast<size_t>(j)];
    return phase_ == 1 ? c.cost1 : c.cost2;
  }

  void compute_y(std::vector<double>& y) const {
    int rows = m();
    y.assign(static_cast<size_t>(rows), 0.0);
    for (int r = 0; r < rows; ++r) {
      double cb = cost(basis_[static_cast<size_t>(r)]);
      if (cb == 0.0) continue;
      const double* brow = binv_.data() + static_cast<size_t>(r) * rows;
      for (int i = 0; i < rows; ++i) y[static_cast<size_t>(i)] += cb * brow[i];
    }
  }

  double reduced_cost(int j, const std::vector<double>& y) const {
    double d = cost(j);
    for (auto [r, c] : cols_[static_cast<size_t>(j)].rows) d -= y[static_cast<size_t>(r)] * c;
    return d;
  }

  void ftran(int j, std::vector<double>& w) const {
    int rows = m();
    w.assign(static_cast<size_t>(rows), 0.0);
    for (auto [r, c] : cols_[static_cast<size_t>(j)].rows) {
      for (int i = 0; i < rows; ++i) w[static_cast<size_t>(i)] += binv_[static_cast<size_t>(i) * rows + r] * c;
    }
  }

  void refactor() {
    // Rebuild the basis inverse by Gauss-Jordan and recompute basic values.
    int rows = m();
    std::vector<double> mat(static_cast<size_t>(rows) * rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      int bc = basis_[static_cast<size_t>(r)];
      for (auto [row, c] : cols_[static_cast<size_t>(bc)].rows) mat[static_cast<size_t>(row) * rows + r] = c;
    }
    std::vector<double> inv(static_cast<size_t>(rows) * rows, 0.0);
    for (int r = 0; r < rows; ++r) inv[static_cast<size_t>(r) * rows + r] = 1.0;
    for (int c = 0; c < rows; ++c) {
      int piv = -1;
      double best = 0.0;
      for (int r = c; r < rows; ++r) {
        double v = std::fabs(mat[static_cast<size_t>(r) * rows + c]);
        if (v > best) {
          best = v;
          piv = r;
        }
      }
      if (piv < 0 || best < 1e-12) throw Error("lp: singular basis during refactorization");
      if (piv != c) {
        for (int k = 0; k < rows; ++k) {
          std::swap(mat[static_cast<size_t>(piv) * rows + k], mat[static_cast<size_t>(c) * rows + k]);
          std::swap(inv[static_cast<size_t>(piv) * rows + k], inv[static_cast<size_t>(c) * rows + k]);
        }
      }
      double d = 1.0 / mat[static_cast<size_t>(c) * rows + c];
      for (int k = 0; k < rows; ++k) {
        mat[static_cast<size_t>(c) * rows + k] *= d;
        inv[static_cast<size_t>(c) * rows + k] *= d;
      }
      for (int r = 0; r < rows; ++r) {
        if (r == c) continue;
        double f = mat[static_cast<size_t>(r) * rows + c];
        if (f == 0.0) continue;
        for (int k = 0; k < rows; ++k) {
          mat[static_cast<size_t>(r) * rows + k] -= f * mat[static_cast<size_t>(c) * rows + k];
          inv[static_cast<size_t>(r) * rows + k] -= f * inv[static_cast<size_t>(c) * rows + k];
        }
      }
    }
    binv_ = std::move(inv);
    recompute_basic_values();
  }

  void recompute_basic_values() {
    int rows = m();
    std::vector<double> resid = rhs_;
    for (size_t j = 0; j < cols_.size(); ++j) {
      if (status_[j] == Status::kBasic || x_[j] == 0.0) continue;
      for (auto [r, c] : cols_[j].rows) resid[static_cast<size_t>(r)] -= c * x_[j];
    }
    for (int r = 0; r < rows; ++r) {
      double v = 0.0;
      const double* brow = binv_.data() + static_cast<size_t>(r) * rows;
      for (int i = 0; i < rows; ++i) v += brow[i] * resid[static_cast<size_t>(i)];
      x_[static_cast<size_t>(basis_[static_cast<size_t>(r)])] = v;
    }
  }

  void iterate() {
    int rows = m();
    int bland_after = 2 * rows;
    long cap = 10L * (rows + static_cast<int>(cols_.size()));
    int phase_pivots = 0;
    long since_bland = 0;
    std::vector<double> y, w;

    for (;;) {
      compute_y(y);
      bool bland = phase_pivots > bland_after;

      int enter = -1;
      int dir = 0;  // +1 increase, -1 decrease
      double best = kDualTol;
      for (int j = 0; j < static_cast<int>(cols_.size()); ++j) {
        if (status_[static_cast<size_t>(j)] == Status::kBasic) continue;
        const Col& c = cols_[static_cast<size_t>(j)];
        if (c.lo == c.hi) continue;  // fixed
        if (phase_ == 2 && c.artificial) continue;
        double d = reduced_cost(j, y);
        int cand_dir = 0;
        if (status_[static_cast<size_t>(j)] == Status::kAtLower && d < -kDualTol)
          cand_dir = 1;
        else if (status_[static_cast<size_t>(j)] == Status::kAtUpper && d > kDualTol)
          cand_dir = -1;
        else if (status_[static_cast<size_t>(j)] == Status::kFreeAtZero && std::fabs(d) > kDualTol)
          cand_dir = d < 0 ? 1 : -1;
        if (cand_dir == 0) continue;
        if (bland) {
          enter = j;
          dir = cand_dir;
          break;
        }
        if (std::fabs(d) > best) {
          best = std::fabs(d);
          enter = j;
          dir = cand_dir;
        }
      }
      if (enter < 0) return;  // optimal for this phase

      ftran(enter, w);

      // Ratio test: the entering variable moves by t*dir, basic variables by
      // -t*dir*w. A bound flip happens when the entering variable hits its
      // own opposite bound first.
      const Col& ce = cols_[static_cast<size_t>(enter)];
      double t_flip = kInf;
      if (std::isfinite(ce.lo) && std::isfinite(ce.hi)) t_flip = ce.hi - ce.lo;
      double t_best = kInf;
      int leave_row = -1;
      double leave_coef = 0.0;
      for (int r = 0; r < rows; ++r) {
        double coef = dir * w[static_cast<size_t>(r)];
        if (std::fabs(coef) < kPivotTol) continue;
        int bc = basis_[static_cast<size_t>(r)];
        const Col& cb = cols_[static_cast<size_t>(bc)];
        double t;
        if (coef > 0) {
          if (!std::isfinite(cb.lo)) continue;
          t = (x_[static_cast<size_t>(bc)] - cb.lo) / coef;
        } else {
          if (!std::isfinite(cb.hi)) continue;
          t = (cb.hi - x_[static_cast<size_t>(bc)]) / (-coef);
        }
        if (t < 0.0) t = 0.0;
        bool better;
        if (leave_row < 0) {
          better = t < t_best;
        } else if (bland) {
          better = t < t_best - 1e-12 ||
                   (t <= t_best + 1e-12 && bc < basis_[static_cast<size_t>(leave_row)]);
        } else {
          better = t < t_best - 1e-12 || (t <= t_best + 1e-12 && std::fabs(coef) > std::fabs(leave_coef));
        }
        if (better) {
          t_best = t;
          leave_row = r;
          leave_coef = coef;
        }
      }

      if (std::isfinite(t_flip) && t_flip <= t_best) {
        // Bound flip, no basis change.
        for (int r = 0; r < rows; ++r) {
          int bc = basis_[static_cast<size_t>(r)];
          x_[static_cast<size_t>(bc)] -= t_flip * dir * w[static_cast<size_t>(r)];
        }
        status_[static_cast<size_t>(enter)] =
            status_[static_cast<size_t>(enter)] == Status::kAtLower ? Status::kAtUpper : Status::kAtLower;
        x_[static_cast<size_t>(enter)] =
            status_[static_cast<size_t>(enter)] == Status::kAtUpper ? ce.hi : ce.lo;
        continue;
      }
      if (leave_row < 0) throw Error("lp: unbounded direction in phase " + std::to_string(phase_));

      double t = std::max(0.0, t_best);
      for (int r = 0; r < rows; ++r) {
        int bc = basis_[static_cast<size_t>(r)];
        x_[static_cast<size_t>(bc)] -= t * dir * w[static_cast<size_t>(r)];
      }
      x_[static_cast<size_t>(enter)] += t * dir;

      int leaving = basis_[static_cast<size_t>(leave_row)];
      const Col& cl = cols_[static_cast<size_t>(leaving)];
      // Snap the leaving variable onto the bound it reached.
      if (dir * w[static_cast<size_t>(leave_row)] > 0) {
        x_[static_cast<size_t>(leaving)] = cl.lo;
        status_[static_cast<size_t>(leaving)] = Status::kAtLower;
      } else {
        x_[static_cast<size_t>(leaving)] = cl.hi;
        status_[static_cast<size_t>(leaving)] = Status::kAtUpper;
      }
      basis_[static_cast<size_t>(leave_row)] = enter;
      status_[static_cast<size_t>(enter)] = Status::kBasic;

      // Binv <- E * Binv with the eta column derived from w.
      double piv = w[static_cast<size_t>(leave_row)];
      double* prow = binv_.data() + static_cast<size_t>(leave_row) * rows;
      for (int k = 0; k < rows; ++k) prow[k] /= piv;
      for (int r = 0; r < rows; ++r) {
        if (r == leave_row) continue;
        double f = w[static_cast<size_t>(r)];
        if (f == 0.0) continue;
        double* rrow = binv_.data() + static_cast<size_t>(r) * rows;
        for (int k = 0; k < rows; ++k) rrow[k] -= f * prow[k];
      }

      ++phase_pivots;
      ++total_pivots_;
      if (phase_pivots % kRefactorEvery == 0) refactor();
      if (phase_pivots > bland_after) {
        if (++since_bland > cap) {
          std::ostringstream oss;
          oss << "lp: pivot cap exceeded (" << cap << " after anti-cycling); basis:";
          for (int r = 0; r < std::min(rows, 32); ++r) oss << ' ' << basis_[static_cast<size_t>(r)];
          throw Error(oss.str());
        }
      }
    }
  }

  void drive_out_artificials() {
    int rows = m();
    std::vector<double> w;
    for (int r = 0; r < rows; ++r) {
      int bc = basis_[static_cast<size_t>(r)];
      if (!cols_[static_cast<size_t>(bc)].artificial) continue;
      // Degenerate pivot on any usable non-artificial column; if none, the
      // row is redundant and the artificial stays basic at zero.
      for (int j = 0; j < static_cast<int>(cols_.size()); ++j) {
        const Col& c = cols_[static_cast<size_t>(j)];
        if (c.artificial || status_[static_cast<size_t>(j)] == Status::kBasic) continue;
        double entry = 0.0;
        const double* brow = binv_.data() + static_cast<size_t>(r) * rows;
        for (auto [row, cf] : c.rows) entry += brow[row] * cf;
        if (std::fabs(entry) < 1e-7) continue;
        ftran(j, w);
        double piv = w[static_cast<size_t>(r)];
        double* prow = binv_.data() + static_cast<size_t>(r) * rows;
        for (int k = 0; k < rows; ++k) prow[k] /= piv;
        for (int r2 = 0; r2 < rows; ++r2) {
          if (r2 == r) continue;
          double f = w[static_cast<size_t>(r2)];
          if (f == 0.0) continue;
          double* rrow = binv_.data() + static_cast<size_t>(r2) * rows;
          for (int k = 0; k < rows; ++k) rrow[k] -= f * prow[k];
        }
        basis_[static_cast<size_t>(r)] = j;
        status_[static_cast<size_t>(j)] = Status::kBasic;
        status_[static_cast<size_t>(bc)] = Status::kAtLower;
        x_[static_cast<size_t>(bc)] = 0.0;
        break;
      }
    }
  }

  LpSolution extract() {
    int rows = m();
    LpSolution s;
    s.x.assign(static_cast<size_t>(p_.num_vars), 0.0);
    for (int j = 0; j < p_.num_vars; ++j) s.x[static_cast<size_t>(j)] = x_[static_cast<size_t>(j)];
    s.value = s.x[static_cast<size_t>(p_.objective_var)];
    s.pivots = total_pivots_;

    std::vector<double> y;
    compute_y(y);
    s.eq_dual.assign(p_.eq.size(), 0.0);
    for (int k = 0; k < me(); ++k) s.eq_dual[static_cast<size_t>(k)] = -y[static_cast<size_t>(k)];
    s.ineq_dual.assign(p_.ineq.size(), 0.0);
    for (size_t k = 0; k < p_.ineq.size(); ++k) s.ineq_dual[k] = -y[p_.eq.size() + k];

    s.lo_dual.assign(static_cast<size_t>(p_.num_vars), 0.0);
    s.hi_dual.assign(static_cast<size_t>(p_.num_vars), 0.0);
    for (int j = 0; j < p_.num_vars; ++j) {
      Status st = status_[static_cast<size_t>(j)];
      if (st == Status::kBasic || st == Status::kFreeAtZero) continue;
      double d = reduced_cost(j, y);
      if (st == Status::kAtLower) {
        if (cols_[static_cast<size_t>(j)].lo == cols_[static_cast<size_t>(j)].hi && d < 0)
          s.hi_dual[static_cast<size_t>(j)] = -d;
        else
          s.lo_dual[static_cast<size_t>(j)] = std::max(d, 0.0);
      } else {
        s.hi_dual[static_cast<size_t>(j)] = std::max(-d, 0.0);
      }
    }

    for (size_t k = 0; k < p_.ineq.size(); ++k) {
      int sc = slack_col_[k];
      if (std::fabs(x_[static_cast<size_t>(sc)]) <= kFeasTol) s.active_ineq.push_back(static_cast<int>(k));
    }

    s.degenerate = false;
    for (int r = 0; r < rows; ++r) {
      int bc = basis_[static_cast<size_t>(r)];
      const Col& c = cols_[static_cast<size_t>(bc)];
      double v = x_[static_cast<size_t>(bc)];
      if ((std::isfinite(c.lo) && v - c.lo <= 1e-9) || (std::isfinite(c.hi) && c.hi - v <= 1e-9)) {
        s.degenerate = true;
        break;
      }
    }
    return s;
  }

  const LpProblem& p_;
  std::vector<Col> cols_;
  std::vector<double> x_;
  std::vector<Status> status_;
  std::vector<int> basis_;
  std::vector<int> slack_col_;
  std::vector<double> binv_;
  std::vector<double> rhs_;
  int phase_ = 1;
  int total_pivots_ = 0;
};

}  // namespace

int LpProblem::add_var(double lo_v, double hi_v) {
  lo.push_back(lo_v);
  hi.push_back(hi_v);
  return num_vars++;
}

LpSolution simplex_solve(const LpProblem& p) {
  if (p.num_vars <= 0) throw Error("lp: empty problem");
  if (static_cast<int>(p.lo.size()) != p.num_vars || static_cast<int>(p.hi.size()) != p.num_vars)
    throw Error("lp: bounds arrays do not match num_vars");
  if (p.objective_var < 0 || p.objective_var >= p.num_vars) throw Error("lp: objective variable out of range");
  Simplex s(p);
  return s.run();
}

double kkt_residual(const LpProblem& p, const LpSolution& s) {
  double worst = 0.0;
  auto bump = [&](double v) { worst = std::max(worst, v); };

  for (const auto& row : p.eq) {
    double acc = -row.rhs;
    for (auto [v, c] : row.terms) acc += c * s.x[static_cast<size_t>(v)];
    bump(std::fabs(acc));
  }
  std::vector<double> slack(p.ineq.size());
  for (size_t k = 0; k < p.ineq.size(); ++k) {
    double acc = -p.ineq[k].rhs;
    for (auto [v, c] : p.ineq[k].terms) acc += c * s.x[static_cast<size_t>(v)];
    bump(acc);  // positive means violated
    slack[k] = -acc;
  }
  for (int j = 0; j < p.num_vars; ++j) {
    if (std::isfinite(p.lo[static_cast<size_t>(j)])) bump(p.lo[static_cast<size_t>(j)] - s.x[static_cast<size_t>(j)]);
    if (std::isfinite(p.hi[static_cast<size_t>(j)])) bump(s.x[static_cast<size_t>(j)] - p.hi[static_cast<size_t>(j)]);
  }

  // Dual feasibility and stationarity of the internal minimization form.
  for (double l : s.ineq_dual) bump(-l);
  for (double l : s.lo_dual) bump(-l);
  for (double l : s.hi_dual) bump(-l);
  std::vector<double> stat(static_cast<size_t>(p.num_vars), 0.0);
  stat[static_cast<size_t>(p.objective_var)] = p.maximize ? -1.0 : 1.0;
  for (size_t k = 0; k < p.eq.size(); ++k)
    for (auto [v, c] : p.eq[k].terms) stat[static_cast<size_t>(v)] += s.eq_dual[k] * c;
  for (size_t k = 0; k < p.ineq.size(); ++k)
    for (auto [v, c] : p.ineq[k].terms) stat[static_cast<size_t>(v)] += s.ineq_dual[k] * c;
  for (int j = 0; j < p.num_vars; ++j)
    bump(std::fabs(stat[static_cast<size_t>(j)] - s.lo_dual[static_cast<size_t>(j)] +
                   s.hi_dual[static_cast<size_t>(j)]));

  // Complementary slackness.
  for (size_t k = 0; k < p.ineq.size(); ++k) bump(std::fabs(s.ineq_dual[k] * slack[k]));
  for (int j = 0; j < p.num_vars; ++j) {
    if (std::isfinite(p.lo[static_cast<size_t>(j)]))
      bump(std::fabs(s.lo_dual[static_cast<size_t>(j)] * (s.x[static_cast<size_t>(j)] - p.lo[static_cast<size_t>(j)])));
    if (std::isfinite(p.hi[static_cast<size_t>(j)]))
      bump(std::fabs(s.hi_dual[static_cast<size_t>(j)] * (p.hi[static_cast<size_t>(j)] - s.x[static_cast<size_t>(j)])));
  }

  // Duality gap of the internal form via the Lagrangian at the reported point.
  double lag = p.maximize ? -s.value : s.value;
  double primal = lag;
  for (size_t k = 0; k < p.eq.size(); ++k) {
    double acc = -p.eq[k].rhs;
    for (auto [v, c] : p.eq[k].terms) acc += c * s.x[static_cast<size_t>(v)];
    lag += s.eq_dual[k] * acc;
  }
  for (size_t k = 0; k < p.ineq.size(); ++k) lag += s.ineq_dual[k] * -slack[k];
  for (int j = 0; j < p.num_vars; ++j) {
    if (std::isfinite(p.lo[static_cast<size_t>(j)]))
      lag -= s.lo_dual[static_cast<size_t>(j)] * (s.x[static_cast<size_t>(j)] - p.lo[static_cast<size_t>(j)]);
    if (std::isfinite(p.hi[static_cast<size_t>(j)]))
      lag += s.hi_dual[static_cast<size_t>(j)] * (s.x[static_cast<size_t>(j)] - p.hi[static_cast<size_t>(j)]);
  }
  bump(std::fabs(lag - primal) / std::max(1.0, std::fabs(s.value)));
  return worst;
}

void dump_lp(const LpProblem& p, std::ostream& os) {
  auto write_row = [&](const char* tag, const LpProblem::Row& row) {
    os << tag;
    std::vector<double> dense(static_cast<size_t>(p.num_vars), 0.0);
    for (auto [v, c] : row.terms) dense[static_cast<size_t>(v)] += c;
    for (double c : dense) os << ' ' << c;
    os << ' ' << row.rhs << '\n';
  };
  for (const auto& row : p.eq) write_row("eq", row);
  for (const auto& row : p.ineq) write_row("le", row);
  for (int j = 0; j < p.num_vars; ++j) {
    if (std::isfinite(p.hi[static_cast<size_t>(j)])) {
      LpProblem::Row r{{{j, 1.0}}, p.hi[static_cast<size_t>(j)]};
      write_row("le", r);
    }
    if (std::isfinite(p.lo[static_cast<size_t>(j)])) {
      LpProblem::Row r{{{j, -1.0}}, -p.lo[static_cast<size_t>(j)]};
      write_row("le", r);
    }
  }
  os << (p.maximize ? "max " : "min ") << p.objective_var << '\n';
}

}  // namespace certlab
