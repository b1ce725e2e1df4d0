#include "certlab/lp_relax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "certlab/parallel.hpp"

namespace certlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Scalar that lives either as a plain double or additionally as a tape node.
struct Sref {
  double v = 0;
  Var node{};
};

/// Scalar arithmetic in both modes. Results carry a node only when an
/// operand does (constants stay plain until a mixed operation needs them).
class Ctx {
 public:
  explicit Ctx(Tape* t) : tape_(t) {}
  Tape* tape() const { return tape_; }

  static Sref konst(double v) { return {v, {}}; }

  Sref add(Sref a, Sref b) { return bin(a, b, a.v + b.v, &Tape::add); }
  Sref sub(Sref a, Sref b) { return bin(a, b, a.v - b.v, &Tape::sub); }
  Sref mul(Sref a, Sref b) { return bin(a, b, a.v * b.v, &Tape::mul); }
  Sref div(Sref a, Sref b) { return bin(a, b, a.v / b.v, &Tape::div); }

  Sref neg(Sref a) {
    Sref r{-a.v, {}};
    if (tape_ && a.node.valid()) r.node = tape_->neg(a.node);
    return r;
  }

  Sref relu(Sref a) {
    Sref r{std::max(0.0, a.v), {}};
    if (tape_ && a.node.valid()) r.node = tape_->relu(a.node);
    return r;
  }

  Var materialize(Sref s) {
    if (s.node.valid()) return s.node;
    if (!tape_) throw Error("lp_relax: no tape to materialize a scalar on");
    return tape_->scalar(s.v);
  }

 private:
  Sref bin(Sref a, Sref b, double v, Var (Tape::*op)(Var, Var)) {
    Sref r{v, {}};
    if (tape_ && (a.node.valid() || b.node.valid())) r.node = (tape_->*op)(materialize(a), materialize(b));
    return r;
  }
  Tape* tape_;
};

/// Uniform parameter access; in taped mode each referenced entry becomes an
/// index node so LP partials can attach to it.
class ParamView {
 public:
  explicit ParamView(const Network& net) : net_(&net) {}
  ParamView(Tape& tape, const TapedNetwork& tnet) : tape_(&tape), tnet_(&tnet) {
    wnodes_.resize(tnet.weights.size());
    bnodes_.resize(tnet.weights.size());
  }

  int blocks() const {
    return net_ ? net_->num_linear() : static_cast<int>(tnet_->weights.size());
  }
  int rows(int blk) const { return weight_shape(blk).first; }
  int cols(int blk) const { return weight_shape(blk).second; }

  Sref weight(int blk, int r, int c) {
    if (net_) return {net_->blocks()[static_cast<size_t>(blk)].weight.at(r, c), {}};
    const Tensor& w = tape_->value(tnet_->weights[static_cast<size_t>(blk)]);
    int flat = r * w.cols() + c;
    return {w[flat], wnode(blk, flat, w.size())};
  }

  Sref bias(int blk, int r) {
    if (net_) return {net_->blocks()[static_cast<size_t>(blk)].bias[r], {}};
    const Tensor& b = tape_->value(tnet_->biases[static_cast<size_t>(blk)]);
    return {b[r], bnode(blk, r, b.size())};
  }

 private:
  std::pair<int, int> weight_shape(int blk) const {
    if (net_) {
      const Tensor& w = net_->blocks()[static_cast<size_t>(blk)].weight;
      return {w.rows(), w.cols()};
    }
    const Tensor& w = tape_->value(tnet_->weights[static_cast<size_t>(blk)]);
    return {w.rows(), w.cols()};
  }

  Var wnode(int blk, int flat, int n) {
    auto& cache = wnodes_[static_cast<size_t>(blk)];
    if (cache.empty()) cache.assign(static_cast<size_t>(n), Var{});
    if (!cache[static_cast<size_t>(flat)].valid())
      cache[static_cast<size_t>(flat)] = tape_->index(tnet_->weights[static_cast<size_t>(blk)], flat);
    return cache[static_cast<size_t>(flat)];
  }

  Var bnode(int blk, int r, int n) {
    auto& cache = bnodes_[static_cast<size_t>(blk)];
    if (cache.empty()) cache.assign(static_cast<size_t>(n), Var{});
    if (!cache[static_cast<size_t>(r)].valid())
      cache[static_cast<size_t>(r)] = tape_->index(tnet_->biases[static_cast<size_t>(blk)], r);
    return cache[static_cast<size_t>(r)];
  }

  const Network* net_ = nullptr;
  Tape* tape_ = nullptr;
  const TapedNetwork* tnet_ = nullptr;
  std::vector<std::vector<Var>> wnodes_, bnodes_;
};

struct MetaTerm {
  int var;
  Sref coeff;
};
struct MetaRow {
  std::vector<MetaTerm> terms;
  Sref rhs;
};

constexpr int kZeroVar = -1;

/// Multilevel encoder. Stable ReLUs are folded away at row-construction time
/// (identity aliasing / zero substitution); those equality rows carry no
/// parameter-dependent data, so the fold leaves both the feasible set and
/// every gradient unchanged. Lower rows of the form x >= 0 and constant
/// upper rows live in the variable boxes the solver handles natively.
class Encoder {
 public:
  Encoder(LpEncoding enc, ParamView pv, Ctx ctx, const InputBox& box)
      : enc_(enc), pv_(std::move(pv)), ctx_(ctx), box_(box) {
    L_ = 2 * pv_.blocks() - 1;
    lo_.resize(static_cast<size_t>(L_) + 1);
    hi_.resize(static_cast<size_t>(L_) + 1);
    vmap_.resize(static_cast<size_t>(L_) + 1);
  }

  void run(bool final_upper_only, std::optional<double> stop_when_above, LpStats* stats) {
    stats_ = stats;
    init_inputs();
    solve_first_linear();
    if (L_ >= 2) commit_linear(1);
    for (int i = 2; i <= L_; ++i) {
      if (Network::is_relu_layer(i)) {
        process_relu(i);
      } else {
        solve_linear(i, final_upper_only && i == L_, stop_when_above);
        if (i < L_) commit_linear(i);
      }
    }
  }

  std::vector<std::vector<Sref>> lo_, hi_;
  Ctx ctx_;

 private:
  void init_inputs() {
    int n0 = box_.lo.size();
    lo_[0].resize(static_cast<size_t>(n0));
    hi_[0].resize(static_cast<size_t>(n0));
    vmap_[0].resize(static_cast<size_t>(n0));
    for (int j = 0; j < n0; ++j) {
      lo_[0][static_cast<size_t>(j)] = Ctx::konst(box_.lo[j]);
      hi_[0][static_cast<size_t>(j)] = Ctx::konst(box_.hi[j]);
      vmap_[0][static_cast<size_t>(j)] = new_var(lo_[0][static_cast<size_t>(j)], hi_[0][static_cast<size_t>(j)]);
    }
  }

  // Sign-split interval of one affine row over the previous layer's bounds.
  void affine_interval(int blk, int r, const std::vector<Sref>& plo, const std::vector<Sref>& phi, Sref& out_lo,
                       Sref& out_hi) {
    Sref acc_lo = pv_.bias(blk, r);
    Sref acc_hi = acc_lo;
    for (int c = 0; c < pv_.cols(blk); ++c) {
      Sref w = pv_.weight(blk, r, c);
      const Sref& a = w.v >= 0 ? plo[static_cast<size_t>(c)] : phi[static_cast<size_t>(c)];
      const Sref& b = w.v >= 0 ? phi[static_cast<size_t>(c)] : plo[static_cast<size_t>(c)];
      acc_lo = ctx_.add(acc_lo, ctx_.mul(w, a));
      acc_hi = ctx_.add(acc_hi, ctx_.mul(w, b));
    }
    out_lo = acc_lo;
    out_hi = acc_hi;
  }

  // The first linear layer's program optimizes one affine form over the
  // input box, whose optimum is the sign-split interval bound; computed
  // directly (and exactly) in both modes.
  void solve_first_linear() {
    int n = pv_.rows(0);
    lo_[1].resize(static_cast<size_t>(n));
    hi_[1].resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) affine_interval(0, j, lo_[0], hi_[0], lo_[1][static_cast<size_t>(j)], hi_[1][static_cast<size_t>(j)]);
  }

  void process_relu(int i) {
    int n = static_cast<int>(lo_[static_cast<size_t>(i - 1)].size());
    lo_[static_cast<size_t>(i)].resize(static_cast<size_t>(n));
    hi_[static_cast<size_t>(i)].resize(static_cast<size_t>(n));
    vmap_[static_cast<size_t>(i)].resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
      Sref l = lo_[static_cast<size_t>(i - 1)][static_cast<size_t>(j)];
      Sref u = hi_[static_cast<size_t>(i - 1)][static_cast<size_t>(j)];
      Sref& olo = lo_[static_cast<size_t>(i)][static_cast<size_t>(j)];
      Sref& ohi = hi_[static_cast<size_t>(i)][static_cast<size_t>(j)];
      int& vm = vmap_[static_cast<size_t>(i)][static_cast<size_t>(j)];

      if (enc_ == LpEncoding::kBoxLp) {
        olo = ctx_.relu(l);
        ohi = ctx_.relu(u);
        vm = new_var(olo, ohi);
        continue;
      }

      ReluCase c = relu_case(l.v, u.v);
      int pre = vmap_[static_cast<size_t>(i - 1)][static_cast<size_t>(j)];
      if (c == ReluCase::kNeg) {
        olo = Ctx::konst(0);
        ohi = Ctx::konst(0);
        vm = kZeroVar;
        continue;
      }
      if (c == ReluCase::kPos) {
        olo = l;
        ohi = u;
        vm = pre;  // identity-aliased onto the preactivation
        continue;
      }

      Sref lambda = ctx_.div(u, ctx_.sub(u, l));
      switch (enc_) {
        case LpEncoding::kDeepZLp: {
          olo = ctx_.mul(lambda, l);
          ohi = u;
          vm = new_var(olo, ohi);
          Sref mu = ctx_.mul(Ctx::konst(-0.5), ctx_.div(ctx_.mul(l, u), ctx_.sub(u, l)));
          int e = new_var(Ctx::konst(-1), Ctx::konst(1));
          add_eq({{vm, Ctx::konst(1)}, {pre, ctx_.neg(lambda)}, {e, ctx_.neg(mu)}}, mu);
          break;
        }
        case LpEncoding::kCrownLp: {
          bool zero_lower = -l.v >= u.v;
          olo = zero_lower ? Ctx::konst(0) : l;
          ohi = u;
          vm = new_var(olo, ohi);
          add_ineq({{vm, Ctx::konst(1)}, {pre, ctx_.neg(lambda)}}, ctx_.neg(ctx_.mul(lambda, l)));
          if (!zero_lower) add_ineq({{pre, Ctx::konst(1)}, {vm, Ctx::konst(-1)}}, Ctx::konst(0));
          break;
        }
        case LpEncoding::kTriangle: {
          olo = Ctx::konst(0);
          ohi = u;
          vm = new_var(olo, ohi);
          add_ineq({{pre, Ctx::konst(1)}, {vm, Ctx::konst(-1)}}, Ctx::konst(0));
          add_ineq({{vm, Ctx::konst(1)}, {pre, ctx_.neg(lambda)}}, ctx_.neg(ctx_.mul(lambda, l)));
          break;
        }
        case LpEncoding::kParallelogram: {
          olo = Ctx::konst(0);
          ohi = u;
          vm = new_var(olo, ohi);
          add_ineq({{pre, Ctx::konst(1)}, {vm, Ctx::konst(-1)}}, Ctx::konst(0));
          add_ineq({{vm, Ctx::konst(1)}, {pre, Ctx::konst(-1)}}, ctx_.neg(l));
          break;
        }
        default:
          throw Error("lp encoder: unexpected encoding");
      }
    }
  }

  // Equality (or, for the interval encoding, constant-bound) rows of a
  // solved linear layer, making it available to deeper programs.
  void commit_linear(int i) {
    int blk = (i - 1) / 2;
    int n = pv_.rows(blk);
    vmap_[static_cast<size_t>(i)].resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
      int v = new_var(lo_[static_cast<size_t>(i)][static_cast<size_t>(j)],
                      hi_[static_cast<size_t>(i)][static_cast<size_t>(j)]);
      vmap_[static_cast<size_t>(i)][static_cast<size_t>(j)] = v;
      if (enc_ == LpEncoding::kBoxLp) continue;  // the box is the whole encoding
      add_eq(linear_terms(blk, i - 1, j, v), ctx_.neg(pv_.bias(blk, j)));
    }
  }

  // sum_k W[j,k] * x_{i-1,k} - x_target = -b[j], with stable aliases folded.
  std::vector<MetaTerm> linear_terms(int blk, int prev_layer, int j, int target_var) {
    std::vector<MetaTerm> terms;
    terms.reserve(static_cast<size_t>(pv_.cols(blk)) + 1);
    for (int c = 0; c < pv_.cols(blk); ++c) {
      int v = vmap_[static_cast<size_t>(prev_layer)][static_cast<size_t>(c)];
      if (v == kZeroVar) continue;
      terms.push_back({v, pv_.weight(blk, j, c)});
    }
    terms.push_back({target_var, Ctx::konst(-1)});
    return terms;
  }

  void solve_linear(int i, bool upper_only, std::optional<double> stop_when_above) {
    int blk = (i - 1) / 2;
    int n = pv_.rows(blk);
    lo_[static_cast<size_t>(i)].assign(static_cast<size_t>(n), Ctx::konst(0));
    hi_[static_cast<size_t>(i)].assign(static_cast<size_t>(n), Ctx::konst(0));

    // Sound starting box for the target variable.
    std::vector<Sref> tlo(static_cast<size_t>(n)), thi(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
      affine_interval(blk, j, lo_[static_cast<size_t>(i - 1)], hi_[static_cast<size_t>(i - 1)],
                      tlo[static_cast<size_t>(j)], thi[static_cast<size_t>(j)]);

    struct Task {
      int j;
      bool maximize;
    };
    std::vector<Task> tasks;
    for (int j = 0; j < n; ++j) {
      tasks.push_back({j, true});
      if (!upper_only) tasks.push_back({j, false});
    }
    std::vector<Sref> results(tasks.size());
    std::vector<LpStats> task_stats(tasks.size());

    auto run_task = [&](int t) {
      const Task& task = tasks[static_cast<size_t>(t)];
      results[static_cast<size_t>(t)] =
          solve_one(blk, i, task.j, tlo[static_cast<size_t>(task.j)], thi[static_cast<size_t>(task.j)],
                    task.maximize, &task_stats[static_cast<size_t>(t)]);
    };

    if (ctx_.tape() == nullptr && !stop_when_above) {
      parallel_for(static_cast<int>(tasks.size()), run_task);
    } else if (stop_when_above) {
      // Sequential with early exit: one hopeless bound settles certification.
      bool stopped = false;
      for (int t = 0; t < static_cast<int>(tasks.size()); ++t) {
        if (stopped) {
          results[static_cast<size_t>(t)] = Ctx::konst(kInf);
          continue;
        }
        run_task(t);
        if (tasks[static_cast<size_t>(t)].maximize && results[static_cast<size_t>(t)].v >= *stop_when_above)
          stopped = true;
      }
    } else {
      for (int t = 0; t < static_cast<int>(tasks.size()); ++t) run_task(t);
    }

    for (size_t t = 0; t < tasks.size(); ++t) {
      (tasks[t].maximize ? hi_ : lo_)[static_cast<size_t>(i)][static_cast<size_t>(tasks[t].j)] = results[t];
      if (stats_) {
        stats_->solves += task_stats[t].solves;
        stats_->pivots += task_stats[t].pivots;
        stats_->degenerate += task_stats[t].degenerate;
      }
    }
    if (upper_only)
      for (int j = 0; j < n; ++j) lo_[static_cast<size_t>(i)][static_cast<size_t>(j)] = Ctx::konst(-kInf);
  }

  Sref solve_one(int blk, int layer, int j, Sref tlo, Sref thi, bool maximize, LpStats* stats) {
    LpProblem p = base_;
    int target = p.add_var(tlo.v, thi.v);
    MetaRow trow;
    if (enc_ != LpEncoding::kBoxLp) {
      trow.terms = linear_terms(blk, layer - 1, j, target);
      trow.rhs = ctx_.neg(pv_.bias(blk, j));
      p.eq.push_back(to_row(trow));
    }
    p.objective_var = target;
    p.maximize = maximize;

    LpSolution sol = simplex_solve(p);
    if (stats) {
      ++stats->solves;
      stats->pivots += sol.pivots;
      if (sol.degenerate) ++stats->degenerate;
    }

    Sref out{sol.value, {}};
    if (ctx_.tape()) out.node = envelope_node(p, sol, trow, tlo, thi, maximize);
    return out;
  }

  // Attaches the optimum to the tape: the partial of the value w.r.t. each
  // parameter-dependent coefficient, right-hand side, or bound follows the
  // optimal multipliers of the Lagrangian.
  Var envelope_node(const LpProblem& p, const LpSolution& sol, const MetaRow& trow, Sref tlo, Sref thi,
                    bool maximize) {
    double sgn = maximize ? -1.0 : 1.0;
    std::map<int, std::pair<Var, double>> parts;
    auto addp = [&](const Var& n, double w) {
      if (!n.valid() || w == 0.0) return;
      auto [it, fresh] = parts.try_emplace(n.id, n, w);
      if (!fresh) it->second.second += w;
    };

    for (size_t k = 0; k < eq_meta_.size(); ++k) {
      double mu = sol.eq_dual[k];
      for (const MetaTerm& t : eq_meta_[k].terms)
        addp(t.coeff.node, sgn * mu * sol.x[static_cast<size_t>(t.var)]);
      addp(eq_meta_[k].rhs.node, -sgn * mu);
    }
    if (!trow.terms.empty()) {
      double mu = sol.eq_dual.back();
      for (const MetaTerm& t : trow.terms) addp(t.coeff.node, sgn * mu * sol.x[static_cast<size_t>(t.var)]);
      addp(trow.rhs.node, -sgn * mu);
    }
    for (size_t k = 0; k < ineq_meta_.size(); ++k) {
      double lam = sol.ineq_dual[k];
      for (const MetaTerm& t : ineq_meta_[k].terms)
        addp(t.coeff.node, sgn * lam * sol.x[static_cast<size_t>(t.var)]);
      addp(ineq_meta_[k].rhs.node, -sgn * lam);
    }
    for (size_t v = 0; v < vlo_.size(); ++v) {
      addp(vlo_[v].node, sgn * sol.lo_dual[v]);
      addp(vhi_[v].node, -sgn * sol.hi_dual[v]);
    }
    int target = p.num_vars - 1;
    addp(tlo.node, sgn * sol.lo_dual[static_cast<size_t>(target)]);
    addp(thi.node, -sgn * sol.hi_dual[static_cast<size_t>(target)]);

    std::vector<std::pair<Var, double>> partials;
    partials.reserve(parts.size());
    for (auto& [id, vw] : parts) partials.push_back(vw);
    return ctx_.tape()->opaque_scalar(sol.value, std::move(partials));
  }

  int new_var(Sref lo, Sref hi) {
    vlo_.push_back(lo);
    vhi_.push_back(hi);
    return base_.add_var(lo.v, hi.v);
  }

  LpProblem::Row to_row(const MetaRow& m) {
    LpProblem::Row r;
    r.terms.reserve(m.terms.size());
    for (const MetaTerm& t : m.terms) r.terms.push_back({t.var, t.coeff.v});
    r.rhs = m.rhs.v;
    return r;
  }

  void add_eq(std::vector<MetaTerm> terms, Sref rhs) {
    MetaRow m{std::move(terms), rhs};
    base_.eq.push_back(to_row(m));
    eq_meta_.push_back(std::move(m));
  }

  void add_ineq(std::vector<MetaTerm> terms, Sref rhs) {
    MetaRow m{std::move(terms), rhs};
    base_.ineq.push_back(to_row(m));
    ineq_meta_.push_back(std::move(m));
  }

  LpEncoding enc_;
  ParamView pv_;
  const InputBox& box_;
  int L_ = 0;
  LpProblem base_;
  std::vector<MetaRow> eq_meta_, ineq_meta_;
  std::vector<Sref> vlo_, vhi_;
  std::vector<std::vector<int>> vmap_;
  LpStats* stats_ = nullptr;
};

LayerBounds to_layer_bounds(const Encoder& enc) {
  LayerBounds out;
  for (size_t i = 0; i < enc.lo_.size(); ++i) {
    Tensor lo({static_cast<int>(enc.lo_[i].size())});
    Tensor hi({static_cast<int>(enc.hi_[i].size())});
    for (size_t j = 0; j < enc.lo_[i].size(); ++j) {
      lo[static_cast<int>(j)] = enc.lo_[i][j].v;
      hi[static_cast<int>(j)] = enc.hi_[i][j].v;
    }
    out.lower.push_back(std::move(lo));
    out.upper.push_back(std::move(hi));
  }
  return out;
}

}  // namespace

std::string lp_encoding_name(LpEncoding e) {
  switch (e) {
    case LpEncoding::kTriangle: return "triangle";
    case LpEncoding::kParallelogram: return "parallelogram";
    case LpEncoding::kBoxLp: return "box-lp";
    case LpEncoding::kDeepZLp: return "deepz-lp";
    case LpEncoding::kCrownLp: return "crown-lp";
  }
  throw Error("unknown lp encoding");
}

LpEncoding lp_encoding_from_name(const std::string& name) {
  for (LpEncoding e : {LpEncoding::kTriangle, LpEncoding::kParallelogram, LpEncoding::kBoxLp,
                       LpEncoding::kDeepZLp, LpEncoding::kCrownLp})
    if (lp_encoding_name(e) == name) return e;
  throw Error("unknown lp encoding: " + name);
}

LayerBounds lp_bounds(const Network& net, LpEncoding enc, const InputBox& box, LpStats* stats) {
  if (box.lo.size() != net.input_dim()) throw Error("lp_bounds: box does not match input dimension");
  Encoder e(enc, ParamView(net), Ctx(nullptr), box);
  e.run(false, {}, stats);
  return to_layer_bounds(e);
}

TapedLayerBounds lp_bounds(Tape& tape, const TapedNetwork& tnet, LpEncoding enc, const InputBox& box,
                           LpStats* stats) {
  Encoder e(enc, ParamView(tape, tnet), Ctx(&tape), box);
  e.run(false, {}, stats);
  TapedLayerBounds out;
  for (size_t i = 0; i < e.lo_.size(); ++i) {
    std::vector<Var> lo, hi;
    for (size_t j = 0; j < e.lo_[i].size(); ++j) {
      lo.push_back(e.ctx_.materialize(e.lo_[i][j]));
      hi.push_back(e.ctx_.materialize(e.hi_[i][j]));
    }
    out.lower.push_back(tape.pack(lo));
    out.upper.push_back(tape.pack(hi));
  }
  return out;
}

Tensor lp_final_upper(const Network& net, LpEncoding enc, const InputBox& box,
                      std::optional<double> stop_when_above, LpStats* stats) {
  Encoder e(enc, ParamView(net), Ctx(nullptr), box);
  e.run(true, stop_when_above, stats);
  const auto& top = e.hi_.back();
  Tensor out({static_cast<int>(top.size())});
  for (size_t j = 0; j < top.size(); ++j) out[static_cast<int>(j)] = top[j].v;
  return out;
}

LpRowSet encode_layer(LpEncoding enc, int layer, const Network& net, const LayerBounds& prior,
                      int aux_var_start) {
  if (layer < 1 || layer > net.num_layers()) throw Error("encode_layer: layer out of range");
  if (static_cast<int>(prior.lower.size()) < layer)
    throw Error("encode_layer: prior bounds missing for layers below " + std::to_string(layer));

  std::vector<int> base(static_cast<size_t>(layer) + 1, 0);
  for (int i = 1; i <= layer; ++i) base[static_cast<size_t>(i)] = base[static_cast<size_t>(i - 1)] + net.layer_dim(i - 1);
  auto var = [&](int l, int j) { return base[static_cast<size_t>(l)] + j; };

  LpRowSet out;
  if (!Network::is_relu_layer(layer)) {
    const Network::Linear& blk = net.linear_at(layer);
    for (int j = 0; j < blk.weight.rows(); ++j) {
      if (enc == LpEncoding::kBoxLp) {
        double ub = blk.bias[j], lb = blk.bias[j];
        for (int c = 0; c < blk.weight.cols(); ++c) {
          double w = blk.weight.at(j, c);
          double l = prior.lower[static_cast<size_t>(layer - 1)][c];
          double u = prior.upper[static_cast<size_t>(layer - 1)][c];
          ub += w * (w >= 0 ? u : l);
          lb += w * (w >= 0 ? l : u);
        }
        out.ineq.push_back({{{var(layer, j), 1.0}}, ub});
        out.ineq.push_back({{{var(layer, j), -1.0}}, -lb});
        continue;
      }
      LpProblem::Row r;
      for (int c = 0; c < blk.weight.cols(); ++c) r.terms.push_back({var(layer - 1, c), blk.weight.at(j, c)});
      r.terms.push_back({var(layer, j), -1.0});
      r.rhs = -blk.bias[j];
      out.eq.push_back(std::move(r));
    }
    return out;
  }

  for (int j = 0; j < net.layer_dim(layer); ++j) {
    double l = prior.lower[static_cast<size_t>(layer - 1)][j];
    double u = prior.upper[static_cast<size_t>(layer - 1)][j];
    int x = var(layer, j), pre = var(layer - 1, j);
    if (enc == LpEncoding::kBoxLp) {
      out.ineq.push_back({{{x, 1.0}}, std::max(0.0, u)});
      out.ineq.push_back({{{x, -1.0}}, -std::max(0.0, l)});
      continue;
    }
    ReluCase c = relu_case(l, u);
    if (c == ReluCase::kNeg) {
      out.eq.push_back({{{x, 1.0}}, 0.0});
      continue;
    }
    if (c == ReluCase::kPos) {
      out.eq.push_back({{{x, 1.0}, {pre, -1.0}}, 0.0});
      continue;
    }
    double lambda = u / (u - l);
    switch (enc) {
      case LpEncoding::kDeepZLp: {
        double mu = -0.5 * l * u / (u - l);
        int e = aux_var_start + out.aux_vars;
        ++out.aux_vars;
        out.aux_bounds.push_back({-1.0, 1.0});
        out.eq.push_back({{{x, 1.0}, {pre, -lambda}, {e, -mu}}, mu});
        break;
      }
      case LpEncoding::kCrownLp:
        out.ineq.push_back({{{x, 1.0}, {pre, -lambda}}, -lambda * l});
        if (-l >= u)
          out.ineq.push_back({{{x, -1.0}}, 0.0});
        else
          out.ineq.push_back({{{pre, 1.0}, {x, -1.0}}, 0.0});
        break;
      case LpEncoding::kTriangle:
        out.ineq.push_back({{{x, -1.0}}, 0.0});
        out.ineq.push_back({{{pre, 1.0}, {x, -1.0}}, 0.0});
        out.ineq.push_back({{{x, 1.0}, {pre, -lambda}}, -lambda * l});
        break;
      case LpEncoding::kParallelogram:
        out.ineq.push_back({{{x, -1.0}}, 0.0});
        out.ineq.push_back({{{pre, 1.0}, {x, -1.0}}, 0.0});
        out.ineq.push_back({{{x, 1.0}}, u});
        out.ineq.push_back({{{x, 1.0}, {pre, -1.0}}, -l});
        break;
      default:
        throw Error("encode_layer: unexpected encoding");
    }
  }
  return out;
}

double lp_value_gradient(const LpProblem& p, const LpSolution& s, const LpDataGrad& g, bool* degenerate) {
  if (degenerate) *degenerate = s.degenerate;
  double sgn = p.maximize ? -1.0 : 1.0;
  double acc = 0.0;
  auto contract = [&](const std::vector<LpProblem::Row>& rows, const std::vector<double>& duals) {
    for (size_t k = 0; k < rows.size(); ++k) {
      double m = duals[k];
      if (m == 0.0) continue;
      double dot = 0.0;
      for (auto [v, c] : rows[k].terms) dot += c * s.x[static_cast<size_t>(v)];
      acc += sgn * m * (dot - rows[k].rhs);
    }
  };
  if (!g.d_eq.empty()) contract(g.d_eq, s.eq_dual);
  if (!g.d_ineq.empty()) contract(g.d_ineq, s.ineq_dual);
  for (size_t j = 0; j < g.d_lo.size(); ++j) acc += sgn * s.lo_dual[j] * g.d_lo[j];
  for (size_t j = 0; j < g.d_hi.size(); ++j) acc -= sgn * s.hi_dual[j] * g.d_hi[j];
  return acc;
}

}  // namespace certlab
