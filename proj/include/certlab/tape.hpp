#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "certlab/tensor.hpp"

namespace certlab {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives
/// and is not cleared.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

enum class Op : uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kSMul,      // x * c
  kSAdd,      // x + c
  kMatVec,    // M (m x n) * v (n)
  kMatMul,    // A (m x k) * B (k x n)
  kScaleCols, // out[r][j] = M[r][j] * v[j]
  kRelu,
  kAbs,
  kMax,        // elementwise max(a, b)
  kMin,        // elementwise min(a, b)
  kSelectSign, // s >= 0 ? a : b, elementwise
  kSum,        // vector -> scalar
  kDot,        // vectors -> scalar
  kLogSumExp,  // vector -> scalar
  kPack,       // scalars -> vector
  kIndex,      // vector -> scalar at fixed position
  kOpaque,     // externally computed scalar with recorded partials
};

/// Reverse-mode autodiff over a straight-line trace of tensor primitives.
///
/// Every operation records its operands and forward value; backward() visits
/// records in reverse exactly once. Piecewise primitives use fixed breakpoint
/// conventions: relu'(0) = 0, sign selection and min/max ties resolve to the
/// first (non-negative) branch, abs'(0) = +1.
///
/// A finished tape is immutable apart from backward()'s adjoint buffers and
/// may be read from several threads; concurrent building requires one tape
/// per thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor v);
  Var constant(Tensor v);
  Var scalar(double v) { return constant(Tensor::scalar(v)); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  Var smul(Var a, double c);
  Var sadd(Var a, double c);
  Var matvec(Var m, Var v);
  Var matmul(Var a, Var b);
  Var scale_cols(Var m, Var v);
  Var relu(Var a);
  Var abs(Var a);
  Var maximum(Var a, Var b);
  Var minimum(Var a, Var b);
  Var select_sign(Var s, Var a, Var b);
  Var sum(Var a);
  Var dot(Var a, Var b);
  Var log_sum_exp(Var a);
  Var pack(std::span<const Var> scalars);
  Var index(Var v, int i);

  /// Scalar computed outside the tape (e.g. an LP optimum) with explicit
  /// partial derivatives w.r.t. existing nodes.
  Var opaque_scalar(double value, std::vector<std::pair<Var, double>> partials);

  const Tensor& value(Var v) const { return node(v.id).val; }
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Accumulates d(output)/d(node) for every node into the adjoint buffers.
  /// output must be a scalar on this tape.
  void backward(Var output);

  /// Adjoint of a node after backward(). Zero tensor if untouched.
  Tensor adjoint(Var v) const;

  /// Recomputes all non-leaf values from the recorded program and compares
  /// with the stored ones. Returns true when every value matches bit-exactly.
  bool replay_matches() const;

  void clear();

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    int c = -1;      // third operand (select)
    double sc = 0.0; // scalar parameter / index
    std::vector<int> extra;
    std::vector<double> extra_w;
    Tensor val;
  };

  const Node& node(int id) const;
  int push(Node n);
  Var check2(Var a, Var b, const char* opname);
  static void eval_node(const Node& n, const std::vector<Node>& nodes, Tensor& out);

  std::vector<Node> nodes_;
  std::vector<Tensor> adjoints_;
};

/// d(output)/d(leaf): reads the adjoint accumulated by tape.backward(output).
Tensor gradient(Tape& tape, Var output, Var leaf);

/// Max over coordinates of |g_ad - g_fd| / max(1, |g_fd|) against central
/// finite differences with step h, over every coordinate of every input.
/// Non-finite coordinates count as +inf. The caller keeps inputs away from
/// breakpoints of expr; this only reports.
double finite_diff_check(const std::function<Var(Tape&, std::span<const Var>)>& expr, std::vector<Tensor> inputs,
                         double h);

}  // namespace certlab
