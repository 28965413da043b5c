#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spanhash::grad {

struct GradError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyReduction : GradError {
  EmptyReduction() : GradError("reduction over an empty collection") {}
};
struct NonFiniteValue : GradError {
  std::uint32_t op_id;
  NonFiniteValue(std::uint32_t id, const std::string& op)
      : GradError("non-finite value produced by op " + op + " (node " +
                  std::to_string(id) + ")"),
        op_id(id) {}
};
struct NonFiniteGradient : GradError {
  std::uint32_t op_id;
  explicit NonFiniteGradient(std::uint32_t id)
      : GradError("non-finite gradient at node " + std::to_string(id)),
        op_id(id) {}
};

// Shared scalar kernels. The tape ops and the plain-double code paths both
// call these, so values agree bit-for-bit between the two routes.
inline double sigmoid_k(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
inline double softplus_k(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;
  double value() const;
};

// Reverse-mode scalar tape. Values are computed eagerly at node creation and
// checked finite; backward walks the records once in reverse order.
class Tape {
 public:
  enum class OpKind : std::uint8_t {
    kLeaf,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kAffine,      // m*x + c, constants in daux
    kExp,
    kLog,
    kSigmoid,
    kSoftplus,
    kTanh,
    kSum,         // args in arena
    kWeightedSum, // args in arena, weights in daux
    kDot,         // interleaved (a0,b0,a1,b1,...) pairs in arena
    kLogSumExp,
    kLogSumExpW,  // per-input additive offsets in daux
    kMax,
  };

  Var leaf(double v) { return push0(OpKind::kLeaf, v); }
  Var constant(double v) { return push0(OpKind::kLeaf, v); }

  Var add(Var a, Var b) { return push2(OpKind::kAdd, a, b, val_[a.id] + val_[b.id]); }
  Var sub(Var a, Var b) { return push2(OpKind::kSub, a, b, val_[a.id] - val_[b.id]); }
  Var mul(Var a, Var b) { return push2(OpKind::kMul, a, b, val_[a.id] * val_[b.id]); }
  Var div(Var a, Var b) { return push2(OpKind::kDiv, a, b, val_[a.id] / val_[b.id]); }

  Var affine(Var x, double m, double c) {
    std::uint32_t d = static_cast<std::uint32_t>(daux_.size());
    daux_.push_back(m);
    return push(OpKind::kAffine, x.id, 0, d, m * val_[x.id] + c);
  }
  Var neg(Var x) { return affine(x, -1.0, 0.0); }
  Var scale(Var x, double m) { return affine(x, m, 0.0); }
  Var add_const(Var x, double c) { return affine(x, 1.0, c); }

  Var exp(Var x) { return push1(OpKind::kExp, x, std::exp(val_[x.id])); }
  Var log(Var x) { return push1(OpKind::kLog, x, std::log(val_[x.id])); }
  Var sigmoid(Var x) { return push1(OpKind::kSigmoid, x, sigmoid_k(val_[x.id])); }
  Var softplus(Var x) { return push1(OpKind::kSoftplus, x, softplus_k(val_[x.id])); }
  Var tanh(Var x) { return push1(OpKind::kTanh, x, std::tanh(val_[x.id])); }

  Var sum(std::span<const Var> xs);
  Var mean(std::span<const Var> xs);
  Var weighted_sum(std::span<const Var> xs, std::span<const double> w);
  Var dot(std::span<const Var> a, std::span<const Var> b);
  Var logsumexp(std::span<const Var> xs);
  // log sum_i exp(x_i + off_i); offsets are constants (e.g. log-counts).
  Var logsumexp_off(std::span<const Var> xs, std::span<const double> off);
  Var max(std::span<const Var> xs);

  void backward(Var loss);

  double value(Var v) const { return val_[v.id]; }
  double gradient(Var v) const { return grad_[v.id]; }

  void clear() {
    val_.clear();
    grad_.clear();
    daux_.clear();
    ops_.clear();
    args_.clear();
  }
  std::size_t num_nodes() const { return ops_.size(); }

  const char* op_name(std::uint32_t id) const;

 private:
  struct Op {
    OpKind kind;
    std::uint32_t a = 0;  // operand id, or arena offset for range ops
    std::uint32_t b = 0;  // operand id, or arg count for range ops
    std::uint32_t c = 0;  // daux offset where used
  };

  Var push(OpKind k, std::uint32_t a, std::uint32_t b, std::uint32_t c, double v) {
    std::uint32_t id = static_cast<std::uint32_t>(ops_.size());
    ops_.push_back(Op{k, a, b, c});
    val_.push_back(v);
    if (!std::isfinite(v)) throw NonFiniteValue(id, op_name(id));
    return Var{this, id};
  }
  Var push0(OpKind k, double v) { return push(k, 0, 0, 0, v); }
  Var push1(OpKind k, Var x, double v) { return push(k, x.id, 0, 0, v); }
  Var push2(OpKind k, Var x, Var y, double v) { return push(k, x.id, y.id, 0, v); }

  std::uint32_t put_args(std::span<const Var> xs) {
    std::uint32_t off = static_cast<std::uint32_t>(args_.size());
    for (Var x : xs) args_.push_back(x.id);
    return off;
  }

  std::vector<double> val_, grad_, daux_;
  std::vector<Op> ops_;
  std::vector<std::uint32_t> args_;
};

inline double Var::value() const { return tape->value(*this); }

inline Var operator+(Var a, Var b) { return a.tape->add(a, b); }
inline Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
inline Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
inline Var operator/(Var a, Var b) { return a.tape->div(a, b); }
inline Var operator-(Var a) { return a.tape->neg(a); }

// ADL overloads so templated code works for both Var and double.
inline Var exp(Var x) { return x.tape->exp(x); }
inline Var log(Var x) { return x.tape->log(x); }
inline Var tanh(Var x) { return x.tape->tanh(x); }
inline Var sigmoid(Var x) { return x.tape->sigmoid(x); }
inline Var softplus(Var x) { return x.tape->softplus(x); }
inline double sigmoid(double x) { return sigmoid_k(x); }
inline double softplus(double x) { return softplus_k(x); }

inline Var logsumexp(std::span<const Var> xs) {
  if (xs.empty()) throw EmptyReduction();
  return xs[0].tape->logsumexp(xs);
}
double logsumexp(std::span<const double> xs);
inline Var vmax(std::span<const Var> xs) {
  if (xs.empty()) throw EmptyReduction();
  return xs[0].tape->max(xs);
}
double vmax(std::span<const double> xs);
inline Var dot(std::span<const Var> a, std::span<const Var> b) {
  return a[0].tape->dot(a, b);
}
double dot(std::span<const double> a, std::span<const double> b);

// Finite-difference gradient checking.
struct GradCheckEntry {
  std::size_t index;
  double analytic;
  double numeric;
  double rel_err;
};
struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  bool pass = false;
};

// builder must construct the same scalar expression for any parameter values;
// it is called once on a tape for the reverse pass and 2|params| times for
// central differences.
GradCheckReport grad_check(
    const std::function<Var(Tape&, std::span<const Var>)>& builder,
    std::span<const double> params, double h, double tol);

}  // namespace spanhash::grad
