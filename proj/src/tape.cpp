#include "spanhash/tape.hpp"

#include <algorithm>

namespace spanhash::grad {

const char* Tape::op_name(std::uint32_t id) const {
  switch (ops_[id].kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kAffine: return "affine";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSum: return "sum";
    case OpKind::kWeightedSum: return "weighted_sum";
    case OpKind::kDot: return "dot";
    case OpKind::kLogSumExp: return "logsumexp";
    case OpKind::kLogSumExpW: return "logsumexp_off";
    case OpKind::kMax: return "max";
  }
  return "?";
}

Var Tape::sum(std::span<const Var> xs) {
  if (xs.empty()) throw EmptyReduction();
  std::uint32_t off = put_args(xs);
  double v = 0.0;
  for (Var x : xs) v += val_[x.id];
  return push(OpKind::kSum, off, static_cast<std::uint32_t>(xs.size()), 0, v);
}

Var Tape::mean(std::span<const Var> xs) {
  Var s = sum(xs);
  return scale(s, 1.0 / static_cast<double>(xs.size()));
}

Var Tape::weighted_sum(std::span<const Var> xs, std::span<const double> w) {
  if (xs.empty()) throw EmptyReduction();
  std::uint32_t off = put_args(xs);
  std::uint32_t d = static_cast<std::uint32_t>(daux_.size());
  daux_.insert(daux_.end(), w.begin(), w.end());
  double v = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) v += w[i] * val_[xs[i].id];
  return push(OpKind::kWeightedSum, off, static_cast<std::uint32_t>(xs.size()), d, v);
}

Var Tape::dot(std::span<const Var> a, std::span<const Var> b) {
  if (a.empty() || a.size() != b.size()) throw EmptyReduction();
  std::uint32_t off = static_cast<std::uint32_t>(args_.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    args_.push_back(a[i].id);
    args_.push_back(b[i].id);
  }
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) v += val_[a[i].id] * val_[b[i].id];
  return push(OpKind::kDot, off, static_cast<std::uint32_t>(a.size()), 0, v);
}

Var Tape::logsumexp(std::span<const Var> xs) {
  if (xs.empty()) throw EmptyReduction();
  std::uint32_t off = put_args(xs);
  double m = val_[xs[0].id];
  for (Var x : xs) m = std::max(m, val_[x.id]);
  double s = 0.0;
  for (Var x : xs) s += std::exp(val_[x.id] - m);
  return push(OpKind::kLogSumExp, off, static_cast<std::uint32_t>(xs.size()), 0,
              m + std::log(s));
}

Var Tape::logsumexp_off(std::span<const Var> xs, std::span<const double> off_in) {
  if (xs.empty()) throw EmptyReduction();
  std::uint32_t off = put_args(xs);
  std::uint32_t d = static_cast<std::uint32_t>(daux_.size());
  daux_.insert(daux_.end(), off_in.begin(), off_in.end());
  double m = val_[xs[0].id] + off_in[0];
  for (std::size_t i = 0; i < xs.size(); ++i)
    m = std::max(m, val_[xs[i].id] + off_in[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    s += std::exp(val_[xs[i].id] + off_in[i] - m);
  return push(OpKind::kLogSumExpW, off, static_cast<std::uint32_t>(xs.size()), d,
              m + std::log(s));
}

Var Tape::max(std::span<const Var> xs) {
  if (xs.empty()) throw EmptyReduction();
  std::uint32_t off = put_args(xs);
  double m = val_[xs[0].id];
  for (Var x : xs) m = std::max(m, val_[x.id]);
  return push(OpKind::kMax, off, static_cast<std::uint32_t>(xs.size()), 0, m);
}

void Tape::backward(Var loss) {
  grad_.assign(val_.size(), 0.0);
  grad_[loss.id] = 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    const Op& op = ops_[i];
    const double g = grad_[i];
    if (g == 0.0) continue;
    if (!std::isfinite(g)) throw NonFiniteGradient(i);
    switch (op.kind) {
      case OpKind::kLeaf:
        break;
      case OpKind::kAdd:
        grad_[op.a] += g;
        grad_[op.b] += g;
        break;
      case OpKind::kSub:
        grad_[op.a] += g;
        grad_[op.b] -= g;
        break;
      case OpKind::kMul:
        grad_[op.a] += g * val_[op.b];
        grad_[op.b] += g * val_[op.a];
        break;
      case OpKind::kDiv:
        grad_[op.a] += g / val_[op.b];
        grad_[op.b] -= g * val_[i] / val_[op.b];
        break;
      case OpKind::kAffine:
        grad_[op.a] += g * daux_[op.c];
        break;
      case OpKind::kExp:
        grad_[op.a] += g * val_[i];
        break;
      case OpKind::kLog:
        grad_[op.a] += g / val_[op.a];
        break;
      case OpKind::kSigmoid:
        grad_[op.a] += g * val_[i] * (1.0 - val_[i]);
        break;
      case OpKind::kSoftplus:
        grad_[op.a] += g * sigmoid_k(val_[op.a]);
        break;
      case OpKind::kTanh:
        grad_[op.a] += g * (1.0 - val_[i] * val_[i]);
        break;
      case OpKind::kSum:
        for (std::uint32_t j = 0; j < op.b; ++j) grad_[args_[op.a + j]] += g;
        break;
      case OpKind::kWeightedSum:
        for (std::uint32_t j = 0; j < op.b; ++j)
          grad_[args_[op.a + j]] += g * daux_[op.c + j];
        break;
      case OpKind::kDot:
        for (std::uint32_t j = 0; j < op.b; ++j) {
          std::uint32_t x = args_[op.a + 2 * j];
          std::uint32_t y = args_[op.a + 2 * j + 1];
          grad_[x] += g * val_[y];
          grad_[y] += g * val_[x];
        }
        break;
      case OpKind::kLogSumExp:
        for (std::uint32_t j = 0; j < op.b; ++j) {
          std::uint32_t x = args_[op.a + j];
          grad_[x] += g * std::exp(val_[x] - val_[i]);
        }
        break;
      case OpKind::kLogSumExpW:
        for (std::uint32_t j = 0; j < op.b; ++j) {
          std::uint32_t x = args_[op.a + j];
          grad_[x] += g * std::exp(val_[x] + daux_[op.c + j] - val_[i]);
        }
        break;
      case OpKind::kMax: {
        // Ties send the whole subgradient to the first maximal element.
        for (std::uint32_t j = 0; j < op.b; ++j) {
          std::uint32_t x = args_[op.a + j];
          if (val_[x] == val_[i]) {
            grad_[x] += g;
            break;
          }
        }
        break;
      }
    }
  }
}

double logsumexp(std::span<const double> xs) {
  if (xs.empty()) throw EmptyReduction();
  double m = xs[0];
  for (double x : xs) m = std::max(m, x);
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

double vmax(std::span<const double> xs) {
  if (xs.empty()) throw EmptyReduction();
  double m = xs[0];
  for (double x : xs) m = std::max(m, x);
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) v += a[i] * b[i];
  return v;
}

GradCheckReport grad_check(
    const std::function<Var(Tape&, std::span<const Var>)>& builder,
    std::span<const double> params, double h, double tol) {
  // Reverse pass.
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (double p : params) leaves.push_back(tape.leaf(p));
  Var out = builder(tape, leaves);
  tape.backward(out);
  std::vector<double> analytic(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    analytic[i] = tape.gradient(leaves[i]);

  auto eval = [&](std::span<const double> p) {
    Tape t;
    std::vector<Var> ls;
    ls.reserve(p.size());
    for (double x : p) ls.push_back(t.leaf(x));
    return builder(t, ls).value();
  };

  GradCheckReport report;
  report.entries.reserve(params.size());
  std::vector<double> work(params.begin(), params.end());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = work[i];
    work[i] = saved + h;
    double up = eval(work);
    work[i] = saved - h;
    double down = eval(work);
    work[i] = saved;
    double numeric = (up - down) / (2.0 * h);
    double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    double rel = std::abs(analytic[i] - numeric) / denom;
    report.entries.push_back({i, analytic[i], numeric, rel});
    if (rel >= report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_index = i;
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace spanhash::grad
