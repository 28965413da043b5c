#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spanhash/code.hpp"
#include "spanhash/tape.hpp"

namespace spanhash::chart {

struct ChartError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MarginalOutOfRange : ChartError {
  using ChartError::ChartError;
};
struct TooLarge : ChartError {
  using ChartError::ChartError;
};

// Dense triangular span indexing over 0 <= l < r <= n.
inline int span_index(int l, int r) { return r * (r - 1) / 2 + l; }
inline int num_spans(int n) { return n * (n + 1) / 2; }

// Per-span per-bit scores for the +1 assignment; the -1 score is fixed at 0.
template <class S>
struct ScoreChart {
  int n = 0;
  int k = 0;
  std::vector<S> g;  // [span_index(l,r) * k + (bit-1)]

  ScoreChart() = default;
  ScoreChart(int n_, int k_) : n(n_), k(k_), g(static_cast<std::size_t>(num_spans(n_) * k_)) {}

  S& at(int l, int r, int bit) {
    return g[static_cast<std::size_t>(span_index(l, r) * k + (bit - 1))];
  }
  const S& at(int l, int r, int bit) const {
    return g[static_cast<std::size_t>(span_index(l, r) * k + (bit - 1))];
  }
};

template <class S>
struct InsideChart {
  int n = 0;
  std::vector<S> b;       // log label weight per span: sum_k softplus(g_k)
  std::vector<S> inside;  // I(l,r)
  S log_z;

  const S& at(int l, int r) const { return inside[static_cast<std::size_t>(span_index(l, r))]; }
  const S& bit_factor(int l, int r) const { return b[static_cast<std::size_t>(span_index(l, r))]; }
};

template <class S>
struct OutsideChart {
  int n = 0;
  std::vector<S> outside;
  const S& at(int l, int r) const { return outside[static_cast<std::size_t>(span_index(l, r))]; }
};

// mu_span(l,r) plus joint bit marginals mu_bit(l,r,k,c).
template <class S>
struct MarginalChart {
  int n = 0;
  int k = 0;
  std::vector<S> mu_span;  // [span_index]
  std::vector<S> mu_bit;   // [(span_index * k + (bit-1)) * 2 + (c<0)]

  const S& span(int l, int r) const {
    return mu_span[static_cast<std::size_t>(span_index(l, r))];
  }
  const S& bit(int l, int r, int bit_k, int c) const {
    return mu_bit[static_cast<std::size_t>((span_index(l, r) * k + (bit_k - 1)) * 2 +
                                           (c < 0 ? 1 : 0))];
  }
};

struct CodedSpan {
  int l = 0;
  int r = 0;
  Code code;
};

// Binary tree with per-span codes, spans in pre-order.
struct CodedTree {
  int n = 0;
  double score = 0.0;
  std::vector<CodedSpan> spans;
};

namespace detail {
inline double make_zero(double) { return 0.0; }
inline grad::Var make_zero(grad::Var sample) { return sample.tape->constant(0.0); }
inline double value_of(double x) { return x; }
inline double value_of(grad::Var x) { return x.value(); }
}  // namespace detail

// b(l,r) = sum_k softplus(g_k(l,r,+1)): the log of the summed weight of all
// 2^K code assignments for the span.
template <class S>
S bit_factor(const ScoreChart<S>& sc, int l, int r) {
  using grad::softplus;
  S acc = softplus(sc.at(l, r, 1));
  for (int k = 2; k <= sc.k; ++k) acc = acc + softplus(sc.at(l, r, k));
  return acc;
}

// CKY inside pass over all full binary bracketings.
// I(l,l+1) = b(l,l+1); I(l,r) = b(l,r) + lse_m[I(l,m) + I(m,r)]; logZ = I(0,n).
template <class S>
InsideChart<S> inside(const ScoreChart<S>& sc) {
  const int n = sc.n;
  InsideChart<S> ic;
  ic.n = n;
  ic.b.reserve(static_cast<std::size_t>(num_spans(n)));
  ic.inside.resize(static_cast<std::size_t>(num_spans(n)), S{});
  // (r asc, l asc) iteration coincides with span_index order.
  for (int r = 1; r <= n; ++r)
    for (int l = 0; l < r; ++l)
      ic.b.push_back(bit_factor(sc, l, r));

  std::vector<S> splits;
  for (int width = 1; width <= n; ++width) {
    for (int l = 0; l + width <= n; ++l) {
      const int r = l + width;
      const S& b = ic.b[static_cast<std::size_t>(span_index(l, r))];
      if (width == 1) {
        ic.inside[static_cast<std::size_t>(span_index(l, r))] = b;
        continue;
      }
      splits.clear();
      for (int m = l + 1; m < r; ++m)
        splits.push_back(ic.at(l, m) + ic.at(m, r));
      using grad::logsumexp;
      ic.inside[static_cast<std::size_t>(span_index(l, r))] =
          b + logsumexp(std::span<const S>(splits));
    }
  }
  ic.log_z = ic.at(0, n);
  return ic;
}

// Explicit outside recursion; O(0,n) = 0 and
// O(l,r) = lse( r'>r: O(l,r') + b(l,r') + I(r,r') ;  l'<l: O(l',r) + b(l',r) + I(l',l) ).
template <class S>
OutsideChart<S> outside(const InsideChart<S>& ic, const ScoreChart<S>& sc) {
  const int n = sc.n;
  OutsideChart<S> oc;
  oc.n = n;
  oc.outside.resize(static_cast<std::size_t>(num_spans(n)),
                    detail::make_zero(ic.log_z));
  std::vector<S> terms;
  for (int width = n; width >= 1; --width) {
    for (int l = 0; l + width <= n; ++l) {
      const int r = l + width;
      if (l == 0 && r == n) {
        oc.outside[static_cast<std::size_t>(span_index(l, r))] =
            detail::make_zero(ic.log_z);
        continue;
      }
      terms.clear();
      for (int rp = r + 1; rp <= n; ++rp)
        terms.push_back(oc.at(l, rp) + ic.bit_factor(l, rp) + ic.at(r, rp));
      for (int lp = 0; lp < l; ++lp)
        terms.push_back(oc.at(lp, r) + ic.bit_factor(lp, r) + ic.at(lp, l));
      using grad::logsumexp;
      oc.outside[static_cast<std::size_t>(span_index(l, r))] =
          logsumexp(std::span<const S>(terms));
    }
  }
  return oc;
}

// mu_span(l,r) = exp(I + O - logZ). Values outside [-1e-9, 1 + 1e-9] signal a
// recursion bug and raise MarginalOutOfRange.
template <class S>
std::vector<S> span_marginals(const InsideChart<S>& ic, const OutsideChart<S>& oc) {
  const int n = ic.n;
  std::vector<S> mu;
  mu.reserve(static_cast<std::size_t>(num_spans(n)));
  for (int r = 1; r <= n; ++r) {
    for (int l = 0; l < r; ++l) {
      using grad::exp;
      using std::exp;
      S m = exp(ic.at(l, r) + oc.at(l, r) - ic.log_z);
      double v = detail::value_of(m);
      if (v < -1e-9 || v > 1.0 + 1e-9)
        throw MarginalOutOfRange("mu(" + std::to_string(l) + "," + std::to_string(r) +
                                 ") = " + std::to_string(v));
      mu.push_back(m);
    }
  }
  return mu;
}

// mu_bit(l,r,k,+1) = mu_span * sigmoid(g_k); the -1 side is the exact
// complement mu_span - mu_bit(+1), so the two always sum to mu_span.
template <class S>
MarginalChart<S> bit_marginals(const std::vector<S>& mu_span, const ScoreChart<S>& sc) {
  MarginalChart<S> mc;
  mc.n = sc.n;
  mc.k = sc.k;
  mc.mu_span = mu_span;
  mc.mu_bit.reserve(static_cast<std::size_t>(num_spans(sc.n) * sc.k * 2));
  for (int r = 1; r <= sc.n; ++r) {
    for (int l = 0; l < r; ++l) {
      const S& mu = mu_span[static_cast<std::size_t>(span_index(l, r))];
      for (int k = 1; k <= sc.k; ++k) {
        using grad::sigmoid;
        S plus = mu * sigmoid(sc.at(l, r, k));
        S minus = mu - plus;
        mc.mu_bit.push_back(plus);
        mc.mu_bit.push_back(minus);
      }
    }
  }
  return mc;
}

template <class S>
MarginalChart<S> marginals(const ScoreChart<S>& sc) {
  InsideChart<S> ic = inside(sc);
  OutsideChart<S> oc = outside(ic, sc);
  return bit_marginals(span_marginals(ic, oc), sc);
}

// Extracts plain values from a Var chart (for decoding and diagnostics).
ScoreChart<double> values_of(const ScoreChart<grad::Var>& sc);

// Max-semiring CKY with per-span argmax codes: bit k is +1 iff g_k > 0, split
// ties break toward the smallest split point.
CodedTree viterbi_decode(const ScoreChart<double>& sc);

struct OracleResult {
  double log_z = 0.0;
  std::vector<double> mu_span;               // [span_index]
  std::vector<double> mu_bit;                // same layout as MarginalChart
  double best_score = 0.0;
  std::int64_t num_trees = 0;
};

// Exact enumeration over all binary trees (codes factor out per span).
// Requires n <= 6 and K <= 4.
OracleResult enumerate_oracle(const ScoreChart<double>& sc);

}  // namespace spanhash::chart
