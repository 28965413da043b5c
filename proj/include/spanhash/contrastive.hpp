#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spanhash/chart.hpp"
#include "spanhash/code.hpp"
#include "spanhash/tape.hpp"

namespace spanhash::contrastive {

struct ContrastiveError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyNegativeSet : ContrastiveError {
  using ContrastiveError::ContrastiveError;
};

// Instance selection: the negative term ranges over N∪P or N∪S, the positive
// term is the self similarity, the mean over P, or the soft max over P.
enum class NegRule { kAll, kSelfOnly };
enum class PosRule { kSelf, kMean, kMax };

struct Strategy {
  NegRule neg = NegRule::kSelfOnly;
  PosRule pos = PosRule::kMax;

  bool operator==(const Strategy&) const = default;
};

// self | sup | sup-max | hash | hash-mean | max
Strategy strategy_from_name(const std::string& name);
std::string strategy_name(Strategy st);

// Exact logsumexp form of the loss for one instance given its similarities
// to every candidate (the candidate at position i is the instance's own
// cross-view twin). Scalar reference used by tests and verification.
double loss_scalar(std::size_t i, std::span<const double> sims,
                   std::span<const int> labels, Strategy st);

// Code from bit marginals: bit k is +1 iff mu_k(+1) > mu_k(-1).
template <class S>
Code binarize(const chart::MarginalChart<S>& mc, int l, int r) {
  Code c(0, mc.k);
  for (int k = 1; k <= mc.k; ++k) {
    double plus = chart::detail::value_of(mc.bit(l, r, k, +1));
    double minus = chart::detail::value_of(mc.bit(l, r, k, -1));
    if (plus > minus) c.set_bit(k, +1);
  }
  return c;
}

// s(i,j) = (1/K) sum_k mu_k(l_i, r_i, c_j^k).
double similarity(const chart::MarginalChart<double>& mc, int l, int r, const Code& c);

struct TargetSpan {
  int l = 0;
  int r = 0;
  int label_id = 0;
};

// One sentence's contribution to a two-view batch: marginal charts for both
// views plus the binarized codes of its target spans under each view.
struct BatchSentence {
  std::vector<TargetSpan> targets;
  const chart::MarginalChart<grad::Var>* mu_view1 = nullptr;
  const chart::MarginalChart<grad::Var>* mu_view2 = nullptr;
  std::vector<Code> codes_view1;
  std::vector<Code> codes_view2;
};

// Mean over all target spans of loss(i, mu^1, codes^2) + loss(i, mu^2,
// codes^1); candidates are the target spans of the opposite view across the
// whole batch. Throws EmptyNegativeSet on single-label (degenerate) batches.
grad::Var batch_loss(grad::Tape& tape, std::span<const BatchSentence> batch,
                     Strategy st, double temperature = 1.0);

}  // namespace spanhash::contrastive
