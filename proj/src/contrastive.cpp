#include "spanhash/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace spanhash::contrastive {

Strategy strategy_from_name(const std::string& name) {
  if (name == "self") return {NegRule::kAll, PosRule::kSelf};
  if (name == "sup") return {NegRule::kAll, PosRule::kMean};
  if (name == "sup-max") return {NegRule::kAll, PosRule::kMax};
  if (name == "hash") return {NegRule::kSelfOnly, PosRule::kSelf};
  if (name == "hash-mean") return {NegRule::kSelfOnly, PosRule::kMean};
  if (name == "max") return {NegRule::kSelfOnly, PosRule::kMax};
  throw ContrastiveError("unknown loss strategy: " + name);
}

std::string strategy_name(Strategy st) {
  if (st.neg == NegRule::kAll) {
    switch (st.pos) {
      case PosRule::kSelf: return "self";
      case PosRule::kMean: return "sup";
      case PosRule::kMax: return "sup-max";
    }
  }
  switch (st.pos) {
    case PosRule::kSelf: return "hash";
    case PosRule::kMean: return "hash-mean";
    case PosRule::kMax: return "max";
  }
  return "?";
}

double loss_scalar(std::size_t i, std::span<const double> sims,
                   std::span<const int> labels, Strategy st) {
  const int y = labels[i];
  std::vector<double> neg_terms, pos;
  double pos_mean = 0.0;
  std::size_t num_pos = 0, num_neg = 0;
  for (std::size_t j = 0; j < sims.size(); ++j) {
    const bool same = labels[j] == y;
    if (same) {
      pos.push_back(sims[j]);
      pos_mean += sims[j];
      ++num_pos;
    } else {
      ++num_neg;
    }
    if (st.neg == NegRule::kAll || !same || j == i) neg_terms.push_back(sims[j]);
  }
  if (num_neg == 0) throw EmptyNegativeSet("instance has no negatives in the batch");

  double neg = grad::logsumexp(neg_terms);
  double posv = 0.0;
  switch (st.pos) {
    case PosRule::kSelf: posv = sims[i]; break;
    case PosRule::kMean: posv = pos_mean / static_cast<double>(num_pos); break;
    case PosRule::kMax: posv = grad::logsumexp(pos); break;
  }
  return neg - posv;
}

double similarity(const chart::MarginalChart<double>& mc, int l, int r, const Code& c) {
  double s = 0.0;
  for (int k = 1; k <= mc.k; ++k) s += mc.bit(l, r, k, c.bit(k));
  return s / static_cast<double>(mc.k);
}

namespace {

struct Pool {
  std::vector<std::uint32_t> codes;             // distinct, sorted
  std::vector<std::vector<int>> count;          // [label_id][code_idx]
  std::vector<int> total;                       // [code_idx]
  int size = 0;                                 // total candidates

  int code_idx(std::uint32_t bits) const {
    auto it = std::lower_bound(codes.begin(), codes.end(), bits);
    return static_cast<int>(it - codes.begin());
  }
};

Pool build_pool(std::span<const BatchSentence> batch, int view, int num_labels) {
  Pool pool;
  std::map<std::uint32_t, int> seen;
  for (const BatchSentence& s : batch) {
    const auto& codes = view == 1 ? s.codes_view1 : s.codes_view2;
    for (const Code& c : codes) seen[c.bits] = 0;
  }
  pool.codes.reserve(seen.size());
  for (auto& [bits, _] : seen) pool.codes.push_back(bits);
  pool.count.assign(static_cast<std::size_t>(num_labels),
                    std::vector<int>(pool.codes.size(), 0));
  pool.total.assign(pool.codes.size(), 0);
  for (const BatchSentence& s : batch) {
    const auto& codes = view == 1 ? s.codes_view1 : s.codes_view2;
    for (std::size_t t = 0; t < s.targets.size(); ++t) {
      int ci = pool.code_idx(codes[t].bits);
      pool.count[static_cast<std::size_t>(s.targets[t].label_id)]
                [static_cast<std::size_t>(ci)] += 1;
      pool.total[static_cast<std::size_t>(ci)] += 1;
      pool.size += 1;
    }
  }
  return pool;
}

// Similarities of one instance against the distinct pool codes, built lazily
// on the tape. The per-code value is (1/(K * tau)) * sum_k mu_k(l,r,c^k).
struct SimCache {
  grad::Tape* tape;
  const chart::MarginalChart<grad::Var>* mu;
  const Pool* pool;
  int l, r;
  double scale;
  std::vector<grad::Var> vars;
  std::vector<char> ready;

  SimCache(grad::Tape* t, const chart::MarginalChart<grad::Var>* m, const Pool* p,
           int l_, int r_, double scale_)
      : tape(t), mu(m), pool(p), l(l_), r(r_), scale(scale_),
        vars(p->codes.size()), ready(p->codes.size(), 0) {}

  grad::Var at(int ci) {
    if (!ready[static_cast<std::size_t>(ci)]) {
      Code c(pool->codes[static_cast<std::size_t>(ci)], mu->k);
      std::vector<grad::Var> picks;
      picks.reserve(static_cast<std::size_t>(mu->k));
      for (int k = 1; k <= mu->k; ++k) picks.push_back(mu->bit(l, r, k, c.bit(k)));
      vars[static_cast<std::size_t>(ci)] = tape->scale(tape->sum(picks), scale);
      ready[static_cast<std::size_t>(ci)] = 1;
    }
    return vars[static_cast<std::size_t>(ci)];
  }
};

}  // namespace

grad::Var batch_loss(grad::Tape& tape, std::span<const BatchSentence> batch,
                     Strategy st, double temperature) {
  int num_labels = 0;
  std::size_t num_instances = 0;
  for (const BatchSentence& s : batch) {
    num_instances += s.targets.size();
    for (const TargetSpan& t : s.targets)
      num_labels = std::max(num_labels, t.label_id + 1);
  }
  if (num_instances == 0) throw ContrastiveError("empty batch");

  Pool pools[2] = {build_pool(batch, 1, num_labels), build_pool(batch, 2, num_labels)};

  std::vector<grad::Var> terms;
  terms.reserve(2 * num_instances);
  std::vector<grad::Var> xs;
  std::vector<double> off;

  for (const BatchSentence& s : batch) {
    for (std::size_t t = 0; t < s.targets.size(); ++t) {
      const TargetSpan& tgt = s.targets[t];
      for (int dir = 0; dir < 2; ++dir) {
        // Marginals from one view, candidate codes from the other.
        const auto* mu = dir == 0 ? s.mu_view1 : s.mu_view2;
        const Pool& pool = pools[dir == 0 ? 1 : 0];
        const Code twin = dir == 0 ? s.codes_view2[t] : s.codes_view1[t];
        const auto& cnt_y = pool.count[static_cast<std::size_t>(tgt.label_id)];
        const int twin_ci = pool.code_idx(twin.bits);

        int num_pos = 0;
        for (int c : cnt_y) num_pos += c;
        if (pool.size - num_pos == 0)
          throw EmptyNegativeSet("batch has a single gold label");
        // S ⊆ P: the cross-view twin always sits in the positive set.
        if (cnt_y[static_cast<std::size_t>(twin_ci)] < 1)
          throw ContrastiveError("twin missing from candidate pool");

        SimCache sims(&tape, mu, &pool, tgt.l, tgt.r,
                      1.0 / (static_cast<double>(mu->k) * temperature));

        xs.clear();
        off.clear();
        if (st.neg == NegRule::kAll) {
          for (std::size_t ci = 0; ci < pool.codes.size(); ++ci) {
            if (pool.total[ci] == 0) continue;
            xs.push_back(sims.at(static_cast<int>(ci)));
            off.push_back(std::log(static_cast<double>(pool.total[ci])));
          }
        } else {
          for (std::size_t ci = 0; ci < pool.codes.size(); ++ci) {
            int neg_cnt = pool.total[ci] - cnt_y[ci];
            if (neg_cnt == 0) continue;
            xs.push_back(sims.at(static_cast<int>(ci)));
            off.push_back(std::log(static_cast<double>(neg_cnt)));
          }
          xs.push_back(sims.at(twin_ci));
          off.push_back(0.0);
        }
        grad::Var neg = tape.logsumexp_off(xs, off);

        grad::Var pos = neg;  // overwritten below
        switch (st.pos) {
          case PosRule::kSelf:
            pos = sims.at(twin_ci);
            break;
          case PosRule::kMean: {
            xs.clear();
            off.clear();
            for (std::size_t ci = 0; ci < pool.codes.size(); ++ci) {
              if (cnt_y[ci] == 0) continue;
              xs.push_back(sims.at(static_cast<int>(ci)));
              off.push_back(static_cast<double>(cnt_y[ci]) /
                            static_cast<double>(num_pos));
            }
            pos = tape.weighted_sum(xs, off);
            break;
          }
          case PosRule::kMax: {
            xs.clear();
            off.clear();
            for (std::size_t ci = 0; ci < pool.codes.size(); ++ci) {
              if (cnt_y[ci] == 0) continue;
              xs.push_back(sims.at(static_cast<int>(ci)));
              off.push_back(std::log(static_cast<double>(cnt_y[ci])));
            }
            pos = tape.logsumexp_off(xs, off);
            break;
          }
        }
        terms.push_back(neg - pos);
      }
    }
  }

  return tape.scale(tape.sum(terms), 1.0 / static_cast<double>(num_instances));
}

}  // namespace spanhash::contrastive
