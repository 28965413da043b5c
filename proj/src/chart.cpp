#include "spanhash/chart.hpp"

#include <algorithm>

namespace spanhash::chart {

ScoreChart<double> values_of(const ScoreChart<grad::Var>& sc) {
  ScoreChart<double> out(sc.n, sc.k);
  for (std::size_t i = 0; i < sc.g.size(); ++i) out.g[i] = sc.g[i].value();
  return out;
}

namespace {

// Best per-span contribution: sum_k max(g_k, 0), with code +1 iff g_k > 0.
double best_span_score(const ScoreChart<double>& sc, int l, int r, Code* code) {
  double s = 0.0;
  if (code) *code = Code(0, sc.k);
  for (int k = 1; k <= sc.k; ++k) {
    double g = sc.at(l, r, k);
    if (g > 0.0) {
      s += g;
      if (code) code->set_bit(k, +1);
    }
  }
  return s;
}

void emit_spans(const std::vector<int>& split, const ScoreChart<double>& sc, int l,
                int r, std::vector<CodedSpan>& out) {
  CodedSpan cs;
  cs.l = l;
  cs.r = r;
  best_span_score(sc, l, r, &cs.code);
  out.push_back(cs);
  if (r - l > 1) {
    int m = split[static_cast<std::size_t>(span_index(l, r))];
    emit_spans(split, sc, l, m, out);
    emit_spans(split, sc, m, r, out);
  }
}

}  // namespace

CodedTree viterbi_decode(const ScoreChart<double>& sc) {
  const int n = sc.n;
  std::vector<double> best(static_cast<std::size_t>(num_spans(n)), 0.0);
  std::vector<int> split(static_cast<std::size_t>(num_spans(n)), -1);

  for (int width = 1; width <= n; ++width) {
    for (int l = 0; l + width <= n; ++l) {
      const int r = l + width;
      double s = best_span_score(sc, l, r, nullptr);
      if (width == 1) {
        best[static_cast<std::size_t>(span_index(l, r))] = s;
        continue;
      }
      double best_sub = -1.0;
      int best_m = -1;
      for (int m = l + 1; m < r; ++m) {
        double sub = best[static_cast<std::size_t>(span_index(l, m))] +
                     best[static_cast<std::size_t>(span_index(m, r))];
        if (best_m < 0 || sub > best_sub) {  // ties keep the smallest split
          best_sub = sub;
          best_m = m;
        }
      }
      best[static_cast<std::size_t>(span_index(l, r))] = s + best_sub;
      split[static_cast<std::size_t>(span_index(l, r))] = best_m;
    }
  }

  CodedTree tree;
  tree.n = n;
  tree.score = best[static_cast<std::size_t>(span_index(0, n))];
  tree.spans.reserve(static_cast<std::size_t>(2 * n - 1));
  emit_spans(split, sc, 0, n, tree.spans);
  return tree;
}

namespace {

// All full binary bracketings of [l, r) as span lists.
void enumerate_trees(int l, int r, std::vector<std::vector<std::pair<int, int>>>& out) {
  if (r - l == 1) {
    out.push_back({{l, r}});
    return;
  }
  for (int m = l + 1; m < r; ++m) {
    std::vector<std::vector<std::pair<int, int>>> left, right;
    enumerate_trees(l, m, left);
    enumerate_trees(m, r, right);
    for (const auto& lt : left) {
      for (const auto& rt : right) {
        std::vector<std::pair<int, int>> t;
        t.push_back({l, r});
        t.insert(t.end(), lt.begin(), lt.end());
        t.insert(t.end(), rt.begin(), rt.end());
        out.push_back(std::move(t));
      }
    }
  }
}

}  // namespace

OracleResult enumerate_oracle(const ScoreChart<double>& sc) {
  if (sc.n > 6 || sc.k > 4)
    throw TooLarge("enumerate_oracle limited to n <= 6, K <= 4 (got n=" +
                   std::to_string(sc.n) + ", K=" + std::to_string(sc.k) + ")");

  const int n = sc.n;
  std::vector<std::vector<std::pair<int, int>>> trees;
  enumerate_trees(0, n, trees);

  // Codes factor out: each span contributes b(l,r) in log space to the sum
  // over assignments, and max(g_k, 0) summed to the maximum.
  std::vector<double> b(static_cast<std::size_t>(num_spans(n)));
  std::vector<double> best_span(static_cast<std::size_t>(num_spans(n)));
  for (int r = 1; r <= n; ++r) {
    for (int l = 0; l < r; ++l) {
      double bb = 0.0, mm = 0.0;
      for (int k = 1; k <= sc.k; ++k) {
        double g = sc.at(l, r, k);
        bb += grad::softplus_k(g);
        if (g > 0.0) mm += g;
      }
      b[static_cast<std::size_t>(span_index(l, r))] = bb;
      best_span[static_cast<std::size_t>(span_index(l, r))] = mm;
    }
  }

  std::vector<double> tree_logw(trees.size());
  for (std::size_t t = 0; t < trees.size(); ++t) {
    double w = 0.0;
    for (auto [l, r] : trees[t]) w += b[static_cast<std::size_t>(span_index(l, r))];
    tree_logw[t] = w;
  }

  OracleResult res;
  res.num_trees = static_cast<std::int64_t>(trees.size());
  res.log_z = grad::logsumexp(tree_logw);

  res.mu_span.assign(static_cast<std::size_t>(num_spans(n)), 0.0);
  for (int r = 1; r <= n; ++r) {
    for (int l = 0; l < r; ++l) {
      std::vector<double> with;
      for (std::size_t t = 0; t < trees.size(); ++t) {
        bool has = std::find(trees[t].begin(), trees[t].end(),
                             std::make_pair(l, r)) != trees[t].end();
        if (has) with.push_back(tree_logw[t]);
      }
      if (!with.empty())
        res.mu_span[static_cast<std::size_t>(span_index(l, r))] =
            std::exp(grad::logsumexp(with) - res.log_z);
    }
  }

  // Conditioned on the span being present, each bit is independently +1 with
  // probability sigmoid(g_k).
  res.mu_bit.reserve(static_cast<std::size_t>(num_spans(n) * sc.k * 2));
  for (int r = 1; r <= n; ++r) {
    for (int l = 0; l < r; ++l) {
      double mu = res.mu_span[static_cast<std::size_t>(span_index(l, r))];
      for (int k = 1; k <= sc.k; ++k) {
        double p = grad::sigmoid_k(sc.at(l, r, k));
        res.mu_bit.push_back(mu * p);
        res.mu_bit.push_back(mu - mu * p);
      }
    }
  }

  double best = 0.0;
  bool first = true;
  for (const auto& t : trees) {
    double s = 0.0;
    for (auto [l, r] : t) s += best_span[static_cast<std::size_t>(span_index(l, r))];
    if (first || s > best) best = s;
    first = false;
  }
  res.best_score = best;
  return res;
}

}  // namespace spanhash::chart
