#include "spanhash/chart.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "spanhash/rng.hpp"
#include "spanhash/tape.hpp"

using namespace spanhash;
using namespace spanhash::chart;
using grad::Tape;
using grad::Var;

namespace {

ScoreChart<double> random_chart(int n, int k, RngStream& rng, double lo = -2.0,
                                double hi = 2.0) {
  ScoreChart<double> sc(n, k);
  for (auto& g : sc.g) g = rng.uniform(lo, hi);
  return sc;
}

// Deepest oracle: enumerate binary trees AND every explicit code assignment,
// summing exp of the bit-level tree score directly. Exponential in spans*K,
// so only for tiny cases; it cross-checks the factorized enumerate_oracle.
struct MicroEnum {
  double z = 0.0;
  std::vector<double> mu_span;            // [span_index]
  std::vector<double> mu_bit_plus;        // [span_index * k + bit-1]

  static void trees_of(int l, int r, std::vector<std::vector<std::pair<int, int>>>& out) {
    if (r - l == 1) {
      out.push_back({{l, r}});
      return;
    }
    for (int m = l + 1; m < r; ++m) {
      std::vector<std::vector<std::pair<int, int>>> left, right;
      trees_of(l, m, left);
      trees_of(m, r, right);
      for (const auto& a : left)
        for (const auto& b : right) {
          std::vector<std::pair<int, int>> t = {{l, r}};
          t.insert(t.end(), a.begin(), a.end());
          t.insert(t.end(), b.begin(), b.end());
          out.push_back(t);
        }
    }
  }

  explicit MicroEnum(const ScoreChart<double>& sc) {
    const int n = sc.n, k = sc.k;
    mu_span.assign(static_cast<std::size_t>(num_spans(n)), 0.0);
    mu_bit_plus.assign(static_cast<std::size_t>(num_spans(n) * k), 0.0);
    std::vector<std::vector<std::pair<int, int>>> trees;
    trees_of(0, n, trees);
    for (const auto& tree : trees) {
      const int spans = static_cast<int>(tree.size());
      const int total_bits = spans * k;
      for (std::uint64_t assign = 0; assign < (1ull << total_bits); ++assign) {
        double score = 0.0;
        for (int s = 0; s < spans; ++s) {
          auto [l, r] = tree[static_cast<std::size_t>(s)];
          for (int bit = 1; bit <= k; ++bit) {
            bool plus = (assign >> (s * k + bit - 1)) & 1ull;
            if (plus) score += sc.at(l, r, bit);  // the -1 score is 0
          }
        }
        double w = std::exp(score);
        z += w;
        for (int s = 0; s < spans; ++s) {
          auto [l, r] = tree[static_cast<std::size_t>(s)];
          mu_span[static_cast<std::size_t>(span_index(l, r))] += w;
          for (int bit = 1; bit <= k; ++bit) {
            bool plus = (assign >> (s * k + bit - 1)) & 1ull;
            if (plus)
              mu_bit_plus[static_cast<std::size_t>(span_index(l, r) * k + bit - 1)] += w;
          }
        }
      }
    }
    for (auto& m : mu_span) m /= z;
    for (auto& m : mu_bit_plus) m /= z;
  }
};

}  // namespace

TEST_CASE("bit factor analytic values") {
  ScoreChart<double> sc(2, 1);
  CHECK(bit_factor(sc, 0, 2) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  sc.at(0, 2, 1) = std::log(3.0);
  CHECK(bit_factor(sc, 0, 2) == doctest::Approx(std::log(4.0)).epsilon(1e-15));

  ScoreChart<double> sc2(2, 2);
  sc2.at(0, 2, 2) = std::log(3.0);
  CHECK(bit_factor(sc2, 0, 2) ==
        doctest::Approx(std::log(2.0) + std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("inside log partition on hand-counted charts") {
  // n=2, K=1, all zero: one tree, 3 spans, 2^3 assignments.
  ScoreChart<double> a(2, 1);
  CHECK(inside(a).log_z == doctest::Approx(std::log(8.0)).epsilon(1e-14));

  // n=3, K=1, all zero: 2 trees x 2^5.
  ScoreChart<double> b(3, 1);
  CHECK(inside(b).log_z == doctest::Approx(std::log(64.0)).epsilon(1e-14));

  // n=2, K=1, g(0,2)=ln 3: 2*2*(3+1).
  ScoreChart<double> c(2, 1);
  c.at(0, 2, 1) = std::log(3.0);
  CHECK(inside(c).log_z == doctest::Approx(std::log(16.0)).epsilon(1e-14));
}

TEST_CASE("all-zero chart closed form") {
  // logZ = ln Catalan(n-1) + (2n-1) K ln 2.
  auto catalan = [](int m) {
    double c = 1.0;
    for (int i = 0; i < m; ++i) c = c * 2.0 * (2 * i + 1) / (i + 2);
    return c;
  };
  for (int n = 2; n <= 6; ++n) {
    for (int k = 1; k <= 3; ++k) {
      ScoreChart<double> sc(n, k);
      double expect = std::log(catalan(n - 1)) + (2 * n - 1) * k * std::log(2.0);
      CHECK(inside(sc).log_z == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("outside and span marginals on small cases") {
  // n=2: every span in the unique tree.
  ScoreChart<double> a(2, 1);
  auto ia = inside(a);
  auto oa = outside(ia, a);
  auto mu_a = span_marginals(ia, oa);
  CHECK(mu_a[static_cast<std::size_t>(span_index(0, 1))] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mu_a[static_cast<std::size_t>(span_index(1, 2))] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mu_a[static_cast<std::size_t>(span_index(0, 2))] == doctest::Approx(1.0).epsilon(1e-12));

  // n=3, zero scores: the two internal spans appear in one of two trees.
  ScoreChart<double> b(3, 1);
  auto ib = inside(b);
  auto ob = outside(ib, b);
  auto mu_b = span_marginals(ib, ob);
  CHECK(mu_b[static_cast<std::size_t>(span_index(0, 2))] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mu_b[static_cast<std::size_t>(span_index(1, 3))] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(mu_b[static_cast<std::size_t>(span_index(0, 1))] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mu_b[static_cast<std::size_t>(span_index(0, 3))] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bit marginals analytic case") {
  ScoreChart<double> sc(2, 1);
  sc.at(0, 2, 1) = std::log(3.0);
  auto mc = marginals(sc);
  CHECK(mc.bit(0, 2, 1, +1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(mc.bit(0, 2, 1, -1) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("factorized oracle matches explicit code enumeration") {
  RngStream rng(3);
  for (auto [n, k] : {std::pair{2, 1}, {2, 2}, {3, 1}, {3, 2}}) {
    auto sc = random_chart(n, k, rng);
    MicroEnum micro(sc);
    auto oracle = enumerate_oracle(sc);
    CHECK(oracle.log_z == doctest::Approx(std::log(micro.z)).epsilon(1e-12));
    for (int r = 1; r <= n; ++r) {
      for (int l = 0; l < r; ++l) {
        int si = span_index(l, r);
        CHECK(oracle.mu_span[static_cast<std::size_t>(si)] ==
              doctest::Approx(micro.mu_span[static_cast<std::size_t>(si)]).epsilon(1e-11));
        for (int bit = 1; bit <= k; ++bit) {
          double plus = oracle.mu_bit[static_cast<std::size_t>((si * k + bit - 1) * 2)];
          CHECK(plus == doctest::Approx(
                            micro.mu_bit_plus[static_cast<std::size_t>(si * k + bit - 1)])
                            .epsilon(1e-11));
        }
      }
    }
  }
}

TEST_CASE("inside-outside equals oracle on random charts") {
  RngStream rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + static_cast<int>(rng.below(4));  // 2..5
    int k = 1 + static_cast<int>(rng.below(3));  // 1..3
    auto sc = random_chart(n, k, rng);
    auto oracle = enumerate_oracle(sc);
    auto ic = inside(sc);
    CHECK(std::abs(ic.log_z - oracle.log_z) <= 1e-10);
    auto oc = outside(ic, sc);
    auto mu = span_marginals(ic, oc);
    auto mc = bit_marginals(mu, sc);
    for (std::size_t i = 0; i < mu.size(); ++i)
      CHECK(std::abs(mu[i] - oracle.mu_span[i]) <= 1e-10);
    for (std::size_t i = 0; i < mc.mu_bit.size(); ++i)
      CHECK(std::abs(mc.mu_bit[i] - oracle.mu_bit[i]) <= 1e-10);
  }
}

TEST_CASE("conservation invariants on random charts") {
  RngStream rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + static_cast<int>(rng.below(5));  // 2..6
    int k = 1 + static_cast<int>(rng.below(3));
    auto sc = random_chart(n, k, rng, -3.0, 3.0);
    auto mc = marginals(sc);

    double total = 0.0;
    for (double m : mc.mu_span) total += m;
    CHECK(total == doctest::Approx(2.0 * n - 1.0).epsilon(1e-6));

    CHECK(mc.span(0, n) == doctest::Approx(1.0).epsilon(1e-9));
    for (int l = 0; l < n; ++l)
      CHECK(mc.span(l, l + 1) == doctest::Approx(1.0).epsilon(1e-9));

    // sum_c mu_bit(l,r,k,c) equals mu_span for every k (to float rounding),
    // and the spread across k stays within 1e-12.
    for (int r = 1; r <= n; ++r) {
      for (int l = 0; l < r; ++l) {
        double lo = 2.0, hi = -1.0;
        for (int bit = 1; bit <= k; ++bit) {
          double s = mc.bit(l, r, bit, +1) + mc.bit(l, r, bit, -1);
          CHECK(std::abs(s - mc.span(l, r)) <= 1e-15);
          lo = std::min(lo, s);
          hi = std::max(hi, s);
        }
        CHECK(hi - lo <= 1e-12);
      }
    }
  }
}

TEST_CASE("viterbi decode ties and argmax codes") {
  // All zero scores: every split ties, so every span splits at the smallest
  // point, and g=0 is not > 0, so all codes are -1.
  ScoreChart<double> sc(3, 2);
  auto t = viterbi_decode(sc);
  CHECK(t.score == 0.0);
  REQUIRE(t.spans.size() == 5);
  CHECK(t.spans[0].l == 0);
  CHECK(t.spans[0].r == 3);
  CHECK(t.spans[1].l == 0);
  CHECK(t.spans[1].r == 1);
  CHECK(t.spans[2].l == 1);
  CHECK(t.spans[2].r == 3);
  for (const auto& s : t.spans) CHECK(s.code.bits == 0);
}

TEST_CASE("viterbi signwise codes") {
  ScoreChart<double> sc(2, 2);
  sc.at(0, 2, 1) = 1.0;
  sc.at(0, 2, 2) = -1.0;
  auto t = viterbi_decode(sc);
  REQUIRE(t.spans.size() == 3);
  CHECK(t.spans[0].code.bit(1) == +1);
  CHECK(t.spans[0].code.bit(2) == -1);
  CHECK(t.score == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("viterbi equals oracle max on random charts") {
  RngStream rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 2 + static_cast<int>(rng.below(4));
    int k = 1 + static_cast<int>(rng.below(3));
    auto sc = random_chart(n, k, rng);
    auto t = viterbi_decode(sc);
    auto oracle = enumerate_oracle(sc);
    CHECK(std::abs(t.score - oracle.best_score) <= 1e-12);
  }
}

TEST_CASE("oracle respects size limits and Catalan counts") {
  ScoreChart<double> sc(4, 1);
  auto o = enumerate_oracle(sc);
  CHECK(o.num_trees == 5);
  ScoreChart<double> big(7, 1);
  CHECK_THROWS_AS(enumerate_oracle(big), TooLarge);
}

TEST_CASE("backward of logZ equals forward bit marginals") {
  RngStream rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    int n = 2 + static_cast<int>(rng.below(3));  // 2..4
    int k = 1 + static_cast<int>(rng.below(2));
    Tape tape;
    ScoreChart<Var> sc(n, k);
    ScoreChart<double> scd(n, k);
    for (int r = 1; r <= n; ++r)
      for (int l = 0; l < r; ++l)
        for (int bit = 1; bit <= k; ++bit) {
          double v = rng.uniform(-2.0, 2.0);
          scd.at(l, r, bit) = v;
          sc.at(l, r, bit) = tape.leaf(v);
        }
    auto ic = inside(sc);
    tape.backward(ic.log_z);
    auto mc = marginals(scd);
    for (int r = 1; r <= n; ++r)
      for (int l = 0; l < r; ++l)
        for (int bit = 1; bit <= k; ++bit) {
          double from_tape = tape.gradient(sc.at(l, r, bit));
          CHECK(std::abs(from_tape - mc.bit(l, r, bit, +1)) <= 1e-9);
        }
  }
}

TEST_CASE("logZ gradient matches central finite differences") {
  RngStream rng(43);
  int n = 4, k = 2;
  std::vector<double> params;
  for (int i = 0; i < num_spans(n) * k; ++i) params.push_back(rng.uniform(-2.0, 2.0));
  auto builder = [&](Tape&, std::span<const Var> p) {
    ScoreChart<Var> sc(n, k);
    for (std::size_t i = 0; i < p.size(); ++i) sc.g[i] = p[i];
    return inside(sc).log_z;
  };
  auto rep = grad::grad_check(builder, params, 1e-5, 1e-6);
  CHECK_MESSAGE(rep.pass, "max rel err ", rep.max_rel_err);
}

TEST_CASE("marginal as scalar output passes finite differences") {
  RngStream rng(47);
  int n = 3, k = 2;
  std::vector<double> params;
  for (int i = 0; i < num_spans(n) * k; ++i) params.push_back(rng.uniform(-1.5, 1.5));
  auto builder = [&](Tape&, std::span<const Var> p) {
    ScoreChart<Var> sc(n, k);
    for (std::size_t i = 0; i < p.size(); ++i) sc.g[i] = p[i];
    auto mc = marginals(sc);
    return mc.bit(0, 2, 1, +1);
  };
  // 1e-4 is the general composed-expression bound; tiny gradient components
  // make central differences' absolute truncation error dominate here.
  auto rep = grad::grad_check(builder, params, 1e-5, 1e-4);
  CHECK_MESSAGE(rep.pass, "max rel err ", rep.max_rel_err);
}
