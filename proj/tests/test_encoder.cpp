#include "spanhash/encoder.hpp"

#include <cmath>

#include "doctest.h"
#include "spanhash/chart.hpp"
#include "spanhash/rng.hpp"

using namespace spanhash;
using namespace spanhash::encoder;
using grad::Tape;
using grad::Var;

namespace {

Vocab toy_vocab() {
  return Vocab::from_tokens({"a", "b", "c", "d", "e"});
}

ParamView<double> view_of(const EncoderParams& p) {
  return {&p.layout, std::span<const double>(p.theta)};
}

}  // namespace

TEST_CASE("init dims and determinism") {
  EncoderConfig cfg{64, 12, 64, 0.1, 0.15};
  CHECK(cfg.head_dim() == 6);  // ceil(64/12)

  Vocab v = toy_vocab();
  EncoderParams a = init_params(v.size(), cfg, 123);
  EncoderParams b = init_params(v.size(), cfg, 123);
  CHECK(a.theta == b.theta);
  EncoderParams c = init_params(v.size(), cfg, 124);
  CHECK(a.theta != c.theta);

  EncoderConfig bad{4, 8, 64, 0.0, 0.0};
  CHECK_THROWS_AS(init_params(v.size(), bad, 1), InvalidDims);
}

TEST_CASE("eval mode is deterministic, train views differ") {
  EncoderConfig cfg{16, 4, 16, 0.2, 0.3};
  Vocab v = toy_vocab();
  EncoderParams p = init_params(v.size(), cfg, 5);
  std::vector<int> ids = {2, 3, 4};

  auto h1 = encode<double>(cfg, view_of(p), ids, Mode::kEval, nullptr, nullptr);
  auto h2 = encode<double>(cfg, view_of(p), ids, Mode::kEval, nullptr, nullptr);
  CHECK(h1 == h2);

  RngStream m1 = RngStream::derive(9, "mask", 0, 1), d1 = RngStream::derive(9, "drop", 0, 1);
  RngStream m2 = RngStream::derive(9, "mask", 0, 2), d2 = RngStream::derive(9, "drop", 0, 2);
  auto t1 = encode<double>(cfg, view_of(p), ids, Mode::kTrain, &m1, &d1);
  auto t2 = encode<double>(cfg, view_of(p), ids, Mode::kTrain, &m2, &d2);
  CHECK(t1 != t2);

  // Degenerate augmentation equals eval.
  EncoderConfig off = cfg;
  off.p_drop = 0.0;
  off.p_mask = 0.0;
  RngStream m3 = RngStream::derive(9, "mask", 1, 1), d3 = RngStream::derive(9, "drop", 1, 1);
  auto t3 = encode<double>(off, view_of(p), ids, Mode::kTrain, &m3, &d3);
  auto e3 = encode<double>(off, view_of(p), ids, Mode::kEval, nullptr, nullptr);
  CHECK(t3 == e3);
}

TEST_CASE("sentence length limit") {
  EncoderConfig cfg{8, 2, 4, 0.0, 0.0};
  Vocab v = toy_vocab();
  EncoderParams p = init_params(v.size(), cfg, 5);
  std::vector<int> ids = {2, 2, 2, 2, 2};
  CHECK_THROWS_AS(
      encode<double>(cfg, view_of(p), ids, Mode::kEval, nullptr, nullptr),
      SentenceTooLong);
}

TEST_CASE("hash scores: boundary convention and bilinearity") {
  EncoderConfig cfg{8, 2, 8, 0.0, 0.0};
  Vocab v = toy_vocab();
  EncoderParams p = init_params(v.size(), cfg, 17);
  std::vector<int> ids = {2, 3, 4};
  auto h = encode<double>(cfg, view_of(p), ids, Mode::kEval, nullptr, nullptr);
  auto sc = hash_scores<double>(cfg, view_of(p), h);

  // Width-1 spans use the same state on both sides.
  const auto& wq = p.layout.find("w_q.1");
  const auto& wk = p.layout.find("w_k.1");
  const int dk = cfg.head_dim();
  double manual = 0.0;
  for (int j = 0; j < dk; ++j) {
    double q = 0.0, k = 0.0;
    for (int c = 0; c < cfg.dim; ++c) {
      q += p.theta[wq.offset + static_cast<std::size_t>(j * cfg.dim + c)] *
           h[1][static_cast<std::size_t>(c)];
      k += p.theta[wk.offset + static_cast<std::size_t>(j * cfg.dim + c)] *
           h[1][static_cast<std::size_t>(c)];
    }
    manual += q * k;
  }
  manual /= std::sqrt(static_cast<double>(dk));
  CHECK(sc.at(1, 2, 1) == doctest::Approx(manual).epsilon(1e-12));

  // Zero projections give the all-zero chart.
  EncoderParams zero = p;
  for (int k = 1; k <= cfg.k_bits; ++k) {
    const auto& eq = zero.layout.find("w_q." + std::to_string(k));
    for (std::size_t i = 0; i < static_cast<std::size_t>(eq.rows) * eq.cols; ++i)
      zero.theta[eq.offset + i] = 0.0;
  }
  auto sc0 = hash_scores<double>(cfg, view_of(zero), h);
  for (double g : sc0.g) CHECK(g == 0.0);
  // ... which reduces logZ to the closed all-zero form.
  CHECK(chart::inside(sc0).log_z ==
        doctest::Approx(std::log(2.0) + 5 * cfg.k_bits * std::log(2.0)).epsilon(1e-12));

  // Scaling W^Q_k scales g_k linearly.
  EncoderParams scaled = p;
  const auto& eq1 = scaled.layout.find("w_q.1");
  for (std::size_t i = 0; i < static_cast<std::size_t>(eq1.rows) * eq1.cols; ++i)
    scaled.theta[eq1.offset + i] *= 3.0;
  auto sc3 = hash_scores<double>(cfg, view_of(scaled), h);
  for (int r = 1; r <= 3; ++r)
    for (int l = 0; l < r; ++l) {
      CHECK(sc3.at(l, r, 1) == doctest::Approx(3.0 * sc.at(l, r, 1)).epsilon(1e-12));
      CHECK(sc3.at(l, r, 2) == doctest::Approx(sc.at(l, r, 2)).epsilon(1e-12));
    }
}

TEST_CASE("tape and double forwards agree exactly") {
  EncoderConfig cfg{12, 3, 8, 0.0, 0.0};
  Vocab v = toy_vocab();
  EncoderParams p = init_params(v.size(), cfg, 23);
  std::vector<int> ids = {2, 4, 3, 2};

  auto hd = encode<double>(cfg, view_of(p), ids, Mode::kEval, nullptr, nullptr);
  auto scd = hash_scores<double>(cfg, view_of(p), hd);

  Tape tape;
  auto leaves = make_leaves(tape, p);
  ParamView<Var> pv{&p.layout, std::span<const Var>(leaves)};
  auto hv = encode<Var>(cfg, pv, ids, Mode::kEval, nullptr, nullptr);
  auto scv = hash_scores<Var>(cfg, pv, hv);
  for (std::size_t i = 0; i < scd.g.size(); ++i)
    CHECK(scd.g[i] == scv.g[i].value());
}

TEST_CASE("gradients through encode + hash + logZ pass finite differences") {
  EncoderConfig cfg{6, 2, 8, 0.0, 0.0};
  Vocab v = toy_vocab();
  EncoderParams p = init_params(v.size(), cfg, 31);
  std::vector<int> ids = {2, 3, 4};

  auto builder = [&](Tape& t, std::span<const Var> leaves) {
    (void)t;
    ParamView<Var> pv{&p.layout, leaves};
    auto h = encode<Var>(cfg, pv, ids, Mode::kEval, nullptr, nullptr);
    auto sc = hash_scores<Var>(cfg, pv, h);
    return chart::inside(sc).log_z;
  };
  auto rep = grad::grad_check(builder, p.theta, 1e-5, 1e-4);
  CHECK_MESSAGE(rep.pass, "max rel err ", rep.max_rel_err, " at ", rep.worst_index);
}

TEST_CASE("vocabulary reserves unk and mask") {
  Vocab v = toy_vocab();
  CHECK(v.tokens[0] == kUnkToken);
  CHECK(v.tokens[1] == kMaskToken);
  CHECK(v.id("a") >= 2);
  CHECK(v.id("never-seen") == Vocab::kUnkId);
}
