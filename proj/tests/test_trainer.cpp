#include "spanhash/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "spanhash/synth.hpp"

using namespace spanhash;
using namespace spanhash::trainer;

namespace {

std::vector<pipeline::Sentence> tiny_corpus(int count, std::uint64_t seed) {
  synth::ParseGrammar g;
  g.num_labels = 4;
  g.max_len = 8;
  auto trees = synth::gen_parse_corpus(g, count, seed);
  std::vector<pipeline::Sentence> corpus;
  for (const auto& t : trees) corpus.push_back(pipeline::make_sentence(t));
  return corpus;
}

TrainConfig tiny_config(int steps) {
  TrainConfig cfg;
  cfg.k_bits = 3;
  cfg.dim = 12;
  cfg.l_max = 12;
  cfg.total_steps = steps;
  cfg.warmup_steps = steps / 5;
  cfg.peak_lr = 2e-3;
  cfg.token_budget = 48;
  cfg.checkpoint_every = 0;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("greedy fill follows the stated arithmetic") {
  std::vector<int> lengths = {600, 500, 300};
  std::vector<int> order = {0, 1, 2};
  auto batches = greedy_fill(order, lengths, 1024);
  REQUIRE(batches.size() == 2);
  CHECK(batches[0] == std::vector<int>{0});
  CHECK(batches[1] == std::vector<int>{1, 2});

  CHECK_THROWS_AS(greedy_fill({0}, std::vector<int>{2000}, 1024), SentenceExceedsBudget);
}

TEST_CASE("make_batches determinism and budget") {
  std::vector<int> lengths;
  RngStream rng(3);
  for (int i = 0; i < 60; ++i) lengths.push_back(2 + static_cast<int>(rng.below(10)));

  auto a = make_batches(lengths, 32, 7, 0);
  auto b = make_batches(lengths, 32, 7, 0);
  CHECK(a == b);
  auto c = make_batches(lengths, 32, 7, 1);
  CHECK(a != c);  // epoch reshuffle

  int seen = 0;
  for (const auto& batch : a) {
    CHECK(!batch.empty());
    int tokens = 0;
    for (int idx : batch) tokens += lengths[static_cast<std::size_t>(idx)];
    CHECK(tokens <= 32);
    seen += static_cast<int>(batch.size());
  }
  CHECK(seen == 60);
}

TEST_CASE("lr schedule endpoints") {
  TrainConfig cfg;
  cfg.total_steps = 100;
  cfg.warmup_steps = 20;
  cfg.peak_lr = 0.1;
  CHECK(lr_schedule(0, cfg) == 0.0);
  CHECK(lr_schedule(10, cfg) == doctest::Approx(0.05));
  CHECK(lr_schedule(20, cfg) == doctest::Approx(0.1));
  CHECK(lr_schedule(60, cfg) == doctest::Approx(0.05));
  CHECK(lr_schedule(100, cfg) == 0.0);
}

TEST_CASE("adamw one-step closed form") {
  TrainConfig cfg;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.eps = 1e-8;
  cfg.weight_decay = 0.1;
  std::vector<double> theta = {1.0};
  std::vector<double> grad = {0.3};
  AdamState st;
  adamw_step(theta, grad, st, 0.01, cfg);

  // Straight-line arithmetic: after one step m_hat = g, v_hat = g^2.
  double m = 0.1 * 0.3;
  double v = 0.001 * 0.09;
  double m_hat = m / 0.1;
  double v_hat = v / 0.001;
  double expect = 1.0 - 0.01 * (m_hat / (std::sqrt(v_hat) + 1e-8) + 0.1 * 1.0);
  CHECK(std::abs(theta[0] - expect) <= 1e-12);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  auto corpus = tiny_corpus(4, 2);
  TrainConfig cfg = tiny_config(3);
  cfg.peak_lr = 0.0;
  auto result = train(cfg, corpus);
  auto fresh = encoder::init_params(result.model.vocab.size(), cfg.encoder_config(),
                                    cfg.seed);
  CHECK(result.model.params.theta == fresh.theta);
}

TEST_CASE("training is bit-deterministic for a fixed seed") {
  auto corpus = tiny_corpus(6, 9);
  TrainConfig cfg = tiny_config(12);
  auto a = train(cfg, corpus);
  auto b = train(cfg, corpus);
  REQUIRE(a.logs.size() == b.logs.size());
  for (std::size_t i = 0; i < a.logs.size(); ++i) {
    CHECK(a.logs[i].loss == b.logs[i].loss);
    CHECK(a.logs[i].lr == b.logs[i].lr);
  }
  CHECK(a.model.params.theta == b.model.params.theta);

  TrainConfig other = cfg;
  other.seed = 6;
  auto c = train(other, corpus);
  CHECK(a.model.params.theta != c.model.params.theta);
}

TEST_CASE("resume continues the identical trajectory") {
  auto corpus = tiny_corpus(6, 9);
  TrainConfig cfg = tiny_config(14);

  auto full = train(cfg, corpus);

  std::string dir = "test_trainer_resume_tmp";
  TrainConfig half = cfg;
  half.total_steps = 14;      // same schedule
  half.checkpoint_every = 7;  // checkpoint at step 7
  TrainOptions opts;
  opts.out_dir = dir;
  // Stop early by running a copy with total_steps=7 but the same schedule
  // shape is not equivalent; instead train fully and reload the step-7 file.
  auto with_files = train(half, corpus, opts);
  (void)with_files;
  Checkpoint ck = Checkpoint::load(dir + "/checkpoint_step000007.json");
  CHECK(ck.step == 7);

  TrainOptions resume_opts;
  resume_opts.resume = ck;
  auto resumed = train(half, corpus, resume_opts);
  REQUIRE(resumed.logs.size() == 7);
  for (std::size_t i = 0; i < resumed.logs.size(); ++i) {
    const auto& expect = full.logs[7 + i];
    CHECK(resumed.logs[i].step == expect.step);
    CHECK(resumed.logs[i].loss == expect.loss);
  }
  CHECK(resumed.model.params.theta == full.model.params.theta);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint save/load round trip") {
  auto corpus = tiny_corpus(3, 4);
  TrainConfig cfg = tiny_config(4);
  auto result = train(cfg, corpus);

  Checkpoint ck{cfg, 4, result.model, AdamState{}};
  ck.adam.t = 4;
  ck.adam.m.assign(result.model.params.theta.size(), 0.125);
  ck.adam.v.assign(result.model.params.theta.size(), 0.25);
  std::string path = "test_trainer_ck_tmp.json";
  ck.save(path);
  Checkpoint back = Checkpoint::load(path);
  std::remove(path.c_str());

  CHECK(back.step == 4);
  CHECK(back.model.params.theta == result.model.params.theta);
  CHECK(back.model.vocab.tokens == result.model.vocab.tokens);
  CHECK(back.adam.t == 4);
  CHECK(back.adam.m == ck.adam.m);
  CHECK(back.cfg.hash() == cfg.hash());
}

TEST_CASE("deterministic descent on a one-sentence corpus") {
  auto tree = treebank::parse_bracketed("(S (A (Ao ao0) (Ac ac0)) (B (Bo bo0) (Bc bc0)))");
  std::vector<pipeline::Sentence> corpus = {pipeline::make_sentence(tree)};

  TrainConfig cfg;
  cfg.k_bits = 4;
  cfg.dim = 12;
  cfg.l_max = 8;
  cfg.total_steps = 50;
  cfg.warmup_steps = 10;
  cfg.peak_lr = 1e-3;
  cfg.token_budget = 16;
  cfg.checkpoint_every = 0;
  cfg.p_drop = 0.0;
  cfg.p_mask = 0.0;
  cfg.loss = "max";
  cfg.seed = 1;

  auto result = train(cfg, corpus);
  REQUIRE(result.logs.size() == 50);
  for (std::size_t i = 1; i < result.logs.size(); ++i)
    CHECK(result.logs[i].loss <= result.logs[i - 1].loss + 1e-12);
  CHECK(result.logs.back().loss < result.logs.front().loss);
}

TEST_CASE("config json round trip and unknown keys") {
  TrainConfig cfg = tiny_config(10);
  cfg.loss = "hash-mean";
  TrainConfig back = TrainConfig::from_json(cfg.to_json());
  CHECK(back.hash() == cfg.hash());
  CHECK(back.loss == "hash-mean");
  CHECK_THROWS_AS(TrainConfig::from_json("{\"learning_rate\": 1}"), TrainerError);
  TrainConfig bad = cfg;
  bad.warmup_steps = bad.total_steps;
  CHECK_THROWS_AS(bad.validate(), TrainerError);
}
