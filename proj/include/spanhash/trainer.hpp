#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spanhash/contrastive.hpp"
#include "spanhash/encoder.hpp"
#include "spanhash/pipeline.hpp"

namespace spanhash::trainer {

struct TrainerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SentenceExceedsBudget : TrainerError {
  using TrainerError::TrainerError;
};

struct TrainConfig {
  int k_bits = 12;
  int total_steps = 50000;
  int warmup_steps = 4000;
  double peak_lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
  int token_budget = 1024;
  std::uint64_t seed = 1;
  std::string loss = "max";
  double temperature = 1.0;
  double clip_norm = 5.0;
  int checkpoint_every = 1000;
  // Encoder hyperparameters (k_bits above is authoritative for the hash head).
  int dim = 64;
  int l_max = 64;
  double p_drop = 0.1;
  double p_mask = 0.15;

  encoder::EncoderConfig encoder_config() const {
    return {dim, k_bits, l_max, p_drop, p_mask};
  }
  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
  static TrainConfig load(const std::string& path);
  std::uint64_t hash() const;
};

// Greedy fill over sentences in the given order: a batch closes when the
// next sentence would push it past the token budget (every batch holds at
// least one sentence). Returns positions into `order`-space indices.
std::vector<std::vector<int>> greedy_fill(const std::vector<int>& order,
                                          const std::vector<int>& sentence_lengths,
                                          int token_budget);

// Deterministic shuffle (seed derived per epoch) followed by greedy fill.
std::vector<std::vector<int>> make_batches(const std::vector<int>& sentence_lengths,
                                           int token_budget, std::uint64_t seed,
                                           std::uint64_t epoch);

// Linear 0 -> peak over warmup steps, then linear peak -> 0 at total steps.
double lr_schedule(int step, const TrainConfig& cfg);

struct AdamState {
  std::int64_t t = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// One decoupled-weight-decay Adam step, in place.
void adamw_step(std::vector<double>& theta, const std::vector<double>& grad,
                AdamState& state, double lr, const TrainConfig& cfg);

struct Checkpoint {
  TrainConfig cfg;
  int step = 0;
  pipeline::Model model;
  AdamState adam;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

struct StepLog {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  pipeline::Model model;
  std::vector<StepLog> logs;
  int skipped_batches = 0;
};

struct TrainOptions {
  std::string out_dir;                         // empty: no files written
  std::ostream* info = nullptr;                // progress lines
  std::optional<Checkpoint> resume;
  std::function<void(const StepLog&)> on_step;  // optional observer
};

// Full loop: per batch, two augmented views, bit-level charts, binarized
// targets, contrastive batch loss, backward, clipped AdamW update. Degenerate
// single-label batches are skipped without an update.
TrainResult train(const TrainConfig& cfg, const std::vector<pipeline::Sentence>& corpus,
                  const TrainOptions& opts = {});

std::string format_log_line(const StepLog& log);

}  // namespace spanhash::trainer
