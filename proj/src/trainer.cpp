#include "spanhash/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <fstream>

#include "json.hpp"
#include "spanhash/rng.hpp"

namespace spanhash::trainer {

using nlohmann::json;

void TrainConfig::validate() const {
  if (total_steps < 1) throw TrainerError("total_steps must be positive");
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    throw TrainerError("need 0 <= warmup_steps < total_steps");
  if (token_budget < 1) throw TrainerError("token_budget must be positive");
  if (k_bits < 1 || k_bits > 24) throw TrainerError("k_bits must be in [1, 24]");
  if (temperature <= 0.0) throw TrainerError("temperature must be positive");
  contrastive::strategy_from_name(loss);  // throws on unknown names
}

namespace {

json config_to_json(const TrainConfig& c) {
  return json{{"k_bits", c.k_bits},
              {"total_steps", c.total_steps},
              {"warmup_steps", c.warmup_steps},
              {"peak_lr", c.peak_lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"weight_decay", c.weight_decay},
              {"token_budget", c.token_budget},
              {"seed", c.seed},
              {"loss", c.loss},
              {"temperature", c.temperature},
              {"clip_norm", c.clip_norm},
              {"checkpoint_every", c.checkpoint_every},
              {"dim", c.dim},
              {"l_max", c.l_max},
              {"p_drop", c.p_drop},
              {"p_mask", c.p_mask}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.k_bits = j.value("k_bits", c.k_bits);
  c.total_steps = j.value("total_steps", c.total_steps);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.peak_lr = j.value("peak_lr", c.peak_lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.token_budget = j.value("token_budget", c.token_budget);
  c.seed = j.value("seed", c.seed);
  c.loss = j.value("loss", c.loss);
  c.temperature = j.value("temperature", c.temperature);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.dim = j.value("dim", c.dim);
  c.l_max = j.value("l_max", c.l_max);
  c.p_drop = j.value("p_drop", c.p_drop);
  c.p_mask = j.value("p_mask", c.p_mask);
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!config_to_json(c).contains(it.key()))
      throw TrainerError("unknown config key: " + it.key());
  return c;
}

}  // namespace

std::string TrainConfig::to_json() const { return config_to_json(*this).dump(2); }

TrainConfig TrainConfig::from_json(const std::string& text) {
  return config_from_json(json::parse(text));
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TrainerError("cannot open config: " + path);
  return config_from_json(json::parse(in));
}

std::uint64_t TrainConfig::hash() const { return fnv1a(to_json()); }

std::vector<std::vector<int>> greedy_fill(const std::vector<int>& order,
                                          const std::vector<int>& sentence_lengths,
                                          int token_budget) {
  std::vector<std::vector<int>> batches;
  std::vector<int> cur;
  int cur_tokens = 0;
  for (int idx : order) {
    int len = sentence_lengths[static_cast<std::size_t>(idx)];
    if (len > token_budget)
      throw SentenceExceedsBudget("sentence " + std::to_string(idx) + " has " +
                                  std::to_string(len) + " tokens, budget is " +
                                  std::to_string(token_budget));
    if (!cur.empty() && cur_tokens + len > token_budget) {
      batches.push_back(std::move(cur));
      cur.clear();
      cur_tokens = 0;
    }
    cur.push_back(idx);
    cur_tokens += len;
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

std::vector<std::vector<int>> make_batches(const std::vector<int>& sentence_lengths,
                                           int token_budget, std::uint64_t seed,
                                           std::uint64_t epoch) {
  if (sentence_lengths.empty()) throw TrainerError("empty corpus");
  std::vector<int> order(sentence_lengths.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  RngStream rng = RngStream::derive(seed, "batch", epoch);
  rng.shuffle(order);
  return greedy_fill(order, sentence_lengths, token_budget);
}

double lr_schedule(int step, const TrainConfig& cfg) {
  if (step <= 0) return 0.0;
  if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  return cfg.peak_lr * static_cast<double>(cfg.total_steps - step) /
         static_cast<double>(cfg.total_steps - cfg.warmup_steps);
}

void adamw_step(std::vector<double>& theta, const std::vector<double>& grad,
                AdamState& state, double lr, const TrainConfig& cfg) {
  if (state.m.empty()) {
    state.m.assign(theta.size(), 0.0);
    state.v.assign(theta.size(), 0.0);
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * theta[i]);
  }
}

namespace {

json theta_to_json(const encoder::EncoderParams& p, const std::vector<double>& flat) {
  json out = json::object();
  for (const auto& e : p.layout.entries) {
    json arr = json::array();
    const std::size_t count = static_cast<std::size_t>(e.rows) * e.cols;
    for (std::size_t i = 0; i < count; ++i) arr.push_back(flat[e.offset + i]);
    out[e.name] = std::move(arr);
  }
  return out;
}

void theta_from_json(const encoder::EncoderParams& p, const json& j,
                     std::vector<double>& flat) {
  flat.assign(p.layout.total, 0.0);
  for (const auto& e : p.layout.entries) {
    const auto& arr = j.at(e.name);
    const std::size_t count = static_cast<std::size_t>(e.rows) * e.cols;
    if (arr.size() != count)
      throw TrainerError("parameter segment " + e.name + " has wrong size");
    for (std::size_t i = 0; i < count; ++i) flat[e.offset + i] = arr[i].get<double>();
  }
}

char hex_digit(std::uint64_t v) { return "0123456789abcdef"[v & 0xf]; }

std::string hash_hex(std::uint64_t h) {
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = hex_digit(h);
    h >>= 4;
  }
  return s;
}

constexpr const char* kCheckpointMagic = "spanhash-checkpoint";

}  // namespace

void Checkpoint::save(const std::string& path) const {
  json j;
  j["magic"] = kCheckpointMagic;
  j["version"] = 1;
  j["config"] = json::parse(cfg.to_json());
  j["config_hash"] = hash_hex(cfg.hash());
  j["step"] = step;
  j["vocab"] = model.vocab.tokens;
  j["params"] = theta_to_json(model.params, model.params.theta);
  j["adam"] = {{"t", adam.t},
               {"m", theta_to_json(model.params, adam.m)},
               {"v", theta_to_json(model.params, adam.v)}};
  j["rng"] = {{"seed", cfg.seed}};
  std::ofstream out(path);
  if (!out) throw TrainerError("cannot write checkpoint: " + path);
  out << j.dump(2) << "\n";
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TrainerError("cannot open checkpoint: " + path);
  json j = json::parse(in);
  if (j.value("magic", "") != kCheckpointMagic)
    throw TrainerError("not a checkpoint file: " + path);
  Checkpoint ck;
  ck.cfg = config_from_json(j.at("config"));
  if (j.value("config_hash", "") != hash_hex(ck.cfg.hash()))
    throw TrainerError("checkpoint config hash mismatch: " + path);
  ck.step = j.at("step").get<int>();
  ck.model.vocab.tokens = j.at("vocab").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < ck.model.vocab.tokens.size(); ++i)
    ck.model.vocab.index[ck.model.vocab.tokens[i]] = static_cast<int>(i);
  ck.model.params =
      encoder::init_params(ck.model.vocab.size(), ck.cfg.encoder_config(), ck.cfg.seed);
  theta_from_json(ck.model.params, j.at("params"), ck.model.params.theta);
  ck.adam.t = j.at("adam").at("t").get<std::int64_t>();
  theta_from_json(ck.model.params, j.at("adam").at("m"), ck.adam.m);
  theta_from_json(ck.model.params, j.at("adam").at("v"), ck.adam.v);
  return ck;
}

std::string format_log_line(const StepLog& log) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%d\t%.12g\t%.17g", log.step, log.lr, log.loss);
  return buf;
}

namespace {

struct ViewCharts {
  chart::MarginalChart<grad::Var> mu;
  std::vector<Code> codes;
};

ViewCharts forward_view(const encoder::ParamView<grad::Var>& pv, const TrainConfig& cfg,
                        const pipeline::Sentence& sentence, const std::vector<int>& ids,
                        int step, int view_tag, int sentence_id) {
  // Sub-streams keyed by (step, view, sentence): the two views of one
  // sentence and different sentences all draw independent noise.
  const std::uint64_t tag = (static_cast<std::uint64_t>(view_tag) << 32) |
                            static_cast<std::uint64_t>(sentence_id);
  RngStream mask_rng =
      RngStream::derive(cfg.seed, "mask", static_cast<std::uint64_t>(step), tag);
  RngStream drop_rng =
      RngStream::derive(cfg.seed, "dropout", static_cast<std::uint64_t>(step), tag);
  auto h = encoder::encode<grad::Var>(cfg.encoder_config(), pv, ids, encoder::Mode::kTrain,
                                      &mask_rng, &drop_rng);
  auto sc = encoder::hash_scores<grad::Var>(cfg.encoder_config(), pv, h);
  ViewCharts vc{chart::marginals(sc), {}};
  vc.codes.reserve(sentence.targets.size());
  for (const auto& t : sentence.targets)
    vc.codes.push_back(contrastive::binarize(vc.mu, t.l, t.r));
  return vc;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::vector<pipeline::Sentence>& corpus,
                  const TrainOptions& opts) {
  cfg.validate();
  if (corpus.empty()) throw TrainerError("empty corpus");

  // Gold labels are interned across the corpus (post-CNF labels, primed and
  // collapsed labels included as distinct labels).
  std::map<std::string, int> label_ids;
  for (const auto& s : corpus)
    for (const auto& t : s.targets) label_ids.emplace(t.label, 0);
  {
    int next = 0;
    for (auto& [label, id] : label_ids) id = next++;
  }

  pipeline::Model model;
  AdamState adam;
  int start_step = 0;
  if (opts.resume) {
    model = opts.resume->model;
    adam = opts.resume->adam;
    start_step = opts.resume->step;
    TrainConfig resumed = opts.resume->cfg;
    if (resumed.hash() != cfg.hash())
      throw TrainerError("resume config does not match the requested config");
  } else {
    std::vector<std::string> all_tokens;
    for (const auto& s : corpus)
      all_tokens.insert(all_tokens.end(), s.tokens.begin(), s.tokens.end());
    model.vocab = encoder::Vocab::from_tokens(all_tokens);
    model.params = encoder::init_params(model.vocab.size(), cfg.encoder_config(), cfg.seed);
  }

  std::vector<int> lengths;
  lengths.reserve(corpus.size());
  for (const auto& s : corpus) lengths.push_back(static_cast<int>(s.tokens.size()));

  std::vector<std::vector<int>> ids_cache;
  ids_cache.reserve(corpus.size());
  for (const auto& s : corpus) ids_cache.push_back(pipeline::to_ids(model.vocab, s.tokens));

  const contrastive::Strategy strategy = contrastive::strategy_from_name(cfg.loss);

  std::ofstream log_file;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    auto mode = start_step > 0 ? std::ios::app : std::ios::trunc;
    log_file.open(opts.out_dir + "/train_log.tsv", mode);
    if (!log_file) throw TrainerError("cannot write training log in " + opts.out_dir);
    model.vocab.save(opts.out_dir + "/vocab.txt");
  }

  TrainResult result;
  grad::Tape tape;

  // Batch stream: epochs are derived deterministically, so resuming at any
  // step replays the identical sequence.
  std::uint64_t epoch = 0;
  std::vector<std::vector<int>> batches = make_batches(lengths, cfg.token_budget, cfg.seed, 0);
  std::size_t batch_pos = 0;
  for (int consumed = 0; consumed < start_step; ++consumed) {
    if (++batch_pos >= batches.size()) {
      batches = make_batches(lengths, cfg.token_budget, cfg.seed, ++epoch);
      batch_pos = 0;
    }
  }

  for (int step = start_step + 1; step <= cfg.total_steps; ++step) {
    const std::vector<int>& batch = batches[batch_pos];
    const double lr = lr_schedule(step, cfg);

    tape.clear();
    std::vector<grad::Var> leaves = encoder::make_leaves(tape, model.params);
    encoder::ParamView<grad::Var> pv{&model.params.layout,
                                     std::span<const grad::Var>(leaves)};

    std::vector<ViewCharts> view1, view2;
    view1.reserve(batch.size());
    view2.reserve(batch.size());
    std::vector<contrastive::BatchSentence> bs(batch.size());
    try {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const pipeline::Sentence& s = corpus[static_cast<std::size_t>(batch[i])];
        const auto& ids = ids_cache[static_cast<std::size_t>(batch[i])];
        view1.push_back(forward_view(pv, cfg, s, ids, step, 1, batch[i]));
        view2.push_back(forward_view(pv, cfg, s, ids, step, 2, batch[i]));
        bs[i].targets.reserve(s.targets.size());
        for (const auto& t : s.targets)
          bs[i].targets.push_back({t.l, t.r, label_ids.at(t.label)});
        bs[i].mu_view1 = &view1[i].mu;
        bs[i].mu_view2 = &view2[i].mu;
        bs[i].codes_view1 = view1[i].codes;
        bs[i].codes_view2 = view2[i].codes;
      }

      grad::Var loss = contrastive::batch_loss(tape, bs, strategy, cfg.temperature);
      tape.backward(loss);

      std::vector<double> grads(model.params.theta.size());
      for (std::size_t i = 0; i < grads.size(); ++i) grads[i] = tape.gradient(leaves[i]);

      if (cfg.clip_norm > 0.0) {
        double norm2 = 0.0;
        for (double g : grads) norm2 += g * g;
        double norm = std::sqrt(norm2);
        if (norm > cfg.clip_norm) {
          double scale = cfg.clip_norm / norm;
          for (double& g : grads) g *= scale;
        }
      }

      adamw_step(model.params.theta, grads, adam, lr, cfg);

      StepLog log{step, lr, loss.value()};
      result.logs.push_back(log);
      if (log_file.is_open()) log_file << format_log_line(log) << "\n";
      if (opts.on_step) opts.on_step(log);
      if (opts.info && (step % 500 == 0 || step == cfg.total_steps))
        *opts.info << "step " << step << " lr " << lr << " loss " << log.loss << "\n";
    } catch (const contrastive::EmptyNegativeSet&) {
      result.skipped_batches += 1;  // degenerate batch: no update
    } catch (const grad::GradError& e) {
      throw TrainerError("numerical abort at step " + std::to_string(step) + ": " +
                         e.what());
    }

    if (!opts.out_dir.empty() && cfg.checkpoint_every > 0 &&
        (step % cfg.checkpoint_every == 0 || step == cfg.total_steps)) {
      char name[64];
      std::snprintf(name, sizeof(name), "/checkpoint_step%06d.json", step);
      Checkpoint ck{cfg, step, model, adam};
      ck.save(opts.out_dir + name);
    }

    if (++batch_pos >= batches.size()) {
      batches = make_batches(lengths, cfg.token_budget, cfg.seed, ++epoch);
      batch_pos = 0;
    }
  }

  if (!opts.out_dir.empty()) {
    Checkpoint ck{cfg, cfg.total_steps, model, adam};
    ck.save(opts.out_dir + "/checkpoint.json");
  }

  result.model = std::move(model);
  return result;
}

}  // namespace spanhash::trainer
