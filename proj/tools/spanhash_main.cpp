#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spanhash/chart.hpp"
#include "spanhash/codebook.hpp"
#include "spanhash/contrastive.hpp"
#include "spanhash/encoder.hpp"
#include "spanhash/metrics.hpp"
#include "spanhash/pipeline.hpp"
#include "spanhash/rng.hpp"
#include "spanhash/synth.hpp"
#include "spanhash/tape.hpp"
#include "spanhash/trainer.hpp"
#include "spanhash/tree.hpp"

namespace {

using namespace spanhash;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerification = 3;

enum class Task { kAuto, kParse, kNer };

Task task_from_string(const std::string& s) {
  if (s == "auto") return Task::kAuto;
  if (s == "parse") return Task::kParse;
  if (s == "ner") return Task::kNer;
  throw trainer::TrainerError("unknown task: " + s);
}

Task sniff_task(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw trainer::TrainerError("cannot open corpus: " + path);
  char c = 0;
  while (in.get(c)) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') continue;
    if (c == '(') return Task::kParse;
    if (c == '{') return Task::kNer;
    break;
  }
  throw trainer::TrainerError("cannot detect corpus format of " + path);
}

Task resolve_task(Task requested, const std::string& corpus_path) {
  return requested == Task::kAuto ? sniff_task(corpus_path) : requested;
}

struct LoadedCorpus {
  Task task = Task::kParse;
  std::vector<treebank::Tree> trees;
  std::vector<treebank::EntityAnnotation> annotations;
  std::vector<pipeline::Sentence> sentences;
};

LoadedCorpus load_corpus(const std::string& path, Task requested) {
  LoadedCorpus c;
  c.task = resolve_task(requested, path);
  if (c.task == Task::kParse) {
    c.trees = treebank::read_tree_corpus(path);
    for (const auto& t : c.trees) c.sentences.push_back(pipeline::make_sentence(t));
  } else {
    c.annotations = treebank::read_entity_corpus(path);
    for (const auto& a : c.annotations) c.sentences.push_back(pipeline::make_sentence(a));
  }
  return c;
}

void print_resolved_config(const trainer::TrainConfig& cfg) {
  std::cout << "resolved config:\n" << cfg.to_json() << "\n";
  std::cout << "seed: " << cfg.seed << "\n";
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) seeds.push_back(std::stoull(item));
  }
  return seeds;
}

int cmd_train(const std::string& config_path, const std::string& corpus_path,
              const std::string& eval_path, const std::string& task_name,
              const std::string& out_dir, const std::string& seeds_arg,
              const std::string& loss_override, int steps_override,
              const std::string& resume_path) {
  trainer::TrainConfig cfg;
  if (!config_path.empty()) cfg = trainer::TrainConfig::load(config_path);
  if (!loss_override.empty()) cfg.loss = loss_override;
  if (steps_override > 0) cfg.total_steps = steps_override;

  std::vector<std::uint64_t> seeds;
  if (!seeds_arg.empty())
    seeds = parse_seed_list(seeds_arg);
  else
    seeds = {cfg.seed};

  LoadedCorpus corpus = load_corpus(corpus_path, task_from_string(task_name));
  LoadedCorpus eval;
  bool do_eval = !eval_path.empty();
  if (do_eval) eval = load_corpus(eval_path, corpus.task);

  double f1_sum = 0.0;
  for (std::size_t run = 0; run < seeds.size(); ++run) {
    trainer::TrainConfig run_cfg = cfg;
    run_cfg.seed = seeds[run];
    run_cfg.validate();
    print_resolved_config(run_cfg);

    trainer::TrainOptions opts;
    opts.info = &std::cout;
    opts.out_dir = seeds.size() == 1 ? out_dir : out_dir + "/seed" + std::to_string(seeds[run]);
    if (!resume_path.empty()) opts.resume = trainer::Checkpoint::load(resume_path);

    auto result = trainer::train(run_cfg, corpus.sentences, opts);
    if (result.skipped_batches > 0)
      std::cout << "skipped degenerate batches: " << result.skipped_batches << "\n";

    auto cb = pipeline::build_codebook(result.model, corpus.sentences);
    cb.save(opts.out_dir + "/codebook.json");

    if (do_eval) {
      metrics::F1Report rep;
      if (corpus.task == Task::kParse)
        rep = pipeline::evaluate_parse(result.model, cb, eval.trees);
      else
        rep = pipeline::evaluate_ner(result.model, cb, eval.annotations);
      std::cout << "seed " << seeds[run] << " eval " << metrics::to_summary(rep) << "\n";
      f1_sum += rep.f1;
    }
  }
  if (do_eval && seeds.size() > 1)
    std::cout << "mean F1 over " << seeds.size() << " seeds: "
              << f1_sum / static_cast<double>(seeds.size()) << "\n";
  return kExitOk;
}

std::string hex_suffix_label(const std::string& label, const std::string& hex) {
  return label + ":" + hex;
}

int cmd_parse(const std::string& model_path, const std::string& codebook_path,
              const std::string& input_path, bool emit_codes) {
  trainer::Checkpoint ck = trainer::Checkpoint::load(model_path);
  print_resolved_config(ck.cfg);
  codebook::Codebook cb = codebook::Codebook::load(codebook_path);
  if (cb.k() != ck.cfg.k_bits)
    throw trainer::TrainerError("codebook bit width does not match the model");

  std::ifstream in(input_path);
  if (!in) throw trainer::TrainerError("cannot open input: " + input_path);
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    if (tokens.empty()) continue;

    auto sc = pipeline::eval_scores(ck.model, tokens);
    auto coded = chart::viterbi_decode(sc);
    auto bt = pipeline::coded_to_tree(coded, cb, tokens);
    treebank::Tree flat = treebank::from_cnf(bt);
    if (emit_codes) {
      std::map<std::pair<int, int>, std::string> hex_of;
      for (const auto& cs : coded.spans) hex_of[{cs.l, cs.r}] = cs.code.hex();
      std::vector<treebank::TreeNode*> stack = {&flat.root};
      while (!stack.empty()) {
        treebank::TreeNode* n = stack.back();
        stack.pop_back();
        n->label = hex_suffix_label(n->label, hex_of.at({n->l, n->r}));
        for (auto& c : n->children) stack.push_back(&c);
      }
    }
    std::cout << treebank::to_bracketed(flat) << "\n";
  }
  return kExitOk;
}

int cmd_codebook(const std::string& model_path, const std::string& corpus_path,
                 const std::string& task_name, const std::string& out_path) {
  trainer::Checkpoint ck = trainer::Checkpoint::load(model_path);
  print_resolved_config(ck.cfg);
  LoadedCorpus corpus = load_corpus(corpus_path, task_from_string(task_name));
  auto cb = pipeline::build_codebook(ck.model, corpus.sentences);
  cb.save(out_path);
  std::cout << "codebook with " << cb.table().size() << " codes written to " << out_path
            << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& gold_path, const std::string& pred_path,
             const std::string& task_name) {
  Task task = resolve_task(task_from_string(task_name), gold_path);
  metrics::F1Report rep;
  if (task == Task::kParse) {
    auto gold = treebank::read_tree_corpus(gold_path);
    auto pred = treebank::read_tree_corpus(pred_path);
    rep = metrics::labeled_f1(gold, pred);
    auto with_leaves = metrics::labeled_f1(gold, pred, true);
    std::cout << metrics::to_tsv(rep);
    std::cout << "f1_with_preterminals\t" << with_leaves.f1 << "\n";
  } else {
    auto gold = treebank::read_entity_corpus(gold_path);
    auto pred_trees = treebank::read_tree_corpus(pred_path);
    std::vector<treebank::BinaryTree> pred;
    for (const auto& t : pred_trees) pred.push_back(treebank::to_cnf(t));
    rep = metrics::ner_f1(gold, pred);
    std::cout << metrics::to_tsv(rep);
  }
  std::cout << metrics::to_summary(rep) << "\n";
  return kExitOk;
}

int cmd_oracle_check(int n_max, int k_max, int trials, std::uint64_t seed, double tol) {
  if (n_max > 6 || k_max > 4 || n_max < 2 || k_max < 1) {
    std::cerr << "oracle-check requires 2 <= n <= 6 and 1 <= k <= 4\n";
    return kExitUsage;
  }
  std::cout << "oracle-check: n<=" << n_max << " k<=" << k_max << " trials=" << trials
            << " seed=" << seed << " tol=" << tol << "\n";
  RngStream rng = RngStream::derive(seed, "oracle-check");
  double max_dz = 0.0, max_dmu = 0.0, max_dbit = 0.0, max_dbest = 0.0;
  for (int t = 0; t < trials; ++t) {
    int n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_max - 1)));
    int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k_max)));
    chart::ScoreChart<double> sc(n, k);
    for (auto& g : sc.g) g = rng.uniform(-3.0, 3.0);

    auto oracle = chart::enumerate_oracle(sc);
    auto ic = chart::inside(sc);
    auto oc = chart::outside(ic, sc);
    auto mu = chart::span_marginals(ic, oc);
    auto mc = chart::bit_marginals(mu, sc);
    auto best = chart::viterbi_decode(sc);

    max_dz = std::max(max_dz, std::abs(ic.log_z - oracle.log_z));
    for (std::size_t i = 0; i < mu.size(); ++i)
      max_dmu = std::max(max_dmu, std::abs(mu[i] - oracle.mu_span[i]));
    for (std::size_t i = 0; i < mc.mu_bit.size(); ++i)
      max_dbit = std::max(max_dbit, std::abs(mc.mu_bit[i] - oracle.mu_bit[i]));
    max_dbest = std::max(max_dbest, std::abs(best.score - oracle.best_score));
  }
  std::cout << "max |dlogZ| = " << max_dz << "\n"
            << "max |dmu_span| = " << max_dmu << "\n"
            << "max |dmu_bit| = " << max_dbit << "\n"
            << "max |dbest| = " << max_dbest << "\n";
  bool pass = max_dz <= tol && max_dmu <= tol && max_dbit <= tol && max_dbest <= tol;
  std::cout << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? kExitOk : kExitVerification;
}

int cmd_gradcheck(double h, double tol) {
  // Default toy: two short sentences, all encoder parameters, end-to-end
  // two-view batch loss with augmentation noise replayed per evaluation.
  std::vector<pipeline::Sentence> sentences;
  sentences.push_back(pipeline::make_sentence(
      treebank::parse_bracketed("(S (A (Ao ao0) (Ac ac0)) (B (Bo bo0) (Bc bc0)))")));
  sentences.push_back(pipeline::make_sentence(
      treebank::parse_bracketed("(S (A (Ao ao1) (F f0) (Ac ac0)) (Fx fx))")));

  trainer::TrainConfig cfg;
  cfg.k_bits = 3;
  cfg.dim = 10;
  cfg.l_max = 8;
  cfg.p_drop = 0.1;
  cfg.p_mask = 0.15;
  cfg.seed = 20;
  std::cout << "gradcheck toy batch: h=" << h << " tol=" << tol << "\n";
  print_resolved_config(cfg);

  std::vector<std::string> all_tokens;
  for (const auto& s : sentences)
    all_tokens.insert(all_tokens.end(), s.tokens.begin(), s.tokens.end());
  auto vocab = encoder::Vocab::from_tokens(all_tokens);
  auto params = encoder::init_params(vocab.size(), cfg.encoder_config(), cfg.seed);

  std::map<std::string, int> label_ids;
  for (const auto& s : sentences)
    for (const auto& t : s.targets) label_ids.emplace(t.label, 0);
  int next = 0;
  for (auto& [label, id] : label_ids) id = next++;

  auto builder = [&](grad::Tape& tape, std::span<const grad::Var> leaves) {
    encoder::ParamView<grad::Var> pv{&params.layout, leaves};
    std::vector<chart::MarginalChart<grad::Var>> mus;
    mus.reserve(2 * sentences.size());
    std::vector<contrastive::BatchSentence> batch(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const auto ids = pipeline::to_ids(vocab, sentences[i].tokens);
      for (int view = 1; view <= 2; ++view) {
        RngStream mask = RngStream::derive(cfg.seed, "mask", i, static_cast<std::uint64_t>(view));
        RngStream drop = RngStream::derive(cfg.seed, "drop", i, static_cast<std::uint64_t>(view));
        auto hs = encoder::encode<grad::Var>(cfg.encoder_config(), pv, ids,
                                             encoder::Mode::kTrain, &mask, &drop);
        auto sc = encoder::hash_scores<grad::Var>(cfg.encoder_config(), pv, hs);
        mus.push_back(chart::marginals(sc));
      }
      auto& b = batch[i];
      b.mu_view1 = &mus[2 * i];
      b.mu_view2 = &mus[2 * i + 1];
      for (const auto& t : sentences[i].targets) {
        b.targets.push_back({t.l, t.r, label_ids.at(t.label)});
        b.codes_view1.push_back(contrastive::binarize(*b.mu_view1, t.l, t.r));
        b.codes_view2.push_back(contrastive::binarize(*b.mu_view2, t.l, t.r));
      }
    }
    (void)tape;
    return contrastive::batch_loss(*leaves[0].tape, batch,
                                   contrastive::strategy_from_name("max"));
  };

  auto report = grad::grad_check(builder, params.theta, h, tol);
  std::cout << "checked " << report.entries.size() << " parameters\n";
  std::cout << "max rel err = " << report.max_rel_err << " at parameter "
            << report.worst_index << "\n";
  std::cout << (report.pass ? "PASS" : "FAIL") << " (tol " << tol << ")\n";
  return report.pass ? kExitOk : kExitVerification;
}

int cmd_report_coverage(const std::string& model_path, const std::string& corpus_path,
                        const std::string& task_name, const std::string& out_path) {
  trainer::Checkpoint ck = trainer::Checkpoint::load(model_path);
  print_resolved_config(ck.cfg);
  LoadedCorpus corpus = load_corpus(corpus_path, task_from_string(task_name));
  auto cb = pipeline::build_codebook(ck.model, corpus.sentences);
  auto rows = cb.coverage_report();

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw trainer::TrainerError("cannot write coverage report: " + out_path);
    out = &file;
  }
  for (const auto& r : rows) {
    char pct[32];
    std::snprintf(pct, sizeof(pct), "%.2f%%", r.percent);
    *out << r.label << "\t" << r.code.hex() << "\t" << pct << "\n";
  }
  if (!out_path.empty()) {
    std::cout << "coverage rows: " << rows.size() << " -> " << out_path << "\n";
    for (const auto& r : rows) {
      char pct[32];
      std::snprintf(pct, sizeof(pct), "%.2f%%", r.percent);
      std::cout << r.label << "\t" << r.code.bitstring() << "\t" << pct << "\n";
    }
  }
  return kExitOk;
}

int cmd_gen_corpus(const std::string& task_name, int count, std::uint64_t seed,
                   const std::string& out_path, int num_labels, int num_ambiguous,
                   double nesting_prob, int max_len) {
  Task task = task_from_string(task_name);
  if (task == Task::kAuto) {
    std::cerr << "gen-corpus requires --task parse or --task ner\n";
    return kExitUsage;
  }
  std::cout << "gen-corpus task=" << task_name << " count=" << count << " seed=" << seed
            << "\n";
  if (task == Task::kParse) {
    synth::ParseGrammar g;
    g.num_labels = num_labels;
    g.num_ambiguous = num_ambiguous;
    g.max_len = max_len;
    auto corpus = synth::gen_parse_corpus(g, count, seed);
    treebank::write_tree_corpus(out_path, corpus);
    std::cout << "label distribution:\n";
    for (const auto& [label, n] : synth::label_distribution(corpus))
      std::cout << "  " << label << "\t" << n << "\n";
  } else {
    synth::NerGrammar g;
    g.nesting_prob = nesting_prob;
    g.max_len = max_len;
    auto corpus = synth::gen_ner_corpus(g, count, seed);
    treebank::write_entity_corpus(out_path, corpus);
    std::map<std::string, int> dist;
    int nested = 0;
    for (const auto& ann : corpus) {
      for (const auto& e : ann.entities) dist[e.label] += 1;
      for (std::size_t i = 0; i < ann.entities.size(); ++i)
        for (std::size_t j = 0; j < ann.entities.size(); ++j) {
          if (i == j) continue;
          const auto& a = ann.entities[i];
          const auto& b = ann.entities[j];
          if (a.l <= b.l && b.r <= a.r && (a.l != b.l || a.r != b.r)) ++nested;
        }
    }
    std::cout << "entity distribution:\n";
    for (const auto& [label, n] : dist) std::cout << "  " << label << "\t" << n << "\n";
    std::cout << "strictly nested pairs: " << nested << "\n";
  }
  std::cout << "wrote " << count << " sentences to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bit-level span hashing parser"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string t_config, t_corpus, t_eval, t_task = "auto", t_out = "run", t_seeds,
              t_loss, t_resume;
  int t_steps = 0;
  train->add_option("--config", t_config, "JSON config file");
  train->add_option("--corpus", t_corpus, "training corpus")->required();
  train->add_option("--eval-corpus", t_eval, "held-out corpus for F1");
  train->add_option("--task", t_task, "parse|ner|auto");
  train->add_option("--out", t_out, "output directory");
  train->add_option("--seeds", t_seeds, "comma-separated seed list");
  train->add_option("--loss", t_loss, "self|sup|sup-max|hash|hash-mean|max");
  train->add_option("--steps", t_steps, "override total steps");
  train->add_option("--resume", t_resume, "checkpoint to resume from");

  // parse
  auto* parse = app.add_subcommand("parse", "decode sentences to trees");
  std::string p_model, p_codebook, p_input;
  bool p_emit_codes = false;
  parse->add_option("--model", p_model, "checkpoint file")->required();
  parse->add_option("--codebook", p_codebook, "codebook file")->required();
  parse->add_option("--input", p_input, "tokenized sentences, one per line")->required();
  parse->add_flag("--emit-codes", p_emit_codes, "append hex span codes to labels");

  // codebook
  auto* cbcmd = app.add_subcommand("codebook", "build the code vocabulary");
  std::string c_model, c_corpus, c_task = "auto", c_out = "codebook.json";
  cbcmd->add_option("--model", c_model)->required();
  cbcmd->add_option("--corpus", c_corpus)->required();
  cbcmd->add_option("--task", c_task, "parse|ner|auto");
  cbcmd->add_option("--out", c_out, "output JSON path");

  // eval
  auto* evalcmd = app.add_subcommand("eval", "score predictions against gold");
  std::string e_gold, e_pred, e_task = "auto";
  evalcmd->add_option("--gold", e_gold)->required();
  evalcmd->add_option("--pred", e_pred)->required();
  evalcmd->add_option("--task", e_task, "parse|ner|auto");

  // oracle-check
  auto* oracle = app.add_subcommand("oracle-check", "verify charts against enumeration");
  int o_n = 4, o_k = 2, o_trials = 100;
  std::uint64_t o_seed = 1;
  double o_tol = 1e-10;
  oracle->add_option("--n", o_n, "max sentence length (<= 6)");
  oracle->add_option("--k", o_k, "max bits (<= 4)");
  oracle->add_option("--trials", o_trials);
  oracle->add_option("--seed", o_seed);
  oracle->add_option("--tol", o_tol);

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the full loss");
  double g_h = 1e-5, g_tol = 1e-4;
  gc->add_option("--fd-step", g_h, "central difference step");
  gc->add_option("--tol", g_tol, "relative error tolerance");

  // report-coverage
  auto* cov = app.add_subcommand("report-coverage", "per-label code coverage table");
  std::string v_model, v_corpus, v_task = "auto", v_out;
  cov->add_option("--model", v_model)->required();
  cov->add_option("--corpus", v_corpus)->required();
  cov->add_option("--task", v_task, "parse|ner|auto");
  cov->add_option("--out", v_out, "TSV output path (default stdout)");

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic corpus");
  std::string n_task, n_out;
  int n_count = 1000, n_labels = 6, n_ambiguous = 0, n_max_len = 12;
  std::uint64_t n_seed = 1;
  double n_nesting = 0.5;
  gen->add_option("--task", n_task, "parse|ner")->required();
  gen->add_option("--count", n_count);
  gen->add_option("--seed", n_seed);
  gen->add_option("--out", n_out)->required();
  gen->add_option("--labels", n_labels, "parse: phrase label count");
  gen->add_option("--ambiguous", n_ambiguous, "parse: labels with two token clusters");
  gen->add_option("--nesting", n_nesting, "ner: nesting probability");
  gen->add_option("--max-len", n_max_len);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train)
      return cmd_train(t_config, t_corpus, t_eval, t_task, t_out, t_seeds, t_loss,
                       t_steps, t_resume);
    if (*parse) return cmd_parse(p_model, p_codebook, p_input, p_emit_codes);
    if (*cbcmd) return cmd_codebook(c_model, c_corpus, c_task, c_out);
    if (*evalcmd) return cmd_eval(e_gold, e_pred, e_task);
    if (*oracle) return cmd_oracle_check(o_n, o_k, o_trials, o_seed, o_tol);
    if (*gc) return cmd_gradcheck(g_h, g_tol);
    if (*cov) return cmd_report_coverage(v_model, v_corpus, v_task, v_out);
    if (*gen)
      return cmd_gen_corpus(n_task, n_count, n_seed, n_out, n_labels, n_ambiguous,
                            n_nesting, n_max_len);
  } catch (const grad::NonFiniteValue& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const grad::NonFiniteGradient& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const trainer::TrainerError& e) {
    std::string msg = e.what();
    if (msg.find("numerical abort") != std::string::npos) {
      std::cerr << msg << "\n";
      return kExitNumerical;
    }
    std::cerr << "error: " << msg << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
