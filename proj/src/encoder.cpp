#include "spanhash/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace spanhash::encoder {

Vocab Vocab::from_tokens(const std::vector<std::string>& corpus_tokens) {
  Vocab v;
  v.tokens = {kUnkToken, kMaskToken};
  std::set<std::string> uniq(corpus_tokens.begin(), corpus_tokens.end());
  uniq.erase(kUnkToken);
  uniq.erase(kMaskToken);
  v.tokens.insert(v.tokens.end(), uniq.begin(), uniq.end());
  for (std::size_t i = 0; i < v.tokens.size(); ++i)
    v.index[v.tokens[i]] = static_cast<int>(i);
  return v;
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EncoderError("cannot open vocabulary: " + path);
  Vocab v;
  std::string line;
  while (std::getline(in, line)) v.tokens.push_back(line);
  if (v.tokens.size() < 2 || v.tokens[0] != kUnkToken || v.tokens[1] != kMaskToken)
    throw EncoderError("vocabulary must reserve lines 0/1 for " + kUnkToken + "/" +
                       kMaskToken);
  for (std::size_t i = 0; i < v.tokens.size(); ++i)
    v.index[v.tokens[i]] = static_cast<int>(i);
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw EncoderError("cannot write vocabulary: " + path);
  for (const std::string& t : tokens) out << t << "\n";
}

const ParamLayout::Entry& ParamLayout::find(const std::string& name) const {
  for (const Entry& e : entries)
    if (e.name == name) return e;
  throw EncoderError("unknown parameter segment: " + name);
}

EncoderParams init_params(int vocab_size, const EncoderConfig& cfg, std::uint64_t seed) {
  if (cfg.dim < 1 || cfg.k_bits < 1 || cfg.dim < cfg.k_bits)
    throw InvalidDims("need dim >= k_bits >= 1, got dim=" + std::to_string(cfg.dim) +
                      " k_bits=" + std::to_string(cfg.k_bits));
  if (vocab_size < 2) throw InvalidDims("vocabulary must include UNK and MASK");
  if (cfg.l_max < 1) throw InvalidDims("l_max must be positive");

  EncoderParams p;
  p.cfg = cfg;
  p.vocab_size = vocab_size;
  const int dk = cfg.head_dim();
  p.layout.add("tok_emb", vocab_size, cfg.dim);
  p.layout.add("pos_emb", cfg.l_max, cfg.dim);
  p.layout.add("w_mix", cfg.dim, cfg.dim);
  p.layout.add("b_mix", 1, cfg.dim);
  for (int k = 1; k <= cfg.k_bits; ++k)
    p.layout.add("w_q." + std::to_string(k), dk, cfg.dim);
  for (int k = 1; k <= cfg.k_bits; ++k)
    p.layout.add("w_k." + std::to_string(k), dk, cfg.dim);

  p.theta.assign(p.layout.total, 0.0);
  RngStream rng = RngStream::derive(seed, "init");
  // Base scale 1/sqrt(d) with per-segment gains chosen so initial hidden
  // states are O(0.5) and initial span scores are O(0.5-1): the two-view
  // code bootstrap stalls when scores start at noise level.
  const double base = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
  const double emb_gain = std::sqrt(static_cast<double>(cfg.dim));
  const double mix_gain = 2.0;
  const double qk_gain = 3.0;
  for (const auto& e : p.layout.entries) {
    if (e.name == "b_mix") continue;  // bias starts at zero
    double s = base;
    if (e.name == "tok_emb" || e.name == "pos_emb") s *= emb_gain;
    if (e.name == "w_mix") s *= mix_gain;
    if (e.name.rfind("w_q.", 0) == 0 || e.name.rfind("w_k.", 0) == 0) s *= qk_gain;
    for (std::size_t i = 0; i < static_cast<std::size_t>(e.rows) * e.cols; ++i)
      p.theta[e.offset + i] = rng.uniform(-s, s);
  }
  return p;
}

std::vector<grad::Var> make_leaves(grad::Tape& tape, const EncoderParams& params) {
  std::vector<grad::Var> leaves;
  leaves.reserve(params.theta.size());
  for (double v : params.theta) leaves.push_back(tape.leaf(v));
  return leaves;
}

namespace {

inline double scale_s(double x, double m) { return x * m; }
inline grad::Var scale_s(grad::Var x, double m) { return x.tape->scale(x, m); }

inline double add_s(double x, double y) { return x + y; }
inline grad::Var add_s(grad::Var x, grad::Var y) { return x + y; }

inline double tanh_s(double x) { return std::tanh(x); }
inline grad::Var tanh_s(grad::Var x) { return x.tape->tanh(x); }

}  // namespace

template <class S>
HiddenStates<S> encode(const EncoderConfig& cfg, const ParamView<S>& pv,
                       const std::vector<int>& token_ids, Mode mode,
                       RngStream* mask_rng, RngStream* drop_rng) {
  const int n = static_cast<int>(token_ids.size());
  if (n > cfg.l_max)
    throw SentenceTooLong("sentence length " + std::to_string(n) + " exceeds l_max=" +
                          std::to_string(cfg.l_max));
  const bool train = mode == Mode::kTrain;
  const auto& tok_e = pv.layout->find("tok_emb");
  const auto& pos_e = pv.layout->find("pos_emb");
  const auto& mix_e = pv.layout->find("w_mix");
  const auto& bias_e = pv.layout->find("b_mix");
  auto bias = pv.row(bias_e, 0);

  HiddenStates<S> h(static_cast<std::size_t>(n));
  std::vector<S> e(static_cast<std::size_t>(cfg.dim));
  for (int i = 0; i < n; ++i) {
    int id = token_ids[static_cast<std::size_t>(i)];
    if (train && cfg.p_mask > 0.0 && mask_rng->bernoulli(cfg.p_mask)) id = Vocab::kMaskId;
    auto tok = pv.row(tok_e, id);
    auto pos = pv.row(pos_e, i);
    for (int j = 0; j < cfg.dim; ++j)
      e[static_cast<std::size_t>(j)] =
          add_s(tok[static_cast<std::size_t>(j)], pos[static_cast<std::size_t>(j)]);

    auto& hi = h[static_cast<std::size_t>(i)];
    hi.reserve(static_cast<std::size_t>(cfg.dim));
    for (int j = 0; j < cfg.dim; ++j) {
      S pre = add_s(grad::dot(pv.row(mix_e, j), std::span<const S>(e)),
                    bias[static_cast<std::size_t>(j)]);
      hi.push_back(tanh_s(pre));
    }
    if (train && cfg.p_drop > 0.0) {
      const double keep_scale = 1.0 / (1.0 - cfg.p_drop);
      for (int j = 0; j < cfg.dim; ++j) {
        double m = drop_rng->bernoulli(cfg.p_drop) ? 0.0 : keep_scale;
        hi[static_cast<std::size_t>(j)] = scale_s(hi[static_cast<std::size_t>(j)], m);
      }
    }
  }
  return h;
}

template <class S>
chart::ScoreChart<S> hash_scores(const EncoderConfig& cfg, const ParamView<S>& pv,
                                 const HiddenStates<S>& h) {
  const int n = static_cast<int>(h.size());
  const int dk = cfg.head_dim();
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  // Boundary projections depend only on (bit, token), so compute them once.
  std::vector<std::vector<std::vector<S>>> q(static_cast<std::size_t>(cfg.k_bits)),
      key(static_cast<std::size_t>(cfg.k_bits));
  for (int k = 1; k <= cfg.k_bits; ++k) {
    const auto& wq = pv.layout->find("w_q." + std::to_string(k));
    const auto& wk = pv.layout->find("w_k." + std::to_string(k));
    auto& qk = q[static_cast<std::size_t>(k - 1)];
    auto& kk = key[static_cast<std::size_t>(k - 1)];
    qk.resize(static_cast<std::size_t>(n));
    kk.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      auto hs = std::span<const S>(h[static_cast<std::size_t>(i)]);
      for (int j = 0; j < dk; ++j)
        qk[static_cast<std::size_t>(i)].push_back(grad::dot(pv.row(wq, j), hs));
      for (int j = 0; j < dk; ++j)
        kk[static_cast<std::size_t>(i)].push_back(grad::dot(pv.row(wk, j), hs));
    }
  }

  chart::ScoreChart<S> sc(n, cfg.k_bits);
  for (int r = 1; r <= n; ++r) {
    for (int l = 0; l < r; ++l) {
      for (int k = 1; k <= cfg.k_bits; ++k) {
        const auto& ql = q[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(l)];
        const auto& kr = key[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(r - 1)];
        S raw = grad::dot(std::span<const S>(ql), std::span<const S>(kr));
        sc.at(l, r, k) = scale_s(raw, inv_sqrt_dk);
      }
    }
  }
  return sc;
}

template HiddenStates<double> encode(const EncoderConfig&, const ParamView<double>&,
                                     const std::vector<int>&, Mode, RngStream*, RngStream*);
template HiddenStates<grad::Var> encode(const EncoderConfig&, const ParamView<grad::Var>&,
                                        const std::vector<int>&, Mode, RngStream*,
                                        RngStream*);
template chart::ScoreChart<double> hash_scores(const EncoderConfig&,
                                               const ParamView<double>&,
                                               const HiddenStates<double>&);
template chart::ScoreChart<grad::Var> hash_scores(const EncoderConfig&,
                                                  const ParamView<grad::Var>&,
                                                  const HiddenStates<grad::Var>&);

}  // namespace spanhash::encoder
