#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "spanhash/chart.hpp"
#include "spanhash/rng.hpp"
#include "spanhash/tape.hpp"

namespace spanhash::encoder {

struct EncoderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidDims : EncoderError {
  using EncoderError::EncoderError;
};
struct SentenceTooLong : EncoderError {
  using EncoderError::EncoderError;
};

inline const std::string kUnkToken = "<unk>";
inline const std::string kMaskToken = "<mask>";

// Line-numbered vocabulary; lines 0/1 are reserved for UNK/MASK.
struct Vocab {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  static constexpr int kUnkId = 0;
  static constexpr int kMaskId = 1;

  static Vocab from_tokens(const std::vector<std::string>& corpus_tokens);
  static Vocab load(const std::string& path);
  void save(const std::string& path) const;

  int id(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? kUnkId : it->second;
  }
  int size() const { return static_cast<int>(tokens.size()); }
};

struct EncoderConfig {
  int dim = 64;
  int k_bits = 12;
  int l_max = 64;
  double p_drop = 0.1;
  double p_mask = 0.15;

  int head_dim() const { return (dim + k_bits - 1) / k_bits; }
};

// Named flat parameter segments: token/position embeddings, one mixing layer,
// and per-bit query/key projections.
struct ParamLayout {
  struct Entry {
    std::string name;
    std::size_t offset;
    int rows;
    int cols;
  };
  std::vector<Entry> entries;
  std::size_t total = 0;

  void add(const std::string& name, int rows, int cols) {
    entries.push_back({name, total, rows, cols});
    total += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  const Entry& find(const std::string& name) const;
};

struct EncoderParams {
  EncoderConfig cfg;
  int vocab_size = 0;
  ParamLayout layout;
  std::vector<double> theta;
};

// Uniform initialization on [-1/sqrt(d), 1/sqrt(d)], deterministic in seed.
EncoderParams init_params(int vocab_size, const EncoderConfig& cfg, std::uint64_t seed);

// One parameter vector viewed as either raw doubles (eval) or tape leaves
// (training); row(name, i) spans are contiguous.
template <class S>
struct ParamView {
  const ParamLayout* layout;
  std::span<const S> flat;

  std::span<const S> row(const ParamLayout::Entry& e, int i) const {
    return flat.subspan(e.offset + static_cast<std::size_t>(i) * static_cast<std::size_t>(e.cols),
                        static_cast<std::size_t>(e.cols));
  }
};

// Pushes every parameter onto the tape as a leaf; index-aligned with theta.
std::vector<grad::Var> make_leaves(grad::Tape& tape, const EncoderParams& params);

enum class Mode { kTrain, kEval };

template <class S>
using HiddenStates = std::vector<std::vector<S>>;

// h_i = tanh(W_mix (emb(tok_i) + pos_i) + b_mix). Train mode masks tokens
// with probability p_mask before lookup and applies inverted dropout with
// probability p_drop to the mixed states; eval mode is deterministic.
template <class S>
HiddenStates<S> encode(const EncoderConfig& cfg, const ParamView<S>& pv,
                       const std::vector<int>& token_ids, Mode mode,
                       RngStream* mask_rng, RngStream* drop_rng);

// g_k(l, r, +1) = (W^Q_k h_l)^T (W^K_k h_{r-1}) / sqrt(d_k) over every span;
// width-1 spans use the same state on both sides.
template <class S>
chart::ScoreChart<S> hash_scores(const EncoderConfig& cfg, const ParamView<S>& pv,
                                 const HiddenStates<S>& h);

extern template HiddenStates<double> encode(const EncoderConfig&, const ParamView<double>&,
                                            const std::vector<int>&, Mode, RngStream*,
                                            RngStream*);
extern template HiddenStates<grad::Var> encode(const EncoderConfig&,
                                               const ParamView<grad::Var>&,
                                               const std::vector<int>&, Mode, RngStream*,
                                               RngStream*);
extern template chart::ScoreChart<double> hash_scores(const EncoderConfig&,
                                                      const ParamView<double>&,
                                                      const HiddenStates<double>&);
extern template chart::ScoreChart<grad::Var> hash_scores(const EncoderConfig&,
                                                         const ParamView<grad::Var>&,
                                                         const HiddenStates<grad::Var>&);

}  // namespace spanhash::encoder
