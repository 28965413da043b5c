#pragma once

#include <span>
#include <string>
#include <vector>

#include "spanhash/chart.hpp"
#include "spanhash/codebook.hpp"
#include "spanhash/encoder.hpp"
#include "spanhash/metrics.hpp"
#include "spanhash/tree.hpp"

namespace spanhash::pipeline {

// One training sentence: tokens plus the CNF target tree and its spans.
struct Sentence {
  std::vector<std::string> tokens;
  treebank::BinaryTree gold;
  std::vector<treebank::LabeledSpan> targets;
};

Sentence make_sentence(const treebank::Tree& raw);
Sentence make_sentence(const treebank::EntityAnnotation& ann);

struct Model {
  encoder::Vocab vocab;
  encoder::EncoderParams params;

  const encoder::EncoderConfig& cfg() const { return params.cfg; }
};

std::vector<int> to_ids(const encoder::Vocab& vocab, const std::vector<std::string>& tokens);

// Deterministic eval-mode forward (no masking, no dropout), plain doubles.
chart::ScoreChart<double> eval_scores(const Model& model,
                                      const std::vector<std::string>& tokens);

// Decode to a coded tree, then to a labeled binary tree via the codebook.
treebank::BinaryTree coded_to_tree(const chart::CodedTree& coded,
                                   const codebook::Codebook& cb,
                                   const std::vector<std::string>& tokens);
treebank::BinaryTree decode_sentence(const Model& model, const codebook::Codebook& cb,
                                     const std::vector<std::string>& tokens);

// Eval-mode counting pass over the training corpus: binarize each target
// span's code and count it against the span's gold label.
codebook::Codebook build_codebook(const Model& model, std::span<const Sentence> corpus);

metrics::F1Report evaluate_parse(const Model& model, const codebook::Codebook& cb,
                                 const std::vector<treebank::Tree>& gold);
metrics::F1Report evaluate_ner(const Model& model, const codebook::Codebook& cb,
                               const std::vector<treebank::EntityAnnotation>& gold);

}  // namespace spanhash::pipeline
