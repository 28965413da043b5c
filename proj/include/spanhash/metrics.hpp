#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "spanhash/tree.hpp"

namespace spanhash::metrics {

struct MetricsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LengthMismatch : MetricsError {
  using MetricsError::MetricsError;
};

struct F1Report {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::int64_t matched = 0;
  std::int64_t gold = 0;
  std::int64_t predicted = 0;
};

F1Report make_report(std::int64_t matched, std::int64_t gold, std::int64_t predicted);

// Labeled bracketing F1 over de-binarized trees, comparing multisets of
// (l, r, label). The headline excludes pre-terminal spans and a TOP root;
// include_preterminals adds width-agnostic leaf scoring as a secondary view.
F1Report labeled_f1(const std::vector<treebank::Tree>& gold,
                    const std::vector<treebank::Tree>& pred,
                    bool include_preterminals = false);

// Entity F1 for decoded + translated trees: entities are spans whose label
// survives de-binarization and is neither the null filler nor TOP.
F1Report ner_f1(const std::vector<treebank::EntityAnnotation>& gold,
                const std::vector<treebank::BinaryTree>& pred);

// Entities read off one predicted tree (exposed for the CLI and tests).
std::vector<treebank::LabeledSpan> extract_entities(const treebank::BinaryTree& tree);

std::string to_tsv(const F1Report& r);
std::string to_summary(const F1Report& r);

}  // namespace spanhash::metrics
