#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace spanhash::treebank {

struct TreeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnbalancedBrackets : TreeError {
  using TreeError::TreeError;
};
struct EmptyTree : TreeError {
  using TreeError::TreeError;
};
struct EmptyLabel : TreeError {
  using TreeError::TreeError;
};
struct CrossingEntities : TreeError {
  using TreeError::TreeError;
};

// A node is either a pre-terminal (label over one token, no children) or an
// internal node with >= 1 child trees. Spans use fencepost indices [l, r).
struct TreeNode {
  std::string label;
  int l = 0;
  int r = 0;
  std::vector<TreeNode> children;
  std::string token;  // set iff pre-terminal

  bool is_preterminal() const { return children.empty(); }
};

struct Tree {
  TreeNode root;
  int n = 0;  // token count
};

// Binary form: every internal node has exactly two children; labels may be
// primed ("X'") or unary-collapsed ("A+B").
struct BinaryTree {
  TreeNode root;
  int n = 0;
};

struct LabeledSpan {
  int l = 0;
  int r = 0;
  std::string label;

  bool operator==(const LabeledSpan&) const = default;
  bool operator<(const LabeledSpan& o) const {
    if (l != o.l) return l < o.l;
    if (r != o.r) return r < o.r;
    return label < o.label;
  }
};

struct EntityAnnotation {
  std::vector<std::string> tokens;
  std::vector<LabeledSpan> entities;  // r exclusive; nested or disjoint
};

inline const std::string kNullLabel = "\xE2\x88\x85";  // U+2205 "∅"
inline const std::string kTopLabel = "TOP";

inline bool is_primed(const std::string& label) {
  return !label.empty() && label.back() == '\'';
}

Tree parse_bracketed(const std::string& text);
std::string to_bracketed(const TreeNode& node);
inline std::string to_bracketed(const Tree& t) { return to_bracketed(t.root); }
inline std::string to_bracketed(const BinaryTree& t) { return to_bracketed(t.root); }

BinaryTree to_cnf(const Tree& tree);

struct DebinarizeStats {
  int orphan_primed = 0;  // primed nodes with no unprimed ancestor
};
Tree from_cnf(const BinaryTree& bt, DebinarizeStats* stats = nullptr);

// Exactly 2n-1 spans in deterministic pre-order (node before children).
std::vector<LabeledSpan> spans_of(const BinaryTree& bt);

std::vector<std::string> leaf_tokens(const TreeNode& node);

// Builds a full binary tree over the sentence containing every entity span
// with its label, rooted at TOP, with left-branching null-label fillers.
BinaryTree ner_to_partial_tree(const EntityAnnotation& ann);

// Corpus IO. Tree corpora are UTF-8, one bracketed tree per line; entity
// corpora are JSON lines {"tokens": [...], "entities": [{"l","r","label"}]}.
std::vector<Tree> read_tree_corpus(const std::string& path);
void write_tree_corpus(const std::string& path, const std::vector<Tree>& trees);
std::vector<EntityAnnotation> read_entity_corpus(const std::string& path);
void write_entity_corpus(const std::string& path,
                         const std::vector<EntityAnnotation>& corpus);

// Distinct labels over non-preterminal nodes across a corpus.
int count_labels(const std::vector<Tree>& trees);
int count_labels_cnf(const std::vector<BinaryTree>& trees);

}  // namespace spanhash::treebank
