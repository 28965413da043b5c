#include "spanhash/synth.hpp"

#include <algorithm>
#include <cctype>

#include "spanhash/rng.hpp"

namespace spanhash::synth {

using treebank::Tree;
using treebank::TreeNode;

namespace {

std::string inner_label(int i) { return std::string(1, static_cast<char>('A' + i)); }

std::string lower(const std::string& s) {
  std::string out = s;
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct ParseGen {
  const ParseGrammar& g;
  RngStream& rng;

  std::string opener(const std::string& label, int cluster) {
    int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.tokens_per_class)));
    return lower(label) + (cluster == 0 ? "o" : "x") + std::to_string(pick);
  }
  std::string closer(const std::string& label, int cluster) {
    int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.tokens_per_class)));
    return lower(label) + (cluster == 0 ? "c" : "z") + std::to_string(pick);
  }

  TreeNode preterminal(const std::string& pos, const std::string& token) {
    TreeNode n;
    n.label = pos;
    n.token = token;
    return n;
  }

  bool ambiguous(int label_idx) { return label_idx >= 0 && label_idx < g.num_ambiguous; }

  // label_idx: -1 for the root S, otherwise index of an inner label.
  TreeNode constituent(int label_idx, int depth) {
    const std::string label = label_idx < 0 ? "S" : inner_label(label_idx);
    const int cluster = ambiguous(label_idx) && rng.bernoulli(0.5) ? 1 : 0;

    TreeNode node;
    node.label = label;
    node.children.push_back(preterminal(label + "o", opener(label, cluster)));
    // Roots always carry some body; inner constituents are usually bare
    // opener-closer pairs so binarization-introduced labels stay a modest
    // share of the span distribution.
    std::size_t body;
    if (label_idx < 0) {
      body = rng.below(100) < 65 ? 1 : 2;
    } else {
      std::uint64_t u = rng.below(100);
      body = u < 60 ? 0 : (u < 90 ? 1 : 2);
    }
    for (std::size_t i = 0; i < body; ++i) {
      if (depth < g.max_depth && rng.bernoulli(g.child_prob)) {
        int child;
        do {
          child = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.num_labels - 1)));
        } while (child == label_idx);  // no immediate self-nesting
        node.children.push_back(constituent(child, depth + 1));
      } else {
        int f = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.num_fillers)));
        node.children.push_back(preterminal("F", "f" + std::to_string(f)));
      }
    }
    node.children.push_back(preterminal(label + "c", closer(label, cluster)));
    return node;
  }

  static int assign_spans(TreeNode& node, int start) {
    node.l = start;
    if (node.is_preterminal()) {
      node.r = start + 1;
      return node.r;
    }
    int pos = start;
    for (TreeNode& c : node.children) pos = assign_spans(c, pos);
    node.r = pos;
    return pos;
  }

  static int yield_length(const TreeNode& node) {
    if (node.is_preterminal()) return 1;
    int n = 0;
    for (const TreeNode& c : node.children) n += yield_length(c);
    return n;
  }

  Tree sentence() {
    for (;;) {
      TreeNode root = constituent(-1, 0);
      if (yield_length(root) > g.max_len) continue;
      Tree t;
      t.n = assign_spans(root, 0);
      t.root = std::move(root);
      return t;
    }
  }
};

}  // namespace

std::vector<Tree> gen_parse_corpus(const ParseGrammar& g, int count, std::uint64_t seed) {
  RngStream rng = RngStream::derive(seed, "gen-parse");
  ParseGen gen{g, rng};
  std::vector<Tree> corpus;
  corpus.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) corpus.push_back(gen.sentence());
  return corpus;
}

namespace {

const char* kTypeNames[] = {"PER", "ORG", "LOC", "GPE", "FAC", "VEH"};

struct NerGen {
  const NerGrammar& g;
  RngStream& rng;

  std::string type_name(int t) { return kTypeNames[t]; }

  std::string opener(int t) {
    int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.tokens_per_type)));
    return lower(type_name(t)) + "_o" + std::to_string(pick);
  }
  std::string closer(int t) {
    int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.tokens_per_type)));
    return lower(type_name(t)) + "_c" + std::to_string(pick);
  }
  std::string context() {
    return "w" + std::to_string(rng.below(static_cast<std::uint64_t>(g.num_context)));
  }

  // Emits one entity starting at position `start`; returns its end.
  int entity(int type, int start, int depth, std::vector<std::string>& tokens,
             std::vector<treebank::LabeledSpan>& entities) {
    tokens.push_back(opener(type));
    int pos = start + 1;
    if (depth < 2 && rng.bernoulli(g.nesting_prob)) {
      int inner;
      do {
        inner = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.num_types)));
      } while (inner == type);
      pos = entity(inner, pos, depth + 1, tokens, entities);
    } else if (rng.bernoulli(g.extra_inner_prob)) {
      tokens.push_back(context());
      pos += 1;
    }
    tokens.push_back(closer(type));
    pos += 1;
    entities.push_back({start, pos, type_name(type)});
    return pos;
  }

  treebank::EntityAnnotation sentence() {
    for (;;) {
      treebank::EntityAnnotation ann;
      int target = 3 + static_cast<int>(rng.below(static_cast<std::uint64_t>(g.max_len - 2)));
      // Always lead with a context token: the left-branching filler spans all
      // start at position 0, and a leading entity opener there would make
      // some fillers look exactly like entities.
      ann.tokens.push_back(context());
      while (static_cast<int>(ann.tokens.size()) < target) {
        if (rng.bernoulli(g.entity_prob)) {
          int type = static_cast<int>(rng.below(static_cast<std::uint64_t>(g.num_types)));
          entity(type, static_cast<int>(ann.tokens.size()), 0, ann.tokens, ann.entities);
        } else {
          ann.tokens.push_back(context());
        }
      }
      if (static_cast<int>(ann.tokens.size()) > g.max_len) continue;
      return ann;
    }
  }
};

}  // namespace

std::vector<treebank::EntityAnnotation> gen_ner_corpus(const NerGrammar& g, int count,
                                                       std::uint64_t seed) {
  RngStream rng = RngStream::derive(seed, "gen-ner");
  NerGen gen{g, rng};
  std::vector<treebank::EntityAnnotation> corpus;
  corpus.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) corpus.push_back(gen.sentence());
  return corpus;
}

std::map<std::string, int> label_distribution(const std::vector<Tree>& corpus) {
  std::map<std::string, int> hist;
  for (const Tree& t : corpus) {
    std::vector<const TreeNode*> stack = {&t.root};
    while (!stack.empty()) {
      const TreeNode* n = stack.back();
      stack.pop_back();
      if (!n->is_preterminal()) {
        hist[n->label] += 1;
        for (const TreeNode& c : n->children) stack.push_back(&c);
      }
    }
  }
  return hist;
}

}  // namespace spanhash::synth
