#include "spanhash/synth.hpp"

#include <functional>

#include "doctest.h"
#include "spanhash/tree.hpp"

using namespace spanhash;
using namespace spanhash::synth;

namespace {

void check_valid(const treebank::TreeNode& node) {
  if (node.is_preterminal()) {
    CHECK(node.r == node.l + 1);
    CHECK(!node.token.empty());
    return;
  }
  int pos = node.l;
  for (const auto& c : node.children) {
    CHECK(c.l == pos);
    pos = c.r;
    check_valid(c);
  }
  CHECK(pos == node.r);
}

}  // namespace

TEST_CASE("parse corpus: validity, determinism, size") {
  ParseGrammar g;
  auto corpus = gen_parse_corpus(g, 1000, 42);
  CHECK(corpus.size() == 1000);
  for (const auto& t : corpus) {
    CHECK(t.n >= 2);
    CHECK(t.n <= g.max_len);
    CHECK(t.root.label == "S");
    check_valid(t.root);
    // Survives serialization.
    auto round = treebank::parse_bracketed(treebank::to_bracketed(t));
    CHECK(treebank::to_bracketed(round) == treebank::to_bracketed(t));
  }

  auto again = gen_parse_corpus(g, 1000, 42);
  for (std::size_t i = 0; i < corpus.size(); ++i)
    CHECK(treebank::to_bracketed(again[i]) == treebank::to_bracketed(corpus[i]));

  auto other = gen_parse_corpus(g, 1000, 43);
  bool all_same = true;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    all_same &= treebank::to_bracketed(other[i]) == treebank::to_bracketed(corpus[i]);
  CHECK(!all_same);
}

TEST_CASE("cnf grows the label vocabulary") {
  ParseGrammar g;
  auto corpus = gen_parse_corpus(g, 300, 7);
  std::vector<treebank::BinaryTree> cnf;
  for (const auto& t : corpus) cnf.push_back(treebank::to_cnf(t));
  CHECK(treebank::count_labels_cnf(cnf) > treebank::count_labels(corpus));

  auto dist = label_distribution(corpus);
  CHECK(dist.at("S") == 300);  // one root per tree
  CHECK(dist.size() <= static_cast<std::size_t>(g.num_labels));
  CHECK(dist.size() >= 4);  // all inner labels should show up at this size
}

TEST_CASE("ambiguous labels use two token clusters") {
  ParseGrammar g;
  g.num_ambiguous = 1;  // label A gets an alternate cluster
  auto corpus = gen_parse_corpus(g, 500, 11);
  bool saw_primary = false, saw_alternate = false;
  std::function<void(const treebank::TreeNode&)> walk = [&](const treebank::TreeNode& n) {
    if (n.label == "A" && !n.children.empty()) {
      const std::string& open = n.children.front().token;
      if (open.rfind("ao", 0) == 0) saw_primary = true;
      if (open.rfind("ax", 0) == 0) saw_alternate = true;
    }
    for (const auto& c : n.children) walk(c);
  };
  for (const auto& t : corpus) walk(t.root);
  CHECK(saw_primary);
  CHECK(saw_alternate);
}

TEST_CASE("ner corpus: nesting knob and reduction safety") {
  NerGrammar flat;
  flat.nesting_prob = 0.0;
  auto corpus = gen_ner_corpus(flat, 300, 3);
  CHECK(corpus.size() == 300);
  int nested_pairs = 0;
  for (const auto& ann : corpus) {
    CHECK(!ann.tokens.empty());
    CHECK(static_cast<int>(ann.tokens.size()) <= flat.max_len);
    for (std::size_t i = 0; i < ann.entities.size(); ++i)
      for (std::size_t j = 0; j < ann.entities.size(); ++j) {
        if (i == j) continue;
        const auto& a = ann.entities[i];
        const auto& b = ann.entities[j];
        if (a.l <= b.l && b.r <= a.r && (a.l != b.l || a.r != b.r)) ++nested_pairs;
      }
    (void)treebank::ner_to_partial_tree(ann);  // must not throw
  }
  CHECK(nested_pairs == 0);

  NerGrammar nested;
  nested.nesting_prob = 0.5;
  auto deep = gen_ner_corpus(nested, 300, 3);
  int strictly_nested = 0;
  int total_entities = 0;
  for (const auto& ann : deep) {
    total_entities += static_cast<int>(ann.entities.size());
    for (std::size_t i = 0; i < ann.entities.size(); ++i)
      for (std::size_t j = 0; j < ann.entities.size(); ++j) {
        if (i == j) continue;
        const auto& a = ann.entities[i];
        const auto& b = ann.entities[j];
        if (a.l <= b.l && b.r <= a.r && (a.l != b.l || a.r != b.r)) ++strictly_nested;
      }
    (void)treebank::ner_to_partial_tree(ann);
  }
  CHECK(strictly_nested > 0);
  CHECK(total_entities > 0);

  auto again = gen_ner_corpus(nested, 300, 3);
  CHECK(again.size() == deep.size());
  for (std::size_t i = 0; i < deep.size(); ++i) {
    CHECK(again[i].tokens == deep[i].tokens);
    CHECK(again[i].entities == deep[i].entities);
  }
}
