#include "spanhash/metrics.hpp"

#include <map>
#include <sstream>

namespace spanhash::metrics {

using treebank::BinaryTree;
using treebank::EntityAnnotation;
using treebank::LabeledSpan;
using treebank::Tree;
using treebank::TreeNode;

F1Report make_report(std::int64_t matched, std::int64_t gold, std::int64_t predicted) {
  F1Report r;
  r.matched = matched;
  r.gold = gold;
  r.predicted = predicted;
  r.precision = predicted > 0 ? static_cast<double>(matched) / static_cast<double>(predicted) : 0.0;
  r.recall = gold > 0 ? static_cast<double>(matched) / static_cast<double>(gold) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

namespace {

void scored_spans(const TreeNode& node, bool is_root, bool include_preterminals,
                  std::map<LabeledSpan, std::int64_t>& out) {
  bool skip = node.is_preterminal() && !include_preterminals;
  if (is_root && node.label == treebank::kTopLabel) skip = true;
  if (!skip) out[{node.l, node.r, node.label}] += 1;
  for (const TreeNode& c : node.children)
    scored_spans(c, false, include_preterminals, out);
}

std::int64_t count_all(const std::map<LabeledSpan, std::int64_t>& m) {
  std::int64_t n = 0;
  for (const auto& [span, count] : m) n += count;
  return n;
}

std::int64_t multiset_overlap(const std::map<LabeledSpan, std::int64_t>& a,
                              const std::map<LabeledSpan, std::int64_t>& b) {
  std::int64_t n = 0;
  for (const auto& [span, count] : a) {
    auto it = b.find(span);
    if (it != b.end()) n += std::min(count, it->second);
  }
  return n;
}

}  // namespace

F1Report labeled_f1(const std::vector<Tree>& gold, const std::vector<Tree>& pred,
                    bool include_preterminals) {
  if (gold.size() != pred.size())
    throw LengthMismatch("gold has " + std::to_string(gold.size()) + " trees, pred has " +
                         std::to_string(pred.size()));
  std::int64_t matched = 0, gold_n = 0, pred_n = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].n != pred[i].n)
      throw LengthMismatch("sentence " + std::to_string(i) + ": token counts differ (" +
                           std::to_string(gold[i].n) + " vs " + std::to_string(pred[i].n) +
                           ")");
    std::map<LabeledSpan, std::int64_t> gs, ps;
    scored_spans(gold[i].root, true, include_preterminals, gs);
    scored_spans(pred[i].root, true, include_preterminals, ps);
    matched += multiset_overlap(gs, ps);
    gold_n += count_all(gs);
    pred_n += count_all(ps);
  }
  return make_report(matched, gold_n, pred_n);
}

std::vector<LabeledSpan> extract_entities(const BinaryTree& tree) {
  // De-binarize first: primed scaffolding vanishes, collapsed labels expand
  // into unary chains so joined entity labels are counted separately.
  Tree flat = treebank::from_cnf(tree);
  std::vector<LabeledSpan> out;
  std::vector<const TreeNode*> stack = {&flat.root};
  while (!stack.empty()) {
    const TreeNode* node = stack.back();
    stack.pop_back();
    if (node->label != treebank::kNullLabel && node->label != treebank::kTopLabel &&
        !treebank::is_primed(node->label))
      out.push_back({node->l, node->r, node->label});
    for (const TreeNode& c : node->children) stack.push_back(&c);
  }
  return out;
}

F1Report ner_f1(const std::vector<EntityAnnotation>& gold,
                const std::vector<BinaryTree>& pred) {
  if (gold.size() != pred.size())
    throw LengthMismatch("gold has " + std::to_string(gold.size()) +
                         " annotations, pred has " + std::to_string(pred.size()));
  std::int64_t matched = 0, gold_n = 0, pred_n = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (static_cast<int>(gold[i].tokens.size()) != pred[i].n)
      throw LengthMismatch("sentence " + std::to_string(i) + ": token counts differ");
    std::map<LabeledSpan, std::int64_t> gs, ps;
    for (const LabeledSpan& e : gold[i].entities) gs[e] += 1;
    for (const LabeledSpan& e : extract_entities(pred[i])) ps[e] += 1;
    matched += multiset_overlap(gs, ps);
    gold_n += count_all(gs);
    pred_n += count_all(ps);
  }
  return make_report(matched, gold_n, pred_n);
}

std::string to_tsv(const F1Report& r) {
  std::ostringstream os;
  os << "precision\t" << r.precision << "\n"
     << "recall\t" << r.recall << "\n"
     << "f1\t" << r.f1 << "\n"
     << "matched\t" << r.matched << "\n"
     << "gold\t" << r.gold << "\n"
     << "predicted\t" << r.predicted << "\n";
  return os.str();
}

std::string to_summary(const F1Report& r) {
  std::ostringstream os;
  os << "P=" << r.precision << " R=" << r.recall << " F1=" << r.f1 << " (" << r.matched
     << " matched / " << r.gold << " gold / " << r.predicted << " predicted)";
  return os.str();
}

}  // namespace spanhash::metrics
