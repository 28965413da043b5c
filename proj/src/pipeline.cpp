#include "spanhash/pipeline.hpp"

#include "spanhash/contrastive.hpp"

namespace spanhash::pipeline {

Sentence make_sentence(const treebank::Tree& raw) {
  Sentence s;
  s.tokens = treebank::leaf_tokens(raw.root);
  s.gold = treebank::to_cnf(raw);
  s.targets = treebank::spans_of(s.gold);
  return s;
}

Sentence make_sentence(const treebank::EntityAnnotation& ann) {
  Sentence s;
  s.tokens = ann.tokens;
  s.gold = treebank::ner_to_partial_tree(ann);
  s.targets = treebank::spans_of(s.gold);
  return s;
}

std::vector<int> to_ids(const encoder::Vocab& vocab, const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

chart::ScoreChart<double> eval_scores(const Model& model,
                                      const std::vector<std::string>& tokens) {
  encoder::ParamView<double> pv{&model.params.layout, model.params.theta};
  auto h = encoder::encode<double>(model.cfg(), pv, to_ids(model.vocab, tokens),
                                   encoder::Mode::kEval, nullptr, nullptr);
  return encoder::hash_scores<double>(model.cfg(), pv, h);
}

namespace {

// Rebuilds tree structure from pre-order spans.
treebank::TreeNode build_node(const std::vector<chart::CodedSpan>& spans, std::size_t& i,
                              const codebook::Codebook& cb,
                              const std::vector<std::string>& tokens) {
  const chart::CodedSpan& cs = spans[i++];
  treebank::TreeNode node;
  node.l = cs.l;
  node.r = cs.r;
  node.label = cb.translate(cs.code);
  if (cs.r - cs.l == 1) {
    node.token = tokens[static_cast<std::size_t>(cs.l)];
  } else {
    node.children.push_back(build_node(spans, i, cb, tokens));
    node.children.push_back(build_node(spans, i, cb, tokens));
  }
  return node;
}

}  // namespace

treebank::BinaryTree coded_to_tree(const chart::CodedTree& coded,
                                   const codebook::Codebook& cb,
                                   const std::vector<std::string>& tokens) {
  treebank::BinaryTree bt;
  bt.n = coded.n;
  std::size_t i = 0;
  bt.root = build_node(coded.spans, i, cb, tokens);
  return bt;
}

treebank::BinaryTree decode_sentence(const Model& model, const codebook::Codebook& cb,
                                     const std::vector<std::string>& tokens) {
  auto sc = eval_scores(model, tokens);
  return coded_to_tree(chart::viterbi_decode(sc), cb, tokens);
}

codebook::Codebook build_codebook(const Model& model, std::span<const Sentence> corpus) {
  codebook::Codebook cb(model.cfg().k_bits);
  for (const Sentence& s : corpus) {
    auto sc = eval_scores(model, s.tokens);
    auto mc = chart::marginals(sc);
    for (const treebank::LabeledSpan& t : s.targets)
      cb.add(contrastive::binarize(mc, t.l, t.r), t.label);
  }
  cb.finalize();
  return cb;
}

metrics::F1Report evaluate_parse(const Model& model, const codebook::Codebook& cb,
                                 const std::vector<treebank::Tree>& gold) {
  std::vector<treebank::Tree> preds;
  preds.reserve(gold.size());
  for (const treebank::Tree& g : gold) {
    auto tokens = treebank::leaf_tokens(g.root);
    preds.push_back(treebank::from_cnf(decode_sentence(model, cb, tokens)));
  }
  return metrics::labeled_f1(gold, preds);
}

metrics::F1Report evaluate_ner(const Model& model, const codebook::Codebook& cb,
                               const std::vector<treebank::EntityAnnotation>& gold) {
  std::vector<treebank::BinaryTree> preds;
  preds.reserve(gold.size());
  for (const treebank::EntityAnnotation& g : gold)
    preds.push_back(decode_sentence(model, cb, g.tokens));
  return metrics::ner_f1(gold, preds);
}

}  // namespace spanhash::pipeline
