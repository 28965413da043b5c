#include "spanhash/tree.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

namespace spanhash::treebank {

namespace {

std::vector<std::string> tokenize_brackets(const std::string& text) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : text) {
    if (c == '(' || c == ')') {
      if (!cur.empty()) {
        toks.push_back(cur);
        cur.clear();
      }
      toks.push_back(std::string(1, c));
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!cur.empty()) {
        toks.push_back(cur);
        cur.clear();
      }
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

struct BracketParser {
  const std::vector<std::string>& toks;
  std::size_t pos = 0;
  int leaf = 0;

  TreeNode parse_node() {
    expect("(");
    TreeNode node;
    if (at_end() || toks[pos] == "(" || toks[pos] == ")")
      throw EmptyLabel("node without a label");
    node.label = toks[pos++];
    node.l = leaf;
    if (!at_end() && toks[pos] == "(") {
      while (!at_end() && toks[pos] == "(") node.children.push_back(parse_node());
      if (at_end()) throw UnbalancedBrackets("missing ')'");
      if (toks[pos] != ")")
        throw UnbalancedBrackets("mixed token and tree children under " + node.label);
    } else {
      if (at_end() || toks[pos] == ")")
        throw EmptyTree("node " + node.label + " has no content");
      node.token = toks[pos++];
      leaf += 1;
      if (!at_end() && toks[pos] != ")")
        throw UnbalancedBrackets("pre-terminal " + node.label +
                                 " with more than one token");
    }
    expect(")");
    node.r = leaf;
    return node;
  }

  bool at_end() const { return pos >= toks.size(); }
  void expect(const char* t) {
    if (at_end() || toks[pos] != t) throw UnbalancedBrackets("expected '" + std::string(t) + "'");
    ++pos;
  }
};

void collapse_unaries(TreeNode& node) {
  while (node.children.size() == 1) {
    TreeNode child = std::move(node.children[0]);
    node.label += "+" + child.label;
    node.token = std::move(child.token);
    node.children = std::move(child.children);
  }
  for (TreeNode& c : node.children) collapse_unaries(c);
}

void binarize_left(TreeNode& node) {
  if (node.children.size() > 2) {
    const std::string inter = node.label + "'";
    std::vector<TreeNode> kids = std::move(node.children);
    TreeNode cur = std::move(kids[0]);
    for (std::size_t i = 1; i + 1 < kids.size(); ++i) {
      TreeNode wrap;
      wrap.label = inter;
      wrap.l = cur.l;
      wrap.r = kids[i].r;
      wrap.children.push_back(std::move(cur));
      wrap.children.push_back(std::move(kids[i]));
      cur = std::move(wrap);
    }
    node.children.clear();
    node.children.push_back(std::move(cur));
    node.children.push_back(std::move(kids.back()));
  }
  for (TreeNode& c : node.children) binarize_left(c);
}

// Splices out primed nodes by promoting their children in place.
std::vector<TreeNode> debinarize(TreeNode node, DebinarizeStats* stats) {
  std::vector<TreeNode> flat_children;
  for (TreeNode& c : node.children) {
    auto sub = debinarize(std::move(c), stats);
    for (TreeNode& s : sub) flat_children.push_back(std::move(s));
  }
  node.children = std::move(flat_children);
  if (is_primed(node.label)) return std::move(node.children);
  return {std::move(node)};
}

void expand_collapsed(TreeNode& node) {
  auto plus = node.label.find('+');
  if (plus != std::string::npos) {
    TreeNode inner;
    inner.label = node.label.substr(plus + 1);
    inner.l = node.l;
    inner.r = node.r;
    inner.token = std::move(node.token);
    inner.children = std::move(node.children);
    node.label = node.label.substr(0, plus);
    node.token.clear();
    node.children.clear();
    node.children.push_back(std::move(inner));
  }
  for (TreeNode& c : node.children) expand_collapsed(c);
}

void collect_spans(const TreeNode& node, std::vector<LabeledSpan>& out) {
  out.push_back({node.l, node.r, node.label});
  for (const TreeNode& c : node.children) collect_spans(c, out);
}

void collect_labels(const TreeNode& node, std::set<std::string>& out) {
  if (!node.is_preterminal()) {
    out.insert(node.label);
    for (const TreeNode& c : node.children) collect_labels(c, out);
  }
}

}  // namespace

Tree parse_bracketed(const std::string& text) {
  std::vector<std::string> toks = tokenize_brackets(text);
  if (toks.empty()) throw EmptyTree("empty input");
  BracketParser parser{toks};
  Tree t;
  t.root = parser.parse_node();
  if (!parser.at_end())
    throw UnbalancedBrackets("trailing content after tree");
  t.n = parser.leaf;
  if (t.n < 1) throw EmptyTree("tree yields no tokens");
  return t;
}

std::string to_bracketed(const TreeNode& node) {
  std::string s = "(" + node.label;
  if (node.is_preterminal()) {
    s += " " + node.token;
  } else {
    for (const TreeNode& c : node.children) s += " " + to_bracketed(c);
  }
  s += ")";
  return s;
}

BinaryTree to_cnf(const Tree& tree) {
  BinaryTree bt;
  bt.n = tree.n;
  bt.root = tree.root;
  collapse_unaries(bt.root);
  binarize_left(bt.root);
  return bt;
}

Tree from_cnf(const BinaryTree& bt, DebinarizeStats* stats) {
  DebinarizeStats local;
  if (!stats) stats = &local;
  Tree t;
  t.n = bt.n;
  TreeNode root = bt.root;
  if (is_primed(root.label)) {
    // A primed root has no unprimed ancestor to absorb it; strip the prime.
    root.label.pop_back();
    stats->orphan_primed += 1;
  }
  auto flat = debinarize(std::move(root), stats);
  t.root = std::move(flat[0]);
  expand_collapsed(t.root);
  return t;
}

std::vector<LabeledSpan> spans_of(const BinaryTree& bt) {
  std::vector<LabeledSpan> out;
  out.reserve(static_cast<std::size_t>(2 * bt.n - 1));
  collect_spans(bt.root, out);
  return out;
}

std::vector<std::string> leaf_tokens(const TreeNode& node) {
  std::vector<std::string> toks;
  if (node.is_preterminal()) {
    toks.push_back(node.token);
    return toks;
  }
  for (const TreeNode& c : node.children) {
    auto sub = leaf_tokens(c);
    toks.insert(toks.end(), sub.begin(), sub.end());
  }
  return toks;
}

namespace {

struct EntitySpan {
  int l, r;
  std::string label;
  std::vector<int> children;  // indices into the entity list
};

TreeNode build_ner_node(int l, int r, std::string label,
                        const std::vector<int>& child_ids,
                        const std::vector<EntitySpan>& ents,
                        const std::vector<std::string>& tokens) {
  // Direct items: child entities and gap tokens, left to right.
  std::map<int, int> starts;  // position -> entity id
  for (int id : child_ids) starts[ents[static_cast<std::size_t>(id)].l] = id;

  std::vector<TreeNode> items;
  int pos = l;
  while (pos < r) {
    auto it = starts.find(pos);
    if (it != starts.end()) {
      const EntitySpan& e = ents[static_cast<std::size_t>(it->second)];
      items.push_back(build_ner_node(e.l, e.r, e.label, e.children, ents, tokens));
      pos = e.r;
    } else {
      TreeNode leafn;
      leafn.label = kNullLabel;
      leafn.l = pos;
      leafn.r = pos + 1;
      leafn.token = tokens[static_cast<std::size_t>(pos)];
      items.push_back(std::move(leafn));
      pos += 1;
    }
  }

  if (items.size() == 1) {
    // Unary: the single item spans [l, r); collapse labels.
    TreeNode node = std::move(items[0]);
    node.label = label + "+" + node.label;
    return node;
  }

  // Left-branching among siblings; intermediates carry the null label.
  TreeNode cur = std::move(items[0]);
  for (std::size_t i = 1; i < items.size(); ++i) {
    TreeNode wrap;
    wrap.label = (i + 1 == items.size()) ? label : kNullLabel;
    wrap.l = cur.l;
    wrap.r = items[i].r;
    wrap.children.push_back(std::move(cur));
    wrap.children.push_back(std::move(items[i]));
    cur = std::move(wrap);
  }
  return cur;
}

}  // namespace

BinaryTree ner_to_partial_tree(const EntityAnnotation& ann) {
  const int n = static_cast<int>(ann.tokens.size());
  if (n < 1) throw EmptyTree("annotation with no tokens");

  for (const LabeledSpan& e : ann.entities) {
    if (!(0 <= e.l && e.l < e.r && e.r <= n))
      throw CrossingEntities("entity span out of range");
  }
  for (std::size_t i = 0; i < ann.entities.size(); ++i) {
    for (std::size_t j = i + 1; j < ann.entities.size(); ++j) {
      const LabeledSpan& a = ann.entities[i];
      const LabeledSpan& b = ann.entities[j];
      bool disjoint = a.r <= b.l || b.r <= a.l;
      bool nested = (a.l <= b.l && b.r <= a.r) || (b.l <= a.l && a.r <= b.r);
      if (!disjoint && !nested)
        throw CrossingEntities("crossing entities [" + std::to_string(a.l) + "," +
                               std::to_string(a.r) + ") and [" + std::to_string(b.l) +
                               "," + std::to_string(b.r) + ")");
    }
  }

  // Merge same-span entities into one node with a joined label (outermost =
  // first listed), then nest the rest by containment.
  std::vector<EntitySpan> ents;
  for (const LabeledSpan& e : ann.entities) {
    EntitySpan* same = nullptr;
    for (EntitySpan& x : ents)
      if (x.l == e.l && x.r == e.r) same = &x;
    if (same)
      same->label += "+" + e.label;
    else
      ents.push_back({e.l, e.r, e.label, {}});
  }

  std::vector<int> order(ents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const auto& ea = ents[static_cast<std::size_t>(a)];
    const auto& eb = ents[static_cast<std::size_t>(b)];
    if (ea.l != eb.l) return ea.l < eb.l;
    return ea.r > eb.r;  // wider first, so parents precede children
  });

  std::vector<int> top;
  std::vector<int> stack;
  for (int id : order) {
    const EntitySpan& e = ents[static_cast<std::size_t>(id)];
    while (!stack.empty()) {
      const EntitySpan& p = ents[static_cast<std::size_t>(stack.back())];
      if (p.l <= e.l && e.r <= p.r) break;
      stack.pop_back();
    }
    if (stack.empty())
      top.push_back(id);
    else
      ents[static_cast<std::size_t>(stack.back())].children.push_back(id);
    stack.push_back(id);
  }

  BinaryTree bt;
  bt.n = n;
  bt.root = build_ner_node(0, n, kTopLabel, top, ents, ann.tokens);
  return bt;
}

std::vector<Tree> read_tree_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TreeError("cannot open tree corpus: " + path);
  std::vector<Tree> trees;
  std::string line;
  while (std::getline(in, line)) {
    bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
    if (blank) continue;
    trees.push_back(parse_bracketed(line));
  }
  return trees;
}

void write_tree_corpus(const std::string& path, const std::vector<Tree>& trees) {
  std::ofstream out(path);
  if (!out) throw TreeError("cannot write tree corpus: " + path);
  for (const Tree& t : trees) out << to_bracketed(t) << "\n";
}

std::vector<EntityAnnotation> read_entity_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TreeError("cannot open entity corpus: " + path);
  std::vector<EntityAnnotation> corpus;
  std::string line;
  while (std::getline(in, line)) {
    bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
    if (blank) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    EntityAnnotation ann;
    for (const auto& t : j.at("tokens")) ann.tokens.push_back(t.get<std::string>());
    for (const auto& e : j.at("entities")) {
      ann.entities.push_back(
          {e.at("l").get<int>(), e.at("r").get<int>(), e.at("label").get<std::string>()});
    }
    corpus.push_back(std::move(ann));
  }
  return corpus;
}

void write_entity_corpus(const std::string& path,
                         const std::vector<EntityAnnotation>& corpus) {
  std::ofstream out(path);
  if (!out) throw TreeError("cannot write entity corpus: " + path);
  for (const EntityAnnotation& ann : corpus) {
    nlohmann::json j;
    j["tokens"] = ann.tokens;
    j["entities"] = nlohmann::json::array();
    for (const LabeledSpan& e : ann.entities)
      j["entities"].push_back({{"l", e.l}, {"r", e.r}, {"label", e.label}});
    out << j.dump() << "\n";
  }
}

int count_labels(const std::vector<Tree>& trees) {
  std::set<std::string> labels;
  for (const Tree& t : trees) collect_labels(t.root, labels);
  return static_cast<int>(labels.size());
}

int count_labels_cnf(const std::vector<BinaryTree>& trees) {
  std::set<std::string> labels;
  for (const BinaryTree& t : trees) collect_labels(t.root, labels);
  return static_cast<int>(labels.size());
}

}  // namespace spanhash::treebank
