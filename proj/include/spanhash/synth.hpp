#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "spanhash/tree.hpp"

namespace spanhash::synth {

// Constituents of label X open with an X-specific opener token and close with
// an X-specific closer token, so span labels are recoverable from boundary
// tokens. Ambiguous labels carry a second disjoint token cluster, giving those
// labels two sub-populations (a knob for multi-code behavior).
struct ParseGrammar {
  int num_labels = 6;        // root label S plus num_labels-1 inner labels
  int tokens_per_class = 2;  // opener/closer variety per label per cluster
  int num_fillers = 6;
  int max_len = 12;
  int max_depth = 3;
  double child_prob = 0.55;  // body slot becomes a nested constituent
  int num_ambiguous = 0;     // first N inner labels get an alternate cluster
};

std::vector<treebank::Tree> gen_parse_corpus(const ParseGrammar& g, int count,
                                             std::uint64_t seed);

// Entities open/close with type-specific tokens; nested entities of a
// different type appear inside with probability nesting_prob.
struct NerGrammar {
  int num_types = 4;
  int tokens_per_type = 2;
  int num_context = 8;
  int max_len = 12;
  double entity_prob = 0.55;   // sentence slot starts an entity
  double nesting_prob = 0.5;
  double extra_inner_prob = 0.5;  // extra context token inside an entity
};

std::vector<treebank::EntityAnnotation> gen_ner_corpus(const NerGrammar& g, int count,
                                                       std::uint64_t seed);

// Label histogram over internal nodes (the distribution report).
std::map<std::string, int> label_distribution(const std::vector<treebank::Tree>& corpus);

}  // namespace spanhash::synth
