#pragma once

#include <map>
#include <string>
#include <vector>

#include "topo/labels.hpp"

namespace topo {

/// One word sequence with one label per word. Labels are indices into the
/// owning corpus scheme's label list.
struct TaggedSentence {
  std::vector<std::string> words;
  std::vector<int> labels;
  std::string provenance;  // source corpus name, retained through merges
};

struct LabelScheme {
  std::string name;
  std::vector<std::string> labels;                  // label id -> string
  std::vector<std::string> location_positive;       // subset of labels
  std::map<std::string, std::string> mapping;       // source label -> target label

  int id_of(const std::string& label) const;        // -1 if absent
  int add_label(const std::string& label);          // id, inserting if new
  bool same_labels(const LabelScheme& other) const { return labels == other.labels; }
};

struct Corpus {
  std::string name;
  LabelScheme scheme;
  std::vector<TaggedSentence> sentences;

  std::size_t total_tokens() const;
};

struct LabelHistogram {
  long total = 0;
  std::map<std::string, long> counts;
  std::map<std::string, double> fractions;
};

struct BioViolation {
  std::size_t sentence = 0;
  std::size_t position = 0;
};

/// The unified target scheme {O, B-LOC, I-LOC} with the model's fixed label order.
LabelScheme unified_scheme();

/// Built-in source schemes with unification mappings: "conll2003" (NER tag
/// in column 3), "wnut2017" (tag in column 1), "unified" (identity).
LabelScheme builtin_scheme(const std::string& name);

/// Loads {"name":..., "mapping": {src: target}} from a JSON document.
LabelScheme scheme_from_json(const std::string& json_text);

int default_token_column(const std::string& scheme_name);
int default_label_column(const std::string& scheme_name);

/// Parses CoNLL-style column text: whitespace-separated columns, blank
/// lines between sentences, "-DOCSTART-" marker lines skipped. Sentences
/// that end up empty are dropped.
Corpus parse_conll(const std::string& file_text, int token_column, int label_column,
                   const std::string& corpus_name = "corpus");

/// Remaps every label through scheme.mapping onto {O, B-LOC, I-LOC}.
/// Unmapped labels raise one error listing all of them.
Corpus unify_labels(const Corpus& corpus, const LabelScheme& scheme);

/// Concatenates corpora sharing one scheme; sentence provenance is kept.
Corpus merge_corpora(const std::vector<Corpus>& corpora);

LabelHistogram corpus_stats(const Corpus& corpus);

std::string histogram_to_json(const LabelHistogram& histogram, const std::string& corpus_name);

/// Two-column "token<TAB>label" serialization, blank line between
/// sentences; optional third provenance column.
std::string serialize_two_column(const Corpus& corpus, bool include_provenance = false);

/// Positions where I-LOC follows sentence start or O. Only meaningful on a
/// unified corpus.
std::vector<BioViolation> validate_bio(const Corpus& corpus);

}  // namespace topo
