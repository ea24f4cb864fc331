#include "topo/corpus.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "topo/common.hpp"

#include <nlohmann/json.hpp>

namespace topo {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string field;
  while (in >> field) {
    fields.push_back(field);
  }
  return fields;
}

}  // namespace

int LabelScheme::id_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

int LabelScheme::add_label(const std::string& label) {
  const int existing = id_of(label);
  if (existing >= 0) {
    return existing;
  }
  labels.push_back(label);
  return static_cast<int>(labels.size()) - 1;
}

std::size_t Corpus::total_tokens() const {
  std::size_t n = 0;
  for (const auto& s : sentences) {
    n += s.words.size();
  }
  return n;
}

LabelScheme unified_scheme() {
  LabelScheme scheme;
  scheme.name = "unified";
  scheme.labels = {unified_labels().begin(), unified_labels().end()};
  scheme.location_positive = {"B-LOC", "I-LOC"};
  for (const auto& label : scheme.labels) {
    scheme.mapping[label] = label;
  }
  return scheme;
}

LabelScheme builtin_scheme(const std::string& name) {
  if (name == "unified") {
    return unified_scheme();
  }
  LabelScheme scheme;
  scheme.name = name;
  scheme.location_positive = {"B-LOC", "I-LOC"};
  if (name == "conll2003") {
    scheme.mapping = {
        {"O", "O"},
        {"B-LOC", "B-LOC"}, {"I-LOC", "I-LOC"},
        {"B-PER", "O"},     {"I-PER", "O"},
        {"B-ORG", "O"},     {"I-ORG", "O"},
        {"B-MISC", "O"},    {"I-MISC", "O"},
    };
  } else if (name == "wnut2017") {
    scheme.mapping = {
        {"O", "O"},
        {"B-location", "B-LOC"},      {"I-location", "I-LOC"},
        {"B-person", "O"},            {"I-person", "O"},
        {"B-corporation", "O"},       {"I-corporation", "O"},
        {"B-product", "O"},           {"I-product", "O"},
        {"B-creative-work", "O"},     {"I-creative-work", "O"},
        {"B-group", "O"},             {"I-group", "O"},
    };
  } else {
    throw Error("unknown built-in scheme: " + name);
  }
  for (const auto& [src, dst] : scheme.mapping) {
    scheme.add_label(src);
    (void)dst;
  }
  return scheme;
}

LabelScheme scheme_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scheme JSON parse error: ") + e.what());
  }
  LabelScheme scheme;
  scheme.name = j.value("name", "custom");
  scheme.location_positive = {"B-LOC", "I-LOC"};
  if (!j.contains("mapping") || !j["mapping"].is_object()) {
    throw Error("scheme JSON must contain a \"mapping\" object");
  }
  for (const auto& [src, dst] : j["mapping"].items()) {
    if (!dst.is_string() || label_id(dst.get<std::string>()) < 0) {
      throw Error("scheme mapping target for \"" + src +
                  "\" must be one of O, B-LOC, I-LOC");
    }
    scheme.mapping[src] = dst.get<std::string>();
    scheme.add_label(src);
  }
  return scheme;
}

int default_token_column(const std::string& scheme_name) {
  (void)scheme_name;
  return 0;
}

int default_label_column(const std::string& scheme_name) {
  // Column layouts follow the common file releases: CoNLL2003 puts the
  // NER tag in column 3, WNUT2017 in column 1.
  if (scheme_name == "conll2003") {
    return 3;
  }
  return 1;
}

Corpus parse_conll(const std::string& file_text, int token_column, int label_column,
                   const std::string& corpus_name) {
  if (token_column < 0 || label_column < 0) {
    throw Error("parse_conll: column indices must be non-negative");
  }
  Corpus corpus;
  corpus.name = corpus_name;
  corpus.scheme.name = "observed";

  TaggedSentence current;
  const auto flush = [&] {
    if (!current.words.empty()) {
      current.provenance = corpus_name;
      corpus.sentences.push_back(std::move(current));
    }
    current = {};
  };

  const std::size_t needed =
      static_cast<std::size_t>(std::max(token_column, label_column)) + 1;
  std::istringstream in(file_text);
  std::string line;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    const auto fields = split_fields(line);
    if (fields.empty()) {
      flush();
      continue;
    }
    if (fields[0] == "-DOCSTART-") {
      continue;
    }
    if (fields.size() < needed) {
      throw Error("parse error at line " + std::to_string(line_number) + ": expected at least " +
                  std::to_string(needed) + " columns, found " + std::to_string(fields.size()));
    }
    current.words.push_back(fields[static_cast<std::size_t>(token_column)]);
    current.labels.push_back(
        corpus.scheme.add_label(fields[static_cast<std::size_t>(label_column)]));
  }
  flush();
  return corpus;
}

Corpus unify_labels(const Corpus& corpus, const LabelScheme& scheme) {
  std::set<std::string> unmapped;
  for (const auto& label : corpus.scheme.labels) {
    if (scheme.mapping.find(label) == scheme.mapping.end()) {
      unmapped.insert(label);
    }
  }
  if (!unmapped.empty()) {
    std::string msg = "unify_labels: unmapped source labels:";
    for (const auto& label : unmapped) {
      msg += " " + label;
    }
    throw Error(msg);
  }

  // Precompute source id -> unified id.
  std::vector<int> remap(corpus.scheme.labels.size());
  for (std::size_t i = 0; i < corpus.scheme.labels.size(); ++i) {
    remap[i] = label_id(scheme.mapping.at(corpus.scheme.labels[i]));
  }

  Corpus out;
  out.name = corpus.name;
  out.scheme = unified_scheme();
  out.sentences.reserve(corpus.sentences.size());
  for (const auto& sentence : corpus.sentences) {
    TaggedSentence s;
    s.words = sentence.words;
    s.provenance = sentence.provenance;
    s.labels.reserve(sentence.labels.size());
    for (const int id : sentence.labels) {
      s.labels.push_back(remap[static_cast<std::size_t>(id)]);
    }
    out.sentences.push_back(std::move(s));
  }
  return out;
}

Corpus merge_corpora(const std::vector<Corpus>& corpora) {
  if (corpora.empty()) {
    Corpus out;
    out.name = "merged";
    out.scheme = unified_scheme();
    return out;
  }
  Corpus out;
  out.scheme = corpora.front().scheme;
  std::string name;
  for (const auto& corpus : corpora) {
    if (!corpus.scheme.same_labels(out.scheme)) {
      throw Error("merge_corpora: scheme mismatch between \"" + corpora.front().name +
                  "\" and \"" + corpus.name + "\"");
    }
    name += (name.empty() ? "" : "+") + corpus.name;
    out.sentences.insert(out.sentences.end(), corpus.sentences.begin(),
                         corpus.sentences.end());
  }
  out.name = name;
  return out;
}

LabelHistogram corpus_stats(const Corpus& corpus) {
  LabelHistogram histogram;
  for (const auto& label : corpus.scheme.labels) {
    histogram.counts[label] = 0;
  }
  for (const auto& sentence : corpus.sentences) {
    for (const int id : sentence.labels) {
      ++histogram.counts[corpus.scheme.labels[static_cast<std::size_t>(id)]];
      ++histogram.total;
    }
  }
  for (const auto& [label, count] : histogram.counts) {
    histogram.fractions[label] =
        histogram.total == 0 ? 0.0
                             : static_cast<double>(count) / static_cast<double>(histogram.total);
  }
  return histogram;
}

std::string histogram_to_json(const LabelHistogram& histogram, const std::string& corpus_name) {
  nlohmann::ordered_json j;
  j["corpus"] = corpus_name;
  j["total_tokens"] = histogram.total;
  j["counts"] = nlohmann::ordered_json::object();
  j["fractions"] = nlohmann::ordered_json::object();
  for (const auto& [label, count] : histogram.counts) {
    j["counts"][label] = count;
  }
  for (const auto& [label, fraction] : histogram.fractions) {
    j["fractions"][label] = fraction;
  }
  return j.dump(2);
}

std::string serialize_two_column(const Corpus& corpus, bool include_provenance) {
  std::string out;
  for (const auto& sentence : corpus.sentences) {
    for (std::size_t i = 0; i < sentence.words.size(); ++i) {
      out += sentence.words[i];
      out += '\t';
      out += corpus.scheme.labels[static_cast<std::size_t>(sentence.labels[i])];
      if (include_provenance) {
        out += '\t';
        out += sentence.provenance;
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::vector<BioViolation> validate_bio(const Corpus& corpus) {
  std::vector<BioViolation> violations;
  const int i_loc = corpus.scheme.id_of("I-LOC");
  const int o = corpus.scheme.id_of("O");
  if (i_loc < 0) {
    return violations;
  }
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    const auto& labels = corpus.sentences[s].labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == i_loc && (i == 0 || labels[i - 1] == o)) {
        violations.push_back({s, i});
      }
    }
  }
  return violations;
}

}  // namespace topo
