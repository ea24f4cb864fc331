#include "topo/pipeline.hpp"

#include <algorithm>

#include "topo/common.hpp"

namespace topo {

namespace {

bool is_space_byte(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

bool is_digit_byte(char c) { return c >= '0' && c <= '9'; }

bool is_handle_byte(char c) { return is_word_byte(c); }

bool url_prefix_at(const std::string& s, std::size_t i) {
  static const char* prefixes[] = {"http://", "https://", "www."};
  for (const char* prefix : prefixes) {
    const std::size_t len = std::char_traits<char>::length(prefix);
    if (s.compare(i, len, prefix) == 0) {
      return true;
    }
  }
  return false;
}

void append_mapped(CleanText& out, const std::string& piece, std::size_t orig_begin,
                   std::size_t orig_end) {
  for (char c : piece) {
    out.text.push_back(c);
    out.orig_start.push_back(orig_begin);
    out.orig_end.push_back(orig_end);
  }
}

}  // namespace

std::pair<std::size_t, std::size_t> CleanText::original_range(std::size_t begin,
                                                              std::size_t end) const {
  if (begin >= end || end > text.size()) {
    throw Error("original_range: empty or out-of-bounds clean range");
  }
  return {orig_start[begin], orig_end[end - 1]};
}

CleanText preprocess(const std::string& raw) {
  CleanText out;
  out.text.reserve(raw.size());
  std::size_t i = 0;
  const std::size_t n = raw.size();
  bool at_word_start = true;
  while (i < n) {
    if (is_space_byte(raw[i])) {
      std::size_t j = i;
      while (j < n && is_space_byte(raw[j])) {
        ++j;
      }
      // A run becomes one space; leading and trailing runs vanish.
      if (!out.text.empty() && j < n) {
        append_mapped(out, " ", i, j);
      }
      i = j;
      at_word_start = true;
      continue;
    }
    if (at_word_start && url_prefix_at(raw, i)) {
      std::size_t j = i;
      while (j < n && !is_space_byte(raw[j])) {
        ++j;
      }
      append_mapped(out, kUrlPlaceholder, i, j);
      i = j;
      at_word_start = false;
      continue;
    }
    if (at_word_start && raw[i] == '@' && i + 1 < n && is_handle_byte(raw[i + 1])) {
      std::size_t j = i + 1;
      while (j < n && is_handle_byte(raw[j])) {
        ++j;
      }
      append_mapped(out, kUserPlaceholder, i, j);
      i = j;
      at_word_start = false;
      continue;
    }
    append_mapped(out, std::string(1, raw[i]), i, i + 1);
    ++i;
    at_word_start = false;
  }
  return out;
}

std::vector<ZipMatch> extract_zipcodes(const std::string& text) {
  std::vector<ZipMatch> matches;
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    if (!is_digit_byte(text[i]) || (i > 0 && is_word_byte(text[i - 1]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && is_digit_byte(text[j])) {
      ++j;
    }
    if (j - i != 5) {
      i = j;  // a bare digit run of any other length never matches
      continue;
    }
    // Optional ZIP+4 extension: hyphen, exactly four digits, word boundary.
    if (j + 1 < n && text[j] == '-' && is_digit_byte(text[j + 1])) {
      std::size_t k = j + 1;
      while (k < n && is_digit_byte(text[k])) {
        ++k;
      }
      if (k - (j + 1) == 4 && (k == n || !is_word_byte(text[k]))) {
        matches.push_back({text.substr(i, k - i), i, k});
        i = k;
        continue;
      }
    }
    // No valid extension: the five digits alone still need a boundary after.
    if (j == n || !is_word_byte(text[j])) {
      matches.push_back({text.substr(i, j - i), i, j});
    }
    i = j;
  }
  return matches;
}

std::vector<WordSpanGroup> group_word_spans(const std::vector<WordPrediction>& words) {
  std::vector<WordSpanGroup> groups;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (!is_location_label(words[w].label)) {
      continue;
    }
    // I-LOC continues an immediately adjacent span; anything else (B-LOC,
    // or an I-LOC with no open span) starts a fresh one.
    const bool extends =
        words[w].label == kLabelILoc && !groups.empty() && groups.back().end_word == w;
    if (extends) {
      groups.back().end_word = w + 1;
      groups.back().confidence = std::min(groups.back().confidence, words[w].confidence);
    } else {
      groups.push_back({w, w + 1, words[w].confidence});
    }
  }
  return groups;
}

ExtractionResult run_extraction(const std::string& raw, const TokenClassifier& clf,
                                const PieceVocab& vocab, int max_len) {
  ExtractionResult result;
  result.clean = preprocess(raw);
  const std::string& text = result.clean.text;

  // Whitespace tokenization of the clean text, keeping byte ranges.
  std::vector<std::pair<std::size_t, std::size_t>> word_ranges;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == ' ') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') {
      ++j;
    }
    word_ranges.emplace_back(i, j);
    i = j;
  }
  if (word_ranges.empty()) {
    return result;
  }

  std::vector<std::string> words;
  words.reserve(word_ranges.size());
  for (const auto& [begin, end] : word_ranges) {
    words.push_back(text.substr(begin, end - begin));
  }

  // Window the words so every window fits the piece budget whole. A single
  // word wider than the budget gets a window to itself and falls out of the
  // prediction; it is backfilled as O below.
  const std::size_t budget = static_cast<std::size_t>(max_len - 2);
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  std::size_t begin = 0;
  std::size_t used = 0;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const std::size_t pieces = tokenize_word(words[w], vocab).size();
    if (w > begin && used + pieces > budget) {
      windows.emplace_back(begin, w);
      begin = w;
      used = 0;
    }
    used += pieces;
  }
  windows.emplace_back(begin, words.size());

  std::vector<PieceSequence> sequences;
  sequences.reserve(windows.size());
  for (const auto& [wb, we] : windows) {
    TaggedSentence chunk;
    chunk.words.assign(words.begin() + static_cast<std::ptrdiff_t>(wb),
                       words.begin() + static_cast<std::ptrdiff_t>(we));
    chunk.labels.assign(we - wb, kLabelO);
    sequences.push_back(align(chunk, vocab, max_len));
  }

  const auto predictions = predict_words(clf, vocab, sequences, 32);
  for (std::size_t s = 0; s < windows.size(); ++s) {
    const auto& [wb, we] = windows[s];
    for (std::size_t w = wb; w < we; ++w) {
      WordPrediction p;
      if (w - wb < predictions[s].size()) {
        p = predictions[s][w - wb];
      }
      p.word = words[w];  // surface form, not the piece reassembly
      result.words.push_back(std::move(p));
    }
  }

  for (const WordSpanGroup& group : group_word_spans(result.words)) {
    const std::size_t clean_begin = word_ranges[group.begin_word].first;
    const std::size_t clean_end = word_ranges[group.end_word - 1].second;
    const auto [orig_begin, orig_end] = result.clean.original_range(clean_begin, clean_end);
    ToponymSpan span;
    span.text = raw.substr(orig_begin, orig_end - orig_begin);
    span.start_char = orig_begin;
    span.end_char = orig_end;
    span.confidence = group.confidence;
    span.word_labels.assign(result.words.begin() + static_cast<std::ptrdiff_t>(group.begin_word),
                            result.words.begin() + static_cast<std::ptrdiff_t>(group.end_word));
    result.spans.push_back(std::move(span));
  }
  return result;
}

std::vector<ToponymSpan> extract_toponyms(const std::string& raw, const TokenClassifier& clf,
                                          const PieceVocab& vocab, int max_len) {
  return run_extraction(raw, clf, vocab, max_len).spans;
}

}  // namespace topo
