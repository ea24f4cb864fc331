#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "topo/classifier.hpp"

namespace topo {

inline constexpr const char* kUrlPlaceholder = "<URL>";
inline constexpr const char* kUserPlaceholder = "<USER>";

/// Cleaned post text plus a per-byte map back into the raw string, so any
/// clean-text span can be quoted from the original.
struct CleanText {
  std::string text;
  std::vector<std::size_t> orig_start;  // one entry per byte of text
  std::vector<std::size_t> orig_end;    // half-open partner of orig_start

  /// Original byte range covering the clean-text range [begin, end).
  std::pair<std::size_t, std::size_t> original_range(std::size_t begin, std::size_t end) const;
};

/// Rule-based cleanup: URLs and @mentions become placeholder tokens,
/// whitespace runs collapse to single spaces, ends are trimmed, case and
/// everything else is preserved byte for byte.
CleanText preprocess(const std::string& raw);

struct ZipMatch {
  std::string code;
  std::size_t start_char = 0;
  std::size_t end_char = 0;

  bool operator==(const ZipMatch&) const = default;
};

/// US postal codes: word boundary, five digits, optional "-dddd" extension,
/// word boundary. Longer bare digit runs never match.
std::vector<ZipMatch> extract_zipcodes(const std::string& text);

/// Contiguous run of location-labeled words, grouped from per-word
/// predictions: B-LOC starts a span, I-LOC extends one, and an I-LOC with
/// no open span starts its own rather than being dropped.
struct WordSpanGroup {
  std::size_t begin_word = 0;
  std::size_t end_word = 0;  // half-open
  double confidence = 0.0;   // min over member words

  bool operator==(const WordSpanGroup&) const = default;
};

std::vector<WordSpanGroup> group_word_spans(const std::vector<WordPrediction>& words);

struct ToponymSpan {
  std::string text;            // verbatim substring of the raw input
  std::size_t start_char = 0;  // byte offsets into the raw input
  std::size_t end_char = 0;
  double confidence = 0.0;
  std::vector<WordPrediction> word_labels;
};

/// Everything one post yields before geocoding.
struct ExtractionResult {
  CleanText clean;
  std::vector<WordPrediction> words;  // one per clean-text word, surface form kept
  std::vector<ToponymSpan> spans;
};

/// Full recognition pass: preprocess, whitespace-tokenize, window the words
/// so every window fits the classifier's piece budget, predict, merge, and
/// group. Span offsets refer to the raw input text.
ExtractionResult run_extraction(const std::string& raw, const TokenClassifier& clf,
                                const PieceVocab& vocab, int max_len = kDefaultMaxLen);

std::vector<ToponymSpan> extract_toponyms(const std::string& raw, const TokenClassifier& clf,
                                          const PieceVocab& vocab, int max_len = kDefaultMaxLen);

}  // namespace topo
