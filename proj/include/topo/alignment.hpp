#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topo/corpus.hpp"
#include "topo/vocab.hpp"

namespace topo {

inline constexpr int kDefaultMaxLen = 128;

/// Word-piece view of one sentence: [CLS] pieces... [SEP] padding, each
/// word's label propagated to every one of its pieces, IGNORE everywhere
/// else. word_spans are half-open piece index ranges, one per surviving
/// word, contiguous and in order.
struct PieceSequence {
  std::vector<int> piece_ids;                    // length max_len
  std::vector<int> piece_labels;                 // length max_len, IGNORE on specials/padding
  std::vector<std::pair<int, int>> word_spans;   // per surviving word
  std::vector<std::uint8_t> mask;                // 1 = real position, 0 = padding
  int content_pieces = 0;                        // pieces excluding specials/padding
  int dropped_words = 0;                         // whole words truncated from the end

  bool operator==(const PieceSequence&) const = default;
};

/// Tokenizes and lays out one sentence. Words whose pieces would not fit in
/// max_len - 2 are dropped whole, never split, and counted in
/// dropped_words.
PieceSequence align(const TaggedSentence& sentence, const PieceVocab& vocab,
                    int max_len = kDefaultMaxLen);

struct WordPrediction {
  std::string word;
  int label = 0;
  double confidence = 0.0;

  bool operator==(const WordPrediction&) const = default;
};

/// Merges piece-level predictions back to words: text is the concatenation
/// of the word's pieces with "##" stripped from continuations; label and
/// confidence come from the first piece of the span.
std::vector<WordPrediction> merge_to_words(const PieceSequence& pieces, const PieceVocab& vocab,
                                           std::span<const int> predicted_labels,
                                           std::span<const double> confidences);

}  // namespace topo
