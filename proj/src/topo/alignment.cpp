#include "topo/alignment.hpp"

#include <cstring>

#include "topo/common.hpp"

namespace topo {

PieceSequence align(const TaggedSentence& sentence, const PieceVocab& vocab, int max_len) {
  if (max_len < 3) {
    throw Error("align: max_len must be at least 3");
  }
  if (sentence.words.size() != sentence.labels.size()) {
    throw Error("align: word/label length mismatch");
  }
  const int capacity = max_len - 2;

  PieceSequence out;
  std::vector<int> content_ids;
  std::vector<int> content_labels;
  content_ids.reserve(static_cast<std::size_t>(capacity));

  std::size_t kept_words = 0;
  for (; kept_words < sentence.words.size(); ++kept_words) {
    const auto pieces = tokenize_word(sentence.words[kept_words], vocab);
    if (content_ids.size() + pieces.size() > static_cast<std::size_t>(capacity)) {
      break;
    }
    const int start = static_cast<int>(content_ids.size()) + 1;  // +1 for [CLS]
    for (const auto& piece : pieces) {
      content_ids.push_back(vocab.id_of(piece));
      content_labels.push_back(sentence.labels[kept_words]);
    }
    out.word_spans.emplace_back(start, start + static_cast<int>(pieces.size()));
  }
  out.dropped_words = static_cast<int>(sentence.words.size() - kept_words);
  out.content_pieces = static_cast<int>(content_ids.size());

  out.piece_ids.assign(static_cast<std::size_t>(max_len), vocab.pad_id());
  out.piece_labels.assign(static_cast<std::size_t>(max_len), kIgnoreLabel);
  out.mask.assign(static_cast<std::size_t>(max_len), 0);

  out.piece_ids[0] = vocab.cls_id();
  out.mask[0] = 1;
  for (std::size_t i = 0; i < content_ids.size(); ++i) {
    out.piece_ids[i + 1] = content_ids[i];
    out.piece_labels[i + 1] = content_labels[i];
    out.mask[i + 1] = 1;
  }
  const std::size_t sep_pos = content_ids.size() + 1;
  out.piece_ids[sep_pos] = vocab.sep_id();
  out.mask[sep_pos] = 1;
  return out;
}

std::vector<WordPrediction> merge_to_words(const PieceSequence& pieces, const PieceVocab& vocab,
                                           std::span<const int> predicted_labels,
                                           std::span<const double> confidences) {
  if (predicted_labels.size() != pieces.piece_ids.size() ||
      confidences.size() != pieces.piece_ids.size()) {
    throw Error("merge_to_words: prediction length does not match piece positions");
  }
  std::vector<WordPrediction> words;
  words.reserve(pieces.word_spans.size());
  const std::size_t prefix_len = std::strlen(kContinuationPrefix);
  for (const auto& [start, end] : pieces.word_spans) {
    if (start < 1 || end <= start || end > static_cast<int>(pieces.piece_ids.size())) {
      throw Error("merge_to_words: word span [" + std::to_string(start) + "," +
                  std::to_string(end) + ") out of range");
    }
    WordPrediction word;
    word.label = predicted_labels[static_cast<std::size_t>(start)];
    word.confidence = confidences[static_cast<std::size_t>(start)];
    for (int i = start; i < end; ++i) {
      const std::string& piece = vocab.piece(pieces.piece_ids[static_cast<std::size_t>(i)]);
      if (i > start && piece.rfind(kContinuationPrefix, 0) == 0) {
        word.word += piece.substr(prefix_len);
      } else {
        word.word += piece;
      }
    }
    words.push_back(std::move(word));
  }
  return words;
}

}  // namespace topo
