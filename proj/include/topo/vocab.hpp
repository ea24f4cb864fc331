#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "topo/corpus.hpp"

namespace topo {

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kContinuationPrefix = "##";

/// Word-piece vocabulary. File format: one piece per line, line number = id
/// (the published cased vocabulary format). Continuation pieces are stored
/// with their "##" prefix.
class PieceVocab {
public:
  static PieceVocab from_lines(std::vector<std::string> lines);
  static PieceVocab load(const std::filesystem::path& path);

  /// Deterministic vocabulary for the miniature test mode: specials, then
  /// every character seen in the corpus, every full word, and their
  /// "##"-prefixed forms, sorted.
  static PieceVocab toy_from_corpus(const Corpus& corpus);

  void save(const std::filesystem::path& path) const;

  int id_of(std::string_view piece) const;  // -1 if absent
  const std::string& piece(int id) const;
  int size() const { return static_cast<int>(pieces_.size()); }

  int pad_id() const { return pad_id_; }
  int unk_id() const { return unk_id_; }
  int cls_id() const { return cls_id_; }
  int sep_id() const { return sep_id_; }

  const std::vector<std::string>& pieces() const { return pieces_; }

private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> ids_;
  int pad_id_ = -1;
  int unk_id_ = -1;
  int cls_id_ = -1;
  int sep_id_ = -1;
};

/// Greedy longest-match decomposition. Pieces after the first carry the
/// "##" prefix; a word with no match at some position becomes the single
/// unknown piece. Matching is done on UTF-8 codepoint boundaries.
std::vector<std::string> tokenize_word(const std::string& word, const PieceVocab& vocab);

}  // namespace topo
