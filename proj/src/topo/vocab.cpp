#include "topo/vocab.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "topo/common.hpp"

namespace topo {

PieceVocab PieceVocab::from_lines(std::vector<std::string> lines) {
  PieceVocab vocab;
  vocab.pieces_ = std::move(lines);
  vocab.ids_.reserve(vocab.pieces_.size());
  for (std::size_t i = 0; i < vocab.pieces_.size(); ++i) {
    if (vocab.pieces_[i].empty()) {
      throw Error("vocabulary line " + std::to_string(i + 1) + " is empty");
    }
    const auto [it, inserted] = vocab.ids_.emplace(vocab.pieces_[i], static_cast<int>(i));
    if (!inserted) {
      throw Error("duplicate vocabulary piece: " + vocab.pieces_[i]);
    }
  }
  vocab.pad_id_ = vocab.id_of(kPadToken);
  vocab.unk_id_ = vocab.id_of(kUnkToken);
  vocab.cls_id_ = vocab.id_of(kClsToken);
  vocab.sep_id_ = vocab.id_of(kSepToken);
  for (const auto* name : {kPadToken, kUnkToken, kClsToken, kSepToken}) {
    if (vocab.id_of(name) < 0) {
      throw Error(std::string("vocabulary is missing special token ") + name);
    }
  }
  return vocab;
}

PieceVocab PieceVocab::load(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    lines.push_back(line);
  }
  // A trailing newline produces no extra line with getline; a genuinely
  // empty last line would, and from_lines rejects it.
  return from_lines(std::move(lines));
}

PieceVocab PieceVocab::toy_from_corpus(const Corpus& corpus) {
  std::set<std::string> pieces;
  for (const auto& sentence : corpus.sentences) {
    for (const auto& word : sentence.words) {
      pieces.insert(word);
      pieces.insert(kContinuationPrefix + word);
      const auto offsets = utf8_offsets(word);
      for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
        const std::string ch = word.substr(offsets[i], offsets[i + 1] - offsets[i]);
        pieces.insert(ch);
        pieces.insert(kContinuationPrefix + ch);
      }
    }
  }
  std::vector<std::string> lines = {kPadToken, kUnkToken, kClsToken, kSepToken};
  lines.insert(lines.end(), pieces.begin(), pieces.end());
  return from_lines(std::move(lines));
}

void PieceVocab::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& piece : pieces_) {
    out += piece;
    out += '\n';
  }
  write_text_file(path, out);
}

int PieceVocab::id_of(std::string_view piece) const {
  const auto it = ids_.find(std::string(piece));
  return it == ids_.end() ? -1 : it->second;
}

const std::string& PieceVocab::piece(int id) const {
  if (id < 0 || id >= size()) {
    throw Error("piece id out of range: " + std::to_string(id));
  }
  return pieces_[static_cast<std::size_t>(id)];
}

std::vector<std::string> tokenize_word(const std::string& word, const PieceVocab& vocab) {
  if (word.empty()) {
    throw Error("tokenize_word: empty word");
  }
  const auto offsets = utf8_offsets(word);
  const std::size_t n_chars = offsets.size() - 1;
  std::vector<std::string> pieces;
  std::size_t start = 0;
  while (start < n_chars) {
    std::string match;
    std::size_t match_end = start;
    for (std::size_t end = n_chars; end > start; --end) {
      std::string candidate = word.substr(offsets[start], offsets[end] - offsets[start]);
      if (start > 0) {
        candidate = kContinuationPrefix + candidate;
      }
      if (vocab.id_of(candidate) >= 0) {
        match = std::move(candidate);
        match_end = end;
        break;
      }
    }
    if (match.empty()) {
      return {kUnkToken};
    }
    pieces.push_back(std::move(match));
    start = match_end;
  }
  return pieces;
}

}  // namespace topo
