#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "topo/alignment.hpp"
#include "topo/common.hpp"
#include "topo/corpus.hpp"
#include "topo/vocab.hpp"

using namespace topo;

namespace {

PieceVocab toy_vocab() {
  return PieceVocab::from_lines({kPadToken, kUnkToken, kClsToken, kSepToken,
                                 "play", "##ing", "Paris", "a", "##a", "New", "York"});
}

TaggedSentence sentence(std::vector<std::string> words, std::vector<int> labels) {
  TaggedSentence s;
  s.words = std::move(words);
  s.labels = std::move(labels);
  return s;
}

// Corpus whose toy vocabulary covers single letters a..j plus a few whole
// words, so generated sentences split into multiple pieces.
Corpus vocab_seed_corpus() {
  TaggedSentence s;
  for (char ch = 'a'; ch <= 'j'; ++ch) {
    s.words.push_back(std::string(1, ch));
    s.labels.push_back(kLabelO);
  }
  for (const char* w : {"flood", "water", "station"}) {
    s.words.push_back(w);
    s.labels.push_back(kLabelO);
  }
  Corpus c;
  c.name = "seed";
  c.scheme = unified_scheme();
  c.sentences.push_back(std::move(s));
  return c;
}

TaggedSentence random_sentence(Rng& rng) {
  static const std::vector<std::string> known = {"flood", "water", "station"};
  TaggedSentence s;
  const std::size_t n_words = 1 + rng.index(15);
  for (std::size_t w = 0; w < n_words; ++w) {
    if (rng.index(4) == 0) {
      s.words.push_back(known[rng.index(known.size())]);
    } else {
      std::string word;
      const std::size_t len = 1 + rng.index(6);
      for (std::size_t i = 0; i < len; ++i) {
        word += static_cast<char>('a' + rng.index(10));
      }
      s.words.push_back(std::move(word));
    }
    s.labels.push_back(static_cast<int>(rng.index(kNumLabels)));
  }
  return s;
}

}  // namespace

TEST_CASE("greedy longest match splits with continuation prefix") {
  const PieceVocab v = toy_vocab();
  CHECK(tokenize_word("playing", v) == std::vector<std::string>{"play", "##ing"});
  CHECK(tokenize_word("Paris", v) == std::vector<std::string>{"Paris"});
  CHECK(tokenize_word("Qxz7", v) == std::vector<std::string>{kUnkToken});
  CHECK_THROWS_AS(tokenize_word("", v), Error);
}

TEST_CASE("matching walks utf-8 codepoints, not bytes") {
  Corpus c;
  c.scheme = unified_scheme();
  TaggedSentence s;
  for (const char* w : {"c", "a", "f", "\xc3\xa9"}) {  // e-acute
    s.words.push_back(w);
    s.labels.push_back(kLabelO);
  }
  c.sentences.push_back(s);
  const PieceVocab v = PieceVocab::toy_from_corpus(c);
  CHECK(tokenize_word("caf\xc3\xa9", v) ==
        std::vector<std::string>{"c", "##a", "##f", "##\xc3\xa9"});
}

TEST_CASE("align lays out [CLS] pieces [SEP] padding with propagated labels") {
  const PieceVocab v = toy_vocab();
  const PieceSequence p = align(sentence({"playing"}, {kLabelO}), v, 8);
  CHECK(p.piece_ids == std::vector<int>{v.cls_id(), v.id_of("play"), v.id_of("##ing"),
                                        v.sep_id(), v.pad_id(), v.pad_id(), v.pad_id(),
                                        v.pad_id()});
  CHECK(p.piece_labels == std::vector<int>{kIgnoreLabel, kLabelO, kLabelO, kIgnoreLabel,
                                           kIgnoreLabel, kIgnoreLabel, kIgnoreLabel,
                                           kIgnoreLabel});
  CHECK(p.mask == std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0, 0, 0});
  CHECK(p.word_spans == std::vector<std::pair<int, int>>{{1, 3}});
  CHECK(p.content_pieces == 2);
  CHECK(p.dropped_words == 0);
}

TEST_CASE("every piece of a word carries that word's label") {
  const PieceVocab v = toy_vocab();
  const PieceSequence p =
      align(sentence({"New", "York"}, {kLabelBLoc, kLabelILoc}), v, 8);
  CHECK(p.piece_labels[1] == kLabelBLoc);
  CHECK(p.piece_labels[2] == kLabelILoc);
  CHECK(p.word_spans.size() == 2);

  const PieceSequence multi =
      align(sentence({"playing", "Paris"}, {kLabelBLoc, kLabelILoc}), v, 10);
  for (const auto& [start, end] : multi.word_spans) {
    const int first = multi.piece_labels[static_cast<std::size_t>(start)];
    for (int i = start; i < end; ++i) {
      CHECK(multi.piece_labels[static_cast<std::size_t>(i)] == first);
    }
  }
}

TEST_CASE("overlong sentences are truncated by whole words") {
  const PieceVocab v = toy_vocab();
  // 200 single-piece words against capacity 126.
  TaggedSentence s;
  for (int i = 0; i < 200; ++i) {
    s.words.push_back("a");
    s.labels.push_back(kLabelO);
  }
  const PieceSequence p = align(s, v, 128);
  CHECK(p.content_pieces == 126);
  CHECK(p.dropped_words == 74);
  CHECK(p.word_spans.size() == 126);
  CHECK(p.piece_ids.size() == 128);

  // 32 four-piece words: 31 fit (124 pieces); the 32nd would overflow and is
  // dropped whole rather than split.
  Corpus seed = vocab_seed_corpus();
  const PieceVocab chars = PieceVocab::toy_from_corpus(seed);
  TaggedSentence t;
  for (int i = 0; i < 32; ++i) {
    t.words.push_back("abcd");
    t.labels.push_back(kLabelO);
  }
  const PieceSequence q = align(t, chars, 128);
  CHECK(q.content_pieces == 124);
  CHECK(q.dropped_words == 1);
  CHECK(q.word_spans.size() == 31);
}

TEST_CASE("align validates its inputs") {
  const PieceVocab v = toy_vocab();
  CHECK_THROWS_AS(align(sentence({"a"}, {kLabelO}), v, 2), Error);
  CHECK_THROWS_AS(align(sentence({"a", "a"}, {kLabelO}), v, 8), Error);
}

TEST_CASE("align is deterministic") {
  const PieceVocab v = toy_vocab();
  const TaggedSentence s = sentence({"playing", "New", "York"}, {0, 1, 2});
  CHECK(align(s, v, 16) == align(s, v, 16));
}

TEST_CASE("merge takes label and confidence from the first piece and strips the prefix") {
  const PieceVocab v = toy_vocab();
  const PieceSequence p = align(sentence({"playing"}, {kLabelO}), v, 8);
  std::vector<int> pred(8, kLabelO);
  std::vector<double> conf(8, 0.0);
  pred[1] = kLabelBLoc;  // first piece
  pred[2] = kLabelO;     // continuation piece disagrees and must lose
  conf[1] = 0.9;
  conf[2] = 0.1;
  const auto words = merge_to_words(p, v, pred, conf);
  REQUIRE(words.size() == 1);
  CHECK(words[0].word == "playing");
  CHECK(words[0].label == kLabelBLoc);
  CHECK(words[0].confidence == 0.9);
}

TEST_CASE("merge validates prediction lengths and span ranges") {
  const PieceVocab v = toy_vocab();
  const PieceSequence p = align(sentence({"Paris"}, {kLabelO}), v, 8);
  const std::vector<int> short_pred(4, 0);
  const std::vector<double> conf(8, 0.5);
  CHECK_THROWS_AS(merge_to_words(p, v, short_pred, conf), Error);

  PieceSequence corrupt = p;
  corrupt.word_spans[0] = {5, 99};
  const std::vector<int> pred(8, 0);
  CHECK_THROWS_AS(merge_to_words(corrupt, v, pred, conf), Error);
}

TEST_CASE("merge(align(s)) round-trips 1000 random sentences exactly") {
  const PieceVocab v = PieceVocab::toy_from_corpus(vocab_seed_corpus());
  Rng rng(20240502);
  const std::vector<double> conf(kDefaultMaxLen, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const TaggedSentence s = random_sentence(rng);
    const PieceSequence p = align(s, v);
    REQUIRE(p.dropped_words == 0);

    // Piece count conservation: spans tile the content region exactly.
    int span_total = 0;
    int prev_end = 1;
    for (const auto& [start, end] : p.word_spans) {
      CHECK(start == prev_end);
      span_total += end - start;
      prev_end = end;
    }
    CHECK(span_total == p.content_pieces);

    const auto merged = merge_to_words(p, v, p.piece_labels, conf);
    REQUIRE(merged.size() == s.words.size());
    for (std::size_t w = 0; w < merged.size(); ++w) {
      CHECK(merged[w].word == s.words[w]);
      CHECK(merged[w].label == s.labels[w]);
    }
  }
}

TEST_CASE("vocabulary construction validates its lines") {
  CHECK_THROWS_AS(PieceVocab::from_lines({kPadToken, kUnkToken, kClsToken}), Error);
  CHECK_THROWS_AS(PieceVocab::from_lines({kPadToken, kUnkToken, kClsToken, kSepToken, "a", "a"}),
                  Error);
  CHECK_THROWS_AS(PieceVocab::from_lines({kPadToken, kUnkToken, kClsToken, kSepToken, ""}),
                  Error);

  const PieceVocab v = toy_vocab();
  CHECK(v.id_of("play") >= 0);
  CHECK(v.id_of("absent") == -1);
  CHECK(v.piece(v.id_of("play")) == "play");
  CHECK_THROWS_AS(v.piece(-1), Error);
  CHECK_THROWS_AS(v.piece(v.size()), Error);
}

TEST_CASE("vocabulary save/load round-trips ids") {
  const PieceVocab v = toy_vocab();
  const auto path = std::filesystem::temp_directory_path() / "topo_vocab_roundtrip.txt";
  v.save(path);
  const PieceVocab back = PieceVocab::load(path);
  REQUIRE(back.size() == v.size());
  for (int id = 0; id < v.size(); ++id) {
    CHECK(back.piece(id) == v.piece(id));
  }
  std::filesystem::remove(path);
}

TEST_CASE("toy vocabulary holds words, characters, and their continuation forms") {
  const PieceVocab v = PieceVocab::toy_from_corpus(vocab_seed_corpus());
  for (const char* piece : {"flood", "##flood", "f", "##f", "a", "##a"}) {
    CHECK(v.id_of(piece) >= 0);
  }
  // Deterministic: same corpus, same vocabulary.
  const PieceVocab w = PieceVocab::toy_from_corpus(vocab_seed_corpus());
  CHECK(v.pieces() == w.pieces());
}
