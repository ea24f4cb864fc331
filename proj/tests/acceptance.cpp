// Acceptance gate for the toolkit. Each criterion prints exactly one
// PASS/FAIL line (criterion 10 prints DECLARED: it records work that is out
// of desk scope by design and does not gate). The process exits 0 only if
// every gating criterion passes.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "topo/classifier.hpp"
#include "topo/cli.hpp"
#include "topo/corpus.hpp"
#include "topo/geocoder.hpp"
#include "topo/metrics.hpp"
#include "topo/output.hpp"
#include "topo/pipeline.hpp"
#include "topo/trainer.hpp"

using namespace topo;

namespace {

namespace fs = std::filesystem;

std::string fixture(const std::string& name) {
  return std::string(TOPO_TEST_DIR) + "/fixtures/" + name;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Check {
  bool ok = true;
  std::string detail;  // first failure wins; successes may add a summary

  void fail(const std::string& why) {
    if (ok) {
      ok = false;
      detail = why;
    }
  }
  void require(bool condition, const std::string& why) {
    if (!condition) {
      fail(why);
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// 1. metric oracle equivalence
// ---------------------------------------------------------------------------

// Brute-force recount, written against the documented metric definition and
// none of the library internals: per class, tp / fp / fn by direct scan;
// micro scores from the summed counts with zero denominators pinned to 0.
struct OracleCounts {
  long tp = 0, fp = 0, fn = 0;
};

OracleCounts oracle_class_counts(const std::vector<int>& gold, const std::vector<int>& pred,
                                 int cls) {
  OracleCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == cls && pred[i] == cls) ++c.tp;
    if (pred[i] == cls && gold[i] != cls) ++c.fp;
    if (gold[i] == cls && pred[i] != cls) ++c.fn;
  }
  return c;
}

struct OracleScores {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

OracleScores oracle_micro(const OracleCounts& b, const OracleCounts& i) {
  const double tp = double(b.tp + i.tp);
  const double fp = double(b.fp + i.fp);
  const double fn = double(b.fn + i.fn);
  OracleScores s;
  s.precision = (tp + fp > 0.0) ? tp / (tp + fp) : 0.0;
  s.recall = (tp + fn > 0.0) ? tp / (tp + fn) : 0.0;
  s.f1 = (s.precision + s.recall > 0.0)
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

Check criterion_metric_oracle() {
  Check check;
  std::mt19937_64 rng(20260816);
  std::uniform_int_distribution<int> length_dist(1, 60);
  std::uniform_int_distribution<int> label_dist(0, 2);
  std::bernoulli_distribution sparse(0.15);

  int pairs = 0;
  for (int round = 0; round < 1200; ++round) {
    const int n = length_dist(rng);
    std::vector<int> gold(n), pred(n);
    for (int i = 0; i < n; ++i) {
      switch (round % 4) {
        case 0:  // uniform labels on both sides
          gold[i] = label_dist(rng);
          pred[i] = label_dist(rng);
          break;
        case 1:  // location-sparse, the realistic regime
          gold[i] = sparse(rng) ? label_dist(rng) : kLabelO;
          pred[i] = sparse(rng) ? label_dist(rng) : kLabelO;
          break;
        case 2:  // all-O gold: precision denominators can vanish
          gold[i] = kLabelO;
          pred[i] = label_dist(rng);
          break;
        default:  // all-O predictions: recall denominators can vanish
          gold[i] = label_dist(rng);
          pred[i] = kLabelO;
          break;
      }
    }
    ++pairs;

    const ConfusionCounts counts = count_confusion(gold, pred);
    const PrfScores micro = micro_prf(counts);
    const OracleCounts ob = oracle_class_counts(gold, pred, kLabelBLoc);
    const OracleCounts oi = oracle_class_counts(gold, pred, kLabelILoc);
    const OracleScores os = oracle_micro(ob, oi);

    check.require(counts.b_loc.tp == ob.tp && counts.b_loc.fp == ob.fp &&
                      counts.b_loc.fn == ob.fn,
                  "B-LOC counts diverge from the recount at pair " + std::to_string(round));
    check.require(counts.i_loc.tp == oi.tp && counts.i_loc.fp == oi.fp &&
                      counts.i_loc.fn == oi.fn,
                  "I-LOC counts diverge from the recount at pair " + std::to_string(round));
    check.require(std::abs(micro.precision - os.precision) <= 1e-12 &&
                      std::abs(micro.recall - os.recall) <= 1e-12 &&
                      std::abs(micro.f1 - os.f1) <= 1e-12,
                  "micro scores diverge from the recount at pair " + std::to_string(round));
    if (!check.ok) {
      return check;
    }
  }
  check.detail = std::to_string(pairs) + " random sequence pairs match the recount";
  return check;
}

// ---------------------------------------------------------------------------
// 2. reported-score consistency
// ---------------------------------------------------------------------------

struct ReportedRow {
  const char* group;
  const char* system;
  double precision;
  double recall;
  double f1;
};

// Reported micro precision / recall / F1 triples for the reference
// experiments this toolkit reproduces the arithmetic of.
constexpr ReportedRow kReportedRows[] = {
    {"encoder-size", "base-linear", 0.900, 0.904, 0.902},
    {"encoder-size", "large-linear", 0.934, 0.901, 0.917},
    {"newswire-test", "newswire-linear", 0.934, 0.901, 0.917},
    {"newswire-test", "newswire-mlp", 0.904, 0.910, 0.907},
    {"newswire-test", "newswire-cnn1d", 0.923, 0.920, 0.921},
    {"newswire-test", "combined-linear", 0.889, 0.844, 0.866},
    {"newswire-test", "combined-mlp", 0.941, 0.884, 0.912},
    {"newswire-test", "combined-cnn1d", 0.942, 0.916, 0.929},
    {"hurricane-test", "newswire-linear", 0.895, 0.804, 0.847},
    {"hurricane-test", "newswire-mlp", 0.885, 0.811, 0.846},
    {"hurricane-test", "newswire-cnn1d", 0.898, 0.835, 0.865},
    {"hurricane-test", "combined-linear", 0.872, 0.589, 0.703},
    {"hurricane-test", "combined-mlp", 0.932, 0.541, 0.685},
    {"hurricane-test", "combined-cnn1d", 0.941, 0.668, 0.781},
    {"model-comparison", "rule-ner-broad", 0.729, 0.440, 0.548},
    {"model-comparison", "generic-ner-broad", 0.461, 0.304, 0.366},
    {"model-comparison", "bilstm-crf", 0.703, 0.600, 0.649},
    {"model-comparison", "noisy-text-ner", 0.729, 0.680, 0.703},
    {"model-comparison", "tuned-noisy-ner", 0.787, 0.678, 0.728},
    {"model-comparison", "this-toolkit", 0.898, 0.835, 0.865},
};

Check criterion_reported_scores() {
  Check check;
  int rows = 0;
  for (const ReportedRow& row : kReportedRows) {
    const double computed = round_places(harmonic_f1(row.precision, row.recall), 3);
    const double diff = std::abs(computed - row.f1);
    if (diff > 0.002 + 1e-9) {
      std::ostringstream why;
      why << row.group << "/" << row.system << ": harmonic F1 of " << row.precision << "/"
          << row.recall << " is " << computed << ", reported " << row.f1;
      check.fail(why.str());
      return check;
    }
    ++rows;
  }
  check.detail = std::to_string(rows) + " reported P/R/F1 rows within 0.002 after 3-place rounding";
  return check;
}

// ---------------------------------------------------------------------------
// 3. alignment round-trip
// ---------------------------------------------------------------------------

Check criterion_alignment_round_trip() {
  Check check;

  // The toy vocabulary sees every lowercase letter plus a few real words, so
  // any word drawn from that alphabet tokenizes without [UNK].
  Corpus alphabet;
  alphabet.name = "alphabet";
  alphabet.scheme = builtin_scheme("unified");
  alphabet.sentences.push_back({{"abcdefghijklm", "nopqrstuvwxyz"}, {0, 0}, ""});
  alphabet.sentences.push_back({{"rain", "paris", "flood", "york"}, {0, 1, 0, 2}, ""});
  const PieceVocab vocab = PieceVocab::toy_from_corpus(alphabet);

  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<int> word_count(1, 13);
  std::uniform_int_distribution<int> word_len(1, 8);
  std::uniform_int_distribution<int> letter('a', 'z');
  std::uniform_int_distribution<int> label_dist(0, 2);
  std::bernoulli_distribution use_dictionary(0.25);
  const std::vector<std::string> dictionary = {"rain", "paris", "flood", "york"};

  for (int round = 0; round < 1000; ++round) {
    TaggedSentence sentence;
    const int n = word_count(rng);
    for (int w = 0; w < n; ++w) {
      if (use_dictionary(rng)) {
        sentence.words.push_back(dictionary[rng() % dictionary.size()]);
      } else {
        std::string word;
        const int len = word_len(rng);
        for (int c = 0; c < len; ++c) {
          word.push_back(char(letter(rng)));
        }
        sentence.words.push_back(word);
      }
      sentence.labels.push_back(label_dist(rng));
    }

    const PieceSequence pieces = align(sentence, vocab, kDefaultMaxLen);
    check.require(pieces.dropped_words == 0,
                  "sentence " + std::to_string(round) + " unexpectedly truncated");
    check.require(pieces.content_pieces <= kDefaultMaxLen - 2,
                  "sentence " + std::to_string(round) + " exceeds the piece budget");

    const std::vector<double> confidences(pieces.piece_ids.size(), 1.0);
    const std::vector<WordPrediction> merged =
        merge_to_words(pieces, vocab, pieces.piece_labels, confidences);
    check.require(merged.size() == sentence.words.size(),
                  "sentence " + std::to_string(round) + " changed word count");
    if (!check.ok) {
      return check;
    }
    for (std::size_t w = 0; w < merged.size(); ++w) {
      if (merged[w].word != sentence.words[w] || merged[w].label != sentence.labels[w]) {
        check.fail("sentence " + std::to_string(round) + " word " + std::to_string(w) +
                   ": got \"" + merged[w].word + "\"/" + std::to_string(merged[w].label) +
                   ", want \"" + sentence.words[w] + "\"/" + std::to_string(sentence.labels[w]));
        return check;
      }
    }
  }
  check.detail = "1000 random sentences survive align + merge exactly";
  return check;
}

// ---------------------------------------------------------------------------
// 4. head gradient checks
// ---------------------------------------------------------------------------

// Independent oracle: central finite differences of a projected scalar loss,
// evaluated by re-running the forward pass for every nudged component.
Check criterion_head_gradients() {
  Check check;
  std::mt19937_64 rng(777);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int hidden = 16;
  const int rows = 4;

  for (const HeadConfig& cfg :
       {HeadConfig::linear(), HeadConfig::mlp(), HeadConfig::cnn1d()}) {
    Rng init_rng(99);
    ParamMap params = init_head_params(cfg, hidden, init_rng);
    Mat x(rows, hidden);
    Mat projection(rows, cfg.num_labels);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        x(i, j) = normal(rng);
      }
    }
    for (Eigen::Index i = 0; i < projection.rows(); ++i) {
      for (Eigen::Index j = 0; j < projection.cols(); ++j) {
        projection(i, j) = normal(rng);
      }
    }

    HeadCache cache;
    head_forward(cfg, params, x, &cache);
    ParamMap analytic;
    head_backward(cfg, params, cache, projection, analytic);

    const auto loss = [&] {
      return (head_forward(cfg, params, x).array() * projection.array()).sum();
    };
    for (auto& [name, array] : params) {
      if (analytic.count(name) != 1) {
        check.fail(head_name(cfg.kind) + ": no analytic gradient for " + name);
        return check;
      }
      const Array& a = analytic.at(name);
      double diff2 = 0.0, norm2 = 0.0;
      for (std::size_t i = 0; i < array.data.size(); ++i) {
        const double saved = array.data[i];
        array.data[i] = saved + 1e-6;
        const double up = loss();
        array.data[i] = saved - 1e-6;
        const double down = loss();
        array.data[i] = saved;
        const double fd = (up - down) / 2e-6;
        diff2 += (a.data[i] - fd) * (a.data[i] - fd);
        norm2 += std::max(a.data[i] * a.data[i], fd * fd);
      }
      const double rel = std::sqrt(diff2) / std::max(std::sqrt(norm2), 1e-12);
      if (rel >= 1e-4) {
        std::ostringstream why;
        why << head_name(cfg.kind) << ": array " << name << " relative error " << rel;
        check.fail(why.str());
        return check;
      }
    }
  }
  check.detail = "linear, mlp and cnn1d gradients match finite differences at H=16";
  return check;
}

// ---------------------------------------------------------------------------
// 5. shape invariants
// ---------------------------------------------------------------------------

Check criterion_shapes() {
  Check check;
  const PieceVocab vocab =
      PieceVocab::from_lines({kPadToken, kUnkToken, kClsToken, kSepToken, "a", "b"});

  const int hiddens[] = {16, 64, 768, 1024};
  const int heads[] = {2, 4, 12, 16};
  for (int i = 0; i < 4; ++i) {
    const int hidden = hiddens[i];
    const int flatten = cnn_flatten_size(HeadConfig::cnn1d(), hidden);
    if (flatten != 16 * (hidden / 2)) {
      check.fail("flatten size at H=" + std::to_string(hidden) + " is " +
                 std::to_string(flatten) + ", want " + std::to_string(16 * (hidden / 2)));
      return check;
    }

    // One layer keeps the largest widths affordable; the logits contract is
    // width-independent.
    const EncoderConfig enc =
        EncoderConfig::miniature_config(vocab.size(), 1, hidden, heads[i], kDefaultMaxLen);
    const TokenClassifier clf = build_classifier(enc, HeadConfig::cnn1d(), 5);
    TaggedSentence s1{{"a", "b"}, {0, 0}, ""};
    TaggedSentence s2{{"b"}, {0}, ""};
    const std::vector<PieceSequence> sequences = {align(s1, vocab, kDefaultMaxLen),
                                                  align(s2, vocab, kDefaultMaxLen)};
    const Batch batch = Batch::from_sequences(sequences);
    const Mat logits = classifier_forward(clf, batch);
    if (logits.rows() != 2 * kDefaultMaxLen || logits.cols() != 3) {
      std::ostringstream why;
      why << "logits at H=" << hidden << " are (" << logits.rows() << ", " << logits.cols()
          << "), want (" << 2 * kDefaultMaxLen << ", 3)";
      check.fail(why.str());
      return check;
    }
  }
  check.detail = "flatten = 16*floor(H/2) and logits (batch*128, 3) for H in {16,64,768,1024}";
  return check;
}

// ---------------------------------------------------------------------------
// 6. overfit smoke test
// ---------------------------------------------------------------------------

Corpus synthetic_corpus_32() {
  Corpus corpus;
  corpus.name = "synthetic32";
  corpus.scheme = builtin_scheme("unified");
  const std::vector<std::string> cities = {"paris", "cairo",  "oslo",  "lima",
                                           "quito", "tokyo",  "miami", "dallas"};
  for (const std::string& city : cities) {
    corpus.sentences.push_back({{"flood", "in", city}, {0, 0, 1}, ""});
    corpus.sentences.push_back({{city, "needs", "help"}, {1, 0, 0}, ""});
    corpus.sentences.push_back({{"storm", "hits", city, "now"}, {0, 0, 1, 0}, ""});
  }
  const std::vector<std::pair<std::string, std::string>> twins = {
      {"new", "york"}, {"new", "delhi"}, {"port", "said"}, {"las", "vegas"}};
  for (const auto& [first, second] : twins) {
    corpus.sentences.push_back({{"flood", "in", first, second}, {0, 0, 1, 2}, ""});
    corpus.sentences.push_back({{first, second, "needs", "help"}, {1, 2, 0, 0}, ""});
  }
  return corpus;
}

Check criterion_overfit() {
  Check check;
  const Corpus corpus = synthetic_corpus_32();
  if (corpus.sentences.size() != 32) {
    check.fail("synthetic corpus has " + std::to_string(corpus.sentences.size()) +
               " sentences, want 32");
    return check;
  }
  const PieceVocab vocab = PieceVocab::toy_from_corpus(corpus);

  TrainConfig train;
  train.learning_rate = 2e-3;
  train.batch_size = 8;
  train.max_epochs = 300;
  train.warmup_fraction = 0.05;
  train.patience = 300;
  train.seed = 11;
  train.max_len = 16;
  train.target_val_f1 = 1.0;  // stop as soon as the corpus is memorized

  std::ostringstream detail;
  for (const HeadConfig& head :
       {HeadConfig::linear(), HeadConfig::mlp(), HeadConfig::cnn1d()}) {
    const EncoderConfig enc =
        EncoderConfig::miniature_config(vocab.size(), 2, 64, 4, train.max_len);
    TokenClassifier clf = build_classifier(enc, head, train.seed);
    const auto start = std::chrono::steady_clock::now();
    const TrainReport report = fine_tune(clf, corpus, corpus, vocab, train);
    const double elapsed = seconds_since(start);
    if (report.best_val_f1 != 1.0) {
      std::ostringstream why;
      why << head_name(head.kind) << " reached F1 " << report.best_val_f1 << " after "
          << report.stopped_epoch << " epochs, want 1.0 within 300";
      check.fail(why.str());
      return check;
    }
    if (elapsed >= 120.0) {
      check.fail(head_name(head.kind) + " took " + std::to_string(elapsed) +
                 " s, over the 120 s budget");
      return check;
    }
    detail << head_name(head.kind) << "=1.0@" << report.stopped_epoch << "ep ";
  }
  check.detail = "32-sentence corpus memorized: " + detail.str();
  return check;
}

// ---------------------------------------------------------------------------
// 7. label unification
// ---------------------------------------------------------------------------

Check criterion_unification() {
  Check check;
  // Four-column newswire format covering all five tag families.
  const std::string fixture_text =
      "-DOCSTART- -X- -X- O\n"
      "\n"
      "Canadian NNP I-NP B-MISC\n"
      "premier NN I-NP O\n"
      "visits VBZ I-VP O\n"
      "New NNP I-NP B-LOC\n"
      "York NNP I-NP I-LOC\n"
      ". . O O\n"
      "\n"
      "John NNP I-NP B-PER\n"
      "Smith NNP I-NP I-PER\n"
      "of IN I-PP O\n"
      "Acme NNP I-NP B-ORG\n"
      "Corp NNP I-NP I-ORG\n"
      "speaks VBZ I-VP O\n";
  const Corpus raw = parse_conll(fixture_text, 0, 3, "newswire_fixture");
  const Corpus unified = unify_labels(raw, builtin_scheme("conll2003"));

  // Every surviving label is one of the three unified ones.
  for (const TaggedSentence& sentence : unified.sentences) {
    for (int label : sentence.labels) {
      check.require(label == kLabelO || label == kLabelBLoc || label == kLabelILoc,
                    "label id " + std::to_string(label) + " escaped unification");
    }
  }
  check.require(unified.sentences.size() == 2, "document marker was not skipped");
  if (!check.ok) {
    return check;
  }

  const std::vector<int>& first = unified.sentences[0].labels;
  const std::vector<int>& second = unified.sentences[1].labels;
  check.require(first[0] == kLabelO, "misc entity \"Canadian\" was not mapped to O");
  check.require(first[3] == kLabelBLoc && first[4] == kLabelILoc,
                "gold location tags were not preserved");
  check.require(second[0] == kLabelO && second[1] == kLabelO,
                "person tags were not mapped to O");
  check.require(second[3] == kLabelO && second[4] == kLabelO,
                "organization tags were not mapped to O");
  check.detail = "five tag families collapse to {O, B-LOC, I-LOC} with locations intact";
  return check;
}

// ---------------------------------------------------------------------------
// 8. pipeline determinism
// ---------------------------------------------------------------------------

std::string run_extraction_once(const fs::path& checkpoint, const std::string& tag) {
  const fs::path dir = scratch_dir("topo_accept_extract_" + tag);
  ExtractCli cli;
  cli.input_path = fixture("cli_posts.ndjson");
  cli.checkpoint_dir = checkpoint.string();
  cli.mock_geocoder = fixture("cli_mock_geocodes.json");
  cli.cache_path = (dir / "cache.json").string();
  std::ostringstream out, err;
  if (cmd_extract(cli, {}, out, err) != 0) {
    throw Error("extraction run failed: " + err.str());
  }
  return out.str();
}

Check criterion_determinism() {
  Check check;
  // Train the small reference checkpoint from scratch; the whole chain from
  // random init to NDJSON bytes must be reproducible.
  const fs::path dir = scratch_dir("topo_accept_ckpt");
  const fs::path config = dir / "config.json";
  write_text_file(config,
                  R"({"learning_rate": 0.002, "batch_size": 8, "max_epochs": 200,
                      "warmup_fraction": 0.05, "patience": 200, "seed": 3, "max_len": 32,
                      "target_val_f1": 1.0})");
  TrainCli train;
  train.train_path = fixture("cli_train.txt");
  train.val_path = fixture("cli_train.txt");
  train.out_dir = dir.string();
  train.config_file = config.string();
  train.encoder = "miniature";
  train.head = "linear";
  train.mini_layers = 1;
  train.mini_hidden = 16;
  train.mini_heads = 2;
  std::ostringstream out, err;
  if (cmd_train(train, out, err) != 0) {
    check.fail("reference training failed: " + err.str());
    return check;
  }

  const std::string first = run_extraction_once(dir, "a");
  const std::string second = run_extraction_once(dir, "b");
  check.require(first == second, "two extraction runs differ byte-for-byte");
  const std::string golden = read_text_file(fixture("golden_extract.ndjson"));
  check.require(first == golden, "extraction output differs from the checked-in golden file");
  if (check.ok) {
    check.detail = "two fresh runs and the golden file are byte-identical (" +
                   std::to_string(first.size()) + " bytes)";
  }
  return check;
}

// ---------------------------------------------------------------------------
// 9. zip extractor
// ---------------------------------------------------------------------------

struct ZipCase {
  const char* text;
  std::vector<std::string> expected;
};

Check criterion_zipcodes() {
  Check check;

  // The three canonical examples.
  const std::vector<ZipCase> canonical = {
      {"TX 77843-3147 area", {"77843-3147"}},
      {"call 5551234567", {}},
      {"zip 77840.", {"77840"}},
  };
  // Boundary and ZIP+4 behavior table.
  const std::vector<ZipCase> table = {
      // plain five-digit matches
      {"77840", {"77840"}},
      {"77840 ", {"77840"}},
      {" 77840", {"77840"}},
      {"a 77840 b", {"77840"}},
      {"(77840)", {"77840"}},
      {"77840,", {"77840"}},
      {",77840", {"77840"}},
      {"77840.", {"77840"}},
      {".77840", {"77840"}},
      {"77840!", {"77840"}},
      {"zip:77840", {"77840"}},
      {"77840\n", {"77840"}},
      {"\t77840\t", {"77840"}},
      {"\"77840\"", {"77840"}},
      {"[77840]", {"77840"}},
      {"#77840", {"77840"}},
      {"$77840", {"77840"}},
      {"77840-", {"77840"}},
      {"-77840", {"77840"}},
      {"77840?", {"77840"}},
      // runs of the wrong length never match
      {"1234", {}},
      {"123456", {}},
      {"1234567890", {}},
      {"12", {}},
      {"7", {}},
      {"", {}},
      {"no digits here", {}},
      // word characters glued to either side break the boundary
      {"x77840", {}},
      {"77840x", {}},
      {"_77840", {}},
      {"77840_", {}},
      {"a77840b", {}},
      {"abc77840", {}},
      // valid ZIP+4
      {"77843-3147", {"77843-3147"}},
      {"77843-3147 ", {"77843-3147"}},
      {"(77843-3147)", {"77843-3147"}},
      {"77843-3147.", {"77843-3147"}},
      {"77843-3147-", {"77843-3147"}},
      {"77843-3147-1234", {"77843-3147"}},
      // broken extensions fall back to the bare five digits
      {"77843-314", {"77843"}},
      {"77843-31", {"77843"}},
      {"77843-3", {"77843"}},
      {"77843-314x", {"77843"}},
      {"77843-3147x", {"77843"}},
      {"77843-x147", {"77843"}},
      // a five-digit run after a failed extension matches on its own
      {"77843-31479", {"77843", "31479"}},
      {"77840-12345", {"77840", "12345"}},
      {"77843-31470x", {"77843"}},
      {"12345-12345-1234", {"12345", "12345-1234"}},
      // several codes in one string, mixed shapes
      {"77840 77843-3147 10001", {"77840", "77843-3147", "10001"}},
      {"from 10001 to 90210", {"10001", "90210"}},
      {"10001,90210", {"10001", "90210"}},
      {"zip 77840 and 77843-3147!", {"77840", "77843-3147"}},
      {"77840 123456 90210", {"77840", "90210"}},
  };

  int cases = 0;
  for (const std::vector<ZipCase>* group : {&canonical, &table}) {
    for (const ZipCase& zc : *group) {
      const std::vector<ZipMatch> matches = extract_zipcodes(zc.text);
      std::vector<std::string> got;
      for (const ZipMatch& m : matches) {
        got.push_back(m.code);
        // Offsets always point back at the code's own bytes.
        const std::string text(zc.text);
        if (text.substr(m.start_char, m.end_char - m.start_char) != m.code) {
          check.fail(std::string("\"") + zc.text + "\": offsets do not frame the match");
          return check;
        }
      }
      if (got != zc.expected) {
        std::ostringstream why;
        why << "\"" << zc.text << "\": got [";
        for (const std::string& g : got) why << g << " ";
        why << "], want [";
        for (const std::string& e : zc.expected) why << e << " ";
        why << "]";
        check.fail(why.str());
        return check;
      }
      ++cases;
    }
  }
  check.detail = std::to_string(cases) + " pattern cases including the 3 canonical examples";
  return check;
}

// ---------------------------------------------------------------------------
// 11. benchmark command exactness
// ---------------------------------------------------------------------------

Check criterion_benchmark() {
  Check check;
  BenchmarkOptions options;
  options.gold_path = fixture("bench_gold.txt");
  options.systems = {"good:" + fixture("bench_good.txt")};
  std::ostringstream out, err;
  if (cmd_benchmark(options, out, err) != 0) {
    check.fail("benchmark command failed: " + err.str());
    return check;
  }
  const std::string text = out.str();
  const auto report = nlohmann::json::parse(text.substr(text.find('{')));
  const auto& row = report["systems"][0];
  check.require(row["tp"] == 8 && row["fp"] == 2 && row["fn"] == 2,
                "confusion counts are not TP=8 FP=2 FN=2");
  check.require(row["precision"] == 0.8 && row["recall"] == 0.8 && row["f1"] == 0.8,
                "scores are not exactly 0.800");
  if (check.ok) {
    check.detail = "hand-counted TP=8 FP=2 FN=2 scores P=R=F1=0.800 exactly";
  }
  return check;
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  double time_budget_s;  // 0 = no budget
  std::function<Check()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence", 5.0, criterion_metric_oracle},
      {2, "reported-score consistency", 5.0, criterion_reported_scores},
      {3, "alignment round-trip", 5.0, criterion_alignment_round_trip},
      {4, "head gradient checks", 30.0, criterion_head_gradients},
      {5, "shape invariants", 5.0, criterion_shapes},
      {6, "overfit smoke test", 360.0, criterion_overfit},
      {7, "label unification", 5.0, criterion_unification},
      {8, "pipeline determinism", 120.0, criterion_determinism},
      {9, "zip extractor table", 5.0, criterion_zipcodes},
      {11, "benchmark command exactness", 5.0, criterion_benchmark},
  };

  int failures = 0;
  for (const Criterion& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Check check;
    try {
      check = criterion.run();
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    const double elapsed = seconds_since(start);
    if (check.ok && criterion.time_budget_s > 0.0 && elapsed > criterion.time_budget_s) {
      check.ok = false;
      check.detail = "over time budget";
    }
    std::cout << (check.ok ? "PASS" : "FAIL") << "  " << std::setw(2) << criterion.id << "  "
              << std::left << std::setw(30) << criterion.name << std::right << "  "
              << std::fixed << std::setprecision(2) << elapsed << " s  " << check.detail
              << "\n";
    if (!check.ok) {
      ++failures;
    }
  }

  // Criterion 10 records a limit rather than a test: the reference absolute
  // scores come from fine-tuning hundred-million-parameter pretrained
  // encoders on full corpora, which needs GPU-scale hardware. The optional
  // cross-check against the reported newswire score is informative only.
  std::cout << "DECLARED  10  full-scale fine-tuning scores are out of desk scope "
               "(GPU-class hardware required); not gating\n";

  if (failures == 0) {
    std::cout << "acceptance: all 10 gating criteria passed\n";
    return 0;
  }
  std::cout << "acceptance: " << failures << " criteria FAILED\n";
  return 1;
}
