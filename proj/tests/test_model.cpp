#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "topo/array.hpp"
#include "topo/classifier.hpp"
#include "topo/common.hpp"
#include "topo/encoder.hpp"
#include "topo/heads.hpp"
#include "topo/labels.hpp"

using namespace topo;

// ---------------------------------------------------------------------------
// Gradient oracle: central finite differences of a scalar loss with respect
// to every parameter component, written independently of the analytic
// backward passes it is used to check.
// ---------------------------------------------------------------------------

namespace {

// Fixed random projection makes loss(theta) = sum(R .* f(theta)) a scalar
// whose gradient with respect to the logits is exactly R.
Mat random_projection(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat r(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      r(i, j) = rng.normal(0.0, 1.0);
    }
  }
  return r;
}

template <typename LossFn>
ParamMap finite_difference_grads(ParamMap& params, LossFn loss, double step) {
  ParamMap fd;
  for (auto& [name, array] : params) {
    Array g(array.shape);
    for (std::size_t i = 0; i < array.data.size(); ++i) {
      const double saved = array.data[i];
      array.data[i] = saved + step;
      const double up = loss();
      array.data[i] = saved - step;
      const double down = loss();
      array.data[i] = saved;
      g.data[i] = (up - down) / (2.0 * step);
    }
    fd.emplace(name, std::move(g));
  }
  return fd;
}

double relative_error(const Array& a, const Array& b) {
  REQUIRE(a.shape == b.shape);
  double diff2 = 0.0;
  double a2 = 0.0;
  double b2 = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    diff2 += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    a2 += a.data[i] * a.data[i];
    b2 += b.data[i] * b.data[i];
  }
  const double scale = std::max({std::sqrt(a2), std::sqrt(b2), 1e-12});
  return std::sqrt(diff2) / scale;
}

Mat random_input(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Mat x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      x(i, j) = rng.normal(0.0, 1.0);
    }
  }
  return x;
}

void check_head_gradients(const HeadConfig& cfg, int hidden) {
  Rng rng(4242);
  ParamMap params = init_head_params(cfg, hidden, rng);
  const Mat x = random_input(5, hidden, rng);
  const Mat r = random_projection(5, cfg.num_labels, rng);

  HeadCache cache;
  const Mat logits = head_forward(cfg, params, x, &cache);
  ParamMap analytic;
  head_backward(cfg, params, cache, r, analytic);

  const auto loss = [&] { return (head_forward(cfg, params, x).array() * r.array()).sum(); };
  const ParamMap fd = finite_difference_grads(params, loss, 1e-6);
  for (const auto& [name, grad] : fd) {
    INFO("array ", name);
    REQUIRE(analytic.count(name) == 1);
    CHECK(relative_error(analytic.at(name), grad) < 1e-4);
  }
  CHECK(logits.rows() == 5);
  CHECK(logits.cols() == cfg.num_labels);
}

PieceVocab tiny_vocab() {
  return PieceVocab::from_lines({kPadToken, kUnkToken, kClsToken, kSepToken,
                                 "red", "blue", "york", "in", "##s", "a"});
}

Batch tiny_batch(const PieceVocab& v, int max_len) {
  TaggedSentence s1;
  s1.words = {"york", "in"};
  s1.labels = {kLabelBLoc, kLabelO};
  TaggedSentence s2;
  s2.words = {"red"};
  s2.labels = {kLabelO};
  const std::vector<PieceSequence> seqs = {align(s1, v, max_len), align(s2, v, max_len)};
  return Batch::from_sequences(seqs);
}

}  // namespace

TEST_CASE("npy files round-trip arrays bit for bit") {
  Array a({2, 3});
  Rng rng(5);
  for (double& x : a.data) {
    x = rng.normal(0.0, 1.0);
  }
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "topo_test_roundtrip.npy";
  save_npy(path, a);
  const Array b = load_npy(path);
  CHECK(b.shape == a.shape);
  CHECK(b.data == a.data);

  Array scalar(std::vector<std::size_t>{});
  scalar.data = {42.0};
  save_npy(path, scalar);
  const Array s = load_npy(path);
  CHECK(s.shape.empty());
  CHECK(s.data == std::vector<double>{42.0});

  Array one_d({4});
  one_d.data = {1, 2, 3, 4};
  save_npy(path, one_d);
  CHECK(load_npy(path).shape == std::vector<std::size_t>{4});
  std::filesystem::remove(path);
}

TEST_CASE("npy loader rejects foreign or corrupt files") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto path = dir / "topo_test_badnpy.npy";
  write_text_file(path, "definitely not numpy");
  CHECK_THROWS_AS(load_npy(path), Error);
  CHECK_THROWS_AS(load_npy(dir / "topo_test_missing.npy"), Error);
  std::filesystem::remove(path);
}

TEST_CASE("encoder parameter counts match the published model sizes within 5 percent") {
  const long long base = encoder_parameter_count(EncoderConfig::pretrained_base_cased());
  const long long large = encoder_parameter_count(EncoderConfig::pretrained_large_cased());
  CHECK(std::abs(double(base) - 110e6) / 110e6 < 0.05);
  CHECK(std::abs(double(large) - 340e6) / 340e6 < 0.05);
  // Pinned so accidental architecture changes are caught exactly.
  CHECK(base == 107719680);
  CHECK(large == 332529664);
}

TEST_CASE("encoder config validation") {
  CHECK_THROWS_AS(EncoderConfig::miniature_config(100, 2, 63, 4), Error);  // 63 % 4 != 0
  CHECK_THROWS_AS(EncoderConfig::miniature_config(0), Error);
  EncoderConfig bad = EncoderConfig::pretrained_base_cased();
  bad.layers = 11;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(parse_variant("miniature") == EncoderVariant::miniature);
  CHECK(parse_variant("base") == EncoderVariant::pretrained_base_cased);
  CHECK_THROWS_AS(parse_variant("huge"), Error);
}

TEST_CASE("encoder forward has the contracted shape and is deterministic") {
  const PieceVocab v = tiny_vocab();
  const EncoderConfig cfg = EncoderConfig::miniature_config(v.size(), 2, 64, 4, 32);
  Rng rng(7);
  const ParamMap params = init_encoder_params(cfg, rng);
  const Batch batch = tiny_batch(v, 16);
  const Mat out = encoder_forward(cfg, params, batch.ids, batch.mask, batch.batch, batch.seq_len);
  CHECK(out.rows() == 2 * 16);
  CHECK(out.cols() == 64);
  const Mat again =
      encoder_forward(cfg, params, batch.ids, batch.mask, batch.batch, batch.seq_len);
  CHECK(out == again);
}

TEST_CASE("padding beyond the mask never changes real positions") {
  const PieceVocab v = tiny_vocab();
  const EncoderConfig cfg = EncoderConfig::miniature_config(v.size(), 2, 32, 4, 64);
  Rng rng(11);
  const ParamMap params = init_encoder_params(cfg, rng);

  TaggedSentence s;
  s.words = {"york", "in", "red"};
  s.labels = {1, 0, 0};
  const PieceSequence short_seq = align(s, v, 8);
  const PieceSequence long_seq = align(s, v, 20);
  const std::vector<PieceSequence> a = {short_seq};
  const std::vector<PieceSequence> b = {long_seq};
  const Batch ba = Batch::from_sequences(a);
  const Batch bb = Batch::from_sequences(b);
  const Mat out_short = encoder_forward(cfg, params, ba.ids, ba.mask, 1, 8);
  const Mat out_long = encoder_forward(cfg, params, bb.ids, bb.mask, 1, 20);
  for (int t = 0; t < 5; ++t) {  // CLS + 3 words + SEP
    CHECK((out_short.row(t) - out_long.row(t)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("encoder rejects contract violations") {
  const PieceVocab v = tiny_vocab();
  const EncoderConfig cfg = EncoderConfig::miniature_config(v.size(), 1, 16, 2, 8);
  Rng rng(3);
  const ParamMap params = init_encoder_params(cfg, rng);

  const std::vector<int> ids(16, 0);
  const std::vector<std::uint8_t> mask(16, 1);
  CHECK_THROWS_AS(encoder_forward(cfg, params, ids, mask, 1, 16), Error);  // > max_positions

  std::vector<int> bad_ids(8, 0);
  bad_ids[3] = v.size();  // out of vocabulary
  const std::vector<std::uint8_t> mask8(8, 1);
  CHECK_THROWS_AS(encoder_forward(cfg, params, bad_ids, mask8, 1, 8), Error);

  CHECK_THROWS_AS(encoder_forward(cfg, params, bad_ids, mask8, 1, 4), Error);  // size mismatch
}

TEST_CASE("cnn flatten sizes follow channels * floor(H/pool)") {
  const HeadConfig cnn = HeadConfig::cnn1d();
  CHECK(cnn_flatten_size(cnn, 16) == 16 * 8);
  CHECK(cnn_flatten_size(cnn, 64) == 16 * 32);
  CHECK(cnn_flatten_size(cnn, 768) == 16 * 384);
  CHECK(cnn_flatten_size(cnn, 1024) == 16 * 512);
  CHECK(cnn_flatten_size(cnn, 17) == 16 * 8);  // odd length drops the leftover
}

TEST_CASE("head logits have shape (positions, labels) for every head and width") {
  Rng rng(23);
  for (const int h : {16, 64, 768, 1024}) {
    for (const HeadConfig& cfg :
         {HeadConfig::linear(), HeadConfig::mlp(), HeadConfig::cnn1d()}) {
      const ParamMap params = init_head_params(cfg, h, rng);
      const Mat x = random_input(4, h, rng);
      const Mat logits = head_forward(cfg, params, x);
      CHECK(logits.rows() == 4);
      CHECK(logits.cols() == kNumLabels);
    }
  }
}

TEST_CASE("a zero linear head emits its bias everywhere") {
  HeadConfig cfg = HeadConfig::linear();
  ParamMap params;
  params.emplace("head.linear.w", Array({8, 3}));
  Array b({3});
  b.data = {0.5, -1.0, 2.0};
  params.emplace("head.linear.b", std::move(b));
  Rng rng(1);
  const Mat x = random_input(6, 8, rng);
  const Mat logits = head_forward(cfg, params, x);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    CHECK(logits(i, 0) == 0.5);
    CHECK(logits(i, 1) == -1.0);
    CHECK(logits(i, 2) == 2.0);
  }
}

TEST_CASE("head input width must match the trained width") {
  Rng rng(9);
  const ParamMap params = init_head_params(HeadConfig::mlp(), 16, rng);
  const Mat x = random_input(2, 24, rng);
  CHECK_THROWS_AS(head_forward(HeadConfig::mlp(), params, x), Error);

  const ParamMap cnn_params = init_head_params(HeadConfig::cnn1d(), 16, rng);
  const Mat wide = random_input(2, 32, rng);
  CHECK_THROWS_AS(head_forward(HeadConfig::cnn1d(), cnn_params, wide), Error);
}

TEST_CASE("head initialization is seeded and leaves no zero weight matrix") {
  Rng a(77);
  Rng b(77);
  const ParamMap pa = init_head_params(HeadConfig::cnn1d(), 64, a);
  const ParamMap pb = init_head_params(HeadConfig::cnn1d(), 64, b);
  REQUIRE(pa.size() == pb.size());
  for (const auto& [name, array] : pa) {
    CHECK(array.data == pb.at(name).data);
    if (array.shape.size() == 2) {
      double norm = 0.0;
      for (const double x : array.data) {
        norm += x * x;
      }
      INFO("array ", name);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("analytic head gradients match central finite differences at H=16") {
  check_head_gradients(HeadConfig::linear(), 16);
  check_head_gradients(HeadConfig::mlp(), 16);
  check_head_gradients(HeadConfig::cnn1d(), 16);
}

TEST_CASE("full-model analytic gradients match finite differences on a tiny config") {
  const PieceVocab v = tiny_vocab();
  const EncoderConfig enc = EncoderConfig::miniature_config(v.size(), 1, 8, 2, 8);
  TokenClassifier clf = build_classifier(enc, HeadConfig::linear(), 321);
  const Batch batch = tiny_batch(v, 6);
  Rng rng(55);
  const Mat r = random_projection(static_cast<Eigen::Index>(batch.ids.size()), kNumLabels, rng);

  ClassifierCache cache;
  classifier_forward(clf, batch, &cache);
  ParamMap analytic;
  classifier_backward(clf, cache, r, analytic);

  const auto loss = [&] {
    return (classifier_forward(clf, batch).array() * r.array()).sum();
  };
  const ParamMap fd = finite_difference_grads(clf.params, loss, 1e-5);
  for (const auto& [name, grad] : fd) {
    INFO("array ", name);
    REQUIRE(analytic.count(name) == 1);
    CHECK(relative_error(analytic.at(name), grad) < 1e-4);
  }
}

TEST_CASE("uniform logits predict the first label at confidence one third") {
  Mat logits(1, 3);
  logits << 0.0, 0.0, 0.0;
  const BatchPrediction p = logits_to_prediction(logits);
  CHECK(p.labels[0] == 0);
  CHECK(p.confidences[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
}

TEST_CASE("a dominant logit wins with its closed-form softmax confidence") {
  Mat logits(1, 3);
  logits << 10.0, 0.0, 0.0;
  const BatchPrediction p = logits_to_prediction(logits);
  CHECK(p.labels[0] == 0);
  const double expected = std::exp(10.0) / (std::exp(10.0) + 2.0);  // 0.99990...
  CHECK(p.confidences[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("softmax confidence is shift invariant and normalized") {
  Mat logits(2, 3);
  logits << 1.5, -0.5, 0.25, 1000.0, 999.0, 998.0;  // large values need max subtraction
  const BatchPrediction p = logits_to_prediction(logits);
  Mat shifted = logits;
  shifted.array() += 7.25;
  const BatchPrediction q = logits_to_prediction(shifted);
  for (std::size_t i = 0; i < p.labels.size(); ++i) {
    CHECK(p.labels[i] == q.labels[i]);
    CHECK(p.confidences[i] == doctest::Approx(q.confidences[i]).epsilon(1e-9));
  }
  CHECK(std::isfinite(p.confidences[1]));

  // Explicit normalization check through near-uniform rows.
  Mat u(1, 3);
  u << 0.1, 0.1, 0.1;
  CHECK(logits_to_prediction(u).confidences[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("argmax ties break toward the lowest label index") {
  Mat logits(1, 3);
  logits << 2.0, 2.0, 2.0;
  CHECK(logits_to_prediction(logits).labels[0] == 0);
  Mat logits2(1, 3);
  logits2 << 1.0, 3.0, 3.0;
  CHECK(logits_to_prediction(logits2).labels[0] == 1);
}

TEST_CASE("classifier build is reproducible and classifier predict is pure") {
  const PieceVocab v = tiny_vocab();
  const EncoderConfig enc = EncoderConfig::miniature_config(v.size(), 2, 16, 2, 16);
  const TokenClassifier a = build_classifier(enc, HeadConfig::mlp(), 99);
  const TokenClassifier b = build_classifier(enc, HeadConfig::mlp(), 99);
  REQUIRE(a.params.size() == b.params.size());
  for (const auto& [name, array] : a.params) {
    CHECK(array.data == b.params.at(name).data);
  }
  const Batch batch = tiny_batch(v, 16);
  const BatchPrediction p1 = predict(a, batch);
  const BatchPrediction p2 = predict(a, batch);
  CHECK(p1.labels == p2.labels);
  CHECK(p1.confidences == p2.confidences);
}

TEST_CASE("checkpoints round-trip every array bit for bit") {
  const PieceVocab v = tiny_vocab();
  const EncoderConfig enc = EncoderConfig::miniature_config(v.size(), 1, 16, 2, 16);
  const TokenClassifier clf = build_classifier(enc, HeadConfig::cnn1d(), 1234);
  const auto dir = std::filesystem::temp_directory_path() / "topo_test_ckpt";
  std::filesystem::remove_all(dir);
  save_checkpoint(clf, v, dir, "unit test");

  const CheckpointBundle bundle = load_checkpoint(dir);
  CHECK(bundle.classifier.encoder_config.hidden_size == 16);
  CHECK(bundle.classifier.head_config.kind == HeadKind::cnn1d);
  CHECK(bundle.classifier.label_order == std::vector<std::string>{"O", "B-LOC", "I-LOC"});
  REQUIRE(bundle.classifier.params.size() == clf.params.size());
  for (const auto& [name, array] : clf.params) {
    CHECK(bundle.classifier.params.at(name).data == array.data);
  }
  CHECK(bundle.vocab.pieces() == v.pieces());
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint loading names the offending array") {
  const PieceVocab v = tiny_vocab();
  const EncoderConfig enc = EncoderConfig::miniature_config(v.size(), 1, 16, 2, 16);
  const TokenClassifier clf = build_classifier(enc, HeadConfig::linear(), 5);
  const auto dir = std::filesystem::temp_directory_path() / "topo_test_ckpt_bad";
  std::filesystem::remove_all(dir);
  save_checkpoint(clf, v, dir);

  // Wrong shape for one named array.
  save_npy(dir / "arrays" / "head_linear_w.npy", Array({4, 3}));
  CHECK_THROWS_WITH_AS(load_checkpoint(dir),
                       "checkpoint array head.linear.w has shape (4, 3), expected (16, 3)",
                       Error);

  // Missing array file.
  std::filesystem::remove(dir / "arrays" / "encoder_layer0_attn_wq.npy");
  CHECK_THROWS_AS(load_checkpoint(dir), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pretrained-style builds read encoder arrays and reseed the head") {
  const PieceVocab v = tiny_vocab();
  const EncoderConfig enc = EncoderConfig::miniature_config(v.size(), 1, 16, 2, 16);
  const TokenClassifier donor = build_classifier(enc, HeadConfig::linear(), 42);
  const auto dir = std::filesystem::temp_directory_path() / "topo_test_ckpt_enc";
  std::filesystem::remove_all(dir);
  save_checkpoint(donor, v, dir);

  const TokenClassifier loaded = build_classifier(enc, HeadConfig::mlp(), 7, dir);
  for (const auto& [name, shape] : encoder_parameter_shapes(enc)) {
    (void)shape;
    CHECK(loaded.params.at(name).data == donor.params.at(name).data);
  }
  CHECK(loaded.params.count("head.mlp.w1") == 1);

  CHECK_THROWS_AS(
      build_classifier(EncoderConfig::miniature_config(v.size(), 2, 16, 2, 16),
                       HeadConfig::linear(), 7, dir),
      Error);  // checkpoint lacks layer1 arrays
  std::filesystem::remove_all(dir);
}

TEST_CASE("batches reject mismatched sequence lengths") {
  const PieceVocab v = tiny_vocab();
  TaggedSentence s;
  s.words = {"red"};
  s.labels = {0};
  const std::vector<PieceSequence> seqs = {align(s, v, 8), align(s, v, 12)};
  CHECK_THROWS_AS(Batch::from_sequences(seqs), Error);
  CHECK_THROWS_AS(Batch::from_sequences(std::span<const PieceSequence>{}), Error);
}
