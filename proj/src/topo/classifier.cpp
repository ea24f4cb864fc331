#include "topo/classifier.hpp"

#include <algorithm>
#include <cmath>

#include "topo/labels.hpp"

#include <nlohmann/json.hpp>

namespace topo {

namespace {

std::vector<std::string> fixed_label_order() {
  return {unified_labels().begin(), unified_labels().end()};
}

std::string array_file_name(const std::string& param_name) {
  std::string out = param_name;
  std::replace(out.begin(), out.end(), '.', '_');
  return out + ".npy";
}

}  // namespace

TokenClassifier build_classifier(const EncoderConfig& encoder_config,
                                 const HeadConfig& head_config, std::uint64_t seed) {
  encoder_config.validate();
  head_config.validate();
  TokenClassifier clf;
  clf.encoder_config = encoder_config;
  clf.head_config = head_config;
  clf.label_order = fixed_label_order();
  Rng rng(seed);
  clf.params = init_encoder_params(encoder_config, rng);
  ParamMap head = init_head_params(head_config, encoder_config.hidden_size, rng);
  clf.params.insert(head.begin(), head.end());
  return clf;
}

TokenClassifier build_classifier(const EncoderConfig& encoder_config,
                                 const HeadConfig& head_config, std::uint64_t seed,
                                 const std::filesystem::path& encoder_checkpoint) {
  encoder_config.validate();
  head_config.validate();
  TokenClassifier clf;
  clf.encoder_config = encoder_config;
  clf.head_config = head_config;
  clf.label_order = fixed_label_order();

  const auto manifest_path = encoder_checkpoint / "manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint manifest " + manifest_path.string() + " is not valid JSON: " +
                e.what());
  }
  if (!manifest.contains("arrays") || !manifest["arrays"].is_object()) {
    throw Error("checkpoint manifest lacks an \"arrays\" object");
  }
  for (const auto& [name, shape] : encoder_parameter_shapes(encoder_config)) {
    if (!manifest["arrays"].contains(name)) {
      throw Error("checkpoint is missing array " + name);
    }
    Array a = load_npy(encoder_checkpoint /
                       manifest["arrays"][name].value("file", array_file_name(name)));
    if (a.shape != shape) {
      throw Error("checkpoint array " + name + " has shape " + shape_to_string(a.shape) +
                  ", expected " + shape_to_string(shape));
    }
    clf.params.emplace(name, std::move(a));
  }
  Rng rng(seed);
  ParamMap head = init_head_params(head_config, encoder_config.hidden_size, rng);
  clf.params.insert(head.begin(), head.end());
  return clf;
}

Batch Batch::from_sequences(std::span<const PieceSequence> sequences) {
  if (sequences.empty()) {
    throw Error("Batch::from_sequences: empty batch");
  }
  Batch out;
  out.batch = static_cast<int>(sequences.size());
  out.seq_len = static_cast<int>(sequences.front().piece_ids.size());
  const std::size_t n = static_cast<std::size_t>(out.batch) * out.seq_len;
  out.ids.reserve(n);
  out.mask.reserve(n);
  out.labels.reserve(n);
  for (const auto& seq : sequences) {
    if (static_cast<int>(seq.piece_ids.size()) != out.seq_len) {
      throw Error("Batch::from_sequences: sequences disagree on max_len");
    }
    out.ids.insert(out.ids.end(), seq.piece_ids.begin(), seq.piece_ids.end());
    out.mask.insert(out.mask.end(), seq.mask.begin(), seq.mask.end());
    out.labels.insert(out.labels.end(), seq.piece_labels.begin(), seq.piece_labels.end());
  }
  return out;
}

Mat classifier_forward(const TokenClassifier& clf, const Batch& batch,
                       ClassifierCache* cache) {
  const Mat hidden =
      encoder_forward(clf.encoder_config, clf.params, batch.ids, batch.mask, batch.batch,
                      batch.seq_len, cache != nullptr ? &cache->encoder : nullptr);
  return head_forward(clf.head_config, clf.params, hidden,
                      cache != nullptr ? &cache->head : nullptr);
}

void classifier_backward(const TokenClassifier& clf, const ClassifierCache& cache,
                         const Mat& d_logits, ParamMap& grads) {
  const Mat d_hidden = head_backward(clf.head_config, clf.params, cache.head, d_logits, grads);
  encoder_backward(clf.encoder_config, clf.params, cache.encoder, d_hidden, grads);
}

BatchPrediction logits_to_prediction(const Mat& logits) {
  BatchPrediction out;
  const Eigen::Index n = logits.rows();
  const Eigen::Index labels = logits.cols();
  out.labels.resize(static_cast<std::size_t>(n));
  out.confidences.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < labels; ++j) {
      if (logits(i, j) > logits(i, best)) {  // strict, so ties keep the lowest index
        best = j;
      }
    }
    const double m = logits.row(i).maxCoeff();
    double denom = 0.0;
    for (Eigen::Index j = 0; j < labels; ++j) {
      denom += std::exp(logits(i, j) - m);
    }
    out.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    out.confidences[static_cast<std::size_t>(i)] = std::exp(logits(i, best) - m) / denom;
  }
  return out;
}

BatchPrediction predict(const TokenClassifier& clf, const Batch& batch) {
  return logits_to_prediction(classifier_forward(clf, batch));
}

std::vector<std::vector<WordPrediction>> predict_words(const TokenClassifier& clf,
                                                       const PieceVocab& vocab,
                                                       std::span<const PieceSequence> sequences,
                                                       int batch_size) {
  if (batch_size < 1) {
    throw Error("predict_words: batch_size must be positive");
  }
  std::vector<std::vector<WordPrediction>> out;
  out.reserve(sequences.size());
  for (std::size_t start = 0; start < sequences.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t count =
        std::min(static_cast<std::size_t>(batch_size), sequences.size() - start);
    const Batch batch = Batch::from_sequences(sequences.subspan(start, count));
    const BatchPrediction pred = predict(clf, batch);
    const std::size_t t = static_cast<std::size_t>(batch.seq_len);
    for (std::size_t s = 0; s < count; ++s) {
      const std::span<const int> labels(pred.labels.data() + s * t, t);
      const std::span<const double> confidences(pred.confidences.data() + s * t, t);
      out.push_back(merge_to_words(sequences[start + s], vocab, labels, confidences));
    }
  }
  return out;
}

std::map<std::string, std::vector<std::size_t>> classifier_parameter_shapes(
    const EncoderConfig& encoder_config, const HeadConfig& head_config) {
  auto shapes = encoder_parameter_shapes(encoder_config);
  auto head = head_parameter_shapes(head_config, encoder_config.hidden_size);
  shapes.insert(head.begin(), head.end());
  return shapes;
}

void save_checkpoint(const TokenClassifier& clf, const PieceVocab& vocab,
                     const std::filesystem::path& dir, const std::string& provenance) {
  std::filesystem::create_directories(dir / "arrays");

  nlohmann::ordered_json manifest;
  manifest["format"] = "token-classifier-checkpoint-v1";
  manifest["encoder"] = {{"variant", variant_name(clf.encoder_config.variant)},
                         {"layers", clf.encoder_config.layers},
                         {"hidden_size", clf.encoder_config.hidden_size},
                         {"attention_heads", clf.encoder_config.attention_heads},
                         {"vocab_size", clf.encoder_config.vocab_size},
                         {"max_positions", clf.encoder_config.max_positions},
                         {"type_vocab", clf.encoder_config.type_vocab}};
  manifest["head"] = {{"kind", head_name(clf.head_config.kind)},
                      {"num_labels", clf.head_config.num_labels},
                      {"mlp_hidden", clf.head_config.mlp_hidden},
                      {"cnn_kernel", clf.head_config.cnn_kernel},
                      {"cnn_channels", clf.head_config.cnn_channels},
                      {"cnn_pool", clf.head_config.cnn_pool},
                      {"cnn_mlp_hidden", clf.head_config.cnn_mlp_hidden}};
  manifest["label_order"] = clf.label_order;
  manifest["provenance"] = provenance;
  manifest["vocab_file"] = "vocab.txt";
  manifest["arrays"] = nlohmann::ordered_json::object();

  const auto expected = classifier_parameter_shapes(clf.encoder_config, clf.head_config);
  for (const auto& [name, shape] : expected) {
    const auto it = clf.params.find(name);
    if (it == clf.params.end()) {
      throw Error("save_checkpoint: classifier lacks array " + name);
    }
    if (it->second.shape != shape) {
      throw Error("save_checkpoint: array " + name + " has shape " +
                  shape_to_string(it->second.shape) + ", expected " + shape_to_string(shape));
    }
    const std::string file = "arrays/" + array_file_name(name);
    save_npy(dir / file, it->second);
    manifest["arrays"][name] = {{"file", file}, {"shape", shape}};
  }
  vocab.save(dir / "vocab.txt");
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

CheckpointBundle load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint manifest " + manifest_path.string() + " is not valid JSON: " +
                e.what());
  }

  EncoderConfig enc;
  const auto& ej = manifest.at("encoder");
  enc.variant = parse_variant(ej.at("variant").get<std::string>());
  enc.layers = ej.at("layers").get<int>();
  enc.hidden_size = ej.at("hidden_size").get<int>();
  enc.attention_heads = ej.at("attention_heads").get<int>();
  enc.vocab_size = ej.at("vocab_size").get<int>();
  enc.max_positions = ej.at("max_positions").get<int>();
  enc.type_vocab = ej.at("type_vocab").get<int>();
  enc.validate();

  HeadConfig head;
  const auto& hj = manifest.at("head");
  head.kind = parse_head(hj.at("kind").get<std::string>());
  head.num_labels = hj.at("num_labels").get<int>();
  head.mlp_hidden = hj.at("mlp_hidden").get<int>();
  head.cnn_kernel = hj.at("cnn_kernel").get<int>();
  head.cnn_channels = hj.at("cnn_channels").get<int>();
  head.cnn_pool = hj.at("cnn_pool").get<int>();
  head.cnn_mlp_hidden = hj.at("cnn_mlp_hidden").get<int>();
  head.validate();

  CheckpointBundle bundle;
  bundle.classifier.encoder_config = enc;
  bundle.classifier.head_config = head;
  bundle.classifier.label_order = manifest.at("label_order").get<std::vector<std::string>>();
  if (bundle.classifier.label_order != fixed_label_order()) {
    throw Error("checkpoint label order does not match O, B-LOC, I-LOC");
  }

  for (const auto& [name, shape] : classifier_parameter_shapes(enc, head)) {
    if (!manifest.at("arrays").contains(name)) {
      throw Error("checkpoint is missing array " + name);
    }
    const std::string file = manifest["arrays"][name].value("file", array_file_name(name));
    Array a = load_npy(dir / file);
    if (a.shape != shape) {
      throw Error("checkpoint array " + name + " has shape " + shape_to_string(a.shape) +
                  ", expected " + shape_to_string(shape));
    }
    bundle.classifier.params.emplace(name, std::move(a));
  }
  bundle.vocab = PieceVocab::load(dir / manifest.value("vocab_file", "vocab.txt"));
  if (bundle.vocab.size() != enc.vocab_size) {
    throw Error("checkpoint vocabulary size " + std::to_string(bundle.vocab.size()) +
                " does not match encoder vocab_size " + std::to_string(enc.vocab_size));
  }
  return bundle;
}

}  // namespace topo
