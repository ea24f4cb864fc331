#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "topo/alignment.hpp"
#include "topo/encoder.hpp"
#include "topo/heads.hpp"
#include "topo/vocab.hpp"

namespace topo {

struct TokenClassifier {
  EncoderConfig encoder_config;
  HeadConfig head_config;
  std::vector<std::string> label_order;  // fixed at build time: O, B-LOC, I-LOC
  ParamMap params;
};

/// Miniature build: encoder and head both randomly initialized from the seed.
TokenClassifier build_classifier(const EncoderConfig& encoder_config,
                                 const HeadConfig& head_config, std::uint64_t seed);

/// Pretrained build: encoder arrays come from a checkpoint directory, the
/// head is freshly initialized from the seed. Missing or misshaped arrays
/// raise errors naming the array.
TokenClassifier build_classifier(const EncoderConfig& encoder_config,
                                 const HeadConfig& head_config, std::uint64_t seed,
                                 const std::filesystem::path& encoder_checkpoint);

/// Flattened batch of aligned sentences; all sequences share one max_len.
struct Batch {
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;
  std::vector<int> labels;  // per-piece gold, IGNORE outside content
  int batch = 0;
  int seq_len = 0;

  static Batch from_sequences(std::span<const PieceSequence> sequences);
};

struct ClassifierCache {
  EncoderCache encoder;
  HeadCache head;
};

/// Logits, one row per piece position: (batch*seq_len, num_labels).
Mat classifier_forward(const TokenClassifier& clf, const Batch& batch,
                       ClassifierCache* cache = nullptr);

void classifier_backward(const TokenClassifier& clf, const ClassifierCache& cache,
                         const Mat& d_logits, ParamMap& grads);

struct BatchPrediction {
  std::vector<int> labels;
  std::vector<double> confidences;  // softmax probability of the argmax
};

/// Argmax + stable softmax confidence per row; ties go to the lowest index.
BatchPrediction logits_to_prediction(const Mat& logits);

BatchPrediction predict(const TokenClassifier& clf, const Batch& batch);

/// Batched inference over aligned sentences, merged back to words via the
/// first-piece rule.
std::vector<std::vector<WordPrediction>> predict_words(const TokenClassifier& clf,
                                                       const PieceVocab& vocab,
                                                       std::span<const PieceSequence> sequences,
                                                       int batch_size = 32);

/// All named arrays the classifier owns (encoder + head), with shapes.
std::map<std::string, std::vector<std::size_t>> classifier_parameter_shapes(
    const EncoderConfig& encoder_config, const HeadConfig& head_config);

/// Checkpoint directory: manifest.json, one NPY per array, vocab copy.
void save_checkpoint(const TokenClassifier& clf, const PieceVocab& vocab,
                     const std::filesystem::path& dir, const std::string& provenance = "");

struct CheckpointBundle {
  TokenClassifier classifier;
  PieceVocab vocab;
};

CheckpointBundle load_checkpoint(const std::filesystem::path& dir);

}  // namespace topo
