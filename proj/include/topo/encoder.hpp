#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "topo/common.hpp"
#include "topo/linalg.hpp"

namespace topo {

enum class EncoderVariant { pretrained_base_cased, pretrained_large_cased, miniature };

std::string variant_name(EncoderVariant variant);
EncoderVariant parse_variant(const std::string& name);

struct EncoderConfig {
  EncoderVariant variant = EncoderVariant::miniature;
  int layers = 2;
  int hidden_size = 64;
  int attention_heads = 4;
  int vocab_size = 0;
  int max_positions = 128;
  int type_vocab = 2;

  int ffn_size() const { return 4 * hidden_size; }
  int head_size() const { return hidden_size / attention_heads; }
  void validate() const;

  static EncoderConfig pretrained_base_cased();
  static EncoderConfig pretrained_large_cased();
  /// Small encoder with the same architecture for desk-scale training.
  static EncoderConfig miniature_config(int vocab_size, int layers = 2, int hidden_size = 64,
                                        int attention_heads = 4, int max_positions = 128);
};

/// Every named parameter array the encoder owns, with its shape. The names
/// double as checkpoint keys.
std::map<std::string, std::vector<std::size_t>> encoder_parameter_shapes(
    const EncoderConfig& cfg);

long long encoder_parameter_count(const EncoderConfig& cfg);

/// Weights ~ N(0, 0.02), biases and layer-norm shifts 0, layer-norm gains 1.
ParamMap init_encoder_params(const EncoderConfig& cfg, Rng& rng);

struct LayerNormCache {
  Mat xhat;                  // normalized activations
  Eigen::VectorXd inv_std;   // per row
};

struct EncoderLayerCache {
  Mat x_in;                 // (B*T, H) layer input
  Mat q, k, v;              // (B*T, H)
  std::vector<Mat> probs;   // attention rows, one (T, T) per batch*head
  Mat context;              // concatenated head outputs (B*T, H)
  LayerNormCache attn_ln;
  Mat x_mid;                // after the attention layer norm
  Mat ffn_pre;              // (B*T, ffn) pre-activation
  Mat ffn_act;              // gelu(ffn_pre)
  LayerNormCache ffn_ln;
};

struct EncoderCache {
  int batch = 0;
  int seq_len = 0;
  std::vector<int> ids;
  std::vector<std::uint8_t> mask;
  LayerNormCache emb_ln;
  std::vector<EncoderLayerCache> layers;
};

/// Runs the encoder over a flattened batch: ids and mask are batch-major,
/// length batch*seq_len. Returns per-position hidden vectors (batch*seq_len,
/// H). Pass a cache to enable a later backward pass.
Mat encoder_forward(const EncoderConfig& cfg, const ParamMap& params,
                    const std::vector<int>& ids, const std::vector<std::uint8_t>& mask,
                    int batch, int seq_len, EncoderCache* cache = nullptr);

/// Accumulates parameter gradients for d(loss)/d(output) into grads.
void encoder_backward(const EncoderConfig& cfg, const ParamMap& params,
                      const EncoderCache& cache, const Mat& d_output, ParamMap& grads);

}  // namespace topo
