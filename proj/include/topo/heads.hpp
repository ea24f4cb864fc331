#pragma once

#include <map>
#include <string>
#include <vector>

#include "topo/common.hpp"
#include "topo/linalg.hpp"

namespace topo {

enum class HeadKind { linear, mlp, cnn1d };

std::string head_name(HeadKind kind);
HeadKind parse_head(const std::string& name);

struct HeadConfig {
  HeadKind kind = HeadKind::linear;
  int num_labels = 3;
  int mlp_hidden = 256;
  int cnn_kernel = 3;    // stride 1, zero padding (kernel-1)/2, so length is preserved
  int cnn_channels = 16;
  int cnn_pool = 2;
  int cnn_mlp_hidden = 128;

  void validate() const;

  static HeadConfig linear();
  static HeadConfig mlp();
  static HeadConfig cnn1d();
};

/// Pooled-and-concatenated vector size: channels * floor(H / pool).
int cnn_flatten_size(const HeadConfig& cfg, int hidden_size);

std::map<std::string, std::vector<std::size_t>> head_parameter_shapes(const HeadConfig& cfg,
                                                                      int hidden_size);

ParamMap init_head_params(const HeadConfig& cfg, int hidden_size, Rng& rng);

struct HeadCache {
  Mat x;                         // head input (N, H)
  Mat mlp_pre;                   // MLP hidden pre-activation
  Mat conv_act;                  // relu(conv), columns channel-major (N, C*H)
  std::vector<int> pool_argmax;  // winning conv column per pooled cell (N * C*P)
  Mat pooled;                    // channel-major flatten (N, C*P)
  Mat fc1_pre;                   // CNN trunk hidden pre-activation
};

/// Per-position logits: x holds one H-vector per row, the result one
/// num_labels row per input row.
Mat head_forward(const HeadConfig& cfg, const ParamMap& params, const Mat& x,
                 HeadCache* cache = nullptr);

/// Returns d(loss)/d(x) and accumulates parameter gradients into grads.
Mat head_backward(const HeadConfig& cfg, const ParamMap& params, const HeadCache& cache,
                  const Mat& d_logits, ParamMap& grads);

}  // namespace topo
