#include "topo/heads.hpp"

namespace topo {

namespace {

Mat affine(const Mat& x, ConstMatView w, ConstVecView b) {
  if (x.cols() != w.rows()) {
    throw Error("head affine: input width " + std::to_string(x.cols()) +
                " does not match weight rows " + std::to_string(w.rows()));
  }
  Mat out = x * w;
  out.rowwise() += b.transpose();
  return out;
}

Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

Mat relu_grad_mask(const Mat& pre) {
  return pre.unaryExpr([](double t) { return t > 0.0 ? 1.0 : 0.0; });
}

}  // namespace

std::string head_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::linear:
      return "linear";
    case HeadKind::mlp:
      return "mlp";
    case HeadKind::cnn1d:
      return "cnn1d";
  }
  throw Error("head_name: bad enum value");
}

HeadKind parse_head(const std::string& name) {
  if (name == "linear") {
    return HeadKind::linear;
  }
  if (name == "mlp") {
    return HeadKind::mlp;
  }
  if (name == "cnn1d") {
    return HeadKind::cnn1d;
  }
  throw Error("unknown head kind: " + name);
}

void HeadConfig::validate() const {
  if (num_labels < 1 || mlp_hidden < 1 || cnn_kernel < 1 || cnn_channels < 1 ||
      cnn_pool < 1 || cnn_mlp_hidden < 1) {
    throw Error("head config: all sizes must be positive");
  }
  if (cnn_kernel % 2 == 0) {
    throw Error("head config: cnn_kernel must be odd so padding preserves length");
  }
}

HeadConfig HeadConfig::linear() { return HeadConfig{}; }

HeadConfig HeadConfig::mlp() {
  HeadConfig cfg;
  cfg.kind = HeadKind::mlp;
  return cfg;
}

HeadConfig HeadConfig::cnn1d() {
  HeadConfig cfg;
  cfg.kind = HeadKind::cnn1d;
  return cfg;
}

int cnn_flatten_size(const HeadConfig& cfg, int hidden_size) {
  return cfg.cnn_channels * (hidden_size / cfg.cnn_pool);
}

std::map<std::string, std::vector<std::size_t>> head_parameter_shapes(const HeadConfig& cfg,
                                                                      int hidden_size) {
  cfg.validate();
  if (hidden_size < 1) {
    throw Error("head_parameter_shapes: hidden_size must be positive");
  }
  const auto h = static_cast<std::size_t>(hidden_size);
  const auto labels = static_cast<std::size_t>(cfg.num_labels);
  std::map<std::string, std::vector<std::size_t>> shapes;
  switch (cfg.kind) {
    case HeadKind::linear:
      shapes["head.linear.w"] = {h, labels};
      shapes["head.linear.b"] = {labels};
      break;
    case HeadKind::mlp:
      shapes["head.mlp.w1"] = {h, static_cast<std::size_t>(cfg.mlp_hidden)};
      shapes["head.mlp.b1"] = {static_cast<std::size_t>(cfg.mlp_hidden)};
      shapes["head.mlp.w2"] = {static_cast<std::size_t>(cfg.mlp_hidden), labels};
      shapes["head.mlp.b2"] = {labels};
      break;
    case HeadKind::cnn1d: {
      const auto flat = static_cast<std::size_t>(cnn_flatten_size(cfg, hidden_size));
      shapes["head.cnn.conv.w"] = {static_cast<std::size_t>(cfg.cnn_channels),
                                   static_cast<std::size_t>(cfg.cnn_kernel)};
      shapes["head.cnn.conv.b"] = {static_cast<std::size_t>(cfg.cnn_channels)};
      shapes["head.cnn.fc1.w"] = {flat, static_cast<std::size_t>(cfg.cnn_mlp_hidden)};
      shapes["head.cnn.fc1.b"] = {static_cast<std::size_t>(cfg.cnn_mlp_hidden)};
      shapes["head.cnn.fc2.w"] = {static_cast<std::size_t>(cfg.cnn_mlp_hidden), labels};
      shapes["head.cnn.fc2.b"] = {labels};
      break;
    }
  }
  return shapes;
}

ParamMap init_head_params(const HeadConfig& cfg, int hidden_size, Rng& rng) {
  ParamMap params;
  for (const auto& [name, shape] : head_parameter_shapes(cfg, hidden_size)) {
    Array a(shape);
    if (shape.size() == 2) {
      for (double& x : a.data) {
        x = rng.normal(0.0, 0.02);
      }
    }
    params.emplace(name, std::move(a));
  }
  return params;
}

namespace {

Mat linear_forward(const ParamMap& params, const Mat& x, HeadCache* cache) {
  if (cache != nullptr) {
    cache->x = x;
  }
  return affine(x, mat_view(param(params, "head.linear.w")),
                vec_view(param(params, "head.linear.b")));
}

Mat mlp_forward(const ParamMap& params, const Mat& x, HeadCache* cache) {
  Mat pre = affine(x, mat_view(param(params, "head.mlp.w1")),
                   vec_view(param(params, "head.mlp.b1")));
  Mat out = affine(relu(pre), mat_view(param(params, "head.mlp.w2")),
                   vec_view(param(params, "head.mlp.b2")));
  if (cache != nullptr) {
    cache->x = x;
    cache->mlp_pre = std::move(pre);
  }
  return out;
}

Mat cnn_forward(const HeadConfig& cfg, const ParamMap& params, const Mat& x, HeadCache* cache) {
  const int n = static_cast<int>(x.rows());
  const int h = static_cast<int>(x.cols());
  const int channels = cfg.cnn_channels;
  const int kernel = cfg.cnn_kernel;
  const int radius = (kernel - 1) / 2;
  const int pool = cfg.cnn_pool;
  const int pooled_len = h / pool;
  const int flat = channels * pooled_len;

  const auto conv_w = mat_view(param(params, "head.cnn.conv.w"));
  const auto conv_b = vec_view(param(params, "head.cnn.conv.b"));
  const auto fc1_w = mat_view(param(params, "head.cnn.fc1.w"));
  if (fc1_w.rows() != flat) {
    throw Error("cnn head: flatten size " + std::to_string(flat) +
                " does not match fc1 weight rows " + std::to_string(fc1_w.rows()));
  }

  // The H-vector at each position is treated as a 1-channel signal of
  // length H; zero padding keeps the convolved length at H.
  Mat conv_act(n, channels * h);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) {
      for (int t = 0; t < h; ++t) {
        double acc = conv_b(c);
        for (int k = 0; k < kernel; ++k) {
          const int s = t + k - radius;
          if (s >= 0 && s < h) {
            acc += conv_w(c, k) * x(i, s);
          }
        }
        conv_act(i, c * h + t) = acc > 0.0 ? acc : 0.0;
      }
    }
  }

  Mat pooled(n, flat);
  std::vector<int> argmax(static_cast<std::size_t>(n) * flat);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) {
      for (int j = 0; j < pooled_len; ++j) {
        int best = c * h + j * pool;
        double best_val = conv_act(i, best);
        for (int d = 1; d < pool; ++d) {
          const int col = c * h + j * pool + d;
          if (conv_act(i, col) > best_val) {  // ties keep the first index
            best_val = conv_act(i, col);
            best = col;
          }
        }
        pooled(i, c * pooled_len + j) = best_val;
        argmax[static_cast<std::size_t>(i) * flat + c * pooled_len + j] = best;
      }
    }
  }

  Mat fc1_pre = affine(pooled, fc1_w, vec_view(param(params, "head.cnn.fc1.b")));
  Mat out = affine(relu(fc1_pre), mat_view(param(params, "head.cnn.fc2.w")),
                   vec_view(param(params, "head.cnn.fc2.b")));
  if (cache != nullptr) {
    cache->x = x;
    cache->conv_act = std::move(conv_act);
    cache->pool_argmax = std::move(argmax);
    cache->pooled = std::move(pooled);
    cache->fc1_pre = std::move(fc1_pre);
  }
  return out;
}

}  // namespace

Mat head_forward(const HeadConfig& cfg, const ParamMap& params, const Mat& x, HeadCache* cache) {
  cfg.validate();
  switch (cfg.kind) {
    case HeadKind::linear:
      return linear_forward(params, x, cache);
    case HeadKind::mlp:
      return mlp_forward(params, x, cache);
    case HeadKind::cnn1d:
      return cnn_forward(cfg, params, x, cache);
  }
  throw Error("head_forward: bad head kind");
}

namespace {

Mat linear_backward(const ParamMap& params, const HeadCache& cache, const Mat& d_logits,
                    ParamMap& grads) {
  const auto w = mat_view(param(params, "head.linear.w"));
  mat_view(grad_slot(grads, "head.linear.w",
                     {static_cast<std::size_t>(w.rows()), static_cast<std::size_t>(w.cols())})) +=
      cache.x.transpose() * d_logits;
  vec_view(grad_slot(grads, "head.linear.b", {static_cast<std::size_t>(w.cols())})) +=
      d_logits.colwise().sum().transpose();
  return d_logits * w.transpose();
}

Mat mlp_backward(const ParamMap& params, const HeadCache& cache, const Mat& d_logits,
                 ParamMap& grads) {
  const auto w1 = mat_view(param(params, "head.mlp.w1"));
  const auto w2 = mat_view(param(params, "head.mlp.w2"));
  const Mat hidden_act = relu(cache.mlp_pre);
  mat_view(grad_slot(grads, "head.mlp.w2",
                     {static_cast<std::size_t>(w2.rows()), static_cast<std::size_t>(w2.cols())})) +=
      hidden_act.transpose() * d_logits;
  vec_view(grad_slot(grads, "head.mlp.b2", {static_cast<std::size_t>(w2.cols())})) +=
      d_logits.colwise().sum().transpose();
  const Mat d_pre = (d_logits * w2.transpose()).cwiseProduct(relu_grad_mask(cache.mlp_pre));
  mat_view(grad_slot(grads, "head.mlp.w1",
                     {static_cast<std::size_t>(w1.rows()), static_cast<std::size_t>(w1.cols())})) +=
      cache.x.transpose() * d_pre;
  vec_view(grad_slot(grads, "head.mlp.b1", {static_cast<std::size_t>(w1.cols())})) +=
      d_pre.colwise().sum().transpose();
  return d_pre * w1.transpose();
}

Mat cnn_backward(const HeadConfig& cfg, const ParamMap& params, const HeadCache& cache,
                 const Mat& d_logits, ParamMap& grads) {
  const int n = static_cast<int>(cache.x.rows());
  const int h = static_cast<int>(cache.x.cols());
  const int channels = cfg.cnn_channels;
  const int kernel = cfg.cnn_kernel;
  const int radius = (kernel - 1) / 2;
  const int pool = cfg.cnn_pool;
  const int pooled_len = h / pool;
  const int flat = channels * pooled_len;
  (void)pool;

  const auto fc1_w = mat_view(param(params, "head.cnn.fc1.w"));
  const auto fc2_w = mat_view(param(params, "head.cnn.fc2.w"));

  const Mat fc1_act = relu(cache.fc1_pre);
  mat_view(grad_slot(grads, "head.cnn.fc2.w",
                     {static_cast<std::size_t>(fc2_w.rows()),
                      static_cast<std::size_t>(fc2_w.cols())})) += fc1_act.transpose() * d_logits;
  vec_view(grad_slot(grads, "head.cnn.fc2.b", {static_cast<std::size_t>(fc2_w.cols())})) +=
      d_logits.colwise().sum().transpose();
  const Mat d_fc1_pre =
      (d_logits * fc2_w.transpose()).cwiseProduct(relu_grad_mask(cache.fc1_pre));
  mat_view(grad_slot(grads, "head.cnn.fc1.w",
                     {static_cast<std::size_t>(fc1_w.rows()),
                      static_cast<std::size_t>(fc1_w.cols())})) +=
      cache.pooled.transpose() * d_fc1_pre;
  vec_view(grad_slot(grads, "head.cnn.fc1.b", {static_cast<std::size_t>(fc1_w.cols())})) +=
      d_fc1_pre.colwise().sum().transpose();
  const Mat d_pooled = d_fc1_pre * fc1_w.transpose();

  // Route pooled gradients to the winning convolution cells, then through
  // the relu, the kernel taps, and back to the input signal.
  Mat d_conv_pre = Mat::Zero(n, channels * h);
  for (int i = 0; i < n; ++i) {
    for (int col = 0; col < flat; ++col) {
      const int win = cache.pool_argmax[static_cast<std::size_t>(i) * flat + col];
      if (cache.conv_act(i, win) > 0.0) {
        d_conv_pre(i, win) += d_pooled(i, col);
      }
    }
  }

  const auto conv_w = mat_view(param(params, "head.cnn.conv.w"));
  auto d_conv_w = mat_view(grad_slot(grads, "head.cnn.conv.w",
                                     {static_cast<std::size_t>(channels),
                                      static_cast<std::size_t>(kernel)}));
  auto d_conv_b =
      vec_view(grad_slot(grads, "head.cnn.conv.b", {static_cast<std::size_t>(channels)}));
  Mat d_x = Mat::Zero(n, h);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels; ++c) {
      for (int t = 0; t < h; ++t) {
        const double g = d_conv_pre(i, c * h + t);
        if (g == 0.0) {
          continue;
        }
        d_conv_b(c) += g;
        for (int k = 0; k < kernel; ++k) {
          const int s = t + k - radius;
          if (s >= 0 && s < h) {
            d_conv_w(c, k) += g * cache.x(i, s);
            d_x(i, s) += g * conv_w(c, k);
          }
        }
      }
    }
  }
  return d_x;
}

}  // namespace

Mat head_backward(const HeadConfig& cfg, const ParamMap& params, const HeadCache& cache,
                  const Mat& d_logits, ParamMap& grads) {
  switch (cfg.kind) {
    case HeadKind::linear:
      return linear_backward(params, cache, d_logits, grads);
    case HeadKind::mlp:
      return mlp_backward(params, cache, d_logits, grads);
    case HeadKind::cnn1d:
      return cnn_backward(cfg, params, cache, d_logits, grads);
  }
  throw Error("head_backward: bad head kind");
}

}  // namespace topo
