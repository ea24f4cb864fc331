#include "topo/encoder.hpp"

#include <cmath>

namespace topo {

namespace {

constexpr double kLnEpsilon = 1e-12;
constexpr double kMaskPenalty = -1e9;

std::string layer_key(int layer, const char* suffix) {
  return "encoder.layer" + std::to_string(layer) + "." + suffix;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
  const double phi = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
  const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return phi + x * density;
}

/// y = gamma * (x - mean) / sqrt(var + eps) + beta, per row.
Mat layer_norm_forward(const Mat& x, ConstVecView gamma, ConstVecView beta,
                       LayerNormCache* cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h = x.cols();
  Mat xhat(n, h);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLnEpsilon);
    xhat.row(i) = (x.row(i).array() - mean) * inv;
    inv_std(i) = inv;
  }
  Mat out = xhat;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i) = xhat.row(i).cwiseProduct(gamma.transpose()) + beta.transpose();
  }
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

/// Returns d(loss)/d(x) and accumulates the gamma/beta gradients.
Mat layer_norm_backward(const Mat& d_out, const LayerNormCache& cache, ConstVecView gamma,
                        Array& d_gamma, Array& d_beta) {
  const Eigen::Index n = d_out.rows();
  const Eigen::Index h = d_out.cols();
  using RowArray = Eigen::Array<double, 1, Eigen::Dynamic>;
  VecView dg = vec_view(d_gamma);
  VecView db = vec_view(d_beta);
  Mat dx(n, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowArray dout_row = d_out.row(i).array();
    const RowArray xhat_row = cache.xhat.row(i).array();
    dg += (dout_row * xhat_row).matrix().transpose();
    db += dout_row.matrix().transpose();
    const RowArray dxhat = dout_row * gamma.transpose().array();
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = (dxhat * xhat_row).mean();
    dx.row(i) = ((dxhat - mean_dxhat - xhat_row * mean_dxhat_xhat) * cache.inv_std(i)).matrix();
  }
  return dx;
}

/// Row-wise softmax with max subtraction, in place.
void softmax_rows(Mat& scores) {
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - m).exp();
    scores.row(i) /= scores.row(i).sum();
  }
}

Mat affine(const Mat& x, ConstMatView w, ConstVecView b) {
  Mat out = x * w;
  out.rowwise() += b.transpose();
  return out;
}

}  // namespace

std::string variant_name(EncoderVariant variant) {
  switch (variant) {
    case EncoderVariant::pretrained_base_cased:
      return "pretrained-base-cased";
    case EncoderVariant::pretrained_large_cased:
      return "pretrained-large-cased";
    case EncoderVariant::miniature:
      return "miniature";
  }
  throw Error("variant_name: bad enum value");
}

EncoderVariant parse_variant(const std::string& name) {
  if (name == "pretrained-base-cased" || name == "base") {
    return EncoderVariant::pretrained_base_cased;
  }
  if (name == "pretrained-large-cased" || name == "large") {
    return EncoderVariant::pretrained_large_cased;
  }
  if (name == "miniature") {
    return EncoderVariant::miniature;
  }
  throw Error("unknown encoder variant: " + name);
}

void EncoderConfig::validate() const {
  if (layers < 1 || hidden_size < 1 || attention_heads < 1 || vocab_size < 1 ||
      max_positions < 1 || type_vocab < 1) {
    throw Error("encoder config: all sizes must be positive");
  }
  if (hidden_size % attention_heads != 0) {
    throw Error("encoder config: hidden_size " + std::to_string(hidden_size) +
                " not divisible by attention_heads " + std::to_string(attention_heads));
  }
  if (variant == EncoderVariant::pretrained_base_cased &&
      (layers != 12 || hidden_size != 768 || attention_heads != 12)) {
    throw Error("pretrained-base-cased must be (12 layers, H=768, 12 heads)");
  }
  if (variant == EncoderVariant::pretrained_large_cased &&
      (layers != 24 || hidden_size != 1024 || attention_heads != 16)) {
    throw Error("pretrained-large-cased must be (24 layers, H=1024, 16 heads)");
  }
}

EncoderConfig EncoderConfig::pretrained_base_cased() {
  EncoderConfig cfg;
  cfg.variant = EncoderVariant::pretrained_base_cased;
  cfg.layers = 12;
  cfg.hidden_size = 768;
  cfg.attention_heads = 12;
  cfg.vocab_size = 28996;
  cfg.max_positions = 512;
  cfg.validate();
  return cfg;
}

EncoderConfig EncoderConfig::pretrained_large_cased() {
  EncoderConfig cfg;
  cfg.variant = EncoderVariant::pretrained_large_cased;
  cfg.layers = 24;
  cfg.hidden_size = 1024;
  cfg.attention_heads = 16;
  cfg.vocab_size = 28996;
  cfg.max_positions = 512;
  cfg.validate();
  return cfg;
}

EncoderConfig EncoderConfig::miniature_config(int vocab_size, int layers, int hidden_size,
                                              int attention_heads, int max_positions) {
  EncoderConfig cfg;
  cfg.variant = EncoderVariant::miniature;
  cfg.layers = layers;
  cfg.hidden_size = hidden_size;
  cfg.attention_heads = attention_heads;
  cfg.vocab_size = vocab_size;
  cfg.max_positions = max_positions;
  cfg.validate();
  return cfg;
}

std::map<std::string, std::vector<std::size_t>> encoder_parameter_shapes(
    const EncoderConfig& cfg) {
  cfg.validate();
  const auto h = static_cast<std::size_t>(cfg.hidden_size);
  const auto f = static_cast<std::size_t>(cfg.ffn_size());
  std::map<std::string, std::vector<std::size_t>> shapes;
  shapes["encoder.embeddings.word"] = {static_cast<std::size_t>(cfg.vocab_size), h};
  shapes["encoder.embeddings.position"] = {static_cast<std::size_t>(cfg.max_positions), h};
  shapes["encoder.embeddings.type"] = {static_cast<std::size_t>(cfg.type_vocab), h};
  shapes["encoder.embeddings.ln.gamma"] = {h};
  shapes["encoder.embeddings.ln.beta"] = {h};
  for (int l = 0; l < cfg.layers; ++l) {
    shapes[layer_key(l, "attn.wq")] = {h, h};
    shapes[layer_key(l, "attn.bq")] = {h};
    shapes[layer_key(l, "attn.wk")] = {h, h};
    shapes[layer_key(l, "attn.bk")] = {h};
    shapes[layer_key(l, "attn.wv")] = {h, h};
    shapes[layer_key(l, "attn.bv")] = {h};
    shapes[layer_key(l, "attn.wo")] = {h, h};
    shapes[layer_key(l, "attn.bo")] = {h};
    shapes[layer_key(l, "attn.ln.gamma")] = {h};
    shapes[layer_key(l, "attn.ln.beta")] = {h};
    shapes[layer_key(l, "ffn.w1")] = {h, f};
    shapes[layer_key(l, "ffn.b1")] = {f};
    shapes[layer_key(l, "ffn.w2")] = {f, h};
    shapes[layer_key(l, "ffn.b2")] = {h};
    shapes[layer_key(l, "ffn.ln.gamma")] = {h};
    shapes[layer_key(l, "ffn.ln.beta")] = {h};
  }
  return shapes;
}

long long encoder_parameter_count(const EncoderConfig& cfg) {
  long long total = 0;
  for (const auto& [name, shape] : encoder_parameter_shapes(cfg)) {
    (void)name;
    total += static_cast<long long>(shape_numel(shape));
  }
  return total;
}

ParamMap init_encoder_params(const EncoderConfig& cfg, Rng& rng) {
  ParamMap params;
  for (const auto& [name, shape] : encoder_parameter_shapes(cfg)) {
    Array a(shape);
    if (shape.size() == 2) {
      for (double& x : a.data) {
        x = rng.normal(0.0, 0.02);
      }
    } else if (name.ends_with("gamma")) {
      for (double& x : a.data) {
        x = 1.0;
      }
    }
    params.emplace(name, std::move(a));
  }
  return params;
}

Mat encoder_forward(const EncoderConfig& cfg, const ParamMap& params,
                    const std::vector<int>& ids, const std::vector<std::uint8_t>& mask,
                    int batch, int seq_len, EncoderCache* cache) {
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(batch) * static_cast<std::size_t>(seq_len);
  if (batch < 1 || seq_len < 1) {
    throw Error("encoder_forward: batch and seq_len must be positive");
  }
  if (ids.size() != n || mask.size() != n) {
    throw Error("encoder_forward: ids/mask size does not match batch*seq_len");
  }
  if (seq_len > cfg.max_positions) {
    throw Error("encoder_forward: sequence length " + std::to_string(seq_len) +
                " exceeds max_positions " + std::to_string(cfg.max_positions));
  }
  for (const int id : ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw Error("encoder_forward: piece id " + std::to_string(id) +
                  " outside vocabulary of size " + std::to_string(cfg.vocab_size));
    }
  }

  const int h = cfg.hidden_size;
  const int heads = cfg.attention_heads;
  const int dh = cfg.head_size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const auto word = mat_view(param(params, "encoder.embeddings.word"));
  const auto position = mat_view(param(params, "encoder.embeddings.position"));
  const auto type = mat_view(param(params, "encoder.embeddings.type"));

  Mat x(static_cast<Eigen::Index>(n), h);
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < seq_len; ++t) {
      const std::size_t pos = static_cast<std::size_t>(b) * seq_len + t;
      x.row(static_cast<Eigen::Index>(pos)) =
          word.row(ids[pos]) + position.row(t) + type.row(0);
    }
  }
  if (cache != nullptr) {
    cache->batch = batch;
    cache->seq_len = seq_len;
    cache->ids = ids;
    cache->mask = mask;
    cache->layers.assign(static_cast<std::size_t>(cfg.layers), EncoderLayerCache{});
  }
  x = layer_norm_forward(x, vec_view(param(params, "encoder.embeddings.ln.gamma")),
                         vec_view(param(params, "encoder.embeddings.ln.beta")),
                         cache != nullptr ? &cache->emb_ln : nullptr);

  for (int l = 0; l < cfg.layers; ++l) {
    EncoderLayerCache* lc = cache != nullptr ? &cache->layers[static_cast<std::size_t>(l)]
                                             : nullptr;
    if (lc != nullptr) {
      lc->x_in = x;
    }
    Mat q = affine(x, mat_view(param(params, layer_key(l, "attn.wq"))),
                   vec_view(param(params, layer_key(l, "attn.bq"))));
    Mat k = affine(x, mat_view(param(params, layer_key(l, "attn.wk"))),
                   vec_view(param(params, layer_key(l, "attn.bk"))));
    Mat v = affine(x, mat_view(param(params, layer_key(l, "attn.wv"))),
                   vec_view(param(params, layer_key(l, "attn.bv"))));

    Mat context(x.rows(), h);
    std::vector<Mat> probs;
    if (lc != nullptr) {
      probs.reserve(static_cast<std::size_t>(batch) * heads);
    }
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index row0 = static_cast<Eigen::Index>(b) * seq_len;
      for (int head = 0; head < heads; ++head) {
        const Eigen::Index col0 = static_cast<Eigen::Index>(head) * dh;
        Mat scores = q.block(row0, col0, seq_len, dh) *
                     k.block(row0, col0, seq_len, dh).transpose() * scale;
        for (int j = 0; j < seq_len; ++j) {
          if (mask[static_cast<std::size_t>(row0) + j] == 0) {
            scores.col(j).array() += kMaskPenalty;
          }
        }
        softmax_rows(scores);
        context.block(row0, col0, seq_len, dh) =
            scores * v.block(row0, col0, seq_len, dh);
        if (lc != nullptr) {
          probs.push_back(std::move(scores));
        }
      }
    }
    Mat attn_out = affine(context, mat_view(param(params, layer_key(l, "attn.wo"))),
                          vec_view(param(params, layer_key(l, "attn.bo"))));
    Mat res = x + attn_out;
    Mat x_mid = layer_norm_forward(res, vec_view(param(params, layer_key(l, "attn.ln.gamma"))),
                                   vec_view(param(params, layer_key(l, "attn.ln.beta"))),
                                   lc != nullptr ? &lc->attn_ln : nullptr);

    Mat ffn_pre = affine(x_mid, mat_view(param(params, layer_key(l, "ffn.w1"))),
                         vec_view(param(params, layer_key(l, "ffn.b1"))));
    Mat ffn_act = ffn_pre.unaryExpr([](double t) { return gelu(t); });
    Mat ffn_out = affine(ffn_act, mat_view(param(params, layer_key(l, "ffn.w2"))),
                         vec_view(param(params, layer_key(l, "ffn.b2"))));
    Mat res2 = x_mid + ffn_out;
    x = layer_norm_forward(res2, vec_view(param(params, layer_key(l, "ffn.ln.gamma"))),
                           vec_view(param(params, layer_key(l, "ffn.ln.beta"))),
                           lc != nullptr ? &lc->ffn_ln : nullptr);

    if (lc != nullptr) {
      lc->q = std::move(q);
      lc->k = std::move(k);
      lc->v = std::move(v);
      lc->probs = std::move(probs);
      lc->context = std::move(context);
      lc->x_mid = std::move(x_mid);
      lc->ffn_pre = std::move(ffn_pre);
      lc->ffn_act = std::move(ffn_act);
    }
  }
  return x;
}

void encoder_backward(const EncoderConfig& cfg, const ParamMap& params,
                      const EncoderCache& cache, const Mat& d_output, ParamMap& grads) {
  const int batch = cache.batch;
  const int seq_len = cache.seq_len;
  const int h = cfg.hidden_size;
  const int heads = cfg.attention_heads;
  const int dh = cfg.head_size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto shapes = encoder_parameter_shapes(cfg);
  const auto shape_of = [&shapes](const std::string& name) -> const std::vector<std::size_t>& {
    return shapes.at(name);
  };
  if (d_output.rows() != static_cast<Eigen::Index>(batch) * seq_len || d_output.cols() != h) {
    throw Error("encoder_backward: d_output shape mismatch");
  }

  Mat d = d_output;
  for (int l = cfg.layers - 1; l >= 0; --l) {
    const auto& lc = cache.layers[static_cast<std::size_t>(l)];

    // Feed-forward block, unwinding through its layer norm first.
    Mat d_res2 = layer_norm_backward(
        d, lc.ffn_ln, vec_view(param(params, layer_key(l, "ffn.ln.gamma"))),
        grad_slot(grads, layer_key(l, "ffn.ln.gamma"), shape_of(layer_key(l, "ffn.ln.gamma"))),
        grad_slot(grads, layer_key(l, "ffn.ln.beta"), shape_of(layer_key(l, "ffn.ln.beta"))));
    Mat d_xmid = d_res2;  // residual branch
    const auto w2 = mat_view(param(params, layer_key(l, "ffn.w2")));
    mat_view(grad_slot(grads, layer_key(l, "ffn.w2"), shape_of(layer_key(l, "ffn.w2")))) +=
        lc.ffn_act.transpose() * d_res2;
    vec_view(grad_slot(grads, layer_key(l, "ffn.b2"), shape_of(layer_key(l, "ffn.b2")))) +=
        d_res2.colwise().sum().transpose();
    Mat d_act = d_res2 * w2.transpose();
    Mat d_pre = d_act.cwiseProduct(lc.ffn_pre.unaryExpr([](double t) { return gelu_grad(t); }));
    const auto w1 = mat_view(param(params, layer_key(l, "ffn.w1")));
    mat_view(grad_slot(grads, layer_key(l, "ffn.w1"), shape_of(layer_key(l, "ffn.w1")))) +=
        lc.x_mid.transpose() * d_pre;
    vec_view(grad_slot(grads, layer_key(l, "ffn.b1"), shape_of(layer_key(l, "ffn.b1")))) +=
        d_pre.colwise().sum().transpose();
    d_xmid += d_pre * w1.transpose();

    // Attention block.
    Mat d_res1 = layer_norm_backward(
        d_xmid, lc.attn_ln, vec_view(param(params, layer_key(l, "attn.ln.gamma"))),
        grad_slot(grads, layer_key(l, "attn.ln.gamma"), shape_of(layer_key(l, "attn.ln.gamma"))),
        grad_slot(grads, layer_key(l, "attn.ln.beta"), shape_of(layer_key(l, "attn.ln.beta"))));
    Mat d_xin = d_res1;  // residual branch
    const auto wo = mat_view(param(params, layer_key(l, "attn.wo")));
    mat_view(grad_slot(grads, layer_key(l, "attn.wo"), shape_of(layer_key(l, "attn.wo")))) +=
        lc.context.transpose() * d_res1;
    vec_view(grad_slot(grads, layer_key(l, "attn.bo"), shape_of(layer_key(l, "attn.bo")))) +=
        d_res1.colwise().sum().transpose();
    Mat d_context = d_res1 * wo.transpose();

    Mat d_q = Mat::Zero(d.rows(), h);
    Mat d_k = Mat::Zero(d.rows(), h);
    Mat d_v = Mat::Zero(d.rows(), h);
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index row0 = static_cast<Eigen::Index>(b) * seq_len;
      for (int head = 0; head < heads; ++head) {
        const Eigen::Index col0 = static_cast<Eigen::Index>(head) * dh;
        const Mat& p = lc.probs[static_cast<std::size_t>(b) * heads + head];
        const auto d_ctx = d_context.block(row0, col0, seq_len, dh);
        const auto v_blk = lc.v.block(row0, col0, seq_len, dh);
        Mat d_probs = d_ctx * v_blk.transpose();
        d_v.block(row0, col0, seq_len, dh) += p.transpose() * d_ctx;
        // Softmax backward, row-wise.
        Mat d_scores(seq_len, seq_len);
        for (int i = 0; i < seq_len; ++i) {
          const double dot = d_probs.row(i).dot(p.row(i));
          d_scores.row(i) = (p.row(i).array() * (d_probs.row(i).array() - dot)).matrix();
        }
        d_scores *= scale;
        d_q.block(row0, col0, seq_len, dh) += d_scores * lc.k.block(row0, col0, seq_len, dh);
        d_k.block(row0, col0, seq_len, dh) +=
            d_scores.transpose() * lc.q.block(row0, col0, seq_len, dh);
      }
    }
    const auto backprop_proj = [&](const char* w_name, const char* b_name, const Mat& d_proj) {
      const std::string wk = layer_key(l, w_name);
      const std::string bk = layer_key(l, b_name);
      mat_view(grad_slot(grads, wk, shape_of(wk))) += lc.x_in.transpose() * d_proj;
      vec_view(grad_slot(grads, bk, shape_of(bk))) += d_proj.colwise().sum().transpose();
      d_xin += d_proj * mat_view(param(params, wk)).transpose();
    };
    backprop_proj("attn.wq", "attn.bq", d_q);
    backprop_proj("attn.wk", "attn.bk", d_k);
    backprop_proj("attn.wv", "attn.bv", d_v);
    d = std::move(d_xin);
  }

  Mat d_emb = layer_norm_backward(
      d, cache.emb_ln, vec_view(param(params, "encoder.embeddings.ln.gamma")),
      grad_slot(grads, "encoder.embeddings.ln.gamma", shape_of("encoder.embeddings.ln.gamma")),
      grad_slot(grads, "encoder.embeddings.ln.beta", shape_of("encoder.embeddings.ln.beta")));

  auto d_word = mat_view(
      grad_slot(grads, "encoder.embeddings.word", shape_of("encoder.embeddings.word")));
  auto d_position = mat_view(
      grad_slot(grads, "encoder.embeddings.position", shape_of("encoder.embeddings.position")));
  auto d_type = mat_view(
      grad_slot(grads, "encoder.embeddings.type", shape_of("encoder.embeddings.type")));
  for (int b = 0; b < batch; ++b) {
    for (int t = 0; t < seq_len; ++t) {
      const std::size_t pos = static_cast<std::size_t>(b) * seq_len + t;
      d_word.row(cache.ids[pos]) += d_emb.row(static_cast<Eigen::Index>(pos));
      d_position.row(t) += d_emb.row(static_cast<Eigen::Index>(pos));
      d_type.row(0) += d_emb.row(static_cast<Eigen::Index>(pos));
    }
  }
}

}  // namespace topo
