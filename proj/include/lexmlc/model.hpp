#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lexmlc/common.hpp"
#include "lexmlc/tokenizer.hpp"

namespace lexmlc {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  int layers = 6;
  int hidden = 128;
  int heads = 4;
  int ff_dim = 512;
  int vocab_size = 0;
  int max_seq_len = 256;
  int label_count = 0;

  void validate() const {
    require(layers >= 1, "config: layers must be >= 1");
    require(hidden >= 1 && heads >= 1 && ff_dim >= 1,
            "config: dimensions must be >= 1");
    require(hidden % heads == 0, "config: hidden (", hidden,
            ") must be divisible by heads (", heads, ")");
    require(vocab_size > SpecialTokens::count, "config: vocab_size must exceed ",
            SpecialTokens::count);
    require(max_seq_len >= 2, "config: max_seq_len must be >= 2");
    require(label_count >= 1, "config: label_count must be >= 1");
  }

  int head_dim() const { return hidden / heads; }

  // Canonical text block, sorted by key; embedded in checkpoints.
  std::string canonical_text() const {
    KeyValueConfig kv;
    kv["ff_dim"] = std::to_string(ff_dim);
    kv["heads"] = std::to_string(heads);
    kv["hidden"] = std::to_string(hidden);
    kv["label_count"] = std::to_string(label_count);
    kv["layers"] = std::to_string(layers);
    kv["max_seq_len"] = std::to_string(max_seq_len);
    kv["vocab_size"] = std::to_string(vocab_size);
    return dump_key_values(kv);
  }

  static ModelConfig from_text(const std::string& text) {
    const KeyValueConfig kv = parse_key_values(text);
    ModelConfig c;
    auto get = [&](const char* key) {
      auto it = kv.find(key);
      require(it != kv.end(), "checkpoint config lacks key '", key, "'");
      return std::stoi(it->second);
    };
    c.ff_dim = get("ff_dim");
    c.heads = get("heads");
    c.hidden = get("hidden");
    c.label_count = get("label_count");
    c.layers = get("layers");
    c.max_seq_len = get("max_seq_len");
    c.vocab_size = get("vocab_size");
    c.validate();
    return c;
  }

  bool operator==(const ModelConfig&) const = default;
};

// Freeze-group names addressed by the training scheduler.
inline std::string layer_group_name(int layer_index_one_based) {
  return "LAYER_" + std::to_string(layer_index_one_based);
}
inline constexpr const char* kGroupEmb = "EMB";
inline constexpr const char* kGroupMlmHead = "MLM_HEAD";
inline constexpr const char* kGroupClsHead = "CLS_HEAD";

template <typename Scalar>
struct EmbeddingParams {
  Mat<Scalar> tok;   // vocab x hidden
  Mat<Scalar> pos;   // max_seq_len x hidden
  Mat<Scalar> ln_g;  // 1 x hidden
  Mat<Scalar> ln_b;  // 1 x hidden
};

template <typename Scalar>
struct LayerParams {
  Mat<Scalar> wq, bq, wk, bk, wv, bv, wo, bo;
  Mat<Scalar> ln1_g, ln1_b;
  Mat<Scalar> w1, b1, w2, b2;
  Mat<Scalar> ln2_g, ln2_b;
};

template <typename Scalar>
struct MlmHeadParams {
  Mat<Scalar> w, b;      // hidden -> hidden
  Mat<Scalar> ln_g, ln_b;
  Mat<Scalar> out_w, out_b;  // hidden -> vocab
};

template <typename Scalar>
struct ClsHeadParams {
  Mat<Scalar> pool_w, pool_b;  // hidden -> hidden, tanh
  Mat<Scalar> out_w, out_b;    // hidden -> label_count
};

// Small transformer encoder with learned positional embeddings, post-layer-
// norm blocks, a GELU feed-forward, an MLM head and a [CLS] classifier head.
// Parameters are partitioned into named freeze-groups.
template <typename Scalar>
class EncoderModel {
 public:
  EncoderModel() = default;

  EncoderModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config.validate();
    Rng rng(seed);
    const int h = config.hidden;
    emb.tok = uniform(rng, config.vocab_size, h, h);
    emb.pos = uniform(rng, config.max_seq_len, h, h);
    emb.ln_g = ones(h);
    emb.ln_b = zeros(h);
    layers.resize(static_cast<std::size_t>(config.layers));
    for (LayerParams<Scalar>& l : layers) {
      l.wq = uniform(rng, h, h, h);
      l.bq = zeros(h);
      l.wk = uniform(rng, h, h, h);
      l.bk = zeros(h);
      l.wv = uniform(rng, h, h, h);
      l.bv = zeros(h);
      l.wo = uniform(rng, h, h, h);
      l.bo = zeros(h);
      l.ln1_g = ones(h);
      l.ln1_b = zeros(h);
      l.w1 = uniform(rng, h, config.ff_dim, h);
      l.b1 = zeros(config.ff_dim);
      l.w2 = uniform(rng, config.ff_dim, h, config.ff_dim);
      l.b2 = zeros(h);
      l.ln2_g = ones(h);
      l.ln2_b = zeros(h);
    }
    mlm.w = uniform(rng, h, h, h);
    mlm.b = zeros(h);
    mlm.ln_g = ones(h);
    mlm.ln_b = zeros(h);
    mlm.out_w = uniform(rng, h, config.vocab_size, h);
    mlm.out_b = zeros(config.vocab_size);
    cls.pool_w = uniform(rng, h, h, h);
    cls.pool_b = zeros(h);
    cls.out_w = uniform(rng, h, config.label_count, h);
    cls.out_b = zeros(config.label_count);
  }

  const ModelConfig& config() const { return config_; }

  std::vector<std::string> group_names() const {
    std::vector<std::string> names{kGroupEmb};
    for (int i = 1; i <= config_.layers; ++i) names.push_back(layer_group_name(i));
    names.push_back(kGroupMlmHead);
    names.push_back(kGroupClsHead);
    return names;
  }

  // Enumerates every tensor as (group, name, matrix) in canonical order.
  template <typename Fn>
  void visit(Fn&& fn) {
    const_cast<const EncoderModel*>(this)->visit(
        [&](const std::string& g, const std::string& n, const Mat<Scalar>& m) {
          fn(g, n, const_cast<Mat<Scalar>&>(m));
        });
  }

  template <typename Fn>
  void visit(Fn&& fn) const {
    fn(kGroupEmb, "tok", emb.tok);
    fn(kGroupEmb, "pos", emb.pos);
    fn(kGroupEmb, "ln_g", emb.ln_g);
    fn(kGroupEmb, "ln_b", emb.ln_b);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string g = layer_group_name(static_cast<int>(i) + 1);
      const LayerParams<Scalar>& l = layers[i];
      fn(g, "wq", l.wq); fn(g, "bq", l.bq);
      fn(g, "wk", l.wk); fn(g, "bk", l.bk);
      fn(g, "wv", l.wv); fn(g, "bv", l.bv);
      fn(g, "wo", l.wo); fn(g, "bo", l.bo);
      fn(g, "ln1_g", l.ln1_g); fn(g, "ln1_b", l.ln1_b);
      fn(g, "w1", l.w1); fn(g, "b1", l.b1);
      fn(g, "w2", l.w2); fn(g, "b2", l.b2);
      fn(g, "ln2_g", l.ln2_g); fn(g, "ln2_b", l.ln2_b);
    }
    fn(kGroupMlmHead, "w", mlm.w);
    fn(kGroupMlmHead, "b", mlm.b);
    fn(kGroupMlmHead, "ln_g", mlm.ln_g);
    fn(kGroupMlmHead, "ln_b", mlm.ln_b);
    fn(kGroupMlmHead, "out_w", mlm.out_w);
    fn(kGroupMlmHead, "out_b", mlm.out_b);
    fn(kGroupClsHead, "pool_w", cls.pool_w);
    fn(kGroupClsHead, "pool_b", cls.pool_b);
    fn(kGroupClsHead, "out_w", cls.out_w);
    fn(kGroupClsHead, "out_b", cls.out_b);
  }

  Mat<Scalar>* find(const std::string& group, const std::string& name) {
    Mat<Scalar>* out = nullptr;
    visit([&](const std::string& g, const std::string& n, Mat<Scalar>& m) {
      if (g == group && n == name) out = &m;
    });
    return out;
  }

  EmbeddingParams<Scalar> emb;
  std::vector<LayerParams<Scalar>> layers;
  MlmHeadParams<Scalar> mlm;
  ClsHeadParams<Scalar> cls;

 private:
  static Mat<Scalar> zeros(int n) { return Mat<Scalar>::Zero(1, n); }
  static Mat<Scalar> ones(int n) { return Mat<Scalar>::Ones(1, n); }

  // Scaled uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn in a fixed
  // row-major order.
  static Mat<Scalar> uniform(Rng& rng, int rows, int cols, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Mat<Scalar> m(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        m(r, c) = static_cast<Scalar>(rng.next_uniform(-bound, bound));
      }
    }
    return m;
  }

  ModelConfig config_;
};

// Gradients for the trainable groups only; frozen groups have no entry.
template <typename Scalar>
struct GradientSet {
  std::map<std::string, std::map<std::string, Mat<Scalar>>> by_group;

  bool has(const std::string& group) const { return by_group.count(group) > 0; }

  Mat<Scalar>& at(const std::string& group, const std::string& name) {
    return by_group.at(group).at(name);
  }
  const Mat<Scalar>& at(const std::string& group, const std::string& name) const {
    return by_group.at(group).at(name);
  }
};

// ---------------------------------------------------------------------------
// Batching. Sequences are padded with [PAD]; real lengths are kept so the
// encoder can exclude pad positions from attention entirely (equivalent to
// an additive -inf mask: pad keys receive exactly zero attention weight and
// pad content never influences any output).
// ---------------------------------------------------------------------------
struct PaddedBatch {
  std::vector<std::vector<int>> ids;  // rows padded to max_len
  std::vector<std::size_t> lengths;

  std::size_t size() const { return ids.size(); }
  std::size_t max_len() const { return ids.empty() ? 0 : ids[0].size(); }
};

inline PaddedBatch pad_batch(const std::vector<TokenSequence>& seqs) {
  PaddedBatch batch;
  std::size_t max_len = 0;
  for (const TokenSequence& s : seqs) max_len = std::max(max_len, s.length());
  for (const TokenSequence& s : seqs) {
    std::vector<int> row = s.ids;
    row.resize(max_len, SpecialTokens::pad);
    batch.ids.push_back(std::move(row));
    batch.lengths.push_back(s.length());
  }
  return batch;
}

using MlmTargets = std::vector<std::map<std::size_t, int>>;  // per document
using GoldLabels = std::vector<std::set<std::size_t>>;       // per document

// ---------------------------------------------------------------------------
// Forward cache: everything backward needs, stored per document.
// ---------------------------------------------------------------------------
namespace nn {

template <typename Scalar>
struct LnCache {
  Mat<Scalar> xhat;                                  // rows x hidden
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rstd;     // rows
};

constexpr double kLnEpsilon = 1e-5;

template <typename Scalar>
Mat<Scalar> ln_forward(const Mat<Scalar>& x, const Mat<Scalar>& g,
                       const Mat<Scalar>& b, LnCache<Scalar>& cache) {
  const auto n = x.cols();
  cache.xhat.resize(x.rows(), n);
  cache.rstd.resize(x.rows());
  Mat<Scalar> y(x.rows(), n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mean).square().sum() / Scalar(n);
    const Scalar rstd = Scalar(1) / std::sqrt(var + Scalar(kLnEpsilon));
    cache.rstd(r) = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mean) * rstd;
    y.row(r) = cache.xhat.row(r).cwiseProduct(g.row(0)) + b.row(0);
  }
  return y;
}

template <typename Scalar>
Mat<Scalar> ln_backward(const Mat<Scalar>& dy, const LnCache<Scalar>& cache,
                        const Mat<Scalar>& g, Mat<Scalar>* dg, Mat<Scalar>* db) {
  const auto n = dy.cols();
  Mat<Scalar> dx(dy.rows(), n);
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    auto xhat = cache.xhat.row(r).array();
    auto dxhat = (dy.row(r).array() * g.row(0).array()).eval();
    const Scalar mean_dxhat = dxhat.mean();
    const Scalar mean_dxhat_xhat = (dxhat * xhat).mean();
    dx.row(r) =
        ((dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * cache.rstd(r)).matrix();
  }
  if (dg) {
    for (Eigen::Index r = 0; r < dy.rows(); ++r) {
      dg->row(0).array() += dy.row(r).array() * cache.xhat.row(r).array();
      db->row(0) += dy.row(r);
    }
  }
  return dx;
}

template <typename Scalar>
Scalar gelu_scalar(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2)));
}

template <typename Scalar>
Scalar gelu_grad_scalar(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x * Scalar(M_SQRT1_2)));
  const Scalar pdf =
      std::exp(Scalar(-0.5) * x * x) * Scalar(0.3989422804014327);
  return cdf + x * pdf;
}

template <typename Scalar>
struct LayerCache {
  Mat<Scalar> x_in;                 // T x H, block input
  Mat<Scalar> q, k, v;              // T x H
  std::vector<Mat<Scalar>> attn;    // per head, T x T softmax rows
  Mat<Scalar> concat;               // T x H, heads reassembled
  LnCache<Scalar> ln1;
  Mat<Scalar> x_mid;                // T x H, post LN1
  Mat<Scalar> ff_pre;               // T x F
  LnCache<Scalar> ln2;
};

template <typename Scalar>
struct DocCache {
  std::vector<int> ids;             // true length, no padding
  Mat<Scalar> emb_sum;              // T x H, embeddings before LN
  LnCache<Scalar> emb_ln;
  Mat<Scalar> x0;                   // T x H, encoder input
  std::vector<LayerCache<Scalar>> layer;
  Mat<Scalar> x_final;              // T x H

  // MLM mode
  std::vector<std::size_t> masked_positions;
  Mat<Scalar> mlm_x;                // M x H rows gathered from x_final
  Mat<Scalar> mlm_pre;              // M x H before gelu
  LnCache<Scalar> mlm_ln;
  Mat<Scalar> mlm_hidden;           // M x H after LN
  Mat<Scalar> mlm_probs;            // M x V softmax
  std::vector<int> mlm_targets;     // M original ids

  // Classifier mode
  Mat<Scalar> cls_in;               // 1 x H ([CLS] vector)
  Mat<Scalar> cls_act;              // 1 x H tanh activation
  Mat<Scalar> cls_logits;           // 1 x L
  std::vector<char> gold;           // L zero/one targets
};

enum class Mode { mlm, classify };

template <typename Scalar>
struct ForwardCache {
  Mode mode = Mode::mlm;
  std::size_t total_masked = 0;
  std::vector<DocCache<Scalar>> docs;
  bool valid = false;
};

// Encoder trunk for one document, sliced to its true length.
template <typename Scalar>
void encode_doc(const EncoderModel<Scalar>& model, const std::vector<int>& row,
                std::size_t length, DocCache<Scalar>& doc) {
  const ModelConfig& cfg = model.config();
  require(length >= 1, "empty sequence in batch");
  require(length <= static_cast<std::size_t>(cfg.max_seq_len),
          "sequence length ", length, " exceeds max_seq_len ", cfg.max_seq_len);
  const int t = static_cast<int>(length);
  const int h = cfg.hidden;
  const int dh = cfg.head_dim();
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  doc.ids.assign(row.begin(), row.begin() + t);
  doc.emb_sum.resize(t, h);
  for (int p = 0; p < t; ++p) {
    const int id = doc.ids[static_cast<std::size_t>(p)];
    require(id >= 0 && id < cfg.vocab_size, "token id ", id,
            " out of range for vocab_size ", cfg.vocab_size);
    doc.emb_sum.row(p) = model.emb.tok.row(id) + model.emb.pos.row(p);
  }
  doc.x0 = ln_forward(doc.emb_sum, model.emb.ln_g, model.emb.ln_b, doc.emb_ln);

  doc.layer.resize(model.layers.size());
  Mat<Scalar> x = doc.x0;
  for (std::size_t li = 0; li < model.layers.size(); ++li) {
    const LayerParams<Scalar>& lp = model.layers[li];
    LayerCache<Scalar>& lc = doc.layer[li];
    lc.x_in = x;
    lc.q = (x * lp.wq).rowwise() + lp.bq.row(0);
    lc.k = (x * lp.wk).rowwise() + lp.bk.row(0);
    lc.v = (x * lp.wv).rowwise() + lp.bv.row(0);
    lc.attn.resize(static_cast<std::size_t>(cfg.heads));
    lc.concat.resize(t, h);
    for (int head = 0; head < cfg.heads; ++head) {
      auto qh = lc.q.block(0, head * dh, t, dh);
      auto kh = lc.k.block(0, head * dh, t, dh);
      auto vh = lc.v.block(0, head * dh, t, dh);
      Mat<Scalar> scores = (qh * kh.transpose()) * scale;
      Mat<Scalar>& probs = lc.attn[static_cast<std::size_t>(head)];
      probs.resize(t, t);
      for (int r = 0; r < t; ++r) {
        const Scalar m = scores.row(r).maxCoeff();
        probs.row(r) = (scores.row(r).array() - m).exp();
        probs.row(r) /= probs.row(r).sum();
      }
      lc.concat.block(0, head * dh, t, dh) = probs * vh;
    }
    Mat<Scalar> attn_out = (lc.concat * lp.wo).rowwise() + lp.bo.row(0);
    Mat<Scalar> r1 = x + attn_out;
    lc.x_mid = ln_forward(r1, lp.ln1_g, lp.ln1_b, lc.ln1);
    lc.ff_pre = (lc.x_mid * lp.w1).rowwise() + lp.b1.row(0);
    Mat<Scalar> ff_act =
        lc.ff_pre.unaryExpr([](Scalar v) { return gelu_scalar(v); });
    Mat<Scalar> ff_out = (ff_act * lp.w2).rowwise() + lp.b2.row(0);
    Mat<Scalar> r2 = lc.x_mid + ff_out;
    x = ln_forward(r2, lp.ln2_g, lp.ln2_b, lc.ln2);
  }
  doc.x_final = x;
}

}  // namespace nn

// ---------------------------------------------------------------------------
// MLM forward: mean cross-entropy over masked positions only. Returns the
// loss and, per document, the vocab-sized logits at its masked positions
// (rows in ascending position order).
// ---------------------------------------------------------------------------
template <typename Scalar>
std::pair<Scalar, std::vector<Mat<Scalar>>> forward_mlm(
    const EncoderModel<Scalar>& model, const PaddedBatch& batch,
    const MlmTargets& targets, nn::ForwardCache<Scalar>* cache = nullptr) {
  require(batch.size() > 0, "forward_mlm: empty batch");
  require(targets.size() == batch.size(),
          "forward_mlm: targets size does not match batch size");

  nn::ForwardCache<Scalar> local;
  nn::ForwardCache<Scalar>& fc = cache ? *cache : local;
  fc = {};
  fc.mode = nn::Mode::mlm;
  fc.docs.resize(batch.size());

  std::size_t total_masked = 0;
  for (std::size_t d = 0; d < batch.size(); ++d) {
    for (const auto& [pos, id] : targets[d]) {
      require(pos < batch.lengths[d], "forward_mlm: masked position ", pos,
              " outside sequence length ", batch.lengths[d]);
      require(id >= 0 && id < model.config().vocab_size,
              "forward_mlm: target id out of range");
      ++total_masked;
    }
  }
  fc.total_masked = total_masked;

  std::vector<Mat<Scalar>> logits_out(batch.size());
  double loss_sum = 0.0;
  for (std::size_t d = 0; d < batch.size(); ++d) {
    nn::DocCache<Scalar>& doc = fc.docs[d];
    nn::encode_doc(model, batch.ids[d], batch.lengths[d], doc);
    const std::size_t m = targets[d].size();
    doc.masked_positions.reserve(m);
    doc.mlm_targets.reserve(m);
    for (const auto& [pos, id] : targets[d]) {  // std::map: ascending order
      doc.masked_positions.push_back(pos);
      doc.mlm_targets.push_back(id);
    }
    if (m == 0) continue;

    doc.mlm_x.resize(static_cast<Eigen::Index>(m), model.config().hidden);
    for (std::size_t i = 0; i < m; ++i) {
      doc.mlm_x.row(static_cast<Eigen::Index>(i)) =
          doc.x_final.row(static_cast<Eigen::Index>(doc.masked_positions[i]));
    }
    doc.mlm_pre = (doc.mlm_x * model.mlm.w).rowwise() + model.mlm.b.row(0);
    Mat<Scalar> act =
        doc.mlm_pre.unaryExpr([](Scalar v) { return nn::gelu_scalar(v); });
    doc.mlm_hidden = nn::ln_forward(act, model.mlm.ln_g, model.mlm.ln_b, doc.mlm_ln);
    Mat<Scalar> logits =
        (doc.mlm_hidden * model.mlm.out_w).rowwise() + model.mlm.out_b.row(0);

    doc.mlm_probs.resize(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const Scalar mx = logits.row(r).maxCoeff();
      auto shifted = (logits.row(r).array() - mx).eval();
      const Scalar lse = std::log(shifted.exp().sum()) + mx;
      doc.mlm_probs.row(r) = (logits.row(r).array() - lse).exp();
      loss_sum += static_cast<double>(
          lse - logits(r, doc.mlm_targets[static_cast<std::size_t>(r)]));
    }
    logits_out[d] = std::move(logits);
  }
  const Scalar loss =
      total_masked == 0
          ? Scalar(0)
          : static_cast<Scalar>(loss_sum / static_cast<double>(total_masked));
  fc.valid = true;
  return {loss, std::move(logits_out)};
}

// ---------------------------------------------------------------------------
// Classifier forward: [CLS] vector -> dense(tanh) -> dense(label_count);
// loss is the mean over documents of the summed per-label binary
// cross-entropy with logits.
// ---------------------------------------------------------------------------
template <typename Scalar>
std::pair<Scalar, Mat<Scalar>> forward_classify(
    const EncoderModel<Scalar>& model, const PaddedBatch& batch,
    const GoldLabels& gold, nn::ForwardCache<Scalar>* cache = nullptr) {
  require(batch.size() > 0, "forward_classify: empty batch");
  require(gold.size() == batch.size(),
          "forward_classify: gold size does not match batch size");
  const int label_count = model.config().label_count;
  for (const auto& labels : gold) {
    for (std::size_t idx : labels) {
      require(idx < static_cast<std::size_t>(label_count),
              "forward_classify: gold label index ", idx,
              " >= label_count ", label_count);
    }
  }

  nn::ForwardCache<Scalar> local;
  nn::ForwardCache<Scalar>& fc = cache ? *cache : local;
  fc = {};
  fc.mode = nn::Mode::classify;
  fc.docs.resize(batch.size());

  Mat<Scalar> logits(static_cast<Eigen::Index>(batch.size()), label_count);
  double loss_sum = 0.0;
  for (std::size_t d = 0; d < batch.size(); ++d) {
    nn::DocCache<Scalar>& doc = fc.docs[d];
    nn::encode_doc(model, batch.ids[d], batch.lengths[d], doc);
    doc.cls_in = doc.x_final.row(0);
    Mat<Scalar> pre = (doc.cls_in * model.cls.pool_w) + model.cls.pool_b;
    doc.cls_act = pre.unaryExpr([](Scalar v) { return std::tanh(v); });
    doc.cls_logits = (doc.cls_act * model.cls.out_w) + model.cls.out_b;
    doc.gold.assign(static_cast<std::size_t>(label_count), 0);
    for (std::size_t idx : gold[d]) doc.gold[idx] = 1;

    for (int j = 0; j < label_count; ++j) {
      const Scalar z = doc.cls_logits(0, j);
      const Scalar y = Scalar(doc.gold[static_cast<std::size_t>(j)]);
      // max(z,0) - z*y + log1p(exp(-|z|)) is the overflow-safe form.
      loss_sum += static_cast<double>(std::max(z, Scalar(0)) - z * y +
                                      std::log1p(std::exp(-std::abs(z))));
    }
    logits.row(static_cast<Eigen::Index>(d)) = doc.cls_logits.row(0);
  }
  fc.valid = true;
  const Scalar loss =
      static_cast<Scalar>(loss_sum / static_cast<double>(batch.size()));
  return {loss, std::move(logits)};
}

// ---------------------------------------------------------------------------
// Exact reverse-mode gradients for every tensor in the trainable groups;
// frozen groups receive no entries at all.
// ---------------------------------------------------------------------------
template <typename Scalar>
GradientSet<Scalar> backward(const EncoderModel<Scalar>& model,
                             const nn::ForwardCache<Scalar>& cache,
                             const std::set<std::string>& trainable_groups) {
  require(cache.valid, "backward called without a cached forward pass");
  const ModelConfig& cfg = model.config();

  GradientSet<Scalar> grads;
  for (const std::string& g : trainable_groups) {
    bool known = g == kGroupEmb || g == kGroupMlmHead || g == kGroupClsHead;
    for (int i = 1; i <= cfg.layers && !known; ++i) {
      known = g == layer_group_name(i);
    }
    require(known, "unknown freeze-group '", g, "'");
  }
  model.visit([&](const std::string& g, const std::string& n,
                  const Mat<Scalar>& m) {
    if (trainable_groups.count(g) > 0) {
      grads.by_group[g][n] = Mat<Scalar>::Zero(m.rows(), m.cols());
    }
  });

  const bool train_emb = trainable_groups.count(kGroupEmb) > 0;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(cfg.head_dim()));
  const int dh = cfg.head_dim();
  const int h = cfg.hidden;

  for (const nn::DocCache<Scalar>& doc : cache.docs) {
    const int t = static_cast<int>(doc.ids.size());
    Mat<Scalar> dx = Mat<Scalar>::Zero(t, h);

    if (cache.mode == nn::Mode::mlm) {
      const std::size_t m = doc.masked_positions.size();
      if (m == 0) continue;  // no loss contribution, no gradient
      const Scalar inv_total =
          Scalar(1) / static_cast<Scalar>(cache.total_masked);
      Mat<Scalar> dlogits = doc.mlm_probs * inv_total;
      for (std::size_t i = 0; i < m; ++i) {
        dlogits(static_cast<Eigen::Index>(i),
                doc.mlm_targets[i]) -= inv_total;
      }
      Mat<Scalar> dhidden = dlogits * model.mlm.out_w.transpose();
      if (grads.has(kGroupMlmHead)) {
        grads.at(kGroupMlmHead, "out_w") += doc.mlm_hidden.transpose() * dlogits;
        grads.at(kGroupMlmHead, "out_b") += dlogits.colwise().sum();
      }
      Mat<Scalar>* dg = grads.has(kGroupMlmHead)
                            ? &grads.at(kGroupMlmHead, "ln_g")
                            : nullptr;
      Mat<Scalar>* db = grads.has(kGroupMlmHead)
                            ? &grads.at(kGroupMlmHead, "ln_b")
                            : nullptr;
      Mat<Scalar> dact = nn::ln_backward(dhidden, doc.mlm_ln, model.mlm.ln_g, dg, db);
      Mat<Scalar> dpre =
          dact.array() *
          doc.mlm_pre.unaryExpr([](Scalar v) { return nn::gelu_grad_scalar(v); })
              .array();
      if (grads.has(kGroupMlmHead)) {
        grads.at(kGroupMlmHead, "w") += doc.mlm_x.transpose() * dpre;
        grads.at(kGroupMlmHead, "b") += dpre.colwise().sum();
      }
      Mat<Scalar> dmx = dpre * model.mlm.w.transpose();
      for (std::size_t i = 0; i < m; ++i) {
        dx.row(static_cast<Eigen::Index>(doc.masked_positions[i])) +=
            dmx.row(static_cast<Eigen::Index>(i));
      }
    } else {
      const Scalar inv_docs = Scalar(1) / static_cast<Scalar>(cache.docs.size());
      Mat<Scalar> dlogits(1, cfg.label_count);
      for (int j = 0; j < cfg.label_count; ++j) {
        const Scalar z = doc.cls_logits(0, j);
        const Scalar sigma = Scalar(1) / (Scalar(1) + std::exp(-z));
        dlogits(0, j) =
            (sigma - Scalar(doc.gold[static_cast<std::size_t>(j)])) * inv_docs;
      }
      Mat<Scalar> dact = dlogits * model.cls.out_w.transpose();
      if (grads.has(kGroupClsHead)) {
        grads.at(kGroupClsHead, "out_w") += doc.cls_act.transpose() * dlogits;
        grads.at(kGroupClsHead, "out_b") += dlogits;
      }
      Mat<Scalar> dpre =
          dact.array() * (Scalar(1) - doc.cls_act.array().square());
      if (grads.has(kGroupClsHead)) {
        grads.at(kGroupClsHead, "pool_w") += doc.cls_in.transpose() * dpre;
        grads.at(kGroupClsHead, "pool_b") += dpre;
      }
      dx.row(0) += (dpre * model.cls.pool_w.transpose()).row(0);
    }

    // Encoder blocks, top down.
    for (int li = cfg.layers - 1; li >= 0; --li) {
      const nn::LayerCache<Scalar>& lc = doc.layer[static_cast<std::size_t>(li)];
      const LayerParams<Scalar>& lp = model.layers[static_cast<std::size_t>(li)];
      const std::string group = layer_group_name(li + 1);
      const bool train = grads.has(group);
      auto gp = [&](const char* name) -> Mat<Scalar>* {
        return train ? &grads.at(group, name) : nullptr;
      };

      // x_out = LN2(x_mid + FF(x_mid))
      Mat<Scalar> dr2 = nn::ln_backward(dx, lc.ln2, lp.ln2_g, gp("ln2_g"), gp("ln2_b"));
      Mat<Scalar> dx_mid = dr2;
      Mat<Scalar> ff_act =
          lc.ff_pre.unaryExpr([](Scalar v) { return nn::gelu_scalar(v); });
      Mat<Scalar> dff_act = dr2 * lp.w2.transpose();
      if (train) {
        *gp("w2") += ff_act.transpose() * dr2;
        *gp("b2") += dr2.colwise().sum();
      }
      Mat<Scalar> dff_pre =
          dff_act.array() *
          lc.ff_pre.unaryExpr([](Scalar v) { return nn::gelu_grad_scalar(v); })
              .array();
      if (train) {
        *gp("w1") += lc.x_mid.transpose() * dff_pre;
        *gp("b1") += dff_pre.colwise().sum();
      }
      dx_mid += dff_pre * lp.w1.transpose();

      // x_mid = LN1(x_in + attention(x_in))
      Mat<Scalar> dr1 =
          nn::ln_backward(dx_mid, lc.ln1, lp.ln1_g, gp("ln1_g"), gp("ln1_b"));
      Mat<Scalar> dx_in = dr1;
      Mat<Scalar> dconcat = dr1 * lp.wo.transpose();
      if (train) {
        *gp("wo") += lc.concat.transpose() * dr1;
        *gp("bo") += dr1.colwise().sum();
      }
      Mat<Scalar> dq = Mat<Scalar>::Zero(t, h);
      Mat<Scalar> dk = Mat<Scalar>::Zero(t, h);
      Mat<Scalar> dv = Mat<Scalar>::Zero(t, h);
      for (int head = 0; head < cfg.heads; ++head) {
        const Mat<Scalar>& probs = lc.attn[static_cast<std::size_t>(head)];
        auto vh = lc.v.block(0, head * dh, t, dh);
        auto qh = lc.q.block(0, head * dh, t, dh);
        auto kh = lc.k.block(0, head * dh, t, dh);
        auto dout = dconcat.block(0, head * dh, t, dh);
        Mat<Scalar> dprobs = dout * vh.transpose();
        dv.block(0, head * dh, t, dh) = probs.transpose() * dout;
        Mat<Scalar> dscores(t, t);
        for (int r = 0; r < t; ++r) {
          const Scalar dot = probs.row(r).dot(dprobs.row(r));
          dscores.row(r) =
              probs.row(r).array() * (dprobs.row(r).array() - dot);
        }
        dscores *= scale;
        dq.block(0, head * dh, t, dh) = dscores * kh;
        dk.block(0, head * dh, t, dh) = dscores.transpose() * qh;
      }
      if (train) {
        *gp("wq") += lc.x_in.transpose() * dq;
        *gp("bq") += dq.colwise().sum();
        *gp("wk") += lc.x_in.transpose() * dk;
        *gp("bk") += dk.colwise().sum();
        *gp("wv") += lc.x_in.transpose() * dv;
        *gp("bv") += dv.colwise().sum();
      }
      dx_in += dq * lp.wq.transpose();
      dx_in += dk * lp.wk.transpose();
      dx_in += dv * lp.wv.transpose();
      dx = std::move(dx_in);
    }

    // Embeddings.
    if (train_emb) {
      Mat<Scalar> demb = nn::ln_backward(dx, doc.emb_ln, model.emb.ln_g,
                                         &grads.at(kGroupEmb, "ln_g"),
                                         &grads.at(kGroupEmb, "ln_b"));
      for (int p = 0; p < t; ++p) {
        grads.at(kGroupEmb, "tok").row(doc.ids[static_cast<std::size_t>(p)]) +=
            demb.row(p);
        grads.at(kGroupEmb, "pos").row(p) += demb.row(p);
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic, version, canonical config text, then per-tensor
// records (group, name, shape, row-major little-endian float32).
// ---------------------------------------------------------------------------
namespace detail {

constexpr char kCheckpointMagic[4] = {'L', 'X', 'M', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string where)
      : data_(data), where_(std::move(where)) {}

  std::uint32_t u32() {
    require(pos_ + 4 <= data_.size(), where_, ": truncated checkpoint");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(data_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string bytes(std::size_t n) {
    require(pos_ + n <= data_.size(), where_, ": truncated checkpoint");
    std::string out(data_.substr(pos_, n));
    pos_ += n;
    return out;
  }

  bool exhausted() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  std::string where_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const EncoderModel<float>& model) {
  std::string out(detail::kCheckpointMagic, 4);
  detail::put_u32(out, detail::kCheckpointVersion);
  const std::string config_text = model.config().canonical_text();
  detail::put_u32(out, static_cast<std::uint32_t>(config_text.size()));
  out += config_text;
  std::uint32_t count = 0;
  model.visit([&](const std::string&, const std::string&, const Mat<float>&) {
    ++count;
  });
  detail::put_u32(out, count);
  model.visit([&](const std::string& g, const std::string& n,
                  const Mat<float>& m) {
    detail::put_u32(out, static_cast<std::uint32_t>(g.size()));
    out += g;
    detail::put_u32(out, static_cast<std::uint32_t>(n.size()));
    out += n;
    detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
    detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        detail::put_f32(out, m(r, c));
      }
    }
  });
  return out;
}

inline void save_checkpoint(const EncoderModel<float>& model,
                            const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(model));
}

inline EncoderModel<float> deserialize_checkpoint(std::string_view data,
                                                  const std::string& where) {
  detail::ByteReader r(data, where);
  const std::string magic = r.bytes(4);
  require(std::memcmp(magic.data(), detail::kCheckpointMagic, 4) == 0, where,
          ": not a lexmlc checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  require(version == detail::kCheckpointVersion, where,
          ": unsupported checkpoint version ", version);
  const std::uint32_t config_len = r.u32();
  const ModelConfig config = ModelConfig::from_text(r.bytes(config_len));

  EncoderModel<float> model(config, 0);
  std::set<std::pair<std::string, std::string>> filled;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string group = r.bytes(r.u32());
    const std::string name = r.bytes(r.u32());
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Mat<float>* param = model.find(group, name);
    require(param != nullptr, where, ": unexpected tensor ", group, "/", name);
    require(param->rows() == static_cast<Eigen::Index>(rows) &&
                param->cols() == static_cast<Eigen::Index>(cols),
            where, ": shape mismatch for ", group, "/", name, ": file has ",
            rows, "x", cols, ", config implies ", param->rows(), "x",
            param->cols());
    for (std::uint32_t rr = 0; rr < rows; ++rr) {
      for (std::uint32_t cc = 0; cc < cols; ++cc) {
        (*param)(static_cast<Eigen::Index>(rr), static_cast<Eigen::Index>(cc)) =
            r.f32();
      }
    }
    filled.insert({group, name});
  }
  require(r.exhausted(), where, ": trailing bytes after tensor records");
  std::size_t expected = 0;
  model.visit([&](const std::string&, const std::string&, const Mat<float>&) {
    ++expected;
  });
  require(filled.size() == expected, where, ": checkpoint holds ",
          filled.size(), " tensors, model needs ", expected);
  return model;
}

inline EncoderModel<float> load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path), path.string());
}

// Loads and additionally enforces an expected architecture, naming the first
// offending freeze-group when the file disagrees.
inline EncoderModel<float> load_checkpoint(const std::filesystem::path& path,
                                           const ModelConfig& expected) {
  EncoderModel<float> model = load_checkpoint(path);
  const ModelConfig& got = model.config();
  if (got != expected) {
    std::string group = "EMB";
    if (got.layers != expected.layers) {
      group = layer_group_name(std::min(got.layers, expected.layers) + 1);
    } else if (got.label_count != expected.label_count) {
      group = kGroupClsHead;
    } else if (got.vocab_size != expected.vocab_size) {
      group = kGroupMlmHead;
    }
    fail(path.string(), ": checkpoint architecture mismatch at group ", group,
         ": file config {", got.canonical_text(), "} vs expected {",
         expected.canonical_text(), "}");
  }
  return model;
}

inline std::uint64_t model_fingerprint(const EncoderModel<float>& model) {
  return fnv1a(serialize_checkpoint(model));
}

}  // namespace lexmlc
