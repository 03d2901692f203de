#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "finkey/rng.hpp"
#include "finkey/tokenizer.hpp"

namespace finkey {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ff = 256;
  std::size_t max_len = 128;
  double dropout_rate = 0.1;

  /// Throws ConfigError on zero dims, d_model % n_heads != 0 or a dropout
  /// rate outside [0, 1).
  void validate() const;
  std::size_t head_dim() const { return d_model / n_heads; }

  bool operator==(const EncoderConfig&) const = default;
};

/// One post-norm transformer block. Biases and layer-norm vectors are 1 x n.
template <typename T>
struct LayerParams {
  Matrix<T> wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix<T> w1, b1, w2, b2;
  Matrix<T> ln1_gamma, ln1_beta, ln2_gamma, ln2_beta;
};

template <typename T>
struct EncoderParams {
  Matrix<T> embedding;  // vocab_size x d_model
  std::vector<LayerParams<T>> layers;

  /// Visits every tensor as f(name, matrix) in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    f(std::string("embedding"), embedding);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      auto& L = layers[l];
      f(p + "wq", L.wq), f(p + "bq", L.bq), f(p + "wk", L.wk), f(p + "bk", L.bk);
      f(p + "wv", L.wv), f(p + "bv", L.bv), f(p + "wo", L.wo), f(p + "bo", L.bo);
      f(p + "w1", L.w1), f(p + "b1", L.b1), f(p + "w2", L.w2), f(p + "b2", L.b2);
      f(p + "ln1_gamma", L.ln1_gamma), f(p + "ln1_beta", L.ln1_beta);
      f(p + "ln2_gamma", L.ln2_gamma), f(p + "ln2_beta", L.ln2_beta);
    }
  }
  template <typename F>
  void for_each(F&& f) const {
    const_cast<EncoderParams*>(this)->for_each(
        [&](const std::string& name, Matrix<T>& m) { f(name, static_cast<const Matrix<T>&>(m)); });
  }

  /// Same shapes, all zeros (gradient buffers, optimizer moments).
  static EncoderParams zeros(const EncoderConfig& config);
  void set_zero();
  std::size_t parameter_count() const;
  bool all_finite() const;
};

template <typename To, typename From>
EncoderParams<To> cast_params(const EncoderParams<From>& in) {
  EncoderParams<To> out;
  out.embedding = in.embedding.template cast<To>();
  for (const auto& L : in.layers) {
    LayerParams<To> o;
    o.wq = L.wq.template cast<To>(), o.bq = L.bq.template cast<To>();
    o.wk = L.wk.template cast<To>(), o.bk = L.bk.template cast<To>();
    o.wv = L.wv.template cast<To>(), o.bv = L.bv.template cast<To>();
    o.wo = L.wo.template cast<To>(), o.bo = L.bo.template cast<To>();
    o.w1 = L.w1.template cast<To>(), o.b1 = L.b1.template cast<To>();
    o.w2 = L.w2.template cast<To>(), o.b2 = L.b2.template cast<To>();
    o.ln1_gamma = L.ln1_gamma.template cast<To>(), o.ln1_beta = L.ln1_beta.template cast<To>();
    o.ln2_gamma = L.ln2_gamma.template cast<To>(), o.ln2_beta = L.ln2_beta.template cast<To>();
    out.layers.push_back(std::move(o));
  }
  return out;
}

/// Xavier-uniform weights, zero biases, unit layer-norm scale.
template <typename T>
EncoderParams<T> init_params(const EncoderConfig& config, Rng& rng);

template <typename T>
EncoderParams<T> init_params(const EncoderConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return init_params<T>(config, rng);
}

template <typename T>
struct PooledOutput {
  RowVector<T> sentence_vec;  // hidden state at the CLS position
  Matrix<T> token_vecs;       // max_len x d_model
};

/// Activations recorded by forward for backward. `rows` is the number of
/// positions actually computed (max_len, or the real length when padding
/// rows were skipped).
template <typename T>
struct LayerCache {
  Matrix<T> input;
  Matrix<T> q, k, v;
  std::vector<Matrix<T>> attention;  // per head, rows x rows softmax weights
  Matrix<T> context;
  Matrix<T> attn_dropout;            // empty when dropout is inactive
  Matrix<T> ln1_xhat, ln1_inv_std;   // inv_std is rows x 1
  Matrix<T> h1;
  Matrix<T> ff_pre, ff_act;
  Matrix<T> ff_dropout;
  Matrix<T> ln2_xhat, ln2_inv_std;
};

template <typename T>
struct ForwardCache {
  std::size_t rows = 0;
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> key_mask;
  Matrix<T> embed_dropout;
  std::vector<LayerCache<T>> layers;
};

/// Fixed sinusoidal position table, max_len x d_model.
template <typename T>
Matrix<T> positional_encoding(std::size_t max_len, std::size_t d_model);

/// Full encoder pass over all max_len positions. Padded keys get zero
/// attention weight. Dropout is applied only when `training` (rng required).
/// Throws ConfigError for a sequence of the wrong length or an id outside the
/// vocabulary.
template <typename T>
PooledOutput<T> forward(const EncoderParams<T>& params, const EncoderConfig& config,
                        const TokenSequence& seq, bool training, Rng* rng,
                        ForwardCache<T>* cache = nullptr);

/// Same as forward but computes only the leading real positions; padded rows
/// of token_vecs are left zero. Real-position outputs match forward.
template <typename T>
PooledOutput<T> forward_real(const EncoderParams<T>& params, const EncoderConfig& config,
                             const TokenSequence& seq, bool training, Rng* rng,
                             ForwardCache<T>* cache = nullptr);

/// Reverse-mode pass. Adds parameter gradients into `grads` given the
/// upstream gradients on the pooled vector and on the token matrix (either
/// may be empty). Only the first cache.rows rows of d_token_vecs are read.
template <typename T>
void accumulate_backward(const EncoderParams<T>& params, const EncoderConfig& config,
                         const ForwardCache<T>& cache, const RowVector<T>& d_sentence_vec,
                         const Matrix<T>& d_token_vecs, EncoderParams<T>& grads);

template <typename T>
EncoderParams<T> backward(const EncoderParams<T>& params, const EncoderConfig& config,
                          const ForwardCache<T>& cache, const RowVector<T>& d_sentence_vec,
                          const Matrix<T>& d_token_vecs) {
  auto grads = EncoderParams<T>::zeros(config);
  accumulate_backward(params, config, cache, d_sentence_vec, d_token_vecs, grads);
  return grads;
}

/// L2-normalised term frequencies over the tokens that came from text
/// (positions with an offset). Zero vector when there are none.
std::vector<double> bow_encode(const TokenSequence& seq, std::size_t vocab_size);

}  // namespace finkey
