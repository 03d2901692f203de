#include "finkey/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "finkey/errors.hpp"

namespace finkey {

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename T>
Matrix<T> xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<T>(rng.uniform(-bound, bound));
  return m;
}

template <typename T>
Matrix<T> zeros(std::size_t rows, std::size_t cols) {
  return Matrix<T>::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
Matrix<T> ones(std::size_t rows, std::size_t cols) {
  return Matrix<T>::Ones(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
T gelu(T x) {
  return static_cast<T>(0.5) * x * (static_cast<T>(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = static_cast<T>(0.5) * (static_cast<T>(1) + std::erf(x * static_cast<T>(M_SQRT1_2)));
  const T pdf = std::exp(static_cast<T>(-0.5) * x * x) * static_cast<T>(0.3989422804014327);
  return cdf + x * pdf;
}

template <typename T>
Matrix<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix<T> m(rows, cols);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.bernoulli(rate) ? T(0) : scale;
  return m;
}

// y = gamma * xhat + beta, row-wise statistics
template <typename T>
Matrix<T> layer_norm(const Matrix<T>& x, const Matrix<T>& gamma, const Matrix<T>& beta,
                     Matrix<T>& xhat, Matrix<T>& inv_std) {
  const Eigen::Index n = x.rows(), d = x.cols();
  xhat.resize(n, d);
  inv_std.resize(n, 1);
  Matrix<T> y(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    const T var = (x.row(i).array() - mean).square().mean();
    const T is = static_cast<T>(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    inv_std(i, 0) = is;
    xhat.row(i) = (x.row(i).array() - mean) * is;
    y.row(i) = xhat.row(i).cwiseProduct(gamma.row(0)) + beta.row(0);
  }
  return y;
}

template <typename T>
Matrix<T> layer_norm_backward(const Matrix<T>& dy, const Matrix<T>& gamma, const Matrix<T>& xhat,
                              const Matrix<T>& inv_std, Matrix<T>& d_gamma, Matrix<T>& d_beta) {
  const Eigen::Index n = dy.rows();
  d_gamma.row(0) += dy.cwiseProduct(xhat).colwise().sum();
  d_beta.row(0) += dy.colwise().sum();
  Matrix<T> dx(n, dy.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowVector<T> g = dy.row(i).cwiseProduct(gamma.row(0));
    const T mean_g = g.mean();
    const T mean_gx = g.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) = inv_std(i, 0) * (g.array() - mean_g - xhat.row(i).array() * mean_gx).matrix();
  }
  return dx;
}

template <typename T>
PooledOutput<T> run_forward(const EncoderParams<T>& params, const EncoderConfig& config,
                            const TokenSequence& seq, bool training, Rng* rng,
                            ForwardCache<T>* cache, bool real_only) {
  if (seq.length() != config.max_len) {
    throw ConfigError("sequence length " + std::to_string(seq.length()) + " != max_len " +
                      std::to_string(config.max_len));
  }
  for (auto id : seq.ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config.vocab_size) {
      throw ConfigError("token id " + std::to_string(id) + " outside vocabulary of size " +
                        std::to_string(config.vocab_size));
    }
  }
  const bool dropout = training && config.dropout_rate > 0.0;
  if (dropout && rng == nullptr) throw ConfigError("training forward needs an rng");

  const std::size_t rows = real_only ? std::max<std::size_t>(seq.real_length(), 1) : config.max_len;
  const auto n = static_cast<Eigen::Index>(rows);
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto dh = static_cast<Eigen::Index>(config.head_dim());
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  ForwardCache<T> local;
  ForwardCache<T>& c = cache ? *cache : local;
  c.rows = rows;
  c.ids.assign(seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(rows));
  c.key_mask.assign(seq.attention_mask.begin(),
                    seq.attention_mask.begin() + static_cast<std::ptrdiff_t>(rows));
  c.layers.assign(config.n_layers, LayerCache<T>{});

  static thread_local Matrix<T> pe;
  if (static_cast<std::size_t>(pe.rows()) < rows || pe.cols() != d) {
    pe = positional_encoding<T>(std::max(rows, config.max_len), config.d_model);
  }

  // embeddings are scaled up so token identity is not drowned by the unit-amplitude position table
  const T embed_scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
  Matrix<T> x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) x.row(i) = embed_scale * params.embedding.row(c.ids[i]) + pe.row(i);
  if (dropout) {
    c.embed_dropout = dropout_mask<T>(n, d, config.dropout_rate, *rng);
    x.array() *= c.embed_dropout.array();
  } else {
    c.embed_dropout.resize(0, 0);
  }

  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const auto& L = params.layers[l];
    auto& lc = c.layers[l];
    lc.input = x;
    lc.q.noalias() = x * L.wq;
    lc.q.rowwise() += L.bq.row(0);
    lc.k.noalias() = x * L.wk;
    lc.k.rowwise() += L.bk.row(0);
    lc.v.noalias() = x * L.wv;
    lc.v.rowwise() += L.bv.row(0);

    lc.context.resize(n, d);
    lc.attention.resize(config.n_heads);
    for (std::size_t h = 0; h < config.n_heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
      Matrix<T> s;
      s.noalias() = lc.q.middleCols(off, dh) * lc.k.middleCols(off, dh).transpose();
      s *= scale;
      for (Eigen::Index i = 0; i < n; ++i) {
        T row_max = neg_inf;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (!c.key_mask[j]) s(i, j) = neg_inf;
          else row_max = std::max(row_max, s(i, j));
        }
        T sum = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
          const T e = c.key_mask[j] ? std::exp(s(i, j) - row_max) : T(0);
          s(i, j) = e;
          sum += e;
        }
        s.row(i) /= sum;
      }
      lc.context.middleCols(off, dh).noalias() = s * lc.v.middleCols(off, dh);
      lc.attention[h] = std::move(s);
    }

    Matrix<T> attn_out;
    attn_out.noalias() = lc.context * L.wo;
    attn_out.rowwise() += L.bo.row(0);
    if (dropout) {
      lc.attn_dropout = dropout_mask<T>(n, d, config.dropout_rate, *rng);
      attn_out.array() *= lc.attn_dropout.array();
    }
    Matrix<T> r1 = x + attn_out;
    lc.h1 = layer_norm(r1, L.ln1_gamma, L.ln1_beta, lc.ln1_xhat, lc.ln1_inv_std);

    lc.ff_pre.noalias() = lc.h1 * L.w1;
    lc.ff_pre.rowwise() += L.b1.row(0);
    lc.ff_act = lc.ff_pre.unaryExpr([](T v) { return gelu(v); });
    Matrix<T> ff_out;
    ff_out.noalias() = lc.ff_act * L.w2;
    ff_out.rowwise() += L.b2.row(0);
    if (dropout) {
      lc.ff_dropout = dropout_mask<T>(n, d, config.dropout_rate, *rng);
      ff_out.array() *= lc.ff_dropout.array();
    }
    Matrix<T> r2 = lc.h1 + ff_out;
    x = layer_norm(r2, L.ln2_gamma, L.ln2_beta, lc.ln2_xhat, lc.ln2_inv_std);
  }

  PooledOutput<T> out;
  out.token_vecs = Matrix<T>::Zero(static_cast<Eigen::Index>(config.max_len), d);
  out.token_vecs.topRows(n) = x;
  out.sentence_vec = x.row(0);
  return out;
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size < 1 || d_model < 1 || n_heads < 1 || n_layers < 1 || d_ff < 1 || max_len < 1) {
    throw ConfigError("encoder dimensions must all be >= 1");
  }
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }
}

template <typename T>
EncoderParams<T> EncoderParams<T>::zeros(const EncoderConfig& config) {
  const std::size_t d = config.d_model, f = config.d_ff;
  EncoderParams<T> p;
  p.embedding = finkey::zeros<T>(config.vocab_size, d);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    LayerParams<T> L;
    L.wq = finkey::zeros<T>(d, d), L.bq = finkey::zeros<T>(1, d);
    L.wk = finkey::zeros<T>(d, d), L.bk = finkey::zeros<T>(1, d);
    L.wv = finkey::zeros<T>(d, d), L.bv = finkey::zeros<T>(1, d);
    L.wo = finkey::zeros<T>(d, d), L.bo = finkey::zeros<T>(1, d);
    L.w1 = finkey::zeros<T>(d, f), L.b1 = finkey::zeros<T>(1, f);
    L.w2 = finkey::zeros<T>(f, d), L.b2 = finkey::zeros<T>(1, d);
    L.ln1_gamma = finkey::zeros<T>(1, d), L.ln1_beta = finkey::zeros<T>(1, d);
    L.ln2_gamma = finkey::zeros<T>(1, d), L.ln2_beta = finkey::zeros<T>(1, d);
    p.layers.push_back(std::move(L));
  }
  return p;
}

template <typename T>
void EncoderParams<T>::set_zero() {
  for_each([](const std::string&, Matrix<T>& m) { m.setZero(); });
}

template <typename T>
std::size_t EncoderParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix<T>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename T>
bool EncoderParams<T>::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Matrix<T>& m) { ok = ok && m.allFinite(); });
  return ok;
}

template <typename T>
EncoderParams<T> init_params(const EncoderConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.d_model, f = config.d_ff;
  EncoderParams<T> p;
  p.embedding = xavier<T>(config.vocab_size, d, rng);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    LayerParams<T> L;
    L.wq = xavier<T>(d, d, rng), L.bq = zeros<T>(1, d);
    L.wk = xavier<T>(d, d, rng), L.bk = zeros<T>(1, d);
    L.wv = xavier<T>(d, d, rng), L.bv = zeros<T>(1, d);
    L.wo = xavier<T>(d, d, rng), L.bo = zeros<T>(1, d);
    L.w1 = xavier<T>(d, f, rng), L.b1 = zeros<T>(1, f);
    L.w2 = xavier<T>(f, d, rng), L.b2 = zeros<T>(1, d);
    L.ln1_gamma = ones<T>(1, d), L.ln1_beta = zeros<T>(1, d);
    L.ln2_gamma = ones<T>(1, d), L.ln2_beta = zeros<T>(1, d);
    p.layers.push_back(std::move(L));
  }
  return p;
}

template <typename T>
Matrix<T> positional_encoding(std::size_t max_len, std::size_t d_model) {
  Matrix<T> pe(static_cast<Eigen::Index>(max_len), static_cast<Eigen::Index>(d_model));
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double pair = static_cast<double>(i - i % 2);
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, pair / static_cast<double>(d_model));
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(i)) =
          static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <typename T>
PooledOutput<T> forward(const EncoderParams<T>& params, const EncoderConfig& config,
                        const TokenSequence& seq, bool training, Rng* rng, ForwardCache<T>* cache) {
  return run_forward(params, config, seq, training, rng, cache, false);
}

template <typename T>
PooledOutput<T> forward_real(const EncoderParams<T>& params, const EncoderConfig& config,
                             const TokenSequence& seq, bool training, Rng* rng,
                             ForwardCache<T>* cache) {
  return run_forward(params, config, seq, training, rng, cache, true);
}

template <typename T>
void accumulate_backward(const EncoderParams<T>& params, const EncoderConfig& config,
                         const ForwardCache<T>& cache, const RowVector<T>& d_sentence_vec,
                         const Matrix<T>& d_token_vecs, EncoderParams<T>& grads) {
  const auto n = static_cast<Eigen::Index>(cache.rows);
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto dh = static_cast<Eigen::Index>(config.head_dim());
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  Matrix<T> dx = Matrix<T>::Zero(n, d);
  if (d_token_vecs.size() > 0) dx += d_token_vecs.topRows(n);
  if (d_sentence_vec.size() > 0) dx.row(0) += d_sentence_vec;

  for (std::size_t li = config.n_layers; li-- > 0;) {
    const auto& L = params.layers[li];
    const auto& lc = cache.layers[li];
    auto& G = grads.layers[li];

    // second sub-block: Y = LN2(h1 + dropout(gelu(h1 W1 + b1) W2 + b2))
    Matrix<T> d_r2 = layer_norm_backward(dx, L.ln2_gamma, lc.ln2_xhat, lc.ln2_inv_std,
                                         G.ln2_gamma, G.ln2_beta);
    Matrix<T> d_ff = d_r2;
    if (lc.ff_dropout.size() > 0) d_ff.array() *= lc.ff_dropout.array();
    G.w2.noalias() += lc.ff_act.transpose() * d_ff;
    G.b2.row(0) += d_ff.colwise().sum();
    Matrix<T> d_pre;
    d_pre.noalias() = d_ff * L.w2.transpose();
    d_pre.array() *= lc.ff_pre.unaryExpr([](T v) { return gelu_grad(v); }).array();
    G.w1.noalias() += lc.h1.transpose() * d_pre;
    G.b1.row(0) += d_pre.colwise().sum();
    Matrix<T> d_h1 = d_r2;
    d_h1.noalias() += d_pre * L.w1.transpose();

    // first sub-block: h1 = LN1(x + dropout(attention(x) Wo + bo))
    Matrix<T> d_r1 = layer_norm_backward(d_h1, L.ln1_gamma, lc.ln1_xhat, lc.ln1_inv_std,
                                         G.ln1_gamma, G.ln1_beta);
    Matrix<T> d_attn = d_r1;
    if (lc.attn_dropout.size() > 0) d_attn.array() *= lc.attn_dropout.array();
    G.wo.noalias() += lc.context.transpose() * d_attn;
    G.bo.row(0) += d_attn.colwise().sum();
    Matrix<T> d_ctx;
    d_ctx.noalias() = d_attn * L.wo.transpose();

    Matrix<T> dq(n, d), dk(n, d), dv(n, d);
    for (std::size_t h = 0; h < config.n_heads; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * dh;
      const Matrix<T>& a = lc.attention[h];
      const auto d_ctx_h = d_ctx.middleCols(off, dh);
      dv.middleCols(off, dh).noalias() = a.transpose() * d_ctx_h;
      Matrix<T> da;
      da.noalias() = d_ctx_h * lc.v.middleCols(off, dh).transpose();
      // softmax backward: ds = a * (da - rowsum(da * a))
      const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = da.cwiseProduct(a).rowwise().sum();
      Matrix<T> ds = a.cwiseProduct((da.colwise() - dot));
      ds *= scale;
      dq.middleCols(off, dh).noalias() = ds * lc.k.middleCols(off, dh);
      dk.middleCols(off, dh).noalias() = ds.transpose() * lc.q.middleCols(off, dh);
    }
    G.wq.noalias() += lc.input.transpose() * dq;
    G.bq.row(0) += dq.colwise().sum();
    G.wk.noalias() += lc.input.transpose() * dk;
    G.bk.row(0) += dk.colwise().sum();
    G.wv.noalias() += lc.input.transpose() * dv;
    G.bv.row(0) += dv.colwise().sum();

    dx = d_r1;
    dx.noalias() += dq * L.wq.transpose();
    dx.noalias() += dk * L.wk.transpose();
    dx.noalias() += dv * L.wv.transpose();
  }

  if (cache.embed_dropout.size() > 0) dx.array() *= cache.embed_dropout.array();
  const T embed_scale = static_cast<T>(std::sqrt(static_cast<double>(dx.cols())));
  for (Eigen::Index i = 0; i < n; ++i) grads.embedding.row(cache.ids[i]) += embed_scale * dx.row(i);
}

std::vector<double> bow_encode(const TokenSequence& seq, std::size_t vocab_size) {
  std::vector<double> v(vocab_size, 0.0);
  for (std::size_t i = 0; i < seq.length(); ++i) {
    if (!seq.attention_mask[i] || !seq.offsets[i]) continue;
    const auto id = static_cast<std::size_t>(seq.ids[i]);
    if (id >= vocab_size) throw ConfigError("token id outside vocabulary in bow_encode");
    v[id] += 1.0;
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;
template EncoderParams<float> init_params<float>(const EncoderConfig&, Rng&);
template EncoderParams<double> init_params<double>(const EncoderConfig&, Rng&);
template Matrix<float> positional_encoding<float>(std::size_t, std::size_t);
template Matrix<double> positional_encoding<double>(std::size_t, std::size_t);
template PooledOutput<float> forward(const EncoderParams<float>&, const EncoderConfig&,
                                     const TokenSequence&, bool, Rng*, ForwardCache<float>*);
template PooledOutput<double> forward(const EncoderParams<double>&, const EncoderConfig&,
                                      const TokenSequence&, bool, Rng*, ForwardCache<double>*);
template PooledOutput<float> forward_real(const EncoderParams<float>&, const EncoderConfig&,
                                          const TokenSequence&, bool, Rng*, ForwardCache<float>*);
template PooledOutput<double> forward_real(const EncoderParams<double>&, const EncoderConfig&,
                                           const TokenSequence&, bool, Rng*, ForwardCache<double>*);
template void accumulate_backward(const EncoderParams<float>&, const EncoderConfig&,
                                  const ForwardCache<float>&, const RowVector<float>&,
                                  const Matrix<float>&, EncoderParams<float>&);
template void accumulate_backward(const EncoderParams<double>&, const EncoderConfig&,
                                  const ForwardCache<double>&, const RowVector<double>&,
                                  const Matrix<double>&, EncoderParams<double>&);

}  // namespace finkey
