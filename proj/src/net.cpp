#include "bokeh/net.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string_view>

namespace bokeh {

// ---------------------------------------------------------------------------
// ParamSet

std::size_t ParamSet::add(std::string name, int rows, int cols) {
  tensors_.push_back({std::move(name), Matrix::Zero(rows, cols)});
  return tensors_.size() - 1;
}

std::size_t ParamSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& t : tensors_)
    out.add(t.name, static_cast<int>(t.value.rows()), static_cast<int>(t.value.cols()));
  return out;
}

void ParamSet::set_zero() {
  for (auto& t : tensors_) t.value.setZero();
}

void ParamSet::add_inplace(const ParamSet& other) {
  if (!congruent(other)) throw std::invalid_argument("parameter sets are not congruent");
  for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i].value += other.tensors_[i].value;
}

void ParamSet::scale(double factor) {
  for (auto& t : tensors_) t.value *= factor;
}

bool ParamSet::congruent(const ParamSet& other) const {
  if (tensors_.size() != other.tensors_.size()) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const auto& a = tensors_[i];
    const auto& b = other.tensors_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      return false;
  }
  return true;
}

bool ParamSet::all_finite() const {
  for (const auto& t : tensors_)
    if (!t.value.allFinite()) return false;
  return true;
}

// ---------------------------------------------------------------------------
// primitives

double gelu(double x) { return x / (1.0 + std::exp(-1.702 * x)); }

double gelu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-1.702 * x));
  return s + 1.702 * x * s * (1.0 - s);
}

namespace {

Matrix apply_gelu(const Matrix& m) { return m.unaryExpr([](double x) { return gelu(x); }); }

Matrix gelu_backward(const Matrix& pre, const Matrix& upstream) {
  return upstream.cwiseProduct(pre.unaryExpr([](double x) { return gelu_grad(x); }));
}

void softmax_rows(Matrix& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double mx = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - mx).exp();
    s.row(r) /= s.row(r).sum();
  }
}

constexpr double kTimeScale = 100.0;
constexpr double kTimeBase = 100.0;

}  // namespace

Matrix cross_attention(const Matrix& queries_src, const Matrix& controls, const Matrix& w_q,
                       const Matrix& w_k, const Matrix& w_v, Matrix* weights) {
  if (queries_src.cols() != w_q.cols() || controls.cols() != w_k.cols() ||
      controls.cols() != w_v.cols() || w_q.rows() != w_k.rows() || w_k.rows() != w_v.rows())
    throw std::invalid_argument("cross-attention dimension mismatch");
  const Matrix q = queries_src * w_q.transpose();
  const Matrix k = controls * w_k.transpose();
  const Matrix v = controls * w_v.transpose();
  Matrix s = (q * k.transpose()) / std::sqrt(static_cast<double>(q.cols()));
  softmax_rows(s);
  if (weights) *weights = s;
  return s * v;
}

// ---------------------------------------------------------------------------
// VectorFieldNet

void NetConfig::validate() const {
  if (latent_height <= 0 || latent_width <= 0 || latent_channels <= 0)
    throw std::invalid_argument("latent shape must be positive");
  if (patch_size <= 0 || latent_height % patch_size != 0 || latent_width % patch_size != 0)
    throw std::invalid_argument("latent size must be a multiple of the patch size");
  if (embed_dim <= 0 || mlp_hidden <= 0 || token_hidden <= 0 || n_blocks < 0)
    throw std::invalid_argument("network widths must be positive");
  if (time_dim < 2 || time_dim % 2 != 0) throw std::invalid_argument("time_dim must be even");
  if (control_dim < 8 || control_dim % 2 != 0)
    throw std::invalid_argument("control_dim must be even and >= 8");
  if (control_mode == ControlMode::CrossAttention &&
      (attention_after_block < 0 || attention_after_block >= std::max(n_blocks, 1)))
    throw std::invalid_argument("attention_after_block out of range");
}

void VectorFieldNet::build_layout() {
  const NetConfig& c = config_;
  params_ = ParamSet();
  blocks_.clear();
  embed_w_ = params_.add("embed.weight", c.embed_dim, c.patch_in());
  embed_b_ = params_.add("embed.bias", 1, c.embed_dim);
  time_w_ = params_.add("time.weight", c.embed_dim, c.time_dim);
  time_b_ = params_.add("time.bias", 1, c.embed_dim);
  for (int b = 0; b < c.n_blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    BlockIndex idx{};
    idx.tok_w1 = params_.add(p + "token.w1", c.token_hidden, c.tokens());
    idx.tok_b1 = params_.add(p + "token.b1", c.token_hidden, 1);
    idx.tok_w2 = params_.add(p + "token.w2", c.tokens(), c.token_hidden);
    idx.tok_b2 = params_.add(p + "token.b2", c.tokens(), 1);
    idx.ch_w1 = params_.add(p + "channel.w1", c.mlp_hidden, c.embed_dim);
    idx.ch_b1 = params_.add(p + "channel.b1", 1, c.mlp_hidden);
    idx.ch_w2 = params_.add(p + "channel.w2", c.embed_dim, c.mlp_hidden);
    idx.ch_b2 = params_.add(p + "channel.b2", 1, c.embed_dim);
    blocks_.push_back(idx);
  }
  has_attention_ = c.control_mode == ControlMode::CrossAttention;
  if (has_attention_) {
    attn_q_ = params_.add("attn.w_q", c.embed_dim, c.embed_dim);
    attn_k_ = params_.add("attn.w_k", c.embed_dim, c.control_dim);
    attn_v_ = params_.add("attn.w_v", c.embed_dim, c.control_dim);
    attn_o_ = params_.add("attn.w_o", c.embed_dim, c.embed_dim);
  }
  out_w_ = params_.add("out.weight", c.patch_out(), c.embed_dim);
  out_b_ = params_.add("out.bias", 1, c.patch_out());
}

namespace {

bool is_bias(const std::string& name) {
  auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with(".bias") || ends_with(".b1") || ends_with(".b2");
}

}  // namespace

VectorFieldNet::VectorFieldNet(const NetConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  build_layout();
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const std::string& name = params_.name(i);
    if (is_bias(name) || i == out_w_) continue;
    Matrix& w = params_[i];
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
  }
}

void VectorFieldNet::randomize_all(std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Matrix& w = params_[i];
    const std::size_t fan_in = is_bias(params_.name(i)) ? static_cast<std::size_t>(w.size())
                                                        : static_cast<std::size_t>(w.cols());
    const double bound = scale / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = dist(rng);
  }
}

VectorFieldNet VectorFieldNet::from_params(const NetConfig& config, ParamSet params) {
  VectorFieldNet net;
  net.config_ = config;
  net.config_.validate();
  net.build_layout();
  if (!net.params_.congruent(params))
    throw std::invalid_argument("parameters do not match the network layout");
  if (!params.all_finite()) throw std::invalid_argument("parameters contain non-finite values");
  net.params_ = std::move(params);
  return net;
}

Matrix VectorFieldNet::patchify(const Latent& state, const Latent& aif,
                                const Conditioning& cond) const {
  const NetConfig& c = config_;
  if (state.height != c.latent_height || state.width != c.latent_width ||
      state.channels != c.latent_channels)
    throw std::invalid_argument("state latent does not match the network shape");
  if (!state.same_shape(aif)) throw std::invalid_argument("state and aif latents differ in shape");
  const int p = c.patch_size;
  const int cin = c.input_channels();
  const int lc = c.latent_channels;
  Matrix x(c.tokens(), c.patch_in());
  const bool concat = c.control_mode == ControlMode::Concatenation;
  const double df = cond.focal_disparity;
  const double alpha = cond.intensity / kIntensityPlaneScale;
  for (int gy = 0; gy < c.grid_height(); ++gy) {
    for (int gx = 0; gx < c.grid_width(); ++gx) {
      const int token = gy * c.grid_width() + gx;
      for (int py = 0; py < p; ++py) {
        for (int px = 0; px < p; ++px) {
          const int y = gy * p + py;
          const int xx = gx * p + px;
          const int base = (py * p + px) * cin;
          for (int ch = 0; ch < lc; ++ch) {
            x(token, base + ch) = state.at(y, xx, ch);
            x(token, base + lc + ch) = aif.at(y, xx, ch);
          }
          if (concat) {
            x(token, base + 2 * lc) = df;
            x(token, base + 2 * lc + 1) = alpha;
          }
        }
      }
    }
  }
  return x;
}

Matrix VectorFieldNet::control_matrix(const Conditioning& cond) const {
  const auto& emb = cond.embedding;
  if (emb.dim != config_.control_dim)
    throw std::invalid_argument("control embedding width does not match the network");
  Matrix m(ControlEmbedding::kTokenCount, emb.dim);
  for (int r = 0; r < ControlEmbedding::kTokenCount; ++r)
    for (int k = 0; k < emb.dim; ++k) m(r, k) = emb.tokens[r][k];
  return m;
}

Latent VectorFieldNet::forward(const Latent& state, const Latent& aif, const Conditioning& cond,
                               double t, ForwardCache* cache) const {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("time must lie in [0,1]");
  const NetConfig& c = config_;
  ForwardCache local;
  ForwardCache& fc = cache ? *cache : local;

  fc.patches = patchify(state, aif, cond);
  const auto tf = sinusoidal_features(t * kTimeScale, c.time_dim / 2, kTimeBase);
  fc.time_features = Eigen::Map<const Eigen::RowVectorXd>(tf.data(), c.time_dim);

  const Eigen::RowVectorXd time_embed =
      fc.time_features * params_[time_w_].transpose() + params_[time_b_];
  Matrix h = fc.patches * params_[embed_w_].transpose();
  h.rowwise() += params_[embed_b_].row(0) + time_embed;

  fc.blocks.resize(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const BlockIndex& bi = blocks_[b];
    auto& bc = fc.blocks[b];
    bc.input = h;
    bc.token_pre = params_[bi.tok_w1] * h;
    bc.token_pre.colwise() += params_[bi.tok_b1].col(0);
    Matrix mixed = params_[bi.tok_w2] * apply_gelu(bc.token_pre);
    mixed.colwise() += params_[bi.tok_b2].col(0);
    h += mixed;
    bc.after_token = h;
    bc.channel_pre = h * params_[bi.ch_w1].transpose();
    bc.channel_pre.rowwise() += params_[bi.ch_b1].row(0);
    Matrix ch = apply_gelu(bc.channel_pre) * params_[bi.ch_w2].transpose();
    ch.rowwise() += params_[bi.ch_b2].row(0);
    h += ch;

    if (has_attention_ && static_cast<int>(b) == c.attention_after_block) {
      auto& ac = fc.attention;
      ac.input = h;
      ac.controls = control_matrix(cond);
      ac.q = h * params_[attn_q_].transpose();
      ac.k = ac.controls * params_[attn_k_].transpose();
      ac.v = ac.controls * params_[attn_v_].transpose();
      ac.weights = (ac.q * ac.k.transpose()) / std::sqrt(static_cast<double>(c.embed_dim));
      softmax_rows(ac.weights);
      ac.mixed = ac.weights * ac.v;
      h += ac.mixed * params_[attn_o_].transpose();
    }
  }
  fc.final_tokens = h;

  Matrix y = h * params_[out_w_].transpose();
  y.rowwise() += params_[out_b_].row(0);

  const int p = c.patch_size;
  const int lc = c.latent_channels;
  Latent out(c.latent_height, c.latent_width, lc);
  for (int gy = 0; gy < c.grid_height(); ++gy)
    for (int gx = 0; gx < c.grid_width(); ++gx) {
      const int token = gy * c.grid_width() + gx;
      for (int py = 0; py < p; ++py)
        for (int px = 0; px < p; ++px)
          for (int ch = 0; ch < lc; ++ch)
            out.at(gy * p + py, gx * p + px, ch) = y(token, (py * p + px) * lc + ch);
    }
  return out;
}

void VectorFieldNet::backward(const ForwardCache& fc, const Latent& upstream,
                              Gradients& grads) const {
  const NetConfig& c = config_;
  if (!grads.congruent(params_)) throw std::invalid_argument("gradient layout mismatch");
  if (upstream.height != c.latent_height || upstream.width != c.latent_width ||
      upstream.channels != c.latent_channels)
    throw std::invalid_argument("upstream latent does not match the network shape");

  const int p = c.patch_size;
  const int lc = c.latent_channels;
  Matrix dy(c.tokens(), c.patch_out());
  for (int gy = 0; gy < c.grid_height(); ++gy)
    for (int gx = 0; gx < c.grid_width(); ++gx) {
      const int token = gy * c.grid_width() + gx;
      for (int py = 0; py < p; ++py)
        for (int px = 0; px < p; ++px)
          for (int ch = 0; ch < lc; ++ch)
            dy(token, (py * p + px) * lc + ch) = upstream.at(gy * p + py, gx * p + px, ch);
    }

  grads[out_w_].noalias() += dy.transpose() * fc.final_tokens;
  grads[out_b_] += dy.colwise().sum();
  Matrix dh = dy * params_[out_w_];

  for (std::size_t bb = blocks_.size(); bb-- > 0;) {
    const BlockIndex& bi = blocks_[bb];
    const auto& bc = fc.blocks[bb];

    if (has_attention_ && static_cast<int>(bb) == c.attention_after_block) {
      const auto& ac = fc.attention;
      grads[attn_o_].noalias() += dh.transpose() * ac.mixed;
      const Matrix d_mixed = dh * params_[attn_o_];
      const Matrix d_weights = d_mixed * ac.v.transpose();
      const Matrix d_v = ac.weights.transpose() * d_mixed;
      Matrix d_scores = ac.weights.cwiseProduct(d_weights);
      const Eigen::VectorXd row_dot = d_scores.rowwise().sum();
      d_scores -= ac.weights.cwiseProduct(row_dot.replicate(1, ac.weights.cols()));
      const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(c.embed_dim));
      const Matrix d_q = d_scores * ac.k * inv_sqrt;
      const Matrix d_k = d_scores.transpose() * ac.q * inv_sqrt;
      grads[attn_q_].noalias() += d_q.transpose() * ac.input;
      grads[attn_k_].noalias() += d_k.transpose() * ac.controls;
      grads[attn_v_].noalias() += d_v.transpose() * ac.controls;
      dh += d_q * params_[attn_q_];
    }

    // channel MLP
    const Matrix act = apply_gelu(bc.channel_pre);
    grads[bi.ch_w2].noalias() += dh.transpose() * act;
    grads[bi.ch_b2] += dh.colwise().sum();
    const Matrix d_pre = gelu_backward(bc.channel_pre, dh * params_[bi.ch_w2]);
    grads[bi.ch_w1].noalias() += d_pre.transpose() * bc.after_token;
    grads[bi.ch_b1] += d_pre.colwise().sum();
    dh += d_pre * params_[bi.ch_w1];

    // token MLP
    const Matrix tok_act = apply_gelu(bc.token_pre);
    grads[bi.tok_w2].noalias() += dh * tok_act.transpose();
    grads[bi.tok_b2] += dh.rowwise().sum();
    const Matrix d_tok = gelu_backward(bc.token_pre, params_[bi.tok_w2].transpose() * dh);
    grads[bi.tok_w1].noalias() += d_tok * bc.input.transpose();
    grads[bi.tok_b1] += d_tok.rowwise().sum();
    dh += params_[bi.tok_w1].transpose() * d_tok;
  }

  const Eigen::RowVectorXd d_time = dh.colwise().sum();
  grads[time_w_].noalias() += d_time.transpose() * fc.time_features;
  grads[time_b_] += d_time;
  grads[embed_w_].noalias() += dh.transpose() * fc.patches;
  grads[embed_b_] += d_time;
}

Gradients VectorFieldNet::backward(const Latent& state, const Latent& aif,
                                   const Conditioning& cond, double t,
                                   const Latent& upstream) const {
  ForwardCache cache;
  forward(state, aif, cond, t, &cache);
  Gradients grads = params_.zeros_like();
  backward(cache, upstream, grads);
  return grads;
}

}  // namespace bokeh
