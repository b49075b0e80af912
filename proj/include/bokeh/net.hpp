#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "bokeh/control.hpp"
#include "bokeh/flow.hpp"

namespace bokeh {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct NamedTensor {
  std::string name;
  Matrix value;
};

/// Ordered collection of named 2-D tensors. Used both for parameters and for
/// their gradients, which share the same layout.
class ParamSet {
 public:
  std::size_t add(std::string name, int rows, int cols);
  std::size_t size() const { return tensors_.size(); }
  Matrix& operator[](std::size_t i) { return tensors_[i].value; }
  const Matrix& operator[](std::size_t i) const { return tensors_[i].value; }
  const std::string& name(std::size_t i) const { return tensors_[i].name; }
  std::vector<NamedTensor>& tensors() { return tensors_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  std::size_t parameter_count() const;
  ParamSet zeros_like() const;
  void set_zero();
  /// this += other (tensor-wise, shapes must agree).
  void add_inplace(const ParamSet& other);
  void scale(double factor);
  bool congruent(const ParamSet& other) const;
  bool all_finite() const;

 private:
  std::vector<NamedTensor> tensors_;
};

using Gradients = ParamSet;

enum class ControlMode { CrossAttention, Concatenation };

struct NetConfig {
  int latent_height = 64;
  int latent_width = 64;
  int latent_channels = 3;
  int patch_size = 8;
  int embed_dim = 64;
  int mlp_hidden = 128;
  int token_hidden = 64;
  int n_blocks = 2;
  int time_dim = 16;
  int control_dim = 16;
  ControlMode control_mode = ControlMode::CrossAttention;
  /// Cross-attention runs after this MLP block (0-based).
  int attention_after_block = 0;

  int grid_height() const { return latent_height / patch_size; }
  int grid_width() const { return latent_width / patch_size; }
  int tokens() const { return grid_height() * grid_width(); }
  int input_channels() const {
    return 2 * latent_channels + (control_mode == ControlMode::Concatenation ? 2 : 0);
  }
  int patch_in() const { return patch_size * patch_size * input_channels(); }
  int patch_out() const { return patch_size * patch_size * latent_channels; }
  void validate() const;
};

/// Conditioning available to the network. Cross-attention reads `embedding`;
/// the concatenation baseline reads the two scalars as constant input planes.
struct Conditioning {
  ControlEmbedding embedding;
  double focal_disparity = 0.5;
  double intensity = 0.0;
};

/// Intensity is divided by this before it becomes an input plane.
inline constexpr double kIntensityPlaneScale = 50.0;

/// x * sigmoid(1.702 x).
double gelu(double x);
double gelu_grad(double x);

/// softmax(Q K^T / sqrt(d)) V with Q = X Wq^T, K = C Wk^T, V = C Wv^T.
/// Rows of X and C are tokens. `weights`, if given, receives the attention
/// matrix (queries x controls).
Matrix cross_attention(const Matrix& queries_src, const Matrix& controls, const Matrix& w_q,
                       const Matrix& w_k, const Matrix& w_v, Matrix* weights = nullptr);

/// Intermediate activations of one forward pass, consumed by backward.
struct ForwardCache {
  struct Block {
    Matrix input;       // T x d
    Matrix token_pre;   // Th x d
    Matrix after_token; // T x d
    Matrix channel_pre; // T x H
  };
  struct Attention {
    Matrix input;     // T x d
    Matrix controls;  // n x dc
    Matrix q, k, v;   // T x d, n x d, n x d
    Matrix weights;   // T x n
    Matrix mixed;     // T x d
  };
  Matrix patches;                  // T x patch_in
  Eigen::RowVectorXd time_features;
  std::vector<Block> blocks;
  Attention attention;
  Matrix final_tokens;             // T x d
};

/// Vector-field regressor: patch embedding, time embedding, token/channel MLP
/// blocks, one cross-attention block against control tokens, and a linear
/// unpatch projection.
class VectorFieldNet {
 public:
  VectorFieldNet() = default;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, and a
  /// zero output projection.
  VectorFieldNet(const NetConfig& config, std::uint64_t seed);

  const NetConfig& config() const { return config_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Replaces every parameter (output projection included) with uniform
  /// random values in [-scale/sqrt(fan_in), scale/sqrt(fan_in)].
  void randomize_all(std::uint64_t seed, double scale = 1.0);

  Latent forward(const Latent& state, const Latent& aif, const Conditioning& cond, double t,
                 ForwardCache* cache = nullptr) const;

  /// Accumulates d(sum(upstream * output))/d(params) into `grads`.
  void backward(const ForwardCache& cache, const Latent& upstream, Gradients& grads) const;

  /// Convenience: fresh gradients for one sample.
  Gradients backward(const Latent& state, const Latent& aif, const Conditioning& cond, double t,
                     const Latent& upstream) const;

  /// Rebuilds a net around loaded parameters; validates names and shapes.
  static VectorFieldNet from_params(const NetConfig& config, ParamSet params);

 private:
  void build_layout();
  Matrix patchify(const Latent& state, const Latent& aif, const Conditioning& cond) const;
  Matrix control_matrix(const Conditioning& cond) const;

  NetConfig config_;
  ParamSet params_;

  struct BlockIndex {
    std::size_t tok_w1, tok_b1, tok_w2, tok_b2, ch_w1, ch_b1, ch_w2, ch_b2;
  };
  std::size_t embed_w_ = 0, embed_b_ = 0, time_w_ = 0, time_b_ = 0;
  std::vector<BlockIndex> blocks_;
  std::size_t attn_q_ = 0, attn_k_ = 0, attn_v_ = 0, attn_o_ = 0;
  std::size_t out_w_ = 0, out_b_ = 0;
  bool has_attention_ = false;
};

}  // namespace bokeh
