#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "bokeh/net.hpp"
#include "bokeh/trainer.hpp"

namespace testing_support {

inline bokeh::NetConfig small_net_config(bokeh::ControlMode mode, int attention_after = 0) {
  bokeh::NetConfig c;
  c.latent_height = 8;
  c.latent_width = 8;
  c.latent_channels = 3;
  c.patch_size = 4;
  c.embed_dim = 12;
  c.mlp_hidden = 16;
  c.token_hidden = 6;
  c.n_blocks = 2;
  c.time_dim = 8;
  c.control_dim = 8;
  c.control_mode = mode;
  c.attention_after_block = attention_after;
  return c;
}

struct TensorError {
  std::string name;
  double max_rel = 0;
};

/// Central differences of sum(upstream * net(x)) against backward(), per
/// tensor. Relative error per entry is |a - n| / max(|a|, |n|, floor).
inline std::vector<TensorError> gradient_check(const bokeh::NetConfig& config, std::uint64_t seed,
                                               double h = 1e-4, double floor = 1e-6) {
  using namespace bokeh;
  VectorFieldNet net(config, seed);
  net.randomize_all(seed + 1, 1.0);
  std::mt19937_64 rng(seed + 2);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto latent = [&] {
    Latent z(config.latent_height, config.latent_width, config.latent_channels);
    for (double& v : z.data) v = n(rng);
    return z;
  };
  const Latent state = latent();
  const Latent aif = latent();
  const Latent upstream = latent();
  const double t = u(rng);
  const Conditioning cond = make_conditioning(u(rng), 50 * u(rng), config.control_dim);

  const Gradients analytic = net.backward(state, aif, cond, t, upstream);
  auto objective = [&] {
    const Latent y = net.forward(state, aif, cond, t);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * upstream.data[i];
    return s;
  };

  std::vector<TensorError> out;
  for (std::size_t k = 0; k < net.params().size(); ++k) {
    Matrix& w = net.params()[k];
    TensorError te{net.params().name(k), 0.0};
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double saved = w.data()[i];
      w.data()[i] = saved + h;
      const double fp = objective();
      w.data()[i] = saved - h;
      const double fm = objective();
      w.data()[i] = saved;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic[k].data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      te.max_rel = std::max(te.max_rel, rel);
    }
    out.push_back(te);
  }
  return out;
}

}  // namespace testing_support
