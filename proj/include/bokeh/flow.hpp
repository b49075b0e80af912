#pragma once

#include <functional>
#include <vector>

namespace bokeh {

/// H x W x C latent tensor, row-major with channels innermost.
struct Latent {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Latent() = default;
  Latent(int h, int w, int c);
  Latent(int h, int w, int c, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  bool same_shape(const Latent& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  /// Throws if any entry is non-finite.
  void check_finite() const;
};

enum class PathSource { Noise, AllInFocus };
enum class LossMode { Velocity, Residual };

/// One point on the straight path from `source` to `target` at time t.
struct PathSample {
  Latent source;
  Latent target;
  double t = 0.0;
  Latent state;

  /// Validates shapes, t in [0,1], and state == t*target + (1-t)*source
  /// within 1e-6.
  PathSample(Latent source, Latent target, double t, Latent state);
};

/// state = t * target + (1 - t) * source.
PathSample interpolate(const Latent& source, const Latent& target, double t);

/// target - source: the constant velocity of the straight path.
Latent velocity_target(const PathSample& sample);

/// target - state, which equals (1 - t) * velocity_target.
Latent residual_target(const PathSample& sample);

/// Mean squared error of `pred` against the velocity or residual target.
double fm_loss(const Latent& pred, const PathSample& sample, LossMode mode);

double mean_squared_error(const Latent& a, const Latent& b);

/// Predictor of the field at (state, t). Conditioning is bound by the caller.
using Predictor = std::function<Latent(const Latent& state, double t)>;

/// Integrates from t=0 to t=1 over `steps` uniform intervals.
///
/// Velocity: Euler, state += dt * pred. Residual: the prediction is the full
/// remaining displacement, so a step from t to t2 moves
/// (t2 - t) / (1 - t) of it; the last step moves all of it.
Latent integrate(const Latent& start, const Predictor& predictor, LossMode mode, int steps);

}  // namespace bokeh
