#include "bokeh/flow.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bokeh {

Latent::Latent(int h, int w, int c)
    : height(h), width(w), channels(c),
      data(static_cast<std::size_t>(h) * w * c, 0.0) {
  if (h <= 0 || w <= 0 || c <= 0) throw std::invalid_argument("latent shape must be positive");
}

Latent::Latent(int h, int w, int c, std::vector<double> values)
    : height(h), width(w), channels(c), data(std::move(values)) {
  if (h <= 0 || w <= 0 || c <= 0) throw std::invalid_argument("latent shape must be positive");
  if (data.size() != static_cast<std::size_t>(h) * w * c)
    throw std::invalid_argument("latent data length does not match its shape");
}

void Latent::check_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) throw std::domain_error("latent contains non-finite values");
}

namespace {

void require_same_shape(const Latent& a, const Latent& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": latent shape mismatch");
}

}  // namespace

PathSample::PathSample(Latent source_, Latent target_, double t_, Latent state_)
    : source(std::move(source_)), target(std::move(target_)), t(t_), state(std::move(state_)) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("path time must lie in [0,1]");
  require_same_shape(source, target, "path sample");
  require_same_shape(source, state, "path sample");
  for (std::size_t i = 0; i < state.size(); ++i) {
    const double expected = t * target.data[i] + (1.0 - t) * source.data[i];
    if (std::abs(state.data[i] - expected) > 1e-6)
      throw std::invalid_argument("path state is off the straight line");
  }
}

PathSample interpolate(const Latent& source, const Latent& target, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("path time must lie in [0,1]");
  require_same_shape(source, target, "interpolate");
  Latent state(source.height, source.width, source.channels);
  for (std::size_t i = 0; i < state.size(); ++i)
    state.data[i] = t * target.data[i] + (1.0 - t) * source.data[i];
  return PathSample(source, target, t, std::move(state));
}

Latent velocity_target(const PathSample& sample) {
  Latent v(sample.target.height, sample.target.width, sample.target.channels);
  for (std::size_t i = 0; i < v.size(); ++i)
    v.data[i] = sample.target.data[i] - sample.source.data[i];
  return v;
}

Latent residual_target(const PathSample& sample) {
  Latent r(sample.target.height, sample.target.width, sample.target.channels);
  for (std::size_t i = 0; i < r.size(); ++i)
    r.data[i] = sample.target.data[i] - sample.state.data[i];
  return r;
}

double mean_squared_error(const Latent& a, const Latent& b) {
  require_same_shape(a, b, "mean_squared_error");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

double fm_loss(const Latent& pred, const PathSample& sample, LossMode mode) {
  const Latent target =
      mode == LossMode::Velocity ? velocity_target(sample) : residual_target(sample);
  return mean_squared_error(pred, target);
}

Latent integrate(const Latent& start, const Predictor& predictor, LossMode mode, int steps) {
  if (steps < 1) throw std::invalid_argument("integration needs at least one step");
  Latent state = start;
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / steps;
    const double t_next = static_cast<double>(k + 1) / steps;
    const Latent pred = predictor(state, t);
    require_same_shape(pred, state, "predictor output");
    pred.check_finite();
    const double scale = mode == LossMode::Velocity ? (t_next - t)
                         : (k + 1 == steps)         ? 1.0
                                                    : (t_next - t) / (1.0 - t);
    for (std::size_t i = 0; i < state.size(); ++i) state.data[i] += scale * pred.data[i];
  }
  return state;
}

}  // namespace bokeh
