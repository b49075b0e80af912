#include "bokeh/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace bokeh {

AdamState AdamState::for_params(const ParamSet& params) {
  return AdamState{params.zeros_like(), params.zeros_like(), 0};
}

void adam_step(ParamSet& params, const Gradients& grads, AdamState& state, double lr,
               const AdamOptions& o) {
  if (!params.congruent(grads) || !params.congruent(state.m) || !params.congruent(state.v))
    throw std::invalid_argument("adam_step: parameter, gradient and state shapes differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = params[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    const Matrix& g = grads[i];
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + o.epsilon);
  }
}

}  // namespace bokeh
