#pragma once

#include <cstdint>

#include "bokeh/net.hpp"

namespace bokeh {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates plus the step counter.
struct AdamState {
  ParamSet m;
  ParamSet v;
  std::int64_t step = 0;

  static AdamState for_params(const ParamSet& params);
};

/// One bias-corrected Adam update, in place.
void adam_step(ParamSet& params, const Gradients& grads, AdamState& state, double lr,
               const AdamOptions& options = {});

}  // namespace bokeh
