#pragma once

#include <cstdint>

#include "ffl/tensor.hpp"

namespace ffl {

/// Adam with standard bias correction; beta1/beta2/eps at canonical defaults.
struct AdamState {
  Parameters m;
  Parameters v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState forParams(const Parameters& params);
};

/// In-place Adam update; increments state.t by exactly one.
void adamStep(AdamState& state, Parameters& params, const Parameters& grads, double lr);

}  // namespace ffl
