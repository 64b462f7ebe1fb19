#include "ffl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ffl {

AdamState AdamState::forParams(const Parameters& params) {
  AdamState s;
  for (const auto& [name, p] : params) {
    s.m.emplace(name, Tensor::zeros(p.shape()));
    s.v.emplace(name, Tensor::zeros(p.shape()));
  }
  return s;
}

void adamStep(AdamState& state, Parameters& params, const Parameters& grads, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!sameShapes(params, grads)) throw std::invalid_argument("gradient shapes do not match parameters");
  if (!sameShapes(params, state.m)) throw std::invalid_argument("optimizer state does not match parameters");
  for (const auto& [name, g] : grads)
    if (!g.allFinite()) throw std::runtime_error("non-finite gradient for '" + name + "'");

  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.t));
  for (auto& [name, p] : params) {
    const Eigen::VectorXd& g = grads.at(name).data();
    Eigen::VectorXd& m = state.m.at(name).data();
    Eigen::VectorXd& v = state.v.at(name).data();
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    p.data().array() -=
        lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + state.eps);
  }
}

}  // namespace ffl
