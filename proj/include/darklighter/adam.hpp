#pragma once

#include <cmath>
#include <cstdint>

#include "darklighter/menet.hpp"

namespace darklighter {

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

/// First/second moment estimates mirroring the network parameters.
struct AdamState {
  MENetParams<float> m;
  MENetParams<float> v;
  std::uint64_t step = 0;
  AdamConfig config;
};

/// One bias-corrected ADAM update of `params` in place.
inline void adam_step(MENetParams<float>& params, const MENetParams<float>& grads, AdamState& state, float lr) {
  if (!(lr > 0.0f)) {
    throw InvalidArgument("adam_step: learning rate must be positive");
  }
  auto p = params.layers();
  auto g = grads.layers();
  auto m = state.m.layers();
  auto v = state.v.layers();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i]->weight.size() != p[i]->weight.size() || g[i]->bias.size() != p[i]->bias.size() ||
        m[i]->weight.size() != p[i]->weight.size() || v[i]->bias.size() != p[i]->bias.size()) {
      throw ShapeError("adam_step: gradient or state shape does not match layer " +
                       std::string(MENetParams<float>::kLayerNames[i]));
    }
  }

  state.step += 1;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const float correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta1), t));
  const float correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta2), t));

  auto update = [&](std::vector<float>& theta, const std::vector<float>& grad, std::vector<float>& m1,
                    std::vector<float>& m2) {
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const float gk = grad[k];
      m1[k] = cfg.beta1 * m1[k] + (1.0f - cfg.beta1) * gk;
      m2[k] = cfg.beta2 * m2[k] + (1.0f - cfg.beta2) * gk * gk;
      const float m_hat = m1[k] / correction1;
      const float v_hat = m2[k] / correction2;
      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  };
  for (std::size_t i = 0; i < p.size(); ++i) {
    update(p[i]->weight, g[i]->weight, m[i]->weight, v[i]->weight);
    update(p[i]->bias, g[i]->bias, m[i]->bias, v[i]->bias);
  }
}

}  // namespace darklighter
