#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "darklighter/menet.hpp"
#include "darklighter/tensor.hpp"

namespace darklighter {

/// Output of the iterative decomposition S_i = (S_{i-1} - N_i) * E_i.
template <typename T>
struct EnhancementResult {
  Tensor<T> final;                    // S_I, the reflectance estimate (unclamped)
  std::vector<Tensor<T>> intermediates;  // S_1 .. S_I (unclamped)
  Tensor<T> exported;                 // S_I clamped to [0,1]
};

template <typename T>
struct EnhanceGradients {
  Tensor<T> s0;
  MapStack<T> e_stack;
  MapStack<T> n_stack;
};

namespace detail {

template <typename T>
void check_enhance_inputs(const Tensor<T>& s, const MapStack<T>& e, const MapStack<T>& n, const char* what) {
  if (e.iterations() == 0 || n.iterations() == 0) {
    throw InvalidArgument(std::string(what) + ": iteration count must be at least 1");
  }
  if (e.iterations() != n.iterations()) {
    throw ShapeError(std::string(what) + ": E stack has " + std::to_string(e.iterations()) +
                     " maps but N stack has " + std::to_string(n.iterations()));
  }
  const Shape map_shape{e.iterations(), s.height(), s.width()};
  require_same_shape(e.maps.shape(), map_shape, what);
  require_same_shape(n.maps.shape(), map_shape, what);
}

}  // namespace detail

/// Peels noise and illumination off `s0` once per map pair. The single-channel
/// maps are shared by every color channel; nothing is clamped between steps.
template <typename T>
EnhancementResult<T> enhance(const Tensor<T>& s0, const MapStack<T>& e_stack, const MapStack<T>& n_stack) {
  detail::check_enhance_inputs(s0, e_stack, n_stack, "enhance");
  const std::size_t pixels = s0.plane_size();
  EnhancementResult<T> result;
  result.intermediates.reserve(e_stack.iterations());
  Tensor<T> s = s0;
  for (std::size_t i = 0; i < e_stack.iterations(); ++i) {
    const T* e = e_stack.map(i);
    const T* n = n_stack.map(i);
    for (std::size_t c = 0; c < s.channels(); ++c) {
      T* p = s.plane(c);
      for (std::size_t k = 0; k < pixels; ++k) {
        p[k] = (p[k] - n[k]) * e[k];
      }
    }
    result.intermediates.push_back(s);
  }
  result.final = std::move(s);
  result.exported = result.final;
  for (auto& v : result.exported.values()) {
    v = std::clamp(v, T{0}, T{1});
  }
  return result;
}

/// Same as enhance().final without keeping intermediates.
template <typename T>
Tensor<T> enhance_final(const Tensor<T>& s0, const MapStack<T>& e_stack, const MapStack<T>& n_stack) {
  detail::check_enhance_inputs(s0, e_stack, n_stack, "enhance");
  const std::size_t pixels = s0.plane_size();
  Tensor<T> s = s0;
  for (std::size_t c = 0; c < s.channels(); ++c) {
    T* p = s.plane(c);
    for (std::size_t i = 0; i < e_stack.iterations(); ++i) {
      const T* e = e_stack.map(i);
      const T* n = n_stack.map(i);
      for (std::size_t k = 0; k < pixels; ++k) {
        p[k] = (p[k] - n[k]) * e[k];
      }
    }
  }
  return s;
}

/// Reverse-mode pass through the iteration for the gradient `grad_final` of S_I.
template <typename T>
EnhanceGradients<T> enhance_backward(const Tensor<T>& s0, const MapStack<T>& e_stack, const MapStack<T>& n_stack,
                                     const Tensor<T>& grad_final) {
  detail::check_enhance_inputs(s0, e_stack, n_stack, "enhance_backward");
  require_same_shape(grad_final.shape(), s0.shape(), "enhance_backward grad_final");
  const std::size_t iters = e_stack.iterations();
  const std::size_t pixels = s0.plane_size();

  // Recompute S_0 .. S_{I-1}.
  std::vector<Tensor<T>> inputs;
  inputs.reserve(iters);
  inputs.push_back(s0);
  for (std::size_t i = 0; i + 1 < iters; ++i) {
    Tensor<T> next = inputs.back();
    for (std::size_t c = 0; c < next.channels(); ++c) {
      T* p = next.plane(c);
      for (std::size_t k = 0; k < pixels; ++k) {
        p[k] = (p[k] - n_stack.map(i)[k]) * e_stack.map(i)[k];
      }
    }
    inputs.push_back(std::move(next));
  }

  EnhanceGradients<T> g{grad_final, MapStack<T>(iters, s0.height(), s0.width()),
                        MapStack<T>(iters, s0.height(), s0.width())};
  for (std::size_t i = iters; i-- > 0;) {
    const T* e = e_stack.map(i);
    const T* n = n_stack.map(i);
    T* ge = g.e_stack.map(i);
    T* gn = g.n_stack.map(i);
    const Tensor<T>& prev = inputs[i];
    for (std::size_t c = 0; c < s0.channels(); ++c) {
      T* gs = g.s0.plane(c);
      const T* sp = prev.plane(c);
      for (std::size_t k = 0; k < pixels; ++k) {
        ge[k] += gs[k] * (sp[k] - n[k]);
        gn[k] -= gs[k] * e[k];
        gs[k] *= e[k];
      }
    }
  }
  return g;
}

/// Undoes enhance(): S_{i-1} = S_i / E_i + N_i in reverse order.
template <typename T>
Tensor<T> invert(const Tensor<T>& final, const MapStack<T>& e_stack, const MapStack<T>& n_stack) {
  detail::check_enhance_inputs(final, e_stack, n_stack, "invert");
  constexpr T kMinGain = T(0.1);
  for (T v : e_stack.maps.values()) {
    if (!(std::abs(v) >= kMinGain)) {
      throw IllConditioned("invert: illumination adjustment " + std::to_string(static_cast<double>(v)) +
                           " has magnitude below 0.1");
    }
  }
  const std::size_t pixels = final.plane_size();
  Tensor<T> s = final;
  for (std::size_t i = e_stack.iterations(); i-- > 0;) {
    const T* e = e_stack.map(i);
    const T* n = n_stack.map(i);
    for (std::size_t c = 0; c < s.channels(); ++c) {
      T* p = s.plane(c);
      for (std::size_t k = 0; k < pixels; ++k) {
        p[k] = p[k] / e[k] + n[k];
      }
    }
  }
  return s;
}

}  // namespace darklighter
