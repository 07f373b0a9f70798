#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "darklighter/conv.hpp"
#include "darklighter/enhancer.hpp"
#include "darklighter/feature_extractor.hpp"
#include "darklighter/gradcheck.hpp"
#include "darklighter/losses.hpp"
#include "darklighter/menet.hpp"

namespace darklighter {

struct GradCheckOptions {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double eps = 1e-6;
  std::size_t samples = 24;  // coordinates probed per checked tensor
  /// Test fixture: negates the analytic gradient of the named component.
  std::string fault;
};

struct GradCheckResult {
  std::string component;
  double rel_error = 0.0;
  std::size_t probes = 0;
  bool passed = false;
};

namespace detail::gradsuite {

using Rng = std::mt19937_64;

inline void fill_uniform(std::span<double> v, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  for (auto& x : v) x = d(rng);
}

inline Tensor<double> uniform(std::size_t c, std::size_t h, std::size_t w, Rng& rng, double lo, double hi) {
  Tensor<double> t(c, h, w);
  fill_uniform(t.values(), rng, lo, hi);
  return t;
}

inline std::vector<std::size_t> pick(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (n <= k) return all;
  std::vector<std::size_t> out;
  out.reserve(k);
  std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

class Runner {
 public:
  explicit Runner(const GradCheckOptions& opt) : opt_(opt), rng_(opt.seed) {}

  Rng& rng() { return rng_; }

  /// Compares analytic[i] with a central difference of f in x[i] for sampled i.
  /// f must read x through the same storage that is perturbed here.
  void check(const std::string& component, std::span<double> x, std::span<const double> analytic,
             const std::function<double()>& f) {
    const auto idx = pick(x.size(), opt_.samples, rng_);
    std::vector<double> a;
    std::vector<double> n;
    const double sign = component == opt_.fault ? -1.0 : 1.0;
    for (const auto i : idx) {
      const double saved = x[i];
      x[i] = saved + opt_.eps;
      const double up = f();
      x[i] = saved - opt_.eps;
      const double down = f();
      x[i] = saved;
      n.push_back((up - down) / (2.0 * opt_.eps));
      a.push_back(sign * analytic[i]);
    }
    const double err = relative_error(a, n);
    results_.push_back({component, err, idx.size(), err <= opt_.tolerance});
  }

  std::vector<GradCheckResult> take() { return std::move(results_); }

 private:
  GradCheckOptions opt_;
  Rng rng_;
  std::vector<GradCheckResult> results_;
};

inline void conv_layer(Runner& r) {
  auto& rng = r.rng();
  auto x = uniform(5, 7, 6, rng, -1.0, 1.0);
  ConvLayer<double> layer(4, 5);
  fill_uniform(layer.weight, rng, -0.5, 0.5);
  fill_uniform(layer.bias, rng, -0.5, 0.5);
  const auto g = uniform(4, 7, 6, rng, -1.0, 1.0);
  const auto grads = conv2d_backward(x, layer, g);
  auto f = [&] { return dot(conv2d_forward(x, layer).values(), g.values()); };
  r.check("conv2d.input", x.values(), grads.input.values(), f);
  r.check("conv2d.weight", layer.weight, grads.layer.weight, f);
  r.check("conv2d.bias", layer.bias, grads.layer.bias, f);
}

inline MENetParams<double> random_params(Rng& rng) {
  MENetParams<double> p;
  for (auto* l : p.layers()) {
    const double s = 1.2 / std::sqrt(9.0 * static_cast<double>(l->in_channels));
    fill_uniform(l->weight, rng, -s, s);
    fill_uniform(l->bias, rng, -0.1, 0.1);
  }
  return p;
}

inline double maps_objective(const MENetOutput<double>& out, const MapStack<double>& ge,
                             const MapStack<double>& gn) {
  return dot(out.e_stack.maps.values(), ge.maps.values()) + dot(out.n_stack.maps.values(), gn.maps.values());
}

inline void network_layers(Runner& r) {
  auto& rng = r.rng();
  const std::size_t h = 6;
  const std::size_t w = 8;
  const auto image = uniform(3, h, w, rng, 0.0, 1.0);
  auto params = random_params(rng);
  MapStack<double> ge(kIterations, h, w);
  MapStack<double> gn(kIterations, h, w);
  fill_uniform(ge.maps.values(), rng, -1.0, 1.0);
  fill_uniform(gn.maps.values(), rng, -1.0, 1.0);
  const auto out = forward(image, params);
  const auto grads = backward(out.cache, params, ge, gn);
  auto f = [&] { return maps_objective(forward(image, params), ge, gn); };
  auto layers = params.layers();
  const auto glayers = grads.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string name = "menet." + std::string(MENetParams<double>::kLayerNames[i]);
    r.check(name + ".weight", layers[i]->weight, glayers[i]->weight, f);
    r.check(name + ".bias", layers[i]->bias, glayers[i]->bias, f);
  }
}

inline void enhancer_chain(Runner& r) {
  auto& rng = r.rng();
  const std::size_t h = 5;
  const std::size_t w = 6;
  auto s0 = uniform(3, h, w, rng, 0.05, 0.5);
  MapStack<double> e(kIterations, h, w);
  MapStack<double> n(kIterations, h, w);
  fill_uniform(e.maps.values(), rng, 0.5, 1.5);
  fill_uniform(n.maps.values(), rng, -0.1, 0.1);
  const auto g = uniform(3, h, w, rng, -1.0, 1.0);
  const auto grads = enhance_backward(s0, e, n, g);
  auto f = [&] { return dot(enhance_final(s0, e, n).values(), g.values()); };
  r.check("enhancer.s0", s0.values(), grads.s0.values(), f);
  r.check("enhancer.e_stack", e.maps.values(), grads.e_stack.maps.values(), f);
  r.check("enhancer.n_stack", n.maps.values(), grads.n_stack.maps.values(), f);
}

inline void losses(Runner& r) {
  auto& rng = r.rng();
  {
    auto y = uniform(3, 5, 7, rng, 0.0, 1.0);
    for (const auto mode : {ColorLossMode::literal, ColorLossMode::channel_mean}) {
      const auto l = loss_col(y, mode);
      const std::string name = mode == ColorLossMode::literal ? "loss.col" : "loss.col.channel_mean";
      r.check(name, y.values(), l.grad.values(), [&] { return static_cast<double>(loss_col(y, mode).value); });
    }
  }
  {
    auto y = uniform(3, 32, 32, rng, 0.0, 1.0);
    const auto map = build_weight_map(2, 2);
    const auto l = loss_cen(y, map, 0.6);
    r.check("loss.cen", y.values(), l.grad.values(), [&] { return loss_cen(y, map, 0.6).value; });
  }
  {
    MapStack<double> e(kIterations, 5, 6);
    fill_uniform(e.maps.values(), rng, 0.0, 2.0);
    const auto l = loss_ill(e);
    r.check("loss.ill", e.maps.values(), l.grad.maps.values(), [&] { return loss_ill(e).value; });
  }
  {
    MapStack<double> n(kIterations, 5, 6);
    fill_uniform(n.maps.values(), rng, -1.0, 1.0);
    const auto l = loss_noi(n);
    r.check("loss.noi", n.maps.values(), l.grad.maps.values(), [&] { return loss_noi(n).value; });
  }
  {
    const auto fx = ConvPrefixExtractor<double>::random(rng());
    auto y = uniform(3, 8, 8, rng, 0.0, 1.0);
    const auto original = uniform(3, 8, 8, rng, 0.0, 1.0);
    const auto l = loss_sem(y, original, fx);
    r.check("loss.sem", y.values(), l.grad.values(), [&] { return loss_sem(y, original, fx).value; });
  }
}

inline void total(Runner& r) {
  auto& rng = r.rng();
  const std::size_t h = 16;
  const std::size_t w = 16;
  const auto fx = ConvPrefixExtractor<double>::random(rng());
  const LossWeights weights;
  const auto s0 = uniform(3, h, w, rng, 0.05, 0.4);
  MapStack<double> e(kIterations, h, w);
  MapStack<double> n(kIterations, h, w);
  fill_uniform(e.maps.values(), rng, 0.9, 1.3);
  fill_uniform(n.maps.values(), rng, -0.05, 0.05);

  auto final = enhance_final(s0, e, n);
  const auto at_final = total_loss(s0, final, e, n, weights, fx);
  // S_I perturbed on its own: only the colour, lightness and semantic terms see it.
  r.check("loss.total.final", final.values(), at_final.grad_final.values(),
          [&] { return total_loss(s0, final, e, n, weights, fx).total; });

  const auto through = total_loss(s0, enhance_final(s0, e, n), e, n, weights, fx);
  auto f = [&] { return total_loss(s0, enhance_final(s0, e, n), e, n, weights, fx).total; };
  r.check("loss.total.e_stack", e.maps.values(), through.grad_e.maps.values(), f);
  r.check("loss.total.n_stack", n.maps.values(), through.grad_n.maps.values(), f);
}

inline void end_to_end(Runner& r) {
  auto& rng = r.rng();
  const auto fx = ConvPrefixExtractor<double>::random(rng());
  const LossWeights weights;
  const auto image = uniform(3, 16, 16, rng, 0.02, 0.35);
  auto params = random_params(rng);
  auto objective = [&](const MENetOutput<double>& out) {
    return total_loss(image, enhance_final(image, out.e_stack, out.n_stack), out.e_stack, out.n_stack, weights, fx);
  };
  const auto out = forward(image, params);
  const auto loss = objective(out);
  const auto grads = backward(out.cache, params, loss.grad_e, loss.grad_n);
  auto f = [&] { return objective(forward(image, params)).total; };
  // Every layer at once, a few coordinates each: the full training chain.
  std::vector<double*> coords;
  std::vector<double> analytic;
  auto layers = params.layers();
  const auto glayers = grads.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    for (const auto k : pick(layers[i]->weight.size(), 4, rng)) {
      coords.push_back(&layers[i]->weight[k]);
      analytic.push_back(glayers[i]->weight[k]);
    }
  }
  std::vector<double> values(coords.size());
  // Route the perturbation through a proxy vector mirrored into the params.
  auto g = [&] {
    for (std::size_t k = 0; k < coords.size(); ++k) *coords[k] = values[k];
    return f();
  };
  for (std::size_t k = 0; k < coords.size(); ++k) values[k] = *coords[k];
  r.check("chain.params", values, analytic, g);
}

}  // namespace detail::gradsuite

/// Central-difference checks of every analytic gradient in f64: the conv
/// primitive, each ME-Net layer, the enhancer chain, each loss, the total
/// loss, and the full image -> loss chain w.r.t. network parameters.
inline std::vector<GradCheckResult> run_gradient_suite(const GradCheckOptions& options = {}) {
  detail::gradsuite::Runner r(options);
  detail::gradsuite::conv_layer(r);
  detail::gradsuite::network_layers(r);
  detail::gradsuite::enhancer_chain(r);
  detail::gradsuite::losses(r);
  detail::gradsuite::total(r);
  detail::gradsuite::end_to_end(r);
  return r.take();
}

inline std::vector<std::string> gradient_suite_components() {
  std::vector<std::string> names = {"conv2d.input", "conv2d.weight", "conv2d.bias"};
  for (const auto layer : MENetParams<double>::kLayerNames) {
    names.push_back("menet." + std::string(layer) + ".weight");
    names.push_back("menet." + std::string(layer) + ".bias");
  }
  for (const char* n : {"enhancer.s0", "enhancer.e_stack", "enhancer.n_stack", "loss.col", "loss.col.channel_mean",
                        "loss.cen", "loss.ill", "loss.noi", "loss.sem", "loss.total.final", "loss.total.e_stack",
                        "loss.total.n_stack", "chain.params"}) {
    names.emplace_back(n);
  }
  return names;
}

}  // namespace darklighter
