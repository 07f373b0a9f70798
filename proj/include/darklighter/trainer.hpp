#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "darklighter/adam.hpp"
#include "darklighter/detail/parallel.hpp"
#include "darklighter/enhancer.hpp"
#include "darklighter/feature_extractor.hpp"
#include "darklighter/image_io.hpp"
#include "darklighter/losses.hpp"
#include "darklighter/menet.hpp"
#include "darklighter/weights.hpp"

namespace darklighter {

struct ExtractorChoice {
  enum class Kind { random, pretrained };
  Kind kind = Kind::random;
  std::uint64_t seed = 0;
  std::filesystem::path path;
};

struct TrainConfig {
  std::filesystem::path data_dir;
  std::filesystem::path output_dir = "checkpoints";
  std::size_t image_size = 256;
  std::size_t batch_size = 32;
  std::size_t epochs = 193;
  float learning_rate = 1e-4f;
  std::uint64_t seed = 0;
  LossWeights loss_weights;
  ExtractorChoice feature_extractor;
  std::size_t checkpoint_every = 0;  // epochs between checkpoints; 0 writes only the final one
  std::size_t iterations = kIterations;
  std::size_t max_steps = 0;  // 0 = run every epoch
  float clip_norm = 0.0f;     // global gradient-norm clip; 0 disables
  std::optional<std::filesystem::path> init_weights;
};

struct LossRecord {
  std::uint64_t step = 0;
  float total = 0.0f;
  LossComponents<float> parts;
};

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path loss_csv;
  std::vector<LossRecord> history;
  MENetParams<float> params;
};

struct TrainHooks {
  std::function<void(const std::string&)> warn;
  std::function<void(const LossRecord&)> on_step;
};

/// Loss and parameter gradients for one training image.
struct ItemGradients {
  float total = 0.0f;
  LossComponents<float> parts;
  MENetParams<float> grads;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(cfg.learning_rate > 0.0f)) throw ConfigError("learning_rate must be positive");
  if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (cfg.image_size < kPatchSize) throw ConfigError("image_size must be at least 16");
  if (cfg.iterations < 1 || cfg.iterations > kIterations) {
    throw ConfigError("iterations must be between 1 and " + std::to_string(kIterations));
  }
  if (cfg.clip_norm < 0.0f) throw ConfigError("clip_norm must be nonnegative");
}

inline std::unique_ptr<FeatureExtractor<float>> make_extractor(const ExtractorChoice& choice) {
  if (choice.kind == ExtractorChoice::Kind::pretrained) {
    return std::make_unique<ConvPrefixExtractor<float>>(ConvPrefixExtractor<float>::pretrained(choice.path));
  }
  return std::make_unique<ConvPrefixExtractor<float>>(ConvPrefixExtractor<float>::random(choice.seed));
}

/// First `iterations` maps of a stack.
template <typename T>
MapStack<T> leading_maps(const MapStack<T>& stack, std::size_t iterations) {
  if (iterations == stack.iterations()) return stack;
  return MapStack<T>(slice_channels(stack.maps, 0, iterations));
}

template <typename T>
MapStack<T> pad_maps(const MapStack<T>& stack, std::size_t iterations) {
  if (iterations == stack.iterations()) return stack;
  MapStack<T> out(iterations, stack.height(), stack.width());
  std::copy(stack.maps.values().begin(), stack.maps.values().end(), out.maps.data());
  return out;
}

namespace detail {

inline void check_finite(const LossComponents<float>& p, float total) {
  const std::pair<const char*, float> named[] = {
      {"col", p.col}, {"cen", p.cen}, {"ill", p.ill}, {"sem", p.sem}, {"noi", p.noi}, {"total", total}};
  for (const auto& [name, v] : named) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite loss component '" + std::string(name) + "'");
    }
  }
}

}  // namespace detail

/// Forward network -> enhance -> total loss -> backward chain for one image.
inline ItemGradients compute_item_gradients(const ImageTensor& image, const MENetParams<float>& params,
                                            const LossWeights& weights, const FeatureExtractor<float>& fx,
                                            std::size_t iterations = kIterations) {
  auto net = forward(image, params);
  const auto e = leading_maps(net.e_stack, iterations);
  const auto n = leading_maps(net.n_stack, iterations);
  const auto final = enhance_final(image, e, n);
  auto loss = total_loss(image, final, e, n, weights, fx);
  detail::check_finite(loss.parts, loss.total);
  ItemGradients out{loss.total, loss.parts, {}};
  out.grads = backward(net.cache, params, pad_maps(loss.grad_e, kIterations), pad_maps(loss.grad_n, kIterations));
  return out;
}

inline void write_loss_csv_header(std::ostream& out) { out << "step,total,col,cen,ill,sem,noi\n"; }

inline void write_loss_csv_row(std::ostream& out, const LossRecord& r) {
  char line[256];
  std::snprintf(line, sizeof line, "%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", static_cast<unsigned long long>(r.step),
                static_cast<double>(r.total), static_cast<double>(r.parts.col), static_cast<double>(r.parts.cen),
                static_cast<double>(r.parts.ill), static_cast<double>(r.parts.sem),
                static_cast<double>(r.parts.noi));
  out << line;
}

/// Trains the network with ADAM over batches drawn from data_dir.
///
/// Each epoch visits every image once in a seeded random order. Per-image
/// gradients are reduced in batch order with double accumulators and averaged,
/// so a fixed (seed, data, config) reproduces checkpoints bit for bit.
inline TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  validate(cfg);
  if (!std::filesystem::is_directory(cfg.data_dir)) {
    throw ConfigError("data_dir '" + cfg.data_dir.string() + "' is not a directory");
  }
  const auto files = list_images(cfg.data_dir);
  if (files.empty()) {
    throw ConfigError("data_dir '" + cfg.data_dir.string() + "' contains no images");
  }
  std::size_t batch = cfg.batch_size;
  if (files.size() < batch) {
    batch = files.size();
    if (hooks.warn) {
      hooks.warn("only " + std::to_string(files.size()) + " images; using batch size " + std::to_string(batch));
    }
  }

  std::vector<ImageTensor> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(load_training_image(f, cfg.image_size));

  const auto fx = make_extractor(cfg.feature_extractor);
  auto params = cfg.init_weights ? load_weights(*cfg.init_weights) : init_params<float>(cfg.seed);
  AdamState adam{zero_params<float>(), zero_params<float>(), 0, {}};

  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (!std::filesystem::is_directory(cfg.output_dir)) {
    throw IoError("cannot create output directory '" + cfg.output_dir.string() + "'");
  }
  TrainResult result;
  result.loss_csv = cfg.output_dir / "loss.csv";
  std::ofstream csv(result.loss_csv, std::ios::trunc);
  if (!csv) throw IoError("cannot write '" + result.loss_csv.string() + "'");
  write_loss_csv_header(csv);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x5DEECE66DULL);
  std::vector<std::size_t> order(images.size());
  std::uint64_t step = 0;
  bool done = false;

  auto checkpoint = [&](const std::filesystem::path& path) {
    save_weights(params, path, {scalar_tensor("meta.step", static_cast<float>(step))});
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !done; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size() && !done; start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      std::vector<ItemGradients> items(count);
      detail::parallel_for(count, [&](std::size_t i) {
        items[i] = compute_item_gradients(images[order[start + i]], params, cfg.loss_weights, *fx, cfg.iterations);
      });

      // Fixed-order double reduction, then the batch mean.
      auto acc = zero_params<double>();
      LossComponents<double> parts;
      double total = 0.0;
      for (const auto& item : items) {
        auto dst = acc.layers();
        auto src = item.grads.layers();
        for (std::size_t l = 0; l < dst.size(); ++l) {
          for (std::size_t k = 0; k < dst[l]->weight.size(); ++k) dst[l]->weight[k] += src[l]->weight[k];
          for (std::size_t k = 0; k < dst[l]->bias.size(); ++k) dst[l]->bias[k] += src[l]->bias[k];
        }
        total += item.total;
        parts.col += item.parts.col;
        parts.cen += item.parts.cen;
        parts.ill += item.parts.ill;
        parts.sem += item.parts.sem;
        parts.noi += item.parts.noi;
      }
      const double inv = 1.0 / static_cast<double>(count);
      double norm2 = 0.0;
      for (auto* l : acc.layers()) {
        for (auto* vec : {&l->weight, &l->bias}) {
          for (auto& v : *vec) {
            v *= inv;
            norm2 += v * v;
          }
        }
      }
      if (cfg.clip_norm > 0.0f && std::sqrt(norm2) > cfg.clip_norm) {
        const double s = cfg.clip_norm / std::sqrt(norm2);
        for (auto* l : acc.layers()) {
          for (auto& v : l->weight) v *= s;
          for (auto& v : l->bias) v *= s;
        }
      }
      adam_step(params, params_cast<float>(acc), adam, cfg.learning_rate);
      ++step;

      LossRecord rec{step, static_cast<float>(total * inv),
                     {static_cast<float>(parts.col * inv), static_cast<float>(parts.cen * inv),
                      static_cast<float>(parts.ill * inv), static_cast<float>(parts.sem * inv),
                      static_cast<float>(parts.noi * inv)}};
      write_loss_csv_row(csv, rec);
      result.history.push_back(rec);
      if (hooks.on_step) hooks.on_step(rec);
      if (cfg.max_steps != 0 && step >= cfg.max_steps) done = true;
    }
    if (cfg.checkpoint_every != 0 && epoch % cfg.checkpoint_every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_epoch%04zu.dlwt", epoch);
      checkpoint(cfg.output_dir / name);
    }
  }
  csv.flush();
  if (!csv) throw IoError("failed writing '" + result.loss_csv.string() + "'");
  result.checkpoint = cfg.output_dir / "final.dlwt";
  checkpoint(result.checkpoint);
  result.params = std::move(params);
  return result;
}

}  // namespace darklighter
