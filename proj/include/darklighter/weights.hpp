#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "darklighter/conv.hpp"
#include "darklighter/dlwt.hpp"
#include "darklighter/menet.hpp"

namespace darklighter {

/// `{prefix}.weight` shaped out x in x 3 x 3 and `{prefix}.bias` shaped out.
inline void append_layer(std::vector<NamedTensor>& out, const std::string& prefix, const ConvLayer<float>& layer) {
  out.push_back({prefix + ".weight", {layer.out_channels, layer.in_channels, 3, 3}, layer.weight});
  out.push_back({prefix + ".bias", {layer.out_channels}, layer.bias});
}

inline ConvLayer<float> extract_layer(const std::vector<NamedTensor>& tensors, const std::string& prefix,
                                      std::size_t out_channels, std::size_t in_channels) {
  ConvLayer<float> layer(out_channels, in_channels);
  layer.weight = require_tensor(tensors, prefix + ".weight", {out_channels, in_channels, 3, 3}).values;
  layer.bias = require_tensor(tensors, prefix + ".bias", {out_channels}).values;
  return layer;
}

inline std::vector<NamedTensor> params_to_tensors(const MENetParams<float>& params) {
  std::vector<NamedTensor> out;
  const auto layers = params.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    append_layer(out, std::string(MENetParams<float>::kLayerNames[i]), *layers[i]);
  }
  return out;
}

/// Validates names and shapes against the network wiring; extra tensors are ignored.
inline MENetParams<float> params_from_tensors(const std::vector<NamedTensor>& tensors) {
  MENetParams<float> params;
  auto layers = params.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    *layers[i] = extract_layer(tensors, std::string(MENetParams<float>::kLayerNames[i]), layers[i]->out_channels,
                               layers[i]->in_channels);
  }
  return params;
}

/// Checkpoint with the network tensors plus optional extras (e.g. "meta.step").
inline void save_weights(const MENetParams<float>& params, const std::filesystem::path& path,
                         const std::vector<NamedTensor>& extra = {}) {
  auto tensors = params_to_tensors(params);
  tensors.insert(tensors.end(), extra.begin(), extra.end());
  write_dlwt(path, tensors);
}

inline MENetParams<float> load_weights(const std::filesystem::path& path) {
  const auto tensors = read_dlwt(path);
  try {
    return params_from_tensors(tensors);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

inline NamedTensor scalar_tensor(const std::string& name, float value) { return {name, {}, {value}}; }

}  // namespace darklighter
