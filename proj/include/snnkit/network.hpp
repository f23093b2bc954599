// Sequential network graph: ordered layers plus the input shape.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snnkit/layers.hpp"
#include "snnkit/rng.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

// Per-activation-site scales produced by data-based weight normalization.
struct ScaleFactors {
  std::vector<double> lambdas;            // one per activation site, in layer order
  std::vector<std::size_t> site_layers;   // layer index of each site
  double percentile = 100.0;              // percentile the lambdas were taken at
  double post_norm_max = 0.0;             // max calibration activation after rescaling

  friend bool operator==(const ScaleFactors&, const ScaleFactors&) = default;
};

struct NetworkGraph {
  std::vector<LayerSpec> layers;
  Shape input_shape;
  std::optional<ScaleFactors> normalization;  // set by normalize_weights

  friend bool operator==(const NetworkGraph&, const NetworkGraph&) = default;
};

// Per-layer output shapes. Throws a shape error naming the first bad layer.
inline std::vector<Shape> validate(const NetworkGraph& net) {
  std::vector<Shape> shapes;
  shapes.reserve(net.layers.size());
  Shape cur = net.input_shape;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    try {
      cur = layer_output_shape(net.layers[i], cur);
    } catch (const Error& e) {
      fail(ErrorKind::Shape, "layer " + std::to_string(i) + " (" +
                                 std::string(layer_kind_name(net.layers[i].kind)) + "): " + e.what());
    }
    shapes.push_back(cur);
  }
  return shapes;
}

inline Shape output_shape(const NetworkGraph& net) {
  auto shapes = validate(net);
  return shapes.empty() ? net.input_shape : shapes.back();
}

// Activation after every layer, in order. Output of layer l is element l.
inline std::vector<Tensor> forward(const NetworkGraph& net, const Tensor& x) {
  expect(x.shape() == net.input_shape, ErrorKind::Shape,
         "input shape " + shape_str(x.shape()) + " does not match network input " +
             shape_str(net.input_shape));
  x.check_finite("network input");
  std::vector<Tensor> acts;
  acts.reserve(net.layers.size());
  const Tensor* cur = &x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    Tensor out;
    try {
      out = eval_layer(net.layers[i], *cur);
    } catch (const Error& e) {
      fail(ErrorKind::Shape, "layer " + std::to_string(i) + " (" +
                                 std::string(layer_kind_name(net.layers[i].kind)) + "): " + e.what());
    }
    out.check_finite("output of layer " + std::to_string(i));
    acts.push_back(std::move(out));
    cur = &acts.back();
  }
  return acts;
}

inline Tensor forward_output(const NetworkGraph& net, const Tensor& x) {
  auto acts = forward(net, x);
  return acts.empty() ? x : std::move(acts.back());
}

inline std::vector<std::size_t> activation_sites(const NetworkGraph& net) {
  std::vector<std::size_t> sites;
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    if (net.layers[i].is_activation()) sites.push_back(i);
  return sites;
}

// He-style fan-in initialization for every weighted layer.
inline void init_weights(NetworkGraph& net, Rng& rng) {
  for (auto& layer : net.layers) {
    switch (layer.kind) {
      case LayerKind::Linear: {
        auto& p = layer.linear();
        const float scale = std::sqrt(2.0f / static_cast<float>(p.in_features));
        for (auto& w : p.weight.values()) w = rng.normalf(0.0f, scale);
        for (auto& b : p.bias.values()) b = 0.0f;
        break;
      }
      case LayerKind::Conv2D: {
        auto& p = layer.conv();
        const float fan_in = static_cast<float>(p.in_channels * p.kernel * p.kernel);
        const float scale = std::sqrt(2.0f / fan_in);
        for (auto& w : p.weight.values()) w = rng.normalf(0.0f, scale);
        for (auto& b : p.bias.values()) b = 0.0f;
        break;
      }
      case LayerKind::StridedConv2D:
      case LayerKind::TransposedConv2D: {
        auto& p = layer.depthwise();
        const float fan_in = static_cast<float>(p.kernel * p.kernel);
        const float scale = std::sqrt(2.0f / fan_in);
        for (auto& w : p.weight.values()) w = rng.normalf(0.0f, scale);
        for (auto& b : p.bias.values()) b = 0.0f;
        break;
      }
      default:
        break;
    }
  }
}

}  // namespace snnkit
