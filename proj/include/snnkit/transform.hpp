// Graph-to-graph rewrites that prepare an ANN for conversion:
// batch-norm fusion, replacement of spike-unfriendly downsampling/upsampling
// layers, and data-based weight normalization.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "snnkit/network.hpp"
#include "snnkit/rng.hpp"
#include "snnkit/snn.hpp"

namespace snnkit {

// Fold every BatchNorm into the affine layer directly before it:
//   w' = w * g / sqrt(var + eps),  b' = (b - mean) * g / sqrt(var + eps) + beta.
inline NetworkGraph fuse_batchnorm(const NetworkGraph& net) {
  validate(net);
  NetworkGraph out;
  out.input_shape = net.input_shape;
  out.normalization = net.normalization;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& layer = net.layers[i];
    if (layer.kind != LayerKind::BatchNorm) {
      out.layers.push_back(layer);
      continue;
    }
    expect(!out.layers.empty(), ErrorKind::Rewrite,
           "BatchNorm at layer " + std::to_string(i) + " has no preceding affine layer");
    LayerSpec& prev = out.layers.back();
    const auto& bn = layer.batch_norm();
    const std::size_t channels = bn.mean.size();

    auto fold = [&](Tensor& weight, Tensor& bias, std::size_t per_channel_weights) {
      expect(bias.size() == channels, ErrorKind::Rewrite,
             "BatchNorm at layer " + std::to_string(i) + " covers " + std::to_string(channels) +
                 " channels but the preceding layer emits " + std::to_string(bias.size()));
      for (std::size_t c = 0; c < channels; ++c) {
        const float scale = bn.gamma[c] / std::sqrt(bn.var[c] + bn.epsilon);
        float* w = weight.data() + c * per_channel_weights;
        for (std::size_t k = 0; k < per_channel_weights; ++k) w[k] *= scale;
        bias[c] = (bias[c] - bn.mean[c]) * scale + bn.beta[c];
      }
    };

    switch (prev.kind) {
      case LayerKind::Linear: {
        auto& p = prev.linear();
        fold(p.weight, p.bias, p.in_features);
        break;
      }
      case LayerKind::Conv2D: {
        auto& p = prev.conv();
        fold(p.weight, p.bias, p.in_channels * p.kernel * p.kernel);
        break;
      }
      case LayerKind::StridedConv2D: {
        auto& p = prev.depthwise();
        fold(p.weight, p.bias, p.kernel * p.kernel);
        break;
      }
      default:
        fail(ErrorKind::Rewrite, "BatchNorm at layer " + std::to_string(i) + " follows " +
                                     std::string(layer_kind_name(prev.kind)) +
                                     "; it must follow Linear, Conv2D or StridedConv2D");
    }
  }
  validate(out);
  return out;
}

enum class ReplacementInit { AvgInit, RandomInit };

struct ReplacementConfig {
  ReplacementInit init = ReplacementInit::AvgInit;
  std::uint64_t seed = 0;  // RandomInit only
};

// Swap every MaxPool2D(2,2) for a trainable per-channel strided convolution
// and every Upsample2D for a per-channel transposed convolution. AvgInit
// kernels reproduce average pooling / nearest-neighbour upsampling exactly,
// so the rewritten graph behaves sanely before finetuning.
inline NetworkGraph replace_downsampling(const NetworkGraph& net,
                                         const ReplacementConfig& cfg = {}) {
  const std::vector<Shape> shapes = validate(net);
  NetworkGraph out;
  out.input_shape = net.input_shape;
  out.normalization = net.normalization;
  Rng rng(cfg.seed);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& layer = net.layers[i];
    const Shape& in_shape = i == 0 ? net.input_shape : shapes[i - 1];
    if (layer.kind == LayerKind::MaxPool2D) {
      const auto& p = layer.pool();
      expect(p.kernel == 2 && p.stride == 2, ErrorKind::Rewrite,
             "MaxPool2D at layer " + std::to_string(i) + " uses kernel " +
                 std::to_string(p.kernel) + " stride " + std::to_string(p.stride) +
                 "; only kernel 2 stride 2 is replaceable");
      const std::size_t channels = in_shape[0];
      Tensor weight({channels, 2, 2});
      if (cfg.init == ReplacementInit::AvgInit)
        for (auto& w : weight.values()) w = 0.25f;
      else
        for (auto& w : weight.values()) w = rng.normalf(0.0f, 0.5f);
      out.layers.push_back(
          make_depthwise(LayerKind::StridedConv2D, channels, 2, 2, std::move(weight), Tensor({channels})));
    } else if (layer.kind == LayerKind::Upsample2D) {
      const std::size_t f = layer.upsample().factor;
      const std::size_t channels = in_shape[0];
      Tensor weight({channels, f, f});
      if (cfg.init == ReplacementInit::AvgInit)
        for (auto& w : weight.values()) w = 1.0f;  // replicates each input pixel
      else
        for (auto& w : weight.values()) w = rng.normalf(0.0f, 0.5f);
      out.layers.push_back(make_depthwise(LayerKind::TransposedConv2D, channels, f, f,
                                          std::move(weight), Tensor({channels})));
    } else {
      out.layers.push_back(layer);
    }
  }
  validate(out);
  return out;
}

namespace detail {

// Nearest-rank percentile, p in (0, 100].
inline double percentile_value(std::vector<float>& values, double p) {
  expect(!values.empty(), ErrorKind::Normalization, "no activation values collected");
  const std::size_t rank =
      std::max<std::size_t>(1, static_cast<std::size_t>(
                                   std::ceil(p / 100.0 * static_cast<double>(values.size()))));
  const std::size_t k = std::min(values.size(), rank) - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return static_cast<double>(values[k]);
}

inline void scale_affine(LayerSpec& layer, double in_scale, double out_scale) {
  auto apply = [&](Tensor& weight, Tensor& bias) {
    const double wf = in_scale / out_scale;
    for (auto& w : weight.values()) w = static_cast<float>(static_cast<double>(w) * wf);
    for (auto& b : bias.values()) b = static_cast<float>(static_cast<double>(b) / out_scale);
  };
  switch (layer.kind) {
    case LayerKind::Linear: apply(layer.linear().weight, layer.linear().bias); break;
    case LayerKind::Conv2D: apply(layer.conv().weight, layer.conv().bias); break;
    case LayerKind::StridedConv2D:
    case LayerKind::TransposedConv2D: apply(layer.depthwise().weight, layer.depthwise().bias); break;
    default: fail(ErrorKind::Normalization, "cannot scale a non-affine layer");
  }
}

}  // namespace detail

struct NormalizeResult {
  NetworkGraph net;
  ScaleFactors scales;
};

// Data-based weight normalization: lambda_l is the percentile-p activation
// at each activation site over the calibration set, and each affine layer is
// rescaled by lambda_{in}/lambda_{out} (bias by 1/lambda_{out}) so calibration
// activations land in [0,1]. The output layer keeps scale 1 when no
// activation follows it, so network argmax is preserved exactly.
inline NormalizeResult normalize_weights(const NetworkGraph& net,
                                         const std::vector<Tensor>& calibration,
                                         double percentile = 99.9) {
  expect(!calibration.empty(), ErrorKind::Normalization, "calibration set is empty");
  expect(percentile > 0.0 && percentile <= 100.0, ErrorKind::Normalization,
         "percentile must be in (0, 100]");
  for (std::size_t i = 0; i < net.layers.size(); ++i)
    expect(net.layers[i].kind != LayerKind::BatchNorm, ErrorKind::Normalization,
           "BatchNorm at layer " + std::to_string(i) + " must be fused before normalization");
  const std::vector<std::size_t> sites = activation_sites(net);
  expect(!sites.empty(), ErrorKind::Normalization, "network has no activation layers");

  // gather activation values per site
  std::vector<std::vector<float>> site_values(sites.size());
  for (const Tensor& x : calibration) {
    const std::vector<Tensor> acts = forward(net, x);
    for (std::size_t s = 0; s < sites.size(); ++s) {
      const auto& vals = acts[sites[s]].values();
      site_values[s].insert(site_values[s].end(), vals.begin(), vals.end());
    }
  }

  ScaleFactors sf;
  sf.percentile = percentile;
  sf.site_layers = sites;
  std::vector<double> site_max(sites.size(), 0.0);
  for (std::size_t s = 0; s < sites.size(); ++s) {
    site_max[s] = static_cast<double>(
        *std::max_element(site_values[s].begin(), site_values[s].end()));
    const double lambda = detail::percentile_value(site_values[s], percentile);
    expect(lambda > 0.0, ErrorKind::Normalization,
           "activation layer " + std::to_string(sites[s]) +
               " is dead on the calibration set (scale " + num_str(lambda) + ")");
    sf.lambdas.push_back(lambda);
  }
  sf.post_norm_max = 0.0;
  for (std::size_t s = 0; s < sites.size(); ++s)
    sf.post_norm_max = std::max(sf.post_norm_max, site_max[s] / sf.lambdas[s]);

  NetworkGraph out = net;
  double current_scale = 1.0;  // inputs are expected pre-scaled to [0,1]
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    if (!out.layers[i].has_weights()) continue;
    // the governing scale is the next activation site before another affine layer
    double out_scale = 1.0;
    for (std::size_t j = i + 1; j < out.layers.size(); ++j) {
      if (out.layers[j].is_activation()) {
        const auto it = std::find(sites.begin(), sites.end(), j);
        out_scale = sf.lambdas[static_cast<std::size_t>(it - sites.begin())];
        break;
      }
      if (out.layers[j].has_weights()) break;
    }
    detail::scale_affine(out.layers[i], current_scale, out_scale);
    current_scale = out_scale;
  }
  out.normalization = sf;
  return NormalizeResult{std::move(out), std::move(sf)};
}

// ---- firing-rate profiling ----

struct ProfileRow {
  std::size_t layer_index = 0;
  double mean_rate = 0.0;
  double min_rate = 0.0;
  std::array<std::size_t, 10> buckets{};  // histogram over [0,1] in steps of 0.1
};

struct ProfileTable {
  std::vector<ProfileRow> rows;
};

inline ProfileTable firing_rate_profile(const SimTrace& trace) {
  ProfileTable table;
  for (const auto& site : trace.sites) {
    ProfileRow row;
    row.layer_index = site.layer_index;
    row.min_rate = site.spike_count.empty() ? 0.0 : 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < site.rates.size(); ++i) {
      const double r = static_cast<double>(site.rates[i]);
      sum += r;
      row.min_rate = std::min(row.min_rate, r);
      const std::size_t bucket = std::min<std::size_t>(9, static_cast<std::size_t>(r * 10.0));
      ++row.buckets[bucket];
    }
    row.mean_rate = site.rates.empty() ? 0.0 : sum / static_cast<double>(site.rates.size());
    table.rows.push_back(row);
  }
  return table;
}

inline std::string profile_to_csv(const ProfileTable& table) {
  std::string out = "layer,mean_rate,min_rate";
  for (int b = 0; b < 10; ++b) out += ",bucket" + std::to_string(b);
  out += "\n";
  for (const auto& row : table.rows) {
    out += std::to_string(row.layer_index) + "," + num_str(row.mean_rate) + "," + num_str(row.min_rate);
    for (std::size_t c : row.buckets) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

}  // namespace snnkit
