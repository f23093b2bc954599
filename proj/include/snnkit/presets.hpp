// Architecture presets and dataset wiring for the pipeline and CLI.
#pragma once

#include <string>
#include <vector>

#include "snnkit/config.hpp"
#include "snnkit/datasets.hpp"
#include "snnkit/network.hpp"

namespace snnkit {

// All presets use ReLU activations; the finetune stage swaps them for
// QuantReLU. Classifier and detector heads end in a Linear layer read out by
// membrane accumulation after conversion.
inline NetworkGraph build_arch(const PipelineConfig& cfg) {
  NetworkGraph net;
  const std::size_t h = cfg.hidden, c = cfg.channels;
  switch (cfg.arch) {
    case ArchKind::Mlp: {
      const std::size_t in = cfg.dataset == DatasetKind::Blobs ? 2 : 64;
      net.input_shape = cfg.dataset == DatasetKind::Blobs ? Shape{2} : Shape{1, 8, 8};
      const std::size_t classes = cfg.dataset == DatasetKind::Blobs ? 2 : 10;
      net.layers.push_back(make_linear(in, h));
      net.layers.push_back(make_relu());
      net.layers.push_back(make_linear(h, h));
      net.layers.push_back(make_relu());
      net.layers.push_back(make_linear(h, classes));
      break;
    }
    case ArchKind::Conv: {
      net.input_shape = {1, 8, 8};
      net.layers.push_back(make_conv2d(1, c, 3, 1, 1));
      net.layers.push_back(make_relu());
      net.layers.push_back(make_conv2d(c, c, 3, 2, 1));  // 8 -> 4
      net.layers.push_back(make_relu());
      net.layers.push_back(make_linear(c * 16, h));
      net.layers.push_back(make_relu());
      net.layers.push_back(make_linear(h, 10));
      break;
    }
    case ArchKind::ConvPool: {
      // the pool sits between the convolution and its activation, so the IF
      // site after the pool exposes the pooling path's firing rate directly
      net.input_shape = {1, 8, 8};
      net.layers.push_back(make_conv2d(1, c, 3, 1, 1));
      net.layers.push_back(make_relu());
      net.layers.push_back(make_conv2d(c, c, 3, 1, 1));
      net.layers.push_back(make_max_pool2d(2, 2));  // 8 -> 4
      net.layers.push_back(make_relu());
      net.layers.push_back(make_linear(c * 16, h));
      net.layers.push_back(make_relu());
      net.layers.push_back(make_linear(h, 10));
      break;
    }
    case ArchKind::Detector: {
      net.input_shape = {1, 32, 32};
      net.layers.push_back(make_conv2d(1, c, 3, 2, 1));  // 32 -> 16
      net.layers.push_back(make_relu());
      net.layers.push_back(make_conv2d(c, 2 * c, 3, 2, 1));  // 16 -> 8
      net.layers.push_back(make_relu());
      net.layers.push_back(make_conv2d(2 * c, 2 * c, 3, 2, 1));  // 8 -> 4
      net.layers.push_back(make_relu());
      net.layers.push_back(make_linear(2 * c * 16, h));
      net.layers.push_back(make_relu());
      net.layers.push_back(make_linear(h, 5));  // cx, cy, w, h, confidence
      break;
    }
  }
  validate(net);
  return net;
}

// Insert a BatchNorm after every affine layer that feeds an activation
// (directly or through pooling), with whitening statistics measured on the
// given inputs: mean/var per channel, gamma 1, beta 0. Calibration walks the
// graph front to back so each BatchNorm sees the already-normalized inputs.
inline NetworkGraph insert_calibrated_batchnorm(const NetworkGraph& net,
                                                const std::vector<Tensor>& inputs,
                                                float epsilon = 1e-4f) {
  expect(!inputs.empty(), ErrorKind::Rewrite, "batchnorm calibration needs inputs");
  NetworkGraph out;
  out.input_shape = net.input_shape;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    out.layers.push_back(net.layers[i]);
    if (!net.layers[i].has_weights()) continue;
    bool feeds_activation = false;
    for (std::size_t j = i + 1; j < net.layers.size(); ++j) {
      if (net.layers[j].is_activation()) { feeds_activation = true; break; }
      if (net.layers[j].has_weights()) break;
    }
    if (!feeds_activation) continue;

    // channel statistics of this layer's output under the rewritten prefix
    const Shape shape = validate(out).back();
    const std::size_t channels = shape[0];
    const std::size_t per_channel = shape_numel(shape) / channels;
    std::vector<double> sum(channels, 0.0), sq_sum(channels, 0.0);
    for (const Tensor& x : inputs) {
      const Tensor act = forward(out, x).back();
      for (std::size_t ch = 0; ch < channels; ++ch)
        for (std::size_t k = 0; k < per_channel; ++k) {
          const double v = act[ch * per_channel + k];
          sum[ch] += v;
          sq_sum[ch] += v * v;
        }
    }
    const double n = static_cast<double>(inputs.size() * per_channel);
    Tensor mean({channels}), var({channels}), gamma({channels}, 1.0f), beta({channels});
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const double m = sum[ch] / n;
      mean[ch] = static_cast<float>(m);
      var[ch] = static_cast<float>(std::max(1e-6, sq_sum[ch] / n - m * m));
    }
    out.layers.push_back(make_batch_norm(std::move(mean), std::move(var), std::move(gamma),
                                         std::move(beta), epsilon));
  }
  validate(out);
  return out;
}

struct PipelineData {
  Dataset train;
  Dataset eval;
  DetectionDataset det_train;
  DetectionDataset det_eval;
  bool detection = false;
  LossKind loss = LossKind::SoftmaxCrossEntropy;
};

inline PipelineData build_pipeline_data(const PipelineConfig& cfg) {
  PipelineData d;
  switch (cfg.dataset) {
    case DatasetKind::Patterns:
      d.train = make_patterns8x8(cfg.seed, cfg.train_per_class, cfg.noise, 0);
      d.eval = make_patterns8x8(cfg.seed, cfg.eval_per_class, cfg.noise, 1);
      break;
    case DatasetKind::Blobs:
      d.train = make_two_blobs(cfg.seed, cfg.train_count, 0.08f, 0);
      d.eval = make_two_blobs(cfg.seed, cfg.eval_count, 0.08f, 1);
      break;
    case DatasetKind::Detection:
      d.det_train = make_detection_dataset(cfg.seed, cfg.train_count);
      d.det_eval = make_detection_dataset(cfg.seed + 1, cfg.eval_count);
      d.train = d.det_train.data;
      d.eval = d.det_eval.data;
      d.detection = true;
      d.loss = LossKind::MeanSquaredError;
      break;
  }
  return d;
}

inline Readout resolve_readout(const PipelineConfig& cfg, const NetworkGraph& net) {
  if (cfg.readout != "auto") return *readout_from_name(cfg.readout);
  return !net.layers.empty() && net.layers.back().is_activation() ? Readout::SpikeCount
                                                                  : Readout::MembraneAccumulate;
}

}  // namespace snnkit
