// Quant-ReLU activation and quantization-aware finetuning.
//
// The level count should match the simulation step budget the converted
// network will run at: training then sees exactly the resolution the spike
// rates can express.
#pragma once

#include <utility>

#include "snnkit/network.hpp"
#include "snnkit/train.hpp"

namespace snnkit {

struct QuantConfig {
  int levels = 64;       // quantization level count, one per simulation step
  float offset = 0.5f;   // 0.5 rounds (matches the half-step initial potential), 0 floors
  float clip = 1.0f;
  int epochs = 20;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 16;
  LossKind loss = LossKind::SoftmaxCrossEntropy;
  std::uint64_t seed = 1;
  int threads = 1;

  QuantReluParams relu_params() const { return QuantReluParams{levels, offset, clip}; }
};

inline float quant_relu(float x, const QuantConfig& cfg) {
  return quant_relu_value(x, cfg.relu_params());
}

enum class SwapDirection { ReluToQuant, QuantToRelu };

// Replace every ReLU with QuantReLU(cfg) or every QuantReLU with ReLU.
inline NetworkGraph swap_activations(const NetworkGraph& net, SwapDirection dir,
                                     const QuantConfig& cfg) {
  NetworkGraph out = net;
  for (auto& layer : out.layers) {
    if (dir == SwapDirection::ReluToQuant && layer.kind == LayerKind::ReLU)
      layer = make_quant_relu(cfg.levels, cfg.offset, cfg.clip);
    else if (dir == SwapDirection::QuantToRelu && layer.kind == LayerKind::QuantReLU)
      layer = make_relu();
  }
  return out;
}

struct FinetuneResult {
  NetworkGraph net;
  std::vector<EpochMetrics> metrics;
};

// Quantization-aware finetuning. Requires every activation in the graph to
// already be a QuantReLU with the configured parameters.
inline FinetuneResult finetune(const NetworkGraph& net, const Dataset& data,
                               const QuantConfig& cfg) {
  const QuantReluParams want = cfg.relu_params();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& layer = net.layers[i];
    expect(layer.kind != LayerKind::ReLU, ErrorKind::Training,
           "layer " + std::to_string(i) + " is a plain ReLU; swap activations before finetuning");
    if (layer.kind == LayerKind::QuantReLU)
      expect(layer.quant() == want, ErrorKind::Training,
             "QuantReLU at layer " + std::to_string(i) + " does not match the finetune config");
  }
  FinetuneResult result;
  result.net = net;
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.learning_rate = cfg.learning_rate;
  tc.momentum = cfg.momentum;
  tc.batch_size = cfg.batch_size;
  tc.loss = cfg.loss;
  tc.seed = cfg.seed;
  tc.threads = cfg.threads;
  result.metrics = train_sgd(result.net, data, tc);
  return result;
}

}  // namespace snnkit
