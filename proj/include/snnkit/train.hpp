// Plain SGD + momentum trainer with MSE and softmax cross-entropy losses.
//
// Batch gradients may be computed by worker threads; the reduction always
// sums per-sample results in index order, so the outcome is bit-identical
// for any worker count.
#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "snnkit/autodiff.hpp"
#include "snnkit/network.hpp"
#include "snnkit/rng.hpp"

namespace snnkit {

enum class LossKind { MeanSquaredError, SoftmaxCrossEntropy };

struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<int> labels;     // classification targets
  std::vector<Tensor> targets; // regression targets
  int num_classes = 0;

  std::size_t size() const { return inputs.size(); }
};

struct LossGrad {
  double loss = 0.0;
  Tensor grad;
  bool correct = false;  // argmax hit, classification only
};

inline LossGrad mse_loss(const Tensor& output, const Tensor& target) {
  expect(output.same_shape(target), ErrorKind::Shape, "MSE target shape mismatch");
  LossGrad r;
  r.grad = Tensor(output.shape());
  const double inv_n = 1.0 / static_cast<double>(output.size());
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double d = static_cast<double>(output[i]) - static_cast<double>(target[i]);
    r.loss += d * d * inv_n;
    r.grad[i] = static_cast<float>(2.0 * d * inv_n);
  }
  return r;
}

inline LossGrad softmax_ce_loss(const Tensor& output, int label) {
  expect(label >= 0 && static_cast<std::size_t>(label) < output.size(), ErrorKind::Training,
         "class label out of range");
  LossGrad r;
  r.grad = Tensor(output.shape());
  const float m = output.max();
  double z = 0.0;
  for (std::size_t i = 0; i < output.size(); ++i) z += std::exp(static_cast<double>(output[i] - m));
  for (std::size_t i = 0; i < output.size(); ++i) {
    const double p = std::exp(static_cast<double>(output[i] - m)) / z;
    r.grad[i] = static_cast<float>(p - (static_cast<int>(i) == label ? 1.0 : 0.0));
    if (static_cast<int>(i) == label) r.loss = -std::log(p > 1e-300 ? p : 1e-300);
  }
  r.correct = static_cast<int>(argmax(output)) == label;
  return r;
}

inline LossGrad sample_loss(LossKind kind, const Tensor& output, const Dataset& data, std::size_t i) {
  if (kind == LossKind::MeanSquaredError) return mse_loss(output, data.targets[i]);
  return softmax_ce_loss(output, data.labels[i]);
}

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 16;
  LossKind loss = LossKind::SoftmaxCrossEntropy;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

inline std::string metrics_to_csv(const std::vector<EpochMetrics>& rows) {
  std::string out = "epoch,loss,accuracy\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + "," + num_str(r.loss) + "," + num_str(r.accuracy) + "\n";
  return out;
}

// Mean loss (and accuracy for classification) over a dataset, no updates.
inline EpochMetrics evaluate(const NetworkGraph& net, const Dataset& data, LossKind loss) {
  EpochMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Tensor out = forward_output(net, data.inputs[i]);
    const LossGrad lg = sample_loss(loss, out, data, i);
    m.loss += lg.loss;
    if (lg.correct) ++correct;
  }
  if (data.size() > 0) {
    m.loss /= static_cast<double>(data.size());
    m.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  }
  return m;
}

namespace detail {

template <typename Fn>
inline void indexed_parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    } catch (...) {
      const std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min<int>(threads, static_cast<int>(n));
  pool.reserve(static_cast<std::size_t>(count) - 1);
  for (int t = 1; t < count; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void accumulate_grads(std::vector<LayerGrads>& total, const std::vector<LayerGrads>& part) {
  if (total.empty()) {
    total = part;
    return;
  }
  for (std::size_t l = 0; l < total.size(); ++l) {
    if (!part[l].has_params) continue;
    if (!total[l].has_params) {
      total[l] = part[l];
      continue;
    }
    for (std::size_t i = 0; i < total[l].weight.size(); ++i) total[l].weight[i] += part[l].weight[i];
    for (std::size_t i = 0; i < total[l].bias.size(); ++i) total[l].bias[i] += part[l].bias[i];
  }
}

}  // namespace detail

// In-place SGD with momentum. Throws a training error naming the epoch and
// batch if the loss stops being finite.
inline std::vector<EpochMetrics> train_sgd(NetworkGraph& net, const Dataset& data,
                                           const TrainConfig& cfg) {
  expect(data.size() > 0, ErrorKind::Training, "empty training set");
  expect(cfg.batch_size >= 1, ErrorKind::Training, "batch size must be >= 1");
  validate(net);

  std::vector<LayerGrads> velocity(net.layers.size());
  std::vector<EpochMetrics> history;
  Rng rng(cfg.seed);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_correct = 0;
    std::size_t seen = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t count = stop - start;

      std::vector<BackwardResult> parts(count);
      std::vector<LossGrad> losses(count);
      try {
        detail::indexed_parallel_for(count, cfg.threads, [&](std::size_t k) {
          const std::size_t idx = order[start + k];
          const Tensor out = forward_output(net, data.inputs[idx]);
          losses[k] = sample_loss(cfg.loss, out, data, idx);
          parts[k] = backward(net, data.inputs[idx], losses[k].grad);
        });
      } catch (const Error& e) {
        fail(ErrorKind::Training, "diverged at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_index) + ": " + e.what());
      }

      std::vector<LayerGrads> grads;
      double batch_loss = 0.0;
      for (std::size_t k = 0; k < count; ++k) {  // fixed-order reduction
        detail::accumulate_grads(grads, parts[k].layer_grads);
        batch_loss += losses[k].loss;
        if (losses[k].correct) ++epoch_correct;
      }
      batch_loss /= static_cast<double>(count);
      expect(std::isfinite(batch_loss), ErrorKind::Training,
             "loss diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      epoch_loss += batch_loss * static_cast<double>(count);
      seen += count;

      const float scale = static_cast<float>(1.0 / static_cast<double>(count));
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        if (!grads[l].has_params) continue;
        auto& v = velocity[l];
        if (!v.has_params) {
          v.has_params = true;
          v.weight = Tensor(grads[l].weight.shape());
          v.bias = Tensor(grads[l].bias.shape());
        }
        auto update = [&](Tensor& param, Tensor& vel, const Tensor& grad) {
          for (std::size_t i = 0; i < param.size(); ++i) {
            vel[i] = static_cast<float>(cfg.momentum) * vel[i] -
                     static_cast<float>(cfg.learning_rate) * grad[i] * scale;
            param[i] += vel[i];
          }
        };
        LayerSpec& layer = net.layers[l];
        switch (layer.kind) {
          case LayerKind::Linear:
            update(layer.linear().weight, v.weight, grads[l].weight);
            update(layer.linear().bias, v.bias, grads[l].bias);
            break;
          case LayerKind::Conv2D:
            update(layer.conv().weight, v.weight, grads[l].weight);
            update(layer.conv().bias, v.bias, grads[l].bias);
            break;
          case LayerKind::StridedConv2D:
          case LayerKind::TransposedConv2D:
            update(layer.depthwise().weight, v.weight, grads[l].weight);
            update(layer.depthwise().bias, v.bias, grads[l].bias);
            break;
          default:
            break;
        }
      }
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = epoch_loss / static_cast<double>(seen);
    m.accuracy = cfg.loss == LossKind::SoftmaxCrossEntropy
                     ? static_cast<double>(epoch_correct) / static_cast<double>(seen)
                     : 0.0;
    history.push_back(m);
  }
  return history;
}

}  // namespace snnkit
