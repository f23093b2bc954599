// Test-only oracles and generators.
//
// naive_forward is an independent straight-line re-implementation of the
// layer semantics (plain loops, double accumulators, no shared code with the
// library evaluator); finite-difference gradients are the oracle for
// backward. Keep both independent of the code they check.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "snnkit/autodiff.hpp"
#include "snnkit/network.hpp"
#include "snnkit/rng.hpp"

namespace testutil {

using namespace snnkit;

// ---- independent forward oracle ----

inline std::vector<double> to_doubles(const Tensor& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

inline std::vector<double> naive_layer(const LayerSpec& layer, const std::vector<double>& x,
                                       const Shape& in_shape, Shape& out_shape) {
  switch (layer.kind) {
    case LayerKind::Linear: {
      const auto& p = layer.linear();
      out_shape = {p.out_features};
      std::vector<double> y(p.out_features, 0.0);
      for (std::size_t o = 0; o < p.out_features; ++o) {
        double acc = p.bias[o];
        for (std::size_t i = 0; i < p.in_features; ++i)
          acc += static_cast<double>(p.weight[o * p.in_features + i]) * x[i];
        y[o] = acc;
      }
      return y;
    }
    case LayerKind::Conv2D: {
      const auto& p = layer.conv();
      const std::size_t ih = in_shape[1], iw = in_shape[2];
      const std::size_t oh = (ih + 2 * p.padding - p.kernel) / p.stride + 1;
      const std::size_t ow = (iw + 2 * p.padding - p.kernel) / p.stride + 1;
      out_shape = {p.out_channels, oh, ow};
      std::vector<double> y(p.out_channels * oh * ow, 0.0);
      for (std::size_t oc = 0; oc < p.out_channels; ++oc)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            double acc = p.bias[oc];
            for (std::size_t ic = 0; ic < p.in_channels; ++ic)
              for (std::size_t ky = 0; ky < p.kernel; ++ky)
                for (std::size_t kx = 0; kx < p.kernel; ++kx) {
                  const long y_in = static_cast<long>(oy * p.stride + ky) - static_cast<long>(p.padding);
                  const long x_in = static_cast<long>(ox * p.stride + kx) - static_cast<long>(p.padding);
                  if (y_in < 0 || x_in < 0 || y_in >= static_cast<long>(ih) || x_in >= static_cast<long>(iw))
                    continue;
                  acc += static_cast<double>(
                             p.weight[((oc * p.in_channels + ic) * p.kernel + ky) * p.kernel + kx]) *
                         x[(ic * ih + static_cast<std::size_t>(y_in)) * iw + static_cast<std::size_t>(x_in)];
                }
            y[(oc * oh + oy) * ow + ox] = acc;
          }
      return y;
    }
    case LayerKind::StridedConv2D: {
      const auto& p = layer.depthwise();
      const std::size_t ih = in_shape[1], iw = in_shape[2];
      const std::size_t oh = (ih - p.kernel) / p.stride + 1;
      const std::size_t ow = (iw - p.kernel) / p.stride + 1;
      out_shape = {p.channels, oh, ow};
      std::vector<double> y(p.channels * oh * ow, 0.0);
      for (std::size_t c = 0; c < p.channels; ++c)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            double acc = p.bias[c];
            for (std::size_t ky = 0; ky < p.kernel; ++ky)
              for (std::size_t kx = 0; kx < p.kernel; ++kx)
                acc += static_cast<double>(p.weight[(c * p.kernel + ky) * p.kernel + kx]) *
                       x[(c * ih + oy * p.stride + ky) * iw + ox * p.stride + kx];
            y[(c * oh + oy) * ow + ox] = acc;
          }
      return y;
    }
    case LayerKind::TransposedConv2D: {
      const auto& p = layer.depthwise();
      const std::size_t ih = in_shape[1], iw = in_shape[2];
      const std::size_t oh = (ih - 1) * p.stride + p.kernel;
      const std::size_t ow = (iw - 1) * p.stride + p.kernel;
      out_shape = {p.channels, oh, ow};
      std::vector<double> y(p.channels * oh * ow, 0.0);
      for (std::size_t c = 0; c < p.channels; ++c) {
        for (std::size_t i = 0; i < oh * ow; ++i) y[c * oh * ow + i] = p.bias[c];
        for (std::size_t iy = 0; iy < ih; ++iy)
          for (std::size_t ix = 0; ix < iw; ++ix)
            for (std::size_t ky = 0; ky < p.kernel; ++ky)
              for (std::size_t kx = 0; kx < p.kernel; ++kx)
                y[(c * oh + iy * p.stride + ky) * ow + ix * p.stride + kx] +=
                    static_cast<double>(p.weight[(c * p.kernel + ky) * p.kernel + kx]) *
                    x[(c * ih + iy) * iw + ix];
      }
      return y;
    }
    case LayerKind::BatchNorm: {
      const auto& p = layer.batch_norm();
      out_shape = in_shape;
      const std::size_t channels = in_shape[0];
      const std::size_t per = x.size() / channels;
      std::vector<double> y(x.size());
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < per; ++i)
          y[c * per + i] = (x[c * per + i] - static_cast<double>(p.mean[c])) /
                               std::sqrt(static_cast<double>(p.var[c]) + static_cast<double>(p.epsilon)) *
                               static_cast<double>(p.gamma[c]) +
                           static_cast<double>(p.beta[c]);
      return y;
    }
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D: {
      const auto& p = layer.pool();
      const std::size_t channels = in_shape[0], ih = in_shape[1], iw = in_shape[2];
      const std::size_t oh = (ih - p.kernel) / p.stride + 1;
      const std::size_t ow = (iw - p.kernel) / p.stride + 1;
      out_shape = {channels, oh, ow};
      std::vector<double> y(channels * oh * ow);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t oy = 0; oy < oh; ++oy)
          for (std::size_t ox = 0; ox < ow; ++ox) {
            double best = -1e300, sum = 0.0;
            for (std::size_t ky = 0; ky < p.kernel; ++ky)
              for (std::size_t kx = 0; kx < p.kernel; ++kx) {
                const double v = x[(c * ih + oy * p.stride + ky) * iw + ox * p.stride + kx];
                best = std::max(best, v);
                sum += v;
              }
            y[(c * oh + oy) * ow + ox] = layer.kind == LayerKind::MaxPool2D
                                             ? best
                                             : sum / static_cast<double>(p.kernel * p.kernel);
          }
      return y;
    }
    case LayerKind::Upsample2D: {
      const std::size_t f = layer.upsample().factor;
      const std::size_t channels = in_shape[0], ih = in_shape[1], iw = in_shape[2];
      out_shape = {channels, ih * f, iw * f};
      std::vector<double> y(channels * ih * f * iw * f);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t yy = 0; yy < ih * f; ++yy)
          for (std::size_t xx = 0; xx < iw * f; ++xx)
            y[(c * ih * f + yy) * iw * f + xx] = x[(c * ih + yy / f) * iw + xx / f];
      return y;
    }
    case LayerKind::ReLU: {
      out_shape = in_shape;
      std::vector<double> y(x);
      for (auto& v : y) v = v > 0.0 ? v : 0.0;
      return y;
    }
    case LayerKind::QuantReLU: {
      const auto& q = layer.quant();
      out_shape = in_shape;
      std::vector<double> y(x);
      for (auto& v : y) {
        v = std::floor(v * q.levels + static_cast<double>(q.offset)) / q.levels;
        v = std::min(static_cast<double>(q.clip), std::max(0.0, v));
      }
      return y;
    }
    case LayerKind::Identity:
      out_shape = in_shape;
      return x;
  }
  throw std::runtime_error("naive_layer: unknown kind");
}

inline std::vector<double> naive_forward(const NetworkGraph& net, const Tensor& x) {
  std::vector<double> cur = to_doubles(x);
  Shape shape = x.shape();
  for (const auto& layer : net.layers) {
    Shape next;
    // Linear flattens implicitly, mirror that
    Shape effective = layer.kind == LayerKind::Linear ? Shape{cur.size()} : shape;
    cur = naive_layer(layer, cur, effective, next);
    shape = next;
  }
  return cur;
}

// ---- finite-difference gradient oracle ----

struct ParamRef {
  std::size_t layer = 0;
  bool is_bias = false;
  std::size_t index = 0;
};

inline float* param_ptr(NetworkGraph& net, const ParamRef& ref) {
  LayerSpec& layer = net.layers[ref.layer];
  Tensor* t = nullptr;
  switch (layer.kind) {
    case LayerKind::Linear: t = ref.is_bias ? &layer.linear().bias : &layer.linear().weight; break;
    case LayerKind::Conv2D: t = ref.is_bias ? &layer.conv().bias : &layer.conv().weight; break;
    case LayerKind::StridedConv2D:
    case LayerKind::TransposedConv2D:
      t = ref.is_bias ? &layer.depthwise().bias : &layer.depthwise().weight;
      break;
    default: return nullptr;
  }
  return t->data() + ref.index;
}

// central differences on a scalar loss; returns max relative error over all
// parameters of all trainable layers
inline double finite_diff_max_rel_err(const NetworkGraph& net, const Tensor& x,
                                      const std::function<double(const Tensor&)>& loss_value,
                                      const std::function<Tensor(const Tensor&)>& loss_grad,
                                      double h = 1e-3) {
  NetworkGraph work = net;
  const Tensor out = forward_output(work, x);
  const BackwardResult back = backward(work, x, loss_grad(out));

  double worst = 0.0;
  for (std::size_t l = 0; l < work.layers.size(); ++l) {
    if (!back.layer_grads[l].has_params) continue;
    for (int which = 0; which < 2; ++which) {
      const bool is_bias = which == 1;
      const Tensor& g = is_bias ? back.layer_grads[l].bias : back.layer_grads[l].weight;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ParamRef ref{l, is_bias, i};
        float* p = param_ptr(work, ref);
        const float saved = *p;
        *p = saved + static_cast<float>(h);
        const double up = loss_value(forward_output(work, x));
        *p = saved - static_cast<float>(h);
        const double down = loss_value(forward_output(work, x));
        *p = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = static_cast<double>(g[i]);
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
        worst = std::max(worst, std::abs(numeric - analytic) / scale);
      }
    }
  }
  return worst;
}

// ---- random generators ----

inline Tensor random_tensor(Rng& rng, Shape shape, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniformf(lo, hi);
  return t;
}

inline NetworkGraph random_mlp(Rng& rng, std::vector<std::size_t> widths, bool relu_between = true,
                               float weight_scale = 0.5f) {
  NetworkGraph net;
  net.input_shape = {widths.front()};
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    Tensor w({widths[i + 1], widths[i]});
    for (auto& v : w.values()) v = rng.normalf(0.0f, weight_scale / std::sqrt(static_cast<float>(widths[i])));
    Tensor b({widths[i + 1]});
    for (auto& v : b.values()) v = rng.uniformf(-0.1f, 0.1f);
    net.layers.push_back(make_linear(widths[i], widths[i + 1], std::move(w), std::move(b)));
    if (relu_between && i + 2 < widths.size()) net.layers.push_back(make_relu());
  }
  return net;
}

inline double mse_to_zero(const Tensor& out) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i)
    acc += static_cast<double>(out[i]) * static_cast<double>(out[i]);
  return acc / static_cast<double>(out.size());
}

inline Tensor mse_to_zero_grad(const Tensor& out) {
  Tensor g(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i)
    g[i] = 2.0f * out[i] / static_cast<float>(out.size());
  return g;
}

}  // namespace testutil
