// Reverse-mode gradients for the trainable layer set.
//
// MaxPool2D and BatchNorm are deliberately rejected: training runs either
// after fusion/replacement or on networks built without them.
#pragma once

#include <string>
#include <vector>

#include "snnkit/network.hpp"

namespace snnkit {

struct LayerGrads {
  bool has_params = false;
  Tensor weight;
  Tensor bias;
};

struct BackwardResult {
  std::vector<LayerGrads> layer_grads;  // one per layer, params only where trainable
  Tensor input_grad;
};

namespace detail {

inline Tensor backward_linear(const LinearParams& p, const Tensor& in, const Tensor& g,
                              LayerGrads& lg) {
  lg.has_params = true;
  lg.weight = Tensor(p.weight.shape());
  lg.bias = Tensor(p.bias.shape());
  Tensor flat_in = in.rank() == 1 ? in : in.reshaped({in.size()});
  Tensor dx({p.in_features});
  for (std::size_t o = 0; o < p.out_features; ++o) {
    const float go = g[o];
    lg.bias[o] = go;
    const float* wrow = p.weight.data() + o * p.in_features;
    float* dwrow = lg.weight.data() + o * p.in_features;
    for (std::size_t i = 0; i < p.in_features; ++i) {
      dwrow[i] = go * flat_in[i];
      dx[i] += wrow[i] * go;
    }
  }
  return dx.reshaped(in.shape());
}

inline Tensor backward_conv2d(const Conv2DParams& p, const Tensor& in, const Tensor& g,
                              LayerGrads& lg) {
  lg.has_params = true;
  lg.weight = Tensor(p.weight.shape());
  lg.bias = Tensor(p.bias.shape());
  Tensor dx(in.shape());
  const std::size_t ih = in.shape()[1], iw = in.shape()[2];
  const std::size_t oh = g.shape()[1], ow = g.shape()[2];
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(p.padding);
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    float bias_acc = 0.0f;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const float go = g.at3(oc, oy, ox);
        bias_acc += go;
        const std::ptrdiff_t base_y = static_cast<std::ptrdiff_t>(oy * p.stride) - pad;
        const std::ptrdiff_t base_x = static_cast<std::ptrdiff_t>(ox * p.stride) - pad;
        for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
          const float* in_plane = in.data() + ic * ih * iw;
          float* dx_plane = dx.data() + ic * ih * iw;
          const std::size_t koff = ((oc * p.in_channels + ic) * p.kernel) * p.kernel;
          const float* kplane = p.weight.data() + koff;
          float* dkplane = lg.weight.data() + koff;
          for (std::size_t ky = 0; ky < p.kernel; ++ky) {
            const std::ptrdiff_t y = base_y + static_cast<std::ptrdiff_t>(ky);
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(ih)) continue;
            for (std::size_t kx = 0; kx < p.kernel; ++kx) {
              const std::ptrdiff_t x = base_x + static_cast<std::ptrdiff_t>(kx);
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(iw)) continue;
              const std::size_t ii = static_cast<std::size_t>(y) * iw + static_cast<std::size_t>(x);
              dkplane[ky * p.kernel + kx] += go * in_plane[ii];
              dx_plane[ii] += go * kplane[ky * p.kernel + kx];
            }
          }
        }
      }
    }
    lg.bias[oc] = bias_acc;
  }
  return dx;
}

inline Tensor backward_strided_depthwise(const DepthwiseParams& p, const Tensor& in,
                                         const Tensor& g, LayerGrads& lg) {
  lg.has_params = true;
  lg.weight = Tensor(p.weight.shape());
  lg.bias = Tensor(p.bias.shape());
  Tensor dx(in.shape());
  const std::size_t ih = in.shape()[1], iw = in.shape()[2];
  const std::size_t oh = g.shape()[1], ow = g.shape()[2];
  for (std::size_t c = 0; c < p.channels; ++c) {
    const float* in_plane = in.data() + c * ih * iw;
    float* dx_plane = dx.data() + c * ih * iw;
    const float* kernel = p.weight.data() + c * p.kernel * p.kernel;
    float* dkernel = lg.weight.data() + c * p.kernel * p.kernel;
    float bias_acc = 0.0f;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const float go = g.at3(c, oy, ox);
        bias_acc += go;
        for (std::size_t ky = 0; ky < p.kernel; ++ky) {
          const std::size_t y = oy * p.stride + ky;
          for (std::size_t kx = 0; kx < p.kernel; ++kx) {
            const std::size_t x = ox * p.stride + kx;
            dkernel[ky * p.kernel + kx] += go * in_plane[y * iw + x];
            dx_plane[y * iw + x] += go * kernel[ky * p.kernel + kx];
          }
        }
      }
    }
    lg.bias[c] = bias_acc;
  }
  return dx;
}

inline Tensor backward_transposed_depthwise(const DepthwiseParams& p, const Tensor& in,
                                            const Tensor& g, LayerGrads& lg) {
  lg.has_params = true;
  lg.weight = Tensor(p.weight.shape());
  lg.bias = Tensor(p.bias.shape());
  Tensor dx(in.shape());
  const std::size_t ih = in.shape()[1], iw = in.shape()[2];
  const std::size_t ow = g.shape()[2];
  for (std::size_t c = 0; c < p.channels; ++c) {
    const float* in_plane = in.data() + c * ih * iw;
    float* dx_plane = dx.data() + c * ih * iw;
    const float* kernel = p.weight.data() + c * p.kernel * p.kernel;
    float* dkernel = lg.weight.data() + c * p.kernel * p.kernel;
    const float* g_plane = g.data() + c * g.shape()[1] * ow;
    float bias_acc = 0.0f;
    for (std::size_t i = 0; i < g.shape()[1] * ow; ++i) bias_acc += g_plane[i];
    for (std::size_t iy = 0; iy < ih; ++iy) {
      for (std::size_t ix = 0; ix < iw; ++ix) {
        const float v = in_plane[iy * iw + ix];
        const float* gbase = g_plane + (iy * p.stride) * ow + ix * p.stride;
        float acc = 0.0f;
        for (std::size_t ky = 0; ky < p.kernel; ++ky) {
          for (std::size_t kx = 0; kx < p.kernel; ++kx) {
            const float go = gbase[ky * ow + kx];
            dkernel[ky * p.kernel + kx] += go * v;
            acc += go * kernel[ky * p.kernel + kx];
          }
        }
        dx_plane[iy * iw + ix] = acc;
      }
    }
    lg.bias[c] = bias_acc;
  }
  return dx;
}

inline Tensor backward_avg_pool(const PoolParams& p, const Tensor& in, const Tensor& g) {
  Tensor dx(in.shape());
  const std::size_t channels = in.shape()[0], ih = in.shape()[1], iw = in.shape()[2];
  const std::size_t oh = g.shape()[1], ow = g.shape()[2];
  const float inv_area = 1.0f / static_cast<float>(p.kernel * p.kernel);
  for (std::size_t c = 0; c < channels; ++c) {
    float* dx_plane = dx.data() + c * ih * iw;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const float go = g.at3(c, oy, ox) * inv_area;
        for (std::size_t ky = 0; ky < p.kernel; ++ky)
          for (std::size_t kx = 0; kx < p.kernel; ++kx)
            dx_plane[(oy * p.stride + ky) * iw + ox * p.stride + kx] += go;
      }
  }
  return dx;
}

inline Tensor backward_upsample(const UpsampleParams& p, const Tensor& in, const Tensor& g) {
  Tensor dx(in.shape());
  const std::size_t channels = in.shape()[0];
  const std::size_t gh = g.shape()[1], gw = g.shape()[2];
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < gh; ++y)
      for (std::size_t x = 0; x < gw; ++x)
        dx.at3(c, y / p.factor, x / p.factor) += g.at3(c, y, x);
  return dx;
}

}  // namespace detail

// Gradients of a scalar loss w.r.t. every parameter and the input, given the
// loss gradient at the network output. QuantReLU uses a straight-through
// estimator: identity inside (0, clip), zero elsewhere.
inline BackwardResult backward(const NetworkGraph& net, const Tensor& x, const Tensor& grad_out) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerKind k = net.layers[i].kind;
    if (k == LayerKind::MaxPool2D || k == LayerKind::BatchNorm)
      fail(ErrorKind::Training, std::string(layer_kind_name(k)) + " at layer " + std::to_string(i) +
                                    " is not supported for training; fuse or replace it first");
  }
  const std::vector<Tensor> acts = forward(net, x);
  BackwardResult res;
  res.layer_grads.resize(net.layers.size());
  Tensor g = grad_out;
  const Shape out_shape = acts.empty() ? x.shape() : acts.back().shape();
  expect(g.shape() == out_shape, ErrorKind::Shape,
         "output gradient shape " + shape_str(g.shape()) + " does not match network output " +
             shape_str(out_shape));
  for (std::size_t idx = net.layers.size(); idx-- > 0;) {
    const LayerSpec& layer = net.layers[idx];
    const Tensor& in = idx == 0 ? x : acts[idx - 1];
    LayerGrads& lg = res.layer_grads[idx];
    switch (layer.kind) {
      case LayerKind::Linear:
        g = detail::backward_linear(layer.linear(), in, g, lg);
        break;
      case LayerKind::Conv2D:
        g = detail::backward_conv2d(layer.conv(), in, g, lg);
        break;
      case LayerKind::StridedConv2D:
        g = detail::backward_strided_depthwise(layer.depthwise(), in, g, lg);
        break;
      case LayerKind::TransposedConv2D:
        g = detail::backward_transposed_depthwise(layer.depthwise(), in, g, lg);
        break;
      case LayerKind::AvgPool2D:
        g = detail::backward_avg_pool(layer.pool(), in, g);
        break;
      case LayerKind::Upsample2D:
        g = detail::backward_upsample(layer.upsample(), in, g);
        break;
      case LayerKind::ReLU: {
        Tensor dg = g;
        for (std::size_t i = 0; i < in.size(); ++i)
          if (in[i] <= 0.0f) dg[i] = 0.0f;
        g = std::move(dg);
        break;
      }
      case LayerKind::QuantReLU: {
        const auto& q = layer.quant();
        Tensor dg = g;
        for (std::size_t i = 0; i < in.size(); ++i)
          if (in[i] <= 0.0f || in[i] >= q.clip) dg[i] = 0.0f;
        g = std::move(dg);
        break;
      }
      case LayerKind::Identity:
        break;
      case LayerKind::MaxPool2D:
      case LayerKind::BatchNorm:
        fail(ErrorKind::Training, "unreachable");
    }
  }
  res.input_grad = std::move(g);
  return res;
}

}  // namespace snnkit
