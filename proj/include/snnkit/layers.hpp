// Layer specifications and the single shared evaluator.
//
// Every place that computes a layer output (ANN forward, SNN per-step
// propagation, analytical rate checks) goes through eval_layer so the
// float32 arithmetic is bit-identical across all of them.
//
// Layout is channels-first, row-major. Strides and padding are explicit
// integers; padding is symmetric zero padding.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "snnkit/common.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

enum class LayerKind {
  Linear,
  Conv2D,
  StridedConv2D,     // depthwise strided convolution (pooling replacement)
  TransposedConv2D,  // depthwise transposed convolution (upsample replacement)
  BatchNorm,
  MaxPool2D,
  AvgPool2D,
  Upsample2D,  // nearest-neighbour placeholder, replaceable by TransposedConv2D
  ReLU,
  QuantReLU,
  Identity,
};

inline std::string_view layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Linear: return "Linear";
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::StridedConv2D: return "StridedConv2D";
    case LayerKind::TransposedConv2D: return "TransposedConv2D";
    case LayerKind::BatchNorm: return "BatchNorm";
    case LayerKind::MaxPool2D: return "MaxPool2D";
    case LayerKind::AvgPool2D: return "AvgPool2D";
    case LayerKind::Upsample2D: return "Upsample2D";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::QuantReLU: return "QuantReLU";
    case LayerKind::Identity: return "Identity";
  }
  return "?";
}

inline std::optional<LayerKind> layer_kind_from_name(std::string_view name) {
  for (LayerKind k : {LayerKind::Linear, LayerKind::Conv2D, LayerKind::StridedConv2D,
                      LayerKind::TransposedConv2D, LayerKind::BatchNorm, LayerKind::MaxPool2D,
                      LayerKind::AvgPool2D, LayerKind::Upsample2D, LayerKind::ReLU,
                      LayerKind::QuantReLU, LayerKind::Identity})
    if (layer_kind_name(k) == name) return k;
  return std::nullopt;
}

struct LinearParams {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]

  friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

struct Conv2DParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  Tensor weight;  // [out, in, k, k]
  Tensor bias;    // [out]

  friend bool operator==(const Conv2DParams&, const Conv2DParams&) = default;
};

// Shared by StridedConv2D and TransposedConv2D: one k x k kernel per channel.
struct DepthwiseParams {
  std::size_t channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  Tensor weight;  // [C, k, k]
  Tensor bias;    // [C]

  friend bool operator==(const DepthwiseParams&, const DepthwiseParams&) = default;
};

struct BatchNormParams {
  Tensor mean;   // [C]
  Tensor var;    // [C], all > 0
  Tensor gamma;  // [C]
  Tensor beta;   // [C]
  float epsilon = 1e-5f;

  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

struct PoolParams {
  std::size_t kernel = 2;
  std::size_t stride = 2;

  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

struct UpsampleParams {
  std::size_t factor = 2;

  friend bool operator==(const UpsampleParams&, const UpsampleParams&) = default;
};

struct QuantReluParams {
  int levels = 1;      // grid resolution 1/levels
  float offset = 0.5f; // in [0, 1)
  float clip = 1.0f;   // ceiling c

  friend bool operator==(const QuantReluParams&, const QuantReluParams&) = default;
};

// Quantization clipping function: clip_[0,c]( floor(x*levels + offset) / levels ).
// Internal math in double so the grid index is stable against float32 product
// rounding; the simulator's step-accumulation check depends on that.
inline float quant_relu_value(float x, const QuantReluParams& q) {
  const double scaled = static_cast<double>(x) * static_cast<double>(q.levels) + static_cast<double>(q.offset);
  double v = std::floor(scaled) / static_cast<double>(q.levels);
  if (v < 0.0) v = 0.0;
  if (v > static_cast<double>(q.clip)) v = static_cast<double>(q.clip);
  return static_cast<float>(v);
}

struct LayerSpec {
  LayerKind kind = LayerKind::Identity;
  std::variant<std::monostate, LinearParams, Conv2DParams, DepthwiseParams, BatchNormParams,
               PoolParams, UpsampleParams, QuantReluParams>
      params;

  bool has_weights() const {
    return kind == LayerKind::Linear || kind == LayerKind::Conv2D ||
           kind == LayerKind::StridedConv2D || kind == LayerKind::TransposedConv2D;
  }

  bool is_activation() const { return kind == LayerKind::ReLU || kind == LayerKind::QuantReLU; }

  LinearParams& linear() { return std::get<LinearParams>(params); }
  const LinearParams& linear() const { return std::get<LinearParams>(params); }
  Conv2DParams& conv() { return std::get<Conv2DParams>(params); }
  const Conv2DParams& conv() const { return std::get<Conv2DParams>(params); }
  DepthwiseParams& depthwise() { return std::get<DepthwiseParams>(params); }
  const DepthwiseParams& depthwise() const { return std::get<DepthwiseParams>(params); }
  BatchNormParams& batch_norm() { return std::get<BatchNormParams>(params); }
  const BatchNormParams& batch_norm() const { return std::get<BatchNormParams>(params); }
  PoolParams& pool() { return std::get<PoolParams>(params); }
  const PoolParams& pool() const { return std::get<PoolParams>(params); }
  UpsampleParams& upsample() { return std::get<UpsampleParams>(params); }
  const UpsampleParams& upsample() const { return std::get<UpsampleParams>(params); }
  QuantReluParams& quant() { return std::get<QuantReluParams>(params); }
  const QuantReluParams& quant() const { return std::get<QuantReluParams>(params); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// ---- factories (validate parameter shapes on construction) ----

inline LayerSpec make_linear(std::size_t in, std::size_t out, Tensor weight, Tensor bias) {
  expect(weight.shape() == Shape{out, in}, ErrorKind::Shape,
         "Linear weight must be [" + std::to_string(out) + "x" + std::to_string(in) + "], got " +
             shape_str(weight.shape()));
  expect(bias.shape() == Shape{out}, ErrorKind::Shape, "Linear bias must be [out]");
  LayerSpec s;
  s.kind = LayerKind::Linear;
  s.params = LinearParams{in, out, std::move(weight), std::move(bias)};
  return s;
}

inline LayerSpec make_linear(std::size_t in, std::size_t out) {
  return make_linear(in, out, Tensor({out, in}), Tensor({out}));
}

inline LayerSpec make_conv2d(std::size_t in_c, std::size_t out_c, std::size_t kernel,
                             std::size_t stride, std::size_t padding, Tensor weight, Tensor bias) {
  expect(kernel >= 1 && stride >= 1, ErrorKind::Shape, "Conv2D kernel and stride must be >= 1");
  expect(weight.shape() == Shape{out_c, in_c, kernel, kernel}, ErrorKind::Shape,
         "Conv2D weight must be [out,in,k,k], got " + shape_str(weight.shape()));
  expect(bias.shape() == Shape{out_c}, ErrorKind::Shape, "Conv2D bias must be [out]");
  LayerSpec s;
  s.kind = LayerKind::Conv2D;
  s.params = Conv2DParams{in_c, out_c, kernel, stride, padding, std::move(weight), std::move(bias)};
  return s;
}

inline LayerSpec make_conv2d(std::size_t in_c, std::size_t out_c, std::size_t kernel,
                             std::size_t stride = 1, std::size_t padding = 0) {
  return make_conv2d(in_c, out_c, kernel, stride, padding,
                     Tensor({out_c, in_c, kernel, kernel}), Tensor({out_c}));
}

inline LayerSpec make_depthwise(LayerKind kind, std::size_t channels, std::size_t kernel,
                                std::size_t stride, Tensor weight, Tensor bias) {
  expect(kind == LayerKind::StridedConv2D || kind == LayerKind::TransposedConv2D,
         ErrorKind::Shape, "depthwise kind must be StridedConv2D or TransposedConv2D");
  expect(kernel >= 1 && stride >= 1, ErrorKind::Shape, "depthwise kernel and stride must be >= 1");
  expect(weight.shape() == Shape{channels, kernel, kernel}, ErrorKind::Shape,
         "depthwise weight must be [C,k,k], got " + shape_str(weight.shape()));
  expect(bias.shape() == Shape{channels}, ErrorKind::Shape, "depthwise bias must be [C]");
  LayerSpec s;
  s.kind = kind;
  s.params = DepthwiseParams{channels, kernel, stride, std::move(weight), std::move(bias)};
  return s;
}

inline LayerSpec make_batch_norm(Tensor mean, Tensor var, Tensor gamma, Tensor beta,
                                 float epsilon = 1e-5f) {
  expect(mean.rank() == 1, ErrorKind::Shape, "BatchNorm stats must be rank-1 (per channel)");
  expect(mean.same_shape(var) && mean.same_shape(gamma) && mean.same_shape(beta),
         ErrorKind::Shape, "BatchNorm parameter shapes must all match");
  for (std::size_t i = 0; i < var.size(); ++i)
    expect(var[i] > 0.0f, ErrorKind::Shape, "BatchNorm variance must be positive");
  LayerSpec s;
  s.kind = LayerKind::BatchNorm;
  s.params = BatchNormParams{std::move(mean), std::move(var), std::move(gamma), std::move(beta), epsilon};
  return s;
}

inline LayerSpec make_max_pool2d(std::size_t kernel = 2, std::size_t stride = 2) {
  expect(kernel >= 1 && stride >= 1, ErrorKind::Shape, "pool kernel and stride must be >= 1");
  LayerSpec s;
  s.kind = LayerKind::MaxPool2D;
  s.params = PoolParams{kernel, stride};
  return s;
}

inline LayerSpec make_avg_pool2d(std::size_t kernel = 2, std::size_t stride = 2) {
  expect(kernel >= 1 && stride >= 1, ErrorKind::Shape, "pool kernel and stride must be >= 1");
  LayerSpec s;
  s.kind = LayerKind::AvgPool2D;
  s.params = PoolParams{kernel, stride};
  return s;
}

inline LayerSpec make_upsample2d(std::size_t factor = 2) {
  expect(factor >= 1, ErrorKind::Shape, "upsample factor must be >= 1");
  LayerSpec s;
  s.kind = LayerKind::Upsample2D;
  s.params = UpsampleParams{factor};
  return s;
}

inline LayerSpec make_relu() {
  LayerSpec s;
  s.kind = LayerKind::ReLU;
  return s;
}

inline LayerSpec make_quant_relu(int levels, float offset = 0.5f, float clip = 1.0f) {
  expect(levels >= 1, ErrorKind::Shape, "QuantReLU level count must be >= 1");
  expect(offset >= 0.0f && offset < 1.0f, ErrorKind::Shape, "QuantReLU offset must be in [0,1)");
  expect(clip > 0.0f, ErrorKind::Shape, "QuantReLU clip ceiling must be positive");
  LayerSpec s;
  s.kind = LayerKind::QuantReLU;
  s.params = QuantReluParams{levels, offset, clip};
  return s;
}

inline LayerSpec make_identity() { return LayerSpec{}; }

// ---- shape inference ----

inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                   std::size_t padding) {
  expect(in + 2 * padding >= kernel, ErrorKind::Shape,
         "spatial extent " + std::to_string(in) + " too small for kernel " + std::to_string(kernel));
  return (in + 2 * padding - kernel) / stride + 1;
}

inline Shape layer_output_shape(const LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::Linear: {
      const auto& p = layer.linear();
      expect(shape_numel(in) == p.in_features, ErrorKind::Shape,
             "Linear expects " + std::to_string(p.in_features) + " inputs, got " + shape_str(in));
      return {p.out_features};
    }
    case LayerKind::Conv2D: {
      const auto& p = layer.conv();
      expect(in.size() == 3 && in[0] == p.in_channels, ErrorKind::Shape,
             "Conv2D expects [" + std::to_string(p.in_channels) + ",H,W], got " + shape_str(in));
      return {p.out_channels, conv_out_extent(in[1], p.kernel, p.stride, p.padding),
              conv_out_extent(in[2], p.kernel, p.stride, p.padding)};
    }
    case LayerKind::StridedConv2D: {
      const auto& p = layer.depthwise();
      expect(in.size() == 3 && in[0] == p.channels, ErrorKind::Shape,
             "StridedConv2D expects [" + std::to_string(p.channels) + ",H,W], got " + shape_str(in));
      return {p.channels, conv_out_extent(in[1], p.kernel, p.stride, 0),
              conv_out_extent(in[2], p.kernel, p.stride, 0)};
    }
    case LayerKind::TransposedConv2D: {
      const auto& p = layer.depthwise();
      expect(in.size() == 3 && in[0] == p.channels, ErrorKind::Shape,
             "TransposedConv2D expects [" + std::to_string(p.channels) + ",H,W], got " + shape_str(in));
      return {p.channels, (in[1] - 1) * p.stride + p.kernel, (in[2] - 1) * p.stride + p.kernel};
    }
    case LayerKind::BatchNorm: {
      const auto& p = layer.batch_norm();
      const std::size_t channels = in.empty() ? 0 : in[0];
      expect((in.size() == 1 || in.size() == 3) && channels == p.mean.size(), ErrorKind::Shape,
             "BatchNorm over " + std::to_string(p.mean.size()) + " channels got input " + shape_str(in));
      return in;
    }
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D: {
      const auto& p = layer.pool();
      expect(in.size() == 3, ErrorKind::Shape, "pooling expects [C,H,W], got " + shape_str(in));
      return {in[0], conv_out_extent(in[1], p.kernel, p.stride, 0),
              conv_out_extent(in[2], p.kernel, p.stride, 0)};
    }
    case LayerKind::Upsample2D: {
      const auto& p = layer.upsample();
      expect(in.size() == 3, ErrorKind::Shape, "upsample expects [C,H,W], got " + shape_str(in));
      return {in[0], in[1] * p.factor, in[2] * p.factor};
    }
    case LayerKind::ReLU:
    case LayerKind::QuantReLU:
    case LayerKind::Identity:
      return in;
  }
  fail(ErrorKind::Shape, "unknown layer kind");
}

// ---- evaluation ----

namespace detail {

inline Tensor eval_linear(const LinearParams& p, const Tensor& in) {
  Tensor out({p.out_features});
  const float* w = p.weight.data();
  const float* x = in.data();
  for (std::size_t o = 0; o < p.out_features; ++o) {
    float acc = p.bias[o];
    const float* row = w + o * p.in_features;
    for (std::size_t i = 0; i < p.in_features; ++i) acc += row[i] * x[i];
    out[o] = acc;
  }
  return out;
}

inline Tensor eval_conv2d(const Conv2DParams& p, const Tensor& in) {
  const std::size_t ih = in.shape()[1], iw = in.shape()[2];
  const std::size_t oh = conv_out_extent(ih, p.kernel, p.stride, p.padding);
  const std::size_t ow = conv_out_extent(iw, p.kernel, p.stride, p.padding);
  Tensor out({p.out_channels, oh, ow});
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(p.padding);
  for (std::size_t oc = 0; oc < p.out_channels; ++oc) {
    const float bias = p.bias[oc];
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        float acc = bias;
        const std::ptrdiff_t base_y = static_cast<std::ptrdiff_t>(oy * p.stride) - pad;
        const std::ptrdiff_t base_x = static_cast<std::ptrdiff_t>(ox * p.stride) - pad;
        for (std::size_t ic = 0; ic < p.in_channels; ++ic) {
          const float* plane = in.data() + ic * ih * iw;
          const float* kplane = p.weight.data() + ((oc * p.in_channels + ic) * p.kernel) * p.kernel;
          for (std::size_t ky = 0; ky < p.kernel; ++ky) {
            const std::ptrdiff_t y = base_y + static_cast<std::ptrdiff_t>(ky);
            if (y < 0 || y >= static_cast<std::ptrdiff_t>(ih)) continue;
            const float* in_row = plane + y * static_cast<std::ptrdiff_t>(iw);
            const float* k_row = kplane + ky * p.kernel;
            for (std::size_t kx = 0; kx < p.kernel; ++kx) {
              const std::ptrdiff_t x = base_x + static_cast<std::ptrdiff_t>(kx);
              if (x < 0 || x >= static_cast<std::ptrdiff_t>(iw)) continue;
              acc += k_row[kx] * in_row[x];
            }
          }
        }
        out.at3(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

inline Tensor eval_strided_depthwise(const DepthwiseParams& p, const Tensor& in) {
  const std::size_t ih = in.shape()[1], iw = in.shape()[2];
  const std::size_t oh = conv_out_extent(ih, p.kernel, p.stride, 0);
  const std::size_t ow = conv_out_extent(iw, p.kernel, p.stride, 0);
  Tensor out({p.channels, oh, ow});
  for (std::size_t c = 0; c < p.channels; ++c) {
    const float* plane = in.data() + c * ih * iw;
    const float* kernel = p.weight.data() + c * p.kernel * p.kernel;
    const float bias = p.bias[c];
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        float acc = bias;
        for (std::size_t ky = 0; ky < p.kernel; ++ky) {
          const float* in_row = plane + (oy * p.stride + ky) * iw + ox * p.stride;
          const float* k_row = kernel + ky * p.kernel;
          for (std::size_t kx = 0; kx < p.kernel; ++kx) acc += k_row[kx] * in_row[kx];
        }
        out.at3(c, oy, ox) = acc;
      }
    }
  }
  return out;
}

inline Tensor eval_transposed_depthwise(const DepthwiseParams& p, const Tensor& in) {
  const std::size_t ih = in.shape()[1], iw = in.shape()[2];
  const std::size_t oh = (ih - 1) * p.stride + p.kernel;
  const std::size_t ow = (iw - 1) * p.stride + p.kernel;
  Tensor out({p.channels, oh, ow});
  for (std::size_t c = 0; c < p.channels; ++c) {
    float* oplane = out.data() + c * oh * ow;
    const float bias = p.bias[c];
    for (std::size_t i = 0; i < oh * ow; ++i) oplane[i] = bias;
    const float* plane = in.data() + c * ih * iw;
    const float* kernel = p.weight.data() + c * p.kernel * p.kernel;
    for (std::size_t iy = 0; iy < ih; ++iy) {
      for (std::size_t ix = 0; ix < iw; ++ix) {
        const float v = plane[iy * iw + ix];
        float* obase = oplane + (iy * p.stride) * ow + ix * p.stride;
        for (std::size_t ky = 0; ky < p.kernel; ++ky)
          for (std::size_t kx = 0; kx < p.kernel; ++kx)
            obase[ky * ow + kx] += kernel[ky * p.kernel + kx] * v;
      }
    }
  }
  return out;
}

inline Tensor eval_batch_norm(const BatchNormParams& p, const Tensor& in) {
  Tensor out(in.shape());
  const std::size_t channels = in.shape()[0];
  const std::size_t per_channel = in.size() / channels;
  for (std::size_t c = 0; c < channels; ++c) {
    const float scale = p.gamma[c] / std::sqrt(p.var[c] + p.epsilon);
    const float shift = p.beta[c] - p.mean[c] * scale;
    const float* src = in.data() + c * per_channel;
    float* dst = out.data() + c * per_channel;
    for (std::size_t i = 0; i < per_channel; ++i) dst[i] = src[i] * scale + shift;
  }
  return out;
}

template <bool kMax>
inline Tensor eval_pool(const PoolParams& p, const Tensor& in) {
  const std::size_t channels = in.shape()[0], ih = in.shape()[1], iw = in.shape()[2];
  const std::size_t oh = conv_out_extent(ih, p.kernel, p.stride, 0);
  const std::size_t ow = conv_out_extent(iw, p.kernel, p.stride, 0);
  Tensor out({channels, oh, ow});
  const float inv_area = 1.0f / static_cast<float>(p.kernel * p.kernel);
  for (std::size_t c = 0; c < channels; ++c) {
    const float* plane = in.data() + c * ih * iw;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        float acc = kMax ? plane[(oy * p.stride) * iw + ox * p.stride] : 0.0f;
        for (std::size_t ky = 0; ky < p.kernel; ++ky) {
          const float* row = plane + (oy * p.stride + ky) * iw + ox * p.stride;
          for (std::size_t kx = 0; kx < p.kernel; ++kx) {
            if constexpr (kMax)
              acc = std::max(acc, row[kx]);
            else
              // per-element scaling keeps the arithmetic identical to a
              // depthwise convolution with uniform 1/k^2 kernels
              acc += inv_area * row[kx];
          }
        }
        out.at3(c, oy, ox) = acc;
      }
    }
  }
  return out;
}

inline Tensor eval_upsample(const UpsampleParams& p, const Tensor& in) {
  const std::size_t channels = in.shape()[0], ih = in.shape()[1], iw = in.shape()[2];
  Tensor out({channels, ih * p.factor, iw * p.factor});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t y = 0; y < ih * p.factor; ++y)
      for (std::size_t x = 0; x < iw * p.factor; ++x)
        out.at3(c, y, x) = in.at3(c, y / p.factor, x / p.factor);
  return out;
}

}  // namespace detail

inline Tensor eval_layer(const LayerSpec& layer, const Tensor& in) {
  layer_output_shape(layer, in.shape());  // shape check with a uniform error
  switch (layer.kind) {
    case LayerKind::Linear:
      return detail::eval_linear(layer.linear(), in.rank() == 1 ? in : in.reshaped({in.size()}));
    case LayerKind::Conv2D:
      return detail::eval_conv2d(layer.conv(), in);
    case LayerKind::StridedConv2D:
      return detail::eval_strided_depthwise(layer.depthwise(), in);
    case LayerKind::TransposedConv2D:
      return detail::eval_transposed_depthwise(layer.depthwise(), in);
    case LayerKind::BatchNorm:
      return detail::eval_batch_norm(layer.batch_norm(), in);
    case LayerKind::MaxPool2D:
      return detail::eval_pool<true>(layer.pool(), in);
    case LayerKind::AvgPool2D:
      return detail::eval_pool<false>(layer.pool(), in);
    case LayerKind::Upsample2D:
      return detail::eval_upsample(layer.upsample(), in);
    case LayerKind::ReLU: {
      Tensor out = in;
      for (auto& v : out.values()) v = v > 0.0f ? v : 0.0f;
      return out;
    }
    case LayerKind::QuantReLU: {
      Tensor out = in;
      const auto& q = layer.quant();
      for (auto& v : out.values()) v = quant_relu_value(v, q);
      return out;
    }
    case LayerKind::Identity:
      return in;
  }
  fail(ErrorKind::Shape, "unknown layer kind");
}

}  // namespace snnkit
