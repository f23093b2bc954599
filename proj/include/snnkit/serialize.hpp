// Network file I/O.
//
// Networks are stored as JSON with a top-level "layers" array. Weight data is
// base64-encoded little-endian float32, so round trips are bit-exact and the
// emitted text is byte-reproducible. See docs/FORMATS.md for the field list.
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "snnkit/network.hpp"

namespace snnkit {

using Json = nlohmann::ordered_json;

namespace detail {

inline const char* kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kBase64Alphabet[(n >> 18) & 63];
    out += kBase64Alphabet[(n >> 12) & 63];
    out += kBase64Alphabet[(n >> 6) & 63];
    out += kBase64Alphabet[n & 63];
  }
  if (i + 1 == bytes.size()) {
    const std::uint32_t n = bytes[i] << 16;
    out += kBase64Alphabet[(n >> 18) & 63];
    out += kBase64Alphabet[(n >> 12) & 63];
    out += "==";
  } else if (i + 2 == bytes.size()) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kBase64Alphabet[(n >> 18) & 63];
    out += kBase64Alphabet[(n >> 12) & 63];
    out += kBase64Alphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::vector<std::uint8_t> base64_decode(const std::string& text) {
  std::int8_t rev[256];
  for (int i = 0; i < 256; ++i) rev[i] = -1;
  for (int i = 0; i < 64; ++i) rev[static_cast<unsigned char>(kBase64Alphabet[i])] = static_cast<std::int8_t>(i);
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const std::int8_t v = rev[static_cast<unsigned char>(c)];
    expect(v >= 0, ErrorKind::Format, "invalid base64 character");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xff));
    }
  }
  return out;
}

inline std::string encode_floats(const Tensor& t) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(t.size() * 4);
  for (float f : t.values()) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
    bytes.push_back(static_cast<std::uint8_t>(u & 0xff));
    bytes.push_back(static_cast<std::uint8_t>((u >> 8) & 0xff));
    bytes.push_back(static_cast<std::uint8_t>((u >> 16) & 0xff));
    bytes.push_back(static_cast<std::uint8_t>((u >> 24) & 0xff));
  }
  return base64_encode(bytes);
}

inline Tensor decode_floats(const std::string& text, Shape shape) {
  const auto bytes = base64_decode(text);
  expect(bytes.size() == shape_numel(shape) * 4, ErrorKind::Format,
         "float array has " + std::to_string(bytes.size() / 4) + " values, expected " +
             std::to_string(shape_numel(shape)) + " for shape " + shape_str(shape));
  std::vector<float> vals(bytes.size() / 4);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * i]) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                            (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    vals[i] = std::bit_cast<float>(u);
  }
  return Tensor(std::move(shape), std::move(vals));
}

}  // namespace detail

inline Json layer_to_json(const LayerSpec& layer) {
  Json j;
  j["kind"] = std::string(layer_kind_name(layer.kind));
  switch (layer.kind) {
    case LayerKind::Linear: {
      const auto& p = layer.linear();
      j["in_features"] = p.in_features;
      j["out_features"] = p.out_features;
      j["w"] = detail::encode_floats(p.weight);
      j["b"] = detail::encode_floats(p.bias);
      break;
    }
    case LayerKind::Conv2D: {
      const auto& p = layer.conv();
      j["in_channels"] = p.in_channels;
      j["out_channels"] = p.out_channels;
      j["kernel"] = p.kernel;
      j["stride"] = p.stride;
      j["padding"] = p.padding;
      j["w"] = detail::encode_floats(p.weight);
      j["b"] = detail::encode_floats(p.bias);
      break;
    }
    case LayerKind::StridedConv2D:
    case LayerKind::TransposedConv2D: {
      const auto& p = layer.depthwise();
      j["channels"] = p.channels;
      j["kernel"] = p.kernel;
      j["stride"] = p.stride;
      j["w"] = detail::encode_floats(p.weight);
      j["b"] = detail::encode_floats(p.bias);
      break;
    }
    case LayerKind::BatchNorm: {
      const auto& p = layer.batch_norm();
      j["channels"] = p.mean.size();
      j["mean"] = detail::encode_floats(p.mean);
      j["var"] = detail::encode_floats(p.var);
      j["gamma"] = detail::encode_floats(p.gamma);
      j["beta"] = detail::encode_floats(p.beta);
      j["epsilon"] = p.epsilon;
      break;
    }
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D: {
      const auto& p = layer.pool();
      j["kernel"] = p.kernel;
      j["stride"] = p.stride;
      break;
    }
    case LayerKind::Upsample2D:
      j["factor"] = layer.upsample().factor;
      break;
    case LayerKind::QuantReLU: {
      const auto& p = layer.quant();
      j["levels"] = p.levels;
      j["offset"] = p.offset;
      j["clip"] = p.clip;
      break;
    }
    case LayerKind::ReLU:
    case LayerKind::Identity:
      break;
  }
  return j;
}

inline LayerSpec layer_from_json(const Json& j) {
  expect(j.contains("kind") && j["kind"].is_string(), ErrorKind::Format, "layer entry missing kind");
  const auto kind = layer_kind_from_name(j["kind"].get<std::string>());
  expect(kind.has_value(), ErrorKind::Format, "unknown layer kind " + j["kind"].get<std::string>());
  auto shape_of = [&](const char* key) {
    return static_cast<std::size_t>(j.at(key).get<std::uint64_t>());
  };
  switch (*kind) {
    case LayerKind::Linear: {
      const std::size_t in = shape_of("in_features"), out = shape_of("out_features");
      return make_linear(in, out, detail::decode_floats(j.at("w"), {out, in}),
                         detail::decode_floats(j.at("b"), {out}));
    }
    case LayerKind::Conv2D: {
      const std::size_t in_c = shape_of("in_channels"), out_c = shape_of("out_channels");
      const std::size_t k = shape_of("kernel"), s = shape_of("stride"), pad = shape_of("padding");
      return make_conv2d(in_c, out_c, k, s, pad, detail::decode_floats(j.at("w"), {out_c, in_c, k, k}),
                         detail::decode_floats(j.at("b"), {out_c}));
    }
    case LayerKind::StridedConv2D:
    case LayerKind::TransposedConv2D: {
      const std::size_t c = shape_of("channels"), k = shape_of("kernel"), s = shape_of("stride");
      return make_depthwise(*kind, c, k, s, detail::decode_floats(j.at("w"), {c, k, k}),
                            detail::decode_floats(j.at("b"), {c}));
    }
    case LayerKind::BatchNorm: {
      const std::size_t c = shape_of("channels");
      return make_batch_norm(detail::decode_floats(j.at("mean"), {c}),
                             detail::decode_floats(j.at("var"), {c}),
                             detail::decode_floats(j.at("gamma"), {c}),
                             detail::decode_floats(j.at("beta"), {c}), j.at("epsilon").get<float>());
    }
    case LayerKind::MaxPool2D:
      return make_max_pool2d(shape_of("kernel"), shape_of("stride"));
    case LayerKind::AvgPool2D:
      return make_avg_pool2d(shape_of("kernel"), shape_of("stride"));
    case LayerKind::Upsample2D:
      return make_upsample2d(shape_of("factor"));
    case LayerKind::ReLU:
      return make_relu();
    case LayerKind::QuantReLU:
      return make_quant_relu(j.at("levels").get<int>(), j.at("offset").get<float>(),
                             j.at("clip").get<float>());
    case LayerKind::Identity:
      return make_identity();
  }
  fail(ErrorKind::Format, "unknown layer kind");
}

inline Json network_to_json(const NetworkGraph& net) {
  Json j;
  j["format"] = "snnkit-network";
  j["version"] = 1;
  j["input_shape"] = net.input_shape;
  j["layers"] = Json::array();
  for (const auto& layer : net.layers) j["layers"].push_back(layer_to_json(layer));
  if (net.normalization.has_value()) {
    const auto& n = *net.normalization;
    Json nj;
    nj["percentile"] = n.percentile;
    nj["lambdas"] = n.lambdas;
    nj["site_layers"] = n.site_layers;
    nj["post_norm_max"] = n.post_norm_max;
    j["normalization"] = nj;
  }
  return j;
}

inline NetworkGraph network_from_json(const Json& j) {
  try {
    expect(j.is_object() && j.value("format", "") == "snnkit-network", ErrorKind::Format,
           "not a snnkit network file");
    expect(j.value("version", 0) == 1, ErrorKind::Format, "unsupported network file version");
    NetworkGraph net;
    net.input_shape = j.at("input_shape").get<Shape>();
    for (const auto& lj : j.at("layers")) net.layers.push_back(layer_from_json(lj));
    if (j.contains("normalization")) {
      const auto& nj = j["normalization"];
      ScaleFactors sf;
      sf.percentile = nj.at("percentile").get<double>();
      sf.lambdas = nj.at("lambdas").get<std::vector<double>>();
      sf.site_layers = nj.at("site_layers").get<std::vector<std::size_t>>();
      sf.post_norm_max = nj.value("post_norm_max", 0.0);
      net.normalization = std::move(sf);
    }
    validate(net);
    return net;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed network file: ") + e.what());
  }
}

inline std::string network_to_string(const NetworkGraph& net) {
  return network_to_json(net).dump(2) + "\n";
}

inline void save_network(const NetworkGraph& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  expect(out.good(), ErrorKind::Io, "cannot open " + path + " for writing");
  out << network_to_string(net);
  expect(out.good(), ErrorKind::Io, "write failed for " + path);
}

inline NetworkGraph load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(in.good(), ErrorKind::Io, "cannot open " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    fail(ErrorKind::Format, path + ": " + e.what());
  }
  return network_from_json(j);
}

}  // namespace snnkit
