// Time-stepped integrate-and-fire simulation with reset-by-subtraction.
//
// A converted network alternates per-step signal propagation (affine layers,
// pooling, upsampling) with IF sites standing where the ANN activations were.
// Per step, at each site: U arrives from the preceding layers, the neuron
// fires iff V + U - V_th >= 0, and V <- V + U - V_th on a spike.
//
// Membrane potentials and per-neuron input sums accumulate in double while
// all signal tensors stay float32; spike counts then satisfy
//   sum_t U = V_th * N + V(T) - V(0)
// to well below the 1e-5 tolerance the consistency checks use.
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "snnkit/network.hpp"
#include "snnkit/rng.hpp"

namespace snnkit {

enum class Readout { SpikeCount, MembraneAccumulate };
enum class InputEncoding { ConstantCurrent, Bernoulli };

inline std::string_view readout_name(Readout r) {
  return r == Readout::SpikeCount ? "spike-count" : "membrane-accumulate";
}

inline std::optional<Readout> readout_from_name(std::string_view s) {
  if (s == "spike-count") return Readout::SpikeCount;
  if (s == "membrane-accumulate") return Readout::MembraneAccumulate;
  return std::nullopt;
}

struct IFLayerState {
  Shape shape;
  double v_th = 1.0;
  double v0 = 0.0;
  std::vector<double> v;
  std::vector<std::uint32_t> spike_count;
  std::vector<double> input_sum;

  void reset() {
    v.assign(shape_numel(shape), v0);
    spike_count.assign(v.size(), 0);
    input_sum.assign(v.size(), 0.0);
  }
};

struct SnnUnit {
  LayerSpec layer;                 // source layer; for IF sites this is the original activation
  std::size_t source_index = 0;    // layer index in the source NetworkGraph
  bool if_site = false;
  IFLayerState state;              // valid when if_site
  std::vector<double> gate_accum;  // MaxPool2D only: running input accumulation per input neuron
};

struct SNNNetwork {
  std::vector<SnnUnit> units;
  Shape input_shape;
  Shape output_shape;
  Readout readout = Readout::SpikeCount;
  double v_th = 1.0;
  double v0 = 0.0;
  std::optional<ScaleFactors> normalization;
  std::vector<std::string> warnings;

  std::size_t if_site_count() const {
    std::size_t n = 0;
    for (const auto& u : units) n += u.if_site ? 1 : 0;
    return n;
  }
};

struct ConvertOptions {
  double v0 = 0.5;
  double v_th = 1.0;
  Readout readout = Readout::SpikeCount;
  bool strict = false;          // reject networks without recorded normalization
  bool allow_max_pool = false;  // keep MaxPool2D as a gated spiking unit instead of rejecting it
};

// Build the spiking network: affine weights are copied untouched, every
// ReLU/QuantReLU becomes an IF site configured with (v0, v_th).
inline SNNNetwork convert(const NetworkGraph& net, const ConvertOptions& opts = {}) {
  expect(opts.v_th > 0.0, ErrorKind::Conversion, "threshold must be positive");
  expect(opts.v0 >= 0.0 && opts.v0 < opts.v_th, ErrorKind::Conversion,
         "initial potential must lie in [0, V_th)");
  const std::vector<Shape> shapes = validate(net);

  SNNNetwork snn;
  snn.input_shape = net.input_shape;
  snn.output_shape = shapes.empty() ? net.input_shape : shapes.back();
  snn.readout = opts.readout;
  snn.v_th = opts.v_th;
  snn.v0 = opts.v0;
  snn.normalization = net.normalization;

  if (!net.normalization.has_value()) {
    if (opts.strict)
      fail(ErrorKind::Conversion, "network has no recorded weight normalization (strict mode)");
    snn.warnings.push_back("network has no recorded weight normalization");
  } else if (net.normalization->post_norm_max > 1.0 + 1e-6) {
    const std::string msg = "calibration activations reach " +
                            num_str(net.normalization->post_norm_max) + " after normalization";
    if (opts.strict) fail(ErrorKind::Conversion, msg + " (strict mode)");
    snn.warnings.push_back(msg);
  }

  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& layer = net.layers[i];
    SnnUnit unit;
    unit.layer = layer;
    unit.source_index = i;
    switch (layer.kind) {
      case LayerKind::BatchNorm:
        fail(ErrorKind::Conversion, "BatchNorm at layer " + std::to_string(i) +
                                        " has no spiking equivalent; fuse it first");
      case LayerKind::MaxPool2D:
        if (!opts.allow_max_pool)
          fail(ErrorKind::Conversion, "MaxPool2D at layer " + std::to_string(i) +
                                          " has no integrate-and-fire equivalent; replace it first");
        unit.gate_accum.assign(shape_numel(i == 0 ? net.input_shape : shapes[i - 1]), 0.0);
        break;
      case LayerKind::ReLU:
      case LayerKind::QuantReLU:
        unit.if_site = true;
        unit.state.shape = shapes[i];
        unit.state.v_th = opts.v_th;
        unit.state.v0 = opts.v0;
        unit.state.reset();
        break;
      default:
        break;
    }
    snn.units.push_back(std::move(unit));
  }
  return snn;
}

inline void reset_states(SNNNetwork& snn) {
  for (auto& unit : snn.units) {
    if (unit.if_site) unit.state.reset();
    if (!unit.gate_accum.empty()) unit.gate_accum.assign(unit.gate_accum.size(), 0.0);
  }
}

namespace detail {

// Gated spiking max-pool: each output follows the input neuron with the
// largest accumulated drive so far (ties go to the lowest index). Used only
// for baseline studies of unreplaced pooling layers.
inline Tensor gated_max_pool(const PoolParams& p, const Tensor& in, const Shape& in_shape,
                             std::vector<double>& accum) {
  const std::size_t channels = in_shape[0], ih = in_shape[1], iw = in_shape[2];
  for (std::size_t i = 0; i < in.size(); ++i) accum[i] += static_cast<double>(in[i]);
  const std::size_t oh = conv_out_extent(ih, p.kernel, p.stride, 0);
  const std::size_t ow = conv_out_extent(iw, p.kernel, p.stride, 0);
  Tensor out({channels, oh, ow});
  for (std::size_t c = 0; c < channels; ++c) {
    const std::size_t plane = c * ih * iw;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = plane + (oy * p.stride) * iw + ox * p.stride;
        for (std::size_t ky = 0; ky < p.kernel; ++ky)
          for (std::size_t kx = 0; kx < p.kernel; ++kx) {
            const std::size_t idx = plane + (oy * p.stride + ky) * iw + ox * p.stride + kx;
            if (accum[idx] > accum[best]) best = idx;
          }
        out.at3(c, oy, ox) = in[best];
      }
    }
  }
  return out;
}

}  // namespace detail

struct StepResult {
  std::vector<Tensor> spikes;  // one binary tensor per IF site, network order
  Tensor output;               // value flowing out of the final unit this step
};

// Advance the network one time step. When `final_site_accumulates` the last
// unit (an IF site under membrane-accumulate readout) integrates without
// firing.
inline StepResult step(SNNNetwork& snn, const Tensor& input_t,
                       bool final_site_accumulates = false) {
  expect(input_t.shape() == snn.input_shape, ErrorKind::Shape,
         "step input shape " + shape_str(input_t.shape()) + " does not match network input " +
             shape_str(snn.input_shape));
  StepResult res;
  Tensor cur = input_t;
  for (std::size_t i = 0; i < snn.units.size(); ++i) {
    SnnUnit& unit = snn.units[i];
    if (unit.if_site) {
      cur.check_finite("membrane increment at layer " + std::to_string(unit.source_index));
      IFLayerState& st = unit.state;
      const bool no_fire = final_site_accumulates && i + 1 == snn.units.size();
      Tensor out(cur.shape());
      for (std::size_t n = 0; n < cur.size(); ++n) {
        const double u = static_cast<double>(cur[n]);
        st.input_sum[n] += u;
        if (no_fire) {
          st.v[n] += u;
          continue;
        }
        const bool fire = st.v[n] + u - st.v_th >= 0.0;
        st.v[n] += u - (fire ? st.v_th : 0.0);
        if (fire) {
          ++st.spike_count[n];
          out[n] = 1.0f;
        }
      }
      res.spikes.push_back(out);
      cur = std::move(out);
    } else if (unit.layer.kind == LayerKind::MaxPool2D) {
      Shape in_shape = cur.shape();
      cur = detail::gated_max_pool(unit.layer.pool(), cur, in_shape, unit.gate_accum);
    } else {
      cur = eval_layer(unit.layer, cur);
    }
  }
  res.output = std::move(cur);
  return res;
}

struct SiteTrace {
  std::size_t layer_index = 0;  // index in the source graph
  Shape shape;
  std::vector<std::uint32_t> spike_count;
  Tensor rates;  // spike_count / T
  std::vector<double> v_final;
  std::vector<double> input_sum;
};

struct SimTrace {
  unsigned T = 0;
  std::vector<SiteTrace> sites;
  Tensor output;
  std::vector<std::vector<Tensor>> per_step_spikes;  // [t][site], only when recorded
};

struct RunOptions {
  unsigned T = 64;
  InputEncoding encoding = InputEncoding::ConstantCurrent;
  std::uint64_t seed = 0;        // Bernoulli encoder stream
  bool record_spikes = false;
  bool check_conservation = false;  // verify sum_t U = V_th*N + V(T) - V0 after the run
};

namespace detail {

inline SimTrace collect_trace(SNNNetwork& snn, unsigned T) {
  SimTrace trace;
  trace.T = T;
  for (const auto& unit : snn.units) {
    if (!unit.if_site) continue;
    SiteTrace site;
    site.layer_index = unit.source_index;
    site.shape = unit.state.shape;
    site.spike_count = unit.state.spike_count;
    site.v_final = unit.state.v;
    site.input_sum = unit.state.input_sum;
    site.rates = Tensor(site.shape);
    for (std::size_t i = 0; i < site.spike_count.size(); ++i)
      site.rates[i] = static_cast<float>(static_cast<double>(site.spike_count[i]) /
                                         static_cast<double>(T));
    trace.sites.push_back(std::move(site));
  }
  return trace;
}

inline void check_conservation(const SimTrace& trace, double v_th, double v0) {
  for (const auto& site : trace.sites) {
    for (std::size_t n = 0; n < site.spike_count.size(); ++n) {
      const double lhs = site.input_sum[n];
      const double rhs = v_th * static_cast<double>(site.spike_count[n]) + site.v_final[n] - v0;
      expect(std::abs(lhs - rhs) <= 1e-5, ErrorKind::Verification,
             "membrane conservation violated at layer " + std::to_string(site.layer_index) +
                 " neuron " + std::to_string(n) + ": drive " + num_str(lhs) + " vs " + num_str(rhs));
    }
  }
}

}  // namespace detail

// Run T steps on per-step input frames produced by `frame(t)`. This is the
// backbone of run(); it also accepts pre-encoded spike frames directly.
template <typename FrameFn>
inline SimTrace run_frames(SNNNetwork& snn, unsigned T, FrameFn&& frame, bool record_spikes = false,
                           bool check_conservation = false) {
  expect(T >= 1, ErrorKind::Simulation, "step count T must be >= 1");
  reset_states(snn);
  const bool accumulate_last =
      snn.readout == Readout::MembraneAccumulate && !snn.units.empty() && snn.units.back().if_site;
  const bool accumulate_tail = snn.readout == Readout::MembraneAccumulate && !accumulate_last;
  std::vector<double> out_accum;
  if (accumulate_tail) out_accum.assign(shape_numel(snn.output_shape), 0.0);

  SimTrace trace;
  if (record_spikes) trace.per_step_spikes.reserve(T);

  for (unsigned t = 0; t < T; ++t) {
    const Tensor input_t = frame(t);
    StepResult sr = step(snn, input_t, accumulate_last);
    if (accumulate_tail)
      for (std::size_t n = 0; n < sr.output.size(); ++n)
        out_accum[n] += static_cast<double>(sr.output[n]);
    if (record_spikes) trace.per_step_spikes.push_back(std::move(sr.spikes));
  }

  SimTrace collected = detail::collect_trace(snn, T);
  collected.per_step_spikes = std::move(trace.per_step_spikes);

  if (snn.readout == Readout::SpikeCount) {
    expect(!collected.sites.empty(), ErrorKind::Simulation,
           "spike-count readout needs at least one IF site");
    collected.output = collected.sites.back().rates;
  } else if (accumulate_last) {
    const auto& st = snn.units.back().state;
    Tensor out(st.shape);
    for (std::size_t n = 0; n < st.v.size(); ++n)
      out[n] = static_cast<float>((st.v[n] - st.v0) / static_cast<double>(T));
    collected.output = std::move(out);
  } else {
    Tensor out(snn.output_shape);
    for (std::size_t n = 0; n < out.size(); ++n)
      out[n] = static_cast<float>(out_accum[n] / static_cast<double>(T));
    collected.output = std::move(out);
  }
  if (check_conservation) detail::check_conservation(collected, snn.v_th, snn.v0);
#ifndef NDEBUG
  detail::check_conservation(collected, snn.v_th, snn.v0);
#endif
  return collected;
}

// Simulate an analog input for T steps. Constant-current injection feeds the
// input tensor unchanged every step; the Bernoulli encoder emits seeded
// random spikes with per-pixel probability equal to the input intensity.
inline SimTrace run(SNNNetwork& snn, const Tensor& x, const RunOptions& opts) {
  expect(x.shape() == snn.input_shape, ErrorKind::Shape,
         "input shape " + shape_str(x.shape()) + " does not match network input " +
             shape_str(snn.input_shape));
  if (opts.encoding == InputEncoding::ConstantCurrent)
    return run_frames(snn, opts.T, [&](unsigned) { return x; }, opts.record_spikes,
                      opts.check_conservation);
  for (std::size_t i = 0; i < x.size(); ++i)
    expect(x[i] >= 0.0f && x[i] <= 1.0f, ErrorKind::Simulation,
           "Bernoulli encoding needs intensities in [0,1]");
  Rng rng(opts.seed);
  return run_frames(
      snn, opts.T,
      [&](unsigned) {
        Tensor frame(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i)
          frame[i] = rng.bernoulli(static_cast<double>(x[i])) ? 1.0f : 0.0f;
        return frame;
      },
      opts.record_spikes, opts.check_conservation);
}

// Simulate pre-encoded binary frames (e.g. decoded from a spike stream).
inline SimTrace run_spike_frames(SNNNetwork& snn, const std::vector<Tensor>& frames,
                                 bool record_spikes = false) {
  expect(!frames.empty(), ErrorKind::Simulation, "no input frames");
  return run_frames(snn, static_cast<unsigned>(frames.size()),
                    [&](unsigned t) { return frames[t]; }, record_spikes, false);
}

// ---- trace export ----

inline std::string trace_to_csv(const SimTrace& trace) {
  std::string out = "layer,neuron,N,r,V_T\n";
  for (const auto& site : trace.sites)
    for (std::size_t n = 0; n < site.spike_count.size(); ++n)
      out += std::to_string(site.layer_index) + "," + std::to_string(n) + "," +
             std::to_string(site.spike_count[n]) + "," + num_str(site.rates[n]) + "," +
             num_str(site.v_final[n]) + "\n";
  return out;
}

// Compact binary trace: see docs/FORMATS.md.
inline void write_trace(const SimTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  expect(out.good(), ErrorKind::Io, "cannot open " + path + " for writing");
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_f64 = [&](double v) {
    std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  out.write("SKTR", 4);
  put_u32(1);
  put_u32(trace.T);
  put_u32(static_cast<std::uint32_t>(trace.sites.size()));
  for (const auto& site : trace.sites) {
    put_u32(static_cast<std::uint32_t>(site.layer_index));
    put_u32(static_cast<std::uint32_t>(site.spike_count.size()));
    for (std::uint32_t n : site.spike_count) put_u32(n);
    for (double v : site.v_final) put_f64(v);
  }
  expect(out.good(), ErrorKind::Io, "write failed for " + path);
}

inline SimTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(in.good(), ErrorKind::Io, "cannot open " + path);
  auto get_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    expect(in.good(), ErrorKind::Format, "truncated trace file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  };
  auto get_f64 = [&]() {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    expect(in.good(), ErrorKind::Format, "truncated trace file");
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(u);
  };
  char magic[4];
  in.read(magic, 4);
  expect(in.good() && std::string(magic, 4) == "SKTR", ErrorKind::Format, "not a trace file");
  expect(get_u32() == 1, ErrorKind::Format, "unsupported trace version");
  SimTrace trace;
  trace.T = get_u32();
  const std::uint32_t nsites = get_u32();
  for (std::uint32_t s = 0; s < nsites; ++s) {
    SiteTrace site;
    site.layer_index = get_u32();
    const std::uint32_t n = get_u32();
    site.shape = {n};
    site.spike_count.resize(n);
    for (auto& c : site.spike_count) c = get_u32();
    site.v_final.resize(n);
    for (auto& v : site.v_final) v = get_f64();
    site.rates = Tensor({n});
    for (std::size_t i = 0; i < n; ++i)
      site.rates[i] = static_cast<float>(static_cast<double>(site.spike_count[i]) /
                                         static_cast<double>(trace.T));
    site.input_sum.assign(n, 0.0);
    trace.sites.push_back(std::move(site));
  }
  return trace;
}

}  // namespace snnkit
