// Spike-camera emulation: encoding gray frames into binary spike streams,
// reconstructing gray images from spike counts, and the .spk container.
//
// Payload layout: T frames of ceil(W*H/8) bytes; bit b of a frame is the
// spike of pixel b (row-major), packed LSB-first; padding bits are zero.
// Full byte layout in docs/FORMATS.md.
#pragma once

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "snnkit/rng.hpp"
#include "snnkit/tensor.hpp"

namespace snnkit {

enum class SpikeEncoder : std::uint32_t { Integrate = 1, Bernoulli = 2 };

struct SpikeStream {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t steps = 0;
  SpikeEncoder encoder = SpikeEncoder::Integrate;
  float camera_threshold = 1.0f;  // normalized intensity per spike
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> payload;

  std::size_t frame_bytes() const { return (static_cast<std::size_t>(width) * height + 7) / 8; }

  bool spike_at(std::uint32_t t, std::uint32_t pixel) const {
    const std::size_t byte = static_cast<std::size_t>(t) * frame_bytes() + pixel / 8;
    return (payload[byte] >> (pixel % 8)) & 1u;
  }

  void set_spike(std::uint32_t t, std::uint32_t pixel) {
    payload[static_cast<std::size_t>(t) * frame_bytes() + pixel / 8] |=
        static_cast<std::uint8_t>(1u << (pixel % 8));
  }

  std::uint32_t spike_count(std::uint32_t pixel) const {
    std::uint32_t n = 0;
    for (std::uint32_t t = 0; t < steps; ++t) n += spike_at(t, pixel) ? 1 : 0;
    return n;
  }

  // one float32 [1,H,W] tensor of 0/1 values per step
  std::vector<Tensor> frames() const {
    std::vector<Tensor> out;
    out.reserve(steps);
    for (std::uint32_t t = 0; t < steps; ++t) {
      Tensor frame({1, height, width});
      for (std::uint32_t p = 0; p < width * height; ++p)
        frame[p] = spike_at(t, p) ? 1.0f : 0.0f;
      out.push_back(std::move(frame));
    }
    return out;
  }

  friend bool operator==(const SpikeStream&, const SpikeStream&) = default;
};

namespace detail {

inline void check_gray_frames(const std::vector<Tensor>& frames) {
  expect(!frames.empty(), ErrorKind::Format, "no frames to encode");
  for (const auto& f : frames) {
    expect(f.rank() == 2 && f.same_shape(frames.front()), ErrorKind::Shape,
           "frames must all be [H,W] with identical shape");
    for (std::size_t i = 0; i < f.size(); ++i)
      expect(f[i] >= 0.0f && f[i] <= 1.0f, ErrorKind::Format,
             "pixel intensity " + num_str(f[i]) + " outside [0,1]");
  }
}

inline SpikeStream blank_stream(const std::vector<Tensor>& frames, SpikeEncoder enc,
                                float threshold, std::uint64_t seed) {
  SpikeStream s;
  s.height = static_cast<std::uint32_t>(frames.front().shape()[0]);
  s.width = static_cast<std::uint32_t>(frames.front().shape()[1]);
  s.steps = static_cast<std::uint32_t>(frames.size());
  s.encoder = enc;
  s.camera_threshold = threshold;
  s.seed = seed;
  s.payload.assign(static_cast<std::size_t>(s.steps) * s.frame_bytes(), 0);
  return s;
}

}  // namespace detail

// Integrate-and-fire camera model: each pixel accumulates intensity per step
// and emits a spike (subtracting the threshold) whenever the accumulator
// reaches it. Deterministic; for intensities up to the threshold the residual
// stays below it, which bounds the reconstruction error by threshold/T.
// Brighter pixels saturate at one spike per step, the camera's dynamic range.
inline SpikeStream encode_integrate(const std::vector<Tensor>& frames, float threshold) {
  detail::check_gray_frames(frames);
  expect(threshold > 0.0f && threshold <= 1.0f, ErrorKind::Format,
         "camera threshold must be in (0,1]");
  SpikeStream s = detail::blank_stream(frames, SpikeEncoder::Integrate, threshold, 0);
  const std::size_t pixels = static_cast<std::size_t>(s.width) * s.height;
  std::vector<double> accum(pixels, 0.0);
  for (std::uint32_t t = 0; t < s.steps; ++t) {
    const Tensor& frame = frames[t];
    for (std::uint32_t p = 0; p < pixels; ++p) {
      accum[p] += static_cast<double>(frame[p]);
      if (accum[p] >= static_cast<double>(threshold)) {
        accum[p] -= static_cast<double>(threshold);
        s.set_spike(t, p);
      }
    }
  }
  return s;
}

// Stochastic rate coding: each pixel spikes with probability equal to its
// intensity, from a seeded deterministic stream.
inline SpikeStream encode_bernoulli(const std::vector<Tensor>& frames, std::uint64_t seed) {
  detail::check_gray_frames(frames);
  SpikeStream s = detail::blank_stream(frames, SpikeEncoder::Bernoulli, 1.0f, seed);
  Rng rng(seed);
  const std::size_t pixels = static_cast<std::size_t>(s.width) * s.height;
  for (std::uint32_t t = 0; t < s.steps; ++t)
    for (std::uint32_t p = 0; p < pixels; ++p)
      if (rng.bernoulli(static_cast<double>(frames[t][p]))) s.set_spike(t, p);
  return s;
}

inline std::vector<Tensor> repeat_frame(const Tensor& image, std::uint32_t steps) {
  expect(image.rank() == 2, ErrorKind::Shape, "gray image must be [H,W]");
  return std::vector<Tensor>(steps, image);
}

// Gray estimate: threshold * spike_count / T per pixel, clipped to [0,1].
inline Tensor reconstruct_gray(const SpikeStream& s) {
  expect(s.steps >= 1, ErrorKind::Format, "stream has no steps");
  expect(s.payload.size() == static_cast<std::size_t>(s.steps) * s.frame_bytes(),
         ErrorKind::Format, "stream payload length does not match header");
  Tensor img({s.height, s.width});
  for (std::uint32_t p = 0; p < s.width * s.height; ++p) {
    const double v = static_cast<double>(s.camera_threshold) *
                     static_cast<double>(s.spike_count(p)) / static_cast<double>(s.steps);
    img[p] = static_cast<float>(std::min(1.0, std::max(0.0, v)));
  }
  return img;
}

// ---- .spk container ----

inline void write_spike_stream(const SpikeStream& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  expect(out.good(), ErrorKind::Io, "cannot open " + path + " for writing");
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  out.write("SPKS", 4);
  put_u32(1);  // version
  put_u32(s.width);
  put_u32(s.height);
  put_u32(s.steps);
  put_u32(static_cast<std::uint32_t>(s.encoder));
  put_u32(std::bit_cast<std::uint32_t>(s.camera_threshold));
  put_u64(s.seed);
  out.write(reinterpret_cast<const char*>(s.payload.data()),
            static_cast<std::streamsize>(s.payload.size()));
  expect(out.good(), ErrorKind::Io, "write failed for " + path);
}

inline SpikeStream read_spike_stream(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(in.good(), ErrorKind::Io, "cannot open " + path);
  auto get_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    expect(in.good(), ErrorKind::Format, "truncated spike stream header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  };
  auto get_u64 = [&]() {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    expect(in.good(), ErrorKind::Format, "truncated spike stream header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  char magic[4];
  in.read(magic, 4);
  expect(in.good() && std::string(magic, 4) == "SPKS", ErrorKind::Format,
         path + " is not a spike stream (bad magic)");
  expect(get_u32() == 1, ErrorKind::Format, "unsupported spike stream version");
  SpikeStream s;
  s.width = get_u32();
  s.height = get_u32();
  s.steps = get_u32();
  const std::uint32_t enc = get_u32();
  expect(enc == 1 || enc == 2, ErrorKind::Format, "unknown encoder id " + std::to_string(enc));
  s.encoder = static_cast<SpikeEncoder>(enc);
  s.camera_threshold = std::bit_cast<float>(get_u32());
  s.seed = get_u64();
  s.payload.resize(static_cast<std::size_t>(s.steps) * s.frame_bytes());
  in.read(reinterpret_cast<char*>(s.payload.data()),
          static_cast<std::streamsize>(s.payload.size()));
  expect(in.good() || s.payload.empty(), ErrorKind::Format, "truncated spike stream payload");
  in.peek();
  expect(in.eof(), ErrorKind::Format, "trailing bytes after spike stream payload");
  return s;
}

// ---- PGM (P5, 8-bit) import/export so no image library is needed ----

inline void write_pgm(const Tensor& img, const std::string& path) {
  expect(img.rank() == 2, ErrorKind::Shape, "PGM export expects [H,W]");
  std::ofstream out(path, std::ios::binary);
  expect(out.good(), ErrorKind::Io, "cannot open " + path + " for writing");
  out << "P5\n" << img.shape()[1] << " " << img.shape()[0] << "\n255\n";
  for (std::size_t i = 0; i < img.size(); ++i) {
    const float v = std::min(1.0f, std::max(0.0f, img[i]));
    out.put(static_cast<char>(static_cast<int>(std::lround(v * 255.0f))));
  }
  expect(out.good(), ErrorKind::Io, "write failed for " + path);
}

inline Tensor read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  expect(in.good(), ErrorKind::Io, "cannot open " + path);
  std::string magic;
  in >> magic;
  expect(magic == "P5", ErrorKind::Format, path + " is not a binary PGM (P5) file");
  auto next_int = [&]() {
    // skip whitespace and # comments
    int c = in.peek();
    while (c == '#' || std::isspace(c)) {
      if (c == '#') in.ignore(1 << 20, '\n');
      else in.get();
      c = in.peek();
    }
    long v = -1;
    in >> v;
    expect(in.good() && v >= 0, ErrorKind::Format, "malformed PGM header");
    return static_cast<std::size_t>(v);
  };
  const std::size_t w = next_int(), h = next_int(), maxval = next_int();
  expect(maxval == 255, ErrorKind::Format, "only 8-bit PGM is supported");
  in.get();  // single whitespace after header
  Tensor img({h, w});
  for (std::size_t i = 0; i < img.size(); ++i) {
    const int c = in.get();
    expect(c != EOF, ErrorKind::Format, "truncated PGM payload");
    img[i] = static_cast<float>(c) / 255.0f;
  }
  return img;
}

// ---- synthetic detection scenes ----

struct DetectionScene {
  Tensor image;  // [H,W] gray in [0,1]
  float cx = 0, cy = 0, w = 0, h = 0;  // box, normalized to [0,1]
  int object_class = 0;                // 0 rectangle, 1 disc
};

// Deterministic 32x32 scenes: one bright rectangle or disc over a textured
// background, labelled with its bounding box. Object pixels sit well above
// the background so the boxes are learnable from intensity alone.
inline std::vector<DetectionScene> synth_detection_scene(std::uint64_t seed, std::size_t count) {
  constexpr std::size_t kSide = 32;
  std::vector<DetectionScene> scenes;
  scenes.reserve(count);
  Rng rng(seed);
  for (std::size_t s = 0; s < count; ++s) {
    DetectionScene scene;
    scene.image = Tensor({kSide, kSide});
    for (std::size_t i = 0; i < scene.image.size(); ++i)
      scene.image[i] = rng.uniformf(0.08f, 0.28f);

    const std::size_t bw = static_cast<std::size_t>(rng.uniform_int(7, 14));
    const std::size_t bh = static_cast<std::size_t>(rng.uniform_int(7, 14));
    const std::size_t x0 = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(kSide - bw - 1)));
    const std::size_t y0 = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(kSide - bh - 1)));
    scene.object_class = static_cast<int>(rng.uniform_int(0, 1));
    const float brightness = rng.uniformf(0.75f, 0.95f);

    if (scene.object_class == 0) {
      for (std::size_t y = y0; y < y0 + bh; ++y)
        for (std::size_t x = x0; x < x0 + bw; ++x)
          scene.image[y * kSide + x] = brightness;
    } else {
      // disc inscribed in the box
      const double rx = bw / 2.0, ry = bh / 2.0;
      const double ccx = x0 + rx, ccy = y0 + ry;
      for (std::size_t y = y0; y < y0 + bh; ++y)
        for (std::size_t x = x0; x < x0 + bw; ++x) {
          const double dx = (x + 0.5 - ccx) / rx, dy = (y + 0.5 - ccy) / ry;
          if (dx * dx + dy * dy <= 1.0) scene.image[y * kSide + x] = brightness;
        }
    }
    scene.cx = static_cast<float>(x0 + bw / 2.0) / kSide;
    scene.cy = static_cast<float>(y0 + bh / 2.0) / kSide;
    scene.w = static_cast<float>(bw) / kSide;
    scene.h = static_cast<float>(bh) / kSide;
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace snnkit
