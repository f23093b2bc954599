// Bundled synthetic dataset generators, all deterministic in the seed.
#pragma once

#include <cmath>
#include <vector>

#include "snnkit/metrics.hpp"
#include "snnkit/rng.hpp"
#include "snnkit/spike_io.hpp"
#include "snnkit/train.hpp"

namespace snnkit {

// 10-class 8x8 pattern set: smooth per-class templates plus pixel noise,
// intensities in [0,1]. Inputs are [1,8,8]. The class templates depend only
// on the seed; distinct sample_stream values draw independent noise over the
// same task, which is how train/eval splits are made.
inline Dataset make_patterns8x8(std::uint64_t seed, std::size_t per_class, float noise = 0.08f,
                                std::uint64_t sample_stream = 0) {
  constexpr std::size_t kSide = 8;
  constexpr int kClasses = 10;
  Rng rng(seed);

  std::vector<Tensor> templates;
  for (int c = 0; c < kClasses; ++c) {
    Tensor raw({kSide, kSide});
    for (auto& v : raw.values()) v = rng.uniformf();
    // one smoothing pass so classes differ in structure, not single pixels
    Tensor smooth({kSide, kSide});
    for (std::size_t y = 0; y < kSide; ++y)
      for (std::size_t x = 0; x < kSide; ++x) {
        float acc = 0.0f;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = static_cast<int>(y) + dy, xx = static_cast<int>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<int>(kSide) || xx >= static_cast<int>(kSide))
              continue;
            acc += raw[static_cast<std::size_t>(yy) * kSide + static_cast<std::size_t>(xx)];
            ++n;
          }
        smooth[y * kSide + x] = acc / static_cast<float>(n);
      }
    const float lo = smooth.min(), hi = smooth.max();
    for (auto& v : smooth.values()) v = 0.1f + 0.8f * (v - lo) / std::max(1e-6f, hi - lo);
    templates.push_back(std::move(smooth));
  }

  Rng sample_rng = rng.split(sample_stream);
  Dataset data;
  data.num_classes = kClasses;
  for (std::size_t s = 0; s < per_class; ++s) {
    for (int c = 0; c < kClasses; ++c) {
      Tensor img({1, kSide, kSide});
      for (std::size_t i = 0; i < kSide * kSide; ++i) {
        float v = templates[static_cast<std::size_t>(c)][i] + noise * sample_rng.normalf(0.0f, 1.0f);
        img[i] = std::min(1.0f, std::max(0.0f, v));
      }
      data.inputs.push_back(std::move(img));
      data.labels.push_back(c);
    }
  }
  return data;
}

// Linearly separable 2-class set in [0,1]^2 with a margin around a random
// separating line. The line depends only on the seed; sample_stream picks the
// point draw, as in make_patterns8x8.
inline Dataset make_two_blobs(std::uint64_t seed, std::size_t count, float margin = 0.08f,
                              std::uint64_t sample_stream = 0) {
  Rng rng(seed);
  const double angle = rng.uniform(0.0, 6.283185307179586);
  const double nx = std::cos(angle), ny = std::sin(angle);
  const double bias = -(nx * 0.5 + ny * 0.5);  // line through the square center
  Rng sample_rng = rng.split(sample_stream);
  Dataset data;
  data.num_classes = 2;
  while (data.inputs.size() < count) {
    const float x = sample_rng.uniformf(), y = sample_rng.uniformf();
    const double d = nx * x + ny * y + bias;
    if (std::abs(d) < margin) continue;
    data.inputs.push_back(Tensor::vec({x, y}));
    data.labels.push_back(d > 0.0 ? 1 : 0);
  }
  return data;
}

// Detection scenes wrapped as a regression dataset: inputs [1,32,32], targets
// (cx, cy, w, h, confidence). Ground-truth boxes are kept for IoU scoring.
struct DetectionDataset {
  Dataset data;              // MSE targets
  std::vector<Box> boxes;    // ground truth per sample
  std::vector<int> classes;  // 0 rectangle, 1 disc
};

inline DetectionDataset make_detection_dataset(std::uint64_t seed, std::size_t count) {
  DetectionDataset set;
  const auto scenes = synth_detection_scene(seed, count);
  for (const auto& scene : scenes) {
    const std::size_t side = scene.image.shape()[0];
    set.data.inputs.push_back(scene.image.reshaped({1, side, side}));
    set.data.targets.push_back(Tensor::vec({scene.cx, scene.cy, scene.w, scene.h, 1.0f}));
    set.boxes.push_back(Box{scene.cx, scene.cy, scene.w, scene.h});
    set.classes.push_back(scene.object_class);
  }
  return set;
}

}  // namespace snnkit
