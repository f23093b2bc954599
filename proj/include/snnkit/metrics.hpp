// Task metrics: classification accuracy, box IoU, and single-class AP@0.5
// via a confidence sweep.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "snnkit/tensor.hpp"

namespace snnkit {

struct Box {
  float cx = 0, cy = 0, w = 0, h = 0;
};

inline double iou(const Box& a, const Box& b) {
  const double ax0 = a.cx - a.w / 2.0, ax1 = a.cx + a.w / 2.0;
  const double ay0 = a.cy - a.h / 2.0, ay1 = a.cy + a.h / 2.0;
  const double bx0 = b.cx - b.w / 2.0, bx1 = b.cx + b.w / 2.0;
  const double by0 = b.cy - b.h / 2.0, by1 = b.cy + b.h / 2.0;
  const double iw = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
  const double ih = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
  const double inter = iw * ih;
  const double uni = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
  return uni <= 0.0 ? 0.0 : inter / uni;
}

struct BoxPrediction {
  Box box;
  float confidence = 0.0f;
};

inline double mean_iou(const std::vector<BoxPrediction>& preds, const std::vector<Box>& truths) {
  expect(preds.size() == truths.size() && !preds.empty(), ErrorKind::Shape,
         "prediction/ground-truth count mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += iou(preds[i].box, truths[i]);
  return sum / static_cast<double>(preds.size());
}

// Single-class average precision: sort by confidence, sweep the threshold,
// integrate precision over recall. One prediction and one ground truth per
// image; a prediction is a true positive when IoU >= iou_threshold.
inline double average_precision(const std::vector<BoxPrediction>& preds,
                                const std::vector<Box>& truths, double iou_threshold = 0.5) {
  expect(preds.size() == truths.size() && !preds.empty(), ErrorKind::Shape,
         "prediction/ground-truth count mismatch");
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });
  const double total = static_cast<double>(truths.size());
  double tp = 0.0, fp = 0.0, ap = 0.0, last_recall = 0.0;
  for (std::size_t k : order) {
    if (iou(preds[k].box, truths[k]) >= iou_threshold) ++tp; else ++fp;
    const double recall = tp / total;
    const double precision = tp / (tp + fp);
    ap += precision * (recall - last_recall);
    last_recall = recall;
  }
  return ap;
}

inline Box box_from_output(const Tensor& out) {
  expect(out.size() >= 4, ErrorKind::Shape, "detection output needs at least 4 values");
  return Box{out[0], out[1], out[2], out[3]};
}

}  // namespace snnkit
