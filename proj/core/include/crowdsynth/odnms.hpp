#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crowdsynth/geometry.hpp"

namespace crowdsynth {

struct Detection {
  BBox bbox{0.0, 0.0, 1.0, 1.0};
  double score = 0.0;
  /// Predicted overlay depth. 0 marks "unknown" and is only meaningful for
  /// plain NMS.
  double od = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct NmsConfig {
  double th_iou = 0.5;
  double delta = 0.001;
  double psi = 10.0;

  /// Throws ConfigError naming the violated field.
  void validate() const;
};

/// delta * exp(psi * iou).
double od_threshold(double iou, const NmsConfig& cfg);

/// Greedy NMS. Returns kept input indices in keep order (descending score,
/// ties by ascending index). A candidate is suppressed when IoU >= th_iou.
std::vector<std::size_t> standard_nms_indices(std::span<const Detection> dets,
                                              double th_iou);

/// Overlay-depth-aware NMS: a candidate is suppressed only when
/// IoU >= th_iou and |od - od_kept| <= od_threshold(IoU).
std::vector<std::size_t> od_nms_indices(std::span<const Detection> dets,
                                        const NmsConfig& cfg);

std::vector<Detection> standard_nms(std::span<const Detection> dets, double th_iou);
std::vector<Detection> od_nms(std::span<const Detection> dets, const NmsConfig& cfg);

}  // namespace crowdsynth
