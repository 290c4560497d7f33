#include "crowdsynth/odnms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crowdsynth/errors.hpp"

namespace crowdsynth {

void NmsConfig::validate() const {
  if (!(th_iou > 0.0 && th_iou < 1.0)) {
    throw ConfigError("th_iou: must satisfy 0 < th_iou < 1");
  }
  if (!(std::isfinite(delta) && delta > 0.0)) {
    throw ConfigError("delta: must satisfy delta > 0");
  }
  if (!std::isfinite(psi)) throw ConfigError("psi: must be finite");
}

double od_threshold(double iou, const NmsConfig& cfg) {
  return cfg.delta * std::exp(cfg.psi * iou);
}

namespace {

void check_detections(std::span<const Detection> dets) {
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!(dets[i].score >= 0.0 && dets[i].score <= 1.0)) {
      throw InvalidInput("detection " + std::to_string(i) + ": score outside [0, 1]");
    }
  }
}

template <typename Suppress>
std::vector<std::size_t> greedy(std::span<const Detection> dets, Suppress suppress) {
  check_detections(dets);
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  std::vector<double> areas(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) areas[i] = area(dets[i].bbox);

  std::vector<char> removed(dets.size(), 0);
  std::vector<std::size_t> keep;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t m = order[oi];
    if (removed[m]) continue;
    keep.push_back(m);
    const BBox& mb = dets[m].bbox;
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t i = order[oj];
      if (removed[i]) continue;
      const double inter = intersection_area(mb, dets[i].bbox);
      const double overlap = inter > 0.0 ? inter / (areas[m] + areas[i] - inter) : 0.0;
      if (suppress(overlap, dets[m], dets[i])) removed[i] = 1;
    }
  }
  return keep;
}

std::vector<Detection> gather(std::span<const Detection> dets,
                              const std::vector<std::size_t>& idx) {
  std::vector<Detection> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(dets[i]);
  return out;
}

}  // namespace

std::vector<std::size_t> standard_nms_indices(std::span<const Detection> dets,
                                              double th_iou) {
  return greedy(dets, [th_iou](double overlap, const Detection&, const Detection&) {
    return overlap >= th_iou;
  });
}

std::vector<std::size_t> od_nms_indices(std::span<const Detection> dets,
                                        const NmsConfig& cfg) {
  cfg.validate();
  return greedy(dets, [&cfg](double overlap, const Detection& m, const Detection& b) {
    return overlap >= cfg.th_iou &&
           std::abs(b.od - m.od) <= od_threshold(overlap, cfg);
  });
}

std::vector<Detection> standard_nms(std::span<const Detection> dets, double th_iou) {
  return gather(dets, standard_nms_indices(dets, th_iou));
}

std::vector<Detection> od_nms(std::span<const Detection> dets, const NmsConfig& cfg) {
  return gather(dets, od_nms_indices(dets, cfg));
}

}  // namespace crowdsynth
