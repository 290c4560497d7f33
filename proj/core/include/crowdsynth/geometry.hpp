#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace crowdsynth {

using InstanceId = std::int64_t;
using PatchId = std::int64_t;

/// Axis-aligned box in image pixel coordinates (y grows downwards).
/// Construction rejects non-finite coordinates and non-positive extents, so
/// every BBox in the program has strictly positive area.
class BBox {
 public:
  BBox(double x_min, double y_min, double x_max, double y_max);

  /// COCO-style [x, y, w, h].
  static BBox from_xywh(double x, double y, double w, double h);
  static BBox from_center(double cx, double cy, double w, double h);

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }
  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double center_x() const noexcept { return 0.5 * (x_min_ + x_max_); }
  double center_y() const noexcept { return 0.5 * (y_min_ + y_max_); }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

double area(const BBox& b) noexcept;
double intersection_area(const BBox& a, const BBox& b) noexcept;
double iou(const BBox& a, const BBox& b) noexcept;

/// Exact area of the union of `boxes` restricted to `clip`
/// (coordinate-compression sweep).
double union_area_within(const BBox& clip, std::span<const BBox> boxes);

struct ObjectInstance {
  InstanceId id = 0;
  BBox bbox{0.0, 0.0, 1.0, 1.0};
  std::string category = "object";
  bool is_pasted = false;
  /// Larger is nearer to the camera.
  std::int64_t depth_rank = 0;
  std::optional<PatchId> patch_id;
  std::optional<double> od_gt;
  std::optional<double> occlusion_ratio;

  friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

struct Scene {
  std::int64_t image_id = 0;
  int image_width = 0;
  int image_height = 0;
  std::vector<ObjectInstance> instances;
  /// RNG seed the scene was synthesized with; 0 when unaugmented.
  std::uint64_t seed = 0;

  const ObjectInstance& find(InstanceId id) const;
  ObjectInstance& find(InstanceId id);
  bool contains(InstanceId id) const noexcept;

  /// Throws InvalidInput on duplicate ids, non-positive image size, or a box
  /// that does not intersect the image rectangle.
  void validate() const;

  friend bool operator==(const Scene&, const Scene&) = default;
};

/// Instances strictly in front of the target whose boxes overlap it, in scene
/// order.
std::vector<InstanceId> occluder_set(const Scene& scene, InstanceId target_id);

/// Overlay depth: 1 + (sum of per-occluder overlap areas) / area(target).
/// Overlaps between occluders are counted once per occluder.
double compute_od(const Scene& scene, InstanceId target_id);

/// Fraction of the target covered by the union of in-front instances.
double occlusion_ratio(const Scene& scene, InstanceId target_id);

enum class DepthLabelScope { kPastedOnly, kAll };

/// Fills od_gt and occlusion_ratio from depth ranks. kPastedOnly clears the
/// labels of original instances, whose relative depth is unknown.
void assign_depth_labels(Scene& scene, DepthLabelScope scope);

}  // namespace crowdsynth
