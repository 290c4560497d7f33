#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crowdsynth/geometry.hpp"
#include "crowdsynth/raster.hpp"
#include "crowdsynth/rng.hpp"

namespace crowdsynth {

struct SynthesisConfig {
  int max_groups = 3;   // N
  int max_members = 5;  // M
  double tau = 4.0;     // x-shift divisor
  double epsilon = 2.0; // y-shift divisor
  double sigma = 0.2;   // size std-dev, normalized-size units
  double size_lo = 0.05;
  double size_hi = 0.9;
  int max_resample = 20;
  double min_inside_fraction = 0.5;

  /// Throws ConfigError naming the first field that violates its invariant.
  void validate() const;

  friend bool operator==(const SynthesisConfig&, const SynthesisConfig&) = default;
};

struct GroupSpec {
  double x = 0.0;  // box center
  double y = 0.0;
  double s = 0.0;  // normalized size of the center object
  InstanceId source_instance = 0;

  friend bool operator==(const GroupSpec&, const GroupSpec&) = default;
};

/// Object cutout. Alpha is a binary mask (0 or 255) with at least one opaque
/// pixel; mask_bounds() is the tight box of the opaque pixels in patch pixels.
class Patch {
 public:
  Patch(PatchId id, Image rgba, double native_size, std::string category);

  PatchId id() const noexcept { return id_; }
  const Image& rgba() const noexcept { return rgba_; }
  double native_size() const noexcept { return native_size_; }
  const std::string& category() const noexcept { return category_; }

  struct MaskBounds {
    int x0, y0, x1, y1;  // half-open
    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
  };
  const MaskBounds& mask_bounds() const noexcept { return bounds_; }
  std::size_t mask_area() const noexcept { return mask_area_; }
  /// Width over height of the mask bounding box.
  double aspect() const noexcept {
    return static_cast<double>(bounds_.width()) / bounds_.height();
  }

 private:
  PatchId id_;
  Image rgba_;
  double native_size_;
  std::string category_;
  MaskBounds bounds_{};
  std::size_t mask_area_ = 0;
};

/// Sets alpha to 255 where it is >= 128 and to 0 elsewhere.
void binarize_alpha(Image& image);

struct PatchLibrary {
  std::vector<Patch> patches;
  std::string source;

  bool empty() const noexcept { return patches.empty(); }
  std::size_t size() const noexcept { return patches.size(); }
  const Patch& find(PatchId id) const;
  /// Throws InvalidInput on duplicate patch ids.
  void validate() const;
};

struct ConsensusPair {
  InstanceId overlaid_id = 0;
  InstanceId free_id = 0;
  PatchId patch_id = 0;

  friend bool operator==(const ConsensusPair&, const ConsensusPair&) = default;
};

/// sqrt(box area / image area).
double normalized_size(const BBox& box, int image_width, int image_height) noexcept;

/// Box extents of a patch with the given aspect (w/h) scaled to a normalized
/// size within an image.
std::pair<double, double> extents_for_size(double normalized, double aspect,
                                           int image_width, int image_height) noexcept;

std::vector<GroupSpec> sample_group_centers(const Scene& scene,
                                            const SynthesisConfig& cfg, Rng& rng);

/// Normal(s_center, sigma) truncated to [size_lo, size_hi] by rejection; falls
/// back to s_center clamped to the range once max_resample draws miss.
double sample_member_size(double s_center, const SynthesisConfig& cfg, Rng& rng);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Member box center drawn from U(x +- d_w/tau) x U(y +- d_h/epsilon), where
/// d_w, d_h are the half-sums of the two boxes' extents. Since tau, epsilon > 1
/// the member box always intersects the group-center box.
Point sample_member_position(const GroupSpec& center, double member_w, double member_h,
                             double center_w, double center_h,
                             const SynthesisConfig& cfg, Rng& rng);

struct SynthesisResult {
  Scene scene;
  std::vector<ConsensusPair> pairs;
};

/// Crowdedness-oriented copy-paste for one image. Fully determined by the
/// arguments.
SynthesisResult synthesize_scene(const Scene& base, const PatchLibrary& lib,
                                 const SynthesisConfig& cfg, std::uint64_t seed);

/// Composites pasted instances over `base_image` in ascending depth rank.
Image render(const Scene& scene, const Image& base_image, const PatchLibrary& lib);

}  // namespace crowdsynth
