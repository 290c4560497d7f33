#include "crowdsynth/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "crowdsynth/errors.hpp"

namespace crowdsynth {

namespace {

void require(bool ok, const char* field, const char* rule) {
  if (!ok) throw ConfigError(std::string(field) + ": must satisfy " + rule);
}

double inside_fraction(const BBox& box, int width, int height) {
  const BBox frame(0.0, 0.0, width, height);
  return intersection_area(frame, box) / area(box);
}

}  // namespace

void SynthesisConfig::validate() const {
  require(max_groups >= 0, "N", "N >= 0");
  require(max_members >= 0, "M", "M >= 0");
  require(std::isfinite(tau) && tau > 1.0, "tau", "tau > 1");
  require(std::isfinite(epsilon) && epsilon > 1.0, "epsilon", "epsilon > 1");
  require(std::isfinite(sigma) && sigma > 0.0, "sigma", "sigma > 0");
  require(std::isfinite(size_lo) && size_lo > 0.0, "size_clip", "0 < lo < hi <= 1");
  require(std::isfinite(size_hi) && size_lo < size_hi && size_hi <= 1.0, "size_clip",
          "0 < lo < hi <= 1");
  require(max_resample >= 1, "max_resample", "max_resample >= 1");
  require(min_inside_fraction > 0.0 && min_inside_fraction <= 1.0,
          "min_inside_fraction", "0 < min_inside_fraction <= 1");
}

Patch::Patch(PatchId id, Image rgba, double native_size, std::string category)
    : id_(id),
      rgba_(std::move(rgba)),
      native_size_(native_size),
      category_(std::move(category)) {
  const std::string who = "patch " + std::to_string(id_);
  if (rgba_.empty()) throw InvalidPatch(who + ": empty raster");
  int x0 = rgba_.width(), y0 = rgba_.height(), x1 = 0, y1 = 0;
  for (int y = 0; y < rgba_.height(); ++y) {
    for (int x = 0; x < rgba_.width(); ++x) {
      const std::uint8_t a = rgba_.at(x, y)[3];
      if (a != 0 && a != 255) throw InvalidPatch(who + ": alpha is not binary");
      if (a == 0) continue;
      ++mask_area_;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x + 1);
      y1 = std::max(y1, y + 1);
    }
  }
  if (mask_area_ == 0) throw InvalidPatch(who + ": mask is empty");
  bounds_ = {x0, y0, x1, y1};
}

void binarize_alpha(Image& image) {
  auto& b = image.bytes();
  for (std::size_t i = 3; i < b.size(); i += 4) b[i] = b[i] >= 128 ? 255 : 0;
}

const Patch& PatchLibrary::find(PatchId id) const {
  auto it = std::find_if(patches.begin(), patches.end(),
                         [id](const Patch& p) { return p.id() == id; });
  if (it == patches.end()) {
    throw NotFound("patch " + std::to_string(id) + " not in library");
  }
  return *it;
}

void PatchLibrary::validate() const {
  std::unordered_set<PatchId> seen;
  for (const Patch& p : patches) {
    if (!seen.insert(p.id()).second) {
      throw InvalidInput("duplicate patch id " + std::to_string(p.id()));
    }
  }
}

double normalized_size(const BBox& box, int image_width, int image_height) noexcept {
  return std::sqrt(area(box) / (static_cast<double>(image_width) * image_height));
}

std::pair<double, double> extents_for_size(double normalized, double aspect,
                                           int image_width, int image_height) noexcept {
  const double box_area =
      normalized * normalized * static_cast<double>(image_width) * image_height;
  return {std::sqrt(box_area * aspect), std::sqrt(box_area / aspect)};
}

std::vector<GroupSpec> sample_group_centers(const Scene& scene,
                                            const SynthesisConfig& cfg, Rng& rng) {
  const auto count = static_cast<std::size_t>(rng.uniform_int(0, cfg.max_groups));

  // Candidates: original objects whose center lies inside the image.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < scene.instances.size(); ++i) {
    const ObjectInstance& o = scene.instances[i];
    const double cx = o.bbox.center_x();
    const double cy = o.bbox.center_y();
    if (o.is_pasted || cx < 0.0 || cy < 0.0 || cx >= scene.image_width ||
        cy >= scene.image_height) {
      continue;
    }
    candidates.push_back(i);
  }
  const std::size_t k = std::min(count, candidates.size());

  std::vector<GroupSpec> groups;
  groups.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
    const ObjectInstance& o = scene.instances[candidates[i]];
    const double s =
        std::min(1.0, normalized_size(o.bbox, scene.image_width, scene.image_height));
    groups.push_back({o.bbox.center_x(), o.bbox.center_y(), s, o.id});
  }
  return groups;
}

double sample_member_size(double s_center, const SynthesisConfig& cfg, Rng& rng) {
  for (int attempt = 0; attempt < cfg.max_resample; ++attempt) {
    const double s = rng.normal(s_center, cfg.sigma);
    if (s >= cfg.size_lo && s <= cfg.size_hi) return s;
  }
  return std::clamp(s_center, cfg.size_lo, cfg.size_hi);
}

Point sample_member_position(const GroupSpec& center, double member_w, double member_h,
                             double center_w, double center_h,
                             const SynthesisConfig& cfg, Rng& rng) {
  const double dx = 0.5 * (center_w + member_w) / cfg.tau;
  const double dy = 0.5 * (center_h + member_h) / cfg.epsilon;
  const double x = rng.uniform(center.x - dx, center.x + dx);
  const double y = rng.uniform(center.y - dy, center.y + dy);
  return {x, y};
}

SynthesisResult synthesize_scene(const Scene& base, const PatchLibrary& lib,
                                 const SynthesisConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  base.validate();
  if (cfg.max_groups > 0 && lib.empty()) {
    throw ConfigError("patch library is empty but N > 0");
  }

  Rng rng(seed);
  SynthesisResult result{base, {}};
  Scene& out = result.scene;
  out.seed = seed;
  const int width = out.image_width;
  const int height = out.image_height;

  std::int64_t next_rank = 0;
  InstanceId next_id = 1;
  for (const ObjectInstance& o : out.instances) {
    next_rank = std::max(next_rank, o.depth_rank + 1);
    next_id = std::max(next_id, o.id + 1);
  }

  const std::vector<GroupSpec> groups = sample_group_centers(base, cfg, rng);
  std::vector<InstanceId> members;
  for (const GroupSpec& group : groups) {
    const BBox& source = base.find(group.source_instance).bbox;
    const auto count = rng.uniform_int(0, cfg.max_members);
    for (std::int64_t j = 0; j < count; ++j) {
      const Patch& patch = lib.patches[rng.index(lib.size())];
      const double s = sample_member_size(group.s, cfg, rng);
      const auto [w, h] = extents_for_size(s, patch.aspect(), width, height);

      std::optional<BBox> placed;
      for (int attempt = 0; attempt < cfg.max_resample; ++attempt) {
        const Point p = sample_member_position(group, w, h, source.width(),
                                               source.height(), cfg, rng);
        const BBox box = BBox::from_center(p.x, p.y, w, h);
        if (inside_fraction(box, width, height) >= cfg.min_inside_fraction) {
          placed = box;
          break;
        }
      }
      if (!placed) continue;

      ObjectInstance inst;
      inst.id = next_id++;
      inst.bbox = *placed;
      inst.category = patch.category();
      inst.is_pasted = true;
      inst.depth_rank = next_rank++;
      inst.patch_id = patch.id();
      out.instances.push_back(std::move(inst));
      members.push_back(out.instances.back().id);
    }
  }

  // Overlaid members get a non-overlaid twin of the same patch and size.
  std::vector<InstanceId> overlaid;
  for (InstanceId id : members) {
    if (!occluder_set(out, id).empty()) overlaid.push_back(id);
  }
  for (InstanceId id : overlaid) {
    const ObjectInstance source = out.find(id);
    const double w = source.bbox.width();
    const double h = source.bbox.height();
    if (w > width || h > height) continue;

    std::optional<BBox> placed;
    for (int attempt = 0; attempt < cfg.max_resample; ++attempt) {
      const double x0 = rng.uniform(0.0, width - w);
      const double y0 = rng.uniform(0.0, height - h);
      const BBox box(x0, y0, x0 + w, y0 + h);
      const bool clear = std::none_of(
          out.instances.begin(), out.instances.end(),
          [&](const ObjectInstance& o) { return intersection_area(o.bbox, box) > 0.0; });
      if (clear) {
        placed = box;
        break;
      }
    }
    if (!placed) continue;

    ObjectInstance twin = source;
    twin.id = next_id++;
    twin.bbox = *placed;
    twin.depth_rank = next_rank++;
    out.instances.push_back(twin);
    result.pairs.push_back({source.id, twin.id, *source.patch_id});
  }

  // Nothing pasted: the annotations stay exactly as given.
  if (out.instances.size() != base.instances.size()) {
    assign_depth_labels(out, DepthLabelScope::kPastedOnly);
  }
  return result;
}

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Alpha-weighted bilinear sample of the color channels at continuous patch
// coordinates (pixel centers at integer + 0.5).
Rgba sample_color(const Image& img, double u, double v, int nearest_x, int nearest_y) {
  const double fx = u - 0.5;
  const double fy = v - 0.5;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double ax = fx - x0;
  const double ay = fy - y0;
  double acc[3] = {0.0, 0.0, 0.0};
  double weight = 0.0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const int x = std::clamp(x0 + dx, 0, img.width() - 1);
      const int y = std::clamp(y0 + dy, 0, img.height() - 1);
      const Rgba px = img.at(x, y);
      if (px[3] == 0) continue;
      const double w = (dx ? ax : 1.0 - ax) * (dy ? ay : 1.0 - ay);
      for (int c = 0; c < 3; ++c) acc[c] += w * px[c];
      weight += w;
    }
  }
  if (weight <= 0.0) {
    Rgba px = img.at(nearest_x, nearest_y);
    px[3] = 255;
    return px;
  }
  return {to_byte(acc[0] / weight), to_byte(acc[1] / weight), to_byte(acc[2] / weight),
          255};
}

void paste(Image& canvas, const Patch& patch, const BBox& box) {
  const Image& src = patch.rgba();
  const Patch::MaskBounds& mb = patch.mask_bounds();
  const double sx = mb.width() / box.width();
  const double sy = mb.height() / box.height();

  const int px0 = std::max(0, static_cast<int>(std::floor(box.x_min())));
  const int px1 = std::min(canvas.width(), static_cast<int>(std::ceil(box.x_max())));
  const int py0 = std::max(0, static_cast<int>(std::floor(box.y_min())));
  const int py1 = std::min(canvas.height(), static_cast<int>(std::ceil(box.y_max())));

  for (int py = py0; py < py1; ++py) {
    const double cy = py + 0.5;
    if (cy < box.y_min() || cy >= box.y_max()) continue;
    const double v = mb.y0 + (cy - box.y_min()) * sy;
    const int iy = std::clamp(static_cast<int>(std::floor(v)), mb.y0, mb.y1 - 1);
    for (int px = px0; px < px1; ++px) {
      const double cx = px + 0.5;
      if (cx < box.x_min() || cx >= box.x_max()) continue;
      const double u = mb.x0 + (cx - box.x_min()) * sx;
      const int ix = std::clamp(static_cast<int>(std::floor(u)), mb.x0, mb.x1 - 1);
      if (src.at(ix, iy)[3] == 0) continue;
      canvas.set(px, py, sample_color(src, u, v, ix, iy));
    }
  }
}

}  // namespace

Image render(const Scene& scene, const Image& base_image, const PatchLibrary& lib) {
  if (base_image.width() != scene.image_width ||
      base_image.height() != scene.image_height) {
    throw InvalidInput("base image " + std::to_string(base_image.width()) + "x" +
                       std::to_string(base_image.height()) +
                       " does not match scene " + std::to_string(scene.image_width) +
                       "x" + std::to_string(scene.image_height));
  }
  std::vector<const ObjectInstance*> pasted;
  for (const ObjectInstance& o : scene.instances) {
    if (o.is_pasted) pasted.push_back(&o);
  }
  std::stable_sort(pasted.begin(), pasted.end(),
                   [](const ObjectInstance* a, const ObjectInstance* b) {
                     return a->depth_rank < b->depth_rank;
                   });

  Image canvas = base_image;
  for (const ObjectInstance* o : pasted) {
    if (!o->patch_id) {
      throw NotFound("pasted instance " + std::to_string(o->id) + " has no patch_id");
    }
    paste(canvas, lib.find(*o->patch_id), o->bbox);
  }
  return canvas;
}

}  // namespace crowdsynth
