#include "crowdsynth/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "crowdsynth/errors.hpp"

namespace crowdsynth {

BBox::BBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max)) {
    throw InvalidGeometry("box has non-finite coordinates");
  }
  if (!(x_min < x_max) || !(y_min < y_max)) {
    std::ostringstream os;
    os << "degenerate box (" << x_min << ", " << y_min << ", " << x_max << ", "
       << y_max << "): extents must be positive";
    throw InvalidGeometry(os.str());
  }
}

BBox BBox::from_xywh(double x, double y, double w, double h) {
  return BBox(x, y, x + w, y + h);
}

BBox BBox::from_center(double cx, double cy, double w, double h) {
  return BBox(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h);
}

double area(const BBox& b) noexcept { return b.width() * b.height(); }

double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (area(a) + area(b) - inter);
}

double union_area_within(const BBox& clip, std::span<const BBox> boxes) {
  struct Rect {
    double x0, y0, x1, y1;
  };
  std::vector<Rect> rects;
  rects.reserve(boxes.size());
  std::vector<double> xs{clip.x_min(), clip.x_max()};
  std::vector<double> ys{clip.y_min(), clip.y_max()};
  for (const BBox& b : boxes) {
    Rect r{std::max(b.x_min(), clip.x_min()), std::max(b.y_min(), clip.y_min()),
           std::min(b.x_max(), clip.x_max()), std::min(b.y_max(), clip.y_max())};
    if (r.x0 >= r.x1 || r.y0 >= r.y1) continue;
    rects.push_back(r);
    xs.push_back(r.x0);
    xs.push_back(r.x1);
    ys.push_back(r.y0);
    ys.push_back(r.y1);
  }
  if (rects.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  const std::size_t nx = xs.size() - 1;
  const std::size_t ny = ys.size() - 1;
  std::vector<char> covered(nx * ny, 0);
  for (const Rect& r : rects) {
    const auto ix0 = std::lower_bound(xs.begin(), xs.end(), r.x0) - xs.begin();
    const auto ix1 = std::lower_bound(xs.begin(), xs.end(), r.x1) - xs.begin();
    const auto iy0 = std::lower_bound(ys.begin(), ys.end(), r.y0) - ys.begin();
    const auto iy1 = std::lower_bound(ys.begin(), ys.end(), r.y1) - ys.begin();
    for (auto iy = iy0; iy < iy1; ++iy) {
      for (auto ix = ix0; ix < ix1; ++ix) covered[iy * nx + ix] = 1;
    }
  }
  double total = 0.0;
  for (std::size_t iy = 0; iy < ny; ++iy) {
    const double h = ys[iy + 1] - ys[iy];
    for (std::size_t ix = 0; ix < nx; ++ix) {
      if (covered[iy * nx + ix]) total += (xs[ix + 1] - xs[ix]) * h;
    }
  }
  return total;
}

const ObjectInstance& Scene::find(InstanceId id) const {
  auto it = std::find_if(instances.begin(), instances.end(),
                         [id](const ObjectInstance& o) { return o.id == id; });
  if (it == instances.end()) {
    throw NotFound("instance " + std::to_string(id) + " not found in image " +
                   std::to_string(image_id));
  }
  return *it;
}

ObjectInstance& Scene::find(InstanceId id) {
  return const_cast<ObjectInstance&>(std::as_const(*this).find(id));
}

bool Scene::contains(InstanceId id) const noexcept {
  return std::any_of(instances.begin(), instances.end(),
                     [id](const ObjectInstance& o) { return o.id == id; });
}

void Scene::validate() const {
  if (image_width <= 0 || image_height <= 0) {
    throw InvalidInput("image " + std::to_string(image_id) +
                       ": width and height must be positive");
  }
  const BBox frame(0.0, 0.0, image_width, image_height);
  std::unordered_set<InstanceId> seen;
  for (const ObjectInstance& o : instances) {
    if (!seen.insert(o.id).second) {
      throw InvalidInput("image " + std::to_string(image_id) +
                         ": duplicate instance id " + std::to_string(o.id));
    }
    if (intersection_area(frame, o.bbox) <= 0.0) {
      throw InvalidInput("image " + std::to_string(image_id) + ": instance " +
                         std::to_string(o.id) + " lies outside the image");
    }
  }
}

std::vector<InstanceId> occluder_set(const Scene& scene, InstanceId target_id) {
  const ObjectInstance& target = scene.find(target_id);
  std::vector<InstanceId> out;
  for (const ObjectInstance& o : scene.instances) {
    if (o.id == target.id || o.depth_rank <= target.depth_rank) continue;
    if (intersection_area(target.bbox, o.bbox) > 0.0) out.push_back(o.id);
  }
  return out;
}

double compute_od(const Scene& scene, InstanceId target_id) {
  const ObjectInstance& target = scene.find(target_id);
  double covered = 0.0;
  for (const ObjectInstance& o : scene.instances) {
    if (o.id == target.id || o.depth_rank <= target.depth_rank) continue;
    covered += intersection_area(target.bbox, o.bbox);
  }
  return 1.0 + covered / area(target.bbox);
}

double occlusion_ratio(const Scene& scene, InstanceId target_id) {
  const ObjectInstance& target = scene.find(target_id);
  std::vector<BBox> front;
  for (const ObjectInstance& o : scene.instances) {
    if (o.id == target.id || o.depth_rank <= target.depth_rank) continue;
    front.push_back(o.bbox);
  }
  const double ratio = union_area_within(target.bbox, front) / area(target.bbox);
  return std::clamp(ratio, 0.0, 1.0);
}

void assign_depth_labels(Scene& scene, DepthLabelScope scope) {
  std::vector<std::pair<double, double>> labels;
  labels.reserve(scene.instances.size());
  for (const ObjectInstance& o : scene.instances) {
    labels.emplace_back(compute_od(scene, o.id), occlusion_ratio(scene, o.id));
  }
  for (std::size_t i = 0; i < scene.instances.size(); ++i) {
    ObjectInstance& o = scene.instances[i];
    if (scope == DepthLabelScope::kPastedOnly && !o.is_pasted) {
      o.od_gt.reset();
      o.occlusion_ratio.reset();
      continue;
    }
    o.od_gt = labels[i].first;
    o.occlusion_ratio = labels[i].second;
  }
}

}  // namespace crowdsynth
