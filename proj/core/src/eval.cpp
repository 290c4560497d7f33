#include "crowdsynth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "crowdsynth/errors.hpp"
#include "crowdsynth/parallel.hpp"
#include "crowdsynth/rng.hpp"

namespace crowdsynth {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSampleIouFloor = 0.5;

}  // namespace

void SimConfig::validate() const {
  if (proposals_per_object < 1) {
    throw ConfigError("proposals_per_object: must be >= 1");
  }
  if (!(iou_low > 0.0 && iou_low <= 1.0)) {
    throw ConfigError("iou_low: must satisfy 0 < iou_low <= 1");
  }
  if (!std::isfinite(score_slope)) throw ConfigError("score_slope: must be finite");
  if (!std::isfinite(score_bias)) throw ConfigError("score_bias: must be finite");
  if (!(noise_base >= 0.0 && std::isfinite(noise_base))) {
    throw ConfigError("noise_base: must be >= 0");
  }
  if (!(noise_occ >= 0.0 && std::isfinite(noise_occ))) {
    throw ConfigError("noise_occ: must be >= 0");
  }
  if (!(duplicate_rate >= 0.0 && duplicate_rate <= 1.0)) {
    throw ConfigError("duplicate_rate: must lie in [0, 1]");
  }
  if (!(od_noise >= 0.0 && std::isfinite(od_noise))) {
    throw ConfigError("od_noise: must be >= 0");
  }
}

BBox shift_to_iou(const BBox& box, double target_iou, double angle) {
  const double t = std::clamp(target_iou, 1e-9, 1.0);
  // For equal-sized boxes with normalized overlap I = (1 - r*a)(1 - r*b),
  // IoU = I / (2 - I). Solve for the smallest root r.
  const double q = 2.0 * t / (1.0 + t);
  const double a = std::abs(std::cos(angle));
  const double b = std::abs(std::sin(angle));
  const double disc = std::max(0.0, (a + b) * (a + b) - 4.0 * a * b * (1.0 - q));
  const double r = 2.0 * (1.0 - q) / ((a + b) + std::sqrt(disc));
  const double dx = std::copysign(r * a * box.width(), std::cos(angle));
  const double dy = std::copysign(r * b * box.height(), std::sin(angle));
  return BBox(box.x_min() + dx, box.y_min() + dy, box.x_max() + dx, box.y_max() + dy);
}

SimOutput simulate_detections(const Scene& scene, const SimConfig& cfg) {
  cfg.validate();
  for (const ObjectInstance& o : scene.instances) {
    if (!o.occlusion_ratio) {
      throw InvalidInput("image " + std::to_string(scene.image_id) + ": instance " +
                         std::to_string(o.id) + " has no occlusion_ratio");
    }
  }

  Rng rng(cfg.seed);
  SimOutput out;

  auto emit = [&](const BBox& box) {
    std::size_t best = 0;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < scene.instances.size(); ++g) {
      const double v = iou(box, scene.instances[g].bbox);
      if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    const ObjectInstance& gt = scene.instances[best];
    const double occ = *gt.occlusion_ratio;
    const double noise = rng.normal(0.0, 1.0) * (cfg.noise_base + cfg.noise_occ * occ);
    const double score =
        std::clamp(cfg.score_slope * best_iou + cfg.score_bias + noise, 0.0, 1.0);
    const double od = gt.od_gt.value_or(1.0) + cfg.od_noise * rng.normal(0.0, 1.0);
    out.detections.push_back({box, score, od});
    if (best_iou >= kSampleIouFloor) out.samples.push_back({best_iou, score, occ});
  };

  for (const ObjectInstance& o : scene.instances) {
    for (int k = 0; k < cfg.proposals_per_object; ++k) {
      const double t = rng.uniform(cfg.iou_low, 1.0);
      emit(shift_to_iou(o.bbox, t, rng.uniform(0.0, 2.0 * std::numbers::pi)));
    }
    if (rng.bernoulli(cfg.duplicate_rate)) {
      const double t = rng.uniform(std::max(0.9, cfg.iou_low), 1.0);
      emit(shift_to_iou(o.bbox, t, rng.uniform(0.0, 2.0 * std::numbers::pi)));
    }
  }
  return out;
}

int icd_band(double occlusion) noexcept {
  if (occlusion <= 0.33) return 0;
  if (occlusion <= 0.66) return 1;
  return 2;
}

int icd_bin(double iou) noexcept {
  const double b = std::floor(iou * kIcdBins);
  if (!(b >= 0.0)) return 0;
  return static_cast<int>(std::min<double>(b, kIcdBins - 1));
}

std::size_t IcdHistogram::band_count(int band) const noexcept {
  std::size_t n = 0;
  for (const IcdBin& b : bands[band]) n += b.count;
  return n;
}

std::size_t IcdHistogram::total() const noexcept {
  std::size_t n = 0;
  for (int b = 0; b < kIcdBands; ++b) n += band_count(b);
  return n;
}

IcdHistogram icd_histogram(std::span<const MatchedSample> samples) {
  struct Acc {
    std::size_t n = 0;
    double sum = 0.0;
  };
  std::array<std::array<Acc, kIcdBins>, kIcdBands> acc{};
  for (const MatchedSample& s : samples) {
    Acc& a = acc[icd_band(s.occlusion_ratio)][icd_bin(s.iou)];
    ++a.n;
    a.sum += s.score;
  }
  IcdHistogram hist;
  for (int band = 0; band < kIcdBands; ++band) {
    for (int bin = 0; bin < kIcdBins; ++bin) {
      IcdBin& out = hist.bands[band][bin];
      out.count = acc[band][bin].n;
      out.mean = out.count ? acc[band][bin].sum / out.count : kNaN;
      out.std = out.count ? 0.0 : kNaN;
    }
  }
  // Second pass for the spread around the finished means.
  std::array<std::array<double, kIcdBins>, kIcdBands> ss{};
  for (const MatchedSample& s : samples) {
    const int band = icd_band(s.occlusion_ratio);
    const int bin = icd_bin(s.iou);
    const double d = s.score - hist.bands[band][bin].mean;
    ss[band][bin] += d * d;
  }
  for (int band = 0; band < kIcdBands; ++band) {
    for (int bin = 0; bin < kIcdBins; ++bin) {
      IcdBin& out = hist.bands[band][bin];
      if (out.count) out.std = std::sqrt(ss[band][bin] / out.count);
    }
  }
  return hist;
}

BandSummary summarize_band(const IcdHistogram& hist, int band) {
  BandSummary s;
  std::vector<double> stds;
  for (const IcdBin& b : hist.bands[band]) {
    s.samples += b.count;
    if (b.count >= 2) stds.push_back(b.std);
  }
  s.bins_used = stds.size();
  if (stds.empty()) {
    s.mean_std = kNaN;
    s.std_error = kNaN;
    return s;
  }
  const double n = static_cast<double>(stds.size());
  s.mean_std = std::accumulate(stds.begin(), stds.end(), 0.0) / n;
  if (stds.size() < 2) {
    s.std_error = kNaN;
    return s;
  }
  double ss = 0.0;
  for (double v : stds) ss += (v - s.mean_std) * (v - s.mean_std);
  s.std_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return s;
}

namespace {

SimConfig seeded_for(const SimConfig& sim, const Scene& scene) {
  SimConfig c = sim;
  c.seed = derive_seed(sim.seed, static_cast<std::uint64_t>(scene.image_id));
  return c;
}

}  // namespace

IcdReport run_icd_experiment(std::span<const Scene> scenes, const SimConfig& sim,
                             int jobs) {
  sim.validate();
  std::vector<std::vector<MatchedSample>> per_scene(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    per_scene[i] = simulate_detections(scenes[i], seeded_for(sim, scenes[i])).samples;
  });
  IcdReport report;
  for (auto& s : per_scene) {
    report.samples.insert(report.samples.end(), s.begin(), s.end());
  }
  report.histogram = icd_histogram(report.samples);
  for (int b = 0; b < kIcdBands; ++b) report.bands[b] = summarize_band(report.histogram, b);
  return report;
}

namespace {

struct ScoredMatch {
  double score;
  bool tp;
};

struct Matching {
  std::vector<ScoredMatch> matches;  // descending score
  std::size_t num_gt = 0;
  std::size_t num_tp = 0;
};

Matching match_detections(std::span<const ImageDetections> dets,
                          std::span<const Scene> gts, double iou_th) {
  if (dets.size() != gts.size()) {
    throw InvalidInput("detections cover " + std::to_string(dets.size()) +
                       " images but ground truth covers " + std::to_string(gts.size()));
  }
  Matching m;
  for (std::size_t img = 0; img < gts.size(); ++img) {
    const auto& gt = gts[img].instances;
    const auto& d = dets[img];
    m.num_gt += gt.size();

    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return d[a].score > d[b].score;
    });
    std::vector<char> taken(gt.size(), 0);
    for (std::size_t i : order) {
      double best_iou = iou_th;
      std::ptrdiff_t best = -1;
      for (std::size_t g = 0; g < gt.size(); ++g) {
        if (taken[g]) continue;
        const double v = iou(d[i].bbox, gt[g].bbox);
        if (v >= best_iou && (best < 0 || v > best_iou)) {
          best_iou = v;
          best = static_cast<std::ptrdiff_t>(g);
        }
      }
      if (best >= 0) {
        taken[best] = 1;
        ++m.num_tp;
      }
      m.matches.push_back({d[i].score, best >= 0});
    }
  }
  std::stable_sort(m.matches.begin(), m.matches.end(),
                   [](const ScoredMatch& a, const ScoredMatch& b) { return a.score > b.score; });
  if (m.num_gt == 0) throw InvalidInput("ground truth holds no objects");
  return m;
}

}  // namespace

double average_precision(std::span<const ImageDetections> dets,
                         std::span<const Scene> gts, double iou_th) {
  const Matching m = match_detections(dets, gts, iou_th);
  const std::size_t n = m.matches.size();
  std::vector<double> rec(n + 2, 0.0), prec(n + 2, 0.0);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (m.matches[i].tp) ++tp;
    rec[i + 1] = static_cast<double>(tp) / m.num_gt;
    prec[i + 1] = static_cast<double>(tp) / (i + 1);
  }
  rec[n + 1] = n ? rec[n] : 0.0;
  prec[n + 1] = 0.0;
  for (std::size_t i = n + 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
  double ap = 0.0;
  for (std::size_t i = 1; i <= n; ++i) ap += (rec[i] - rec[i - 1]) * prec[i];
  return ap;
}

double average_precision_coco(std::span<const ImageDetections> dets,
                              std::span<const Scene> gts) {
  double total = 0.0;
  for (int k = 0; k < 10; ++k) total += average_precision(dets, gts, 0.5 + 0.05 * k);
  return total / 10.0;
}

double recall(std::span<const ImageDetections> dets, std::span<const Scene> gts,
              double iou_th) {
  const Matching m = match_detections(dets, gts, iou_th);
  return static_cast<double>(m.num_tp) / m.num_gt;
}

double mr2(std::span<const ImageDetections> dets, std::span<const Scene> gts,
           double iou_th) {
  if (gts.empty()) throw InvalidInput("mr2: no images");
  const Matching m = match_detections(dets, gts, iou_th);
  const double images = static_cast<double>(gts.size());

  // (fppi, miss) after each distinct score threshold, starting from "keep
  // nothing".
  std::vector<std::pair<double, double>> curve{{0.0, 1.0}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < m.matches.size(); ++i) {
    (m.matches[i].tp ? tp : fp) += 1;
    if (i + 1 < m.matches.size() && m.matches[i + 1].score == m.matches[i].score) {
      continue;
    }
    curve.emplace_back(fp / images, static_cast<double>(m.num_gt - tp) / m.num_gt);
  }

  double log_sum = 0.0;
  for (int k = 0; k < 9; ++k) {
    const double ref = std::pow(10.0, -2.0 + 0.25 * k);
    double miss = 1.0;
    for (const auto& [fppi, mr] : curve) {
      if (fppi <= ref) miss = mr;
    }
    log_sum += std::log(std::max(miss, 1e-10));
  }
  return std::exp(log_sum / 9.0);
}

RecallReport run_recall_experiment(std::span<const Scene> scenes, const SimConfig& sim,
                                   const NmsConfig& nms, int jobs) {
  sim.validate();
  nms.validate();
  std::vector<ImageDetections> kept_nms(scenes.size()), kept_od(scenes.size());
  parallel_for(scenes.size(), jobs, [&](std::size_t i) {
    const SimOutput out = simulate_detections(scenes[i], seeded_for(sim, scenes[i]));
    kept_nms[i] = standard_nms(out.detections, nms.th_iou);
    kept_od[i] = od_nms(out.detections, nms);
  });
  RecallReport r;
  r.recall_nms = recall(kept_nms, scenes, 0.5);
  r.recall_odnms = recall(kept_od, scenes, 0.5);
  r.ap_nms = average_precision(kept_nms, scenes, 0.5);
  r.ap_odnms = average_precision(kept_od, scenes, 0.5);
  for (const Scene& s : scenes) r.gt_count += s.instances.size();
  for (const auto& k : kept_nms) r.kept_nms += k.size();
  for (const auto& k : kept_od) r.kept_odnms += k.size();
  return r;
}

std::vector<Scene> make_crowd_pair_scenes(std::size_t count, const CrowdPairSpec& spec,
                                          std::uint64_t seed) {
  if (spec.pairs_per_scene < 1 || spec.image_width <= 0 || spec.image_height <= 0) {
    throw ConfigError("crowd pair spec: sizes must be positive");
  }
  std::vector<Scene> scenes;
  scenes.reserve(count);
  const double cell_w = static_cast<double>(spec.image_width) / spec.pairs_per_scene;
  for (std::size_t s = 0; s < count; ++s) {
    Rng rng(derive_seed(seed, s));
    Scene scene;
    scene.image_id = static_cast<std::int64_t>(s) + 1;
    scene.image_width = spec.image_width;
    scene.image_height = spec.image_height;
    std::vector<double> gaps;
    InstanceId next_id = 1;
    for (int p = 0; p < spec.pairs_per_scene; ++p) {
      const double w = rng.uniform(spec.box_w_lo, spec.box_w_hi);
      const double h = w / spec.aspect;
      const double t = rng.uniform(spec.iou_lo, spec.iou_hi);
      const double shift = w * (1.0 - t) / (1.0 + t);
      const double span = w + shift;
      const double x0 = p * cell_w + rng.uniform(0.0, std::max(0.0, cell_w - span));
      const double y0 = rng.uniform(0.0, std::max(0.0, spec.image_height - h));
      const bool back_left = rng.bernoulli(0.5);
      const double back_x = back_left ? x0 : x0 + shift;
      const double front_x = back_left ? x0 + shift : x0;
      gaps.push_back(rng.uniform(spec.od_gap_lo, spec.od_gap_hi));

      ObjectInstance back;
      back.id = next_id++;
      back.bbox = BBox(back_x, y0, back_x + w, y0 + h);
      back.depth_rank = 2 * p;
      ObjectInstance front;
      front.id = next_id++;
      front.bbox = BBox(front_x, y0, front_x + w, y0 + h);
      front.depth_rank = 2 * p + 1;
      scene.instances.push_back(back);
      scene.instances.push_back(front);
    }
    assign_depth_labels(scene, DepthLabelScope::kAll);
    for (int p = 0; p < spec.pairs_per_scene; ++p) {
      scene.instances[2 * p].od_gt = 1.0 + gaps[p];
      scene.instances[2 * p + 1].od_gt = 1.0;
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<Scene> make_crowd_scenes(std::size_t count, const CrowdSceneSpec& spec,
                                     std::uint64_t seed) {
  if (spec.image_width <= 0 || spec.image_height <= 0 || spec.clusters < 0 ||
      spec.max_cluster_size < 1) {
    throw ConfigError("crowd scene spec: sizes must be positive");
  }
  const double W = spec.image_width;
  const double H = spec.image_height;
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Rng rng(derive_seed(seed, s));
    Scene scene;
    scene.image_id = static_cast<std::int64_t>(s) + 1;
    scene.image_width = spec.image_width;
    scene.image_height = spec.image_height;
    InstanceId next_id = 1;
    for (int c = 0; c < spec.clusters; ++c) {
      const double cx = rng.uniform(0.1 * W, 0.9 * W);
      const double cy = rng.uniform(0.1 * H, 0.9 * H);
      const auto members = rng.uniform_int(1, spec.max_cluster_size);
      for (std::int64_t k = 0; k < members; ++k) {
        const double w = std::min(rng.uniform(spec.box_w_lo, spec.box_w_hi), W);
        const double h = std::min(w / spec.aspect, H);
        double x = cx + rng.uniform(-spec.spread, spec.spread) * w;
        double y = cy + rng.uniform(-spec.spread, spec.spread) * h;
        x = std::clamp(x, 0.5 * w, W - 0.5 * w);
        y = std::clamp(y, 0.5 * h, H - 0.5 * h);
        ObjectInstance o;
        o.id = next_id++;
        o.bbox = BBox::from_center(x, y, w, h);
        scene.instances.push_back(o);
      }
    }
    // Random depth order.
    std::vector<std::int64_t> ranks(scene.instances.size());
    std::iota(ranks.begin(), ranks.end(), std::int64_t{0});
    for (std::size_t i = ranks.size(); i > 1; --i) {
      std::swap(ranks[i - 1], ranks[rng.index(i)]);
    }
    for (std::size_t i = 0; i < ranks.size(); ++i) scene.instances[i].depth_rank = ranks[i];
    assign_depth_labels(scene, DepthLabelScope::kAll);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

}  // namespace crowdsynth
