#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "crowdsynth/geometry.hpp"
#include "crowdsynth/odnms.hpp"

namespace crowdsynth {

/// Parameters of the stand-in detector. Scores follow
/// clamp(slope * IoU + bias + Normal(0, noise_base + noise_occ * occlusion), 0, 1).
struct SimConfig {
  int proposals_per_object = 8;
  double iou_low = 0.5;
  double score_slope = 1.0;
  double score_bias = 0.0;
  double noise_base = 0.02;
  double noise_occ = 0.2;
  double duplicate_rate = 0.0;
  double od_noise = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MatchedSample {
  double iou = 0.0;
  double score = 0.0;
  double occlusion_ratio = 0.0;
};

struct SimOutput {
  std::vector<Detection> detections;
  std::vector<MatchedSample> samples;
};

/// Proposals are ground-truth boxes shifted to an exact target IoU drawn from
/// U(iou_low, 1). Each proposal is matched to the ground-truth object of
/// maximal IoU (>= 0.5 to produce a sample); score, noise scale and predicted
/// od all derive from the matched object. Seeded by cfg.seed.
SimOutput simulate_detections(const Scene& scene, const SimConfig& cfg);

/// Box with the same extents as `box`, shifted so that iou(result, box) equals
/// `target_iou` up to rounding. `angle` picks the shift direction.
BBox shift_to_iou(const BBox& box, double target_iou, double angle);

inline constexpr int kIcdBins = 100;
inline constexpr int kIcdBands = 3;

/// Occlusion bands [0, 0.33], (0.33, 0.66], (0.66, 1].
int icd_band(double occlusion) noexcept;
/// floor(iou * 100) clamped to [0, 99].
int icd_bin(double iou) noexcept;

struct IcdBin {
  std::size_t count = 0;
  double mean = 0.0;  // NaN when count == 0
  double std = 0.0;   // population std; NaN when count == 0
};

struct IcdHistogram {
  std::array<std::array<IcdBin, kIcdBins>, kIcdBands> bands{};

  std::size_t band_count(int band) const noexcept;
  std::size_t total() const noexcept;
};

IcdHistogram icd_histogram(std::span<const MatchedSample> samples);

/// Mean of the per-bin score stds over bins holding at least two samples, and
/// the standard error of that mean across bins.
struct BandSummary {
  double mean_std = 0.0;
  double std_error = 0.0;
  std::size_t bins_used = 0;
  std::size_t samples = 0;
};

BandSummary summarize_band(const IcdHistogram& hist, int band);

struct IcdReport {
  IcdHistogram histogram;
  std::array<BandSummary, kIcdBands> bands{};
  std::vector<MatchedSample> samples;
};

/// Simulates every scene (seed derived from sim.seed and the image id) and
/// bins the matched samples.
IcdReport run_icd_experiment(std::span<const Scene> scenes, const SimConfig& sim,
                             int jobs = 1);

using ImageDetections = std::vector<Detection>;

/// All-point interpolated AP. Detections are matched in descending score
/// order to the unmatched ground truth of highest IoU >= iou_th.
double average_precision(std::span<const ImageDetections> dets,
                         std::span<const Scene> gts, double iou_th);

/// Mean AP over IoU thresholds 0.50:0.05:0.95.
double average_precision_coco(std::span<const ImageDetections> dets,
                              std::span<const Scene> gts);

/// Fraction of ground-truth objects matched at iou_th.
double recall(std::span<const ImageDetections> dets, std::span<const Scene> gts,
              double iou_th);

/// Log-average miss rate over 9 FPPI reference points log-spaced in
/// [1e-2, 1e0].
double mr2(std::span<const ImageDetections> dets, std::span<const Scene> gts,
           double iou_th);

struct RecallReport {
  double recall_nms = 0.0;
  double recall_odnms = 0.0;
  double ap_nms = 0.0;
  double ap_odnms = 0.0;
  std::size_t gt_count = 0;
  std::size_t kept_nms = 0;
  std::size_t kept_odnms = 0;
};

/// Runs standard NMS and OD-NMS on identical simulated detections and scores
/// both at IoU 0.5.
RecallReport run_recall_experiment(std::span<const Scene> scenes, const SimConfig& sim,
                                   const NmsConfig& nms, int jobs = 1);

/// Scenes made of side-by-side crowded pairs: a front box and a same-sized
/// box behind it, horizontally shifted to an IoU in [iou_lo, iou_hi]. The back
/// box carries od_gt = 1 + gap with gap drawn from [od_gap_lo, od_gap_hi];
/// the front box has od_gt = 1.
struct CrowdPairSpec {
  int image_width = 640;
  int image_height = 480;
  int pairs_per_scene = 4;
  double iou_lo = 0.55;
  double iou_hi = 0.8;
  double od_gap_lo = 1.5;
  double od_gap_hi = 3.0;
  double box_w_lo = 30.0;
  double box_w_hi = 60.0;
  double aspect = 0.5;  // width / height
};

std::vector<Scene> make_crowd_pair_scenes(std::size_t count, const CrowdPairSpec& spec,
                                          std::uint64_t seed);

/// Scenes of randomly clustered boxes with a random depth order; od_gt and
/// occlusion_ratio are filled for every instance.
struct CrowdSceneSpec {
  int image_width = 640;
  int image_height = 480;
  int clusters = 6;
  int max_cluster_size = 5;
  double box_w_lo = 30.0;
  double box_w_hi = 70.0;
  double aspect = 0.5;
  double spread = 0.6;  // member offset, in units of the member extents
};

std::vector<Scene> make_crowd_scenes(std::size_t count, const CrowdSceneSpec& spec,
                                     std::uint64_t seed);

}  // namespace crowdsynth
