#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "crowdsynth/geometry.hpp"

namespace crowdsynth {

/// Confidences of the proposals matched to one object.
struct ProposalScores {
  InstanceId object_id = 0;
  std::vector<double> scores;
};

struct ScoreStats {
  double mu = 0.0;
  double sigma = 0.0;  // population std (divisor m)

  friend bool operator==(const ScoreStats&, const ScoreStats&) = default;
};

/// Weights of the detector objective; defaults are alpha = gamma = 1,
/// eta = 0.1.
struct LossWeights {
  double alpha = 1.0;
  double gamma = 1.0;
  double eta = 0.1;

  void validate() const;
};

ScoreStats score_stats(std::span<const double> scores);
ScoreStats score_stats(const ProposalScores& p);

/// Overlaid stats first, free (non-overlaid) target second.
using StatsPair = std::pair<ScoreStats, ScoreStats>;

/// Mean over pairs of (mu - mu*)^2 + (sigma - sigma*)^2. The free half is a
/// target: a trainer should stop gradients through it.
double consensus_loss(std::span<const StatsPair> pairs);

/// Mean squared error between predicted and ground-truth overlay depths.
double od_loss(std::span<const double> pred, std::span<const double> gt);

/// alpha * l_cls_reg + gamma * l_cl (+ eta * l_od when the OD ground truth is
/// available).
double combined_loss(double l_cls_reg, double l_cl, std::optional<double> l_od,
                     const LossWeights& w = {});

}  // namespace crowdsynth
