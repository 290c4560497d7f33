#include "crowdsynth/consensus.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "crowdsynth/errors.hpp"

namespace crowdsynth {

namespace {

void require_component(double v, const char* name) {
  if (!std::isfinite(v) || v < 0.0) {
    throw InvalidInput(std::string(name) + " must be finite and non-negative");
  }
}

}  // namespace

void LossWeights::validate() const {
  for (auto [v, name] : {std::pair{alpha, "alpha"}, {gamma, "gamma"}, {eta, "eta"}}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ConfigError(std::string(name) + ": must satisfy " + name + " >= 0");
    }
  }
}

ScoreStats score_stats(std::span<const double> scores) {
  if (scores.empty()) throw InvalidInput("score_stats: empty score list");
  for (double c : scores) {
    if (!(c >= 0.0 && c <= 1.0)) {
      throw InvalidInput("score_stats: score outside [0, 1]");
    }
  }
  // Accumulate around the first score so that constant sets give sigma = 0
  // exactly.
  const double m = static_cast<double>(scores.size());
  const double pivot = scores.front();
  double sum = 0.0;
  for (double c : scores) sum += c - pivot;
  const double shift = sum / m;
  double ss = 0.0;
  for (double c : scores) ss += (c - pivot - shift) * (c - pivot - shift);
  return {pivot + shift, std::sqrt(ss / m)};
}

ScoreStats score_stats(const ProposalScores& p) {
  return score_stats(std::span<const double>(p.scores));
}

double consensus_loss(std::span<const StatsPair> pairs) {
  if (pairs.empty()) throw InvalidInput("consensus_loss: no pairs");
  double total = 0.0;
  for (const auto& [overlaid, free] : pairs) {
    const double dm = overlaid.mu - free.mu;
    const double ds = overlaid.sigma - free.sigma;
    total += dm * dm + ds * ds;
  }
  return total / static_cast<double>(pairs.size());
}

double od_loss(std::span<const double> pred, std::span<const double> gt) {
  if (pred.empty()) throw InvalidInput("od_loss: empty input");
  if (pred.size() != gt.size()) {
    throw InvalidInput("od_loss: " + std::to_string(pred.size()) +
                       " predictions for " + std::to_string(gt.size()) + " targets");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gt[i];
    total += d * d;
  }
  return total / static_cast<double>(pred.size());
}

double combined_loss(double l_cls_reg, double l_cl, std::optional<double> l_od,
                     const LossWeights& w) {
  w.validate();
  require_component(l_cls_reg, "l_cls_reg");
  require_component(l_cl, "l_cl");
  double total = w.alpha * l_cls_reg + w.gamma * l_cl;
  if (l_od) {
    require_component(*l_od, "l_od");
    total += w.eta * *l_od;
  }
  return total;
}

}  // namespace crowdsynth
