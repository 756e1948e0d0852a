#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "densetnt/csv.hpp"
#include "densetnt/errors.hpp"
#include "densetnt/geometry.hpp"

namespace densetnt {

using Trajectory = std::vector<Vector2>;

inline constexpr double kMissThreshold = 2.0;

namespace detail {

inline void check_lengths(std::span<const Trajectory> preds, const Trajectory& gt) {
  if (preds.empty()) throw Error(ErrorCode::kEmptyInput, "no predicted trajectories");
  if (gt.empty()) throw Error(ErrorCode::kEmptyInput, "empty ground-truth trajectory");
  for (const auto& p : preds) {
    if (p.size() != gt.size()) {
      throw Error(ErrorCode::kLengthMismatch, "prediction has " + std::to_string(p.size()) + " points, ground truth " +
                                                  std::to_string(gt.size()));
    }
  }
}

}  // namespace detail

inline double min_fde(std::span<const Trajectory> preds, const Trajectory& gt) {
  detail::check_lengths(preds, gt);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : preds) best = std::min(best, distance(p.back(), gt.back()));
  return best;
}

inline double min_ade(std::span<const Trajectory> preds, const Trajectory& gt) {
  detail::check_lengths(preds, gt);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : preds) {
    double s = 0.0;
    for (std::size_t t = 0; t < gt.size(); ++t) s += distance(p[t], gt[t]);
    best = std::min(best, s / static_cast<double>(gt.size()));
  }
  return best;
}

/// Exactly `threshold` is a hit.
inline bool is_miss(double fde, double threshold = kMissThreshold) { return fde > threshold; }

inline double miss_rate(std::span<const double> min_fdes, double threshold = kMissThreshold) {
  if (min_fdes.empty()) throw Error(ErrorCode::kEmptyInput, "miss rate over an empty dataset");
  std::size_t misses = 0;
  for (double d : min_fdes) misses += is_miss(d, threshold) ? 1 : 0;
  return static_cast<double>(misses) / static_cast<double>(min_fdes.size());
}

struct SceneMetrics {
  double min_ade = 0.0;
  double min_fde = 0.0;
  bool miss = false;
};

struct MetricsReport {
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  std::vector<SceneMetrics> scenes;
};

/// Per-scene predictions against per-scene ground truth, reduced in order.
inline MetricsReport evaluate(const std::vector<std::vector<Trajectory>>& preds, const std::vector<Trajectory>& gts,
                              double threshold = kMissThreshold) {
  if (preds.size() != gts.size()) throw Error(ErrorCode::kLengthMismatch, "one prediction set per scene expected");
  if (preds.empty()) throw Error(ErrorCode::kEmptyInput, "evaluation over an empty dataset");
  MetricsReport r;
  std::vector<double> fdes;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    SceneMetrics m{min_ade(preds[i], gts[i]), min_fde(preds[i], gts[i]), false};
    m.miss = is_miss(m.min_fde, threshold);
    r.min_ade += m.min_ade;
    r.min_fde += m.min_fde;
    fdes.push_back(m.min_fde);
    r.scenes.push_back(m);
  }
  r.min_ade /= static_cast<double>(preds.size());
  r.min_fde /= static_cast<double>(preds.size());
  r.miss_rate = miss_rate(fdes, threshold);
  return r;
}

inline void write_metrics_csv(std::ostream& out, const MetricsReport& r, std::uint64_t seed) {
  CsvWriter w(out, seed, {"scene", "min_ade", "min_fde", "miss"});
  for (std::size_t i = 0; i < r.scenes.size(); ++i) {
    w.row(std::to_string(i), r.scenes[i].min_ade, r.scenes[i].min_fde, r.scenes[i].miss ? 1 : 0);
  }
  w.row(std::string("mean"), r.min_ade, r.min_fde, r.miss_rate);
}

}  // namespace densetnt
