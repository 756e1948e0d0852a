#pragma once

#include <vector>

#include "densetnt/goal_sampler.hpp"
#include "densetnt/nn/tape.hpp"
#include "densetnt/scene.hpp"

namespace densetnt {

inline constexpr Eigen::Index kVectorFeatureWidth = 4 + static_cast<Eigen::Index>(kAttributeCount);

/// Model-ready view of one normalized scene.
struct SceneSample {
  nn::Matrix vectors;                  // one row per vector, kVectorFeatureWidth columns
  std::vector<Eigen::Index> offsets;   // polyline p owns rows [offsets[p], offsets[p+1])
  std::vector<Eigen::Index> lane_rows; // polyline row of each lane, scene order
  std::vector<int> lane_ids;
  CandidateSet candidates;
  bool has_future = false;
  std::vector<Vector2> future;
  Vector2 goal;                        // last future point
  std::size_t goal_label = 0;          // nearest candidate to the goal
  std::size_t lane_label = 0;          // index into lane_rows
};

/// Rows of [start, end] * coord_scale followed by the attribute vector with
/// indices and width multiplied by attribute_scale.
inline nn::Matrix vector_features(const std::vector<Polyline>& polylines, double coord_scale, double attribute_scale,
                                  std::vector<Eigen::Index>& offsets) {
  Eigen::Index rows = 0;
  offsets.assign(1, 0);
  for (const auto& pl : polylines) {
    rows += static_cast<Eigen::Index>(pl.vectors.size());
    offsets.push_back(rows);
  }
  nn::Matrix m(rows, kVectorFeatureWidth);
  Eigen::Index r = 0;
  for (const auto& pl : polylines) {
    for (const auto& v : pl.vectors) {
      m(r, 0) = v.start.x * coord_scale;
      m(r, 1) = v.start.y * coord_scale;
      m(r, 2) = v.end.x * coord_scale;
      m(r, 3) = v.end.y * coord_scale;
      m(r, 4) = v.attributes[0];
      for (std::size_t a = 1; a < kAttributeCount; ++a) m(r, 4 + static_cast<Eigen::Index>(a)) = v.attributes[a] * attribute_scale;
      ++r;
    }
  }
  return m;
}

/// Index of the lane minimizing lane_distance to p; lowest index on ties.
inline std::size_t nearest_lane(const std::vector<const Polyline*>& lanes, const Vector2& p) {
  if (lanes.empty()) throw Error(ErrorCode::kNoLanesInRange, "scene has no lanes");
  std::size_t best = 0;
  double best_d = lane_distance(*lanes[0], p);
  for (std::size_t i = 1; i < lanes.size(); ++i) {
    const double d = lane_distance(*lanes[i], p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

inline SceneSample make_sample(const Scene& scene, const SamplerConfig& sampler, double coord_scale,
                               double attribute_scale = 0.1) {
  SceneSample s;
  const auto polylines = vectorize_scene(scene);
  s.vectors = vector_features(polylines, coord_scale, attribute_scale, s.offsets);
  for (std::size_t p = 0; p < polylines.size(); ++p) {
    if (polylines[p].kind == PolylineKind::kLane) {
      s.lane_rows.push_back(static_cast<Eigen::Index>(p));
      s.lane_ids.push_back(polylines[p].id);
    }
  }
  if (s.lane_rows.empty()) throw Error(ErrorCode::kNoLanesInRange, "scene has no lanes");
  s.candidates = sample_candidates(scene, sampler);
  if (!scene.target_future.empty()) {
    s.has_future = true;
    s.future = scene.target_future;
    s.goal = scene.target_future.back();
    s.goal_label = nearest_candidate(s.candidates, s.goal);
    s.lane_label = nearest_lane(scene.lanes(), s.goal);
  }
  return s;
}

}  // namespace densetnt
