#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "densetnt/csv.hpp"
#include "densetnt/errors.hpp"
#include "densetnt/scene.hpp"

namespace densetnt {

struct SamplerConfig {
  double radius = 50.0;               // Manhattan, around the target
  double density = 1.0;               // grid pitch
  double centerline_halfwidth = 3.0;

  void validate() const {
    if (!(density > 0)) throw Error(ErrorCode::kInvalidConfig, "sampling density must be positive");
    if (!(radius > 0)) throw Error(ErrorCode::kInvalidConfig, "sampling radius must be positive");
    if (!(centerline_halfwidth >= 0)) throw Error(ErrorCode::kInvalidConfig, "halfwidth must be non-negative");
  }
};

struct CandidateSet {
  std::vector<Vector2> points;
  std::vector<int> source_lane;  // lane id per candidate
  double density = 1.0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Slack on inclusive comparisons so that grid points built as i * density
// land on the intended side of a boundary.
inline constexpr double kBoundaryEpsilon = 1e-9;

inline std::vector<int> select_lanes(const Scene& scene, const SamplerConfig& cfg) {
  cfg.validate();
  if (!scene.normalized) throw Error(ErrorCode::kNotNormalized, "select_lanes needs a normalized scene");
  std::vector<int> ids;
  for (const auto& pl : scene.polylines) {
    if (pl.kind != PolylineKind::kLane) continue;
    for (const auto& p : pl.points) {
      if (manhattan_norm(p) <= cfg.radius + kBoundaryEpsilon) {
        ids.push_back(pl.id);
        break;
      }
    }
  }
  if (ids.empty()) throw Error(ErrorCode::kNoLanesInRange, "no lane has a point within the sampling radius");
  return ids;
}

/// Grid candidates (pitch = density, anchored at the origin) within the
/// halfwidth of a selected lane's centerline and within the Manhattan radius.
/// Cells claimed by several lanes appear once, tagged with the nearest lane
/// (earlier lane on ties). Output is ordered by grid column, then row.
inline CandidateSet sample_candidates(const Scene& scene, const SamplerConfig& cfg) {
  const std::vector<int> lane_ids = select_lanes(scene, cfg);
  const double d = cfg.density;
  const double hw = cfg.centerline_halfwidth;

  struct Claim {
    double dist;
    std::size_t lane_order;
  };
  std::map<std::pair<long, long>, Claim> cells;

  std::size_t order = 0;
  for (const auto& pl : scene.polylines) {
    if (pl.kind != PolylineKind::kLane) continue;
    if (std::find(lane_ids.begin(), lane_ids.end(), pl.id) == lane_ids.end()) continue;
    const std::size_t lane_order = order++;
    const auto& pts = pl.points;
    const std::size_t nseg = pts.size() == 1 ? 1 : pts.size() - 1;
    for (std::size_t s = 0; s < nseg; ++s) {
      const Vector2 a = pts[s];
      const Vector2 b = pts.size() == 1 ? pts[s] : pts[s + 1];
      const long ix0 = static_cast<long>(std::ceil((std::min(a.x, b.x) - hw) / d - kBoundaryEpsilon));
      const long ix1 = static_cast<long>(std::floor((std::max(a.x, b.x) + hw) / d + kBoundaryEpsilon));
      const long iy0 = static_cast<long>(std::ceil((std::min(a.y, b.y) - hw) / d - kBoundaryEpsilon));
      const long iy1 = static_cast<long>(std::floor((std::max(a.y, b.y) + hw) / d + kBoundaryEpsilon));
      for (long ix = ix0; ix <= ix1; ++ix) {
        for (long iy = iy0; iy <= iy1; ++iy) {
          const Vector2 p{ix * d, iy * d};
          if (manhattan_norm(p) > cfg.radius + kBoundaryEpsilon) continue;
          const double dist = point_segment_distance(p, a, b);
          if (dist > hw + kBoundaryEpsilon) continue;
          auto [it, inserted] = cells.try_emplace({ix, iy}, Claim{dist, lane_order});
          if (inserted) continue;
          Claim& c = it->second;
          if (c.lane_order == lane_order) {
            c.dist = std::min(c.dist, dist);
          } else if (dist < c.dist - kBoundaryEpsilon) {
            c = Claim{dist, lane_order};
          }
        }
      }
    }
  }

  CandidateSet out;
  out.density = d;
  out.points.reserve(cells.size());
  out.source_lane.reserve(cells.size());
  for (const auto& [key, claim] : cells) {
    out.points.push_back({key.first * d, key.second * d});
    out.source_lane.push_back(lane_ids[claim.lane_order]);
  }
  return out;
}

/// Index of the closest candidate; lowest index wins ties.
inline std::size_t nearest_candidate(std::span<const Vector2> points, const Vector2& p) {
  if (points.empty()) throw Error(ErrorCode::kEmptyCandidates, "nearest_candidate on an empty set");
  std::size_t best = 0;
  double best_d = squared_distance(points[0], p);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double di = squared_distance(points[i], p);
    if (di < best_d) {
      best_d = di;
      best = i;
    }
  }
  return best;
}

inline std::size_t nearest_candidate(const CandidateSet& cands, const Vector2& p) {
  return nearest_candidate(std::span<const Vector2>(cands.points), p);
}

/// min_j ||l_j - p||^2 over the lane's points (not its segments).
inline double lane_distance(const Polyline& lane, const Vector2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : lane.points) best = std::min(best, squared_distance(q, p));
  return best;
}

inline void write_candidates_csv(std::ostream& out, const CandidateSet& cands, std::uint64_t seed) {
  CsvWriter w(out, seed, {"x", "y", "lane_id"});
  for (std::size_t i = 0; i < cands.size(); ++i) {
    w.row(cands.points[i].x, cands.points[i].y, cands.source_lane[i]);
  }
}

}  // namespace densetnt
