#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "densetnt/errors.hpp"
#include "densetnt/geometry.hpp"

namespace densetnt {

enum class PolylineKind { kLane, kAgent };

/// Attribute layout carried by every vector:
///   [0] kind flag: 1 for lane, 0 for agent
///   [1] lane point index (lanes) or timestamp step (agents) of the start point
///   [2] same for the end point
///   [3] width hint in meters (lane width; 0 for agents)
inline constexpr std::size_t kAttributeCount = 4;
using Attributes = std::array<double, kAttributeCount>;

struct PolyVector {
  Vector2 start;
  Vector2 end;
  Attributes attributes{};
};

struct Polyline {
  int id = 0;
  PolylineKind kind = PolylineKind::kLane;
  std::vector<Vector2> points;
  std::vector<PolyVector> vectors;  // filled by vectorize_scene
  double width = 0.0;
};

struct Scene {
  std::vector<Polyline> polylines;
  std::vector<Vector2> target_history;
  std::vector<Vector2> target_future;
  bool normalized = false;

  std::vector<const Polyline*> lanes() const {
    std::vector<const Polyline*> out;
    for (const auto& p : polylines) {
      if (p.kind == PolylineKind::kLane) out.push_back(&p);
    }
    return out;
  }
};

/// Id reserved for the target agent's polyline in vectorized output.
inline constexpr int kTargetPolylineId = -1;

/// Transform that moves the last history point to the origin and the last
/// step's heading onto +y.
inline RigidTransform normalization_transform(const Scene& scene) {
  if (scene.target_history.size() < 2) {
    throw Error(ErrorCode::kDegenerateHeading, "target history needs at least 2 points");
  }
  const Vector2 last = scene.target_history.back();
  const Vector2 prev = scene.target_history[scene.target_history.size() - 2];
  const Vector2 heading = last - prev;
  const double len = norm(heading);
  if (!(len > 1e-12)) {
    throw Error(ErrorCode::kDegenerateHeading, "last two history points coincide");
  }
  const double c = heading.x / len;
  const double s = heading.y / len;
  // Rotation by (pi/2 - theta) where (c, s) = (cos theta, sin theta).
  return RigidTransform{last, s, c};
}

inline Scene normalize_scene(const Scene& scene) {
  if (scene.normalized) throw Error(ErrorCode::kAlreadyNormalized, "scene is already normalized");
  const RigidTransform tf = normalization_transform(scene);
  Scene out = scene;
  auto map_all = [&](std::vector<Vector2>& pts) {
    for (auto& p : pts) p = tf.apply(p);
  };
  for (auto& pl : out.polylines) {
    map_all(pl.points);
    for (auto& v : pl.vectors) {
      v.start = tf.apply(v.start);
      v.end = tf.apply(v.end);
    }
  }
  map_all(out.target_history);
  map_all(out.target_future);
  // The anchor maps to the origin exactly; rounding would otherwise leave
  // residue of order 1e-16.
  out.target_history.back() = Vector2{0.0, 0.0};
  out.normalized = true;
  return out;
}

inline std::vector<PolyVector> vectorize_points(const std::vector<Vector2>& points,
                                                PolylineKind kind, double width) {
  std::vector<PolyVector> vectors;
  vectors.reserve(points.size() > 0 ? points.size() - 1 : 0);
  const double kind_flag = kind == PolylineKind::kLane ? 1.0 : 0.0;
  for (std::size_t j = 0; j + 1 < points.size(); ++j) {
    vectors.push_back(PolyVector{points[j], points[j + 1],
                                 Attributes{kind_flag, static_cast<double>(j),
                                            static_cast<double>(j + 1), width}});
  }
  return vectors;
}

/// Returns the target agent polyline first (id kTargetPolylineId), followed
/// by the scene's polylines in order, each with its vector chain populated.
inline std::vector<Polyline> vectorize_scene(const Scene& scene) {
  if (!scene.normalized) throw Error(ErrorCode::kNotNormalized, "vectorize_scene needs a normalized scene");
  std::vector<Polyline> out;
  out.reserve(scene.polylines.size() + 1);

  Polyline target;
  target.id = kTargetPolylineId;
  target.kind = PolylineKind::kAgent;
  target.points = scene.target_history;
  out.push_back(std::move(target));
  for (const auto& pl : scene.polylines) out.push_back(pl);

  for (auto& pl : out) {
    if (pl.points.size() < 2) {
      throw Error(ErrorCode::kMalformedPolyline,
                  "polyline " + std::to_string(pl.id) + " has fewer than 2 points");
    }
    pl.vectors = vectorize_points(pl.points, pl.kind, pl.width);
  }
  return out;
}

/// Inverse of vectorization: recovers the point sequence from a vector chain.
inline std::vector<Vector2> chain_points(const std::vector<PolyVector>& vectors) {
  std::vector<Vector2> pts;
  if (vectors.empty()) return pts;
  pts.push_back(vectors.front().start);
  for (const auto& v : vectors) pts.push_back(v.end);
  return pts;
}

}  // namespace densetnt
