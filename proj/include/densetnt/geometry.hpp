#pragma once

#include <algorithm>
#include <cmath>
#include <span>

namespace densetnt {

/// Planar point or displacement in meters.
struct Vector2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vector2() = default;
  constexpr Vector2(double x_in, double y_in) : x(x_in), y(y_in) {}

  constexpr Vector2 operator+(const Vector2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vector2 operator-(const Vector2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vector2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vector2& operator+=(const Vector2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vector2&) const = default;

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

constexpr double dot(const Vector2& a, const Vector2& b) { return a.x * b.x + a.y * b.y; }
constexpr double squared_norm(const Vector2& v) { return dot(v, v); }
inline double norm(const Vector2& v) { return std::hypot(v.x, v.y); }
constexpr double squared_distance(const Vector2& a, const Vector2& b) { return squared_norm(a - b); }
inline double distance(const Vector2& a, const Vector2& b) { return std::sqrt(squared_distance(a, b)); }
constexpr double manhattan_norm(const Vector2& v) {
  return (v.x < 0 ? -v.x : v.x) + (v.y < 0 ? -v.y : v.y);
}

/// Euclidean distance from p to the closed segment [a, b].
inline double point_segment_distance(const Vector2& p, const Vector2& a, const Vector2& b) {
  const Vector2 ab = b - a;
  const double len2 = squared_norm(ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

/// Distance from p to a polyline through `points` (segment-wise). A single
/// point degenerates to point distance.
inline double point_polyline_distance(const Vector2& p, std::span<const Vector2> points) {
  if (points.size() == 1) return distance(p, points.front());
  double best = INFINITY;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    best = std::min(best, point_segment_distance(p, points[i], points[i + 1]));
  }
  return best;
}

/// Rotation followed by translation: p' = R (p - origin), with R stored as
/// its first row (c, -s) / second row (s, c).
struct RigidTransform {
  Vector2 origin;
  double cos_angle = 1.0;
  double sin_angle = 0.0;

  Vector2 apply(const Vector2& p) const {
    const Vector2 d = p - origin;
    return {cos_angle * d.x - sin_angle * d.y, sin_angle * d.x + cos_angle * d.y};
  }
};

}  // namespace densetnt
