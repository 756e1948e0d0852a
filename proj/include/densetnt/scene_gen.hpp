#pragma once

// Synthetic driving scenes. The target agent drives along an ego lane with
// constant speed over its history; its future picks one of the ego branches
// uniformly, draws an unobservable constant acceleration and a smooth lateral
// drift. The endpoint distribution is therefore genuinely multimodal, and the
// generator can also report it as a Gaussian mixture (GeneratedScene::goal_prior).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "densetnt/errors.hpp"
#include "densetnt/geometry.hpp"
#include "densetnt/random.hpp"
#include "densetnt/scene.hpp"

namespace densetnt {

enum class LaneFamily { kStraight, kArc, kFork, kMixed };

inline LaneFamily parse_lane_family(const std::string& s) {
  if (s == "straight") return LaneFamily::kStraight;
  if (s == "arc") return LaneFamily::kArc;
  if (s == "fork") return LaneFamily::kFork;
  if (s == "mixed") return LaneFamily::kMixed;
  throw Error(ErrorCode::kInvalidConfig, "unknown lane family '" + s + "'");
}

struct SceneGenSpec {
  // Fork family: number of branches (at least 2). Straight/arc: number of
  // parallel lanes including the ego lane.
  int lane_count_min = 1;
  int lane_count_max = 3;
  LaneFamily family = LaneFamily::kMixed;
  double lane_length_min = 55.0;
  double lane_length_max = 65.0;
  double curvature_min = 0.015;  // 1/m, magnitude
  double curvature_max = 0.04;
  double lane_spacing = 4.0;
  double lane_width = 3.5;
  double point_spacing = 1.0;
  int agent_count = 2;
  int history_length = 20;
  int future_length = 30;
  double time_step = 0.1;
  double speed_min = 4.0;
  double speed_max = 9.0;
  double accel_max = 1.0;
  double lateral_sigma = 0.5;
  double fork_offset_min = 3.0;
  double fork_offset_max = 10.0;
  double goal_radius = 50.0;  // endpoint must stay inside this Manhattan radius
  int extra_futures = 0;
  std::uint64_t seed = 0;

  double horizon_seconds() const { return future_length * time_step; }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
    if (lane_count_min < 1 || lane_count_max < lane_count_min) fail("lane count range is empty");
    if (!(lane_length_min > 0) || lane_length_max < lane_length_min) fail("lane length range is empty");
    if (curvature_min < 0 || curvature_max < curvature_min) fail("curvature range is empty");
    if (!(point_spacing > 0)) fail("point spacing must be positive");
    if (history_length < 2) fail("history length must be at least 2");
    if (future_length < 1) fail("future horizon must be at least 1");
    if (!(time_step > 0)) fail("time step must be positive");
    if (speed_min < 0 || speed_max < speed_min) fail("speed range is empty");
    if (accel_max < 0 || lateral_sigma < 0) fail("accel_max and lateral_sigma must be non-negative");
    if (fork_offset_min < 0 || fork_offset_max < fork_offset_min) fail("fork offset range is empty");
    if (agent_count < 0) fail("agent count must be non-negative");
    if (extra_futures < 0) fail("extra future count must be non-negative");
    const double tf = horizon_seconds();
    if (lane_length_min - 3.0 - 0.5 * accel_max * tf * tf <= 0) fail("lanes too short for the horizon");
    const double reach = speed_max * tf + 0.5 * accel_max * tf * tf + 3.0 * lateral_sigma;
    if (reach * std::numbers::sqrt2 > goal_radius) fail("speed range can carry the goal outside goal_radius");
  }
};

struct MixtureComponent {
  Vector2 mean;
  double sigma = 1.0;
  double weight = 1.0;
};

struct GeneratedScene {
  Scene scene;                                // normalized
  std::vector<MixtureComponent> goal_prior;   // normalized frame, weights sum to 1
  int chosen_branch = 0;
  // Independent draws of the target's future given the same history and map.
  std::vector<std::vector<Vector2>> extra_futures;
};

namespace detail {

struct Pose {
  Vector2 position;
  double heading = 0.0;
  Vector2 normal() const { return {-std::sin(heading), std::cos(heading)}; }
};

/// Piecewise constant-curvature path.
struct Path {
  struct Piece {
    double length;
    double curvature;
  };
  Pose start;
  std::vector<Piece> pieces;

  double length() const {
    double l = 0;
    for (const auto& p : pieces) l += p.length;
    return l;
  }

  Pose evaluate(double s) const {
    Pose pose = start;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      const bool last = i + 1 == pieces.size();
      const double step = last ? s : std::min(s, pieces[i].length);
      pose = advance(pose, step, pieces[i].curvature);
      s -= step;
      if (s <= 0) break;
    }
    return pose;
  }

  static Pose advance(const Pose& p, double ds, double k) {
    if (std::abs(k) < 1e-12) {
      return {p.position + Vector2{std::cos(p.heading), std::sin(p.heading)} * ds, p.heading};
    }
    const double h1 = p.heading + k * ds;
    const Vector2 d{(std::sin(h1) - std::sin(p.heading)) / k, (std::cos(p.heading) - std::cos(h1)) / k};
    return {p.position + d, h1};
  }
};

inline std::vector<Vector2> sample_path(const Path& path, double lateral_offset, double spacing) {
  const double len = path.length();
  const int n = std::max(1, static_cast<int>(std::ceil(len / spacing - 1e-9)));
  std::vector<Vector2> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) {
    const double s = std::min(len, i * spacing);
    const Pose p = path.evaluate(s);
    pts.push_back(p.position + p.normal() * lateral_offset);
  }
  return pts;
}

inline double travelled(double v, double a, double t) {
  if (a < 0 && v + a * t < 0) return v * v / (-2.0 * a);
  return v * t + 0.5 * a * t * t;
}

}  // namespace detail

inline GeneratedScene generate_scene_with_prior(const SceneGenSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  LaneFamily family = spec.family;
  if (family == LaneFamily::kMixed) {
    constexpr LaneFamily kFamilies[] = {LaneFamily::kStraight, LaneFamily::kArc, LaneFamily::kFork};
    family = kFamilies[rng.index(3)];
  }
  int lane_count = rng.integer(spec.lane_count_min, spec.lane_count_max);
  if (family == LaneFamily::kFork) lane_count = std::max(2, lane_count);

  const double total_length = rng.uniform(spec.lane_length_min, spec.lane_length_max);
  const double tf = spec.horizon_seconds();
  const double history_span_time = (spec.history_length - 1) * spec.time_step;
  const double speed_cap = (total_length - 3.0 - 0.5 * spec.accel_max * tf * tf) / (history_span_time + tf);
  const double v_hi = std::min(spec.speed_max, speed_cap);
  const double v_lo = std::min(spec.speed_min, v_hi);
  const double speed = rng.uniform(v_lo, v_hi);
  const double s_now = speed * history_span_time + 2.0;

  const double curvature_mag = rng.uniform(spec.curvature_min, spec.curvature_max);
  const double curvature_sign = rng.uniform() < 0.5 ? -1.0 : 1.0;

  // Ego paths (branches the target may follow) and the lateral offsets of
  // every lane relative to its path.
  std::vector<detail::Path> ego_paths;
  struct LaneDef {
    int path_index;
    double offset;
  };
  std::vector<LaneDef> lane_defs;
  const detail::Pose origin_pose{{0.0, 0.0}, 0.0};
  if (family == LaneFamily::kFork) {
    const double fork_at = s_now + rng.uniform(spec.fork_offset_min, spec.fork_offset_max);
    std::vector<double> curvatures;
    if (lane_count == 2) {
      const int pattern = static_cast<int>(rng.index(3));
      if (pattern == 0) curvatures = {0.0, curvature_mag};
      else if (pattern == 1) curvatures = {0.0, -curvature_mag};
      else curvatures = {-curvature_mag, curvature_mag};
    } else {
      for (int b = 0; b < lane_count; ++b) {
        curvatures.push_back(curvature_mag * (2.0 * b / (lane_count - 1) - 1.0));
      }
    }
    for (double k : curvatures) {
      ego_paths.push_back(detail::Path{origin_pose, {{fork_at, 0.0}, {total_length - fork_at, k}}});
      lane_defs.push_back({static_cast<int>(ego_paths.size()) - 1, 0.0});
    }
  } else {
    const double k = family == LaneFamily::kArc ? curvature_sign * curvature_mag : 0.0;
    ego_paths.push_back(detail::Path{origin_pose, {{total_length, k}}});
    for (int j = 0; j < lane_count; ++j) {
      // 0, +1, -1, +2, ... lane spacings
      const int side = (j + 1) / 2;
      const double offset = (j % 2 == 1 ? 1.0 : -1.0) * side * spec.lane_spacing;
      lane_defs.push_back({0, j == 0 ? 0.0 : offset});
    }
  }

  Scene raw;
  for (std::size_t j = 0; j < lane_defs.size(); ++j) {
    Polyline lane;
    lane.id = static_cast<int>(j);
    lane.kind = PolylineKind::kLane;
    lane.width = spec.lane_width;
    lane.points = detail::sample_path(ego_paths[lane_defs[j].path_index], lane_defs[j].offset, spec.point_spacing);
    raw.polylines.push_back(std::move(lane));
  }

  for (int a = 0; a < spec.agent_count; ++a) {
    const auto& def = lane_defs[rng.index(lane_defs.size())];
    const auto& path = ego_paths[def.path_index];
    const double v = rng.uniform(0.0, spec.speed_max);
    const double span = v * history_span_time;
    const double s_end = rng.uniform(span, std::max(span, path.length()));
    Polyline agent;
    agent.id = 100 + a;
    agent.kind = PolylineKind::kAgent;
    for (int i = 0; i < spec.history_length; ++i) {
      const double s = s_end - v * (spec.history_length - 1 - i) * spec.time_step;
      const auto pose = path.evaluate(s);
      agent.points.push_back(pose.position + pose.normal() * def.offset);
    }
    raw.polylines.push_back(std::move(agent));
  }

  const auto& ego_base = ego_paths.front();
  for (int i = 0; i < spec.history_length; ++i) {
    const double s = s_now - speed * (spec.history_length - 1 - i) * spec.time_step;
    raw.target_history.push_back(ego_base.evaluate(s).position);
  }

  auto draw_future = [&](Rng& r, int& branch_out) {
    const int branch = static_cast<int>(r.index(ego_paths.size()));
    const double accel = r.uniform(-spec.accel_max, spec.accel_max);
    const double drift = r.normal(0.0, spec.lateral_sigma);
    std::vector<Vector2> future;
    for (int t = 1; t <= spec.future_length; ++t) {
      const double tau = t * spec.time_step;
      const auto pose = ego_paths[branch].evaluate(s_now + detail::travelled(speed, accel, tau));
      const double lateral = drift * static_cast<double>(t) / spec.future_length;
      future.push_back(pose.position + pose.normal() * lateral);
    }
    branch_out = branch;
    return future;
  };
  int branch = 0;
  raw.target_future = draw_future(rng, branch);
  // Further draws of the same future process come from their own stream so
  // the scene itself does not depend on how many are requested.
  std::vector<std::vector<Vector2>> extra;
  Rng extra_rng(derive_seed(spec.seed, 0xf0702eULL));
  for (int f = 0; f < spec.extra_futures; ++f) {
    int unused = 0;
    extra.push_back(draw_future(extra_rng, unused));
  }

  // Known endpoint distribution: per branch, a grid over (acceleration,
  // lateral drift). Acceleration nodes are equally weighted, drift nodes
  // weighted by the drift density; each node is a narrow isotropic blob.
  std::vector<MixtureComponent> prior;
  const double s_lo = detail::travelled(speed, -spec.accel_max, tf);
  const double s_hi = detail::travelled(speed, spec.accel_max, tf);
  const double step = std::max(0.25 * spec.lateral_sigma, 0.05);
  const int along = std::clamp(static_cast<int>(std::ceil((s_hi - s_lo) / step)) + 1, 2, 400);
  const int half_across = spec.lateral_sigma > 0 ? static_cast<int>(std::ceil(3.0 * spec.lateral_sigma / step)) : 0;
  std::vector<double> drift_weight;
  double drift_total = 0.0;
  for (int l = -half_across; l <= half_across; ++l) {
    const double u = spec.lateral_sigma > 0 ? l * step / spec.lateral_sigma : 0.0;
    drift_weight.push_back(std::exp(-0.5 * u * u));
    drift_total += drift_weight.back();
  }
  const double sigma = std::max(0.5 * step, 0.5 * (s_hi - s_lo) / (along - 1));
  for (const auto& path : ego_paths) {
    for (int j = 0; j < along; ++j) {
      const double a = -spec.accel_max + 2.0 * spec.accel_max * j / (along - 1);
      const auto pose = path.evaluate(s_now + detail::travelled(speed, a, tf));
      for (int l = -half_across; l <= half_across; ++l) {
        const double w = drift_weight[l + half_across] / drift_total / (along * ego_paths.size());
        prior.push_back({pose.position + pose.normal() * (l * step), sigma, w});
      }
    }
  }

  // Random world pose, then back into the target frame.
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const RigidTransform world{{rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0)}, std::cos(angle),
                             std::sin(angle)};
  auto to_world = [&](std::vector<Vector2>& pts) {
    for (auto& p : pts) p = world.apply(p);
  };
  for (auto& pl : raw.polylines) to_world(pl.points);
  to_world(raw.target_history);
  to_world(raw.target_future);
  for (auto& f : extra) to_world(f);
  for (auto& c : prior) c.mean = world.apply(c.mean);

  const RigidTransform to_target = normalization_transform(raw);
  GeneratedScene out;
  out.scene = normalize_scene(raw);
  for (auto& c : prior) c.mean = to_target.apply(c.mean);
  out.goal_prior = std::move(prior);
  for (auto& f : extra) {
    for (auto& p : f) p = to_target.apply(p);
  }
  out.extra_futures = std::move(extra);
  out.chosen_branch = branch;
  return out;
}

inline Scene generate_scene(const SceneGenSpec& spec) { return generate_scene_with_prior(spec).scene; }

/// Scene i of a suite seeded by `seed`.
inline SceneGenSpec suite_spec(SceneGenSpec base, std::uint64_t seed, std::size_t index) {
  base.seed = derive_seed(seed, index);
  return base;
}

}  // namespace densetnt
