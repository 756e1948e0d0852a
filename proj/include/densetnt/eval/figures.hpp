#pragma once

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "densetnt/eval/metrics.hpp"
#include "densetnt/goal_set_optimizer.hpp"
#include "densetnt/scene.hpp"
#include "densetnt/selection.hpp"

namespace densetnt {

/// Two heatmaps on which NMS prefers opposite suppression radii for K = 2.
/// On `wide` the main mode has side cells 1 m away and a second mode 10 m
/// away: a small radius wastes the second goal on a side cell. On `close`
/// two modes 3 m apart are both needed and a large radius discards one in
/// favour of a light far cell. One goal between the close modes covers both,
/// which no cell-picking rule can do.
struct NmsCounterexample {
  Heatmap wide;
  Heatmap close;
  double small_threshold = 0.5;
  double large_threshold = 5.0;
  int k = 2;
};

inline NmsCounterexample nms_counterexample() {
  NmsCounterexample c;
  c.wide.cells = {{{0, 0}, 0.3}, {{-1, 0}, 0.25}, {{1, 0}, 0.25}, {{10, 0}, 0.2}};
  c.close.cells = {{{0, 0}, 0.4}, {{3, 0}, 0.35}, {{20, 0}, 0.25}};
  return c;
}

struct NmsComparison {
  std::vector<double> thresholds;
  std::vector<double> nms_errors;  // per threshold
  double best_threshold = 0.0;     // lowest threshold attaining the minimum
  double best_nms_error = 0.0;
  GoalSet optimized;
  double optimized_error = 0.0;
};

/// NMS sweep and hill climbing on one heatmap; both errors are evaluated
/// on the heatmap as given.
inline NmsComparison compare_nms(const Heatmap& h, int k, const Objective& obj, const std::vector<double>& thresholds,
                                 const OptimConfig& optim) {
  NmsComparison c;
  c.thresholds = thresholds;
  c.best_nms_error = std::numeric_limits<double>::infinity();
  for (double t : thresholds) {
    const double e = expected_error(nms_select(h, {t, k}).goals, h, obj);
    c.nms_errors.push_back(e);
    if (e < c.best_nms_error) {
      c.best_nms_error = e;
      c.best_threshold = t;
    }
  }
  OptimConfig oc = optim;
  oc.k = k;
  c.optimized = hill_climb(h, obj, oc).goals;
  c.optimized_error = expected_error(c.optimized, h, obj);
  return c;
}

inline double nms_error(const Heatmap& h, double threshold, int k, const Objective& obj) {
  return expected_error(nms_select(h, {threshold, k}).goals, h, obj);
}

/// The small radius wins on `close`, the large one on `wide`.
inline bool thresholds_cross(const NmsCounterexample& c, const Objective& obj) {
  return nms_error(c.wide, c.large_threshold, c.k, obj) < nms_error(c.wide, c.small_threshold, c.k, obj) &&
         nms_error(c.close, c.small_threshold, c.k, obj) < nms_error(c.close, c.large_threshold, c.k, obj);
}

struct SvgLayer {
  const Scene* scene = nullptr;
  const Heatmap* heatmap = nullptr;
  const GoalSet* goals = nullptr;
  const std::vector<Trajectory>* predictions = nullptr;
};

/// Map in grey, heatmap cells in red by mass, predictions and goals in
/// orange, ground truth in green. Coordinates are meters, y up.
inline std::string render_svg(const SvgLayer& layer, double size_px = 600.0) {
  double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
  double hi_x = -lo_x, hi_y = -lo_x;
  auto grow = [&](const Vector2& p) {
    lo_x = std::min(lo_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_x = std::max(hi_x, p.x);
    hi_y = std::max(hi_y, p.y);
  };
  if (layer.scene) {
    for (const auto& pl : layer.scene->polylines) std::for_each(pl.points.begin(), pl.points.end(), grow);
    std::for_each(layer.scene->target_history.begin(), layer.scene->target_history.end(), grow);
    std::for_each(layer.scene->target_future.begin(), layer.scene->target_future.end(), grow);
  }
  if (layer.heatmap) {
    for (const auto& c : layer.heatmap->cells) grow(c.point);
  }
  if (layer.goals) std::for_each(layer.goals->goals.begin(), layer.goals->goals.end(), grow);
  if (!(hi_x >= lo_x)) lo_x = lo_y = -1, hi_x = hi_y = 1;
  const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1.0}) * 1.1;
  const double cx = 0.5 * (lo_x + hi_x), cy = 0.5 * (lo_y + hi_y);
  const double s = size_px / span;
  auto px = [&](const Vector2& p) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f,%.2f", (p.x - cx) * s + 0.5 * size_px, (cy - p.y) * s + 0.5 * size_px);
    return std::string(buf);
  };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size_px << "\" height=\"" << size_px << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  auto polyline = [&](const std::vector<Vector2>& pts, const char* colour, double width) {
    if (pts.empty()) return;
    o << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << width << "\" points=\"";
    for (const auto& p : pts) o << px(p) << " ";
    o << "\"/>\n";
  };
  if (layer.scene) {
    for (const auto& pl : layer.scene->polylines) {
      polyline(pl.points, pl.kind == PolylineKind::kLane ? "#bbbbbb" : "#5577aa", pl.kind == PolylineKind::kLane ? 1.0 : 2.0);
    }
  }
  if (layer.heatmap && !layer.heatmap->empty()) {
    const double peak = layer.heatmap->cells[layer.heatmap->argmax()].mass;
    const double r = std::max(1.0, 0.5 * layer.heatmap->cell_pitch * s);
    for (const auto& c : layer.heatmap->cells) {
      const double a = peak > 0 ? std::clamp(c.mass / peak, 0.0, 1.0) : 0.0;
      if (a < 0.01) continue;
      const auto xy = px(c.point);
      o << "<circle cx=\"" << xy.substr(0, xy.find(',')) << "\" cy=\"" << xy.substr(xy.find(',') + 1) << "\" r=\"" << r
        << "\" fill=\"red\" fill-opacity=\"" << a << "\"/>\n";
    }
  }
  if (layer.scene) {
    polyline(layer.scene->target_history, "black", 2.0);
    polyline(layer.scene->target_future, "green", 2.5);
  }
  if (layer.predictions) {
    for (const auto& t : *layer.predictions) polyline(t, "orange", 1.5);
  }
  if (layer.goals) {
    for (const auto& g : layer.goals->goals) {
      const auto xy = px(g);
      o << "<circle cx=\"" << xy.substr(0, xy.find(',')) << "\" cy=\"" << xy.substr(xy.find(',') + 1)
        << "\" r=\"4\" fill=\"orange\" stroke=\"black\" stroke-width=\"0.5\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace densetnt
