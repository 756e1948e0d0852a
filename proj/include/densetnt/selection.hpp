#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "densetnt/errors.hpp"
#include "densetnt/goal_set_optimizer.hpp"
#include "densetnt/heatmap.hpp"

namespace densetnt {

struct NmsConfig {
  double threshold = 2.0;  // suppression radius, meters
  int k = 6;
};

struct NmsSelection {
  GoalSet goals;
  std::vector<std::size_t> cells;  // source cell per goal
  std::vector<bool> fallback;      // true where a suppressed cell filled the slot
};

namespace detail {

/// Cell indices by descending mass, lowest index first among equals.
inline std::vector<std::size_t> mass_order(const Heatmap& h) {
  std::vector<std::size_t> order(h.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return h.cells[a].mass > h.cells[b].mass; });
  return order;
}

}  // namespace detail

/// Greedy non-maximum suppression. A cell is suppressed when it lies strictly
/// closer than `threshold` to an already selected goal. Slots left after
/// suppression exhausts the heatmap are filled with the highest-mass
/// suppressed cells; heatmaps with fewer than K cells repeat the top cell.
inline NmsSelection nms_select(const Heatmap& h, const NmsConfig& cfg) {
  if (h.empty()) throw Error(ErrorCode::kEmptyHeatmap, "nms_select on an empty heatmap");
  if (cfg.k < 1 || !(cfg.threshold >= 0)) throw Error(ErrorCode::kInvalidConfig, "NMS needs K >= 1 and threshold >= 0");
  const auto order = detail::mass_order(h);
  const double thr2 = cfg.threshold * cfg.threshold;
  NmsSelection out;
  std::vector<bool> taken(h.size(), false);
  for (std::size_t idx : order) {
    if (static_cast<int>(out.cells.size()) == cfg.k) break;
    const Vector2& p = h.cells[idx].point;
    bool suppressed = false;
    for (const auto& g : out.goals.goals) {
      if (squared_distance(p, g) < thr2) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;
    out.goals.goals.push_back(p);
    out.cells.push_back(idx);
    out.fallback.push_back(false);
    taken[idx] = true;
  }
  for (std::size_t idx : order) {
    if (static_cast<int>(out.cells.size()) == cfg.k) break;
    if (taken[idx]) continue;
    out.goals.goals.push_back(h.cells[idx].point);
    out.cells.push_back(idx);
    out.fallback.push_back(true);
    taken[idx] = true;
  }
  while (static_cast<int>(out.cells.size()) < cfg.k) {
    out.goals.goals.push_back(h.cells[order.front()].point);
    out.cells.push_back(order.front());
    out.fallback.push_back(true);
  }
  return out;
}

inline GoalSet top_k_select(const Heatmap& h, int k) {
  if (k < 1) throw Error(ErrorCode::kInvalidConfig, "top-K needs K >= 1");
  if (h.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kEmptyHeatmap, "top-K needs at least K cells");
  }
  const auto order = detail::mass_order(h);
  GoalSet out;
  for (int j = 0; j < k; ++j) out.goals.push_back(h.cells[order[j]].point);
  return out;
}

struct NmsSweepRow {
  double threshold;
  double expected_fde;
  double expected_mr;
};

/// Expected FDE and MR error of NMS selections over a threshold grid.
inline std::vector<NmsSweepRow> nms_sweep(const Heatmap& h, int k, const std::vector<double>& thresholds,
                                          double mr_threshold = 2.0) {
  std::vector<NmsSweepRow> rows;
  for (double t : thresholds) {
    const auto sel = nms_select(h, NmsConfig{t, k});
    rows.push_back({t, expected_error(sel.goals, h, Objective{1.0, 0.0, mr_threshold}),
                    expected_error(sel.goals, h, Objective{0.0, 1.0, mr_threshold})});
  }
  return rows;
}

/// 0, 0.5, ..., 6.0 m.
inline std::vector<double> default_nms_thresholds() {
  std::vector<double> t;
  for (int i = 0; i <= 12; ++i) t.push_back(0.5 * i);
  return t;
}

}  // namespace densetnt
