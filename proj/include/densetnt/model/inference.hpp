#pragma once

#include <string>
#include <vector>

#include "densetnt/model/dense_tnt.hpp"

namespace densetnt {

enum class GoalBackend { kPredictor, kOptimizer };

inline GoalBackend parse_goal_backend(const std::string& s) {
  if (s == "predictor") return GoalBackend::kPredictor;
  if (s == "optimizer") return GoalBackend::kOptimizer;
  throw Error(ErrorCode::kInvalidConfig, "unknown goal backend '" + s + "' (predictor|optimizer)");
}

struct InferConfig {
  GoalBackend backend = GoalBackend::kPredictor;
  int top_j = 0;  // lanes kept by the filter; <= 0 keeps all
  double min_lane_score = 0.0;
  Objective objective = Objective::miss_rate();
  OptimConfig optim;  // optimizer backend; K is taken from the model
};

struct Prediction {
  std::vector<double> lane_scores;
  CandidateSet candidates;  // after lane filtering
  Heatmap heatmap;
  GoalSet goals;
  std::vector<double> head_confidences;  // predictor backend only
  std::size_t head = 0;
  std::vector<std::vector<Vector2>> trajectories;
};

/// encode -> lane filter -> heatmap -> goal set -> completion.
inline Prediction infer(const DenseTnt& model, const SceneSample& s, const InferConfig& cfg) {
  nn::Tape tape;
  Graph g = nn::inference_graph(tape, model.store());
  const Var l = model.encode(g, s);
  Prediction p;
  const Matrix& ls = model.lane_scores(g, l, s).value();
  p.lane_scores.assign(ls.data(), ls.data() + ls.size());
  p.candidates = filter_candidates_by_lanes(s.candidates, s.lane_ids, p.lane_scores, cfg.top_j, cfg.min_lane_score);
  p.heatmap = model.heatmap(g, l, p.candidates);
  if (cfg.backend == GoalBackend::kPredictor) {
    const auto out = model.predict_goal_sets(g, p.heatmap);
    p.head = out.best_head();
    p.goals = out.head_goals[p.head];
    p.head_confidences = out.confidences;
  } else {
    OptimConfig oc = cfg.optim;
    oc.k = model.config().k;
    p.goals = hill_climb(p.heatmap, cfg.objective, oc).goals;
  }
  const Matrix trajs = model.complete(g, l, p.goals.goals).value();
  for (Eigen::Index r = 0; r < trajs.rows(); ++r) p.trajectories.push_back(trajectory_points(trajs, r));
  return p;
}

/// Fraction of samples whose ground-truth nearest candidate survives the
/// lane filter.
inline double goal_recall(const DenseTnt& model, const std::vector<SceneSample>& samples, int top_j,
                          double min_lane_score = 0.0) {
  if (samples.empty()) throw Error(ErrorCode::kEmptyInput, "recall over an empty suite");
  int kept = 0;
  for (const auto& s : samples) {
    nn::Tape tape;
    Graph g = nn::inference_graph(tape, model.store());
    const Matrix& ls = model.lane_scores(g, model.encode(g, s), s).value();
    const std::vector<double> scores(ls.data(), ls.data() + ls.size());
    try {
      const auto f = filter_candidates_by_lanes(s.candidates, s.lane_ids, scores, top_j, min_lane_score);
      const Vector2 target = s.candidates.points[s.goal_label];
      for (const auto& c : f.points) {
        if (c == target) {
          ++kept;
          break;
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyCandidates) throw;
    }
  }
  return static_cast<double>(kept) / static_cast<double>(samples.size());
}

}  // namespace densetnt
