#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "densetnt/goal_set_optimizer.hpp"
#include "densetnt/heatmap.hpp"
#include "densetnt/model/sample.hpp"
#include "densetnt/nn/checkpoint.hpp"
#include "densetnt/nn/layers.hpp"
#include "densetnt/nn/losses.hpp"

namespace densetnt {

using nn::Graph;
using nn::Matrix;
using nn::Var;

struct ModelConfig {
  int hidden = 32;
  int key_dim = 0;  // 0: same as hidden
  int k = 6;
  int heads = 12;
  int horizon = 30;
  double coord_scale = 0.1;
  double goal_coord_scale = 0.3;  // goal/candidate coordinate inputs
  double log_prob_scale = 0.1;
  double predictor_truncation = 1e-5;
  bool categorical_goal_loss = false;
  SamplerConfig sampler;
  std::uint64_t seed = 0;

  int attention_dim() const { return key_dim > 0 ? key_dim : hidden; }

  void validate() const {
    if (hidden < 1 || k < 1 || heads < 1 || horizon < 1) {
      throw Error(ErrorCode::kInvalidConfig, "hidden, K, heads and horizon must be >= 1");
    }
    if (!(coord_scale > 0) || !(goal_coord_scale > 0)) {
      throw Error(ErrorCode::kInvalidConfig, "coordinate scales must be positive");
    }
    sampler.validate();
  }

  /// Hidden size 128 as in the published setup.
  static ModelConfig paper() {
    ModelConfig c;
    c.hidden = 128;
    return c;
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"hidden", c.hidden},
          {"key_dim", c.key_dim},
          {"k", c.k},
          {"heads", c.heads},
          {"horizon", c.horizon},
          {"coord_scale", c.coord_scale},
          {"goal_coord_scale", c.goal_coord_scale},
          {"log_prob_scale", c.log_prob_scale},
          {"predictor_truncation", c.predictor_truncation},
          {"categorical_goal_loss", c.categorical_goal_loss},
          {"sampler", {{"radius", c.sampler.radius}, {"density", c.sampler.density}, {"halfwidth", c.sampler.centerline_halfwidth}}},
          {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.hidden = j.at("hidden");
    c.key_dim = j.at("key_dim");
    c.k = j.at("k");
    c.heads = j.at("heads");
    c.horizon = j.at("horizon");
    c.coord_scale = j.at("coord_scale");
    c.goal_coord_scale = j.at("goal_coord_scale");
    c.log_prob_scale = j.at("log_prob_scale");
    c.predictor_truncation = j.at("predictor_truncation");
    c.categorical_goal_loss = j.at("categorical_goal_loss");
    c.sampler.radius = j.at("sampler").at("radius");
    c.sampler.density = j.at("sampler").at("density");
    c.sampler.centerline_halfwidth = j.at("sampler").at("halfwidth");
    c.seed = j.at("seed");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad model config: ") + e.what());
  }
}

/// Per-vector MLP with max-pooling per polyline, then one self-attention
/// layer across polylines.
struct ContextEncoder {
  nn::Mlp2 subgraph;
  nn::Attention global;

  static ContextEncoder create(nn::ParamStore& store, const std::string& name, const ModelConfig& cfg, Rng& rng) {
    return {nn::Mlp2::create(store, name + ".sub", kVectorFeatureWidth, cfg.hidden, cfg.hidden, rng),
            nn::Attention::create(store, name + ".global", cfg.hidden, cfg.attention_dim(), rng)};
  }

  /// Polyline features; row 0 is the target agent.
  Var operator()(Graph& g, const SceneSample& s) const {
    if (s.offsets.size() < 2) throw Error(ErrorCode::kEmptyInput, "cannot encode an empty scene");
    const Var pooled = nn::segment_max(subgraph(g, g.constant(s.vectors)), s.offsets);
    return global(g, pooled, pooled);
  }
};

struct PredictorOutput {
  std::vector<GoalSet> head_goals;  // N goal sets in the heatmap's frame
  std::vector<double> confidences;  // softmax over heads
  Vector2 origin;
  // Graph handles for training.
  std::vector<Var> head_goal_vars;  // 1 x 2K each, meters, (x0, y0, x1, y1, ...)
  Var confidence_var;               // 1 x N

  std::size_t best_head() const {
    return static_cast<std::size_t>(std::max_element(confidences.begin(), confidences.end()) - confidences.begin());
  }
};

inline GoalSet goals_from_row(const Matrix& row) {
  GoalSet ys;
  for (Eigen::Index j = 0; j + 1 < row.cols(); j += 2) ys.goals.push_back({row(0, j), row(0, j + 1)});
  return ys;
}

inline Matrix row_from_goals(const GoalSet& ys) {
  Matrix m(1, static_cast<Eigen::Index>(2 * ys.size()));
  for (std::size_t i = 0; i < ys.size(); ++i) {
    m(0, static_cast<Eigen::Index>(2 * i)) = ys.goals[i].x;
    m(0, static_cast<Eigen::Index>(2 * i + 1)) = ys.goals[i].y;
  }
  return m;
}

class DenseTnt {
 public:
  explicit DenseTnt(const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const int d = cfg.hidden;
    enc_ = ContextEncoder::create(store_, "enc", cfg, rng);
    lane_ = nn::Mlp2::create(store_, "lane.score", 2 * d, d, 1, rng);
    goal_cand_ = nn::Mlp2::create(store_, "goal.cand", 2, d, d, rng);
    goal_attn_ = nn::Attention::create(store_, "goal.attn", d, cfg.attention_dim(), rng);
    goal_score_ = nn::Mlp2::create(store_, "goal.score", 3 * d, d, 1, rng);
    comp_goal_ = nn::Mlp2::create(store_, "comp.goal", 2, d, d, rng);
    comp_attn_ = nn::Attention::create(store_, "comp.attn", d, cfg.attention_dim(), rng);
    comp_dec_ = nn::Mlp2::create(store_, "comp.dec", 3 * d + 2, d, 2 * cfg.horizon, rng);
    pred_cell_ = nn::Mlp2::create(store_, "pred.cell", 3, d, d, rng);
    pred_attn_ = nn::Attention::create(store_, "pred.attn", d, cfg.attention_dim(), rng);
    for (int n = 0; n < cfg.heads; ++n) {
      pred_heads_.push_back(nn::Mlp2::create(store_, "pred.head" + std::to_string(n), d, d, 2 * cfg.k + 1, rng));
    }
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  const std::vector<nn::Mlp2>& heads() const { return pred_heads_; }

  /// Highest training stage completed (0 untrained, 1, 2).
  int stage() const { return stage_; }
  void set_stage(int s) { stage_ = s; }

  SceneSample prepare(const Scene& scene) const { return make_sample(scene, cfg_.sampler, cfg_.coord_scale); }

  Var encode(Graph& g, const SceneSample& s) const { return enc_(g, s); }

  /// Independent per-lane sigmoid scores, 1 x lanes.
  Var lane_scores(Graph& g, const Var& l, const SceneSample& s) const {
    const Var lanes = nn::gather_rows(l, s.lane_rows);
    const Var target = nn::broadcast_rows(nn::slice_rows(l, 0, 1), lanes.rows());
    return nn::transpose(nn::sigmoid(lane_(g, nn::concat_cols({lanes, target}))));
  }

  Matrix candidate_input(std::span<const Vector2> points) const {
    Matrix m(static_cast<Eigen::Index>(points.size()), 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
      m(static_cast<Eigen::Index>(i), 0) = points[i].x * cfg_.goal_coord_scale;
      m(static_cast<Eigen::Index>(i), 1) = points[i].y * cfg_.goal_coord_scale;
    }
    return m;
  }

  /// Goal logits over candidates, 1 x M.
  Var goal_logits(Graph& g, const Var& l, std::span<const Vector2> candidates) const {
    if (candidates.empty()) throw Error(ErrorCode::kEmptyCandidates, "no goal candidates to score");
    const Var f = goal_cand_(g, g.constant(candidate_input(candidates)));
    const Var a = goal_attn_(g, f, l);
    const Var target = nn::broadcast_rows(nn::slice_rows(l, 0, 1), f.rows());
    return nn::transpose(goal_score_(g, nn::concat_cols({f, a, target})));
  }

  /// Trajectories for each goal, G x 2T in meters: t/T along the straight
  /// line to the goal plus a decoded offset.
  Var complete(Graph& g, const Var& l, std::span<const Vector2> goals) const {
    const Matrix gin = candidate_input(goals);
    const Var gv = g.constant(gin);
    const Var f = comp_goal_(g, gv);
    const Var a = comp_attn_(g, f, l);
    const Var target = nn::broadcast_rows(nn::slice_rows(l, 0, 1), f.rows());
    const Var offsets = comp_dec_(g, nn::concat_cols({target, f, a, gv}));
    const int t_len = cfg_.horizon;
    Matrix base(gin.rows(), 2 * t_len);
    for (Eigen::Index r = 0; r < gin.rows(); ++r) {
      for (int t = 1; t <= t_len; ++t) {
        const double frac = static_cast<double>(t) / t_len;
        base(r, 2 * (t - 1)) = frac * goals[r].x;
        base(r, 2 * (t - 1) + 1) = frac * goals[r].y;
      }
    }
    return nn::add(nn::scale(offsets, 1.0 / cfg_.coord_scale), g.constant(std::move(base)));
  }

  /// Predictor input: truncated, renormalized heatmap.
  Heatmap predictor_input(const Heatmap& h) const { return truncate(h, cfg_.predictor_truncation, true); }

  PredictorOutput predict_goal_sets(Graph& g, const Heatmap& h) const {
    const Heatmap in = predictor_input(h);
    const Vector2 origin = in.cells[in.argmax()].point;
    Matrix x(static_cast<Eigen::Index>(in.size()), 3);
    for (std::size_t i = 0; i < in.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      x(r, 0) = (in.cells[i].point.x - origin.x) * cfg_.coord_scale;
      x(r, 1) = (in.cells[i].point.y - origin.y) * cfg_.coord_scale;
      x(r, 2) = std::log(in.cells[i].mass) * cfg_.log_prob_scale;
    }
    const Var cells = pred_cell_(g, g.constant(std::move(x)));
    const Var pooled = nn::max_pool_rows(pred_attn_(g, cells, cells));
    PredictorOutput out;
    out.origin = origin;
    Matrix shift(1, 2 * cfg_.k);
    for (int j = 0; j < cfg_.k; ++j) {
      shift(0, 2 * j) = origin.x;
      shift(0, 2 * j + 1) = origin.y;
    }
    std::vector<Var> logits;
    for (const auto& head : pred_heads_) {
      const Var o = head(g, pooled);
      const Var goals = nn::add(nn::scale(nn::slice_cols(o, 0, 2 * cfg_.k), 1.0 / cfg_.coord_scale), g.constant(shift));
      out.head_goal_vars.push_back(goals);
      out.head_goals.push_back(goals_from_row(goals.value()));
      logits.push_back(nn::slice_cols(o, 2 * cfg_.k, 1));
    }
    out.confidence_var = nn::softmax_rows(nn::concat_cols(logits));
    const Matrix& mu = out.confidence_var.value();
    out.confidences.assign(mu.data(), mu.data() + mu.size());
    return out;
  }

  /// Heatmap over the given candidates (e.g. after lane filtering).
  Heatmap heatmap(Graph& g, const Var& l, const CandidateSet& cands) const {
    const Matrix& logits = goal_logits(g, l, cands.points).value();
    return from_scores(std::span<const double>(logits.data(), static_cast<std::size_t>(logits.size())), cands);
  }

  void save(const std::string& path) const {
    nn::save_checkpoint(store_, path, {{"model", "densetnt"}, {"stage", stage_}, {"config", to_json(cfg_)}});
  }

  static DenseTnt load(const std::string& path) {
    const auto manifest = nn::read_manifest(path);
    const auto& meta = manifest.at("metadata");
    if (!meta.contains("model") || meta["model"] != "densetnt") {
      throw Error(ErrorCode::kMissingCheckpoint, path + " is not a goal-set model checkpoint");
    }
    DenseTnt m(model_config_from_json(meta.at("config")));
    nn::load_checkpoint(m.store_, path);
    m.stage_ = meta.at("stage");
    return m;
  }

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  int stage_ = 0;
  ContextEncoder enc_;
  nn::Mlp2 lane_;
  nn::Mlp2 goal_cand_;
  nn::Attention goal_attn_;
  nn::Mlp2 goal_score_;
  nn::Mlp2 comp_goal_;
  nn::Attention comp_attn_;
  nn::Mlp2 comp_dec_;
  nn::Mlp2 pred_cell_;
  nn::Attention pred_attn_;
  std::vector<nn::Mlp2> pred_heads_;
};

inline Matrix one_hot(Eigen::Index n, Eigen::Index hot) {
  Matrix m = Matrix::Zero(1, n);
  m(0, hot) = 1.0;
  return m;
}

inline Matrix trajectory_row(std::span<const Vector2> traj) {
  Matrix m(1, static_cast<Eigen::Index>(2 * traj.size()));
  for (std::size_t t = 0; t < traj.size(); ++t) {
    m(0, static_cast<Eigen::Index>(2 * t)) = traj[t].x;
    m(0, static_cast<Eigen::Index>(2 * t + 1)) = traj[t].y;
  }
  return m;
}

inline std::vector<Vector2> trajectory_points(const Matrix& m, Eigen::Index row) {
  std::vector<Vector2> out;
  for (Eigen::Index j = 0; j + 1 < m.cols(); j += 2) out.push_back({m(row, j), m(row, j + 1)});
  return out;
}

struct Stage1Losses {
  Var lane;
  Var goal;
  Var completion;
  Var total;
};

/// Lane + goal + completion loss of one scene, completion teacher-forced on
/// the ground-truth goal.
inline Stage1Losses stage1_loss(const DenseTnt& m, Graph& g, const SceneSample& s) {
  if (!s.has_future) throw Error(ErrorCode::kEmptyInput, "training needs a ground-truth future");
  if (static_cast<int>(s.future.size()) != m.config().horizon) {
    throw Error(ErrorCode::kLengthMismatch, "future length differs from the model horizon");
  }
  const Var l = m.encode(g, s);
  Stage1Losses out;
  const Var lanes = m.lane_scores(g, l, s);
  out.lane = nn::bce(lanes, one_hot(lanes.cols(), static_cast<Eigen::Index>(s.lane_label)));
  const Var logits = m.goal_logits(g, l, s.candidates.points);
  const auto label = static_cast<Eigen::Index>(s.goal_label);
  out.goal = m.config().categorical_goal_loss ? nn::cross_entropy(logits, label)
                                              : nn::bce(nn::softmax_rows(logits), one_hot(logits.cols(), label));
  const Vector2 gt_goal[] = {s.goal};
  out.completion = nn::smooth_l1(m.complete(g, l, gt_goal), trajectory_row(s.future));
  out.total = nn::add_scalars({out.lane, out.goal, out.completion});
  return out;
}

/// Stage-2 supervision for one heatmap.
struct Stage2Target {
  std::size_t best_head = 0;
  std::vector<double> head_errors;
  GoalSet pseudo_label;
};

struct Stage2Config {
  Objective objective = Objective::miss_rate();
  OptimConfig heatmap_prep;       // truncation/subdivision of the evaluated heatmap
  PseudoLabelConfig pseudo;       // sigma <= 0: raw heatmap pitch
};

inline Stage2Target stage2_target(const PredictorOutput& p, const Heatmap& raw, const Heatmap& prepared,
                                  const Stage2Config& cfg, std::uint64_t seed) {
  Stage2Target t;
  for (const auto& ys : p.head_goals) t.head_errors.push_back(expected_error(ys, prepared, cfg.objective));
  t.best_head = static_cast<std::size_t>(std::min_element(t.head_errors.begin(), t.head_errors.end()) - t.head_errors.begin());
  PseudoLabelConfig pl = cfg.pseudo;
  if (!(pl.perturb_sigma > 0)) pl.perturb_sigma = raw.cell_pitch;
  t.pseudo_label = refine_pseudo_labels(p.head_goals[t.best_head], prepared, cfg.objective, pl, seed);
  return t;
}

struct Stage2Losses {
  Var set;
  Var head;
  Var total;
  Stage2Target target;
};

inline Stage2Losses stage2_loss(const DenseTnt& m, Graph& g, const Heatmap& raw, const Heatmap& prepared,
                                const Stage2Config& cfg, std::uint64_t seed) {
  const PredictorOutput p = m.predict_goal_sets(g, raw);
  Stage2Losses out;
  out.target = stage2_target(p, raw, prepared, cfg, seed);
  out.set = nn::l1(p.head_goal_vars[out.target.best_head], row_from_goals(out.target.pseudo_label));
  out.head = nn::bce(p.confidence_var, one_hot(m.config().heads, static_cast<Eigen::Index>(out.target.best_head)));
  out.total = nn::add(out.set, out.head);
  return out;
}

/// Keeps candidates whose source lane is among the `top_j` highest-scored
/// lanes (lane order on ties) and whose lane score reaches `min_score`.
/// top_j <= 0 keeps every lane.
inline CandidateSet filter_candidates_by_lanes(const CandidateSet& cands, std::span<const int> lane_ids,
                                               std::span<const double> lane_scores, int top_j, double min_score = 0.0) {
  if (lane_ids.size() != lane_scores.size()) throw Error(ErrorCode::kShapeMismatch, "one score per lane expected");
  std::vector<std::size_t> order(lane_ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lane_scores[a] > lane_scores[b]; });
  const std::size_t keep = top_j <= 0 ? order.size() : std::min(order.size(), static_cast<std::size_t>(top_j));
  std::vector<int> kept;
  for (std::size_t i = 0; i < keep; ++i) {
    if (lane_scores[order[i]] >= min_score) kept.push_back(lane_ids[order[i]]);
  }
  CandidateSet out;
  out.density = cands.density;
  for (std::size_t i = 0; i < cands.points.size(); ++i) {
    if (std::find(kept.begin(), kept.end(), cands.source_lane[i]) != kept.end()) {
      out.points.push_back(cands.points[i]);
      out.source_lane.push_back(cands.source_lane[i]);
    }
  }
  if (out.points.empty()) throw Error(ErrorCode::kEmptyCandidates, "lane filter removed every candidate");
  return out;
}

}  // namespace densetnt
