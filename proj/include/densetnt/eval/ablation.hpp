#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "densetnt/csv.hpp"
#include "densetnt/eval/metrics.hpp"
#include "densetnt/goal_sampler.hpp"
#include "densetnt/goal_set_optimizer.hpp"
#include "densetnt/heatmap.hpp"
#include "densetnt/scene_gen.hpp"

namespace densetnt {

/// Suite used by the optimizer ablations: wider speed changes and lateral
/// drift than the generator defaults, and many future draws per scene so the
/// miss rate is measured on the scene's future distribution.
inline SceneGenSpec ablation_suite_spec() {
  SceneGenSpec s;
  s.accel_max = 2.0;
  s.speed_max = 7.5;
  s.lateral_sigma = 1.2;
  s.extra_futures = 99;
  return s;
}

/// Candidate spacing for the objective sweep, fine enough that the miss
/// indicator is not fitted to cell positions.
inline double objective_ablation_density() { return 0.5; }

inline std::vector<GeneratedScene> generate_suite(const SceneGenSpec& base, std::uint64_t seed, std::size_t count) {
  std::vector<GeneratedScene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_scene_with_prior(suite_spec(base, seed, i)));
  return out;
}

/// The scene's known endpoint mixture projected onto its candidates.
inline Heatmap prior_heatmap(const GeneratedScene& g, const SamplerConfig& sampler, double noise, std::uint64_t seed) {
  const CandidateSet cands = sample_candidates(g.scene, sampler);
  if (cands.empty()) throw Error(ErrorCode::kEmptyCandidates, "scene has no goal candidates");
  return synth_mixture({g.goal_prior, cands.points, sampler.density, noise, seed});
}

/// Straight line from the target's current position (the origin) to the
/// goal, one point per future step.
inline Trajectory straight_completion(const Vector2& goal, int horizon) {
  Trajectory t;
  for (int i = 1; i <= horizon; ++i) t.push_back(goal * (static_cast<double>(i) / horizon));
  return t;
}

struct AblationConfig {
  int k = 6;
  Objective objective = Objective::miss_rate();
  OptimConfig optim = [] {
    OptimConfig c;
    c.iteration_budget = 2000;
    c.perturb_sigma = 1.0 / 6.0;  // same step at every density
    c.threads = 1;
    return c;
  }();
  // optim.truncation is per 1 m x 1 m cell; scaled by the cell area.
  bool area_scaled_truncation = true;
  SamplerConfig sampler;
  double heatmap_noise = 0.0;
  int threads = 0;  // scene-level workers
  std::uint64_t seed = 0;
};

struct SceneOutcome {
  GoalSet goals;
  double expected_error = 0.0;  // on the optimizer's prepared heatmap
  std::vector<double> min_fde;  // per future: the recorded one, then extra draws
  std::vector<double> min_ade;
  std::size_t cells = 0;
};

struct SuiteSummary {
  double expected_error = 0.0;
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;  // over (scene, future) pairs
  double cells = 0.0;
};

inline OptimConfig suite_optim_config(const AblationConfig& cfg) {
  OptimConfig oc = cfg.optim;
  oc.k = cfg.k;
  if (cfg.area_scaled_truncation) oc.truncation *= cfg.sampler.density * cfg.sampler.density;
  return oc;
}

inline SceneOutcome score_goal_set(const GeneratedScene& g, const GoalSet& goals, double expected) {
  SceneOutcome o{goals, expected, {}, {}, 0};
  auto score = [&](const Trajectory& future) {
    std::vector<Trajectory> trajs;
    for (const auto& y : goals.goals) trajs.push_back(straight_completion(y, static_cast<int>(future.size())));
    o.min_fde.push_back(min_fde(trajs, future));
    o.min_ade.push_back(min_ade(trajs, future));
  };
  score(g.scene.target_future);
  for (const auto& f : g.extra_futures) score(f);
  return o;
}

inline SuiteSummary summarize(const std::vector<SceneOutcome>& rows) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyInput, "empty suite");
  SuiteSummary s;
  std::vector<double> fdes;
  double ade = 0.0;
  for (const auto& r : rows) {
    s.expected_error += r.expected_error;
    s.cells += static_cast<double>(r.cells);
    fdes.insert(fdes.end(), r.min_fde.begin(), r.min_fde.end());
    for (double a : r.min_ade) ade += a;
  }
  const double n = static_cast<double>(rows.size());
  s.expected_error /= n;
  s.cells /= n;
  for (double f : fdes) s.min_fde += f;
  s.min_fde /= static_cast<double>(fdes.size());
  s.min_ade = ade / static_cast<double>(fdes.size());
  s.miss_rate = miss_rate(fdes);
  return s;
}

/// Optimizer goal sets on prior heatmaps, one scene per task, results kept
/// in scene order.
inline std::vector<SceneOutcome> optimize_suite(const std::vector<GeneratedScene>& suite, const AblationConfig& cfg,
                                                const Objective& obj) {
  std::vector<SceneOutcome> out(suite.size());
  const OptimConfig oc = suite_optim_config(cfg);
  detail::parallel_for(static_cast<int>(suite.size()), cfg.threads, [&](int i) {
    const Heatmap h = prior_heatmap(suite[i], cfg.sampler, cfg.heatmap_noise, derive_seed(cfg.seed, i));
    OptimConfig local = oc;
    local.seed = derive_seed(oc.seed, i);
    const auto r = hill_climb(h, obj, local);
    out[i] = score_goal_set(suite[i], r.goals, r.expected_error);
    out[i].cells = h.size();
  });
  return out;
}

struct DensityRow {
  double density = 0.0;
  SuiteSummary summary;
};

inline std::vector<DensityRow> ablate_density(const std::vector<GeneratedScene>& suite, const std::vector<double>& densities,
                                              const AblationConfig& cfg) {
  std::vector<DensityRow> rows;
  for (double d : densities) {
    AblationConfig c = cfg;
    c.sampler.density = d;
    c.sampler.validate();
    rows.push_back({d, summarize(optimize_suite(suite, c, cfg.objective))});
  }
  return rows;
}

inline void write_density_csv(std::ostream& out, const std::vector<DensityRow>& rows, std::uint64_t seed) {
  CsvWriter w(out, seed, {"density", "mean_cells", "expected_error", "min_ade", "min_fde", "miss_rate"});
  for (const auto& r : rows) {
    w.row(r.density, r.summary.cells, r.summary.expected_error, r.summary.min_ade, r.summary.min_fde, r.summary.miss_rate);
  }
}

struct TimeRow {
  double budget = 0.0;  // iterations, or milliseconds in wall-clock mode
  SuiteSummary summary;
};

/// Iteration budgets read off one hill-climbing trace per scene, so every
/// row is reproducible and row b+1 continues the search of row b.
inline std::vector<TimeRow> ablate_time_iterations(const std::vector<GeneratedScene>& suite, const std::vector<long>& budgets,
                                                   const AblationConfig& cfg) {
  std::vector<std::vector<SceneOutcome>> per_scene(suite.size());
  const OptimConfig oc = suite_optim_config(cfg);
  detail::parallel_for(static_cast<int>(suite.size()), cfg.threads, [&](int i) {
    const Heatmap h = prior_heatmap(suite[i], cfg.sampler, cfg.heatmap_noise, derive_seed(cfg.seed, i));
    OptimConfig local = oc;
    local.seed = derive_seed(oc.seed, i);
    const Heatmap prepared = prepare_heatmap(h, local);
    for (const auto& r : hill_climb_trace(prepared, cfg.objective, local, budgets)) {
      per_scene[i].push_back(score_goal_set(suite[i], r.goals, r.expected_error));
      per_scene[i].back().cells = h.size();
    }
  });
  std::vector<TimeRow> rows;
  for (std::size_t b = 0; b < budgets.size(); ++b) {
    std::vector<SceneOutcome> at;
    for (const auto& s : per_scene) at.push_back(s[b]);
    rows.push_back({static_cast<double>(budgets[b]), summarize(at)});
  }
  return rows;
}

/// Wall-clock budgets; not reproducible across machines or loads.
inline std::vector<TimeRow> ablate_time_ms(const std::vector<GeneratedScene>& suite, const std::vector<double>& budgets_ms,
                                           const AblationConfig& cfg) {
  std::vector<TimeRow> rows;
  for (double ms : budgets_ms) {
    AblationConfig c = cfg;
    c.optim.iteration_budget.reset();
    c.optim.time_budget_ms = ms;
    rows.push_back({ms, summarize(optimize_suite(suite, c, cfg.objective))});
  }
  return rows;
}

inline void write_time_csv(std::ostream& out, const std::vector<TimeRow>& rows, const std::string& unit, std::uint64_t seed) {
  CsvWriter w(out, seed, {"budget_" + unit, "expected_error", "min_ade", "min_fde", "miss_rate"});
  for (const auto& r : rows) w.row(r.budget, r.summary.expected_error, r.summary.min_ade, r.summary.min_fde, r.summary.miss_rate);
}

/// (minFDE %, MR %) weight pairs.
struct Blend {
  double fde_percent = 0.0;
  double mr_percent = 100.0;

  Objective objective() const {
    if (fde_percent < 0 || mr_percent < 0 || std::abs(fde_percent + mr_percent - 100.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidConfig, "blend weights must be non-negative and sum to 100");
    }
    Objective o{fde_percent / 100.0, mr_percent / 100.0, kMissThreshold};
    o.validate();
    return o;
  }
};

inline std::vector<Blend> default_blends() { return {{0, 100}, {30, 70}, {50, 50}, {70, 30}, {100, 0}}; }

struct ObjectiveRow {
  Blend blend;
  SuiteSummary summary;
};

inline std::vector<ObjectiveRow> ablate_objective(const std::vector<GeneratedScene>& suite, const std::vector<Blend>& blends,
                                                  const AblationConfig& cfg) {
  std::vector<ObjectiveRow> rows;
  for (const auto& b : blends) rows.push_back({b, summarize(optimize_suite(suite, cfg, b.objective()))});
  return rows;
}

inline void write_objective_csv(std::ostream& out, const std::vector<ObjectiveRow>& rows, std::uint64_t seed) {
  CsvWriter w(out, seed, {"fde_percent", "mr_percent", "expected_error", "min_ade", "min_fde", "miss_rate"});
  for (const auto& r : rows) {
    w.row(r.blend.fde_percent, r.blend.mr_percent, r.summary.expected_error, r.summary.min_ade, r.summary.min_fde,
          r.summary.miss_rate);
  }
}

/// values[i+1] <= values[i] + tolerance for every i.
inline bool non_increasing(const std::vector<double>& values, double tolerance = 0.0) {
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[i - 1] + tolerance) return false;
  }
  return true;
}

}  // namespace densetnt
