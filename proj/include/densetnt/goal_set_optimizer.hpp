#pragma once

// Offline goal-set optimization: expected-error objectives over a heatmap,
// stochastic hill climbing with parallel restarts, an exhaustive oracle for
// small instances, and neighbourhood refinement for pseudo-labels.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "densetnt/errors.hpp"
#include "densetnt/geometry.hpp"
#include "densetnt/heatmap.hpp"
#include "densetnt/random.hpp"

namespace densetnt {

struct GoalSet {
  std::vector<Vector2> goals;

  std::size_t size() const { return goals.size(); }
  bool operator==(const GoalSet&) const = default;
};

/// d = w_fde * minFDE + w_mr * [minFDE > mr_threshold].
struct Objective {
  double w_fde = 0.0;
  double w_mr = 1.0;
  double mr_threshold = 2.0;

  static Objective fde() { return {1.0, 0.0, 2.0}; }
  static Objective miss_rate() { return {0.0, 1.0, 2.0}; }
  static Objective blend(double fde_weight) { return {fde_weight, 1.0 - fde_weight, 2.0}; }

  void validate() const {
    if (w_fde < 0 || w_fde > 1 || w_mr < 0 || w_mr > 1 || std::abs(w_fde + w_mr - 1.0) > 1e-9) {
      throw Error(ErrorCode::kInvalidConfig, "objective weights must lie in [0,1] and sum to 1");
    }
    if (!(mr_threshold >= 0)) throw Error(ErrorCode::kInvalidConfig, "miss threshold must be non-negative");
  }
};

inline double min_squared_distance(std::span<const Vector2> goals, const Vector2& target) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& g : goals) best = std::min(best, squared_distance(g, target));
  return best;
}

inline double set_distance(std::span<const Vector2> goals, const Vector2& target, const Objective& obj) {
  const double d = std::sqrt(min_squared_distance(goals, target));
  return obj.w_fde * d + obj.w_mr * (d > obj.mr_threshold ? 1.0 : 0.0);
}

inline double set_distance(const GoalSet& ys, const Vector2& target, const Objective& obj) {
  return set_distance(std::span<const Vector2>(ys.goals), target, obj);
}

/// sum_i h(c_i) * d(goals, c_i) over every cell of h.
inline double expected_error(std::span<const Vector2> goals, const Heatmap& h, const Objective& obj) {
  const double thr2 = obj.mr_threshold * obj.mr_threshold;
  const bool use_fde = obj.w_fde != 0.0;
  const bool use_mr = obj.w_mr != 0.0;
  double fde = 0.0;
  double miss = 0.0;
  for (const auto& c : h.cells) {
    const double d2 = min_squared_distance(goals, c.point);
    if (use_fde) fde += c.mass * std::sqrt(d2);
    // d > thr  <=>  d^2 > thr^2 for non-negative values; exactly thr is a hit.
    if (use_mr && d2 > thr2) miss += c.mass;
  }
  return obj.w_fde * fde + obj.w_mr * miss;
}

inline double expected_error(const GoalSet& ys, const Heatmap& h, const Objective& obj) {
  return expected_error(std::span<const Vector2>(ys.goals), h, obj);
}

struct OptimConfig {
  int k = 6;
  double time_budget_ms = 100.0;
  // When set, each restart runs exactly this many perturbation steps and
  // the wall clock is ignored; results are then fully reproducible.
  std::optional<long> iteration_budget;
  int restarts = 8;
  double perturb_sigma = 0.0;  // <= 0 means: the optimized heatmap's cell pitch
  double resample_prob = 0.05;
  double accept_worse_prob = 0.01;
  double truncation = 1e-3;
  bool subdivide = true;
  bool snap_to_cells = false;
  // Accept a proposal only when it is *worse* (the comparison as printed in
  // the original listing); for comparison runs only.
  bool literal_acceptance = false;
  int threads = 0;  // 0: hardware concurrency
  std::uint64_t seed = 0;

  void validate() const {
    if (k < 1) throw Error(ErrorCode::kInvalidConfig, "goal count K must be >= 1");
    if (restarts < 1) throw Error(ErrorCode::kInvalidConfig, "restarts must be >= 1");
    if (!iteration_budget && !(time_budget_ms > 0)) throw Error(ErrorCode::kInvalidConfig, "time budget must be positive");
    if (iteration_budget && *iteration_budget < 0) throw Error(ErrorCode::kInvalidConfig, "iteration budget must be >= 0");
    if (perturb_sigma < 0) throw Error(ErrorCode::kInvalidConfig, "perturb sigma must be positive");
    if (resample_prob < 0 || resample_prob > 1 || accept_worse_prob < 0 || accept_worse_prob > 1) {
      throw Error(ErrorCode::kInvalidConfig, "probabilities must lie in [0, 1]");
    }
  }
};

struct OptimResult {
  GoalSet goals;
  double expected_error = std::numeric_limits<double>::infinity();
  long iterations = 0;
  int restart = 0;
};

/// Truncation (without renormalization) followed by optional subdivision.
inline Heatmap prepare_heatmap(const Heatmap& h, const OptimConfig& cfg) {
  Heatmap out = cfg.truncation > 0 ? truncate(h, cfg.truncation, false) : h;
  if (out.empty()) throw Error(ErrorCode::kEmptyHeatmap, "heatmap has no cells");
  if (cfg.subdivide) out = subdivide(out);
  return out;
}

namespace detail {

class ClimbState {
 public:
  ClimbState(const Heatmap& h, const Objective& obj, const OptimConfig& cfg, std::uint64_t seed)
      : h_(h), obj_(obj), cfg_(cfg), rng_(seed), sigma_(cfg.perturb_sigma > 0 ? cfg.perturb_sigma : h.cell_pitch) {
    cumulative_.reserve(h.size());
    double acc = 0.0;
    for (const auto& c : h.cells) cumulative_.push_back(acc += c.mass);

    current_.resize(cfg.k);
    std::vector<std::size_t> pool(h.size());
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    for (int j = 0; j < cfg.k; ++j) {
      // distinct cells while they last, then with replacement
      if (!pool.empty()) {
        const std::size_t pick = rng_.index(pool.size());
        current_[j] = h.cells[pool[pick]].point;
        pool[pick] = pool.back();
        pool.pop_back();
      } else {
        current_[j] = h.cells[rng_.index(h.size())].point;
      }
    }
    current_error_ = expected_error(current_, h_, obj_);
    best_ = current_;
    best_error_ = current_error_;
    proposal_.resize(cfg.k);
  }

  void step() {
    for (int j = 0; j < cfg_.k; ++j) {
      const double r = rng_.uniform();
      Vector2 p;
      if (r < cfg_.resample_prob) {
        p = h_.cells[mass_weighted_index()].point;
      } else {
        p = current_[j] + Vector2{rng_.normal(), rng_.normal()} * sigma_;
      }
      if (cfg_.snap_to_cells) p = h_.cells[nearest_candidate(points(), p)].point;
      proposal_[j] = p;
    }
    const double e_new = expected_error(proposal_, h_, obj_);
    const double r = rng_.uniform();
    const bool improve = cfg_.literal_acceptance ? (current_error_ < e_new) : (e_new < current_error_);
    if (improve || r < cfg_.accept_worse_prob) {
      std::swap(current_, proposal_);
      current_error_ = e_new;
      if (current_error_ < best_error_) {
        best_ = current_;
        best_error_ = current_error_;
      }
    }
    ++iterations_;
  }

  OptimResult result(int restart) const { return {GoalSet{best_}, best_error_, iterations_, restart}; }
  double best_error() const { return best_error_; }
  long iterations() const { return iterations_; }

 private:
  std::span<const Vector2> points() {
    if (cell_points_.empty()) cell_points_ = h_.points();
    return cell_points_;
  }

  std::size_t mass_weighted_index() {
    const double total = cumulative_.back();
    if (!(total > 0)) return rng_.index(h_.size());
    const double u = rng_.uniform() * total;
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<std::size_t>(it - cumulative_.begin());
  }

  const Heatmap& h_;
  const Objective& obj_;
  const OptimConfig& cfg_;
  Rng rng_;
  double sigma_;
  std::vector<double> cumulative_;
  std::vector<Vector2> cell_points_;
  std::vector<Vector2> current_;
  std::vector<Vector2> proposal_;
  std::vector<Vector2> best_;
  double current_error_ = 0.0;
  double best_error_ = 0.0;
  long iterations_ = 0;
};

/// Runs fn(r) for r in [0, n) on up to `threads` workers. Each index is
/// handled by exactly one worker and writes only its own output slot.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int r = 0; r < n; ++r) fn(r);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int r = next++; r < n; r = next++) fn(r);
    });
  }
}

inline OptimResult merge_restarts(const std::vector<OptimResult>& results) {
  OptimResult best = results.front();
  long total = 0;
  for (const auto& r : results) {
    total += r.iterations;
    if (r.expected_error < best.expected_error) best = r;
  }
  best.iterations = total;
  return best;
}

}  // namespace detail

inline std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  return derive_seed(seed, static_cast<std::uint64_t>(restart));
}

/// Hill climbing on an already prepared heatmap.
inline OptimResult hill_climb_prepared(const Heatmap& h, const Objective& obj, const OptimConfig& cfg) {
  cfg.validate();
  obj.validate();
  if (h.empty()) throw Error(ErrorCode::kEmptyHeatmap, "cannot optimize over an empty heatmap");
  std::vector<OptimResult> results(cfg.restarts);
  const auto start = std::chrono::steady_clock::now();
  const auto deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double, std::milli>(cfg.time_budget_ms));
  detail::parallel_for(cfg.restarts, cfg.threads, [&](int r) {
    detail::ClimbState state(h, obj, cfg, restart_seed(cfg.seed, r));
    if (cfg.iteration_budget) {
      for (long i = 0; i < *cfg.iteration_budget; ++i) state.step();
    } else {
      while (std::chrono::steady_clock::now() < deadline) state.step();
    }
    results[r] = state.result(r);
  });
  return detail::merge_restarts(results);
}

/// Anytime optimization of goal sets over a heatmap. The heatmap is
/// truncated and subdivided per `cfg` before searching.
inline OptimResult hill_climb(const Heatmap& h, const Objective& obj, const OptimConfig& cfg) {
  return hill_climb_prepared(prepare_heatmap(h, cfg), obj, cfg);
}

/// Best-so-far results after each checkpoint iteration count (ascending).
/// Equal to independent hill_climb_prepared runs with those iteration budgets.
inline std::vector<OptimResult> hill_climb_trace(const Heatmap& h, const Objective& obj, const OptimConfig& cfg,
                                                 std::span<const long> checkpoints) {
  cfg.validate();
  obj.validate();
  if (h.empty()) throw Error(ErrorCode::kEmptyHeatmap, "cannot optimize over an empty heatmap");
  if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) {
    throw Error(ErrorCode::kInvalidConfig, "checkpoints must be ascending");
  }
  std::vector<std::vector<OptimResult>> per_restart(cfg.restarts);
  detail::parallel_for(cfg.restarts, cfg.threads, [&](int r) {
    detail::ClimbState state(h, obj, cfg, restart_seed(cfg.seed, r));
    for (long cp : checkpoints) {
      while (state.iterations() < cp) state.step();
      per_restart[r].push_back(state.result(r));
    }
  });
  std::vector<OptimResult> out;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    std::vector<OptimResult> at;
    for (const auto& pr : per_restart) at.push_back(pr[c]);
    out.push_back(detail::merge_restarts(at));
  }
  return out;
}

inline constexpr double kOracleCombinationLimit = 1e6;

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

/// Exact minimum of expected_error over all K-subsets of the heatmap's cell
/// positions (lexicographically first subset on ties).
inline OptimResult brute_force_oracle(const Heatmap& h, const Objective& obj, int k) {
  obj.validate();
  if (h.empty()) throw Error(ErrorCode::kEmptyHeatmap, "oracle on an empty heatmap");
  if (k < 1 || static_cast<std::size_t>(k) > h.size()) {
    throw Error(ErrorCode::kInvalidConfig, "oracle needs 1 <= K <= cell count");
  }
  if (binomial(h.size(), k) > kOracleCombinationLimit) {
    throw Error(ErrorCode::kCombinationBound, "C(cells, K) exceeds the oracle limit of 1e6");
  }
  const std::size_t n = h.size();
  std::vector<std::size_t> idx(k);
  for (int j = 0; j < k; ++j) idx[j] = j;
  std::vector<Vector2> goals(k);
  OptimResult best;
  while (true) {
    for (int j = 0; j < k; ++j) goals[j] = h.cells[idx[j]].point;
    const double e = expected_error(goals, h, obj);
    ++best.iterations;
    if (e < best.expected_error) {
      best.expected_error = e;
      best.goals.goals = goals;
    }
    int j = k - 1;
    while (j >= 0 && idx[j] == n - k + j) --j;
    if (j < 0) break;
    ++idx[j];
    for (int t = j + 1; t < k; ++t) idx[t] = idx[t - 1] + 1;
  }
  return best;
}

struct PseudoLabelConfig {
  int perturbation_count = 100;  // L
  double perturb_sigma = 0.0;    // <= 0 means: heatmap cell pitch
};

/// Best of `init` and L jittered copies of it. Goal i of the output is the
/// jittered image of goal i of `init`.
inline GoalSet refine_pseudo_labels(const GoalSet& init, const Heatmap& h, const Objective& obj,
                                    const PseudoLabelConfig& cfg, std::uint64_t seed) {
  if (cfg.perturbation_count < 1) throw Error(ErrorCode::kInvalidConfig, "perturbation count L must be >= 1");
  if (init.goals.empty()) throw Error(ErrorCode::kInvalidConfig, "cannot refine an empty goal set");
  const double sigma = cfg.perturb_sigma > 0 ? cfg.perturb_sigma : h.cell_pitch;
  Rng rng(seed);
  GoalSet best = init;
  double best_error = expected_error(init, h, obj);
  GoalSet trial = init;
  for (int l = 0; l < cfg.perturbation_count; ++l) {
    for (std::size_t i = 0; i < init.goals.size(); ++i) {
      trial.goals[i] = init.goals[i] + Vector2{rng.normal(), rng.normal()} * sigma;
    }
    const double e = expected_error(trial, h, obj);
    if (e < best_error) {
      best_error = e;
      best = trial;
    }
  }
  return best;
}

inline void write_goal_set_csv(std::ostream& out, const GoalSet& ys, std::uint64_t seed) {
  CsvWriter w(out, seed, {"x", "y"});
  for (const auto& g : ys.goals) w.row(g.x, g.y);
}

inline GoalSet read_goal_set_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  const std::size_t cx = t.column("x"), cy = t.column("y");
  GoalSet ys;
  for (std::size_t r = 0; r < t.rows.size(); ++r) ys.goals.push_back({t.number(r, cx), t.number(r, cy)});
  return ys;
}

}  // namespace densetnt
