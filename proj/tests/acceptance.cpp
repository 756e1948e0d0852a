// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit if any fail.
// Usage: densetnt_acceptance <cli-binary> [criterion numbers...]

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "cli_pipeline.hpp"
#include "densetnt/eval/ablation.hpp"
#include "densetnt/eval/figures.hpp"
#include "densetnt/model/inference.hpp"
#include "densetnt/model/training.hpp"
#include "densetnt/nn/grad_check.hpp"
#include "densetnt/nn/losses.hpp"

using namespace densetnt;

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSuiteSeed = 2026;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Heatmap random_cells(Rng& rng, std::size_t n, double spread) {
  Heatmap h;
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    h.cells.push_back({{rng.uniform(-spread, spread), rng.uniform(-spread, spread)}, rng.uniform(0.05, 1.0)});
    z += h.cells.back().mass;
  }
  for (auto& c : h.cells) c.mass /= z;
  return h;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
  return m;
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  int matched = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Heatmap h = random_cells(rng, 3 + rng.index(10), 6.0);
    const int k = 1 + trial % 3;
    OptimConfig cfg;
    cfg.k = k;
    cfg.iteration_budget = 5000;
    cfg.snap_to_cells = true;
    cfg.subdivide = false;
    cfg.truncation = 0.0;
    cfg.seed = derive_seed(7, trial);
    const Objective obj = Objective::blend(rng.uniform());
    const double got = hill_climb(h, obj, cfg).expected_error;
    const double best = brute_force_oracle(h, obj, k).expected_error;
    matched += std::abs(got - best) <= 1e-9;
  }
  const double t = seconds_since(t0);
  return {matched >= 95 && t < 10.0, fmt("%d/100 match the oracle, %.2f s", matched, t)};
}

Outcome anytime_monotonicity() {
  const auto t0 = Clock::now();
  const auto suite = generate_suite(ablation_suite_spec(), kSuiteSeed, 200);
  const auto rows = ablate_time_iterations(suite, {100, 500, 2500, 12500}, AblationConfig{});
  std::vector<double> ee;
  std::string d;
  for (const auto& r : rows) {
    ee.push_back(r.summary.expected_error);
    d += fmt("%g:%.5f ", r.budget, r.summary.expected_error);
  }
  bool largest_first = true;
  for (std::size_t i = 2; i < ee.size(); ++i) largest_first = largest_first && (ee[0] - ee[1]) > (ee[i - 1] - ee[i]);
  const bool pass = non_increasing(ee) && largest_first;
  return {pass, "expected error " + d + fmt("(%.0f s)", seconds_since(t0))};
}

Outcome nms_suboptimality() {
  const auto c = nms_counterexample();
  const Objective mr = Objective::miss_rate();
  OptimConfig oc;
  oc.iteration_budget = 5000;
  oc.threads = 1;
  bool pass = thresholds_cross(c, mr);
  std::string d = pass ? "thresholds cross; " : "thresholds do not cross; ";
  for (const auto* h : {&c.wide, &c.close}) {
    const auto r = compare_nms(*h, c.k, mr, {c.small_threshold, c.large_threshold}, oc);
    pass = pass && r.optimized_error <= r.best_nms_error;
    d += fmt("best NMS %.4f (radius %g) vs hill climb %.4f; ", r.best_nms_error, r.best_threshold, r.optimized_error);
  }
  return {pass, d};
}

Outcome density_trend() {
  const auto t0 = Clock::now();
  const auto suite = generate_suite(ablation_suite_spec(), kSuiteSeed, 100);
  const auto rows = ablate_density(suite, {3.0, 2.0, 1.0, 0.5}, AblationConfig{});
  const double m3 = rows[0].summary.miss_rate, m2 = rows[1].summary.miss_rate, m1 = rows[2].summary.miss_rate,
               m05 = rows[3].summary.miss_rate;
  const double t = seconds_since(t0);
  const bool pass = m3 >= m2 && m2 >= m1 && std::abs(m1 - m05) * 100.0 <= 0.5 && t < 300.0;
  return {pass, fmt("MR 3m %.2f%%, 2m %.2f%%, 1m %.2f%%, 0.5m %.2f%%; %.0f s", 100 * m3, 100 * m2, 100 * m1, 100 * m05, t)};
}

Outcome objective_blends() {
  const auto t0 = Clock::now();
  const auto suite = generate_suite(ablation_suite_spec(), kSuiteSeed, 100);
  AblationConfig cfg;
  cfg.sampler.density = objective_ablation_density();
  const auto rows = ablate_objective(suite, default_blends(), cfg);
  const auto& pure_mr = rows.front().summary;
  const auto& pure_fde = rows.back().summary;
  bool pass = true;
  std::string d;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    // "minimized at" = attains the minimum of the sweep
    pass = pass && pure_fde.min_fde <= rows[i].summary.min_fde && pure_mr.miss_rate <= rows[i].summary.miss_rate;
    d += fmt("(%g,%g) minFDE %.4f MR %.2f%%; ", rows[i].blend.fde_percent, rows[i].blend.mr_percent, rows[i].summary.min_fde,
             100 * rows[i].summary.miss_rate);
  }
  return {pass, d + fmt("%.0f s", seconds_since(t0))};
}

Outcome gradient_correctness() {
  double lin = 0, att = 0, full = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    {
      nn::ParamStore store;
      const nn::Linear l = nn::Linear::create(store, "lin", 5, 4, rng);
      const Matrix x = random_matrix(rng, 6, 5), y = random_matrix(rng, 6, 4);
      lin = std::max(lin, nn::grad_check(store, nn::all_indices(store), [&](Graph& g) {
                            return nn::squared_error(l(g, g.constant(x)), y);
                          }).max_relative_error);
    }
    {
      nn::ParamStore store;
      const nn::Attention a = nn::Attention::create(store, "att", 6, 6, rng);
      const Matrix f = random_matrix(rng, 4, 6), k = random_matrix(rng, 5, 6), y = random_matrix(rng, 4, 6);
      att = std::max(att, nn::grad_check(store, nn::all_indices(store), [&](Graph& g) {
                            return nn::squared_error(a(g, g.constant(f), g.constant(k)), y);
                          }).max_relative_error);
    }
    {
      ModelConfig mc;
      mc.hidden = 8;
      mc.k = 2;
      mc.heads = 3;
      mc.horizon = 30;
      mc.seed = seed;
      DenseTnt m(mc);
      const auto s = m.prepare(generate_scene(suite_spec(SceneGenSpec{}, 77, seed)));
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < m.store().size(); ++i) {
        if (m.store()[i].name.rfind("pred.", 0) != 0) idx.push_back(i);
      }
      nn::GradCheckConfig gc;
      gc.max_entries = 12;
      gc.loss_floor = 1e-7;
      gc.seed = seed;
      full = std::max(full, nn::grad_check(m.store(), idx, [&](Graph& g) { return stage1_loss(m, g, s).total; }, gc)
                                .max_relative_error);
    }
  }
  return {lin < 1e-6 && att < 1e-4 && full < 1e-3,
          fmt("worst relative error: linear %.2e, attention %.2e, stage-1 graph %.2e", lin, att, full)};
}

Outcome overfit_sanity() {
  const auto t0 = Clock::now();
  ModelConfig mc;
  mc.seed = 1;
  DenseTnt m(mc);
  std::vector<SceneSample> data;
  for (std::size_t i = 0; i < 5; ++i) data.push_back(m.prepare(generate_scene(suite_spec(SceneGenSpec{}, 11, i))));
  TrainConfig tc;
  tc.epochs = 500;
  tc.batch_size = 5;
  tc.lr = 1e-3;
  tc.decay_every = 1000;
  train_stage1(m, data, tc);
  int hits = 0;
  double worst_ade = 0.0;
  for (const auto& s : data) {
    hits += stage1_heatmap(m, s).argmax() == s.goal_label;
    nn::Tape tape;
    Graph g = nn::inference_graph(tape, m.store());
    const Vector2 gt[] = {s.goal};
    const auto traj = trajectory_points(m.complete(g, m.encode(g, s), gt).value(), 0);
    worst_ade = std::max(worst_ade, min_ade(std::vector<Trajectory>{traj}, s.future));
  }
  const double t = seconds_since(t0);
  return {hits == 5 && worst_ade < 0.1 && t < 120.0,
          fmt("argmax on ground truth %d/5, worst teacher-forced ADE %.3f m, %.0f s", hits, worst_ade, t)};
}

Outcome online_vs_offline() {
  const auto t0 = Clock::now();
  ModelConfig mc;
  mc.seed = 1;
  DenseTnt m(mc);
  VarietyModel variety(mc);
  std::vector<SceneSample> train, test;
  for (std::size_t i = 0; i < 500; ++i) train.push_back(m.prepare(generate_scene(suite_spec(SceneGenSpec{}, 100, i))));
  for (std::size_t i = 0; i < 100; ++i) test.push_back(m.prepare(generate_scene(suite_spec(SceneGenSpec{}, 200, i))));

  TrainConfig t1;
  t1.epochs = 16;
  t1.batch_size = 16;
  t1.decay_every = 5;
  t1.seed = 3;
  train_stage1(m, train, t1);
  TrainConfig t2 = t1;
  t2.epochs = 24;
  t2.lr = 3e-3;
  t2.decay_every = 8;
  train_stage2(m, train, t2);
  train_variety(variety, train, t1);

  auto mr = [&](auto&& predict) {
    std::vector<double> fdes;
    for (const auto& s : test) fdes.push_back(min_fde(predict(s), s.future));
    return miss_rate(fdes);
  };
  InferConfig ic;
  ic.optim.iteration_budget = 2000;
  ic.optim.threads = 1;
  const double mr_pred = mr([&](const SceneSample& s) { return infer(m, s, ic).trajectories; });
  ic.backend = GoalBackend::kOptimizer;
  const double mr_opt = mr([&](const SceneSample& s) { return infer(m, s, ic).trajectories; });
  const double mr_var = mr([&](const SceneSample& s) { return variety.predict(s); });
  const bool pass = mr_pred <= mr_opt + 0.03 + 1e-12 && mr_pred < mr_var && mr_opt < mr_var;
  return {pass, fmt("MR predictor %.1f%%, optimizer %.1f%%, variety %.1f%%; %.0f s", 100 * mr_pred, 100 * mr_opt, 100 * mr_var,
                    seconds_since(t0))};
}

Outcome conservation() {
  Rng rng(99);
  double subdivide_gap = 0.0, softmax_gap = 0.0, attention_gap = 0.0, head_gap = 0.0;
  bool subdivide_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const Heatmap h = random_cells(rng, 1 + rng.index(80), 20.0);
    const Heatmap s = subdivide(h);
    for (std::size_t i = 0; i < h.size(); ++i) {
      double m = 0.0;
      for (int j = 0; j < 9; ++j) m += s.cells[9 * i + j].mass;
      // nine equal shares summed in double: at most a few ulps from the parent
      const double gap = std::abs(m - h.cells[i].mass);
      subdivide_ok = subdivide_ok && gap <= 8.0 * std::numeric_limits<double>::epsilon() * h.cells[i].mass;
    }
    subdivide_gap = std::max(subdivide_gap, std::abs(s.total_mass() - h.total_mass()));

    const std::size_t n = 1 + rng.index(60);
    std::vector<double> scores, shifted;
    std::vector<Vector2> pts;
    const double k = rng.uniform(-500, 500);
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(rng.normal(0.0, 4.0));
      shifted.push_back(scores.back() + k);
      pts.push_back({static_cast<double>(i), 0.0});
    }
    const Heatmap a = from_scores(scores, pts, 1.0), b = from_scores(shifted, pts, 1.0);
    for (std::size_t i = 0; i < n; ++i) softmax_gap = std::max(softmax_gap, std::abs(a.cells[i].mass - b.cells[i].mass));

    nn::ParamStore store;
    const nn::Attention att = nn::Attention::create(store, "att", 5, 5, rng);
    for (auto idx : {att.wq, att.wk}) store[idx].value *= rng.uniform(0.1, 20.0);
    {
      nn::Tape tape;
      Graph g(tape, store);
      const Matrix w = att.weights(g, g.constant(random_matrix(rng, 1 + rng.index(10), 5, 3.0)),
                                   g.constant(random_matrix(rng, 1 + rng.index(10), 5, 3.0)))
                           .value();
      for (Eigen::Index r = 0; r < w.rows(); ++r) attention_gap = std::max(attention_gap, std::abs(w.row(r).sum() - 1.0));
    }

    ModelConfig mc;
    mc.hidden = 8;
    mc.k = 1 + static_cast<int>(rng.index(6));
    mc.heads = 1 + static_cast<int>(rng.index(12));
    mc.seed = trial;
    DenseTnt model(mc);
    {
      nn::Tape tape;
      Graph g(tape, model.store());
      double sum = 0.0;
      for (double mu : model.predict_goal_sets(g, random_cells(rng, 2 + rng.index(40), 30.0)).confidences) sum += mu;
      head_gap = std::max(head_gap, std::abs(sum - 1.0));
    }
  }
  const bool pass = subdivide_ok && subdivide_gap <= 1e-12 && softmax_gap <= 1e-12 && attention_gap <= 1e-9 && head_gap <= 1e-9;
  return {pass, fmt("subdivide per-cell within 8 ulp: %s (total gap %.1e), softmax shift %.1e, attention rows %.1e, "
                    "head confidences %.1e",
                    subdivide_ok ? "yes" : "no", subdivide_gap, softmax_gap, attention_gap, head_gap)};
}

Outcome cli_determinism(const std::string& cli) {
  namespace fs = std::filesystem;
  const auto t0 = Clock::now();
  const auto a = testing::run_pipeline(cli, fs::temp_directory_path() / "densetnt_accept_a", 31);
  const auto b = testing::run_pipeline(cli, fs::temp_directory_path() / "densetnt_accept_b", 31);
  if (!a.ok || !b.ok) return {false, "pipeline step failed: " + (a.ok ? b.failed_step : a.failed_step)};
  std::size_t same = 0;
  for (const auto& [name, text] : a.csv) same += b.csv.count(name) && b.csv.at(name) == text;
  fs::remove_all(fs::temp_directory_path() / "densetnt_accept_a");
  fs::remove_all(fs::temp_directory_path() / "densetnt_accept_b");
  return {same == a.csv.size() && a.csv.size() == b.csv.size() && !a.csv.empty(),
          fmt("%zu/%zu CSV files byte-identical, %.0f s", same, a.csv.size(), seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: " << argv[0] << " <cli-binary> [criterion...]\n";
    return 2;
  }
  const std::string cli = argv[1];
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"anytime monotonicity", anytime_monotonicity},
      {"NMS suboptimality", nms_suboptimality},
      {"density trend", density_trend},
      {"objective blend ordering", objective_blends},
      {"gradient correctness", gradient_correctness},
      {"overfit sanity", overfit_sanity},
      {"online vs offline", online_vs_offline},
      {"conservation and normalization", conservation},
      {"CLI determinism", [&] { return cli_determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << criteria[i].first << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
