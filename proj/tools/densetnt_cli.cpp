#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "densetnt/eval/ablation.hpp"
#include "densetnt/eval/figures.hpp"
#include "densetnt/model/inference.hpp"
#include "densetnt/model/training.hpp"
#include "densetnt/scene_io.hpp"
#include "densetnt/selection.hpp"

using namespace densetnt;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return in;
}

void write_text(const std::string& path, const std::string& text) { open_out(path) << text; }

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw Error(ErrorCode::kParse, "bad list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::kParse, "empty list '" + text + "'");
  return out;
}

// "x:y:sigma:weight;..."
std::vector<MixtureComponent> parse_mixture(const std::string& text) {
  std::vector<MixtureComponent> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    double x, y, s, w;
    char c1, c2, c3;
    std::istringstream is(item);
    if (!(is >> x >> c1 >> y >> c2 >> s >> c3 >> w) || c1 != ':' || c2 != ':' || c3 != ':') {
      throw Error(ErrorCode::kParse, "bad mixture component '" + item + "'");
    }
    out.push_back({{x, y}, s, w});
  }
  if (out.empty()) throw Error(ErrorCode::kParse, "empty mixture");
  return out;
}

// gen writes scene_NNNN.json files plus index.csv listing them in order.
std::vector<Scene> load_scene_dir(const std::string& dir) {
  const CsvTable t = read_csv_file((fs::path(dir) / "index.csv").string());
  const std::size_t col = t.column("file");
  std::vector<Scene> out;
  for (const auto& row : t.rows) out.push_back(read_scene_file((fs::path(dir) / row[col]).string()));
  if (out.empty()) throw Error(ErrorCode::kEmptyInput, "no scenes in " + dir);
  return out;
}

template <typename M>
std::vector<SceneSample> prepare_all(const M& model, const std::vector<Scene>& scenes) {
  std::vector<SceneSample> out;
  for (const auto& s : scenes) out.push_back(model.prepare(s));
  return out;
}

struct TrainFlags {
  int epochs = 16;
  int batch = 64;
  double lr = 1e-3;
  double decay = 0.3;
  int decay_every = 5;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "training epochs")->capture_default_str();
    app->add_option("--batch", batch, "batch size")->capture_default_str();
    app->add_option("--lr", lr, "learning rate")->capture_default_str();
    app->add_option("--lr-decay", decay, "learning-rate decay factor")->capture_default_str();
    app->add_option("--decay-every", decay_every, "epochs between decays")->capture_default_str();
  }

  TrainConfig config(std::uint64_t seed) const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch;
    c.lr = lr;
    c.lr_decay = decay;
    c.decay_every = decay_every;
    c.seed = seed;
    c.validate();
    return c;
  }
};

struct ModelFlags {
  int hidden = 32;
  int k = 6;
  int heads = 12;
  bool categorical = false;
  double density = 1.0;

  void add(CLI::App* app) {
    app->add_option("--hidden", hidden, "hidden width")->capture_default_str();
    app->add_option("--k", k, "goals per prediction")->capture_default_str();
    app->add_option("--heads", heads, "goal-set predictor heads")->capture_default_str();
    app->add_flag("--categorical", categorical, "cross-entropy goal loss instead of binary cross-entropy");
    app->add_option("--density", density, "candidate spacing in meters")->capture_default_str();
  }

  ModelConfig config(int horizon, std::uint64_t seed) const {
    ModelConfig c;
    c.hidden = hidden;
    c.k = k;
    c.heads = heads;
    c.categorical_goal_loss = categorical;
    c.sampler.density = density;
    c.horizon = horizon;
    c.seed = seed;
    c.validate();
    return c;
  }
};

struct SuiteFlags {
  std::size_t count = 100;
  int extra_futures = -1;  // < 0: suite default

  void add(CLI::App* app) {
    app->add_option("--count", count, "scenes in the suite")->capture_default_str();
    app->add_option("--extra-futures", extra_futures, "extra future draws per scene (default: suite setting)");
  }

  std::vector<GeneratedScene> build(std::uint64_t seed) const {
    SceneGenSpec spec = ablation_suite_spec();
    if (extra_futures >= 0) spec.extra_futures = extra_futures;
    spec.validate();
    return generate_suite(spec, seed, count);
  }
};

struct OptimFlags {
  long iterations = -1;
  double budget_ms = 100.0;
  int restarts = 8;
  int threads = 0;

  void add(CLI::App* app) {
    app->add_option("--iterations", iterations, "steps per restart (reproducible); overrides --budget-ms");
    app->add_option("--budget-ms", budget_ms, "wall-clock budget per restart")->capture_default_str();
    app->add_option("--restarts", restarts, "parallel restarts")->capture_default_str();
    app->add_option("--threads", threads, "worker threads, 0 = hardware")->capture_default_str();
  }

  void apply(OptimConfig& c) const {
    if (iterations >= 0) c.iteration_budget = iterations;
    c.time_budget_ms = budget_ms;
    c.restarts = restarts;
    c.threads = threads;
  }
};

Heatmap uniform_heatmap(const CandidateSet& c, double pitch) {
  Heatmap h;
  h.cell_pitch = pitch;
  for (const auto& p : c.points) h.cells.push_back({p, 1.0 / static_cast<double>(c.size())});
  return h;
}

// scene,mode,step,x,y
void write_predictions_csv(std::ostream& out, const std::vector<std::vector<Trajectory>>& preds, std::uint64_t seed) {
  CsvWriter w(out, seed, {"scene", "mode", "step", "x", "y"});
  for (std::size_t s = 0; s < preds.size(); ++s) {
    for (std::size_t m = 0; m < preds[s].size(); ++m) {
      for (std::size_t t = 0; t < preds[s][m].size(); ++t) {
        w.row(static_cast<double>(s), static_cast<double>(m), static_cast<double>(t + 1), preds[s][m][t].x,
              preds[s][m][t].y);
      }
    }
  }
}

std::vector<std::vector<Trajectory>> read_predictions_csv(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  const std::size_t cs = t.column("scene"), cm = t.column("mode"), cx = t.column("x"), cy = t.column("y");
  std::map<std::size_t, std::map<std::size_t, Trajectory>> acc;
  for (const auto& r : t.rows) {
    acc[std::stoul(r[cs])][std::stoul(r[cm])].push_back({std::stod(r[cx]), std::stod(r[cy])});
  }
  std::vector<std::vector<Trajectory>> out;
  for (std::size_t s = 0; s < acc.size(); ++s) {
    if (!acc.count(s)) throw Error(ErrorCode::kParse, "prediction file skips scene " + std::to_string(s));
    std::vector<Trajectory> modes;
    for (auto& [m, traj] : acc[s]) modes.push_back(std::move(traj));
    out.push_back(std::move(modes));
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyInput, "prediction file has no rows");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense goal-set trajectory prediction toolkit"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::string render;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "random seed")->capture_default_str();
    sub->add_option("--render", render, "write an SVG figure to this path");
  };
  std::function<void()> run;

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic scenes");
  std::size_t gen_count = 20;
  std::string gen_out, gen_family = "mixed";
  int gen_extra = 0;
  common(gen);
  gen->add_option("--count", gen_count, "number of scenes")->capture_default_str();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--family", gen_family, "straight | arc | fork | mixed")->capture_default_str();
  gen->add_option("--extra-futures", gen_extra, "additional future draws, listed in futures.csv")->capture_default_str();
  gen->callback([&] {
    run = [&] {
      SceneGenSpec base;
      base.family = parse_lane_family(gen_family);
      base.extra_futures = gen_extra;
      base.validate();
      fs::create_directories(gen_out);
      auto index = open_out((fs::path(gen_out) / "index.csv").string());
      CsvWriter w(index, seed, {"scene", "file", "branch", "goal_x", "goal_y"});
      std::ofstream futures;
      std::optional<CsvWriter> fw;
      if (gen_extra > 0) {
        futures = open_out((fs::path(gen_out) / "futures.csv").string());
        fw.emplace(futures, seed, std::vector<std::string>{"scene", "draw", "step", "x", "y"});
      }
      for (std::size_t i = 0; i < gen_count; ++i) {
        const auto g = generate_scene_with_prior(suite_spec(base, seed, i));
        char name[32];
        std::snprintf(name, sizeof name, "scene_%04zu.json", i);
        write_scene_file(g.scene, (fs::path(gen_out) / name).string());
        const Vector2 goal = g.scene.target_future.back();
        w.row(std::to_string(i), std::string(name), std::to_string(g.chosen_branch), goal.x, goal.y);
        for (std::size_t d = 0; fw && d < g.extra_futures.size(); ++d) {
          for (std::size_t t = 0; t < g.extra_futures[d].size(); ++t) {
            fw->row(static_cast<double>(i), static_cast<double>(d), static_cast<double>(t + 1), g.extra_futures[d][t].x,
                    g.extra_futures[d][t].y);
          }
        }
        if (i == 0 && !render.empty()) write_text(render, render_svg({&g.scene, nullptr, nullptr, nullptr}));
      }
    };
  });

  // sample
  auto* sample = app.add_subcommand("sample", "goal candidates of one scene");
  std::string sample_scene, sample_out;
  SamplerConfig sampler;
  common(sample);
  sample->add_option("--scene", sample_scene, "scene JSON")->required();
  sample->add_option("--out", sample_out, "candidate CSV")->required();
  sample->add_option("--density", sampler.density, "grid pitch in meters")->capture_default_str();
  sample->add_option("--radius", sampler.radius, "Manhattan radius")->capture_default_str();
  sample->add_option("--halfwidth", sampler.centerline_halfwidth, "band half-width around centerlines")->capture_default_str();
  sample->callback([&] {
    run = [&] {
      sampler.validate();
      const Scene scene = read_scene_file(sample_scene);
      const CandidateSet c = sample_candidates(scene, sampler);
      auto out = open_out(sample_out);
      write_candidates_csv(out, c, seed);
      if (!render.empty()) {
        const Heatmap h = uniform_heatmap(c, sampler.density);
        write_text(render, render_svg({&scene, &h, nullptr, nullptr}));
      }
    };
  });

  // synth-heatmap
  auto* synth = app.add_subcommand("synth-heatmap", "mixture heatmap over a scene's candidates");
  std::string synth_scene, synth_mixture_text, synth_out;
  std::size_t synth_index = 0;
  double synth_noise = 0.0;
  SamplerConfig synth_sampler;
  common(synth);
  synth->add_option("--scene", synth_scene, "scene JSON (requires --mixture); default: suite scene --index");
  synth->add_option("--mixture", synth_mixture_text, "components x:y:sigma:weight separated by ';'");
  synth->add_option("--index", synth_index, "suite scene index when no --scene is given")->capture_default_str();
  synth->add_option("--noise", synth_noise, "multiplicative jitter in [0, 1)")->capture_default_str();
  synth->add_option("--density", synth_sampler.density, "candidate spacing")->capture_default_str();
  synth->add_option("--out", synth_out, "heatmap CSV")->required();
  synth->callback([&] {
    run = [&] {
      synth_sampler.validate();
      Scene scene;
      std::vector<MixtureComponent> components;
      if (!synth_scene.empty()) {
        if (synth_mixture_text.empty()) throw Error(ErrorCode::kInvalidConfig, "--scene needs --mixture");
        scene = read_scene_file(synth_scene);
        components = parse_mixture(synth_mixture_text);
      } else {
        const auto g = generate_scene_with_prior(suite_spec(ablation_suite_spec(), seed, synth_index));
        scene = g.scene;
        components = synth_mixture_text.empty() ? g.goal_prior : parse_mixture(synth_mixture_text);
      }
      const CandidateSet c = sample_candidates(scene, synth_sampler);
      if (c.empty()) throw Error(ErrorCode::kEmptyCandidates, "scene has no goal candidates");
      const Heatmap h = synth_mixture({components, c.points, synth_sampler.density, synth_noise, seed});
      auto out = open_out(synth_out);
      write_heatmap_csv(out, h, seed);
      if (!render.empty()) write_text(render, render_svg({&scene, &h, nullptr, nullptr}));
    };
  });

  // optimize
  auto* optimize = app.add_subcommand("optimize", "goal set minimizing expected error on a heatmap");
  std::string opt_in, opt_out;
  int opt_k = 6;
  double opt_wfde = 0.0;
  bool opt_snap = false;
  OptimFlags opt_flags;
  common(optimize);
  optimize->add_option("--heatmap", opt_in, "heatmap CSV")->required();
  optimize->add_option("--out", opt_out, "goal-set CSV")->required();
  optimize->add_option("--k", opt_k, "goal count")->capture_default_str();
  optimize->add_option("--w-fde", opt_wfde, "FDE weight; the MR weight is 1 - w")->capture_default_str();
  optimize->add_flag("--snap", opt_snap, "restrict goals to heatmap cells, no subdivision");
  opt_flags.add(optimize);
  optimize->callback([&] {
    run = [&] {
      const Heatmap h = read_heatmap_file(opt_in);
      OptimConfig c;
      c.k = opt_k;
      c.seed = seed;
      c.snap_to_cells = opt_snap;
      c.subdivide = !opt_snap;
      opt_flags.apply(c);
      const Objective obj = Objective::blend(opt_wfde);
      obj.validate();
      const auto r = hill_climb(h, obj, c);
      auto out = open_out(opt_out);
      write_goal_set_csv(out, r.goals, seed);
      if (!render.empty()) write_text(render, render_svg({nullptr, &h, &r.goals, nullptr}));
    };
  });

  // nms
  auto* nms = app.add_subcommand("nms", "NMS threshold sweep on a heatmap");
  std::string nms_in, nms_out, nms_thresholds;
  int nms_k = 6;
  common(nms);
  nms->add_option("--heatmap", nms_in, "heatmap CSV")->required();
  nms->add_option("--out", nms_out, "sweep CSV")->required();
  nms->add_option("--k", nms_k, "goal count")->capture_default_str();
  nms->add_option("--thresholds", nms_thresholds, "comma-separated radii (default 0, 0.5, ..., 6)");
  nms->callback([&] {
    run = [&] {
      const Heatmap h = read_heatmap_file(nms_in);
      const auto t = nms_thresholds.empty() ? default_nms_thresholds() : parse_list<double>(nms_thresholds);
      auto out = open_out(nms_out);
      CsvWriter w(out, seed, {"threshold", "expected_fde", "expected_mr"});
      for (const auto& r : nms_sweep(h, nms_k, t)) w.row(r.threshold, r.expected_fde, r.expected_mr);
      if (!render.empty()) {
        const GoalSet best = nms_select(h, {t.front(), nms_k}).goals;
        write_text(render, render_svg({nullptr, &h, &best, nullptr}));
      }
    };
  });

  // train-stage1
  auto* stage1 = app.add_subcommand("train-stage1", "train encoder, scorers and completion");
  std::string s1_data, s1_out, s1_log;
  ModelFlags s1_model;
  TrainFlags s1_train;
  common(stage1);
  stage1->add_option("--data", s1_data, "scene directory from gen")->required();
  stage1->add_option("--out", s1_out, "checkpoint path")->required();
  stage1->add_option("--log", s1_log, "per-step loss CSV");
  s1_model.add(stage1);
  s1_train.add(stage1);
  stage1->callback([&] {
    run = [&] {
      const auto scenes = load_scene_dir(s1_data);
      DenseTnt m(s1_model.config(static_cast<int>(scenes.front().target_future.size()), seed));
      const auto log = train_stage1(m, prepare_all(m, scenes), s1_train.config(seed));
      m.save(s1_out);
      if (!s1_log.empty()) {
        auto out = open_out(s1_log);
        write_loss_csv(out, log, seed);
      }
    };
  });

  // train-stage2
  auto* stage2 = app.add_subcommand("train-stage2", "train the goal-set predictor on a stage-1 checkpoint");
  std::string s2_data, s2_model, s2_out, s2_log;
  TrainFlags s2_train;
  s2_train.epochs = 6;
  s2_train.decay_every = 1;
  common(stage2);
  stage2->add_option("--data", s2_data, "scene directory from gen")->required();
  stage2->add_option("--model", s2_model, "stage-1 checkpoint")->required();
  stage2->add_option("--out", s2_out, "checkpoint path")->required();
  stage2->add_option("--log", s2_log, "per-step loss CSV");
  s2_train.add(stage2);
  stage2->callback([&] {
    run = [&] {
      DenseTnt m = DenseTnt::load(s2_model);
      const auto log = train_stage2(m, prepare_all(m, load_scene_dir(s2_data)), s2_train.config(seed));
      m.save(s2_out);
      if (!s2_log.empty()) {
        auto out = open_out(s2_log);
        write_loss_csv(out, log, seed);
      }
    };
  });

  // train-variety
  auto* variety = app.add_subcommand("train-variety", "train the variety-loss baseline");
  std::string v_data, v_out, v_log;
  ModelFlags v_model;
  TrainFlags v_train;
  common(variety);
  variety->add_option("--data", v_data, "scene directory from gen")->required();
  variety->add_option("--out", v_out, "checkpoint path")->required();
  variety->add_option("--log", v_log, "per-step loss CSV");
  v_model.add(variety);
  v_train.add(variety);
  variety->callback([&] {
    run = [&] {
      const auto scenes = load_scene_dir(v_data);
      VarietyModel m(v_model.config(static_cast<int>(scenes.front().target_future.size()), seed));
      const auto log = train_variety(m, prepare_all(m, scenes), v_train.config(seed));
      m.save(v_out);
      if (!v_log.empty()) {
        auto out = open_out(v_log);
        write_loss_csv(out, log, seed);
      }
    };
  });

  // infer
  auto* inf = app.add_subcommand("infer", "predict trajectories for a scene directory");
  std::string inf_data, inf_model, inf_out, inf_backend = "predictor";
  int inf_top_j = 0;
  bool inf_variety = false;
  OptimFlags inf_optim;
  inf_optim.iterations = 1000;
  inf_optim.threads = 1;
  common(inf);
  inf->add_option("--data", inf_data, "scene directory from gen")->required();
  inf->add_option("--model", inf_model, "checkpoint")->required();
  inf->add_option("--out", inf_out, "prediction CSV (scene,mode,step,x,y)")->required();
  inf->add_option("--backend", inf_backend, "predictor | optimizer")->capture_default_str();
  inf->add_option("--top-lanes", inf_top_j, "keep candidates of the best lanes only, 0 = all")->capture_default_str();
  inf->add_flag("--variety", inf_variety, "the checkpoint is a variety-loss baseline");
  inf_optim.add(inf);
  inf->callback([&] {
    run = [&] {
      const auto scenes = load_scene_dir(inf_data);
      std::vector<std::vector<Trajectory>> preds;
      if (inf_variety) {
        const VarietyModel m = VarietyModel::load(inf_model);
        for (const auto& s : scenes) preds.push_back(m.predict(m.prepare(s)));
      } else {
        const DenseTnt m = DenseTnt::load(inf_model);
        InferConfig ic;
        ic.backend = parse_goal_backend(inf_backend);
        ic.top_j = inf_top_j;
        inf_optim.apply(ic.optim);
        for (std::size_t i = 0; i < scenes.size(); ++i) {
          ic.optim.seed = derive_seed(seed, i);
          const auto p = infer(m, m.prepare(scenes[i]), ic);
          preds.push_back(p.trajectories);
          if (i == 0 && !render.empty()) write_text(render, render_svg({&scenes[i], &p.heatmap, &p.goals, &p.trajectories}));
        }
      }
      auto out = open_out(inf_out);
      write_predictions_csv(out, preds, seed);
    };
  });

  // eval
  auto* ev = app.add_subcommand("eval", "minADE / minFDE / MR of predictions");
  std::string ev_data, ev_pred, ev_out;
  common(ev);
  ev->add_option("--data", ev_data, "scene directory from gen")->required();
  ev->add_option("--predictions", ev_pred, "prediction CSV from infer")->required();
  ev->add_option("--out", ev_out, "metrics CSV")->required();
  ev->callback([&] {
    run = [&] {
      const auto scenes = load_scene_dir(ev_data);
      std::vector<Trajectory> gts;
      for (const auto& s : scenes) gts.push_back(s.target_future);
      const auto report = evaluate(read_predictions_csv(ev_pred), gts);
      auto out = open_out(ev_out);
      write_metrics_csv(out, report, seed);
      std::cout << "minADE " << report.min_ade << " minFDE " << report.min_fde << " MR " << report.miss_rate << "\n";
    };
  });

  // ablations
  SuiteFlags suite_flags;
  OptimFlags abl_optim;
  abl_optim.iterations = 2000;
  abl_optim.threads = 1;
  int abl_k = 6, abl_workers = 0;
  std::string abl_out;
  auto ablation_common = [&](CLI::App* sub) {
    common(sub);
    suite_flags.add(sub);
    abl_optim.add(sub);
    sub->add_option("--k", abl_k, "goal count")->capture_default_str();
    sub->add_option("--workers", abl_workers, "scene-level workers, 0 = hardware")->capture_default_str();
    sub->add_option("--out", abl_out, "result CSV")->required();
  };
  auto ablation_config = [&] {
    AblationConfig c;
    c.k = abl_k;
    c.threads = abl_workers;
    c.seed = seed;
    abl_optim.apply(c.optim);
    return c;
  };

  auto* adens = app.add_subcommand("ablate-density", "miss rate against candidate density");
  std::string dens_list = "3,2,1,0.5";
  ablation_common(adens);
  adens->add_option("--densities", dens_list, "comma-separated spacings in meters")->capture_default_str();
  adens->callback([&] {
    run = [&] {
      const auto rows = ablate_density(suite_flags.build(seed), parse_list<double>(dens_list), ablation_config());
      auto out = open_out(abl_out);
      write_density_csv(out, rows, seed);
    };
  });

  auto* atime = app.add_subcommand("ablate-time", "miss rate against optimization budget");
  std::string time_list = "100,500,2500,12500";
  bool time_ms = false;
  ablation_common(atime);
  atime->add_option("--budgets", time_list, "comma-separated budgets")->capture_default_str();
  atime->add_flag("--ms", time_ms, "budgets are wall-clock milliseconds (not reproducible)");
  atime->callback([&] {
    run = [&] {
      const auto suite = suite_flags.build(seed);
      const auto cfg = ablation_config();
      auto out = open_out(abl_out);
      if (time_ms) {
        write_time_csv(out, ablate_time_ms(suite, parse_list<double>(time_list), cfg), "ms", seed);
      } else {
        write_time_csv(out, ablate_time_iterations(suite, parse_list<long>(time_list), cfg), "iterations", seed);
      }
    };
  });

  auto* aobj = app.add_subcommand("ablate-objective", "metrics against objective blend");
  std::string blend_list;
  double obj_density = 0.0;
  ablation_common(aobj);
  aobj->add_option("--fde-percents", blend_list, "comma-separated FDE weights in percent (default 0,30,50,70,100)");
  aobj->add_option("--density", obj_density, "candidate spacing (default: suite setting)");
  aobj->callback([&] {
    run = [&] {
      std::vector<Blend> blends = default_blends();
      if (!blend_list.empty()) {
        blends.clear();
        for (double f : parse_list<double>(blend_list)) blends.push_back({f, 100.0 - f});
      }
      AblationConfig cfg = ablation_config();
      cfg.sampler.density = obj_density > 0 ? obj_density : objective_ablation_density();
      auto out = open_out(abl_out);
      write_objective_csv(out, ablate_objective(suite_flags.build(seed), blends, cfg), seed);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n";
    CLI::App* active = &app;
    for (auto* sub : app.get_subcommands()) active = sub;
    std::cerr << active->help();
    return 2;
  }
  try {
    if (run) run();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
