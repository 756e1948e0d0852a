#pragma once

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "densetnt/csv.hpp"
#include "densetnt/model/dense_tnt.hpp"
#include "densetnt/nn/adam.hpp"

namespace densetnt {

struct TrainConfig {
  int epochs = 16;
  int batch_size = 64;
  double lr = 1e-3;
  double lr_decay = 0.3;
  int decay_every = 5;  // epochs
  bool shuffle = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1 || batch_size < 1 || decay_every < 1) {
      throw Error(ErrorCode::kInvalidConfig, "epochs, batch size and decay period must be >= 1");
    }
    if (!(lr > 0) || !(lr_decay > 0)) throw Error(ErrorCode::kInvalidConfig, "learning rate and decay must be positive");
  }

  static TrainConfig stage1_paper() { return {}; }
  static TrainConfig stage2_paper() {
    TrainConfig c;
    c.epochs = 6;
    c.decay_every = 1;
    return c;
  }
};

struct LossRow {
  int epoch = 0;
  long step = 0;
  double lr = 0.0;
  double total = 0.0;
  std::vector<double> terms;
};

struct TrainLog {
  std::vector<std::string> term_names;
  std::vector<LossRow> rows;

  double final_loss() const { return rows.empty() ? 0.0 : rows.back().total; }

  /// Mean batch loss per epoch.
  std::vector<double> epoch_means() const {
    std::vector<double> out;
    std::vector<int> counts;
    for (const auto& r : rows) {
      if (r.epoch >= static_cast<int>(out.size())) {
        out.resize(r.epoch + 1, 0.0);
        counts.resize(r.epoch + 1, 0);
      }
      out[r.epoch] += r.total;
      ++counts[r.epoch];
    }
    for (std::size_t e = 0; e < out.size(); ++e) out[e] /= std::max(1, counts[e]);
    return out;
  }
};

inline void write_loss_csv(std::ostream& out, const TrainLog& log, std::uint64_t seed) {
  std::vector<std::string> header{"epoch", "step", "lr", "total"};
  header.insert(header.end(), log.term_names.begin(), log.term_names.end());
  CsvWriter w(out, seed, header);
  for (const auto& r : log.rows) {
    std::vector<double> v{static_cast<double>(r.epoch), static_cast<double>(r.step), r.lr, r.total};
    v.insert(v.end(), r.terms.begin(), r.terms.end());
    w.row(v);
  }
}

namespace detail {

inline std::vector<std::size_t> epoch_order(std::size_t n, const TrainConfig& cfg, int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (!cfg.shuffle) return order;
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

inline std::vector<nn::Parameter*> params_without_prefix(nn::ParamStore& store, std::string_view prefix) {
  std::vector<nn::Parameter*> out;
  for (auto* p : store.all()) {
    if (std::string_view(p->name).substr(0, prefix.size()) != prefix) out.push_back(p);
  }
  return out;
}

/// Per-sample loss: returns the scalar total and fills per-term values.
using SampleLoss = std::function<Var(Graph& g, std::size_t sample, std::vector<double>& terms)>;

/// Mini-batch loop: batch loss is the mean over samples, one update per
/// batch, step-wise learning-rate decay per `decay_every` epochs.
inline TrainLog run_training(nn::ParamStore& store, const std::vector<nn::Parameter*>& trained, std::size_t n,
                             const std::vector<std::string>& term_names, const TrainConfig& cfg, const SampleLoss& loss) {
  cfg.validate();
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "training set is empty");
  nn::Adam adam({cfg.lr});
  TrainLog log;
  log.term_names = term_names;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.set_lr(cfg.lr * std::pow(cfg.lr_decay, epoch / cfg.decay_every));
    const auto order = epoch_order(n, cfg, epoch);
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(end - begin);
      store.zero_grad();
      LossRow row{epoch, step, adam.lr(), 0.0, std::vector<double>(term_names.size(), 0.0)};
      for (std::size_t i = begin; i < end; ++i) {
        nn::Tape tape;
        Graph g(tape, store);
        std::vector<double> terms(term_names.size(), 0.0);
        const Var l = loss(g, order[i], terms);
        const double v = l.scalar();
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::kDivergence, "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                                  std::to_string(step) + ", sample " + std::to_string(order[i]));
        }
        tape.backward(nn::scale(l, inv));
        row.total += v * inv;
        for (std::size_t t = 0; t < terms.size(); ++t) row.terms[t] += terms[t] * inv;
      }
      adam.step(trained);
      log.rows.push_back(std::move(row));
      ++step;
    }
  }
  return log;
}

}  // namespace detail

/// Stage 1: lane, goal and completion losses on every non-predictor
/// parameter.
inline TrainLog train_stage1(DenseTnt& model, const std::vector<SceneSample>& samples, const TrainConfig& cfg) {
  auto trained = detail::params_without_prefix(model.store(), "pred.");
  auto log = detail::run_training(model.store(), trained, samples.size(), {"lane", "goal", "completion"}, cfg,
                                  [&](Graph& g, std::size_t i, std::vector<double>& terms) {
                                    const auto l = stage1_loss(model, g, samples[i]);
                                    terms = {l.lane.scalar(), l.goal.scalar(), l.completion.scalar()};
                                    return l.total;
                                  });
  model.set_stage(std::max(model.stage(), 1));
  return log;
}

/// Frozen stage-1 heatmap of a sample over all of its candidates.
inline Heatmap stage1_heatmap(const DenseTnt& model, const SceneSample& s) {
  nn::Tape tape;
  Graph g = nn::inference_graph(tape, model.store());
  const Var l = model.encode(g, s);
  return model.heatmap(g, l, s.candidates);
}

/// Stage 2: predictor-only training against refined pseudo-labels of the
/// best head. Heatmaps come from the frozen stage-1 modules.
inline TrainLog train_stage2(DenseTnt& model, const std::vector<SceneSample>& samples, const TrainConfig& cfg,
                             const Stage2Config& s2 = {}) {
  if (model.stage() < 1) throw Error(ErrorCode::kMissingCheckpoint, "stage 2 needs a trained stage-1 model");
  std::vector<Heatmap> raw;
  std::vector<Heatmap> prepared;
  for (const auto& s : samples) {
    raw.push_back(stage1_heatmap(model, s));
    prepared.push_back(prepare_heatmap(raw.back(), s2.heatmap_prep));
  }
  auto trained = model.store().with_prefix("pred.");
  long calls = 0;
  auto log = detail::run_training(model.store(), trained, samples.size(), {"set", "head"}, cfg,
                                  [&](Graph& g, std::size_t i, std::vector<double>& terms) {
                                    const auto seed = derive_seed(cfg.seed ^ 0x5eedULL, static_cast<std::uint64_t>(calls++));
                                    const auto l = stage2_loss(model, g, raw[i], prepared[i], s2, seed);
                                    terms = {l.set.scalar(), l.head.scalar()};
                                    return l.total;
                                  });
  model.set_stage(2);
  return log;
}

/// End-to-end K-trajectory regressor trained with the min-over-K loss.
class VarietyModel {
 public:
  explicit VarietyModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    enc_ = ContextEncoder::create(store_, "var.enc", cfg, rng);
    head_ = nn::Mlp2::create(store_, "var.head", cfg.hidden, cfg.hidden, 2 * cfg.k * cfg.horizon, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }

  SceneSample prepare(const Scene& scene) const { return make_sample(scene, cfg_.sampler, cfg_.coord_scale); }

  /// K x 2T trajectories in meters.
  Var forward(Graph& g, const SceneSample& s) const {
    const Var target = nn::slice_rows(enc_(g, s), 0, 1);
    const Var flat = nn::scale(head_(g, target), 1.0 / cfg_.coord_scale);
    const int w = 2 * cfg_.horizon;
    std::vector<Var> rows;
    for (int k = 0; k < cfg_.k; ++k) rows.push_back(nn::slice_cols(flat, k * w, w));
    return nn::concat_rows(rows);
  }

  std::vector<std::vector<Vector2>> predict(const SceneSample& s) const {
    nn::Tape tape;
    Graph g = nn::inference_graph(tape, store_);
    const Matrix m = forward(g, s).value();
    std::vector<std::vector<Vector2>> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(trajectory_points(m, r));
    return out;
  }

  void save(const std::string& path) const {
    nn::save_checkpoint(store_, path, {{"model", "variety"}, {"config", to_json(cfg_)}});
  }

  static VarietyModel load(const std::string& path) {
    const auto manifest = nn::read_manifest(path);
    const auto& meta = manifest.at("metadata");
    if (!meta.contains("model") || meta["model"] != "variety") {
      throw Error(ErrorCode::kMissingCheckpoint, path + " is not a variety-loss checkpoint");
    }
    VarietyModel m(model_config_from_json(meta.at("config")));
    nn::load_checkpoint(m.store_, path);
    return m;
  }

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  ContextEncoder enc_;
  nn::Mlp2 head_;
};

/// Index of the trajectory row closest to the target (summed point
/// distances); lowest index on ties.
inline std::size_t closest_trajectory(const Matrix& trajs, const Matrix& target) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < trajs.rows(); ++r) {
    double d = 0.0;
    for (Eigen::Index j = 0; j + 1 < trajs.cols(); j += 2) {
      d += std::hypot(trajs(r, j) - target(0, j), trajs(r, j + 1) - target(0, j + 1));
    }
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(r);
    }
  }
  return best;
}

/// Smooth-l1 on the closest of the K trajectories only.
inline Var variety_loss(const VarietyModel& m, Graph& g, const SceneSample& s) {
  if (!s.has_future) throw Error(ErrorCode::kEmptyInput, "training needs a ground-truth future");
  if (static_cast<int>(s.future.size()) != m.config().horizon) {
    throw Error(ErrorCode::kLengthMismatch, "future length differs from the model horizon");
  }
  const Var trajs = m.forward(g, s);
  const Matrix target = trajectory_row(s.future);
  const auto k = static_cast<Eigen::Index>(closest_trajectory(trajs.value(), target));
  return nn::smooth_l1(nn::slice_rows(trajs, k, 1), target);
}

inline TrainLog train_variety(VarietyModel& model, const std::vector<SceneSample>& samples, const TrainConfig& cfg) {
  auto trained = model.store().all();
  return detail::run_training(model.store(), trained, samples.size(), {}, cfg,
                              [&](Graph& g, std::size_t i, std::vector<double>&) { return variety_loss(model, g, samples[i]); });
}

}  // namespace densetnt
