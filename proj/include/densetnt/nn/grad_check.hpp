#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "densetnt/nn/layers.hpp"
#include "densetnt/random.hpp"

namespace densetnt::nn {

enum class GradCheckScale {
  kPerEntry,   // |a - fd| / max(|a|, |fd|, floor) for every scalar
  kPerTensor,  // max |a - fd| over a tensor / max(|a|_inf, |fd|_inf, floor)
};

struct GradCheckConfig {
  double epsilon = 1e-5;
  double floor = 1e-8;
  // Adds |loss| * loss_floor to the floor: central differences cannot resolve
  // gradients much below the loss's rounding noise over epsilon.
  double loss_floor = 0.0;
  GradCheckScale scale = GradCheckScale::kPerTensor;
  // Entries probed per tensor, chosen at random; 0 probes every entry.
  int max_entries = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t probed = 0;
};

using LossFn = std::function<Var(Graph&)>;

inline double evaluate_loss(ParamStore& store, const LossFn& fn) {
  Tape tape;
  Graph g(tape, store);
  return fn(g).scalar();
}

/// Compares reverse-mode gradients of `fn` with central differences for the
/// listed parameters.
inline GradCheckReport grad_check(ParamStore& store, const std::vector<std::size_t>& params, const LossFn& fn,
                                  const GradCheckConfig& cfg = {}) {
  store.zero_grad();
  double loss = 0.0;
  {
    Tape tape;
    Graph g(tape, store);
    const Var l = fn(g);
    loss = l.scalar();
    tape.backward(l);
  }
  const double floor = std::max(cfg.floor, cfg.loss_floor * std::abs(loss));
  Rng rng(cfg.seed);
  GradCheckReport report;
  for (std::size_t idx : params) {
    Parameter& p = store[idx];
    const Eigen::Index n = p.value.size();
    std::vector<Eigen::Index> entries;
    if (cfg.max_entries > 0 && n > cfg.max_entries) {
      for (int i = 0; i < cfg.max_entries; ++i) entries.push_back(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
    } else {
      for (Eigen::Index i = 0; i < n; ++i) entries.push_back(i);
    }
    std::vector<double> analytic, numeric;
    for (Eigen::Index e : entries) {
      double& x = p.value.data()[e];
      const double saved = x;
      x = saved + cfg.epsilon;
      const double up = evaluate_loss(store, fn);
      x = saved - cfg.epsilon;
      const double down = evaluate_loss(store, fn);
      x = saved;
      analytic.push_back(p.grad.data()[e]);
      numeric.push_back((up - down) / (2.0 * cfg.epsilon));
    }
    report.probed += entries.size();
    double rel = 0.0;
    if (cfg.scale == GradCheckScale::kPerEntry) {
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
        rel = std::max(rel, std::abs(analytic[i] - numeric[i]) / denom);
      }
    } else {
      double diff = 0.0, amax = 0.0, nmax = 0.0;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        amax = std::max(amax, std::abs(analytic[i]));
        nmax = std::max(nmax, std::abs(numeric[i]));
      }
      rel = diff / std::max({amax, nmax, floor});
    }
    if (report.worst_parameter.empty() || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_parameter = p.name;
    }
  }
  store.zero_grad();
  return report;
}

inline std::vector<std::size_t> all_indices(const ParamStore& store) {
  std::vector<std::size_t> out(store.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

}  // namespace densetnt::nn
