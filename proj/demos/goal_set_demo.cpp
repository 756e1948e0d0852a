// Fork scenes: the scene generator knows the true endpoint mixture, so NMS and
// the goal-set optimizer can be compared on it both by expected error and by
// the miss rate over independently drawn futures.

#include <cstdio>
#include <vector>

#include "densetnt/goal_sampler.hpp"
#include "densetnt/goal_set_optimizer.hpp"
#include "densetnt/heatmap.hpp"
#include "densetnt/scene_gen.hpp"
#include "densetnt/selection.hpp"

using namespace densetnt;

static double sampled_miss_rate(const GoalSet& ys, const std::vector<std::vector<Vector2>>& futures) {
  int miss = 0;
  for (const auto& f : futures) miss += set_distance(ys, f.back(), Objective::miss_rate()) > 0.5;
  return futures.empty() ? 0.0 : static_cast<double>(miss) / futures.size();
}

int main() {
  SceneGenSpec spec;
  spec.family = LaneFamily::kFork;
  spec.lateral_sigma = 1.2;
  spec.extra_futures = 200;

  std::printf("scene  cells  nms_err  opt_err  nms_mr  opt_mr\n");
  double nms_sum = 0, opt_sum = 0;
  const int n = 8;
  for (int i = 0; i < n; ++i) {
    spec.seed = 500 + i;
    const GeneratedScene g = generate_scene_with_prior(spec);
    const CandidateSet cands = sample_candidates(g.scene, SamplerConfig{});
    const Heatmap h = synth_mixture({g.goal_prior, cands.points, cands.density, 0.0, 0});

    const GoalSet nms = nms_select(h, NmsConfig{}).goals;
    OptimConfig oc;
    oc.iteration_budget = 1000;
    oc.threads = 1;
    oc.seed = spec.seed;
    const OptimResult opt = hill_climb(h, Objective::miss_rate(), oc);

    const double nms_mr = sampled_miss_rate(nms, g.extra_futures);
    const double opt_mr = sampled_miss_rate(opt.goals, g.extra_futures);
    nms_sum += nms_mr;
    opt_sum += opt_mr;
    std::printf("%5d  %5zu  %7.4f  %7.4f  %6.3f  %6.3f\n", i, h.size(), expected_error(nms, h, Objective::miss_rate()),
                opt.expected_error, nms_mr, opt_mr);
  }
  std::printf("mean miss rate: nms %.3f  optimizer %.3f\n", nms_sum / n, opt_sum / n);
}
