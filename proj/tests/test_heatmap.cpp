#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "densetnt/heatmap.hpp"

using namespace densetnt;

namespace {

std::vector<Vector2> grid(int n) {
  std::vector<Vector2> pts;
  for (int x = -n; x <= n; ++x) {
    for (int y = -n; y <= n; ++y) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
  }
  return pts;
}

Heatmap random_heatmap(Rng& rng, std::size_t cells) {
  std::vector<double> scores;
  std::vector<Vector2> pts;
  for (std::size_t i = 0; i < cells; ++i) {
    scores.push_back(rng.normal(0.0, 2.0));
    pts.push_back({static_cast<double>(i), rng.uniform(-3, 3)});
  }
  return from_scores(scores, pts, 1.0);
}

}  // namespace

TEST(FromScores, EqualScoresAreUniform) {
  const std::vector<double> scores(7, 0.3);
  const auto pts = grid(1);
  const Heatmap h = from_scores(scores, std::span(pts).first(7), 1.0);
  for (const auto& c : h.cells) EXPECT_NEAR(c.mass, 1.0 / 7, 1e-15);
}

TEST(FromScores, LogThreeGivesQuarterAndThreeQuarters) {
  const std::vector<double> scores{0.0, std::log(3.0)};
  const std::vector<Vector2> pts{{0, 0}, {1, 0}};
  const Heatmap h = from_scores(scores, pts, 1.0);
  EXPECT_NEAR(h.cells[0].mass, 0.25, 1e-15);
  EXPECT_NEAR(h.cells[1].mass, 0.75, 1e-15);
}

TEST(FromScores, ShiftInvarianceProperty) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(50);
    std::vector<double> scores, shifted;
    std::vector<Vector2> pts;
    const double k = rng.uniform(-500, 500);
    for (std::size_t i = 0; i < n; ++i) {
      scores.push_back(rng.normal(0.0, 3.0));
      shifted.push_back(scores.back() + k);
      pts.push_back({static_cast<double>(i), 0.0});
    }
    const Heatmap a = from_scores(scores, pts, 1.0);
    const Heatmap b = from_scores(shifted, pts, 1.0);
    EXPECT_EQ(a.argmax(), b.argmax());
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(a.cells[i].mass, b.cells[i].mass, 1e-12);
    EXPECT_NEAR(a.total_mass(), 1.0, 1e-9);
  }
}

TEST(FromScores, NonFiniteScoreIsAnError) {
  const std::vector<double> scores{0.0, NAN};
  const std::vector<Vector2> pts{{0, 0}, {1, 0}};
  try {
    from_scores(scores, pts, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteValue);
  }
}

TEST(Truncate, PointMassSurvivesAnyThreshold) {
  Heatmap h;
  h.cells = {{{0, 0}, 1.0}, {{1, 0}, 0.0}, {{2, 0}, 0.0}};
  for (double t : {1e-5, 1e-3, 0.5, 1.0}) {
    const Heatmap out = truncate(h, t);
    ASSERT_EQ(out.size(), 1u);
    EXPECT_EQ(out.cells[0].mass, 1.0);
  }
}

TEST(Truncate, UniformBelowThresholdEmpties) {
  Heatmap h;
  for (int i = 0; i < 10000; ++i) h.cells.push_back({{static_cast<double>(i), 0.0}, 1e-4});
  try {
    truncate(h, 1e-3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyHeatmap);
  }
}

TEST(Truncate, RetainedMassIsTheSurvivorSum) {
  Rng rng(2);
  const Heatmap h = random_heatmap(rng, 40);
  const Heatmap out = truncate(h, 0.02);
  double direct = 0.0;
  for (const auto& c : h.cells) {
    if (c.mass >= 0.02) direct += c.mass;
  }
  EXPECT_NEAR(out.total_mass(), direct, 1e-15);
  EXPECT_LT(out.total_mass(), 1.0);
  EXPECT_NEAR(truncate(h, 0.02, true).total_mass(), 1.0, 1e-12);
}

TEST(Subdivide, SingleCellSplitsIntoNinths) {
  Heatmap h;
  h.cells = {{{0, 0}, 1.0}};
  const Heatmap s = subdivide(h);
  ASSERT_EQ(s.size(), 9u);
  EXPECT_NEAR(s.cell_pitch, 1.0 / 3, 1e-15);
  std::set<std::pair<long, long>> offsets;
  for (const auto& c : s.cells) {
    EXPECT_NEAR(c.mass, 1.0 / 9, 1e-15);
    offsets.insert({std::lround(c.point.x * 3), std::lround(c.point.y * 3)});
    EXPECT_NEAR(std::abs(c.point.x) * 3, std::round(std::abs(c.point.x) * 3), 1e-12);
  }
  EXPECT_EQ(offsets.size(), 9u);
  for (long dx = -1; dx <= 1; ++dx) {
    for (long dy = -1; dy <= 1; ++dy) EXPECT_TRUE(offsets.count({dx, dy}));
  }
}

TEST(Subdivide, TwiceGives81CellsPerOriginal) {
  Heatmap h;
  h.cells = {{{0, 0}, 0.5}, {{5, 0}, 0.5}};
  const Heatmap s = subdivide(subdivide(h));
  EXPECT_EQ(s.size(), 162u);
  EXPECT_NEAR(s.cell_pitch, 1.0 / 9, 1e-15);
}

TEST(Subdivide, ConservesMassProperty) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Heatmap h = random_heatmap(rng, 1 + rng.index(60));
    const Heatmap s = subdivide(h);
    EXPECT_NEAR(s.total_mass(), h.total_mass(), 1e-12);
    // Each cell's ninths add back to its mass.
    for (std::size_t i = 0; i < h.size(); ++i) {
      double m = 0.0;
      for (int j = 0; j < 9; ++j) m += s.cells[9 * i + j].mass;
      EXPECT_NEAR(m, h.cells[i].mass, 1e-15);
    }
  }
}

TEST(Subdivide, CommutesWithZeroTruncation) {
  Rng rng(6);
  const Heatmap h = random_heatmap(rng, 20);
  const Heatmap a = subdivide(truncate(h, 0.0));
  const Heatmap b = truncate(subdivide(h), 0.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.cells[i].point, b.cells[i].point);
    EXPECT_EQ(a.cells[i].mass, b.cells[i].mass);
  }
}

TEST(SynthMixture, TinySigmaIsNearPointMass) {
  MixtureSpec spec;
  spec.points = grid(3);
  spec.components = {{{1, 2}, 0.05, 1.0}};
  const Heatmap h = synth_mixture(spec);
  EXPECT_EQ(h.cells[h.argmax()].point, (Vector2{1, 2}));
  EXPECT_GT(h.cells[h.argmax()].mass, 1.0 - 1e-12);
}

TEST(SynthMixture, SymmetricComponentsGiveMirroredMasses) {
  MixtureSpec spec;
  spec.points = grid(4);
  spec.components = {{{-2, 0}, 1.5, 0.5}, {{2, 0}, 1.5, 0.5}};
  const Heatmap h = synth_mixture(spec);
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Vector2 p = h.cells[i].point;
    for (const auto& c : h.cells) {
      if (c.point == Vector2{-p.x, p.y}) EXPECT_NEAR(c.mass, h.cells[i].mass, 1e-15);
    }
  }
}

TEST(SynthMixture, MatchesDirectDensityEvaluation) {
  MixtureSpec spec;
  spec.points = grid(5);
  spec.components = {{{-1, 3}, 2.0, 0.3}, {{4, -2}, 0.7, 0.7}};
  const Heatmap h = synth_mixture(spec);
  double z = 0.0;
  std::vector<double> direct;
  for (const auto& p : spec.points) {
    double d = 0.0;
    for (const auto& k : spec.components) {
      const double dx = p.x - k.mean.x, dy = p.y - k.mean.y;
      d += k.weight * std::exp(-(dx * dx + dy * dy) / (2 * k.sigma * k.sigma));
    }
    direct.push_back(d);
    z += d;
  }
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h.cells[i].mass, direct[i] / z, 1e-14);
  EXPECT_NEAR(h.total_mass(), 1.0, 1e-9);
}

TEST(SynthMixture, ZeroDensityIsAnError) {
  MixtureSpec spec;
  spec.points = {{1000, 1000}};
  spec.components = {{{0, 0}, 0.1, 1.0}};
  EXPECT_THROW(synth_mixture(spec), Error);
}

TEST(HeatmapCsv, RoundTripAndEmptyFile) {
  Rng rng(9);
  const Heatmap h = random_heatmap(rng, 12);
  std::stringstream ss;
  write_heatmap_csv(ss, h, 42);
  EXPECT_EQ(ss.str().rfind("# seed=42\nx,y,mass,pitch\n", 0), 0u);
  const Heatmap back = read_heatmap_csv(ss);
  ASSERT_EQ(back.size(), h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(back.cells[i].mass, h.cells[i].mass);
    EXPECT_EQ(back.cells[i].point, h.cells[i].point);
  }
  std::stringstream empty;
  try {
    read_heatmap_csv(empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyHeatmap);
  }
}
