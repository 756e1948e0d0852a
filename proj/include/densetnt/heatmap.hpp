#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "densetnt/csv.hpp"
#include "densetnt/errors.hpp"
#include "densetnt/geometry.hpp"
#include "densetnt/goal_sampler.hpp"
#include "densetnt/random.hpp"
#include "densetnt/scene_gen.hpp"

namespace densetnt {

struct HeatmapCell {
  Vector2 point;
  double mass = 0.0;
};

/// Discrete mass function over goal cells. After truncation for expected
/// error evaluation the masses sum to the retained mass, not to 1.
struct Heatmap {
  std::vector<HeatmapCell> cells;
  double cell_pitch = 1.0;

  std::size_t size() const { return cells.size(); }
  bool empty() const { return cells.empty(); }

  double total_mass() const {
    double s = 0.0;
    for (const auto& c : cells) s += c.mass;
    return s;
  }

  /// Highest-mass cell; lowest index on ties.
  std::size_t argmax() const {
    if (cells.empty()) throw Error(ErrorCode::kEmptyHeatmap, "argmax of an empty heatmap");
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i) {
      if (cells[i].mass > cells[best].mass) best = i;
    }
    return best;
  }

  std::vector<Vector2> points() const {
    std::vector<Vector2> p;
    p.reserve(cells.size());
    for (const auto& c : cells) p.push_back(c.point);
    return p;
  }
};

/// Softmax of per-candidate scores, shifted by the maximum for stability.
inline Heatmap from_scores(std::span<const double> scores, std::span<const Vector2> points, double pitch) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyCandidates, "from_scores needs at least one score");
  if (scores.size() != points.size()) {
    throw Error(ErrorCode::kShapeMismatch, "scores and candidates differ in length");
  }
  double mx = -INFINITY;
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::kNonFiniteValue, "non-finite goal score");
    mx = std::max(mx, s);
  }
  Heatmap h;
  h.cell_pitch = pitch;
  h.cells.resize(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    h.cells[i] = {points[i], std::exp(scores[i] - mx)};
    z += h.cells[i].mass;
  }
  for (auto& c : h.cells) c.mass /= z;
  return h;
}

inline Heatmap from_scores(std::span<const double> scores, const CandidateSet& cands) {
  return from_scores(scores, cands.points, cands.density);
}

/// Keeps cells with mass >= threshold. Without `renormalize` the survivors
/// keep their raw masses.
inline Heatmap truncate(const Heatmap& h, double threshold, bool renormalize = false) {
  Heatmap out;
  out.cell_pitch = h.cell_pitch;
  for (const auto& c : h.cells) {
    if (c.mass >= threshold) out.cells.push_back(c);
  }
  if (out.cells.empty()) {
    throw Error(ErrorCode::kEmptyHeatmap, "no cell reaches the truncation threshold");
  }
  if (renormalize) {
    const double z = out.total_mass();
    for (auto& c : out.cells) c.mass /= z;
  }
  return out;
}

/// Splits each cell into a centered 3x3 lattice at a third of the pitch,
/// each carrying a ninth of the mass.
inline Heatmap subdivide(const Heatmap& h) {
  if (!(h.cell_pitch > 0)) throw Error(ErrorCode::kInvalidConfig, "subdivide needs a positive cell pitch");
  Heatmap out;
  out.cell_pitch = h.cell_pitch / 3.0;
  out.cells.reserve(h.cells.size() * 9);
  const double step = out.cell_pitch;
  for (const auto& c : h.cells) {
    const double m = c.mass / 9.0;
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        out.cells.push_back({{c.point.x + dx * step, c.point.y + dy * step}, m});
      }
    }
  }
  return out;
}

struct MixtureSpec {
  std::vector<MixtureComponent> components;
  std::vector<Vector2> points;  // candidates to project onto
  double cell_pitch = 1.0;
  // Optional multiplicative jitter of each cell's density in [1 - noise, 1 + noise].
  double noise = 0.0;
  std::uint64_t seed = 0;
};

inline double mixture_density(std::span<const MixtureComponent> comps, const Vector2& p) {
  double acc = 0.0;
  for (const auto& k : comps) {
    acc += k.weight * std::exp(-squared_distance(p, k.mean) / (2.0 * k.sigma * k.sigma));
  }
  return acc;
}

inline Heatmap synth_mixture(const MixtureSpec& spec) {
  for (const auto& k : spec.components) {
    if (!(k.weight > 0) || !(k.sigma > 0)) {
      throw Error(ErrorCode::kInvalidConfig, "mixture components need positive weight and sigma");
    }
  }
  if (spec.noise < 0 || spec.noise >= 1) throw Error(ErrorCode::kInvalidConfig, "mixture noise must lie in [0, 1)");
  Rng rng(spec.seed);
  Heatmap h;
  h.cell_pitch = spec.cell_pitch;
  h.cells.reserve(spec.points.size());
  double z = 0.0;
  for (const auto& p : spec.points) {
    double m = mixture_density(spec.components, p);
    if (spec.noise > 0) m *= 1.0 + spec.noise * (2.0 * rng.uniform() - 1.0);
    h.cells.push_back({p, m});
    z += m;
  }
  if (!(z > 0) || !std::isfinite(z)) throw Error(ErrorCode::kEmptyHeatmap, "mixture has zero total density on the candidates");
  for (auto& c : h.cells) c.mass /= z;
  return h;
}

// CSV form: header x,y,mass,pitch, one row per cell.
inline void write_heatmap_csv(std::ostream& out, const Heatmap& h, std::uint64_t seed) {
  CsvWriter w(out, seed, {"x", "y", "mass", "pitch"});
  for (const auto& c : h.cells) w.row(c.point.x, c.point.y, c.mass, h.cell_pitch);
}

inline Heatmap read_heatmap_csv(std::istream& in) {
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::kEmptyHeatmap, "heatmap file is empty");
  }
  std::istringstream ss(text);
  const CsvTable t = read_csv(ss);
  const std::size_t cx = t.column("x"), cy = t.column("y"), cm = t.column("mass"), cp = t.column("pitch");
  Heatmap h;
  if (t.rows.empty()) throw Error(ErrorCode::kEmptyHeatmap, "heatmap file has no cells");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const double m = t.number(r, cm);
    if (!(m >= 0) || !std::isfinite(m)) throw Error(ErrorCode::kParse, "heatmap mass must be finite and >= 0");
    h.cells.push_back({{t.number(r, cx), t.number(r, cy)}, m});
    h.cell_pitch = t.number(r, cp);
  }
  return h;
}

inline Heatmap read_heatmap_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return read_heatmap_csv(in);
}

}  // namespace densetnt
