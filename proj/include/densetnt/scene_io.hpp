#pragma once

// JSON scene document:
//   {
//     "version": 1,
//     "polylines": [{"id": 3, "kind": "lane" | "agent",
//                    "points": [[x, y], ...], "width": 3.5}, ...],
//     "target_history": [[x, y], ...],
//     "target_future": [[x, y], ...],          (optional)
//     "normalized": true
//   }
// "width" is the only attribute extra; its absence means 0. Doubles are
// written in shortest round-trip form (always >= 12 significant digits of
// precision). Vector attributes follow the layout documented in scene.hpp and
// are rebuilt from points, so they are not stored.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "densetnt/scene.hpp"

namespace densetnt {

inline constexpr int kSceneFormatVersion = 1;

namespace detail {

inline nlohmann::json points_to_json(const std::vector<Vector2>& pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

inline const nlohmann::json& require(const nlohmann::json& obj, const char* field, const std::string& where) {
  if (!obj.is_object() || !obj.contains(field)) {
    throw Error(ErrorCode::kParse, "missing field '" + std::string(field) + "' in " + where);
  }
  return obj.at(field);
}

inline std::vector<Vector2> points_from_json(const nlohmann::json& arr, const std::string& field) {
  if (!arr.is_array()) throw Error(ErrorCode::kParse, "field '" + field + "' must be an array");
  std::vector<Vector2> pts;
  pts.reserve(arr.size());
  for (const auto& item : arr) {
    if (!item.is_array() || item.size() != 2 || !item[0].is_number() || !item[1].is_number()) {
      throw Error(ErrorCode::kParse, "field '" + field + "' must hold [x, y] number pairs");
    }
    Vector2 p{item[0].get<double>(), item[1].get<double>()};
    if (!p.finite()) throw Error(ErrorCode::kParse, "field '" + field + "' holds a non-finite coordinate");
    pts.push_back(p);
  }
  return pts;
}

}  // namespace detail

inline nlohmann::json scene_to_json(const Scene& scene) {
  nlohmann::json doc;
  doc["version"] = kSceneFormatVersion;
  doc["polylines"] = nlohmann::json::array();
  for (const auto& pl : scene.polylines) {
    nlohmann::json j;
    j["id"] = pl.id;
    j["kind"] = pl.kind == PolylineKind::kLane ? "lane" : "agent";
    j["points"] = detail::points_to_json(pl.points);
    j["width"] = pl.width;
    doc["polylines"].push_back(std::move(j));
  }
  doc["target_history"] = detail::points_to_json(scene.target_history);
  if (!scene.target_future.empty()) doc["target_future"] = detail::points_to_json(scene.target_future);
  doc["normalized"] = scene.normalized;
  return doc;
}

inline std::string save_scene_json(const Scene& scene) { return scene_to_json(scene).dump(1) + "\n"; }

inline Scene scene_from_json(const nlohmann::json& doc) {
  using detail::require;
  if (!doc.is_object()) throw Error(ErrorCode::kParse, "scene document must be an object");
  const auto& version = require(doc, "version", "scene");
  if (!version.is_number_integer()) throw Error(ErrorCode::kParse, "field 'version' must be an integer");
  if (version.get<int>() != kSceneFormatVersion) {
    throw Error(ErrorCode::kParse, "field 'version' has unsupported value " + version.dump());
  }

  Scene scene;
  const auto& polylines = require(doc, "polylines", "scene");
  if (!polylines.is_array()) throw Error(ErrorCode::kParse, "field 'polylines' must be an array");
  for (std::size_t i = 0; i < polylines.size(); ++i) {
    const auto& pj = polylines[i];
    const std::string where = "polylines[" + std::to_string(i) + "]";
    Polyline pl;
    const auto& id = require(pj, "id", where);
    if (!id.is_number_integer()) throw Error(ErrorCode::kParse, "field 'id' in " + where + " must be an integer");
    pl.id = id.get<int>();
    const auto& kind = require(pj, "kind", where);
    if (kind == "lane") {
      pl.kind = PolylineKind::kLane;
    } else if (kind == "agent") {
      pl.kind = PolylineKind::kAgent;
    } else {
      throw Error(ErrorCode::kParse, "field 'kind' in " + where + " must be \"lane\" or \"agent\"");
    }
    pl.points = detail::points_from_json(require(pj, "points", where), where + ".points");
    if (pj.contains("width")) {
      if (!pj["width"].is_number()) throw Error(ErrorCode::kParse, "field 'width' in " + where + " must be a number");
      pl.width = pj["width"].get<double>();
    }
    scene.polylines.push_back(std::move(pl));
  }
  scene.target_history = detail::points_from_json(require(doc, "target_history", "scene"), "target_history");
  if (doc.contains("target_future")) {
    scene.target_future = detail::points_from_json(doc["target_future"], "target_future");
  }
  const auto& normalized = require(doc, "normalized", "scene");
  if (!normalized.is_boolean()) throw Error(ErrorCode::kParse, "field 'normalized' must be a boolean");
  scene.normalized = normalized.get<bool>();
  return scene;
}

inline Scene load_scene_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("malformed JSON: ") + e.what());
  }
  return scene_from_json(doc);
}

inline Scene read_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_scene_json(ss.str());
}

inline void write_scene_file(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << save_scene_json(scene);
}

}  // namespace densetnt
