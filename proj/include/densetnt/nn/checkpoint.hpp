#pragma once

// Binary layout, all little-endian:
//   magic "DTNTCKP1", u64 tensor count, then per tensor
//   u64 name length, name bytes, u64 rows, u64 cols, rows*cols f64 row-major.
// A JSON manifest with names, shapes and free-form metadata sits next to the
// binary file at <path>.manifest.json.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "densetnt/errors.hpp"
#include "densetnt/nn/tape.hpp"

namespace densetnt::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'D', 'T', 'N', 'T', 'C', 'K', 'P', '1'};

inline std::string manifest_path(const std::string& path) { return path + ".manifest.json"; }

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw Error(ErrorCode::kParse, "truncated checkpoint");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const ParamStore& store, const std::string& path, const nlohmann::json& metadata = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_u64(out, store.size());
  nlohmann::json manifest;
  manifest["metadata"] = metadata;
  manifest["tensors"] = nlohmann::json::array();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Parameter& p = store[i];
    detail::write_u64(out, p.name.size());
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_u64(out, static_cast<std::uint64_t>(p.value.rows()));
    detail::write_u64(out, static_cast<std::uint64_t>(p.value.cols()));
    out.write(reinterpret_cast<const char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    manifest["tensors"].push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path);
  std::ofstream m(manifest_path(path));
  if (!m) throw Error(ErrorCode::kIo, "cannot write " + manifest_path(path));
  m << manifest.dump(1) << "\n";
}

inline nlohmann::json read_manifest(const std::string& path) {
  std::ifstream in(manifest_path(path));
  if (!in) throw Error(ErrorCode::kMissingCheckpoint, "no checkpoint manifest at " + manifest_path(path));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("bad checkpoint manifest: ") + e.what());
  }
}

/// Loads tensors into an existing store. Every tensor in the file must exist
/// in the store with the same shape; store tensors absent from the file keep
/// their values. Returns the number of tensors loaded.
inline std::size_t load_checkpoint(ParamStore& store, const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kMissingCheckpoint, "no checkpoint at " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::kParse, path + " is not a checkpoint file");
  }
  const std::uint64_t count = detail::read_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t len = detail::read_u64(in);
    if (len > 4096) throw Error(ErrorCode::kParse, "implausible tensor name length in " + path);
    std::string name(len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(len));
    const auto rows = static_cast<Eigen::Index>(detail::read_u64(in));
    const auto cols = static_cast<Eigen::Index>(detail::read_u64(in));
    if (!store.contains(name)) throw Error(ErrorCode::kShapeMismatch, "checkpoint tensor '" + name + "' unknown to the model");
    Parameter& p = store.at(name);
    if (p.value.rows() != rows || p.value.cols() != cols) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                                                 std::to_string(cols));
    }
    in.read(reinterpret_cast<char*>(p.value.data()), static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) throw Error(ErrorCode::kParse, "truncated checkpoint " + path);
  }
  return static_cast<std::size_t>(count);
}

}  // namespace densetnt::nn
