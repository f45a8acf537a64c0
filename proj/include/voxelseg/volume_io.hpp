// Copyright 2026 The Voxelseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Canonical on-disk volume format: a <name>.vjson sidecar plus a <name>.raw
// dense little-endian binary, x-fastest. dtypes: f32 (real kinds, and offset
// as interleaved dx,dy,dz triples), u16/u8 (label kind).

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxelseg/error.hpp"
#include "voxelseg/volume.hpp"

static_assert(std::endian::native == std::endian::little,
              "volume .raw files are little-endian; big-endian hosts are unsupported");

namespace voxelseg {

namespace detail {

inline std::filesystem::path strip_vjson(std::filesystem::path p) {
  if (p.extension() == ".vjson" || p.extension() == ".raw") p.replace_extension();
  return p;
}

template <typename Elem>
inline void write_raw(const std::filesystem::path& path, const std::vector<Elem>& buf) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(Elem)));
  if (!f) throw IoError("short write: " + path.string());
}

template <typename Elem>
inline std::vector<Elem> read_raw(const std::filesystem::path& path, std::size_t count) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw IoError("cannot open: " + path.string());
  auto bytes = static_cast<std::size_t>(f.tellg());
  if (bytes != count * sizeof(Elem))
    throw IoError("raw size mismatch for " + path.string() + ": expected " +
                  std::to_string(count * sizeof(Elem)) + " bytes, found " +
                  std::to_string(bytes));
  std::vector<Elem> buf(count);
  f.seekg(0);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (!f) throw IoError("short read: " + path.string());
  return buf;
}

template <typename T>
inline nlohmann::json sidecar_json(const Grid<T>& g, const std::string& dtype) {
  return nlohmann::json{
      {"dims", {g.nx(), g.ny(), g.nz()}},
      {"spacing_mm", {g.spacing().x, g.spacing().y, g.spacing().z}},
      {"origin_mm", {g.origin().x, g.origin().y, g.origin().z}},
      {"kind", to_string(g.kind())},
      {"dtype", dtype},
      {"order", "x-fastest"},
      {"endian", "little"}};
}

inline void write_sidecar(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path.string());
  f << j.dump(2) << "\n";
}

struct Sidecar {
  Index3 dims;
  Spacing spacing;
  Vec3 origin;
  VoxelKind kind;
  std::string dtype;
  std::size_t count;
};

inline Sidecar read_sidecar(const std::filesystem::path& vjson) {
  std::ifstream f(vjson);
  if (!f) throw IoError("cannot open: " + vjson.string());
  nlohmann::json j;
  try {
    f >> j;
    Sidecar s;
    auto d = j.at("dims");
    s.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    auto sp = j.at("spacing_mm");
    s.spacing = Spacing(sp.at(0).get<double>(), sp.at(1).get<double>(),
                        sp.at(2).get<double>());
    auto o = j.at("origin_mm");
    s.origin = {o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()};
    s.kind = voxel_kind_from_string(j.at("kind").get<std::string>());
    s.dtype = j.at("dtype").get<std::string>();
    if (j.at("order").get<std::string>() != "x-fastest")
      throw IoError("unsupported element order in " + vjson.string());
    if (j.at("endian").get<std::string>() != "little")
      throw IoError("unsupported endianness in " + vjson.string());
    if (s.dims.x <= 0 || s.dims.y <= 0 || s.dims.z <= 0)
      throw IoError("non-positive dims in " + vjson.string());
    s.count = static_cast<std::size_t>(s.dims.x) * s.dims.y * s.dims.z;
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar " + vjson.string() + ": " + e.what());
  } catch (const Error& e) {
    throw IoError("malformed sidecar " + vjson.string() + ": " + e.what());
  }
}

}  // namespace detail

inline void write_volume(const std::filesystem::path& base_path, const ImageGrid& g) {
  auto base = detail::strip_vjson(base_path);
  detail::write_sidecar(base.string() + ".vjson", detail::sidecar_json(g, "f32"));
  std::vector<float> buf(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] = static_cast<float>(g.flat(i));
  detail::write_raw(base.string() + ".raw", buf);
}

inline void write_volume(const std::filesystem::path& base_path, const LabelGrid& g) {
  auto base = detail::strip_vjson(base_path);
  detail::write_sidecar(base.string() + ".vjson", detail::sidecar_json(g, "u16"));
  detail::write_raw(base.string() + ".raw", g.data());
}

inline void write_volume(const std::filesystem::path& base_path, const MaskGrid& g) {
  auto base = detail::strip_vjson(base_path);
  detail::write_sidecar(base.string() + ".vjson", detail::sidecar_json(g, "u8"));
  detail::write_raw(base.string() + ".raw", g.data());
}

inline void write_volume(const std::filesystem::path& base_path, const OffsetGrid& g) {
  auto base = detail::strip_vjson(base_path);
  detail::write_sidecar(base.string() + ".vjson", detail::sidecar_json(g, "f32"));
  std::vector<float> buf(g.size() * 3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    buf[3 * i + 0] = static_cast<float>(g.flat(i).x);
    buf[3 * i + 1] = static_cast<float>(g.flat(i).y);
    buf[3 * i + 2] = static_cast<float>(g.flat(i).z);
  }
  detail::write_raw(base.string() + ".raw", buf);
}

/// Reads an intensity/probability/distance volume (dtype f32).
inline ImageGrid read_image_volume(const std::filesystem::path& base_path) {
  auto base = detail::strip_vjson(base_path);
  auto s = detail::read_sidecar(base.string() + ".vjson");
  if (s.kind == VoxelKind::label || s.kind == VoxelKind::offset)
    throw IoError("expected a real-valued volume: " + base.string());
  if (s.dtype != "f32")
    throw IoError("expected dtype f32 for kind " + std::string(to_string(s.kind)));
  auto buf = detail::read_raw<float>(base.string() + ".raw", s.count);
  ImageGrid g(s.dims, s.spacing, s.origin, s.kind);
  for (std::size_t i = 0; i < s.count; ++i) {
    g.flat(i) = buf[i];
    if (s.kind == VoxelKind::probability && (g.flat(i) < 0.0 || g.flat(i) > 1.0))
      throw IoError("probability volume has values outside [0,1]: " + base.string());
  }
  return g;
}

/// Reads a label volume (dtype u16 or u8).
inline LabelGrid read_label_volume(const std::filesystem::path& base_path) {
  auto base = detail::strip_vjson(base_path);
  auto s = detail::read_sidecar(base.string() + ".vjson");
  if (s.kind != VoxelKind::label)
    throw IoError("expected a label volume: " + base.string());
  LabelGrid g(s.dims, s.spacing, s.origin, VoxelKind::label);
  if (s.dtype == "u16") {
    g.data() = detail::read_raw<std::uint16_t>(base.string() + ".raw", s.count);
  } else if (s.dtype == "u8") {
    auto buf = detail::read_raw<std::uint8_t>(base.string() + ".raw", s.count);
    for (std::size_t i = 0; i < s.count; ++i) g.flat(i) = buf[i];
  } else {
    throw IoError("expected dtype u16 or u8 for label volume " + base.string());
  }
  return g;
}

/// Reads an offset volume (interleaved f32 triples).
inline OffsetGrid read_offset_volume(const std::filesystem::path& base_path) {
  auto base = detail::strip_vjson(base_path);
  auto s = detail::read_sidecar(base.string() + ".vjson");
  if (s.kind != VoxelKind::offset)
    throw IoError("expected an offset volume: " + base.string());
  if (s.dtype != "f32") throw IoError("expected dtype f32 for offset volume");
  auto buf = detail::read_raw<float>(base.string() + ".raw", s.count * 3);
  OffsetGrid g(s.dims, s.spacing, s.origin, VoxelKind::offset);
  for (std::size_t i = 0; i < s.count; ++i)
    g.flat(i) = {buf[3 * i + 0], buf[3 * i + 1], buf[3 * i + 2]};
  return g;
}

}  // namespace voxelseg
