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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "voxelseg/error.hpp"

namespace voxelseg {

// Conventions used by every module:
//   * element ordering is x-fastest: flat index = x + nx*(y + ny*z)
//   * the physical center of voxel (i,j,k) is origin + (i*sx, j*sy, k*sz)
//   * all physical quantities are millimeters

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3& o) const = default;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

struct Index3 {
  int x = 0, y = 0, z = 0;
  bool operator==(const Index3& o) const = default;
};

/// Millimeters per voxel along each axis; all components finite and > 0.
struct Spacing {
  double x = 1, y = 1, z = 1;

  Spacing() = default;
  Spacing(double sx, double sy, double sz) : x(sx), y(sy), z(sz) {
    if (!(std::isfinite(x) && std::isfinite(y) && std::isfinite(z)) ||
        x <= 0 || y <= 0 || z <= 0) {
      throw Error("BadSpacing", "spacing components must be finite and > 0");
    }
  }
  static Spacing isotropic(double s) { return Spacing(s, s, s); }

  bool operator==(const Spacing& o) const = default;
  Vec3 to_vec() const { return {x, y, z}; }
  double min_component() const { return std::min({x, y, z}); }
};

enum class VoxelKind { intensity, label, probability, distance, offset };

inline const char* to_string(VoxelKind k) {
  switch (k) {
    case VoxelKind::intensity:   return "intensity";
    case VoxelKind::label:       return "label";
    case VoxelKind::probability: return "probability";
    case VoxelKind::distance:    return "distance";
    case VoxelKind::offset:      return "offset";
  }
  return "intensity";
}

inline VoxelKind voxel_kind_from_string(const std::string& s) {
  if (s == "intensity")   return VoxelKind::intensity;
  if (s == "label")       return VoxelKind::label;
  if (s == "probability") return VoxelKind::probability;
  if (s == "distance")    return VoxelKind::distance;
  if (s == "offset")      return VoxelKind::offset;
  throw Error("BadKind", "unknown voxel kind '" + s + "'");
}

/// Dense 3D grid with physical geometry. T is the element type; the kind tag
/// travels with the grid and drives interpolation / serialization rules.
template <typename T>
class Grid {
 public:
  Grid() = default;  // empty grid, dims (0,0,0)

  Grid(Index3 dims, Spacing spacing, Vec3 origin, VoxelKind kind, T fill = T{})
      : dims_(dims), spacing_(spacing), origin_(origin), kind_(kind) {
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
      throw Error("EmptyVolume", "grid dimensions must be positive");
    data_.assign(static_cast<std::size_t>(dims.x) * dims.y * dims.z, fill);
  }

  int nx() const { return dims_.x; }
  int ny() const { return dims_.y; }
  int nz() const { return dims_.z; }
  Index3 dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  const Spacing& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  VoxelKind kind() const { return kind_; }
  void set_kind(VoxelKind k) { kind_ = k; }
  void set_origin(const Vec3& o) { origin_ = o; }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_.x) *
               (static_cast<std::size_t>(y) +
                static_cast<std::size_t>(dims_.y) * static_cast<std::size_t>(z));
  }

  T& operator()(int x, int y, int z) { return data_[index(x, y, z)]; }
  const T& operator()(int x, int y, int z) const { return data_[index(x, y, z)]; }
  T& at(Index3 p) { return data_[index(p.x, p.y, p.z)]; }
  const T& at(Index3 p) const { return data_[index(p.x, p.y, p.z)]; }
  T& flat(std::size_t i) { return data_[i]; }
  const T& flat(std::size_t i) const { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool contains(Index3 p) const {
    return p.x >= 0 && p.y >= 0 && p.z >= 0 && p.x < dims_.x && p.y < dims_.y &&
           p.z < dims_.z;
  }

  Vec3 voxel_center(Index3 p) const {
    return {origin_.x + p.x * spacing_.x, origin_.y + p.y * spacing_.y,
            origin_.z + p.z * spacing_.z};
  }
  Vec3 voxel_center(int x, int y, int z) const { return voxel_center({x, y, z}); }

  /// Voxel whose center is nearest to a physical point (may be out of range).
  Index3 nearest_voxel(const Vec3& p) const {
    return {static_cast<int>(std::llround((p.x - origin_.x) / spacing_.x)),
            static_cast<int>(std::llround((p.y - origin_.y) / spacing_.y)),
            static_cast<int>(std::llround((p.z - origin_.z) / spacing_.z))};
  }

  /// Length of the physical grid diagonal in mm.
  double diagonal_mm() const {
    Vec3 d{dims_.x * spacing_.x, dims_.y * spacing_.y, dims_.z * spacing_.z};
    return d.norm();
  }

  bool same_dims(Index3 d) const { return dims_ == d; }
  template <typename U>
  bool same_dims(const Grid<U>& o) const { return dims_ == o.dims(); }
  template <typename U>
  bool same_geometry(const Grid<U>& o) const {
    return dims_ == o.dims() && spacing_ == o.spacing() && origin_ == o.origin();
  }

  bool operator==(const Grid& o) const {
    return dims_ == o.dims_ && spacing_ == o.spacing_ && origin_ == o.origin_ &&
           kind_ == o.kind_ && data_ == o.data_;
  }

 private:
  Index3 dims_{0, 0, 0};
  Spacing spacing_{};
  Vec3 origin_{};
  VoxelKind kind_ = VoxelKind::intensity;
  std::vector<T> data_;
};

using ImageGrid = Grid<double>;      // intensity / probability / distance
using MaskGrid = Grid<std::uint8_t>; // binary {0,1}, label kind
using LabelGrid = Grid<std::uint16_t>;
using OffsetGrid = Grid<Vec3>;       // per-voxel mm displacement
using DensityGrid = Grid<std::uint32_t>;

/// Inclusive voxel index range, lo <= hi componentwise.
struct BoundingBox {
  Index3 lo, hi;

  bool contains(Index3 p) const {
    return p.x >= lo.x && p.y >= lo.y && p.z >= lo.z && p.x <= hi.x &&
           p.y <= hi.y && p.z <= hi.z;
  }
  Index3 extent() const { return {hi.x - lo.x + 1, hi.y - lo.y + 1, hi.z - lo.z + 1}; }

  BoundingBox expanded(int r, Index3 dims) const {
    return {{std::max(0, lo.x - r), std::max(0, lo.y - r), std::max(0, lo.z - r)},
            {std::min(dims.x - 1, hi.x + r), std::min(dims.y - 1, hi.y + r),
             std::min(dims.z - 1, hi.z + r)}};
  }
};

/// Tight bounding box of nonzero voxels; nullopt for an all-zero grid.
template <typename T>
inline std::optional<BoundingBox> nonzero_bbox(const Grid<T>& g) {
  Index3 lo{g.nx(), g.ny(), g.nz()}, hi{-1, -1, -1};
  for (int z = 0; z < g.nz(); ++z)
    for (int y = 0; y < g.ny(); ++y)
      for (int x = 0; x < g.nx(); ++x)
        if (g(x, y, z) != T{}) {
          lo.x = std::min(lo.x, x); lo.y = std::min(lo.y, y); lo.z = std::min(lo.z, z);
          hi.x = std::max(hi.x, x); hi.y = std::max(hi.y, y); hi.z = std::max(hi.z, z);
        }
  if (hi.x < 0) return std::nullopt;
  return BoundingBox{lo, hi};
}

enum class Interp { nearest, trilinear };

namespace detail {

template <typename T>
inline T sample_nearest(const Grid<T>& g, double ux, double uy, double uz) {
  auto clampi = [](long long v, int n) {
    return static_cast<int>(std::clamp<long long>(v, 0, n - 1));
  };
  return g(clampi(std::llround(ux), g.nx()), clampi(std::llround(uy), g.ny()),
           clampi(std::llround(uz), g.nz()));
}

template <typename T>
inline T lerp3(const T& a, const T& b, double w) {
  if constexpr (std::is_same_v<T, Vec3>) {
    return {a.x + (b.x - a.x) * w, a.y + (b.y - a.y) * w, a.z + (b.z - a.z) * w};
  } else {
    return a + (b - a) * w;
  }
}

template <typename T>
inline T sample_trilinear(const Grid<T>& g, double ux, double uy, double uz) {
  auto split = [](double u, int n, int& i0, int& i1, double& w) {
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<int>(std::floor(u));
    i1 = std::min(i0 + 1, n - 1);
    w = u - i0;
  };
  int x0, x1, y0, y1, z0, z1;
  double wx, wy, wz;
  split(ux, g.nx(), x0, x1, wx);
  split(uy, g.ny(), y0, y1, wy);
  split(uz, g.nz(), z0, z1, wz);
  T c00 = lerp3(g(x0, y0, z0), g(x1, y0, z0), wx);
  T c10 = lerp3(g(x0, y1, z0), g(x1, y1, z0), wx);
  T c01 = lerp3(g(x0, y0, z1), g(x1, y0, z1), wx);
  T c11 = lerp3(g(x0, y1, z1), g(x1, y1, z1), wx);
  T c0 = lerp3(c00, c10, wy);
  T c1 = lerp3(c01, c11, wy);
  return lerp3(c0, c1, wz);
}

}  // namespace detail

/// Resamples onto a new spacing. Output dims are ceil(dims*spacing/target)
/// per axis, origin is preserved, and each output voxel center is mapped into
/// input index space (voxel-center alignment, border-clamped). target ==
/// spacing returns a bit-identical copy.
template <typename T>
Grid<T> resample(const Grid<T>& vol, const Spacing& target, Interp interp) {
  if (vol.empty()) throw Error("EmptyVolume", "resample on empty volume");
  if (interp == Interp::trilinear &&
      (vol.kind() == VoxelKind::label || std::is_integral_v<T>)) {
    throw Error("InterpMismatch", "label volumes must use nearest interpolation");
  }
  if (target == vol.spacing()) return vol;

  auto out_n = [](int n, double s, double t) {
    return std::max(1, static_cast<int>(std::ceil(n * s / t - 1e-9)));
  };
  Index3 od{out_n(vol.nx(), vol.spacing().x, target.x),
            out_n(vol.ny(), vol.spacing().y, target.y),
            out_n(vol.nz(), vol.spacing().z, target.z)};
  Grid<T> out(od, target, vol.origin(), vol.kind());
  double rx = target.x / vol.spacing().x;
  double ry = target.y / vol.spacing().y;
  double rz = target.z / vol.spacing().z;
  for (int z = 0; z < od.z; ++z)
    for (int y = 0; y < od.y; ++y)
      for (int x = 0; x < od.x; ++x) {
        double ux = x * rx, uy = y * ry, uz = z * rz;
        out(x, y, z) = (interp == Interp::nearest)
                           ? detail::sample_nearest(vol, ux, uy, uz)
                           : detail::sample_trilinear(vol, ux, uy, uz);
      }
  return out;
}

/// Extracts a size-shaped patch centered on a voxel; out-of-range voxels are
/// filled with pad_value. Patch voxel p maps to source voxel lo + p where
/// lo = center - size/2, and the patch origin keeps physical coordinates
/// consistent with the source.
template <typename T>
Grid<T> extract_patch(const Grid<T>& vol, Index3 center, Index3 size, T pad_value) {
  if (vol.empty()) throw Error("EmptyVolume", "extract_patch on empty volume");
  if (size.x <= 0 || size.y <= 0 || size.z <= 0)
    throw Error("BadPatchSize", "patch size components must be positive");
  Index3 lo{center.x - size.x / 2, center.y - size.y / 2, center.z - size.z / 2};
  Vec3 origin = vol.voxel_center(lo);
  Grid<T> out(size, vol.spacing(), origin, vol.kind(), pad_value);
  int x0 = std::max(0, -lo.x), x1 = std::min(size.x, vol.nx() - lo.x);
  int y0 = std::max(0, -lo.y), y1 = std::min(size.y, vol.ny() - lo.y);
  int z0 = std::max(0, -lo.z), z1 = std::min(size.z, vol.nz() - lo.z);
  for (int z = z0; z < z1; ++z)
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        out(x, y, z) = vol(x + lo.x, y + lo.y, z + lo.z);
  return out;
}

/// Copies the subvolume covered by an inclusive bounding box, origin adjusted.
template <typename T>
Grid<T> crop(const Grid<T>& vol, const BoundingBox& box) {
  Index3 ext = box.extent();
  Grid<T> out(ext, vol.spacing(), vol.voxel_center(box.lo), vol.kind());
  for (int z = 0; z < ext.z; ++z)
    for (int y = 0; y < ext.y; ++y)
      for (int x = 0; x < ext.x; ++x)
        out(x, y, z) = vol(x + box.lo.x, y + box.lo.y, z + box.lo.z);
  return out;
}

/// Percentile of a sample by linear interpolation at rank p/100*(n-1).
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error("EmptyVolume", "percentile of empty sample");
  std::sort(values.begin(), values.end());
  double rank = p / 100.0 * (values.size() - 1);
  std::size_t i = static_cast<std::size_t>(std::floor(rank));
  std::size_t j = std::min(i + 1, values.size() - 1);
  return values[i] + (values[j] - values[i]) * (rank - i);
}

namespace detail {

inline double percentile_sorted(const std::vector<double>& sorted, double p) {
  double rank = p / 100.0 * (sorted.size() - 1);
  std::size_t i = static_cast<std::size_t>(std::floor(rank));
  std::size_t j = std::min(i + 1, sorted.size() - 1);
  return sorted[i] + (sorted[j] - sorted[i]) * (rank - i);
}

}  // namespace detail

/// Clips to the [p_lo, p_hi] percentile window and min-max scales to [0,1].
/// A constant input maps to all zeros. The result is tagged probability kind
/// since every value lies in [0,1].
inline ImageGrid normalize_intensity(const ImageGrid& vol, double p_lo = 0.5,
                                     double p_hi = 99.5) {
  if (vol.empty()) throw Error("EmptyVolume", "normalize_intensity on empty volume");
  if (!(p_lo >= 0 && p_lo < p_hi && p_hi <= 100))
    throw Error("BadPercentiles", "require 0 <= p_lo < p_hi <= 100");
  std::vector<double> sorted = vol.data();
  std::sort(sorted.begin(), sorted.end());
  double lo = detail::percentile_sorted(sorted, p_lo);
  double hi = detail::percentile_sorted(sorted, p_hi);
  ImageGrid out(vol.dims(), vol.spacing(), vol.origin(), VoxelKind::probability);
  double range = hi - lo;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    if (range <= 0) {
      out.flat(i) = 0.0;
    } else {
      double v = std::clamp(vol.flat(i), lo, hi);
      out.flat(i) = (v - lo) / range;
    }
  }
  return out;
}

/// Checks a label grid holds only {0,1} and converts it to a mask.
inline MaskGrid to_binary_mask(const LabelGrid& labels) {
  MaskGrid out(labels.dims(), labels.spacing(), labels.origin(), VoxelKind::label);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::uint16_t v = labels.flat(i);
    if (v > 1) throw Error("NotBinary", "mask values must be in {0,1}");
    out.flat(i) = static_cast<std::uint8_t>(v);
  }
  return out;
}

/// Binary mask of one instance id.
inline MaskGrid mask_of_label(const LabelGrid& labels, std::uint16_t id) {
  MaskGrid out(labels.dims(), labels.spacing(), labels.origin(), VoxelKind::label);
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.flat(i) = labels.flat(i) == id ? 1 : 0;
  return out;
}

/// Binary union of all nonzero labels.
inline MaskGrid foreground_mask(const LabelGrid& labels) {
  MaskGrid out(labels.dims(), labels.spacing(), labels.origin(), VoxelKind::label);
  for (std::size_t i = 0; i < labels.size(); ++i)
    out.flat(i) = labels.flat(i) != 0 ? 1 : 0;
  return out;
}

template <typename T>
inline std::size_t count_nonzero(const Grid<T>& g) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (g.flat(i) != T{}) ++n;
  return n;
}

}  // namespace voxelseg
