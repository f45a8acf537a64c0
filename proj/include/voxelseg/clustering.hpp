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

// Tooth centroid localization: foreground voxels vote through their predicted
// 3D offsets into a density map, then density peaks are selected by the
// fast-search rule — a voxel is a peak when its vote count rho is high and
// the distance delta to any voxel that precedes it in (rho desc, (z,y,x) lex
// asc) order is large. The total order makes the tie-break exact: one peak
// per connected plateau of equal density.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxelseg/error.hpp"
#include "voxelseg/volume.hpp"

namespace voxelseg {

struct Centroid {
  Vec3 pos_mm;
  std::uint32_t rho = 0;
  double delta_mm = 0;
};

/// Detected peaks, sorted by descending rho (ties in (z,y,x) lex order).
using CentroidSet = std::vector<Centroid>;

inline nlohmann::json centroid_set_to_json(const CentroidSet& cs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cs)
    arr.push_back({{"pos_mm", {c.pos_mm.x, c.pos_mm.y, c.pos_mm.z}},
                   {"rho", c.rho},
                   {"delta_mm", c.delta_mm}});
  return arr;
}

inline CentroidSet centroid_set_from_json(const nlohmann::json& arr) {
  CentroidSet cs;
  for (const auto& j : arr) {
    Centroid c;
    auto p = j.at("pos_mm");
    c.pos_mm = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
    c.rho = j.at("rho").get<std::uint32_t>();
    c.delta_mm = j.at("delta_mm").get<double>();
    cs.push_back(c);
  }
  return cs;
}

/// Each foreground voxel casts one vote at the voxel nearest to its own
/// center displaced by its offset; out-of-bounds votes are dropped and
/// background voxels cast none.
inline DensityGrid vote_density(const OffsetGrid& offsets, const MaskGrid& fg) {
  if (!offsets.same_dims(fg) || !(offsets.spacing() == fg.spacing()))
    throw Error("ShapeMismatch", "offsets and foreground mask must share dims and spacing");
  DensityGrid density(fg.dims(), fg.spacing(), fg.origin(), VoxelKind::label, 0);
  for (int z = 0; z < fg.nz(); ++z)
    for (int y = 0; y < fg.ny(); ++y)
      for (int x = 0; x < fg.nx(); ++x) {
        if (!fg(x, y, z)) continue;
        Vec3 target = fg.voxel_center(x, y, z) + offsets(x, y, z);
        Index3 t = fg.nearest_voxel(target);
        if (density.contains(t)) ++density.at(t);
      }
  return density;
}

namespace detail {

struct DensitySite {
  Index3 idx;
  std::uint32_t rho;
};

inline bool density_order(const DensitySite& a, const DensitySite& b) {
  if (a.rho != b.rho) return a.rho > b.rho;
  if (a.idx.z != b.idx.z) return a.idx.z < b.idx.z;
  if (a.idx.y != b.idx.y) return a.idx.y < b.idx.y;
  return a.idx.x < b.idx.x;
}

}  // namespace detail

/// Fast-search density peaks: delta is the exact distance (mm) to the nearest
/// voxel earlier in (rho desc, lex asc) order; the first voxel gets the grid
/// diagonal as its infinity sentinel. Peaks satisfy rho >= rho_min and
/// delta >= delta_min_mm.
inline CentroidSet density_peaks(const DensityGrid& density, std::uint32_t rho_min,
                                 double delta_min_mm) {
  std::vector<detail::DensitySite> sites;
  for (int z = 0; z < density.nz(); ++z)
    for (int y = 0; y < density.ny(); ++y)
      for (int x = 0; x < density.nx(); ++x)
        if (density(x, y, z) > 0) sites.push_back({{x, y, z}, density(x, y, z)});
  if (sites.empty()) throw Error("AllZeroDensity", "density map has no votes");

  std::sort(sites.begin(), sites.end(), detail::density_order);

  // Exact O(P^2) scan; votes concentrate near centroids so P stays small.
  CentroidSet peaks;
  const double sentinel = density.diagonal_mm();
  for (std::size_t i = 0; i < sites.size(); ++i) {
    double delta;
    if (i == 0) {
      delta = sentinel;
    } else {
      Vec3 pi = density.voxel_center(sites[i].idx);
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < i; ++j)
        best = std::min(best, (density.voxel_center(sites[j].idx) - pi).norm());
      delta = best;
    }
    if (sites[i].rho >= rho_min && delta >= delta_min_mm)
      peaks.push_back({density.voxel_center(sites[i].idx), sites[i].rho, delta});
  }
  return peaks;
}

/// Default density threshold: max(10, 0.2 * max rho).
inline std::uint32_t auto_rho_min(const DensityGrid& density) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < density.size(); ++i) m = std::max(m, density.flat(i));
  return std::max<std::uint32_t>(10, static_cast<std::uint32_t>(std::ceil(0.2 * m)));
}

inline constexpr double kDefaultDeltaMinMm = 4.0;

/// Labels every foreground voxel with the 1-based index of its nearest
/// centroid (ties go to the lowest index); background stays 0.
inline LabelGrid assign_instances(const MaskGrid& fg, const CentroidSet& centroids) {
  if (centroids.empty()) throw Error("EmptyCentroids", "no centroids to assign to");
  if (centroids.size() > 65535)
    throw Error("TooManyCentroids", "instance ids must fit in u16");
  LabelGrid labels(fg.dims(), fg.spacing(), fg.origin(), VoxelKind::label, 0);
  for (int z = 0; z < fg.nz(); ++z)
    for (int y = 0; y < fg.ny(); ++y)
      for (int x = 0; x < fg.nx(); ++x) {
        if (!fg(x, y, z)) continue;
        Vec3 p = fg.voxel_center(x, y, z);
        std::size_t best = 0;
        double best_d = (centroids[0].pos_mm - p).norm();
        for (std::size_t k = 1; k < centroids.size(); ++k) {
          double d = (centroids[k].pos_mm - p).norm();
          if (d < best_d) { best_d = d; best = k; }
        }
        labels(x, y, z) = static_cast<std::uint16_t>(best + 1);
      }
  return labels;
}

}  // namespace voxelseg
