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

// Deterministic synthetic dental-arch phantoms: K teeth placed along an
// elliptical arch, each a union of a crown superellipsoid and a tapered root
// capsule, composited over a bone slab into a CBCT-like intensity volume.
// Labels come from the pre-blur geometry so ground truth stays crisp while
// the image gets partial-volume softness. All randomness is drawn from the
// repo's counter-based PRNG, so identical configs produce identical bytes.
//
// Geometry frame: the arch lies in the z = 0 plane ("gum line"); crowns rise
// above it and roots descend into the bone slab below.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "voxelseg/error.hpp"
#include "voxelseg/parallel.hpp"
#include "voxelseg/rng.hpp"
#include "voxelseg/sdt.hpp"
#include "voxelseg/volume.hpp"

namespace voxelseg {

struct PhantomConfig {
  int tooth_count = 14;
  double arch_semi_axis_x_mm = 31.0;
  double arch_semi_axis_y_mm = 42.0;
  double crown_radius_min_mm = 2.4, crown_radius_max_mm = 3.0;
  double crown_half_height_min_mm = 2.6, crown_half_height_max_mm = 3.4;
  double root_length_min_mm = 5.0, root_length_max_mm = 8.0;
  double crown_exponent_min = 2.5, crown_exponent_max = 3.5;
  double gap_mm = 0.6;
  double background_level = 0.0, bone_level = 0.35, tooth_level = 0.85;
  double blur_sigma_mm = 0.3;
  double noise_sigma = 0.02;
  Spacing spacing = Spacing::isotropic(0.4);
  double margin_mm = 2.0;
  int fixed_dims = 0;  // 0 = auto-size the grid; else a fixed_dims^3 cube
  std::uint64_t seed = 0;

  void validate() const {
    if (tooth_count < 1) throw Error("BadConfig", "tooth_count must be >= 1");
    if (gap_mm < 0) throw Error("BadConfig", "gap_mm must be >= 0");
    auto positive = [](double v) { return std::isfinite(v) && v > 0; };
    if (!positive(arch_semi_axis_x_mm) || !positive(arch_semi_axis_y_mm) ||
        !positive(crown_radius_min_mm) || !positive(crown_radius_max_mm) ||
        !positive(crown_half_height_min_mm) || !positive(crown_half_height_max_mm) ||
        !positive(root_length_min_mm) || !positive(root_length_max_mm) ||
        !positive(crown_exponent_min) || !positive(crown_exponent_max) ||
        !positive(margin_mm))
      throw Error("BadConfig", "geometric parameters must be positive");
    if (crown_radius_min_mm > crown_radius_max_mm ||
        crown_half_height_min_mm > crown_half_height_max_mm ||
        root_length_min_mm > root_length_max_mm ||
        crown_exponent_min > crown_exponent_max)
      throw Error("BadConfig", "parameter ranges must satisfy min <= max");
    if (blur_sigma_mm < 0 || noise_sigma < 0)
      throw Error("BadConfig", "blur/noise sigmas must be >= 0");
    if (fixed_dims < 0) throw Error("BadConfig", "fixed_dims must be >= 0");
  }
};

/// One tooth's generating implicit shape (crown superellipsoid overlapping a
/// tapered root capsule with hemispherical tip).
struct ToothShape {
  Vec3 center;  // gum-line anchor on the arch (z = 0)
  double crown_radius = 0;
  double crown_half_height = 0;
  double crown_exponent = 2;
  double root_length = 0;
  double root_top_radius = 0;
  double root_tip_radius = 0;

  /// Worst-case in-plane half width (the superellipse bulges along its
  /// diagonals for exponents > 2).
  double effective_radius() const {
    return crown_radius * std::pow(2.0, 0.5 - 1.0 / crown_exponent);
  }

  /// Radial distance from the axis to the crown surface along an in-plane
  /// unit direction; the max horizontal extent of the tooth toward it.
  double radius_toward(const Vec3& u) const {
    double e = crown_exponent;
    double denom = std::pow(std::abs(u.x), e) + std::pow(std::abs(u.y), e);
    return crown_radius / std::pow(denom, 1.0 / e);
  }

  bool inside(const Vec3& p) const {
    double dx = p.x - center.x, dy = p.y - center.y, dz = p.z - center.z;
    // crown spans z in [-0.2, 1.8] * half height so the root top overlaps it
    double cz = dz - 0.8 * crown_half_height;
    double e = crown_exponent;
    if (std::pow(std::abs(dx / crown_radius), e) +
            std::pow(std::abs(dy / crown_radius), e) +
            std::pow(std::abs(cz / crown_half_height), e) <=
        1.0)
      return true;
    double rr = dx * dx + dy * dy;
    if (dz <= 0 && dz >= -root_length) {
      double t = -dz / root_length;
      double rad = root_top_radius + (root_tip_radius - root_top_radius) * t;
      if (rr <= rad * rad) return true;
    }
    if (dz < -root_length) {
      double tz = dz + root_length;
      if (rr + tz * tz <= root_tip_radius * root_tip_radius) return true;
    }
    return false;
  }

  double min_z() const { return -root_length - root_tip_radius; }
  double max_z() const { return 1.8 * crown_half_height; }
};

struct PhantomCase {
  ImageGrid image;
  LabelGrid labels;                          // ids 1..K
  std::vector<Vec3> centroids;               // index k -> label k+1
  std::vector<std::pair<int, int>> adjacency;  // 1-based id pairs, i < j
  PhantomConfig config;
};

/// Separable Gaussian blur (zero padding outside the grid), kernel radius
/// 3 sigma per axis. Scanlines are independent, so parallel runs are
/// bit-identical to sequential ones.
inline void gaussian_blur(ImageGrid& img, double sigma_mm) {
  for (int axis = 0; axis < 3; ++axis) {
    double s = axis == 0 ? img.spacing().x : axis == 1 ? img.spacing().y
                                                       : img.spacing().z;
    int radius = static_cast<int>(std::ceil(3.0 * sigma_mm / s));
    if (radius < 1) continue;
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
      kernel[i + radius] = std::exp(-(i * s) * (i * s) / (2.0 * sigma_mm * sigma_mm));
      sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    const int nx = img.nx(), ny = img.ny(), nz = img.nz();
    const int n = axis == 0 ? nx : axis == 1 ? ny : nz;
    const std::size_t stride = axis == 0 ? 1
                               : axis == 1 ? static_cast<std::size_t>(nx)
                                           : static_cast<std::size_t>(nx) * ny;
    const std::int64_t lines = static_cast<std::int64_t>(img.size()) / n;
    ImageGrid src = img;
    par::parallel_for(lines, [&](std::int64_t line) {
      std::size_t base;
      if (axis == 0) {
        int y = static_cast<int>(line % ny), z = static_cast<int>(line / ny);
        base = img.index(0, y, z);
      } else if (axis == 1) {
        int x = static_cast<int>(line % nx), z = static_cast<int>(line / nx);
        base = img.index(x, 0, z);
      } else {
        int x = static_cast<int>(line % nx), y = static_cast<int>(line / nx);
        base = img.index(x, y, 0);
      }
      for (int i = 0; i < n; ++i) {
        double acc = 0;
        for (int k = -radius; k <= radius; ++k) {
          int j = i + k;
          if (j < 0 || j >= n) continue;
          acc += kernel[k + radius] * src.flat(base + j * stride);
        }
        img.flat(base + i * stride) = acc;
      }
    });
  }
}

namespace detail {

inline Vec3 arch_point(const PhantomConfig& cfg, double theta) {
  return {cfg.arch_semi_axis_x_mm * std::cos(theta),
          cfg.arch_semi_axis_y_mm * std::sin(theta), 0.0};
}

}  // namespace detail

/// Minimum voxel-center distance between the voxels of two non-empty masks.
inline double mask_surface_distance_mm(const MaskGrid& a, const MaskGrid& b) {
  auto ba = nonzero_bbox(a), bb = nonzero_bbox(b);
  if (!ba || !bb) throw Error("EmptyMask", "surface distance of empty mask");
  BoundingBox box{{std::min(ba->lo.x, bb->lo.x), std::min(ba->lo.y, bb->lo.y),
                   std::min(ba->lo.z, bb->lo.z)},
                  {std::max(ba->hi.x, bb->hi.x), std::max(ba->hi.y, bb->hi.y),
                   std::max(ba->hi.z, bb->hi.z)}};
  MaskGrid ca = crop(a, box), cb = crop(b, box);
  std::vector<Index3> pts;
  for (int z = 0; z < ca.nz(); ++z)
    for (int y = 0; y < ca.ny(); ++y)
      for (int x = 0; x < ca.nx(); ++x)
        if (ca(x, y, z)) pts.push_back({x, y, z});
  Grid<double> d = edt(pts, ca.dims(), ca.spacing());
  double best = std::numeric_limits<double>::infinity();
  for (int z = 0; z < cb.nz(); ++z)
    for (int y = 0; y < cb.ny(); ++y)
      for (int x = 0; x < cb.nx(); ++x)
        if (cb(x, y, z)) best = std::min(best, d(x, y, z));
  return best;
}

/// Samples tooth shapes and places them along the arch; throws ConfigOverlap
/// when the requested teeth cannot fit at the requested gap. Placement walks
/// the arch greedily and then recenters the row for symmetry.
inline std::vector<ToothShape> phantom_tooth_shapes(const PhantomConfig& cfg) {
  cfg.validate();
  CounterRng rng(cfg.seed, /*stream=*/1);
  const int K = cfg.tooth_count;

  std::vector<ToothShape> teeth(K);
  for (int k = 0; k < K; ++k) {
    std::uint64_t c = static_cast<std::uint64_t>(k) * 8;
    ToothShape& t = teeth[k];
    t.crown_radius = rng.uniform(c + 0, cfg.crown_radius_min_mm, cfg.crown_radius_max_mm);
    t.crown_half_height =
        rng.uniform(c + 1, cfg.crown_half_height_min_mm, cfg.crown_half_height_max_mm);
    t.crown_exponent =
        rng.uniform(c + 2, cfg.crown_exponent_min, cfg.crown_exponent_max);
    t.root_length = rng.uniform(c + 3, cfg.root_length_min_mm, cfg.root_length_max_mm);
    t.root_top_radius = 0.6 * t.crown_radius;
    t.root_tip_radius = std::max(0.8, 0.3 * t.crown_radius);
  }

  const double theta_margin = 0.05 * 3.14159265358979323846;
  const double theta_hi = 3.14159265358979323846 - theta_margin;

  // greedy walk down the arch. Each step places the next center where the
  // chord equals the two crown radii measured toward each other plus the gap,
  // so the horizontal surface separation comes out at gap_mm (the surplus the
  // worst-case diagonal bound would add is avoided). Solved by bisection; the
  // chord grows monotonically with the angular step at these scales.
  auto place = [&](double start, std::vector<double>& theta) {
    theta[0] = start;
    for (int k = 1; k < K; ++k) {
      Vec3 prev = detail::arch_point(cfg, theta[k - 1]);
      auto separation = [&](double th) {
        Vec3 d = detail::arch_point(cfg, th) - prev;
        double chord = d.norm();
        if (chord <= 0) return -1.0;
        Vec3 u = d * (1.0 / chord);
        return chord - teeth[k - 1].radius_toward(u) - teeth[k].radius_toward(u) -
               cfg.gap_mm;
      };
      if (separation(theta_margin) < 0)
        throw Error("ConfigOverlap",
                    "teeth cannot fit on the arch at the requested gap");
      double hi = theta[k - 1], lo = theta_margin;  // sep(hi)<0, sep(lo)>=0
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        (separation(mid) >= 0 ? lo : hi) = mid;
      }
      theta[k] = lo;
    }
  };

  // place once to measure the leftover arc, then re-walk from a shifted start
  // so the row sits centered; chord constraints hold exactly on the final walk
  std::vector<double> theta(K);
  place(theta_hi, theta);
  double slack = theta[K - 1] - theta_margin;
  if (slack > 0) {
    try {
      std::vector<double> centered(K);
      place(theta_hi - 0.5 * slack, centered);
      theta = centered;
    } catch (const Error&) {
      // the shifted walk can need marginally more arc; keep the valid one
    }
  }
  for (int k = 0; k < K; ++k) teeth[k].center = detail::arch_point(cfg, theta[k]);
  return teeth;
}

/// Generates the phantom case: crisp labels, composited + blurred + noised
/// image, true centroids (mean of label voxel centers), and the adjacency
/// list of tooth pairs whose surface distance is below 2 * gap_mm.
inline PhantomCase generate_phantom(const PhantomConfig& cfg) {
  std::vector<ToothShape> teeth = phantom_tooth_shapes(cfg);
  const int K = cfg.tooth_count;

  // grid extents from the tooth row plus bone slab
  double min_root_z = 0;
  Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
  for (const ToothShape& t : teeth) {
    double er = t.effective_radius();
    lo.x = std::min(lo.x, t.center.x - er);
    lo.y = std::min(lo.y, t.center.y - er);
    lo.z = std::min(lo.z, t.center.z + t.min_z());
    hi.x = std::max(hi.x, t.center.x + er);
    hi.y = std::max(hi.y, t.center.y + er);
    hi.z = std::max(hi.z, t.center.z + t.max_z());
    min_root_z = std::min(min_root_z, t.center.z + t.min_z());
  }
  const double bone_top_z = -1.0;
  const double bone_bottom_z = min_root_z - 2.0;
  lo.z = std::min(lo.z, bone_bottom_z);

  Index3 dims;
  Vec3 origin;
  if (cfg.fixed_dims > 0) {
    dims = {cfg.fixed_dims, cfg.fixed_dims, cfg.fixed_dims};
    Vec3 center{(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2};
    origin = {center.x - (dims.x - 1) * cfg.spacing.x / 2,
              center.y - (dims.y - 1) * cfg.spacing.y / 2,
              center.z - (dims.z - 1) * cfg.spacing.z / 2};
  } else {
    lo = lo - Vec3{cfg.margin_mm, cfg.margin_mm, cfg.margin_mm};
    hi = hi + Vec3{cfg.margin_mm, cfg.margin_mm, cfg.margin_mm};
    dims = {static_cast<int>(std::ceil((hi.x - lo.x) / cfg.spacing.x)) + 1,
            static_cast<int>(std::ceil((hi.y - lo.y) / cfg.spacing.y)) + 1,
            static_cast<int>(std::ceil((hi.z - lo.z) / cfg.spacing.z)) + 1};
    origin = lo;
  }

  PhantomCase out;
  out.config = cfg;
  out.labels = LabelGrid(dims, cfg.spacing, origin, VoxelKind::label, 0);

  // rasterize teeth in ascending id order (shapes are disjoint by placement)
  for (int k = 0; k < K; ++k) {
    const ToothShape& t = teeth[k];
    double er = t.effective_radius();
    Index3 blo = out.labels.nearest_voxel(
        {t.center.x - er - 1, t.center.y - er - 1, t.center.z + t.min_z() - 1});
    Index3 bhi = out.labels.nearest_voxel(
        {t.center.x + er + 1, t.center.y + er + 1, t.center.z + t.max_z() + 1});
    for (int z = std::max(0, blo.z); z <= std::min(dims.z - 1, bhi.z); ++z)
      for (int y = std::max(0, blo.y); y <= std::min(dims.y - 1, bhi.y); ++y)
        for (int x = std::max(0, blo.x); x <= std::min(dims.x - 1, bhi.x); ++x)
          if (t.inside(out.labels.voxel_center(x, y, z)))
            out.labels(x, y, z) = static_cast<std::uint16_t>(k + 1);
  }

  // composite image: background, bone slab, teeth; then blur and noise
  out.image = ImageGrid(dims, cfg.spacing, origin, VoxelKind::intensity,
                        cfg.background_level);
  for (int z = 0; z < dims.z; ++z) {
    double pz = origin.z + z * cfg.spacing.z;
    if (pz < bone_bottom_z || pz > bone_top_z) continue;
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x) out.image(x, y, z) = cfg.bone_level;
  }
  for (std::size_t i = 0; i < out.labels.size(); ++i)
    if (out.labels.flat(i)) out.image.flat(i) = cfg.tooth_level;

  if (cfg.blur_sigma_mm > 0) gaussian_blur(out.image, cfg.blur_sigma_mm);
  if (cfg.noise_sigma > 0) {
    CounterRng noise(cfg.seed, /*stream=*/2);
    par::parallel_for(dims.z, [&](std::int64_t z) {
      for (int y = 0; y < dims.y; ++y)
        for (int x = 0; x < dims.x; ++x) {
          std::size_t i = out.image.index(x, y, static_cast<int>(z));
          out.image.flat(i) += cfg.noise_sigma * noise.normal(i);
        }
    });
  }

  // centroids: mean of each label's voxel centers
  std::vector<Vec3> sums(K, {0, 0, 0});
  std::vector<std::size_t> counts(K, 0);
  for (int z = 0; z < dims.z; ++z)
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x) {
        std::uint16_t id = out.labels(x, y, z);
        if (!id) continue;
        sums[id - 1] = sums[id - 1] + out.labels.voxel_center(x, y, z);
        ++counts[id - 1];
      }
  for (int k = 0; k < K; ++k) {
    if (counts[k] == 0)
      throw Error("ConfigOverlap", "a tooth rasterized to zero voxels");
    out.centroids.push_back(sums[k] * (1.0 / static_cast<double>(counts[k])));
  }

  // adjacency: tooth pairs with surface distance < 2 * gap_mm
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) {
      double reach = teeth[i].effective_radius() + teeth[j].effective_radius() +
                     2.0 * cfg.gap_mm + 2.0;
      if ((teeth[i].center - teeth[j].center).norm() > reach) continue;
      MaskGrid mi = mask_of_label(out.labels, static_cast<std::uint16_t>(i + 1));
      MaskGrid mj = mask_of_label(out.labels, static_cast<std::uint16_t>(j + 1));
      if (mask_surface_distance_mm(mi, mj) < 2.0 * cfg.gap_mm)
        out.adjacency.emplace_back(i + 1, j + 1);
    }

  return out;
}

/// Simulates interdental adhesion: every tooth mask grows by grow_mm (exact
/// EDT threshold), the union becomes the adhered foreground, and the grown
/// per-tooth masks are kept (they may overlap across the closed gaps).
struct AdhesionCase {
  MaskGrid merged_fg;
  std::vector<MaskGrid> tooth_masks;  // index k -> tooth id k+1, dilated
};

inline AdhesionCase corrupt_adhesion(const PhantomCase& pc, double grow_mm) {
  if (grow_mm < 0) throw Error("BadConfig", "grow_mm must be >= 0");
  const int K = static_cast<int>(pc.centroids.size());
  AdhesionCase out;
  out.merged_fg = MaskGrid(pc.labels.dims(), pc.labels.spacing(), pc.labels.origin(),
                           VoxelKind::label, 0);
  int pad = static_cast<int>(std::ceil(grow_mm / pc.labels.spacing().min_component())) + 1;
  for (int k = 0; k < K; ++k) {
    MaskGrid full(pc.labels.dims(), pc.labels.spacing(), pc.labels.origin(),
                  VoxelKind::label, 0);
    MaskGrid m = mask_of_label(pc.labels, static_cast<std::uint16_t>(k + 1));
    auto bb = nonzero_bbox(m);
    if (bb) {
      BoundingBox box = bb->expanded(pad, m.dims());
      MaskGrid c = crop(m, box);
      std::vector<Index3> pts;
      for (int z = 0; z < c.nz(); ++z)
        for (int y = 0; y < c.ny(); ++y)
          for (int x = 0; x < c.nx(); ++x)
            if (c(x, y, z)) pts.push_back({x, y, z});
      Grid<double> d = edt(pts, c.dims(), c.spacing());
      for (int z = 0; z < c.nz(); ++z)
        for (int y = 0; y < c.ny(); ++y)
          for (int x = 0; x < c.nx(); ++x)
            if (d(x, y, z) <= grow_mm + 1e-9) {
              full(x + box.lo.x, y + box.lo.y, z + box.lo.z) = 1;
              out.merged_fg(x + box.lo.x, y + box.lo.y, z + box.lo.z) = 1;
            }
    }
    out.tooth_masks.push_back(std::move(full));
  }
  return out;
}

}  // namespace voxelseg
