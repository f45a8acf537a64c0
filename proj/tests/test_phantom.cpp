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

#include "voxelseg/phantom.hpp"

#include <gtest/gtest.h>

#include <set>
#include <utility>

#include "voxelseg/labeling.hpp"

using namespace voxelseg;

namespace {

PhantomConfig small_config(int teeth, std::uint64_t seed) {
  PhantomConfig cfg;
  cfg.tooth_count = teeth;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(Phantom, SameSeedIsBitIdentical) {
  PhantomConfig cfg = small_config(3, 7);
  PhantomCase a = generate_phantom(cfg);
  PhantomCase b = generate_phantom(cfg);
  EXPECT_TRUE(a.image == b.image);
  EXPECT_TRUE(a.labels == b.labels);
  ASSERT_EQ(a.centroids.size(), b.centroids.size());
  for (std::size_t k = 0; k < a.centroids.size(); ++k)
    EXPECT_EQ(a.centroids[k], b.centroids[k]);
  EXPECT_EQ(a.adjacency, b.adjacency);
}

TEST(Phantom, DifferentSeedsDiffer) {
  PhantomCase a = generate_phantom(small_config(3, 1));
  PhantomCase b = generate_phantom(small_config(3, 2));
  EXPECT_FALSE(a.image == b.image);
}

TEST(Phantom, SingleToothCentroidMatchesQuadrature) {
  PhantomConfig cfg = small_config(1, 314);
  cfg.blur_sigma_mm = 0;
  cfg.noise_sigma = 0;
  PhantomCase pc = generate_phantom(cfg);

  // independent oracle: centroid of the generating implicit shape by fine
  // quadrature (0.05 mm grid over the tooth bounds)
  std::vector<ToothShape> shapes = phantom_tooth_shapes(cfg);
  ASSERT_EQ(shapes.size(), 1u);
  const ToothShape& t = shapes[0];
  double er = t.effective_radius();
  const double h = 0.05;
  Vec3 sum{};
  std::size_t n = 0;
  for (double z = t.center.z + t.min_z() - 0.2; z <= t.center.z + t.max_z() + 0.2; z += h)
    for (double y = t.center.y - er - 0.2; y <= t.center.y + er + 0.2; y += h)
      for (double x = t.center.x - er - 0.2; x <= t.center.x + er + 0.2; x += h)
        if (t.inside({x, y, z})) {
          sum = sum + Vec3{x, y, z};
          ++n;
        }
  ASSERT_GT(n, 0u);
  Vec3 analytic = sum * (1.0 / static_cast<double>(n));
  double err = (pc.centroids[0] - analytic).norm();
  EXPECT_LT(err, 0.5 * cfg.spacing.min_component());
}

TEST(Phantom, CentroidsAreLabelVoxelMeans) {
  PhantomCase pc = generate_phantom(small_config(3, 21));
  for (std::uint16_t id = 1; id <= 3; ++id) {
    Vec3 sum{};
    std::size_t n = 0;
    for (int z = 0; z < pc.labels.nz(); ++z)
      for (int y = 0; y < pc.labels.ny(); ++y)
        for (int x = 0; x < pc.labels.nx(); ++x)
          if (pc.labels(x, y, z) == id) {
            sum = sum + pc.labels.voxel_center(x, y, z);
            ++n;
          }
    Vec3 mean = sum * (1.0 / static_cast<double>(n));
    EXPECT_LT((mean - pc.centroids[id - 1]).norm(), 1e-9);
  }
}

TEST(Phantom, EachToothIsOneConnectedComponent) {
  PhantomCase pc = generate_phantom(small_config(5, 17));
  for (std::uint16_t id = 1; id <= 5; ++id) {
    auto [labels, count] = connected_components_6(mask_of_label(pc.labels, id));
    EXPECT_EQ(count, 1) << "tooth " << id;
  }
}

TEST(Phantom, WideGapKeepsTeethApart) {
  PhantomConfig cfg = small_config(3, 5);
  cfg.gap_mm = 2.0;
  PhantomCase pc = generate_phantom(cfg);
  double voxel_diag = Vec3{cfg.spacing.x, cfg.spacing.y, cfg.spacing.z}.norm();
  for (int k = 1; k < 3; ++k) {
    double d = mask_surface_distance_mm(mask_of_label(pc.labels, k),
                                        mask_of_label(pc.labels, k + 1));
    EXPECT_GE(d, 2.0 - voxel_diag);
  }
}

TEST(Phantom, ToothVoxelsBrighterThanBone) {
  PhantomConfig cfg = small_config(4, 3);
  PhantomCase pc = generate_phantom(cfg);
  std::size_t tooth = 0, bright = 0;
  for (std::size_t i = 0; i < pc.labels.size(); ++i) {
    if (!pc.labels.flat(i)) continue;
    ++tooth;
    bright += pc.image.flat(i) > cfg.bone_level;
  }
  ASSERT_GT(tooth, 0u);
  EXPECT_GT(static_cast<double>(bright) / static_cast<double>(tooth), 0.8);
}

TEST(Phantom, AdjacencyIsConsistentWithSurfaceDistances) {
  PhantomConfig cfg = small_config(4, 11);
  PhantomCase pc = generate_phantom(cfg);
  std::set<std::pair<int, int>> listed(pc.adjacency.begin(), pc.adjacency.end());
  for (int i = 1; i <= 4; ++i)
    for (int j = i + 1; j <= 4; ++j) {
      double d = mask_surface_distance_mm(mask_of_label(pc.labels, i),
                                          mask_of_label(pc.labels, j));
      EXPECT_EQ(listed.count({i, j}) > 0, d < 2.0 * cfg.gap_mm)
          << "pair " << i << "," << j << " distance " << d;
    }
}

TEST(Phantom, FixedDimsProducesCube) {
  PhantomConfig cfg = small_config(3, 4);
  cfg.fixed_dims = 96;
  PhantomCase pc = generate_phantom(cfg);
  EXPECT_EQ(pc.labels.dims(), (Index3{96, 96, 96}));
  EXPECT_EQ(count_nonzero(foreground_mask(pc.labels)) > 0, true);
}

TEST(Phantom, OverfullArchRejected) {
  try {
    generate_phantom(small_config(40, 0));
    FAIL() << "expected ConfigOverlap";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "ConfigOverlap");
  }
}

TEST(Phantom, BadConfigRejected) {
  PhantomConfig cfg;
  cfg.tooth_count = 0;
  EXPECT_THROW(generate_phantom(cfg), Error);
  cfg = PhantomConfig{};
  cfg.gap_mm = -1;
  EXPECT_THROW(generate_phantom(cfg), Error);
}

TEST(CorruptAdhesion, ZeroGrowthIsIdentity) {
  PhantomCase pc = generate_phantom(small_config(3, 8));
  AdhesionCase ad = corrupt_adhesion(pc, 0.0);
  ASSERT_EQ(ad.tooth_masks.size(), 3u);
  for (int k = 0; k < 3; ++k)
    EXPECT_TRUE(ad.tooth_masks[k] ==
                mask_of_label(pc.labels, static_cast<std::uint16_t>(k + 1)));
  EXPECT_TRUE(ad.merged_fg == foreground_mask(pc.labels));
}

TEST(CorruptAdhesion, GrowingByGapConnectsNeighbors) {
  PhantomConfig cfg = small_config(3, 8);
  PhantomCase pc = generate_phantom(cfg);
  auto [labels0, count0] = connected_components_6(foreground_mask(pc.labels));
  EXPECT_EQ(count0, 3);
  AdhesionCase ad = corrupt_adhesion(pc, cfg.gap_mm);
  auto [labels1, count1] = connected_components_6(ad.merged_fg);
  EXPECT_LT(count1, count0);  // at least one neighbor pair merged
}

TEST(CorruptAdhesion, UnionVolumeMonotoneInGrowth) {
  PhantomCase pc = generate_phantom(small_config(3, 8));
  std::size_t prev = 0;
  for (double grow : {0.0, 0.2, 0.4, 0.8}) {
    AdhesionCase ad = corrupt_adhesion(pc, grow);
    std::size_t vol = count_nonzero(ad.merged_fg);
    EXPECT_GE(vol, prev);
    prev = vol;
  }
}

TEST(CorruptAdhesion, DilatedMasksOverlapWhenGrowthExceedsGap) {
  PhantomConfig cfg = small_config(3, 8);
  cfg.gap_mm = 0.6;
  PhantomCase pc = generate_phantom(cfg);
  AdhesionCase ad = corrupt_adhesion(pc, 0.8);
  bool any_overlap = false;
  for (std::size_t i = 0; i < ad.merged_fg.size(); ++i) {
    int covered = 0;
    for (const MaskGrid& m : ad.tooth_masks) covered += m.flat(i);
    any_overlap |= covered >= 2;
  }
  EXPECT_TRUE(any_overlap);
}
