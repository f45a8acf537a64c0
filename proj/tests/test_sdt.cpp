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

#include "voxelseg/sdt.hpp"

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "voxelseg/rng.hpp"

using namespace voxelseg;
namespace vt = voxelseg::testing;

namespace {

MaskGrid solid_block(Index3 dims, Spacing sp, Index3 lo, Index3 hi) {
  MaskGrid m(dims, sp, {}, VoxelKind::label, 0);
  for (int z = lo.z; z <= hi.z; ++z)
    for (int y = lo.y; y <= hi.y; ++y)
      for (int x = lo.x; x <= hi.x; ++x) m(x, y, z) = 1;
  return m;
}

}  // namespace

TEST(BoundaryVoxels, SingleVoxelIsItsOwnBoundary) {
  MaskGrid m({3, 3, 3}, Spacing::isotropic(1), {}, VoxelKind::label, 0);
  m(1, 1, 1) = 1;
  auto b = boundary_voxels(m);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0], (Index3{1, 1, 1}));
}

TEST(BoundaryVoxels, SolidBlockHasHollowBoundary) {
  MaskGrid m = solid_block({5, 5, 5}, Spacing::isotropic(1), {1, 1, 1}, {3, 3, 3});
  auto b = boundary_voxels(m);
  EXPECT_EQ(b.size(), 26u);  // 27 voxels minus the interior center
  for (const Index3& p : b) EXPECT_NE(p, (Index3{2, 2, 2}));
}

TEST(BoundaryVoxels, ArrayBorderCountsAsBackground) {
  MaskGrid m({3, 3, 3}, Spacing::isotropic(1), {}, VoxelKind::label, 1);
  auto b = boundary_voxels(m);
  EXPECT_EQ(b.size(), 26u);  // all except the center
}

TEST(BoundaryVoxels, AllBackgroundIsEmpty) {
  MaskGrid m({4, 4, 4}, Spacing::isotropic(1), {}, VoxelKind::label, 0);
  EXPECT_TRUE(boundary_voxels(m).empty());
}

TEST(BoundaryVoxels, NonBinaryRejected) {
  MaskGrid m({2, 2, 2}, Spacing::isotropic(1), {}, VoxelKind::label, 0);
  m(0, 0, 0) = 2;
  try {
    boundary_voxels(m);
    FAIL() << "expected NotBinary";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "NotBinary");
  }
}

TEST(Edt, AllVoxelsAsPointsGivesZeros) {
  Index3 dims{3, 4, 2};
  std::vector<Index3> pts;
  for (int z = 0; z < dims.z; ++z)
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x) pts.push_back({x, y, z});
  Grid<double> d = edt(pts, dims, Spacing(0.3, 0.7, 1.1));
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_DOUBLE_EQ(d.flat(i), 0.0);
}

TEST(Edt, SinglePointNeighborsAtUnitSpacing) {
  std::vector<Index3> pts{{1, 1, 1}};
  Grid<double> d = edt(pts, {3, 3, 3}, Spacing::isotropic(1));
  EXPECT_DOUBLE_EQ(d(1, 1, 1), 0.0);
  EXPECT_DOUBLE_EQ(d(0, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(d(2, 1, 1), 1.0);
  EXPECT_NEAR(d(0, 0, 1), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(d(0, 0, 0), std::sqrt(3.0), 1e-12);
}

TEST(Edt, MatchesBruteForceOnRandomAnisotropicMasks) {
  SequenceRng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    Index3 dims = vt::random_dims(rng, 2, 16);
    Spacing sp = vt::random_spacing(rng, 0.2, 1.0);
    MaskGrid m = vt::random_mask(rng, dims, sp, 0.25);
    std::vector<Index3> pts;
    for (int z = 0; z < dims.z; ++z)
      for (int y = 0; y < dims.y; ++y)
        for (int x = 0; x < dims.x; ++x)
          if (m(x, y, z)) pts.push_back({x, y, z});
    Grid<double> fast = edt(pts, dims, sp);
    Grid<double> slow = vt::brute_force_edt(pts, dims, sp);
    for (std::size_t i = 0; i < fast.size(); ++i)
      ASSERT_NEAR(fast.flat(i), slow.flat(i), 1e-6) << "trial " << trial;
  }
}

TEST(Edt, DegenerateSingleVoxelAxes) {
  std::vector<Index3> pts{{0, 0, 1}, {0, 0, 5}};
  Spacing sp(0.7, 0.3, 0.9);
  Grid<double> fast = edt(pts, {1, 1, 7}, sp);
  Grid<double> slow = vt::brute_force_edt(pts, {1, 1, 7}, sp);
  for (std::size_t i = 0; i < fast.size(); ++i)
    EXPECT_NEAR(fast.flat(i), slow.flat(i), 1e-12);
}

TEST(Edt, EmptyPointSetRejected) {
  try {
    edt({}, {3, 3, 3}, Spacing::isotropic(1));
    FAIL() << "expected EmptyPointSet";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "EmptyPointSet");
  }
}

TEST(SignedDistanceMap, SingleVoxelMask) {
  MaskGrid m({3, 3, 3}, Spacing::isotropic(0.5), {}, VoxelKind::label, 0);
  m(1, 1, 1) = 1;
  Grid<double> sdm = signed_distance_map(m);
  EXPECT_DOUBLE_EQ(sdm(1, 1, 1), 0.0);
  for (std::size_t i = 0; i < sdm.size(); ++i) {
    if (i != sdm.index(1, 1, 1)) {
      EXPECT_GT(sdm.flat(i), 0.0);
    }
  }
  EXPECT_NEAR(sdm(0, 0, 0), std::sqrt(3.0) * 0.5, 1e-12);
}

TEST(SignedDistanceMap, SolidBlockCenterIsMinusOne) {
  MaskGrid m = solid_block({7, 7, 7}, Spacing::isotropic(1), {2, 2, 2}, {4, 4, 4});
  Grid<double> sdm = signed_distance_map(m);
  EXPECT_DOUBLE_EQ(sdm(3, 3, 3), -1.0);  // nearest boundary voxel is a face neighbor
  EXPECT_DOUBLE_EQ(sdm(2, 3, 3), 0.0);   // boundary
  EXPECT_DOUBLE_EQ(sdm(1, 3, 3), 1.0);   // background face neighbor
}

TEST(SignedDistanceMap, SignPartitionsTheMask) {
  SequenceRng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    Index3 dims = vt::random_dims(rng, 2, 12);
    MaskGrid m = vt::random_mask(rng, dims, vt::random_spacing(rng), 0.4);
    Grid<double> sdm = signed_distance_map(m);
    for (std::size_t i = 0; i < sdm.size(); ++i) {
      if (m.flat(i))
        EXPECT_LE(sdm.flat(i), 0.0);
      else
        EXPECT_GT(sdm.flat(i), 0.0);
    }
  }
}

TEST(SignedDistanceMap, ZeroSetEqualsBoundary) {
  SequenceRng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Index3 dims = vt::random_dims(rng, 3, 10);
    MaskGrid m = vt::random_mask(rng, dims, Spacing::isotropic(0.7), 0.35);
    Grid<double> sdm = signed_distance_map(m);
    std::set<std::size_t> boundary;
    for (const Index3& p : boundary_voxels(m)) boundary.insert(sdm.index(p.x, p.y, p.z));
    for (std::size_t i = 0; i < sdm.size(); ++i)
      EXPECT_EQ(sdm.flat(i) == 0.0, boundary.count(i) > 0);
  }
}

TEST(SignedDistanceMap, LipschitzAcrossFaceNeighbors) {
  SequenceRng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Index3 dims = vt::random_dims(rng, 3, 10);
    Spacing sp = vt::random_spacing(rng);
    MaskGrid m = vt::random_mask(rng, dims, sp, 0.4);
    Grid<double> sdm = signed_distance_map(m);
    for (int z = 0; z < dims.z; ++z)
      for (int y = 0; y < dims.y; ++y)
        for (int x = 0; x < dims.x; ++x) {
          if (x + 1 < dims.x)
            EXPECT_LE(std::abs(sdm(x + 1, y, z) - sdm(x, y, z)), sp.x + 1e-6);
          if (y + 1 < dims.y)
            EXPECT_LE(std::abs(sdm(x, y + 1, z) - sdm(x, y, z)), sp.y + 1e-6);
          if (z + 1 < dims.z)
            EXPECT_LE(std::abs(sdm(x, y, z + 1) - sdm(x, y, z)), sp.z + 1e-6);
        }
  }
}

TEST(SignedDistanceMap, UnsignedPartIgnoresWhichSideIsInside) {
  // with the boundary held fixed, |SDM| is the same EDT for mask and a
  // complement-like relabeling that keeps the same boundary set
  MaskGrid m = solid_block({6, 6, 6}, Spacing::isotropic(1), {1, 1, 1}, {4, 4, 4});
  auto surf = boundary_voxels(m);
  Grid<double> d = edt(surf, m.dims(), m.spacing());
  Grid<double> sdm = signed_distance_map(m);
  for (std::size_t i = 0; i < d.size(); ++i)
    EXPECT_DOUBLE_EQ(std::abs(sdm.flat(i)), d.flat(i));
}

TEST(SignedDistanceMap, EmptyMaskRejected) {
  MaskGrid m({3, 3, 3}, Spacing::isotropic(1), {}, VoxelKind::label, 0);
  try {
    signed_distance_map(m);
    FAIL() << "expected EmptyMask";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "EmptyMask");
  }
}

TEST(Edt, ParallelPassesMatchSequential) {
  SequenceRng rng(21);
  Index3 dims{24, 18, 20};
  MaskGrid m = vt::random_mask(rng, dims, Spacing(0.3, 0.5, 0.8), 0.1);
  std::vector<Index3> pts;
  for (int z = 0; z < dims.z; ++z)
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x)
        if (m(x, y, z)) pts.push_back({x, y, z});
  int saved = par::max_threads();
  par::set_max_threads(1);
  Grid<double> seq = edt(pts, dims, m.spacing());
  par::set_max_threads(4);
  Grid<double> parl = edt(pts, dims, m.spacing());
  par::set_max_threads(saved);
  EXPECT_TRUE(seq == parl);  // bit-identical
}
