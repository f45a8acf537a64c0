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

#include "voxelseg/metrics.hpp"

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "voxelseg/rng.hpp"

using namespace voxelseg;
namespace vt = voxelseg::testing;

namespace {

MaskGrid mask_from(std::vector<std::uint8_t> v, Index3 dims, Spacing sp) {
  MaskGrid m(dims, sp, {}, VoxelKind::label);
  m.data() = std::move(v);
  return m;
}

}  // namespace

TEST(OverlapMetrics, IdenticalMasks) {
  SequenceRng rng(1);
  MaskGrid m = vt::random_mask(rng, {6, 6, 6}, Spacing::isotropic(1), 0.4);
  OverlapScores s = overlap_metrics(m, m);
  EXPECT_DOUBLE_EQ(s.dice, 1.0);
  EXPECT_DOUBLE_EQ(s.jaccard, 1.0);
}

TEST(OverlapMetrics, DisjointMasks) {
  MaskGrid a = mask_from({1, 1, 0, 0}, {4, 1, 1}, Spacing::isotropic(1));
  MaskGrid b = mask_from({0, 0, 1, 1}, {4, 1, 1}, Spacing::isotropic(1));
  OverlapScores s = overlap_metrics(a, b);
  EXPECT_DOUBLE_EQ(s.dice, 0.0);
  EXPECT_DOUBLE_EQ(s.jaccard, 0.0);
}

TEST(OverlapMetrics, WorkedExample) {
  MaskGrid a = mask_from({1, 1, 0, 0}, {4, 1, 1}, Spacing::isotropic(1));
  MaskGrid b = mask_from({0, 1, 1, 0}, {4, 1, 1}, Spacing::isotropic(1));
  OverlapScores s = overlap_metrics(a, b);
  EXPECT_DOUBLE_EQ(s.dice, 0.5);
  EXPECT_NEAR(s.jaccard, 1.0 / 3.0, 1e-15);
}

TEST(OverlapMetrics, EmptyPredScoresZero) {
  MaskGrid a = mask_from({0, 0, 0, 0}, {4, 1, 1}, Spacing::isotropic(1));
  MaskGrid b = mask_from({0, 1, 1, 0}, {4, 1, 1}, Spacing::isotropic(1));
  OverlapScores s = overlap_metrics(a, b);
  EXPECT_DOUBLE_EQ(s.dice, 0.0);
  EXPECT_DOUBLE_EQ(s.jaccard, 0.0);
}

TEST(OverlapMetrics, EmptyGroundTruthRejected) {
  MaskGrid a = mask_from({1, 0}, {2, 1, 1}, Spacing::isotropic(1));
  MaskGrid b = mask_from({0, 0}, {2, 1, 1}, Spacing::isotropic(1));
  try {
    overlap_metrics(a, b);
    FAIL() << "expected EmptyGroundTruth";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "EmptyGroundTruth");
  }
}

TEST(OverlapMetrics, JaccardDiceIdentity) {
  SequenceRng rng(2);
  for (int t = 0; t < 50; ++t) {
    Index3 dims = vt::random_dims(rng, 2, 8);
    MaskGrid a = vt::random_mask(rng, dims, Spacing::isotropic(1), 0.5);
    MaskGrid b = vt::random_mask(rng, dims, Spacing::isotropic(1), 0.5);
    OverlapScores s = overlap_metrics(a, b);
    EXPECT_NEAR(s.jaccard, s.dice / (2.0 - s.dice), 1e-12);
  }
}

TEST(SurfaceMetrics, IdenticalMasksAreZero) {
  SequenceRng rng(3);
  MaskGrid m = vt::random_mask(rng, {6, 5, 4}, Spacing(0.4, 0.5, 0.6), 0.4);
  SurfaceScores s = surface_distance_metrics(m, m);
  EXPECT_DOUBLE_EQ(s.hd_mm, 0.0);
  EXPECT_DOUBLE_EQ(s.asd_mm, 0.0);
}

TEST(SurfaceMetrics, TwoSingleVoxelsTwoMmApart) {
  MaskGrid a({5, 1, 1}, Spacing::isotropic(1), {}, VoxelKind::label, 0);
  MaskGrid b = a;
  a(1, 0, 0) = 1;
  b(3, 0, 0) = 1;
  SurfaceScores s = surface_distance_metrics(a, b);
  EXPECT_DOUBLE_EQ(s.hd_mm, 2.0);
  EXPECT_DOUBLE_EQ(s.asd_mm, 2.0);
}

TEST(SurfaceMetrics, MatchesBruteForceOnRandomPairs) {
  SequenceRng rng(4);
  for (int t = 0; t < 25; ++t) {
    Index3 dims = vt::random_dims(rng, 2, 12);
    Spacing sp = vt::random_spacing(rng, 0.2, 1.0);
    MaskGrid a = vt::random_mask(rng, dims, sp, 0.35);
    MaskGrid b = vt::random_mask(rng, dims, sp, 0.35);
    SurfaceScores s = surface_distance_metrics(a, b);
    vt::BruteSurface ref =
        vt::brute_force_surface(boundary_voxels(a), boundary_voxels(b), sp);
    EXPECT_NEAR(s.hd_mm, ref.hd, 1e-6);
    EXPECT_NEAR(s.asd_mm, ref.asd, 1e-6);
  }
}

TEST(SurfaceMetrics, SymmetricAndAsdBelowHd) {
  SequenceRng rng(5);
  for (int t = 0; t < 20; ++t) {
    Index3 dims = vt::random_dims(rng, 3, 10);
    MaskGrid a = vt::random_mask(rng, dims, Spacing::isotropic(0.8), 0.4);
    MaskGrid b = vt::random_mask(rng, dims, Spacing::isotropic(0.8), 0.4);
    SurfaceScores ab = surface_distance_metrics(a, b);
    SurfaceScores ba = surface_distance_metrics(b, a);
    EXPECT_DOUBLE_EQ(ab.hd_mm, ba.hd_mm);
    EXPECT_DOUBLE_EQ(ab.asd_mm, ba.asd_mm);
    EXPECT_LE(ab.asd_mm, ab.hd_mm);
  }
}

TEST(SurfaceMetrics, Hd95BehindFlag) {
  SequenceRng rng(6);
  MaskGrid a = vt::random_mask(rng, {8, 8, 8}, Spacing::isotropic(1), 0.3);
  MaskGrid b = vt::random_mask(rng, {8, 8, 8}, Spacing::isotropic(1), 0.3);
  SurfaceScores without = surface_distance_metrics(a, b, false);
  SurfaceScores with = surface_distance_metrics(a, b, true);
  EXPECT_FALSE(without.hd95_mm.has_value());
  ASSERT_TRUE(with.hd95_mm.has_value());
  EXPECT_LE(*with.hd95_mm, with.hd_mm);
}

TEST(SurfaceMetrics, EmptyMaskRejected) {
  MaskGrid a = mask_from({0, 0}, {2, 1, 1}, Spacing::isotropic(1));
  MaskGrid b = mask_from({1, 0}, {2, 1, 1}, Spacing::isotropic(1));
  try {
    surface_distance_metrics(a, b);
    FAIL() << "expected EmptyMask";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "EmptyMask");
  }
}

namespace {

LabelGrid label_volume(std::vector<std::uint16_t> v, Index3 dims) {
  LabelGrid g(dims, Spacing::isotropic(1), {}, VoxelKind::label);
  g.data() = std::move(v);
  return g;
}

}  // namespace

TEST(MatchInstances, IdentityMatching) {
  LabelGrid g = label_volume({1, 1, 2, 2, 3, 3, 0, 0}, {8, 1, 1});
  auto m = match_instances(g, g);
  ASSERT_EQ(m.size(), 3u);
  for (const auto& [gt, pred] : m) EXPECT_EQ(gt, pred);
}

TEST(MatchInstances, RecoversPermutedIds) {
  LabelGrid gt = label_volume({1, 1, 2, 2, 3, 3, 0, 0}, {8, 1, 1});
  LabelGrid pred = label_volume({3, 3, 1, 1, 2, 2, 0, 0}, {8, 1, 1});
  auto m = match_instances(pred, gt);
  ASSERT_EQ(m.size(), 3u);
  std::map<std::uint16_t, std::uint16_t> got(m.begin(), m.end());
  EXPECT_EQ(got[1], 3);
  EXPECT_EQ(got[2], 1);
  EXPECT_EQ(got[3], 2);
}

TEST(MatchInstances, SplitInstanceMatchesLargerPiece) {
  // one gt instance of 10 voxels split 60/40 into pred ids 1 and 2
  LabelGrid gt = label_volume({1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, {10, 1, 1});
  LabelGrid pred = label_volume({1, 1, 1, 1, 1, 1, 2, 2, 2, 2}, {10, 1, 1});
  auto m = match_instances(pred, gt);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].first, 1);
  EXPECT_EQ(m[0].second, 1);  // the 60% piece wins
}

TEST(EvaluateCase, PerfectPredictionScoresPerfect) {
  LabelGrid g = label_volume({1, 1, 0, 2, 2, 0, 3, 3}, {8, 1, 1});
  CaseReport rep = evaluate_case(g, g);
  EXPECT_EQ(rep.matches.size(), 3u);
  EXPECT_TRUE(rep.missed_gt.empty());
  EXPECT_TRUE(rep.spurious_pred.empty());
  EXPECT_DOUBLE_EQ(rep.mean_dice, 1.0);
  EXPECT_DOUBLE_EQ(rep.mean_jaccard, 1.0);
  EXPECT_DOUBLE_EQ(rep.mean_hd_mm, 0.0);
  EXPECT_DOUBLE_EQ(rep.mean_asd_mm, 0.0);
}

TEST(EvaluateCase, MeansFormatToFourDecimals) {
  CaseReport rep;
  rep.mean_dice = 0.9408;
  rep.mean_jaccard = 0.8885;
  rep.mean_hd_mm = 1.1958;
  rep.mean_asd_mm = 0.5142;
  EXPECT_EQ(rep.format_means(), "0.9408 / 0.8885 / 1.1958 / 0.5142");
}

TEST(EvaluateCase, DeletedInstanceBecomesMiss) {
  LabelGrid gt = label_volume({1, 1, 0, 2, 2, 0}, {6, 1, 1});
  LabelGrid pred = label_volume({1, 1, 0, 0, 0, 0}, {6, 1, 1});
  CaseReport rep = evaluate_case(pred, gt);
  ASSERT_EQ(rep.matches.size(), 1u);
  EXPECT_EQ(rep.matches[0].gt_id, 1);
  ASSERT_EQ(rep.missed_gt.size(), 1u);
  EXPECT_EQ(rep.missed_gt[0], 2);
  EXPECT_TRUE(rep.spurious_pred.empty());
  // means computed over the remaining match only
  EXPECT_DOUBLE_EQ(rep.mean_dice, 1.0);
}

TEST(EvaluateCase, SpuriousPredictionListed) {
  LabelGrid gt = label_volume({1, 1, 0, 0, 0, 0}, {6, 1, 1});
  LabelGrid pred = label_volume({1, 1, 0, 0, 7, 7}, {6, 1, 1});
  CaseReport rep = evaluate_case(pred, gt);
  ASSERT_EQ(rep.spurious_pred.size(), 1u);
  EXPECT_EQ(rep.spurious_pred[0], 7);
}

TEST(EvaluateCase, InvariantUnderConsistentRelabeling) {
  SequenceRng rng(9);
  LabelGrid gt({6, 6, 6}, Spacing::isotropic(0.7), {}, VoxelKind::label, 0);
  LabelGrid pred = gt;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt.flat(i) = static_cast<std::uint16_t>(rng.below(3));        // ids 0..2
    pred.flat(i) = rng.uniform() < 0.8 ? gt.flat(i)
                                       : static_cast<std::uint16_t>(rng.below(3));
  }
  CaseReport a = evaluate_case(pred, gt);
  // relabel 1<->2 in both
  auto swap12 = [](LabelGrid g) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.flat(i)) g.flat(i) = g.flat(i) == 1 ? 2 : 1;
    return g;
  };
  CaseReport b = evaluate_case(swap12(pred), swap12(gt));
  EXPECT_DOUBLE_EQ(a.mean_dice, b.mean_dice);
  EXPECT_DOUBLE_EQ(a.mean_hd_mm, b.mean_hd_mm);
  EXPECT_EQ(a.matches.size(), b.matches.size());
}

TEST(EvaluateCase, JaccardIdentityOnEveryMatch) {
  SequenceRng rng(10);
  LabelGrid gt({8, 8, 4}, Spacing::isotropic(1), {}, VoxelKind::label, 0);
  LabelGrid pred = gt;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt.flat(i) = static_cast<std::uint16_t>(rng.below(4));
    pred.flat(i) = rng.uniform() < 0.7 ? gt.flat(i)
                                       : static_cast<std::uint16_t>(rng.below(4));
  }
  CaseReport rep = evaluate_case(pred, gt);
  for (const auto& m : rep.matches)
    EXPECT_NEAR(m.overlap.jaccard, m.overlap.dice / (2.0 - m.overlap.dice), 1e-12);
}

TEST(EvaluateCase, EmptyGroundTruthRejected) {
  LabelGrid gt = label_volume({0, 0, 0}, {3, 1, 1});
  LabelGrid pred = label_volume({1, 0, 0}, {3, 1, 1});
  try {
    evaluate_case(pred, gt);
    FAIL() << "expected EmptyGroundTruth";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), "EmptyGroundTruth");
  }
}

TEST(CaseReport, JsonHasTableColumns) {
  LabelGrid g = label_volume({1, 1, 0, 2, 2, 0}, {6, 1, 1});
  CaseReport rep = evaluate_case(g, g);
  nlohmann::json j = case_report_to_json(rep);
  ASSERT_EQ(j.at("matches").size(), 2u);
  for (const auto& m : j.at("matches")) {
    EXPECT_TRUE(m.contains("dice"));
    EXPECT_TRUE(m.contains("jaccard"));
    EXPECT_TRUE(m.contains("hd_mm"));
    EXPECT_TRUE(m.contains("asd_mm"));
  }
  EXPECT_TRUE(j.at("means").contains("dice"));
}
