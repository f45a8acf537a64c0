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

// Three-stage instance segmentation with pluggable predictors:
//   1. dentition foreground over the whole volume,
//   2. ROI crop -> per-voxel centroid offsets -> density voting -> peaks,
//   3. per centroid: two-channel prompt patch -> per-class probabilities
//      (+ optional SDM) -> single-tooth fusion -> stitching.
// Stage-3 toggles {centroid_prompt, multilabel, shape} reproduce the B/C/CM/
// CMS ablation variants. Everything is deterministic given inputs + config.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "voxelseg/clustering.hpp"
#include "voxelseg/error.hpp"
#include "voxelseg/losses.hpp"
#include "voxelseg/parallel.hpp"
#include "voxelseg/volume.hpp"

namespace voxelseg {

struct PipelineToggles {
  bool centroid_prompt = true;
  bool multilabel = true;
  bool shape = true;
};

/// The B/C/CM/CMS ablation variants as toggle presets.
inline PipelineToggles variant_toggles(const std::string& name) {
  if (name == "B")   return {false, false, false};
  if (name == "C")   return {true, false, false};
  if (name == "CM")  return {true, true, false};
  if (name == "CMS") return {true, true, true};
  throw Error("BadConfig", "unknown variant '" + name + "' (expected B|C|CM|CMS)");
}

struct PipelineConfig {
  int patch_size = 64;      // voxels per side, even, >= 16
  int prompt_radius = 2;    // voxels, >= 1
  double fusion_tau = 0.0;  // voxel is "inside" when predicted SDM <= tau
  std::uint32_t rho_min = 0;  // 0 = auto: max(10, 0.2 * max rho)
  double delta_min_mm = kDefaultDeltaMinMm;
  double normalize_p_lo = 0.5, normalize_p_hi = 99.5;
  LossWeights weights;  // training-side knobs, exposed for the loss harness
  PipelineToggles toggles;

  void validate() const {
    if (patch_size < 16 || patch_size % 2 != 0)
      throw Error("BadConfig", "patch_size must be even and >= 16");
    if (prompt_radius < 1) throw Error("BadConfig", "prompt_radius must be >= 1");
    if (!(normalize_p_lo >= 0 && normalize_p_lo < normalize_p_hi &&
          normalize_p_hi <= 100))
      throw Error("BadConfig", "bad normalization percentiles");
    weights.validate();
  }
};

inline void from_json(const nlohmann::json& j, PipelineToggles& t) {
  t.centroid_prompt = j.value("centroid_prompt", t.centroid_prompt);
  t.multilabel = j.value("multilabel", t.multilabel);
  t.shape = j.value("shape", t.shape);
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
  c.patch_size = j.value("patch_size", c.patch_size);
  c.prompt_radius = j.value("prompt_radius", c.prompt_radius);
  c.fusion_tau = j.value("fusion_tau", c.fusion_tau);
  c.rho_min = j.value("rho_min", c.rho_min);
  c.delta_min_mm = j.value("delta_min_mm", c.delta_min_mm);
  c.normalize_p_lo = j.value("normalize_p_lo", c.normalize_p_lo);
  c.normalize_p_hi = j.value("normalize_p_hi", c.normalize_p_hi);
  if (j.contains("toggles")) j.at("toggles").get_to(c.toggles);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    c.weights.mu1 = w.value("mu1", c.weights.mu1);
    c.weights.mu2 = w.value("mu2", c.weights.mu2);
    c.weights.lambda0 = w.value("lambda0", c.weights.lambda0);
    c.weights.lambda1 = w.value("lambda1", c.weights.lambda1);
    c.weights.lambda2 = w.value("lambda2", c.weights.lambda2);
    if (w.contains("omega")) c.weights.omega = w.at("omega").get<std::vector<double>>();
  }
}

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{
      {"patch_size", c.patch_size},
      {"prompt_radius", c.prompt_radius},
      {"fusion_tau", c.fusion_tau},
      {"rho_min", c.rho_min},
      {"delta_min_mm", c.delta_min_mm},
      {"normalize_p_lo", c.normalize_p_lo},
      {"normalize_p_hi", c.normalize_p_hi},
      {"toggles",
       {{"centroid_prompt", c.toggles.centroid_prompt},
        {"multilabel", c.toggles.multilabel},
        {"shape", c.toggles.shape}}},
      {"weights",
       {{"mu1", c.weights.mu1},
        {"mu2", c.weights.mu2},
        {"lambda0", c.weights.lambda0},
        {"lambda1", c.weights.lambda1},
        {"lambda2", c.weights.lambda2},
        {"omega", c.weights.omega}}}};
}

/// Two-channel network input: normalized intensities plus a binary centroid
/// prompt (value 1 inside a Euclidean ball of prompt_radius voxels at the
/// patch center; all zero when the prompt toggle is off).
struct PromptPatch {
  ImageGrid intensity;
  ImageGrid prompt;
};

/// Stage-3 predictor output. class_probs is ordered background, target,
/// adjacent (or background, foreground for 2-class predictors); per voxel the
/// probabilities must sum to 1 within 1e-5.
struct ToothPrediction {
  std::vector<ImageGrid> class_probs;
  std::optional<ImageGrid> sdm;
  std::optional<ImageGrid> boundary;
};

class ToothPredictor {
 public:
  virtual ~ToothPredictor() = default;
  virtual ToothPrediction predict(const PromptPatch& patch) const = 0;
};

struct DentitionPrediction {
  ImageGrid fg_prob;
  std::optional<ImageGrid> sdm;
};

class DentitionPredictor {
 public:
  virtual ~DentitionPredictor() = default;
  virtual DentitionPrediction predict(const ImageGrid& image) const = 0;
};

/// Stage-2 predictor: per-voxel 3D offsets toward tooth centroids plus the
/// binary tooth map that gates the voting.
struct OffsetPrediction {
  OffsetGrid offsets;
  MaskGrid fg;
};

class OffsetPredictor {
 public:
  virtual ~OffsetPredictor() = default;
  virtual OffsetPrediction predict(const ImageGrid& roi_image,
                                   const MaskGrid& roi_fg) const = 0;
};

/// Builds the two-channel patch for one centroid. The intensity channel is
/// the percentile-normalized crop centered on the centroid's voxel (zero
/// padded outside the image); the prompt ball stays at the patch center even
/// when the crop is clipped by the image border.
inline PromptPatch build_prompt_patch(const ImageGrid& image, const Vec3& centroid_mm,
                                      const PipelineConfig& cfg) {
  Index3 c = image.nearest_voxel(centroid_mm);
  if (!image.contains(c))
    throw Error("CentroidOutOfBounds", "centroid outside the image physical extent");
  Index3 size{cfg.patch_size, cfg.patch_size, cfg.patch_size};
  PromptPatch patch;
  ImageGrid raw = extract_patch(image, c, size, 0.0);
  patch.intensity = normalize_intensity(raw, cfg.normalize_p_lo, cfg.normalize_p_hi);
  patch.prompt = ImageGrid(size, raw.spacing(), raw.origin(), VoxelKind::probability, 0.0);
  if (cfg.toggles.centroid_prompt) {
    Index3 pc{size.x / 2, size.y / 2, size.z / 2};
    int r = cfg.prompt_radius;
    for (int dz = -r; dz <= r; ++dz)
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy + dz * dz > r * r) continue;
          Index3 p{pc.x + dx, pc.y + dy, pc.z + dz};
          if (patch.prompt.contains(p)) patch.prompt.at(p) = 1.0;
        }
  }
  return patch;
}

/// Remaps a label patch to {0 background, 1 target tooth, 2 adjacent teeth}.
inline LabelGrid remap_multilabel(const LabelGrid& labels_patch, std::uint16_t target_id) {
  if (target_id == 0) throw Error("TargetMissing", "target id must be nonzero");
  bool found = false;
  LabelGrid out(labels_patch.dims(), labels_patch.spacing(), labels_patch.origin(),
                VoxelKind::label, 0);
  for (std::size_t i = 0; i < labels_patch.size(); ++i) {
    std::uint16_t v = labels_patch.flat(i);
    if (v == target_id) {
      out.flat(i) = 1;
      found = true;
    } else if (v != 0) {
      out.flat(i) = 2;
    }
  }
  if (!found) throw Error("TargetMissing", "target id not present in the patch");
  return out;
}

/// Single-tooth mask from a prediction. Multilabel rule: argmax class == 1
/// (ties resolved toward the lower class index); 2-class rule: P_fg >= 0.5.
/// With the shape toggle on, the predicted SDM must additionally be <= tau.
inline MaskGrid fuse_single_tooth(const ToothPrediction& pred,
                                  const PipelineConfig& cfg) {
  if (pred.class_probs.size() < 2)
    throw Error("ShapeMismatch", "fusion needs >= 2 class probability fields");
  const ImageGrid& proto = pred.class_probs[0];
  for (const auto& p : pred.class_probs)
    if (!p.same_dims(proto)) throw Error("ShapeMismatch", "class field dims differ");
  const ImageGrid* sdm = nullptr;
  if (cfg.toggles.shape) {
    if (!pred.sdm) throw Error("MissingSDM", "shape fusion requested but no SDM predicted");
    if (!pred.sdm->same_dims(proto))
      throw Error("ShapeMismatch", "SDM dims differ from class fields");
    sdm = &*pred.sdm;
  }
  MaskGrid out(proto.dims(), proto.spacing(), proto.origin(), VoxelKind::label, 0);
  const std::size_t C = pred.class_probs.size();
  for (std::size_t i = 0; i < proto.size(); ++i) {
    bool in;
    if (cfg.toggles.multilabel) {
      std::size_t best = 0;
      double best_p = pred.class_probs[0].flat(i);
      for (std::size_t c = 1; c < C; ++c) {
        double p = pred.class_probs[c].flat(i);
        if (p > best_p) { best_p = p; best = c; }
      }
      in = best == 1;
    } else {
      in = pred.class_probs[1].flat(i) >= 0.5;
    }
    if (in && sdm && !(sdm->flat(i) <= cfg.fusion_tau)) in = false;
    out.flat(i) = in ? 1 : 0;
  }
  return out;
}

/// One tooth's claim on the output volume: its fused mask and a per-voxel
/// claim strength (the target-class probability).
struct ToothClaim {
  std::uint16_t id = 0;
  MaskGrid mask;
  ImageGrid strength;
};

struct StitchResult {
  LabelGrid labels;
  std::size_t conflict_voxels = 0;  // voxels claimed by more than one tooth
};

/// Assembles per-tooth masks into one label volume. A voxel claimed by
/// several teeth goes to the strongest claim, ties to the lowest id; no
/// claimed voxel is dropped.
inline StitchResult stitch_instances(std::span<const ToothClaim> claims) {
  if (claims.empty()) throw Error("EmptyClaims", "nothing to stitch");
  const MaskGrid& proto = claims[0].mask;
  for (const ToothClaim& c : claims) {
    if (!c.mask.same_dims(proto) || !c.strength.same_dims(proto))
      throw Error("ShapeMismatch", "stitch inputs must share dims");
    if (c.id == 0) throw Error("BadClaim", "tooth ids must be nonzero");
  }
  StitchResult r;
  r.labels = LabelGrid(proto.dims(), proto.spacing(), proto.origin(), VoxelKind::label, 0);
  std::vector<double> best(proto.size(), 0.0);
  std::vector<std::uint8_t> claimed(proto.size(), 0);
  for (const ToothClaim& c : claims) {
    for (std::size_t i = 0; i < proto.size(); ++i) {
      if (!c.mask.flat(i)) continue;
      if (claimed[i] < 2) ++claimed[i];
      double s = c.strength.flat(i);
      std::uint16_t cur = r.labels.flat(i);
      if (cur == 0 || s > best[i] || (s == best[i] && c.id < cur)) {
        r.labels.flat(i) = c.id;
        best[i] = s;
      }
    }
  }
  for (std::uint8_t n : claimed) r.conflict_voxels += n >= 2;
  return r;
}

struct PipelineResult {
  LabelGrid labels;
  CentroidSet centroids;
  MaskGrid dentition;
  std::size_t stitch_conflicts = 0;
};

namespace detail {

inline void check_tooth_prediction(const ToothPrediction& pred, Index3 patch_dims,
                                   const PipelineConfig& cfg) {
  std::size_t expect = cfg.toggles.multilabel ? 3 : 2;
  if (pred.class_probs.size() != expect)
    throw Error("PredictorContract",
                "predictor returned " + std::to_string(pred.class_probs.size()) +
                    " class fields, expected " + std::to_string(expect));
  for (const auto& p : pred.class_probs)
    if (!p.same_dims(patch_dims))
      throw Error("PredictorContract", "class field dims differ from patch dims");
  const std::size_t n = pred.class_probs[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0;
    for (const auto& p : pred.class_probs) sum += p.flat(i);
    if (std::abs(sum - 1.0) > 1e-5)
      throw Error("PredictorContract", "class probabilities do not sum to 1");
  }
}

/// Voxel offset of a patch inside the full grid, recovered from origins.
inline Index3 patch_offset(const ImageGrid& full, const Grid<double>& patch) {
  Vec3 d = patch.origin() - full.origin();
  return {static_cast<int>(std::llround(d.x / full.spacing().x)),
          static_cast<int>(std::llround(d.y / full.spacing().y)),
          static_cast<int>(std::llround(d.z / full.spacing().z))};
}

}  // namespace detail

/// Runs the full three-stage pipeline. Stage-3 per-tooth work items run
/// independently (parallel-safe); stitching is a deterministic reduction in
/// centroid order, so identical inputs and config give identical labels.
inline PipelineResult run_pipeline(const ImageGrid& image,
                                   const DentitionPredictor& dentition_pred,
                                   const OffsetPredictor& offset_pred,
                                   const ToothPredictor& tooth_pred,
                                   const PipelineConfig& cfg) {
  cfg.validate();

  // stage 1: dentition foreground
  DentitionPrediction dent = dentition_pred.predict(image);
  if (!dent.fg_prob.same_dims(image))
    throw Error("PredictorContract", "dentition output dims differ from image");
  MaskGrid fg(image.dims(), image.spacing(), image.origin(), VoxelKind::label, 0);
  for (std::size_t i = 0; i < fg.size(); ++i)
    fg.flat(i) = dent.fg_prob.flat(i) >= 0.5 ? 1 : 0;

  // stage 2: ROI crop, offsets, density voting, peak detection
  BoundingBox roi{{0, 0, 0}, {image.nx() - 1, image.ny() - 1, image.nz() - 1}};
  if (auto bb = nonzero_bbox(fg)) roi = bb->expanded(2, image.dims());
  ImageGrid roi_image = crop(image, roi);
  MaskGrid roi_fg = crop(fg, roi);
  OffsetPrediction off = offset_pred.predict(roi_image, roi_fg);
  if (!off.offsets.same_dims(roi_fg) || !off.fg.same_dims(roi_fg))
    throw Error("PredictorContract", "offset output dims differ from ROI");
  DensityGrid density = vote_density(off.offsets, off.fg);
  std::uint32_t rho_min = cfg.rho_min ? cfg.rho_min : auto_rho_min(density);
  CentroidSet centroids = density_peaks(density, rho_min, cfg.delta_min_mm);
  if (centroids.empty())
    throw Error("NoCentroidsFound", "no density peaks above thresholds");

  // stage 3: per-centroid prompt patches, fusion, stitching
  std::vector<ToothClaim> claims(centroids.size());
  par::parallel_for(static_cast<std::int64_t>(centroids.size()), [&](std::int64_t k) {
    PromptPatch patch = build_prompt_patch(image, centroids[k].pos_mm, cfg);
    ToothPrediction pred = tooth_pred.predict(patch);
    detail::check_tooth_prediction(pred, patch.intensity.dims(), cfg);
    MaskGrid fused = fuse_single_tooth(pred, cfg);

    ToothClaim& claim = claims[k];
    claim.id = static_cast<std::uint16_t>(k + 1);
    claim.mask = MaskGrid(image.dims(), image.spacing(), image.origin(),
                          VoxelKind::label, 0);
    claim.strength = ImageGrid(image.dims(), image.spacing(), image.origin(),
                               VoxelKind::probability, 0.0);
    Index3 lo = detail::patch_offset(image, patch.intensity);
    const ImageGrid& target_prob = pred.class_probs[1];  // target / foreground
    for (int z = 0; z < fused.nz(); ++z)
      for (int y = 0; y < fused.ny(); ++y)
        for (int x = 0; x < fused.nx(); ++x) {
          if (!fused(x, y, z)) continue;
          Index3 p{x + lo.x, y + lo.y, z + lo.z};
          if (!claim.mask.contains(p)) continue;
          claim.mask.at(p) = 1;
          claim.strength.at(p) = target_prob(x, y, z);
        }
  });
  StitchResult stitched = stitch_instances(claims);

  return {std::move(stitched.labels), std::move(centroids), std::move(fg),
          stitched.conflict_voxels};
}

}  // namespace voxelseg
