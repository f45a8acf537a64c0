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

// Oracle predictors: ground-truth-driven stand-ins for the trained networks,
// built from a phantom case. Three modes for the tooth-stage predictor:
//
//   perfect   one-hot probabilities from the remapped labels, SDM from the
//             true target mask, boundary from its dilated boundary voxels.
//   noisy     perfect fields, optionally blurred, then logit-space Gaussian
//             noise and softmax renormalization. sigma = 0 and blur = 0 is
//             bit-identical to perfect.
//   adhesion  probabilities derived from corrupt_adhesion masks. Voxels where
//             two dilated teeth overlap are ambiguous (near-equal target and
//             adjacent probability); without multilabel awareness the
//             predictor cannot separate adhered neighbors, which reproduces
//             the interdental failure mode the ablation variants measure.
//
// When the centroid prompt is disabled the oracle has no way to know which
// tooth is wanted, so every tooth voxel scores as foreground/target — the
// B-variant behavior.

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "voxelseg/error.hpp"
#include "voxelseg/phantom.hpp"
#include "voxelseg/pipeline.hpp"
#include "voxelseg/rng.hpp"
#include "voxelseg/sdt.hpp"

namespace voxelseg {

struct OracleMode {
  enum class Kind { perfect, noisy, adhesion };
  Kind kind = Kind::perfect;
  double sigma = 0;    // logit-space noise (noisy)
  double blur_mm = 0;  // probability blur (noisy)
  double grow_mm = 0;  // dilation radius (adhesion)
  std::uint64_t seed = 0;

  static OracleMode perfect() { return {}; }
  static OracleMode noisy(double sigma, double blur_mm = 0, std::uint64_t seed = 0) {
    return {Kind::noisy, sigma, blur_mm, 0, seed};
  }
  static OracleMode adhesion(double grow_mm) {
    return {Kind::adhesion, 0, 0, grow_mm, 0};
  }
};

namespace detail {

inline std::uint64_t voxel_noise_counter(int gx, int gy, int gz, std::uint64_t c) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(static_cast<std::int64_t>(gx)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(gy)));
  h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(gz)));
  return splitmix64(h ^ c);
}

}  // namespace detail

class OracleDentitionPredictor final : public DentitionPredictor {
 public:
  explicit OracleDentitionPredictor(const PhantomCase& pc) : labels_(pc.labels) {}

  DentitionPrediction predict(const ImageGrid& image) const override {
    if (!image.same_dims(labels_))
      throw Error("ShapeMismatch", "oracle built for a different grid");
    DentitionPrediction out;
    out.fg_prob = ImageGrid(image.dims(), image.spacing(), image.origin(),
                            VoxelKind::probability, 0.0);
    for (std::size_t i = 0; i < labels_.size(); ++i)
      out.fg_prob.flat(i) = labels_.flat(i) ? 1.0 : 0.0;
    return out;
  }

 private:
  LabelGrid labels_;
};

/// True offsets: every tooth voxel points exactly at its tooth's centroid.
class OracleOffsetPredictor final : public OffsetPredictor {
 public:
  explicit OracleOffsetPredictor(const PhantomCase& pc)
      : labels_(pc.labels), centroids_(pc.centroids) {}

  OffsetPrediction predict(const ImageGrid& roi_image,
                           const MaskGrid& roi_fg) const override {
    (void)roi_image;
    OffsetPrediction out;
    out.offsets = OffsetGrid(roi_fg.dims(), roi_fg.spacing(), roi_fg.origin(),
                             VoxelKind::offset, Vec3{});
    out.fg = MaskGrid(roi_fg.dims(), roi_fg.spacing(), roi_fg.origin(),
                      VoxelKind::label, 0);
    for (int z = 0; z < roi_fg.nz(); ++z)
      for (int y = 0; y < roi_fg.ny(); ++y)
        for (int x = 0; x < roi_fg.nx(); ++x) {
          Vec3 pos = roi_fg.voxel_center(x, y, z);
          Index3 g = labels_.nearest_voxel(pos);
          if (!labels_.contains(g)) continue;
          std::uint16_t id = labels_.at(g);
          if (!id) continue;
          out.fg(x, y, z) = 1;
          out.offsets(x, y, z) = centroids_[id - 1] - pos;
        }
    return out;
  }

 private:
  LabelGrid labels_;
  std::vector<Vec3> centroids_;
};

class OracleToothPredictor final : public ToothPredictor {
 public:
  OracleToothPredictor(const PhantomCase& pc, OracleMode mode, PipelineToggles toggles)
      : labels_(pc.labels),
        centroids_(pc.centroids),
        mode_(mode),
        toggles_(toggles),
        rng_(mode.seed, /*stream=*/3) {
    if (mode_.kind == OracleMode::Kind::adhesion) {
      AdhesionCase ad = corrupt_adhesion(pc, mode_.grow_mm);
      dilated_ = std::move(ad.tooth_masks);
      const int K = static_cast<int>(dilated_.size());
      dilate_count_ = Grid<std::uint8_t>(labels_.dims(), labels_.spacing(),
                                         labels_.origin(), VoxelKind::label, 0);
      for (const MaskGrid& m : dilated_)
        for (std::size_t i = 0; i < m.size(); ++i)
          if (m.flat(i) && dilate_count_.flat(i) < 255) ++dilate_count_.flat(i);
      adhered_.assign(K, std::vector<char>(K, 0));
      for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j) {
          bool overlap = false;
          for (std::size_t v = 0; v < dilated_[i].size() && !overlap; ++v)
            overlap = dilated_[i].flat(v) && dilated_[j].flat(v);
          adhered_[i][j] = adhered_[j][i] = overlap;
        }
    }
  }

  ToothPrediction predict(const PromptPatch& patch) const override {
    const ImageGrid& geom = patch.intensity;
    const Index3 dims = geom.dims();
    const Index3 lo = offset_in_case(geom);
    const int target = nearest_tooth(geom);
    const bool prompted = toggles_.centroid_prompt;
    const int C = toggles_.multilabel ? 3 : 2;

    ToothPrediction out;
    for (int c = 0; c < C; ++c)
      out.class_probs.emplace_back(dims, geom.spacing(), geom.origin(),
                                   VoxelKind::probability, 0.0);

    for (int z = 0; z < dims.z; ++z)
      for (int y = 0; y < dims.y; ++y)
        for (int x = 0; x < dims.x; ++x) {
          Index3 g{x + lo.x, y + lo.y, z + lo.z};
          double p[3];
          if (mode_.kind == OracleMode::Kind::adhesion) {
            adhesion_probs(g, target, prompted, C, p);
          } else {
            clean_probs(g, target, prompted, C, p);
          }
          for (int c = 0; c < C; ++c) out.class_probs[c](x, y, z) = p[c];
        }

    if (mode_.kind == OracleMode::Kind::noisy && (mode_.sigma > 0 || mode_.blur_mm > 0))
      apply_noise(out.class_probs, lo);

    MaskGrid shape_mask = shape_target_mask(dims, lo, target, prompted, geom);
    if (toggles_.shape) out.sdm = patch_sdm(shape_mask, geom);
    out.boundary = dilated_boundary(shape_mask, geom);
    return out;
  }

 private:
  Index3 offset_in_case(const ImageGrid& patch) const {
    Vec3 d = patch.origin() - labels_.origin();
    return {static_cast<int>(std::llround(d.x / labels_.spacing().x)),
            static_cast<int>(std::llround(d.y / labels_.spacing().y)),
            static_cast<int>(std::llround(d.z / labels_.spacing().z))};
  }

  int nearest_tooth(const ImageGrid& patch) const {
    Vec3 center = patch.voxel_center(patch.nx() / 2, patch.ny() / 2, patch.nz() / 2);
    int best = 1;
    double best_d = (centroids_[0] - center).norm();
    for (std::size_t k = 1; k < centroids_.size(); ++k) {
      double d = (centroids_[k] - center).norm();
      if (d < best_d) { best_d = d; best = static_cast<int>(k) + 1; }
    }
    return best;
  }

  void clean_probs(Index3 g, int target, bool prompted, int C, double p[3]) const {
    std::uint16_t id = labels_.contains(g) ? labels_.at(g) : 0;
    if (C == 3) {
      bool is_target = prompted ? id == target : id != 0;
      bool is_adjacent = prompted && id != 0 && id != target;
      p[0] = (!is_target && !is_adjacent) ? 1.0 : 0.0;
      p[1] = is_target ? 1.0 : 0.0;
      p[2] = is_adjacent ? 1.0 : 0.0;
    } else {
      bool fg = prompted ? id == target : id != 0;
      p[1] = fg ? 1.0 : 0.0;
      p[0] = 1.0 - p[1];
    }
  }

  void adhesion_probs(Index3 g, int target, bool prompted, int C, double p[3]) const {
    bool inside = labels_.contains(g);
    std::uint16_t id = inside ? labels_.at(g) : 0;
    bool in_dt = inside && dilated_[target - 1].at(g);
    int cover = inside ? dilate_count_.at(g) : 0;
    bool in_dother = cover >= 2 || (cover == 1 && !in_dt);
    bool in_mt = id == static_cast<std::uint16_t>(target);
    bool in_mother = id != 0 && !in_mt;

    if (C == 3) {
      if (!prompted) {
        // no prompt: any tooth matter reads as "the" target
        if (cover >= 1) { p[0] = 0.05; p[1] = 0.90; p[2] = 0.05; }
        else           { p[0] = 0.90; p[1] = 0.05; p[2] = 0.05; }
        return;
      }
      if (in_dt && in_dother)      { p[0] = 0.05; p[1] = 0.48; p[2] = 0.47; }
      else if (in_mt)              { p[0] = 0.05; p[1] = 0.90; p[2] = 0.05; }
      else if (in_mother)          { p[0] = 0.05; p[1] = 0.05; p[2] = 0.90; }
      else if (in_dt)              { p[0] = 0.60; p[1] = 0.25; p[2] = 0.15; }
      else if (in_dother)          { p[0] = 0.60; p[1] = 0.15; p[2] = 0.25; }
      else                         { p[0] = 0.90; p[1] = 0.05; p[2] = 0.05; }
      return;
    }
    double fg;
    if (!prompted) {
      fg = cover >= 1 ? 0.90 : 0.05;
    } else if (in_mt) {
      fg = 0.90;
    } else if (in_dt && in_dother) {
      fg = 0.75;  // interdental bridge, contested
    } else if (in_dt) {
      fg = 0.65;  // uncontested dilation halo
    } else if (in_mother) {
      fg = adhered_[target - 1][id - 1] ? 0.55 : 0.15;
    } else if (in_dother) {
      fg = 0.30;
    } else {
      fg = 0.05;
    }
    p[1] = fg;
    p[0] = 1.0 - fg;
  }

  /// Mask whose SDM/boundary the shape head reports: the true target tooth
  /// when prompted, otherwise the union of all teeth.
  MaskGrid shape_target_mask(Index3 dims, Index3 lo, int target, bool prompted,
                             const ImageGrid& geom) const {
    MaskGrid m(dims, geom.spacing(), geom.origin(), VoxelKind::label, 0);
    for (int z = 0; z < dims.z; ++z)
      for (int y = 0; y < dims.y; ++y)
        for (int x = 0; x < dims.x; ++x) {
          Index3 g{x + lo.x, y + lo.y, z + lo.z};
          if (!labels_.contains(g)) continue;
          std::uint16_t id = labels_.at(g);
          if (prompted ? id == target : id != 0) m(x, y, z) = 1;
        }
    return m;
  }

  ImageGrid patch_sdm(const MaskGrid& m, const ImageGrid& geom) const {
    if (count_nonzero(m) == 0) {
      // no zero level set inside this patch; report "far outside" everywhere
      return ImageGrid(m.dims(), geom.spacing(), geom.origin(), VoxelKind::distance,
                       geom.diagonal_mm());
    }
    return signed_distance_map(m);
  }

  ImageGrid dilated_boundary(const MaskGrid& m, const ImageGrid& geom) const {
    ImageGrid b(m.dims(), geom.spacing(), geom.origin(), VoxelKind::probability, 0.0);
    if (count_nonzero(m) == 0) return b;
    for (const Index3& p : boundary_voxels(m)) {
      const Index3 ball[7] = {p,
                              {p.x - 1, p.y, p.z}, {p.x + 1, p.y, p.z},
                              {p.x, p.y - 1, p.z}, {p.x, p.y + 1, p.z},
                              {p.x, p.y, p.z - 1}, {p.x, p.y, p.z + 1}};
      for (const Index3& q : ball)
        if (b.contains(q)) b.at(q) = 1.0;
    }
    return b;
  }

  void apply_noise(std::vector<ImageGrid>& probs, Index3 lo) const {
    const std::size_t C = probs.size();
    if (mode_.blur_mm > 0) {
      for (ImageGrid& p : probs) gaussian_blur(p, mode_.blur_mm);
      for (std::size_t i = 0; i < probs[0].size(); ++i) {
        double sum = 0;
        for (const ImageGrid& p : probs) sum += p.flat(i);
        if (sum <= 1e-12) {
          for (ImageGrid& p : probs) p.flat(i) = 1.0 / static_cast<double>(C);
        } else {
          for (ImageGrid& p : probs) p.flat(i) /= sum;
        }
      }
    }
    if (mode_.sigma > 0) {
      for (int z = 0; z < probs[0].nz(); ++z)
        for (int y = 0; y < probs[0].ny(); ++y)
          for (int x = 0; x < probs[0].nx(); ++x) {
            double logits[3];
            for (std::size_t c = 0; c < C; ++c) {
              double p = std::clamp(probs[c](x, y, z), 0.02, 0.98);
              logits[c] = std::log(p) +
                          mode_.sigma * rng_.normal(detail::voxel_noise_counter(
                                            x + lo.x, y + lo.y, z + lo.z, c));
            }
            double mx = logits[0];
            for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, logits[c]);
            double sum = 0;
            for (std::size_t c = 0; c < C; ++c) sum += std::exp(logits[c] - mx);
            for (std::size_t c = 0; c < C; ++c)
              probs[c](x, y, z) = std::exp(logits[c] - mx) / sum;
          }
    }
  }

  LabelGrid labels_;
  std::vector<Vec3> centroids_;
  OracleMode mode_;
  PipelineToggles toggles_;
  CounterRng rng_;
  std::vector<MaskGrid> dilated_;
  Grid<std::uint8_t> dilate_count_;
  std::vector<std::vector<char>> adhered_;
};

inline std::unique_ptr<DentitionPredictor> make_oracle_dentition_predictor(
    const PhantomCase& pc) {
  return std::make_unique<OracleDentitionPredictor>(pc);
}

inline std::unique_ptr<OffsetPredictor> make_oracle_offset_predictor(
    const PhantomCase& pc) {
  return std::make_unique<OracleOffsetPredictor>(pc);
}

inline std::unique_ptr<ToothPredictor> make_oracle_tooth_predictor(
    const PhantomCase& pc, OracleMode mode, PipelineToggles toggles) {
  return std::make_unique<OracleToothPredictor>(pc, mode, toggles);
}

}  // namespace voxelseg
