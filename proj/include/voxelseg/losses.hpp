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

// Segmentation losses as pure numeric oracles over voxel fields, each with
// its exact analytic gradient with respect to the prediction. Soft Dice uses
// probability sums so gradients exist; on binary inputs it reduces to the
// set form 1 - 2|A∩B|/(|A|+|B|). All reductions use a fixed pairwise tree
// order, so values are bit-identical regardless of internal parallelism.
//
// Smoothing constants: Dice denominators carry eps = 1e-6; cross-entropy
// clamps probabilities to [1e-7, 1 - 1e-7] (gradient is zero where the clamp
// is active). Both are far below any metric tolerance used in this repo.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voxelseg/error.hpp"
#include "voxelseg/rng.hpp"
#include "voxelseg/volume.hpp"

namespace voxelseg {

inline constexpr double kDiceEps = 1e-6;
inline constexpr double kProbClamp = 1e-7;

/// Scalar loss plus its gradient field(s). Single-field losses carry one
/// gradient grid; multilabel losses carry one per class, in class order.
struct LossResult {
  double value = 0;
  std::vector<ImageGrid> gradients;

  LossResult value_only() const { return {value, {}}; }
};

/// Weights of the combined losses: mu for Dice+CE, lambda0 for the dentition
/// shape term, lambda1/lambda2 for boundary and shape in the tooth stage,
/// omega per class. mu1 + mu2 = 1 is enforced.
struct LossWeights {
  double mu1 = 0.5, mu2 = 0.5;
  double lambda0 = 0.1;
  double lambda1 = 0.4, lambda2 = 0.4;
  std::vector<double> omega = {1.0, 1.0, 1.0};

  void validate() const {
    if (std::abs(mu1 + mu2 - 1.0) > 1e-9)
      throw Error("BadWeights", "mu1 + mu2 must equal 1");
    if (mu1 < 0 || mu2 < 0 || lambda0 < 0 || lambda1 < 0 || lambda2 < 0)
      throw Error("BadWeights", "loss weights must be non-negative");
    for (double w : omega)
      if (w < 0) throw Error("BadWeights", "class weights must be non-negative");
  }
};

namespace detail {

/// Pairwise (binary tree) reduction of fn(i) over [lo, hi).
template <typename Fn>
double pairwise_sum(std::size_t lo, std::size_t hi, const Fn& fn) {
  std::size_t n = hi - lo;
  if (n == 0) return 0.0;
  if (n <= 16) {
    double s = 0;
    for (std::size_t i = lo; i < hi; ++i) s += fn(i);
    return s;
  }
  std::size_t mid = lo + n / 2;
  return pairwise_sum(lo, mid, fn) + pairwise_sum(mid, hi, fn);
}

inline void require_binary(const LabelGrid& q) {
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q.flat(i) > 1) throw Error("NotBinary", "label field values must be in {0,1}");
}

inline void require_same_shape(const ImageGrid& p, const LabelGrid& q) {
  if (!p.same_dims(q)) throw Error("ShapeMismatch", "prediction/label dims differ");
}

}  // namespace detail

/// Class-weighted soft Dice over C classes (single ratio, not a mean of
/// per-class ratios).
inline LossResult multilabel_dice_loss(std::span<const ImageGrid> p,
                                       std::span<const LabelGrid> q,
                                       std::span<const double> omega) {
  const std::size_t C = p.size();
  if (C == 0) throw Error("NoClasses", "multilabel loss needs >= 1 class");
  if (q.size() != C || omega.size() != C)
    throw Error("ShapeMismatch", "class count mismatch between p, q, omega");
  for (std::size_t c = 0; c < C; ++c) {
    detail::require_same_shape(p[c], q[c]);
    if (!p[c].same_dims(p[0])) throw Error("ShapeMismatch", "class dims differ");
    detail::require_binary(q[c]);
  }
  const std::size_t M = p[0].size();

  double num = 0, den = kDiceEps;
  for (std::size_t c = 0; c < C; ++c) {
    double inter = detail::pairwise_sum(0, M, [&](std::size_t i) {
      return p[c].flat(i) * static_cast<double>(q[c].flat(i));
    });
    double sp = detail::pairwise_sum(0, M, [&](std::size_t i) { return p[c].flat(i); });
    double sq = detail::pairwise_sum(0, M, [&](std::size_t i) {
      return static_cast<double>(q[c].flat(i));
    });
    num += omega[c] * inter;
    den += omega[c] * (sp + sq);
  }
  LossResult r;
  r.value = 1.0 - 2.0 * num / den;
  // d/dp_{c,i} [1 - 2N/D] = -2*(omega_c*q_{c,i}*D - N*omega_c)/D^2
  for (std::size_t c = 0; c < C; ++c) {
    ImageGrid g(p[c].dims(), p[c].spacing(), p[c].origin(), VoxelKind::intensity);
    for (std::size_t i = 0; i < M; ++i) {
      double qi = q[c].flat(i);
      g.flat(i) = -2.0 * omega[c] * (qi * den - num) / (den * den);
    }
    r.gradients.push_back(std::move(g));
  }
  return r;
}

/// Class-weighted binary cross-entropy summed over classes, mean over voxels.
inline LossResult multilabel_cross_entropy_loss(std::span<const ImageGrid> p,
                                                std::span<const LabelGrid> q,
                                                std::span<const double> omega) {
  const std::size_t C = p.size();
  if (C == 0) throw Error("NoClasses", "multilabel loss needs >= 1 class");
  if (q.size() != C || omega.size() != C)
    throw Error("ShapeMismatch", "class count mismatch between p, q, omega");
  for (std::size_t c = 0; c < C; ++c) {
    detail::require_same_shape(p[c], q[c]);
    if (!p[c].same_dims(p[0])) throw Error("ShapeMismatch", "class dims differ");
    detail::require_binary(q[c]);
  }
  const std::size_t M = p[0].size();
  if (M == 0) throw Error("EmptyVolume", "cross entropy over empty field");

  LossResult r;
  double total = 0;
  for (std::size_t c = 0; c < C; ++c) {
    total += omega[c] * detail::pairwise_sum(0, M, [&](std::size_t i) {
      double ph = std::clamp(p[c].flat(i), kProbClamp, 1.0 - kProbClamp);
      double qi = q[c].flat(i);
      return qi * std::log(ph) + (1.0 - qi) * std::log(1.0 - ph);
    });
  }
  r.value = -total / static_cast<double>(M);
  for (std::size_t c = 0; c < C; ++c) {
    ImageGrid g(p[c].dims(), p[c].spacing(), p[c].origin(), VoxelKind::intensity);
    for (std::size_t i = 0; i < M; ++i) {
      double pi = p[c].flat(i);
      if (pi < kProbClamp || pi > 1.0 - kProbClamp) {
        g.flat(i) = 0.0;  // clamp active
      } else {
        double qi = q[c].flat(i);
        g.flat(i) = -omega[c] * (qi / pi - (1.0 - qi) / (1.0 - pi)) /
                    static_cast<double>(M);
      }
    }
    r.gradients.push_back(std::move(g));
  }
  return r;
}

/// Soft Dice loss (one class): 1 - 2*sum(p*q) / (sum(p) + sum(q) + eps).
/// Shares the multilabel code path so the C=1, omega=1 reduction is
/// bit-exact.
inline LossResult dice_loss(const ImageGrid& p, const LabelGrid& q) {
  const double one = 1.0;
  return multilabel_dice_loss(std::span(&p, 1), std::span(&q, 1), std::span(&one, 1));
}

/// Binary cross-entropy, mean over voxels, probabilities clamped.
inline LossResult cross_entropy_loss(const ImageGrid& p, const LabelGrid& q) {
  const double one = 1.0;
  return multilabel_cross_entropy_loss(std::span(&p, 1), std::span(&q, 1),
                                       std::span(&one, 1));
}

/// Per-volume MSE between predicted and true signed distance maps, averaged
/// over the batch; gradient w.r.t. each prediction is 2(r - gt)/(M*N).
inline LossResult shape_loss_batch(std::span<const ImageGrid> r,
                                   std::span<const ImageGrid> gt) {
  const std::size_t N = r.size();
  if (N == 0) throw Error("EmptyBatch", "shape loss over empty batch");
  if (gt.size() != N) throw Error("ShapeMismatch", "batch size mismatch");
  LossResult out;
  double total = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (!r[i].same_dims(gt[i])) throw Error("ShapeMismatch", "sdm dims differ");
    const std::size_t M = r[i].size();
    total += detail::pairwise_sum(0, M, [&](std::size_t j) {
      double d = r[i].flat(j) - gt[i].flat(j);
      return d * d;
    }) / static_cast<double>(M);
    ImageGrid g(r[i].dims(), r[i].spacing(), r[i].origin(), VoxelKind::intensity);
    for (std::size_t j = 0; j < M; ++j)
      g.flat(j) = 2.0 * (r[i].flat(j) - gt[i].flat(j)) /
                  (static_cast<double>(M) * static_cast<double>(N));
    out.gradients.push_back(std::move(g));
  }
  out.value = total / static_cast<double>(N);
  return out;
}

inline LossResult shape_loss(const ImageGrid& r, const ImageGrid& gt) {
  return shape_loss_batch(std::span(&r, 1), std::span(&gt, 1));
}

/// value = sum w_i * v_i; gradients are summed fieldwise and require every
/// term to carry the same gradient layout (count and dims).
inline LossResult weighted_sum_loss(std::span<const LossResult> terms,
                                    std::span<const double> weights) {
  if (terms.empty() || terms.size() != weights.size())
    throw Error("LengthMismatch", "terms and weights must be equal-length and non-empty");
  for (const auto& t : terms) {
    if (t.gradients.size() != terms[0].gradients.size())
      throw Error("GradShapeMismatch", "terms carry different gradient layouts");
    for (std::size_t g = 0; g < t.gradients.size(); ++g)
      if (!t.gradients[g].same_dims(terms[0].gradients[g]))
        throw Error("GradShapeMismatch", "gradient dims differ between terms");
  }
  LossResult out;
  out.value = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) out.value += weights[i] * terms[i].value;
  for (std::size_t g = 0; g < terms[0].gradients.size(); ++g) {
    const ImageGrid& proto = terms[0].gradients[g];
    ImageGrid acc(proto.dims(), proto.spacing(), proto.origin(), VoxelKind::intensity);
    for (std::size_t i = 0; i < terms.size(); ++i)
      for (std::size_t j = 0; j < acc.size(); ++j)
        acc.flat(j) += weights[i] * terms[i].gradients[g].flat(j);
    out.gradients.push_back(std::move(acc));
  }
  return out;
}

/// Weighted Dice + cross-entropy combination on one prediction.
inline LossResult seg_loss(const ImageGrid& p, const LabelGrid& q, double mu1,
                           double mu2) {
  LossResult terms[2] = {dice_loss(p, q), cross_entropy_loss(p, q)};
  double w[2] = {mu1, mu2};
  return weighted_sum_loss(terms, w);
}

// ---------------------------------------------------------------------------
// Finite-difference verification harness
// ---------------------------------------------------------------------------

struct GradCheckReport {
  double max_rel_err = 0;
  std::size_t samples = 0;
};

/// Central finite differences at `trials` randomly sampled voxels of one
/// input instance, against the analytic gradient. loss_fn maps the (mutable)
/// input fields to a LossResult whose gradients align with `inputs`.
/// Per-sample relative error is the symmetric form
/// |fd - an| / max(|fd| + |an|, 1e-12); the report keeps the maximum.
template <typename LossFn>
GradCheckReport gradient_check(LossFn&& loss_fn, std::vector<ImageGrid> inputs,
                               double step, int trials, SequenceRng& rng) {
  if (step <= 0) throw Error("BadStep", "finite-difference step must be > 0");
  LossResult base = loss_fn(inputs);
  if (base.gradients.size() != inputs.size())
    throw Error("GradShapeMismatch", "loss gradients do not align with inputs");
  GradCheckReport rep;
  for (int t = 0; t < trials; ++t) {
    std::size_t f = static_cast<std::size_t>(rng.below(inputs.size()));
    std::size_t v = static_cast<std::size_t>(rng.below(inputs[f].size()));
    double saved = inputs[f].flat(v);
    inputs[f].flat(v) = saved + step;
    double up = loss_fn(inputs).value;
    inputs[f].flat(v) = saved - step;
    double down = loss_fn(inputs).value;
    inputs[f].flat(v) = saved;
    double fd = (up - down) / (2.0 * step);
    double an = base.gradients[f].flat(v);
    double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-12);
    rep.max_rel_err = std::max(rep.max_rel_err, rel);
    ++rep.samples;
  }
  return rep;
}

}  // namespace voxelseg
