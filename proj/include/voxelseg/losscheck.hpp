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

// Gradient verification harness: runs central finite differences against the
// analytic gradient of every loss, over freshly sampled random instances.
// Probabilities are sampled in [0.05, 0.95] so no clamp region is touched;
// SDM instances keep |r - gt| >= 0.05 per voxel so the quadratic check is not
// dominated by floating-point cancellation.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "voxelseg/losses.hpp"
#include "voxelseg/rng.hpp"
#include "voxelseg/volume.hpp"

namespace voxelseg {

struct LossCheckEntry {
  std::string name;
  double max_rel_err = 0;
  double threshold = 0;
  bool pass = false;
};

struct LossCheckReport {
  std::vector<LossCheckEntry> entries;
  bool all_pass = true;
};

namespace detail {

inline ImageGrid random_prob_field(SequenceRng& rng, Index3 dims) {
  ImageGrid g(dims, Spacing::isotropic(1.0), {}, VoxelKind::probability);
  for (std::size_t i = 0; i < g.size(); ++i) g.flat(i) = rng.uniform(0.05, 0.95);
  return g;
}

inline LabelGrid random_binary_field(SequenceRng& rng, Index3 dims) {
  LabelGrid g(dims, Spacing::isotropic(1.0), {}, VoxelKind::label);
  for (std::size_t i = 0; i < g.size(); ++i)
    g.flat(i) = rng.uniform() < 0.5 ? 0 : 1;
  return g;
}

}  // namespace detail

/// Runs `trials` random instances per loss (default 4^3 fields, 8 sampled
/// voxels each) and reports the worst relative error per loss.
inline LossCheckReport run_losscheck(int trials = 50, std::uint64_t seed = 0,
                                     double step = 1e-3) {
  const Index3 dims{4, 4, 4};
  const int samples = 8;
  SequenceRng rng(seed, /*stream=*/7);
  LossCheckReport report;

  auto add = [&](const std::string& name, double threshold, auto&& make_instance) {
    double worst = 0;
    for (int t = 0; t < trials; ++t) {
      auto [inputs, fn] = make_instance();
      auto rep = gradient_check(fn, std::move(inputs), step, samples, rng);
      worst = std::max(worst, rep.max_rel_err);
    }
    report.entries.push_back({name, worst, threshold, worst < threshold});
    report.all_pass = report.all_pass && worst < threshold;
  };

  using Inputs = std::vector<ImageGrid>;
  using Fn = std::function<LossResult(const Inputs&)>;

  add("dice", 1e-4, [&] {
    Inputs in{detail::random_prob_field(rng, dims)};
    auto q = std::make_shared<LabelGrid>(detail::random_binary_field(rng, dims));
    Fn fn = [q](const Inputs& v) { return dice_loss(v[0], *q); };
    return std::pair{std::move(in), std::move(fn)};
  });

  add("cross_entropy", 1e-4, [&] {
    Inputs in{detail::random_prob_field(rng, dims)};
    auto q = std::make_shared<LabelGrid>(detail::random_binary_field(rng, dims));
    Fn fn = [q](const Inputs& v) { return cross_entropy_loss(v[0], *q); };
    return std::pair{std::move(in), std::move(fn)};
  });

  add("shape", 1e-7, [&] {
    ImageGrid r(dims, Spacing::isotropic(1.0), {}, VoxelKind::distance);
    auto gt = std::make_shared<ImageGrid>(r);
    for (std::size_t i = 0; i < r.size(); ++i) {
      r.flat(i) = rng.uniform(-3.0, 3.0);
      double delta = rng.uniform(0.05, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      gt->flat(i) = r.flat(i) + delta;
    }
    Inputs in{std::move(r)};
    Fn fn = [gt](const Inputs& v) { return shape_loss(v[0], *gt); };
    return std::pair{std::move(in), std::move(fn)};
  });

  const std::vector<double> omega{1.0, 0.7, 1.3};

  add("multilabel_dice", 1e-4, [&] {
    Inputs in;
    auto q = std::make_shared<std::vector<LabelGrid>>();
    for (int c = 0; c < 3; ++c) {
      in.push_back(detail::random_prob_field(rng, dims));
      q->push_back(detail::random_binary_field(rng, dims));
    }
    Fn fn = [q, omega](const Inputs& v) {
      return multilabel_dice_loss(v, *q, omega);
    };
    return std::pair{std::move(in), std::move(fn)};
  });

  add("multilabel_cross_entropy", 1e-4, [&] {
    Inputs in;
    auto q = std::make_shared<std::vector<LabelGrid>>();
    for (int c = 0; c < 3; ++c) {
      in.push_back(detail::random_prob_field(rng, dims));
      q->push_back(detail::random_binary_field(rng, dims));
    }
    Fn fn = [q, omega](const Inputs& v) {
      return multilabel_cross_entropy_loss(v, *q, omega);
    };
    return std::pair{std::move(in), std::move(fn)};
  });

  add("seg_dice_plus_ce", 1e-4, [&] {
    Inputs in{detail::random_prob_field(rng, dims)};
    auto q = std::make_shared<LabelGrid>(detail::random_binary_field(rng, dims));
    Fn fn = [q](const Inputs& v) { return seg_loss(v[0], *q, 0.5, 0.5); };
    return std::pair{std::move(in), std::move(fn)};
  });

  return report;
}

inline nlohmann::json losscheck_report_to_json(const LossCheckReport& r) {
  nlohmann::json losses = nlohmann::json::array();
  for (const auto& e : r.entries)
    losses.push_back({{"name", e.name},
                      {"max_rel_err", e.max_rel_err},
                      {"threshold", e.threshold},
                      {"pass", e.pass}});
  return nlohmann::json{{"losses", losses}, {"all_pass", r.all_pass}};
}

}  // namespace voxelseg
