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

#include <cstdint>
#include <vector>

#include "voxelseg/volume.hpp"

namespace voxelseg {

/// 6-connected component labeling of a binary mask. Components are numbered
/// 1..count in scan order of their first voxel.
inline std::pair<LabelGrid, int> connected_components_6(const MaskGrid& mask) {
  LabelGrid labels(mask.dims(), mask.spacing(), mask.origin(), VoxelKind::label, 0);
  int count = 0;
  std::vector<Index3> stack;
  for (int z = 0; z < mask.nz(); ++z)
    for (int y = 0; y < mask.ny(); ++y)
      for (int x = 0; x < mask.nx(); ++x) {
        if (!mask(x, y, z) || labels(x, y, z)) continue;
        ++count;
        if (count > 65535) throw Error("TooManyComponents", "labels must fit in u16");
        stack.assign(1, {x, y, z});
        labels(x, y, z) = static_cast<std::uint16_t>(count);
        while (!stack.empty()) {
          Index3 p = stack.back();
          stack.pop_back();
          const Index3 nbrs[6] = {{p.x - 1, p.y, p.z}, {p.x + 1, p.y, p.z},
                                  {p.x, p.y - 1, p.z}, {p.x, p.y + 1, p.z},
                                  {p.x, p.y, p.z - 1}, {p.x, p.y, p.z + 1}};
          for (const Index3& n : nbrs) {
            if (mask.contains(n) && mask.at(n) && !labels.at(n)) {
              labels.at(n) = static_cast<std::uint16_t>(count);
              stack.push_back(n);
            }
          }
        }
      }
  return {std::move(labels), count};
}

}  // namespace voxelseg
