// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxflow/voxelize.hpp"

namespace voxflow {

struct HierarchyLevel {
    int resolution = 0;
    AttributeSet attrs;

    const IndexGridPtr& grid() const { return attrs.grid(); }
};

// Ordered coarse -> fine; every active fine voxel has an active ancestor at
// every coarser level (strict containment).
struct VoxelHierarchy {
    std::vector<HierarchyLevel> levels;
};

// Builds the coarser levels of `resolutions` (strictly increasing, each a
// power-of-two multiple of the previous; the last must match the fine input)
// by repeated 2x coarsening. Coarse attributes are child means: normals
// renormalized, tsdf averaged, semantics by majority vote (ties to the
// smallest label id).
VoxelHierarchy build_hierarchy(const AttributeSet& fine,
                               const std::vector<int>& resolutions);

// One 2x coarsening step with attribute averaging.
AttributeSet coarsen_attributes(const AttributeSet& fine);

bool check_containment(const IndexGrid& coarse, const IndexGrid& fine, int log2_factor);
bool check_containment(const VoxelHierarchy& h);

}  // namespace voxflow
