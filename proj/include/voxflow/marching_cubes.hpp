// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxflow/voxelize.hpp"

namespace voxflow {

// Marching cubes over the stored TSDF. Cells span the centers of 2x2x2 voxel
// blocks and are polygonized only when all 8 corner voxels are active, so the
// surface is watertight wherever the active shell is at least two voxels
// thick. A field with no zero crossings yields an empty mesh.
TriMesh extract_mesh(const FeatureGrid& tsdf);
TriMesh extract_mesh(const AttributeSet& attrs);

}  // namespace voxflow
