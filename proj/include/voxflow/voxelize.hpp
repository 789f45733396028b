// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxflow/feature_grid.hpp"
#include "voxflow/mesh.hpp"

namespace voxflow {

// Per-voxel attributes sharing one topology: unit normals (3), one-hot
// semantics (S), and TSDF in voxel units clamped to +/-3.
struct AttributeSet {
    FeatureGrid normals;
    FeatureGrid semantics;
    FeatureGrid tsdf;

    const IndexGridPtr& grid() const { return tsdf.grid; }
    int semantic_channels() const { return static_cast<int>(semantics.channels); }
};

constexpr double kTsdfClamp = 3.0;           // voxel units
constexpr double kSurfaceBand = 0.8660254037844386;  // sqrt(3)/2, in voxels

// Closest point on a triangle and the feature (vertex/edge/face) it lies on;
// feature selects which pseudo-normal decides the distance sign.
struct ClosestPoint {
    Vec3d point;
    double dist2 = 0.0;
    int feature = 6;  // 0,1,2 vertex i; 3,4,5 edge opposite order (01,12,20); 6 face
};
ClosestPoint closest_point_triangle(const Vec3d& p, const Vec3d& a, const Vec3d& b,
                                    const Vec3d& c);

// Voxelizes a mesh at resolution R over the unit cube (the mesh is normalized
// first: longest AABB side -> 0.9, centered). A voxel is active iff its center
// lies within sqrt(3)/2 voxel of the surface. Attributes:
//   normal    area-weighted average of nearby face normals, renormalized
//   semantics one-hot of the nearest face's label
//   tsdf      signed distance at the voxel center in voxel units, clamp +/-3;
//             sign from angle-weighted pseudo-normals (closed manifolds) or
//             the nearest face's normal otherwise
AttributeSet voxelize_mesh(const TriMesh& mesh, int resolution,
                           int semantic_channels = 4);

// Quantizes points to voxel cells; per-point feature rows (may be empty for
// zero channels) are averaged per cell.
FeatureGrid voxelize_points(const std::vector<Vec3d>& points,
                            const std::vector<std::vector<float>>& features,
                            int resolution);

struct TsdfSample {
    double value = kTsdfClamp;
    bool out_of_band = false;
};

// Trilinear interpolation of the stored TSDF at a world-space point; missing
// neighbors substitute the clamp value +3 (outside). Queries with no active
// neighbor at all return the clamp value flagged out-of-band.
TsdfSample tsdf_at(const AttributeSet& attrs, const Vec3d& x);

}  // namespace voxflow
