// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "voxflow/vec.hpp"

namespace voxflow {

struct TriMesh {
    std::vector<Vec3d> vertices;
    std::vector<std::array<int32_t, 3>> triangles;
    std::vector<int32_t> face_labels;  // empty, or one semantic id per triangle

    bool empty() const { return triangles.empty(); }
    size_t face_count() const { return triangles.size(); }

    Vec3d face_normal(size_t f) const;  // unit length, zero for degenerate
    double face_area(size_t f) const;
    double total_area() const;
    std::pair<Vec3d, Vec3d> bounds() const;
    int32_t label_of(size_t f) const {
        return face_labels.empty() ? 0 : face_labels[f];
    }
};

TriMesh load_mesh(const std::string& path);  // dispatches on extension
TriMesh load_obj(const std::string& path);
TriMesh load_ply(const std::string& path);  // ascii or binary_little_endian
void save_obj(const std::string& path, const TriMesh& mesh);

// Drops zero-area triangles and out-of-range indices.
void clean_mesh(TriMesh& mesh, double area_eps = 1e-14);

// Uniform scale + translation: longest AABB side -> `extent`, centered in the
// unit cube at (0.5, 0.5, 0.5).
void normalize_to_unit_cube(TriMesh& mesh, double extent = 0.9);

// True when every edge is shared by exactly two faces (closed 2-manifold up
// to orientation); signed distance uses pseudo-normals only in this case.
bool is_closed_manifold(const TriMesh& mesh);

// Area-uniform surface samples, deterministic per seed.
std::vector<Vec3d> sample_surface(const TriMesh& mesh, size_t n, uint64_t seed);

// Area-weighted point + interpolated normal pairs (used for attribute tests).
struct SurfaceSample {
    Vec3d position;
    Vec3d normal;
    int32_t label;
};
std::vector<SurfaceSample> sample_surface_full(const TriMesh& mesh, size_t n,
                                               uint64_t seed);

}  // namespace voxflow
