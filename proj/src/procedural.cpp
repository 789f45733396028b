// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#include "voxflow/procedural.hpp"

#include <cmath>

#include "voxflow/common.hpp"
#include "voxflow/rng.hpp"

namespace voxflow {

ShapeFamily parse_shape_family(const std::string& name) {
    if (name == "boxes") return ShapeFamily::kBoxes;
    if (name == "spheres") return ShapeFamily::kSpheres;
    if (name == "box-unions") return ShapeFamily::kBoxUnions;
    if (name == "L-shapes" || name == "l-shapes") return ShapeFamily::kLShapes;
    if (name == "mixed") return ShapeFamily::kMixed;
    throw ContractError("unknown shape family: " + name);
}

std::string shape_family_name(ShapeFamily family) {
    switch (family) {
        case ShapeFamily::kBoxes: return "boxes";
        case ShapeFamily::kSpheres: return "spheres";
        case ShapeFamily::kBoxUnions: return "box-unions";
        case ShapeFamily::kLShapes: return "L-shapes";
        case ShapeFamily::kMixed: return "mixed";
    }
    return "?";
}

namespace {

// Axis-aligned box [lo, hi]; face labels default to the face's axis (0/1/2)
// unless an explicit part label is given.
void append_box(TriMesh& mesh, Vec3d lo, Vec3d hi, int32_t part_label) {
    const int32_t base = static_cast<int32_t>(mesh.vertices.size());
    for (int k = 0; k < 8; ++k)
        mesh.vertices.emplace_back(k & 1 ? hi.x : lo.x, k & 2 ? hi.y : lo.y,
                                   k & 4 ? hi.z : lo.z);
    // two triangles per face, outward winding
    static const int faces[6][4] = {
        {0, 4, 6, 2},  // x = lo
        {1, 3, 7, 5},  // x = hi
        {0, 1, 5, 4},  // y = lo
        {2, 6, 7, 3},  // y = hi
        {0, 2, 3, 1},  // z = lo
        {4, 5, 7, 6},  // z = hi
    };
    static const int face_axis[6] = {0, 0, 1, 1, 2, 2};
    for (int f = 0; f < 6; ++f) {
        const int32_t label = part_label >= 0 ? part_label : face_axis[f];
        mesh.triangles.push_back(
            {base + faces[f][0], base + faces[f][1], base + faces[f][2]});
        mesh.face_labels.push_back(label);
        mesh.triangles.push_back(
            {base + faces[f][0], base + faces[f][2], base + faces[f][3]});
        mesh.face_labels.push_back(label);
    }
}

TriMesh make_box(Rng& rng) {
    TriMesh mesh;
    const Vec3d ext(rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0));
    append_box(mesh, Vec3d(0, 0, 0) - ext * 0.5, ext * 0.5, -1);
    return mesh;
}

// UV sphere with mild anisotropy so the family is not a single shape after
// normalization. Closed manifold by construction.
TriMesh make_sphere(Rng& rng, int segments = 48, int rings = 24) {
    TriMesh mesh;
    const Vec3d radii(rng.uniform(0.7, 1.0), rng.uniform(0.7, 1.0), rng.uniform(0.7, 1.0));
    const double kPi = 3.14159265358979323846;
    mesh.vertices.emplace_back(0, 0, radii.z);   // north pole: index 0
    for (int r = 1; r < rings; ++r) {
        const double theta = kPi * r / rings;
        for (int s = 0; s < segments; ++s) {
            const double phi = 2.0 * kPi * s / segments;
            mesh.vertices.emplace_back(radii.x * std::sin(theta) * std::cos(phi),
                                       radii.y * std::sin(theta) * std::sin(phi),
                                       radii.z * std::cos(theta));
        }
    }
    mesh.vertices.emplace_back(0, 0, -radii.z);  // south pole
    const int32_t south = static_cast<int32_t>(mesh.vertices.size()) - 1;
    auto ring_vertex = [&](int r, int s) {
        return 1 + (r - 1) * segments + (s % segments);
    };
    for (int s = 0; s < segments; ++s) {
        mesh.triangles.push_back({0, ring_vertex(1, s), ring_vertex(1, s + 1)});
        mesh.face_labels.push_back(0);
    }
    for (int r = 1; r < rings - 1; ++r)
        for (int s = 0; s < segments; ++s) {
            const int32_t a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
            const int32_t c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
            mesh.triangles.push_back({a, c, d});
            mesh.face_labels.push_back(0);
            mesh.triangles.push_back({a, d, b});
            mesh.face_labels.push_back(0);
        }
    for (int s = 0; s < segments; ++s) {
        mesh.triangles.push_back({south, ring_vertex(rings - 1, s + 1),
                                  ring_vertex(rings - 1, s)});
        mesh.face_labels.push_back(0);
    }
    return mesh;
}

TriMesh make_box_union(Rng& rng) {
    TriMesh mesh;
    const int parts = 2 + static_cast<int>(rng.uniform_index(3));  // 2..4
    Vec3d first_lo, first_hi;
    for (int p = 0; p < parts; ++p) {
        const Vec3d ext(rng.uniform(0.25, 0.7), rng.uniform(0.25, 0.7),
                        rng.uniform(0.25, 0.7));
        Vec3d center(0, 0, 0);
        if (p > 0) {
            // keep the union connected: center inside the first box
            center = Vec3d(rng.uniform(first_lo.x, first_hi.x),
                           rng.uniform(first_lo.y, first_hi.y),
                           rng.uniform(first_lo.z, first_hi.z));
        }
        const Vec3d lo = center - ext * 0.5, hi = center + ext * 0.5;
        if (p == 0) {
            first_lo = lo;
            first_hi = hi;
        }
        append_box(mesh, lo, hi, p % kProceduralLabels);
    }
    return mesh;
}

TriMesh make_l_shape(Rng& rng) {
    TriMesh mesh;
    // vertical slab plus a perpendicular foot, sharing the origin corner
    const double h = rng.uniform(0.6, 1.0), w = rng.uniform(0.2, 0.45);
    const double foot = rng.uniform(0.5, 0.9), d = rng.uniform(0.3, 0.8);
    append_box(mesh, {0, 0, 0}, {w, d, h}, 0);
    append_box(mesh, {0, 0, 0}, {foot, d, w}, 1);
    return mesh;
}

}  // namespace

std::vector<TriMesh> procedural_dataset(ShapeFamily family, int count, uint64_t seed) {
    VF_CHECK(count >= 1, "procedural_dataset: count must be >= 1");
    std::vector<TriMesh> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        Rng rng(seed, static_cast<uint64_t>(i) + 1);
        ShapeFamily f = family;
        if (family == ShapeFamily::kMixed) {
            static const ShapeFamily cycle[4] = {ShapeFamily::kBoxes, ShapeFamily::kSpheres,
                                                 ShapeFamily::kBoxUnions,
                                                 ShapeFamily::kLShapes};
            f = cycle[i % 4];
        }
        TriMesh mesh;
        switch (f) {
            case ShapeFamily::kBoxes: mesh = make_box(rng); break;
            case ShapeFamily::kSpheres: mesh = make_sphere(rng); break;
            case ShapeFamily::kBoxUnions: mesh = make_box_union(rng); break;
            case ShapeFamily::kLShapes: mesh = make_l_shape(rng); break;
            case ShapeFamily::kMixed: break;  // unreachable
        }
        normalize_to_unit_cube(mesh);
        clean_mesh(mesh);
        out.push_back(std::move(mesh));
    }
    return out;
}

}  // namespace voxflow
