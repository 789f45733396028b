// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#include "voxflow/voxelize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "voxflow/common.hpp"

namespace voxflow {

ClosestPoint closest_point_triangle(const Vec3d& p, const Vec3d& a, const Vec3d& b,
                                    const Vec3d& c) {
    // Ericson, Real-Time Collision Detection, 5.1.5, with feature tracking.
    const Vec3d ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    ClosestPoint out;
    if (d1 <= 0.0 && d2 <= 0.0) {
        out.point = a;
        out.feature = 0;
    } else {
        const Vec3d bp = p - b;
        const double d3 = ab.dot(bp), d4 = ac.dot(bp);
        if (d3 >= 0.0 && d4 <= d3) {
            out.point = b;
            out.feature = 1;
        } else {
            const double vc = d1 * d4 - d3 * d2;
            if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
                const double v = d1 / (d1 - d3);
                out.point = a + ab * v;
                out.feature = 3;  // edge ab
            } else {
                const Vec3d cp = p - c;
                const double d5 = ab.dot(cp), d6 = ac.dot(cp);
                if (d6 >= 0.0 && d5 <= d6) {
                    out.point = c;
                    out.feature = 2;
                } else {
                    const double vb = d5 * d2 - d1 * d6;
                    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
                        const double w = d2 / (d2 - d6);
                        out.point = a + ac * w;
                        out.feature = 5;  // edge ca
                    } else {
                        const double va = d3 * d6 - d5 * d4;
                        if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
                            const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
                            out.point = b + (c - b) * w;
                            out.feature = 4;  // edge bc
                        } else {
                            const double denom = 1.0 / (va + vb + vc);
                            const double v = vb * denom, w = vc * denom;
                            out.point = a + ab * v + ac * w;
                            out.feature = 6;  // interior
                        }
                    }
                }
            }
        }
    }
    out.dist2 = (p - out.point).norm2();
    return out;
}

namespace {

struct VoxelAcc {
    double best_d2 = 1e30;
    int32_t best_tri = -1;
    Vec3d best_point;
    int best_feature = 6;
    Vec3d normal_sum;
};

struct PseudoNormals {
    std::vector<Vec3d> vertex;                          // angle-weighted
    std::map<std::pair<int32_t, int32_t>, Vec3d> edge;  // face-normal sums
};

PseudoNormals build_pseudo_normals(const TriMesh& mesh) {
    PseudoNormals pn;
    pn.vertex.assign(mesh.vertices.size(), Vec3d());
    for (size_t f = 0; f < mesh.triangles.size(); ++f) {
        const auto& t = mesh.triangles[f];
        const Vec3d n = mesh.face_normal(f);
        for (int k = 0; k < 3; ++k) {
            const Vec3d& v0 = mesh.vertices[t[k]];
            const Vec3d e1 = (mesh.vertices[t[(k + 1) % 3]] - v0).normalized();
            const Vec3d e2 = (mesh.vertices[t[(k + 2) % 3]] - v0).normalized();
            const double angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
            pn.vertex[t[k]] += n * angle;
            const int32_t a = t[k], b = t[(k + 1) % 3];
            pn.edge[{std::min(a, b), std::max(a, b)}] += n;
        }
    }
    return pn;
}

Vec3d feature_normal(const TriMesh& mesh, const PseudoNormals& pn, size_t tri,
                     int feature) {
    const auto& t = mesh.triangles[tri];
    if (feature < 3) return pn.vertex[t[feature]];
    if (feature < 6) {
        const int32_t a = t[feature - 3], b = t[(feature - 2) % 3];
        const auto it = pn.edge.find({std::min(a, b), std::max(a, b)});
        if (it != pn.edge.end()) return it->second;
    }
    return mesh.face_normal(tri);
}

}  // namespace

AttributeSet voxelize_mesh(const TriMesh& input, int resolution, int semantic_channels) {
    VF_CHECK(!input.empty(), "voxelize_mesh: empty mesh");
    VF_CHECK(resolution >= 2, "voxelize_mesh: resolution must be >= 2");
    TriMesh mesh = input;
    clean_mesh(mesh);
    normalize_to_unit_cube(mesh);

    const double vs = 1.0 / resolution;
    const double band = kSurfaceBand * vs;
    const double band2 = band * band;
    const bool closed = is_closed_manifold(mesh);
    const PseudoNormals pn = build_pseudo_normals(mesh);

    std::unordered_map<Coord, VoxelAcc, CoordHash> acc;
    acc.reserve(static_cast<size_t>(resolution) * resolution * 4);
    for (size_t f = 0; f < mesh.triangles.size(); ++f) {
        const auto& t = mesh.triangles[f];
        const Vec3d &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]],
                    &c = mesh.vertices[t[2]];
        const Vec3d n = mesh.face_normal(f);
        const double area = mesh.face_area(f);
        Vec3d lo(std::min({a.x, b.x, c.x}), std::min({a.y, b.y, c.y}),
                 std::min({a.z, b.z, c.z}));
        Vec3d hi(std::max({a.x, b.x, c.x}), std::max({a.y, b.y, c.y}),
                 std::max({a.z, b.z, c.z}));
        // voxel index range whose centers may fall within the band
        const auto lo_of = [&](double v) {
            return std::max(0, static_cast<int>(std::floor((v - band) / vs - 0.5)));
        };
        const auto hi_of = [&](double v) {
            return std::min(resolution - 1,
                            static_cast<int>(std::ceil((v + band) / vs - 0.5)));
        };
        for (int x = lo_of(lo.x); x <= hi_of(hi.x); ++x)
            for (int y = lo_of(lo.y); y <= hi_of(hi.y); ++y)
                for (int z = lo_of(lo.z); z <= hi_of(hi.z); ++z) {
                    const Vec3d center((x + 0.5) * vs, (y + 0.5) * vs, (z + 0.5) * vs);
                    const ClosestPoint cpt = closest_point_triangle(center, a, b, c);
                    if (cpt.dist2 > band2) continue;
                    VoxelAcc& va = acc[Coord(x, y, z)];
                    if (cpt.dist2 < va.best_d2) {  // ties keep the lower face id
                        va.best_d2 = cpt.dist2;
                        va.best_tri = static_cast<int32_t>(f);
                        va.best_point = cpt.point;
                        va.best_feature = cpt.feature;
                    }
                    va.normal_sum += n * area;
                }
    }

    std::vector<Coord> coords;
    coords.reserve(acc.size());
    for (const auto& [coord, va] : acc) coords.push_back(coord);
    auto grid = make_grid(IndexGrid::build_from_coords(coords, vs, {0, 0, 0}));

    AttributeSet attrs;
    attrs.normals = FeatureGrid(grid, 3);
    attrs.semantics = FeatureGrid(grid, semantic_channels);
    attrs.tsdf = FeatureGrid(grid, 1);
    for (const auto& [coord, va] : acc) {
        const auto idx = grid->linear_index_of(coord);
        const uint64_t i = *idx;
        Vec3d normal = va.normal_sum.normalized();
        if (normal.norm2() < 0.25)  // cancellation; fall back to nearest face
            normal = mesh.face_normal(static_cast<size_t>(va.best_tri));
        attrs.normals.at(i, 0) = static_cast<float>(normal.x);
        attrs.normals.at(i, 1) = static_cast<float>(normal.y);
        attrs.normals.at(i, 2) = static_cast<float>(normal.z);

        const int32_t label = mesh.label_of(static_cast<size_t>(va.best_tri));
        if (label >= 0 && label < semantic_channels) attrs.semantics.at(i, label) = 1.f;

        const Vec3d center = grid->voxel_center_world(coord);
        Vec3d sign_normal =
            closed ? feature_normal(mesh, pn, static_cast<size_t>(va.best_tri),
                                    va.best_feature)
                   : mesh.face_normal(static_cast<size_t>(va.best_tri));
        const double sgn = (center - va.best_point).dot(sign_normal) >= 0.0 ? 1.0 : -1.0;
        const double d = sgn * std::sqrt(va.best_d2) / vs;
        attrs.tsdf.at(i, 0) = static_cast<float>(std::clamp(d, -kTsdfClamp, kTsdfClamp));
    }
    return attrs;
}

FeatureGrid voxelize_points(const std::vector<Vec3d>& points,
                            const std::vector<std::vector<float>>& features,
                            int resolution) {
    VF_CHECK(!points.empty(), "voxelize_points: empty input");
    VF_CHECK(resolution >= 1, "voxelize_points: resolution must be >= 1");
    const size_t channels = features.empty() ? 0 : features[0].size();
    VF_CHECK(features.empty() || features.size() == points.size(),
             "voxelize_points: features must be empty or one row per point");
    const double vs = 1.0 / resolution;

    struct CellAcc {
        std::vector<double> sum;
        uint64_t count = 0;
    };
    std::unordered_map<Coord, CellAcc, CoordHash> cells;
    for (size_t p = 0; p < points.size(); ++p) {
        const Coord c(static_cast<int32_t>(std::floor(points[p].x / vs)),
                      static_cast<int32_t>(std::floor(points[p].y / vs)),
                      static_cast<int32_t>(std::floor(points[p].z / vs)));
        CellAcc& cell = cells[c];
        if (cell.sum.empty()) cell.sum.assign(channels, 0.0);
        for (size_t k = 0; k < channels; ++k) cell.sum[k] += features[p][k];
        ++cell.count;
    }
    std::vector<Coord> coords;
    coords.reserve(cells.size());
    for (const auto& [coord, cell] : cells) coords.push_back(coord);
    auto grid = make_grid(IndexGrid::build_from_coords(coords, vs, {0, 0, 0}));
    FeatureGrid fg(grid, static_cast<int64_t>(channels));
    for (const auto& [coord, cell] : cells) {
        const uint64_t i = *grid->linear_index_of(coord);
        for (size_t k = 0; k < channels; ++k)
            fg.at(i, static_cast<int64_t>(k)) =
                static_cast<float>(cell.sum[k] / static_cast<double>(cell.count));
    }
    return fg;
}

TsdfSample tsdf_at(const AttributeSet& attrs, const Vec3d& x) {
    const IndexGrid& grid = *attrs.grid();
    const double vs = grid.voxel_size();
    const Vec3d org = grid.origin();
    const Vec3d q((x.x - org.x) / vs - 0.5, (x.y - org.y) / vs - 0.5,
                  (x.z - org.z) / vs - 0.5);
    const Coord c0(static_cast<int32_t>(std::floor(q.x)),
                   static_cast<int32_t>(std::floor(q.y)),
                   static_cast<int32_t>(std::floor(q.z)));
    const Vec3d f(q.x - c0.x, q.y - c0.y, q.z - c0.z);
    double acc = 0.0;
    bool any = false;
    for (int k = 0; k < 8; ++k) {
        const int dx = (k >> 2) & 1, dy = (k >> 1) & 1, dz = k & 1;
        const double w =
            (dx ? f.x : 1.0 - f.x) * (dy ? f.y : 1.0 - f.y) * (dz ? f.z : 1.0 - f.z);
        const auto i = grid.linear_index_of(c0.offset(dx, dy, dz));
        acc += w * (i ? static_cast<double>(attrs.tsdf.at(*i, 0)) : kTsdfClamp);
        any = any || i.has_value();
    }
    return {any ? acc : kTsdfClamp, !any};
}

}  // namespace voxflow
