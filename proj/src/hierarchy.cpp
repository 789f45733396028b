// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#include "voxflow/hierarchy.hpp"

#include <cmath>

#include "voxflow/common.hpp"

namespace voxflow {

AttributeSet coarsen_attributes(const AttributeSet& fine) {
    const IndexGrid& fg = *fine.grid();
    auto coarse = make_grid(coarsen_topology(fg));
    const int s = fine.semantic_channels();

    AttributeSet out;
    out.normals = FeatureGrid(coarse, 3);
    out.semantics = FeatureGrid(coarse, s);
    out.tsdf = FeatureGrid(coarse, 1);

    std::vector<Vec3f> normal_sum(coarse->voxel_count());
    std::vector<float> tsdf_sum(coarse->voxel_count(), 0.f);
    std::vector<uint32_t> count(coarse->voxel_count(), 0);
    std::vector<uint32_t> votes(coarse->voxel_count() * static_cast<size_t>(s), 0);

    fg.for_each([&](uint64_t i, Coord c) {
        const uint64_t j = *coarse->linear_index_of(Coord(c.x >> 1, c.y >> 1, c.z >> 1));
        normal_sum[j] += Vec3f(fine.normals.at(i, 0), fine.normals.at(i, 1),
                               fine.normals.at(i, 2));
        tsdf_sum[j] += fine.tsdf.at(i, 0);
        ++count[j];
        // child's label: argmax of its one-hot row, ties to the smallest id
        int best = 0;
        float best_v = fine.semantics.at(i, 0);
        for (int k = 1; k < s; ++k)
            if (fine.semantics.at(i, k) > best_v) {
                best_v = fine.semantics.at(i, k);
                best = k;
            }
        ++votes[j * s + static_cast<size_t>(best)];
    });

    for (uint64_t j = 0; j < coarse->voxel_count(); ++j) {
        const float inv = 1.f / static_cast<float>(count[j]);
        Vec3f n = normal_sum[j] * inv;
        const float len = n.norm();
        if (len > 1e-6f) {
            n = n * (1.f / len);
        } else {
            n = Vec3f(0.f, 0.f, 1.f);  // cancellation fallback
        }
        out.normals.at(j, 0) = n.x;
        out.normals.at(j, 1) = n.y;
        out.normals.at(j, 2) = n.z;
        out.tsdf.at(j, 0) = tsdf_sum[j] * inv;
        uint32_t best_votes = 0;
        int best = 0;
        for (int k = 0; k < s; ++k) {
            const uint32_t v = votes[j * s + static_cast<size_t>(k)];
            if (v > best_votes) {  // ties keep the smaller id
                best_votes = v;
                best = k;
            }
        }
        out.semantics.at(j, best) = 1.f;
    }
    return out;
}

VoxelHierarchy build_hierarchy(const AttributeSet& fine,
                               const std::vector<int>& resolutions) {
    VF_CHECK(!resolutions.empty(), "build_hierarchy: empty resolution chain");
    const double vs = fine.grid()->voxel_size();
    const int fine_res = static_cast<int>(std::lround(1.0 / vs));
    VF_CHECK(resolutions.back() == fine_res,
             "build_hierarchy: last resolution " << resolutions.back()
                                                 << " != fine resolution " << fine_res);
    for (size_t l = 1; l < resolutions.size(); ++l) {
        const int a = resolutions[l - 1], b = resolutions[l];
        VF_CHECK(a > 0 && b > a && b % a == 0 && ((b / a) & (b / a - 1)) == 0,
                 "build_hierarchy: resolutions must be increasing power-of-two "
                 "multiples, got "
                     << a << " -> " << b);
    }

    VoxelHierarchy h;
    h.levels.resize(resolutions.size());
    h.levels.back() = {fine_res, fine};
    AttributeSet current = fine;
    int current_res = fine_res;
    for (size_t l = resolutions.size() - 1; l-- > 0;) {
        while (current_res > resolutions[l]) {
            current = coarsen_attributes(current);
            current_res /= 2;
        }
        h.levels[l] = {current_res, current};
    }
    return h;
}

bool check_containment(const IndexGrid& coarse, const IndexGrid& fine, int log2_factor) {
    bool ok = true;
    fine.for_each([&](uint64_t, Coord c) {
        if (!ok) return;
        if (!coarse.is_active(
                Coord(c.x >> log2_factor, c.y >> log2_factor, c.z >> log2_factor)))
            ok = false;
    });
    return ok;
}

bool check_containment(const VoxelHierarchy& h) {
    for (size_t l = 1; l < h.levels.size(); ++l) {
        const int factor = h.levels[l].resolution / h.levels[l - 1].resolution;
        const int k = static_cast<int>(std::lround(std::log2(factor)));
        if (!check_containment(*h.levels[l - 1].grid(), *h.levels[l].grid(), k))
            return false;
    }
    return true;
}

}  // namespace voxflow
