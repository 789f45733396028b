// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#include "voxflow/sparse_maps.hpp"

#include <cmath>

#include "voxflow/common.hpp"

namespace voxflow {

std::shared_ptr<const KernelMap> KernelMap::build(IndexGridPtr in, IndexGridPtr out) {
    VF_CHECK(in && out, "KernelMap: null topology");
    VF_CHECK(in->voxel_size() == out->voxel_size(),
             "KernelMap: voxel_size mismatch " << in->voxel_size() << " vs "
                                               << out->voxel_size());
    auto km = std::make_shared<KernelMap>();
    km->in_topology = in;
    km->out_topology = std::move(out);
    km->out_topology->for_each([&](uint64_t j, Coord c) {
        int o = 0;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz, ++o) {
                    const auto i = in->linear_index_of(c.offset(dx, dy, dz));
                    if (i) {
                        km->pairs[o].emplace_back(static_cast<uint32_t>(*i),
                                                  static_cast<uint32_t>(j));
                    }
                }
    });
    return km;
}

std::shared_ptr<const PoolMap> PoolMap::build(IndexGridPtr fine, IndexGridPtr coarse) {
    VF_CHECK(fine && coarse, "PoolMap: null topology");
    VF_CHECK(coarse->topology_equals(coarsen_topology(*fine)),
             "PoolMap: coarse topology must equal coarsen_topology(fine)");
    auto pm = std::make_shared<PoolMap>();
    pm->fine = std::move(fine);
    pm->coarse = std::move(coarse);
    pm->children.resize(pm->coarse->voxel_count());
    pm->coarse->for_each([&](uint64_t j, Coord c) {
        auto& slots = pm->children[j];
        for (int k = 0; k < 8; ++k) {
            const Coord child(2 * c.x + ((k >> 2) & 1), 2 * c.y + ((k >> 1) & 1),
                              2 * c.z + (k & 1));
            const auto i = pm->fine->linear_index_of(child);
            slots[k] = i ? static_cast<int64_t>(*i) : -1;
        }
    });
    return pm;
}

std::shared_ptr<const SubdivideMap> SubdivideMap::build(IndexGridPtr coarse,
                                                        IndexGridPtr fine) {
    VF_CHECK(coarse && fine, "SubdivideMap: null topology");
    auto sm = std::make_shared<SubdivideMap>();
    sm->coarse = std::move(coarse);
    sm->fine = std::move(fine);
    sm->parent.resize(sm->fine->voxel_count());
    sm->fine->for_each([&](uint64_t j, Coord c) {
        const auto p = sm->coarse->linear_index_of(Coord(c.x >> 1, c.y >> 1, c.z >> 1));
        VF_CHECK(p, "SubdivideMap: fine voxel (" << c.x << "," << c.y << "," << c.z
                                                 << ") has no active parent");
        sm->parent[j] = static_cast<uint32_t>(*p);
    });
    return sm;
}

std::shared_ptr<const EmbedMap> EmbedMap::build(IndexGridPtr from, IndexGridPtr to) {
    VF_CHECK(from && to, "EmbedMap: null topology");
    auto em = std::make_shared<EmbedMap>();
    em->from = std::move(from);
    em->to = std::move(to);
    em->src.resize(em->to->voxel_count());
    uint64_t found = 0;
    em->to->for_each([&](uint64_t j, Coord c) {
        const auto i = em->from->linear_index_of(c);
        em->src[j] = i ? static_cast<int64_t>(*i) : -1;
        if (i) ++found;
    });
    VF_CHECK(found == em->from->voxel_count(),
             "EmbedMap: source topology is not a subset of the target ("
                 << found << " of " << em->from->voxel_count() << " voxels found)");
    return em;
}

std::shared_ptr<const TrilinearMap> TrilinearMap::build(IndexGridPtr grid,
                                                        const std::vector<Vec3d>& points,
                                                        double outside_value) {
    VF_CHECK(grid, "TrilinearMap: null grid");
    auto tm = std::make_shared<TrilinearMap>();
    tm->grid = std::move(grid);
    tm->outside_value = outside_value;
    tm->taps.resize(points.size());
    tm->weights.resize(points.size());
    tm->out_of_band.assign(points.size(), 0);
    const double vs = tm->grid->voxel_size();
    const Vec3d org = tm->grid->origin();
    for (size_t p = 0; p < points.size(); ++p) {
        // position in voxel units relative to voxel centers
        const Vec3d q((points[p].x - org.x) / vs - 0.5, (points[p].y - org.y) / vs - 0.5,
                      (points[p].z - org.z) / vs - 0.5);
        const Coord c0(static_cast<int32_t>(std::floor(q.x)),
                       static_cast<int32_t>(std::floor(q.y)),
                       static_cast<int32_t>(std::floor(q.z)));
        const Vec3d f(q.x - c0.x, q.y - c0.y, q.z - c0.z);
        bool any = false;
        for (int k = 0; k < 8; ++k) {
            const int dx = (k >> 2) & 1, dy = (k >> 1) & 1, dz = k & 1;
            const double w = (dx ? f.x : 1.0 - f.x) * (dy ? f.y : 1.0 - f.y) *
                             (dz ? f.z : 1.0 - f.z);
            const auto i = tm->grid->linear_index_of(c0.offset(dx, dy, dz));
            tm->taps[p][k] = i ? static_cast<int64_t>(*i) : -1;
            tm->weights[p][k] = w;
            any = any || i.has_value();
        }
        if (!any) tm->out_of_band[p] = 1;
    }
    return tm;
}

std::shared_ptr<const KernelMap> MapCache::conv(const IndexGridPtr& in,
                                                const IndexGridPtr& out) {
    const uint64_t k = key(in.get(), out.get());
    auto it = conv_.find(k);
    if (it != conv_.end()) return it->second;
    auto km = KernelMap::build(in, out);
    conv_.emplace(k, km);
    return km;
}

std::shared_ptr<const PoolMap> MapCache::pool(const IndexGridPtr& fine,
                                              const IndexGridPtr& coarse) {
    const uint64_t k = key(fine.get(), coarse.get());
    auto it = pool_.find(k);
    if (it != pool_.end()) return it->second;
    auto pm = PoolMap::build(fine, coarse);
    pool_.emplace(k, pm);
    return pm;
}

std::shared_ptr<const SubdivideMap> MapCache::subdivide(const IndexGridPtr& coarse,
                                                        const IndexGridPtr& fine) {
    const uint64_t k = key(coarse.get(), fine.get());
    auto it = subdivide_.find(k);
    if (it != subdivide_.end()) return it->second;
    auto sm = SubdivideMap::build(coarse, fine);
    subdivide_.emplace(k, sm);
    return sm;
}

std::shared_ptr<const EmbedMap> MapCache::embed(const IndexGridPtr& from,
                                                const IndexGridPtr& to) {
    const uint64_t k = key(from.get(), to.get());
    auto it = embed_.find(k);
    if (it != embed_.end()) return it->second;
    auto em = EmbedMap::build(from, to);
    embed_.emplace(k, em);
    return em;
}

void MapCache::clear() {
    conv_.clear();
    pool_.clear();
    subdivide_.clear();
    embed_.clear();
}

}  // namespace voxflow
