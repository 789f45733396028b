// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <memory>
#include <unordered_map>
#include <vector>

#include "voxflow/index_grid.hpp"
#include "voxflow/vec.hpp"

namespace voxflow {

// Gather/scatter pairs for a 3^3 stencil: out(c) reads in(c + offset).
// Offset index o = ((dx+1)*3 + (dy+1))*3 + (dz+1). Within one offset each
// input and each output index appears at most once, so scatter is race-free.
struct KernelMap {
    static constexpr int kVolume = 27;

    IndexGridPtr in_topology;
    IndexGridPtr out_topology;
    std::array<std::vector<std::pair<uint32_t, uint32_t>>, kVolume> pairs;  // (in, out)

    static std::shared_ptr<const KernelMap> build(IndexGridPtr in, IndexGridPtr out);
};

// 2x max-pool support: per coarse voxel, the linear indices of its up to 8
// fine children (-1 when absent). Requires coarse == coarsen_topology(fine).
struct PoolMap {
    IndexGridPtr fine;
    IndexGridPtr coarse;
    std::vector<std::array<int64_t, 8>> children;

    static std::shared_ptr<const PoolMap> build(IndexGridPtr fine, IndexGridPtr coarse);
};

// Nearest-neighbor subdivision upsampling: per fine voxel, its parent's
// linear index. Every fine voxel must have an active parent.
struct SubdivideMap {
    IndexGridPtr coarse;
    IndexGridPtr fine;
    std::vector<uint32_t> parent;

    static std::shared_ptr<const SubdivideMap> build(IndexGridPtr coarse, IndexGridPtr fine);
};

// Copies features onto a super-topology, zero-filling voxels absent from the
// source. Used for early dilation halos and the dense level-1 bottleneck.
struct EmbedMap {
    IndexGridPtr from;
    IndexGridPtr to;
    std::vector<int64_t> src;  // per output voxel: source index or -1

    static std::shared_ptr<const EmbedMap> build(IndexGridPtr from, IndexGridPtr to);
};

// Trilinear sampling taps at arbitrary world-space points over a 1-channel
// grid. Missing neighbors substitute `outside_value` (TSDF clamp +3).
struct TrilinearMap {
    IndexGridPtr grid;
    double outside_value = 3.0;
    // per point: 8 (linear index or -1) taps and their weights
    std::vector<std::array<int64_t, 8>> taps;
    std::vector<std::array<double, 8>> weights;
    std::vector<uint8_t> out_of_band;  // 1 when no tap found any active voxel

    static std::shared_ptr<const TrilinearMap> build(IndexGridPtr grid,
                                                     const std::vector<Vec3d>& points,
                                                     double outside_value = 3.0);
};

// Forward-pass construction cache; map identity is keyed by grid pointers,
// which stay stable because each map holds strong references.
class MapCache {
  public:
    std::shared_ptr<const KernelMap> conv(const IndexGridPtr& in, const IndexGridPtr& out);
    std::shared_ptr<const PoolMap> pool(const IndexGridPtr& fine, const IndexGridPtr& coarse);
    std::shared_ptr<const SubdivideMap> subdivide(const IndexGridPtr& coarse,
                                                  const IndexGridPtr& fine);
    std::shared_ptr<const EmbedMap> embed(const IndexGridPtr& from, const IndexGridPtr& to);
    void clear();

  private:
    static uint64_t key(const void* a, const void* b) {
        return (reinterpret_cast<uintptr_t>(a) * 0x9e3779b97f4a7c15ULL) ^
               reinterpret_cast<uintptr_t>(b);
    }
    std::unordered_map<uint64_t, std::shared_ptr<const KernelMap>> conv_;
    std::unordered_map<uint64_t, std::shared_ptr<const PoolMap>> pool_;
    std::unordered_map<uint64_t, std::shared_ptr<const SubdivideMap>> subdivide_;
    std::unordered_map<uint64_t, std::shared_ptr<const EmbedMap>> embed_;
};

}  // namespace voxflow
