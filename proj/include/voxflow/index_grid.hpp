// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "voxflow/coord.hpp"
#include "voxflow/vec.hpp"

namespace voxflow {

struct MemoryStats {
    uint64_t topology_bytes = 0;  // node origins, bitmasks, child arrays, root map
    uint64_t index_bytes = 0;     // leaf base indices and rank tables
    uint64_t value_bytes = 0;     // feature matrix payload (zero for bare grids)
    double bytes_per_active_voxel = 0.0;  // (topology + index) / voxel_count
};

// Sparse voxel topology stored as a four-level B+-tree-like structure:
// a hash-map root over top nodes with 32^3 branching, internal nodes with
// 16^3 branching, and leaf nodes of 8^3 voxels with a 512-bit active mask.
// Child pointers are compact arrays addressed through presence bitmasks
// with per-word rank tables for O(1) descent.
//
// Grids are immutable after construction. Every active voxel has a stable
// linear index, dense in [0, voxel_count), ordered by (leaf origin
// lexicographic, in-leaf offset z-fastest). Safe for concurrent readers.
class IndexGrid {
  public:
    static constexpr int32_t kSpanLimit = 1 << 20;

    struct Leaf {
        Coord origin;                    // multiple of 8 per axis
        std::array<uint64_t, 8> mask{};  // bit ((x&7)<<6 | (y&7)<<3 | (z&7))
        std::array<uint16_t, 8> rank{};  // prefix popcounts per word
        uint64_t base_index = 0;
    };

    struct Node2 {                        // 16^3 children, span 128
        Coord origin;
        std::array<uint64_t, 64> mask{};
        std::array<uint16_t, 64> rank{};
        std::vector<uint32_t> children;   // leaf ids, in child-bit order
    };

    struct Node1 {                        // 32^3 children, span 4096
        Coord origin;
        std::array<uint64_t, 512> mask{};
        std::array<uint16_t, 512> rank{};
        std::vector<uint32_t> children;   // Node2 ids, in child-bit order
    };

    IndexGrid() = default;

    // Deduplicates and sorts; deterministic for any permutation of coords.
    // Throws RangeError if any component is outside +/-kSpanLimit.
    static IndexGrid build_from_coords(const std::vector<Coord>& coords,
                                       double voxel_size = 1.0,
                                       Vec3d origin = {0, 0, 0});

    // Fully active box [lo, hi), inclusive-exclusive per axis.
    static IndexGrid dense_box(Coord lo, Coord hi, double voxel_size = 1.0,
                               Vec3d origin = {0, 0, 0});

    bool is_active(Coord c) const;
    std::optional<uint64_t> linear_index_of(Coord c) const;

    uint64_t voxel_count() const { return voxel_count_; }
    bool empty() const { return voxel_count_ == 0; }
    double voxel_size() const { return voxel_size_; }
    const Vec3d& origin() const { return origin_; }

    Vec3d voxel_center_world(Coord c) const {
        return origin_ + Vec3d(c.x + 0.5, c.y + 0.5, c.z + 0.5) * voxel_size_;
    }

    // Visits every active voxel in linear-index order.
    template <typename Fn>  // Fn(uint64_t index, Coord c)
    void for_each(Fn&& fn) const {
        for (const Leaf& leaf : leaves_) {
            uint64_t idx = leaf.base_index;
            for (int w = 0; w < 8; ++w) {
                uint64_t bits = leaf.mask[w];
                while (bits) {
                    const int b = w * 64 + std::countr_zero(bits);
                    fn(idx++, Coord(leaf.origin.x + (b >> 6),
                                    leaf.origin.y + ((b >> 3) & 7),
                                    leaf.origin.z + (b & 7)));
                    bits &= bits - 1;
                }
            }
        }
    }

    std::vector<Coord> coords() const;

    // Inclusive bounds of the active set; nullopt when empty.
    std::optional<std::pair<Coord, Coord>> active_bounds() const;

    bool topology_equals(const IndexGrid& other) const;
    bool same_lattice(const IndexGrid& other) const;

    MemoryStats memory_stats() const;

    const std::vector<Leaf>& leaves() const { return leaves_; }

  private:
    friend class GridBuilder;

    double voxel_size_ = 1.0;
    Vec3d origin_{0, 0, 0};
    uint64_t voxel_count_ = 0;
    std::vector<Node1> node1s_;
    std::vector<Node2> node2s_;
    std::vector<Leaf> leaves_;
    std::unordered_map<uint64_t, uint32_t> root_;

    const Leaf* find_leaf(Coord c) const;
};

using IndexGridPtr = std::shared_ptr<const IndexGrid>;

inline IndexGridPtr make_grid(IndexGrid g) {
    return std::make_shared<const IndexGrid>(std::move(g));
}

// Minkowski sum of the active set with the 3^3 neighborhood.
IndexGrid dilate(const IndexGrid& grid, int radius = 1);

// Coarse voxel (x/2, y/2, z/2) active iff any of its 8 children is active;
// coarse voxel_size is twice the input's.
IndexGrid coarsen_topology(const IndexGrid& grid, int factor = 2);

// Each masked voxel spawns all 8 octants at half the voxel size.
IndexGrid subdivide_topology(const IndexGrid& grid, const std::vector<uint8_t>& mask);

// Per-voxel octant selection: bit k of mask[i] spawns octant
// (2x + (k>>2 & 1), 2y + (k>>1 & 1), 2z + (k & 1)).
IndexGrid subdivide_topology_octants(const IndexGrid& grid,
                                     const std::vector<uint8_t>& octant_mask);

}  // namespace voxflow
