// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#include "voxflow/index_grid.hpp"

#include <algorithm>
#include <bit>

#include "voxflow/common.hpp"

namespace voxflow {

namespace {

// Biased (non-negative) voxel coordinates. Valid inputs fit in 21 bits.
struct Biased {
    uint32_t x, y, z;
};

// Valid components lie in [-2^20, 2^20); biased values then fit 21 bits.
inline bool in_span(Coord c) {
    return c.x >= -IndexGrid::kSpanLimit && c.x < IndexGrid::kSpanLimit &&
           c.y >= -IndexGrid::kSpanLimit && c.y < IndexGrid::kSpanLimit &&
           c.z >= -IndexGrid::kSpanLimit && c.z < IndexGrid::kSpanLimit;
}

inline Biased bias(Coord c) {
    return {static_cast<uint32_t>(c.x + IndexGrid::kSpanLimit),
            static_cast<uint32_t>(c.y + IndexGrid::kSpanLimit),
            static_cast<uint32_t>(c.z + IndexGrid::kSpanLimit)};
}

// Sort key ordering voxels by (leaf origin lexicographic, in-leaf z-fastest).
inline uint64_t voxel_key(Biased b) {
    const uint64_t lx = b.x >> 3, ly = b.y >> 3, lz = b.z >> 3;
    const uint64_t bit = ((b.x & 7u) << 6) | ((b.y & 7u) << 3) | (b.z & 7u);
    return (((lx << 18 | ly) << 18 | lz) << 9) | bit;
}

inline uint64_t root_key(Biased b) {
    return (static_cast<uint64_t>(b.x >> 12) << 20) |
           (static_cast<uint64_t>(b.y >> 12) << 10) |
           static_cast<uint64_t>(b.z >> 12);
}

inline int node1_bit(Biased b) {
    return static_cast<int>((((b.x >> 7) & 31u) << 10) | (((b.y >> 7) & 31u) << 5) |
                            ((b.z >> 7) & 31u));
}

inline int node2_bit(Biased b) {
    return static_cast<int>((((b.x >> 3) & 15u) << 8) | (((b.y >> 3) & 15u) << 4) |
                            ((b.z >> 3) & 15u));
}

inline int leaf_bit(Biased b) {
    return static_cast<int>(((b.x & 7u) << 6) | ((b.y & 7u) << 3) | (b.z & 7u));
}

template <size_t W>
inline bool mask_test(const std::array<uint64_t, W>& mask, int bit) {
    return (mask[bit >> 6] >> (bit & 63)) & 1u;
}

template <size_t W>
inline void mask_set(std::array<uint64_t, W>& mask, int bit) {
    mask[bit >> 6] |= uint64_t(1) << (bit & 63);
}

template <size_t W>
inline uint32_t mask_rank(const std::array<uint64_t, W>& mask,
                          const std::array<uint16_t, W>& rank, int bit) {
    const int w = bit >> 6;
    return rank[w] +
           std::popcount(mask[w] & ((uint64_t(1) << (bit & 63)) - 1));
}

template <size_t W>
inline void fill_rank(const std::array<uint64_t, W>& mask,
                      std::array<uint16_t, W>& rank) {
    uint32_t total = 0;
    for (size_t w = 0; w < W; ++w) {
        rank[w] = static_cast<uint16_t>(total);
        total += std::popcount(mask[w]);
    }
}

// Fixed accounting model for the root hash map.
constexpr uint64_t kRootOverheadBytes = 64;
constexpr uint64_t kRootEntryBytes = 12;  // packed key + node id

}  // namespace

IndexGrid IndexGrid::build_from_coords(const std::vector<Coord>& coords,
                                       double voxel_size, Vec3d origin) {
    VF_CHECK(voxel_size > 0.0, "voxel_size must be positive, got " << voxel_size);

    std::vector<uint64_t> keys;
    keys.reserve(coords.size());
    for (const Coord& c : coords) {
        VF_CHECK_RANGE(in_span(c), "coordinate (" << c.x << "," << c.y << "," << c.z
                                                  << ") outside addressable span +/-"
                                                  << kSpanLimit);
        keys.push_back(voxel_key(bias(c)));
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    IndexGrid grid;
    grid.voxel_size_ = voxel_size;
    grid.origin_ = origin;
    grid.voxel_count_ = keys.size();

    // Leaves, grouped by the upper 54 key bits.
    uint64_t base = 0;
    for (size_t i = 0; i < keys.size();) {
        const uint64_t leaf_key = keys[i] >> 9;
        Leaf leaf;
        leaf.origin = Coord(
            static_cast<int32_t>((leaf_key >> 36) << 3) - kSpanLimit,
            static_cast<int32_t>(((leaf_key >> 18) & 0x3ffff) << 3) - kSpanLimit,
            static_cast<int32_t>((leaf_key & 0x3ffff) << 3) - kSpanLimit);
        leaf.base_index = base;
        size_t j = i;
        for (; j < keys.size() && (keys[j] >> 9) == leaf_key; ++j) {
            mask_set(leaf.mask, static_cast<int>(keys[j] & 511));
        }
        fill_rank(leaf.mask, leaf.rank);
        base += j - i;
        grid.leaves_.push_back(std::move(leaf));
        i = j;
    }

    // Internal level 2: group leaves under 128-span nodes, children in bit order.
    {
        std::vector<std::pair<uint64_t, uint32_t>> entries;  // (group key | bit, leaf id)
        entries.reserve(grid.leaves_.size());
        for (uint32_t li = 0; li < grid.leaves_.size(); ++li) {
            const Biased b = bias(grid.leaves_[li].origin);
            const uint64_t gx = b.x >> 7, gy = b.y >> 7, gz = b.z >> 7;
            const uint64_t group = (gx << 28) | (gy << 14) | gz;
            entries.emplace_back((group << 12) | node2_bit(b), li);
        }
        std::sort(entries.begin(), entries.end());
        for (size_t i = 0; i < entries.size();) {
            const uint64_t group = entries[i].first >> 12;
            Node2 node;
            node.origin = Coord(static_cast<int32_t>((group >> 28) << 7) - kSpanLimit,
                                static_cast<int32_t>(((group >> 14) & 0x3fff) << 7) - kSpanLimit,
                                static_cast<int32_t>((group & 0x3fff) << 7) - kSpanLimit);
            size_t j = i;
            for (; j < entries.size() && (entries[j].first >> 12) == group; ++j) {
                mask_set(node.mask, static_cast<int>(entries[j].first & 0xfff));
                node.children.push_back(entries[j].second);
            }
            fill_rank(node.mask, node.rank);
            grid.node2s_.push_back(std::move(node));
            i = j;
        }
    }

    // Internal level 1: group 128-span nodes under 4096-span nodes.
    {
        std::vector<std::pair<uint64_t, uint32_t>> entries;
        entries.reserve(grid.node2s_.size());
        for (uint32_t ni = 0; ni < grid.node2s_.size(); ++ni) {
            const Biased b = bias(grid.node2s_[ni].origin);
            const uint64_t group = root_key(b);
            entries.emplace_back((group << 15) | node1_bit(b), ni);
        }
        std::sort(entries.begin(), entries.end());
        for (size_t i = 0; i < entries.size();) {
            const uint64_t group = entries[i].first >> 15;
            Node1 node;
            node.origin = Coord(static_cast<int32_t>((group >> 20) << 12) - kSpanLimit,
                                static_cast<int32_t>(((group >> 10) & 0x3ff) << 12) - kSpanLimit,
                                static_cast<int32_t>((group & 0x3ff) << 12) - kSpanLimit);
            size_t j = i;
            for (; j < entries.size() && (entries[j].first >> 15) == group; ++j) {
                mask_set(node.mask, static_cast<int>(entries[j].first & 0x7fff));
                node.children.push_back(entries[j].second);
            }
            fill_rank(node.mask, node.rank);
            grid.root_.emplace(group, static_cast<uint32_t>(grid.node1s_.size()));
            grid.node1s_.push_back(std::move(node));
            i = j;
        }
    }

    return grid;
}

IndexGrid IndexGrid::dense_box(Coord lo, Coord hi, double voxel_size, Vec3d origin) {
    VF_CHECK(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z,
             "dense_box requires lo < hi per axis");
    std::vector<Coord> coords;
    coords.reserve(static_cast<size_t>(hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z));
    for (int32_t x = lo.x; x < hi.x; ++x)
        for (int32_t y = lo.y; y < hi.y; ++y)
            for (int32_t z = lo.z; z < hi.z; ++z) coords.emplace_back(x, y, z);
    return build_from_coords(coords, voxel_size, origin);
}

const IndexGrid::Leaf* IndexGrid::find_leaf(Coord c) const {
    if (!in_span(c)) return nullptr;
    const Biased b = bias(c);
    auto it = root_.find(root_key(b));
    if (it == root_.end()) return nullptr;
    const Node1& n1 = node1s_[it->second];
    const int b1 = node1_bit(b);
    if (!mask_test(n1.mask, b1)) return nullptr;
    const Node2& n2 = node2s_[n1.children[mask_rank(n1.mask, n1.rank, b1)]];
    const int b2 = node2_bit(b);
    if (!mask_test(n2.mask, b2)) return nullptr;
    return &leaves_[n2.children[mask_rank(n2.mask, n2.rank, b2)]];
}

bool IndexGrid::is_active(Coord c) const {
    const Leaf* leaf = find_leaf(c);
    return leaf && mask_test(leaf->mask, leaf_bit(bias(c)));
}

std::optional<uint64_t> IndexGrid::linear_index_of(Coord c) const {
    const Leaf* leaf = find_leaf(c);
    if (!leaf) return std::nullopt;
    const int bit = leaf_bit(bias(c));
    if (!mask_test(leaf->mask, bit)) return std::nullopt;
    return leaf->base_index + mask_rank(leaf->mask, leaf->rank, bit);
}

std::vector<Coord> IndexGrid::coords() const {
    std::vector<Coord> out;
    out.reserve(voxel_count_);
    for_each([&](uint64_t, Coord c) { out.push_back(c); });
    return out;
}

std::optional<std::pair<Coord, Coord>> IndexGrid::active_bounds() const {
    if (empty()) return std::nullopt;
    Coord lo(INT32_MAX, INT32_MAX, INT32_MAX), hi(INT32_MIN, INT32_MIN, INT32_MIN);
    for_each([&](uint64_t, Coord c) {
        lo.x = std::min(lo.x, c.x); lo.y = std::min(lo.y, c.y); lo.z = std::min(lo.z, c.z);
        hi.x = std::max(hi.x, c.x); hi.y = std::max(hi.y, c.y); hi.z = std::max(hi.z, c.z);
    });
    return std::make_pair(lo, hi);
}

bool IndexGrid::topology_equals(const IndexGrid& other) const {
    if (voxel_count_ != other.voxel_count_ || leaves_.size() != other.leaves_.size())
        return false;
    for (size_t i = 0; i < leaves_.size(); ++i) {
        if (!(leaves_[i].origin == other.leaves_[i].origin) ||
            leaves_[i].mask != other.leaves_[i].mask)
            return false;
    }
    return true;
}

bool IndexGrid::same_lattice(const IndexGrid& other) const {
    return voxel_size_ == other.voxel_size_ && origin_ == other.origin_;
}

MemoryStats IndexGrid::memory_stats() const {
    MemoryStats stats;
    stats.topology_bytes = kRootOverheadBytes + root_.size() * kRootEntryBytes;
    for (const Node1& n : node1s_) {
        stats.topology_bytes += 12 + sizeof(n.mask) + n.children.size() * 4;
        stats.index_bytes += sizeof(n.rank);
    }
    for (const Node2& n : node2s_) {
        stats.topology_bytes += 12 + sizeof(n.mask) + n.children.size() * 4;
        stats.index_bytes += sizeof(n.rank);
    }
    for (const Leaf& leaf : leaves_) {
        stats.topology_bytes += 12 + sizeof(leaf.mask);
        stats.index_bytes += sizeof(leaf.rank) + sizeof(leaf.base_index);
    }
    if (voxel_count_ > 0) {
        stats.bytes_per_active_voxel =
            static_cast<double>(stats.topology_bytes + stats.index_bytes) /
            static_cast<double>(voxel_count_);
    }
    return stats;
}

IndexGrid dilate(const IndexGrid& grid, int radius) {
    VF_CHECK(radius == 1, "dilate supports radius 1 only, got " << radius);
    std::vector<Coord> out;
    out.reserve(grid.voxel_count() * 27);
    grid.for_each([&](uint64_t, Coord c) {
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz)
                    out.push_back(c.offset(dx, dy, dz));
    });
    return IndexGrid::build_from_coords(out, grid.voxel_size(), grid.origin());
}

IndexGrid coarsen_topology(const IndexGrid& grid, int factor) {
    VF_CHECK(factor == 2, "coarsen_topology supports factor 2 only, got " << factor);
    std::vector<Coord> out;
    out.reserve(grid.voxel_count());
    grid.for_each([&](uint64_t, Coord c) {
        out.emplace_back(c.x >> 1, c.y >> 1, c.z >> 1);
    });
    return IndexGrid::build_from_coords(out, grid.voxel_size() * 2.0, grid.origin());
}

IndexGrid subdivide_topology(const IndexGrid& grid, const std::vector<uint8_t>& mask) {
    VF_CHECK(mask.size() == grid.voxel_count(),
             "subdivide mask length " << mask.size() << " != voxel count "
                                      << grid.voxel_count());
    std::vector<Coord> out;
    grid.for_each([&](uint64_t i, Coord c) {
        if (!mask[i]) return;
        for (int k = 0; k < 8; ++k)
            out.emplace_back(2 * c.x + ((k >> 2) & 1), 2 * c.y + ((k >> 1) & 1),
                             2 * c.z + (k & 1));
    });
    return IndexGrid::build_from_coords(out, grid.voxel_size() * 0.5, grid.origin());
}

IndexGrid subdivide_topology_octants(const IndexGrid& grid,
                                     const std::vector<uint8_t>& octant_mask) {
    VF_CHECK(octant_mask.size() == grid.voxel_count(),
             "subdivide octant mask length " << octant_mask.size()
                                             << " != voxel count " << grid.voxel_count());
    std::vector<Coord> out;
    grid.for_each([&](uint64_t i, Coord c) {
        const uint8_t m = octant_mask[i];
        for (int k = 0; k < 8; ++k) {
            if (m & (1u << k))
                out.emplace_back(2 * c.x + ((k >> 2) & 1), 2 * c.y + ((k >> 1) & 1),
                                 2 * c.z + (k & 1));
        }
    });
    return IndexGrid::build_from_coords(out, grid.voxel_size() * 0.5, grid.origin());
}

}  // namespace voxflow
