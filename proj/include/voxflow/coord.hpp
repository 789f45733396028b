// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <tuple>

namespace voxflow {

// Signed lattice coordinate of a voxel. Components must stay within the
// tree's addressable span of +/-2^20; total order is lexicographic (x, y, z).
struct Coord {
    int32_t x = 0, y = 0, z = 0;

    Coord() = default;
    Coord(int32_t xx, int32_t yy, int32_t zz) : x(xx), y(yy), z(zz) {}

    bool operator==(const Coord& o) const { return x == o.x && y == o.y && z == o.z; }
    bool operator!=(const Coord& o) const { return !(*this == o); }
    bool operator<(const Coord& o) const {
        return std::tie(x, y, z) < std::tie(o.x, o.y, o.z);
    }

    Coord offset(int32_t dx, int32_t dy, int32_t dz) const {
        return {x + dx, y + dy, z + dz};
    }
};

struct CoordHash {
    size_t operator()(const Coord& c) const {
        uint64_t h = (static_cast<uint64_t>(static_cast<uint32_t>(c.x)) << 42) ^
                     (static_cast<uint64_t>(static_cast<uint32_t>(c.y)) << 21) ^
                     static_cast<uint64_t>(static_cast<uint32_t>(c.z));
        h *= 0x9e3779b97f4a7c15ULL;
        return static_cast<size_t>(h ^ (h >> 29));
    }
};

}  // namespace voxflow
