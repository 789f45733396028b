// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "voxflow/common.hpp"
#include "voxflow/index_grid.hpp"

namespace voxflow {

// Sparse topology plus an N x C feature matrix aligned to the linear index:
// row i holds the features of the voxel with linear index i. Scalar type is
// float for training and double for gradient checking.
template <typename T = float>
struct BasicFeatureGrid {
    IndexGridPtr grid;
    int64_t channels = 0;
    std::vector<T> values;  // row-major, voxel_count x channels

    BasicFeatureGrid() = default;
    BasicFeatureGrid(IndexGridPtr g, int64_t c)
        : grid(std::move(g)), channels(c),
          values(static_cast<size_t>(grid->voxel_count()) * c, T(0)) {}
    BasicFeatureGrid(IndexGridPtr g, int64_t c, std::vector<T> v)
        : grid(std::move(g)), channels(c), values(std::move(v)) {
        VF_CHECK(values.size() == grid->voxel_count() * static_cast<uint64_t>(channels),
                 "feature matrix size " << values.size() << " != voxel_count*channels "
                                        << grid->voxel_count() * channels);
    }

    uint64_t rows() const { return grid ? grid->voxel_count() : 0; }

    T* row(uint64_t i) { return values.data() + i * channels; }
    const T* row(uint64_t i) const { return values.data() + i * channels; }

    T& at(uint64_t i, int64_t c) { return values[i * channels + c]; }
    const T& at(uint64_t i, int64_t c) const { return values[i * channels + c]; }

    MemoryStats memory_stats() const {
        MemoryStats stats = grid->memory_stats();
        stats.value_bytes = values.size() * sizeof(T);
        return stats;
    }
};

using FeatureGrid = BasicFeatureGrid<float>;
using FeatureGridD = BasicFeatureGrid<double>;

// Keeps the voxels with keep[i] != 0; feature rows are copied to the
// re-densified linear indices of the pruned topology.
template <typename T>
BasicFeatureGrid<T> prune(const BasicFeatureGrid<T>& fg, const std::vector<uint8_t>& keep) {
    VF_CHECK(keep.size() == fg.rows(),
             "prune keep length " << keep.size() << " != voxel count " << fg.rows());
    std::vector<Coord> kept;
    kept.reserve(fg.rows());
    fg.grid->for_each([&](uint64_t i, Coord c) {
        if (keep[i]) kept.push_back(c);
    });
    auto new_grid = make_grid(IndexGrid::build_from_coords(kept, fg.grid->voxel_size(),
                                                           fg.grid->origin()));
    BasicFeatureGrid<T> out(new_grid, fg.channels);
    uint64_t next = 0;
    fg.grid->for_each([&](uint64_t i, Coord) {
        if (!keep[i]) return;
        // Kept voxels preserve relative order, so rows pack densely.
        std::copy(fg.row(i), fg.row(i) + fg.channels, out.row(next++));
    });
    return out;
}

}  // namespace voxflow
