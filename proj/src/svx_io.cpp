// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#include "voxflow/svx_io.hpp"

#include <cstring>
#include <fstream>

namespace voxflow {

namespace {

template <typename T>
void put(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

constexpr uint32_t kVersion = 1;

void write_header(std::ostream& os, const IndexGrid& grid, uint32_t channels) {
    os.write("SVX1", 4);
    put<uint32_t>(os, kVersion);
    put<double>(os, grid.voxel_size());
    put<double>(os, grid.origin().x);
    put<double>(os, grid.origin().y);
    put<double>(os, grid.origin().z);
    put<uint32_t>(os, channels);
    put<uint64_t>(os, grid.voxel_count());
    grid.for_each([&](uint64_t, Coord c) {
        put<int32_t>(os, c.x);
        put<int32_t>(os, c.y);
        put<int32_t>(os, c.z);
    });
}

}  // namespace

void write_svx1(const std::string& path, const FeatureGrid& fg) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_header(os, *fg.grid, static_cast<uint32_t>(fg.channels));
    os.write(reinterpret_cast<const char*>(fg.values.data()),
             static_cast<std::streamsize>(fg.values.size() * sizeof(float)));
    if (!os) throw IoError("write failed: " + path);
}

void write_svx1(const std::string& path, const IndexGrid& grid) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    write_header(os, grid, 0);
    if (!os) throw IoError("write failed: " + path);
}

FeatureGrid read_svx1(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SVX1", 4) != 0)
        throw IoError("not an SVX1 file: " + path);
    const uint32_t version = get<uint32_t>(is);
    if (version != kVersion)
        throw IoError("unsupported SVX1 version " + std::to_string(version));
    const double voxel_size = get<double>(is);
    Vec3d origin;
    origin.x = get<double>(is);
    origin.y = get<double>(is);
    origin.z = get<double>(is);
    const uint32_t channels = get<uint32_t>(is);
    const uint64_t count = get<uint64_t>(is);

    std::vector<Coord> coords(count);
    for (uint64_t i = 0; i < count; ++i) {
        coords[i].x = get<int32_t>(is);
        coords[i].y = get<int32_t>(is);
        coords[i].z = get<int32_t>(is);
    }
    if (!is) throw IoError("truncated SVX1 file: " + path);

    auto grid = make_grid(IndexGrid::build_from_coords(coords, voxel_size, origin));
    if (grid->voxel_count() != count)
        throw IoError("SVX1 file contains duplicate coordinates: " + path);

    FeatureGrid fg(grid, channels);
    if (channels > 0) {
        // Stored rows follow file coord order, which must match index order;
        // remap defensively in case a foreign writer used another order.
        std::vector<float> row(channels);
        for (uint64_t i = 0; i < count; ++i) {
            is.read(reinterpret_cast<char*>(row.data()),
                    static_cast<std::streamsize>(channels * sizeof(float)));
            const auto idx = grid->linear_index_of(coords[i]);
            std::copy(row.begin(), row.end(), fg.row(*idx));
        }
        if (!is) throw IoError("truncated SVX1 payload: " + path);
    }
    return fg;
}

}  // namespace voxflow
