// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "voxflow/feature_grid.hpp"

namespace voxflow {

// Binary grid format "SVX1", little-endian:
//   magic "SVX1", u32 version, f64 voxel_size, f64x3 origin,
//   u32 channel count C, u64 voxel_count,
//   voxel_count * (i32 x, i32 y, i32 z) in linear-index order,
//   voxel_count * C f32 scalars, row-major.
// Readers reject unknown magic or version.
void write_svx1(const std::string& path, const FeatureGrid& fg);
void write_svx1(const std::string& path, const IndexGrid& grid);
FeatureGrid read_svx1(const std::string& path);

}  // namespace voxflow
