// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "voxflow/mesh.hpp"

namespace voxflow {

enum class ShapeFamily { kBoxes, kSpheres, kBoxUnions, kLShapes, kMixed };

ShapeFamily parse_shape_family(const std::string& name);
std::string shape_family_name(ShapeFamily family);

// Deterministic per (family, seed); shapes are normalized to the unit cube.
// Face labels encode parts (multi-box families) or face axis (boxes).
std::vector<TriMesh> procedural_dataset(ShapeFamily family, int count, uint64_t seed);

// Semantic palette used by the procedural families.
constexpr int kProceduralLabels = 4;

}  // namespace voxflow
