// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "voxflow/common.hpp"

namespace voxflow {

// Minimal dense nd-array. Rank 1-3 in practice: parameter tensors,
// (N x C) feature matrices, scalars as shape {1}.
template <typename T>
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), T(0));
    }
    Tensor(std::vector<int64_t> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        VF_CHECK(static_cast<int64_t>(data.size()) == numel_of(shape),
                 "tensor data size " << data.size() << " != shape numel " << numel_of(shape));
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }

    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t rows() const { return shape.empty() ? 0 : shape[0]; }
    int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    T& operator[](size_t i) { return data[i]; }
    const T& operator[](size_t i) const { return data[i]; }

    T& at2(int64_t r, int64_t c) { return data[static_cast<size_t>(r * cols() + c)]; }
    const T& at2(int64_t r, int64_t c) const {
        return data[static_cast<size_t>(r * cols() + c)];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }
};

}  // namespace voxflow
