// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <vector>

#include "voxflow/feature_grid.hpp"
#include "voxflow/rng.hpp"
#include "voxflow/tape.hpp"

namespace voxflow::testing {

inline std::vector<Coord> random_coords(size_t n, int32_t lo, int32_t hi, uint64_t seed) {
    Rng rng(seed);
    std::vector<Coord> out;
    out.reserve(n);
    const auto range = static_cast<uint64_t>(hi - lo);
    for (size_t i = 0; i < n; ++i)
        out.emplace_back(static_cast<int32_t>(lo + rng.uniform_index(range)),
                         static_cast<int32_t>(lo + rng.uniform_index(range)),
                         static_cast<int32_t>(lo + rng.uniform_index(range)));
    return out;
}

template <typename T>
Tensor<T> random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<T>(rng.gaussian() * scale);
    return t;
}

// Central finite-difference check of every parameter in the store against the
// analytic gradients. loss_fn(true) must run forward+backward (accumulating
// into store grads); loss_fn(false) must return the loss value only.
// Returns the worst relative error; asserts via `fail` on violation.
inline double check_gradients(ParamStore<double>& store,
                              const std::function<double(bool with_grad)>& loss_fn,
                              double h, double tol,
                              const std::function<void(const std::string&)>& fail) {
    store.zero_grad();
    loss_fn(true);
    double worst = 0.0;
    for (auto& [name, p] : store.params()) {
        for (size_t i = 0; i < p.value.size(); ++i) {
            const double saved = p.value[i];
            p.value[i] = saved + h;
            const double fp = loss_fn(false);
            p.value[i] = saved - h;
            const double fm = loss_fn(false);
            p.value[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double analytic = p.grad[i];
            const double err = std::abs(analytic - numeric) /
                               std::max({1.0, std::abs(analytic), std::abs(numeric)});
            worst = std::max(worst, err);
            if (err > tol) {
                std::ostringstream oss;
                oss << "gradient mismatch at " << name << "[" << i << "]: analytic "
                    << analytic << " numeric " << numeric << " rel err " << err;
                fail(oss.str());
                return worst;
            }
        }
    }
    return worst;
}

}  // namespace voxflow::testing
