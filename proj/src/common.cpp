// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#include "voxflow/common.hpp"

#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace voxflow {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) {
    g_max_threads = n;
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

int max_threads() {
    if (g_max_threads > 0) return g_max_threads;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return static_cast<int>(std::thread::hardware_concurrency());
#endif
}

}  // namespace voxflow
