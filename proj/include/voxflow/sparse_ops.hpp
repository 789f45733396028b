// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "voxflow/ops.hpp"
#include "voxflow/sparse_maps.hpp"

namespace voxflow {

// Submanifold 3^3 sparse convolution, out(c) = bias + sum_o W[o] . in(c+o).
// Neighbors absent from the input topology contribute zero; dilation for halo
// context is the caller's responsibility. x:(N_in,Cin) w:(27,Cin,Cout) b:(Cout).
template <typename T>
int sparse_conv3(Tape<T>& tape, int x, int w, int b,
                 std::shared_ptr<const KernelMap> km) {
    const auto& vx = tape.value(x);
    const auto& vw = tape.value(w);
    VF_CHECK(vw.shape.size() == 3 && vw.shape[0] == KernelMap::kVolume,
             "sparse_conv3: weights must be (27, Cin, Cout)");
    const int64_t cin = vw.shape[1], cout = vw.shape[2];
    VF_CHECK(vx.rows() == static_cast<int64_t>(km->in_topology->voxel_count()) &&
                 vx.cols() == cin,
             "sparse_conv3: input shape (" << vx.rows() << "," << vx.cols()
                                           << ") does not match topology/weights");
    VF_CHECK(tape.value(b).numel() == cout, "sparse_conv3: bias size mismatch");

    const int64_t n_out = static_cast<int64_t>(km->out_topology->voxel_count());
    Tensor<T> out({n_out, cout});
    {
        const auto& vb = tape.value(b);
        for (int64_t i = 0; i < n_out; ++i)
            for (int64_t j = 0; j < cout; ++j) out.at2(i, j) = vb[static_cast<size_t>(j)];
    }
    auto mo = as_matrix(out);
    const auto mx = as_matrix(vx);
    for (int o = 0; o < KernelMap::kVolume; ++o) {
        const auto& pairs = km->pairs[static_cast<size_t>(o)];
        if (pairs.empty()) continue;
        CMapMat<T> wo(vw.data.data() + static_cast<size_t>(o) * cin * cout, cin, cout);
        const int64_t p = static_cast<int64_t>(pairs.size());
        RowMat<T> gathered(p, cin);
        for (int64_t r = 0; r < p; ++r) gathered.row(r) = mx.row(pairs[r].first);
        RowMat<T> prod = gathered * wo;
        for (int64_t r = 0; r < p; ++r) mo.row(pairs[r].second) += prod.row(r);
    }

    return tape.make(std::move(out), [x, w, b, km](Tape<T>& t, int self) {
        const auto& gout = t.grad(self);
        const auto& vx = t.value(x);
        const auto& vw = t.value(w);
        const int64_t cin = vw.shape[1], cout = vw.shape[2];
        auto& gb = t.grad(b);
        const auto mg = as_matrix(gout);
        for (int64_t i = 0; i < gout.rows(); ++i)
            for (int64_t j = 0; j < cout; ++j) gb[static_cast<size_t>(j)] += mg(i, j);

        auto& gx = t.grad(x);
        auto& gw = t.grad(w);
        auto mgx = as_matrix(gx);
        const auto mx = as_matrix(vx);
        for (int o = 0; o < KernelMap::kVolume; ++o) {
            const auto& pairs = km->pairs[static_cast<size_t>(o)];
            if (pairs.empty()) continue;
            const int64_t p = static_cast<int64_t>(pairs.size());
            CMapMat<T> wo(vw.data.data() + static_cast<size_t>(o) * cin * cout, cin, cout);
            MapMat<T> gwo(gw.data.data() + static_cast<size_t>(o) * cin * cout, cin, cout);
            RowMat<T> gin(p, cin), ggath(p, cout);
            for (int64_t r = 0; r < p; ++r) {
                gin.row(r) = mx.row(pairs[r].first);
                ggath.row(r) = mg.row(pairs[r].second);
            }
            gwo.noalias() += gin.transpose() * ggath;
            RowMat<T> dx = ggath * wo.transpose();
            for (int64_t r = 0; r < p; ++r) mgx.row(pairs[r].first) += dx.row(r);
        }
    });
}

// Per-channel max over active children; gradient routes to the argmax child,
// ties to the lowest linear index.
template <typename T>
int max_pool2(Tape<T>& tape, int x, std::shared_ptr<const PoolMap> pm) {
    const auto& vx = tape.value(x);
    VF_CHECK(vx.rows() == static_cast<int64_t>(pm->fine->voxel_count()),
             "max_pool2: input rows do not match fine topology");
    const int64_t c = vx.cols();
    const int64_t n_out = static_cast<int64_t>(pm->coarse->voxel_count());
    Tensor<T> out({n_out, c});
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n_out * c));
    for (int64_t j = 0; j < n_out; ++j) {
        const auto& slots = pm->children[static_cast<size_t>(j)];
        for (int64_t ch = 0; ch < c; ++ch) {
            T best{};
            int64_t best_idx = -1;
            for (int k = 0; k < 8; ++k) {
                if (slots[k] < 0) continue;
                const T v = vx.at2(slots[k], ch);
                if (best_idx < 0 || v > best) {
                    best = v;
                    best_idx = slots[k];
                }
            }
            out.at2(j, ch) = best;
            (*argmax)[static_cast<size_t>(j * c + ch)] = best_idx;
        }
    }
    return tape.make(std::move(out), [x, argmax, c](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        auto& gx = t.grad(x);
        for (int64_t j = 0; j < g.rows(); ++j)
            for (int64_t ch = 0; ch < c; ++ch) {
                const int64_t src = (*argmax)[static_cast<size_t>(j * c + ch)];
                if (src >= 0) gx.at2(src, ch) += g.at2(j, ch);
            }
    });
}

// Nearest-neighbor upsampling through subdivision; each fine voxel copies its
// parent's feature, gradients sum over children.
template <typename T>
int upsample_subdivide(Tape<T>& tape, int x, std::shared_ptr<const SubdivideMap> sm) {
    const auto& vx = tape.value(x);
    VF_CHECK(vx.rows() == static_cast<int64_t>(sm->coarse->voxel_count()),
             "upsample_subdivide: input rows do not match coarse topology");
    const int64_t c = vx.cols();
    const int64_t n_out = static_cast<int64_t>(sm->fine->voxel_count());
    Tensor<T> out({n_out, c});
    for (int64_t j = 0; j < n_out; ++j) {
        const int64_t p = sm->parent[static_cast<size_t>(j)];
        std::copy(vx.data.begin() + p * c, vx.data.begin() + (p + 1) * c,
                  out.data.begin() + j * c);
    }
    return tape.make(std::move(out), [x, sm, c](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        auto& gx = t.grad(x);
        for (int64_t j = 0; j < g.rows(); ++j) {
            const int64_t p = sm->parent[static_cast<size_t>(j)];
            for (int64_t ch = 0; ch < c; ++ch) gx.at2(p, ch) += g.at2(j, ch);
        }
    });
}

// Zero-fill embedding of features into a super-topology.
template <typename T>
int embed_topology(Tape<T>& tape, int x, std::shared_ptr<const EmbedMap> em) {
    const auto& vx = tape.value(x);
    VF_CHECK(vx.rows() == static_cast<int64_t>(em->from->voxel_count()),
             "embed_topology: input rows do not match source topology");
    const int64_t c = vx.cols();
    const int64_t n_out = static_cast<int64_t>(em->to->voxel_count());
    Tensor<T> out({n_out, c});
    for (int64_t j = 0; j < n_out; ++j) {
        const int64_t src = em->src[static_cast<size_t>(j)];
        if (src >= 0)
            std::copy(vx.data.begin() + src * c, vx.data.begin() + (src + 1) * c,
                      out.data.begin() + j * c);
    }
    return tape.make(std::move(out), [x, em, c](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        auto& gx = t.grad(x);
        for (int64_t j = 0; j < g.rows(); ++j) {
            const int64_t src = em->src[static_cast<size_t>(j)];
            if (src < 0) continue;
            for (int64_t ch = 0; ch < c; ++ch) gx.at2(src, ch) += g.at2(j, ch);
        }
    });
}

// Trilinear sampling of a 1-channel grid feature at precomputed taps.
// Missing taps contribute the clamp value as a constant.
template <typename T>
int trilinear_pull(Tape<T>& tape, int x, std::shared_ptr<const TrilinearMap> tm) {
    const auto& vx = tape.value(x);
    VF_CHECK(vx.cols() == 1 &&
                 vx.rows() == static_cast<int64_t>(tm->grid->voxel_count()),
             "trilinear_pull: expects a 1-channel grid feature");
    const int64_t n = static_cast<int64_t>(tm->taps.size());
    Tensor<T> out({n, 1});
    for (int64_t p = 0; p < n; ++p) {
        double acc = 0.0;
        for (int k = 0; k < 8; ++k) {
            const int64_t i = tm->taps[static_cast<size_t>(p)][k];
            const double w = tm->weights[static_cast<size_t>(p)][k];
            acc += w * (i >= 0 ? static_cast<double>(vx[static_cast<size_t>(i)])
                               : tm->outside_value);
        }
        out[static_cast<size_t>(p)] = static_cast<T>(acc);
    }
    return tape.make(std::move(out), [x, tm](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        auto& gx = t.grad(x);
        for (size_t p = 0; p < tm->taps.size(); ++p)
            for (int k = 0; k < 8; ++k) {
                const int64_t i = tm->taps[p][k];
                if (i >= 0)
                    gx[static_cast<size_t>(i)] +=
                        g[p] * static_cast<T>(tm->weights[p][k]);
            }
    });
}

// Per-voxel positional encoding: centers normalized to [-1,1]^3 by the grid
// resolution, then [p, sin(2^k pi p), cos(2^k pi p)] for k < frequencies.
template <typename T>
Tensor<T> positional_encoding(const IndexGrid& grid, int frequencies, int resolution) {
    VF_CHECK(frequencies >= 0, "positional_encoding: negative frequency count");
    VF_CHECK(resolution > 0, "positional_encoding: resolution must be positive");
    const int64_t n = static_cast<int64_t>(grid.voxel_count());
    const int64_t c = 3 + 6 * static_cast<int64_t>(frequencies);
    Tensor<T> out({n, c});
    constexpr double kPi = 3.14159265358979323846;
    grid.for_each([&](uint64_t i, Coord cc) {
        const double p[3] = {(cc.x + 0.5) / resolution * 2.0 - 1.0,
                             (cc.y + 0.5) / resolution * 2.0 - 1.0,
                             (cc.z + 0.5) / resolution * 2.0 - 1.0};
        T* row = out.data.data() + static_cast<int64_t>(i) * c;
        for (int a = 0; a < 3; ++a) row[a] = static_cast<T>(p[a]);
        for (int k = 0; k < frequencies; ++k) {
            const double f = std::ldexp(kPi, k);  // 2^k * pi
            for (int a = 0; a < 3; ++a) {
                row[3 + 6 * k + a] = static_cast<T>(std::sin(f * p[a]));
                row[3 + 6 * k + 3 + a] = static_cast<T>(std::cos(f * p[a]));
            }
        }
    });
    return out;
}

}  // namespace voxflow
