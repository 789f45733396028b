// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <cmath>

#include "voxflow/tape.hpp"

namespace voxflow {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
inline MapMat<T> as_matrix(Tensor<T>& t) {
    return MapMat<T>(t.data.data(), t.rows(), t.cols());
}
template <typename T>
inline CMapMat<T> as_matrix(const Tensor<T>& t) {
    return CMapMat<T>(t.data.data(), t.rows(), t.cols());
}

// ---- elementwise ------------------------------------------------------------

template <typename T>
int add(Tape<T>& tape, int a, int b) {
    const auto& va = tape.value(a);
    VF_CHECK(va.same_shape(tape.value(b)), "add: shape mismatch");
    Tensor<T> out = va;
    for (size_t i = 0; i < out.data.size(); ++i) out[i] += tape.value(b)[i];
    return tape.make(std::move(out), [a, b](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad(a);
        auto& gb = t.grad(b);
        for (size_t i = 0; i < g.data.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

template <typename T>
int sub(Tape<T>& tape, int a, int b) {
    const auto& va = tape.value(a);
    VF_CHECK(va.same_shape(tape.value(b)), "sub: shape mismatch");
    Tensor<T> out = va;
    for (size_t i = 0; i < out.data.size(); ++i) out[i] -= tape.value(b)[i];
    return tape.make(std::move(out), [a, b](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad(a);
        auto& gb = t.grad(b);
        for (size_t i = 0; i < g.data.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

template <typename T>
int mul(Tape<T>& tape, int a, int b) {
    const auto& va = tape.value(a);
    VF_CHECK(va.same_shape(tape.value(b)), "mul: shape mismatch");
    Tensor<T> out = va;
    for (size_t i = 0; i < out.data.size(); ++i) out[i] *= tape.value(b)[i];
    return tape.make(std::move(out), [a, b](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const auto& va = t.value(a);
        const auto& vb = t.value(b);
        auto& ga = t.grad(a);
        auto& gb = t.grad(b);
        for (size_t i = 0; i < g.data.size(); ++i) {
            ga[i] += g[i] * vb[i];
            gb[i] += g[i] * va[i];
        }
    });
}

template <typename T>
int scale(Tape<T>& tape, int a, T s) {
    Tensor<T> out = tape.value(a);
    for (auto& v : out.data) v *= s;
    return tape.make(std::move(out), [a, s](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        auto& ga = t.grad(a);
        for (size_t i = 0; i < g.data.size(); ++i) ga[i] += g[i] * s;
    });
}

template <typename T>
int silu(Tape<T>& tape, int a) {
    Tensor<T> out = tape.value(a);
    for (auto& v : out.data) {
        const T s = T(1) / (T(1) + std::exp(-v));
        v = v * s;
    }
    return tape.make(std::move(out), [a](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const auto& x = t.value(a);
        auto& ga = t.grad(a);
        for (size_t i = 0; i < g.data.size(); ++i) {
            const T s = T(1) / (T(1) + std::exp(-x[i]));
            ga[i] += g[i] * (s + x[i] * s * (T(1) - s));
        }
    });
}

template <typename T>
int relu(Tape<T>& tape, int a) {
    Tensor<T> out = tape.value(a);
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    return tape.make(std::move(out), [a](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const auto& x = t.value(a);
        auto& ga = t.grad(a);
        for (size_t i = 0; i < g.data.size(); ++i)
            if (x[i] > T(0)) ga[i] += g[i];
    });
}

// out = s * tanh(x); the TSDF head uses s = 3.
template <typename T>
int tanh_scale(Tape<T>& tape, int a, T s) {
    Tensor<T> out = tape.value(a);
    for (auto& v : out.data) v = s * std::tanh(v);
    return tape.make(std::move(out), [a, s](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const auto& x = t.value(a);
        auto& ga = t.grad(a);
        for (size_t i = 0; i < g.data.size(); ++i) {
            const T th = std::tanh(x[i]);
            ga[i] += g[i] * s * (T(1) - th * th);
        }
    });
}

// X = mu + exp(0.5 * logvar) * eps, with eps a fixed noise draw.
template <typename T>
int reparameterize(Tape<T>& tape, int mu, int logvar, const Tensor<T>& eps) {
    const auto& vm = tape.value(mu);
    VF_CHECK(vm.same_shape(tape.value(logvar)) && vm.same_shape(eps),
             "reparameterize: shape mismatch");
    Tensor<T> out = vm;
    const auto& lv = tape.value(logvar);
    for (size_t i = 0; i < out.data.size(); ++i)
        out[i] += std::exp(T(0.5) * lv[i]) * eps[i];
    auto eps_saved = std::make_shared<Tensor<T>>(eps);
    return tape.make(std::move(out), [mu, logvar, eps_saved](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const auto& lv = t.value(logvar);
        auto& gm = t.grad(mu);
        auto& gl = t.grad(logvar);
        for (size_t i = 0; i < g.data.size(); ++i) {
            gm[i] += g[i];
            gl[i] += g[i] * T(0.5) * std::exp(T(0.5) * lv[i]) * (*eps_saved)[i];
        }
    });
}

// ---- matrix -----------------------------------------------------------------

// out = x @ w + b, x:(N,Cin) w:(Cin,Cout) b:(Cout) (pass b < 0 for no bias).
template <typename T>
int linear(Tape<T>& tape, int x, int w, int b = -1) {
    const auto& vx = tape.value(x);
    const auto& vw = tape.value(w);
    VF_CHECK(vw.shape.size() == 2 && vx.cols() == vw.shape[0],
             "linear: weight shape mismatch, x cols " << vx.cols());
    const int64_t n = vx.rows(), cout = vw.shape[1];
    Tensor<T> out({n, cout});
    as_matrix(out).noalias() = as_matrix(vx) * as_matrix(vw);
    if (b >= 0) {
        const auto& vb = tape.value(b);
        VF_CHECK(vb.numel() == cout, "linear: bias size mismatch");
        auto m = as_matrix(out);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < cout; ++j) m(i, j) += vb[static_cast<size_t>(j)];
    }
    return tape.make(std::move(out), [x, w, b](Tape<T>& t, int self) {
        const auto g = as_matrix(t.grad(self));
        const auto vx = as_matrix(t.value(x));
        const auto vw = as_matrix(t.value(w));
        as_matrix(t.grad(x)).noalias() += g * vw.transpose();
        as_matrix(t.grad(w)).noalias() += vx.transpose() * g;
        if (b >= 0) {
            auto& gb = t.grad(b);
            for (int64_t i = 0; i < g.rows(); ++i)
                for (int64_t j = 0; j < g.cols(); ++j)
                    gb[static_cast<size_t>(j)] += g(i, j);
        }
    });
}

template <typename T>
int concat_cols(Tape<T>& tape, const std::vector<int>& xs) {
    VF_CHECK(!xs.empty(), "concat_cols: empty input list");
    const int64_t n = tape.value(xs[0]).rows();
    int64_t ctot = 0;
    for (int id : xs) {
        VF_CHECK(tape.value(id).rows() == n, "concat_cols: row mismatch");
        ctot += tape.value(id).cols();
    }
    Tensor<T> out({n, ctot});
    int64_t off = 0;
    for (int id : xs) {
        const auto& v = tape.value(id);
        const int64_t c = v.cols();
        for (int64_t i = 0; i < n; ++i)
            std::copy(v.data.begin() + i * c, v.data.begin() + (i + 1) * c,
                      out.data.begin() + i * ctot + off);
        off += c;
    }
    auto ids = std::make_shared<std::vector<int>>(xs);
    return tape.make(std::move(out), [ids, ctot](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const int64_t n = g.rows();
        int64_t off = 0;
        for (int id : *ids) {
            auto& gi = t.grad(id);
            const int64_t c = gi.cols();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < c; ++j) gi.at2(i, j) += g.at2(i, off + j);
            off += c;
        }
    });
}

template <typename T>
int slice_cols(Tape<T>& tape, int x, int64_t c0, int64_t c1) {
    const auto& v = tape.value(x);
    VF_CHECK(0 <= c0 && c0 < c1 && c1 <= v.cols(), "slice_cols: bad range");
    const int64_t n = v.rows(), c = c1 - c0;
    Tensor<T> out({n, c});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) out.at2(i, j) = v.at2(i, c0 + j);
    return tape.make(std::move(out), [x, c0](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        auto& gx = t.grad(x);
        for (int64_t i = 0; i < g.rows(); ++i)
            for (int64_t j = 0; j < g.cols(); ++j) gx.at2(i, c0 + j) += g.at2(i, j);
    });
}

// out[n,c] = x[n,c] * (1 + s[c]) + b[c]; s and b are (C) or (1,C) nodes.
// This is the AdaGN modulation applied after normalization.
template <typename T>
int film(Tape<T>& tape, int x, int s, int b) {
    const auto& vx = tape.value(x);
    const int64_t c = vx.cols();
    VF_CHECK(tape.value(s).numel() == c && tape.value(b).numel() == c,
             "film: modulation size mismatch");
    Tensor<T> out = vx;
    const auto& vs = tape.value(s);
    const auto& vb = tape.value(b);
    for (int64_t i = 0; i < vx.rows(); ++i)
        for (int64_t j = 0; j < c; ++j)
            out.at2(i, j) = vx.at2(i, j) * (T(1) + vs[static_cast<size_t>(j)]) +
                            vb[static_cast<size_t>(j)];
    return tape.make(std::move(out), [x, s, b](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const auto& vx = t.value(x);
        const auto& vs = t.value(s);
        auto& gx = t.grad(x);
        auto& gs = t.grad(s);
        auto& gb = t.grad(b);
        const int64_t c = vx.cols();
        for (int64_t i = 0; i < vx.rows(); ++i)
            for (int64_t j = 0; j < c; ++j) {
                const T gij = g.at2(i, j);
                gx.at2(i, j) += gij * (T(1) + vs[static_cast<size_t>(j)]);
                gs[static_cast<size_t>(j)] += gij * vx.at2(i, j);
                gb[static_cast<size_t>(j)] += gij;
            }
    });
}

// Row-wise L2 normalization (normal prediction head).
template <typename T>
int normalize_rows(Tape<T>& tape, int x, T eps = T(1e-8)) {
    const auto& vx = tape.value(x);
    const int64_t n = vx.rows(), c = vx.cols();
    Tensor<T> out = vx;
    for (int64_t i = 0; i < n; ++i) {
        T norm2 = T(0);
        for (int64_t j = 0; j < c; ++j) norm2 += vx.at2(i, j) * vx.at2(i, j);
        const T inv = T(1) / std::max(std::sqrt(norm2), eps);
        for (int64_t j = 0; j < c; ++j) out.at2(i, j) *= inv;
    }
    return tape.make(std::move(out), [x, eps](Tape<T>& t, int self) {
        const auto& g = t.grad(self);
        const auto& vx = t.value(x);
        auto& gx = t.grad(x);
        const int64_t n = vx.rows(), c = vx.cols();
        for (int64_t i = 0; i < n; ++i) {
            T norm2 = T(0), dot = T(0);
            for (int64_t j = 0; j < c; ++j) norm2 += vx.at2(i, j) * vx.at2(i, j);
            const T norm = std::max(std::sqrt(norm2), eps);
            const T inv = T(1) / norm;
            for (int64_t j = 0; j < c; ++j) dot += g.at2(i, j) * vx.at2(i, j);
            for (int64_t j = 0; j < c; ++j)
                gx.at2(i, j) += inv * g.at2(i, j) - vx.at2(i, j) * dot * inv * inv * inv;
        }
    });
}

// Per-grid group normalization: statistics are taken jointly over all rows
// (active voxels) within each channel group, then gamma/beta per channel.
template <typename T>
int group_norm(Tape<T>& tape, int x, int groups, int gamma, int beta, T eps = T(1e-5)) {
    const auto& vx = tape.value(x);
    const int64_t n = vx.rows(), c = vx.cols();
    VF_CHECK(groups > 0 && c % groups == 0,
             "group_norm: channels " << c << " not divisible by groups " << groups);
    VF_CHECK(tape.value(gamma).numel() == c && tape.value(beta).numel() == c,
             "group_norm: gamma/beta size mismatch");
    const int64_t gc = c / groups;
    auto mean = std::make_shared<std::vector<T>>(groups, T(0));
    auto invstd = std::make_shared<std::vector<T>>(groups, T(0));
    for (int64_t g = 0; g < groups; ++g) {
        double sum = 0.0, sq = 0.0;
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = g * gc; j < (g + 1) * gc; ++j) {
                const double v = static_cast<double>(vx.at2(i, j));
                sum += v;
                sq += v * v;
            }
        const double m = n > 0 ? sum / static_cast<double>(n * gc) : 0.0;
        const double var = n > 0 ? sq / static_cast<double>(n * gc) - m * m : 0.0;
        (*mean)[g] = static_cast<T>(m);
        (*invstd)[g] = static_cast<T>(1.0 / std::sqrt(std::max(var, 0.0) + static_cast<double>(eps)));
    }
    Tensor<T> out = vx;
    const auto& vgamma = tape.value(gamma);
    const auto& vbeta = tape.value(beta);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < c; ++j) {
            const int64_t g = j / gc;
            out.at2(i, j) = (vx.at2(i, j) - (*mean)[g]) * (*invstd)[g] *
                                vgamma[static_cast<size_t>(j)] +
                            vbeta[static_cast<size_t>(j)];
        }
    return tape.make(std::move(out), [x, groups, gamma, beta, mean, invstd](Tape<T>& t,
                                                                            int self) {
        const auto& g = t.grad(self);
        const auto& vx = t.value(x);
        const auto& vgamma = t.value(gamma);
        auto& gx = t.grad(x);
        auto& ggamma = t.grad(gamma);
        auto& gbeta = t.grad(beta);
        const int64_t n = vx.rows(), c = vx.cols();
        const int64_t gc = c / groups;
        const T m_count = static_cast<T>(n * gc);
        for (int64_t grp = 0; grp < groups; ++grp) {
            const T mu = (*mean)[grp], is = (*invstd)[grp];
            // accumulate the two reduction terms of the normalization gradient
            T sum_dxhat = T(0), sum_dxhat_xhat = T(0);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = grp * gc; j < (grp + 1) * gc; ++j) {
                    const T xhat = (vx.at2(i, j) - mu) * is;
                    const T dxhat = g.at2(i, j) * vgamma[static_cast<size_t>(j)];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                    ggamma[static_cast<size_t>(j)] += g.at2(i, j) * xhat;
                    gbeta[static_cast<size_t>(j)] += g.at2(i, j);
                }
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = grp * gc; j < (grp + 1) * gc; ++j) {
                    const T xhat = (vx.at2(i, j) - mu) * is;
                    const T dxhat = g.at2(i, j) * vgamma[static_cast<size_t>(j)];
                    gx.at2(i, j) += is * (dxhat - sum_dxhat / m_count -
                                          xhat * sum_dxhat_xhat / m_count);
                }
        }
    });
}

// ---- reductions and losses --------------------------------------------------

template <typename T>
int sum_all(Tape<T>& tape, int x) {
    double s = 0.0;
    for (const T& v : tape.value(x).data) s += static_cast<double>(v);
    return tape.make(Tensor<T>::scalar(static_cast<T>(s)), [x](Tape<T>& t, int self) {
        const T g = t.grad(self)[0];
        auto& gx = t.grad(x);
        for (auto& v : gx.data) v += g;
    });
}

template <typename T>
int mean_all(Tape<T>& tape, int x) {
    const int64_t m = tape.value(x).numel();
    VF_CHECK(m > 0, "mean_all: empty tensor");
    double s = 0.0;
    for (const T& v : tape.value(x).data) s += static_cast<double>(v);
    return tape.make(Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(m))),
                     [x, m](Tape<T>& t, int self) {
                         const T g = t.grad(self)[0] / static_cast<T>(m);
                         auto& gx = t.grad(x);
                         for (auto& v : gx.data) v += g;
                     });
}

template <typename T>
int mse(Tape<T>& tape, int a, int b) {
    const auto& va = tape.value(a);
    VF_CHECK(va.same_shape(tape.value(b)), "mse: shape mismatch");
    const int64_t m = va.numel();
    VF_CHECK(m > 0, "mse: empty tensors");
    double s = 0.0;
    for (size_t i = 0; i < va.data.size(); ++i) {
        const double d = static_cast<double>(va[i]) - static_cast<double>(tape.value(b)[i]);
        s += d * d;
    }
    return tape.make(Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(m))),
                     [a, b, m](Tape<T>& t, int self) {
                         const T g = t.grad(self)[0] * T(2) / static_cast<T>(m);
                         const auto& va = t.value(a);
                         const auto& vb = t.value(b);
                         auto& ga = t.grad(a);
                         auto& gb = t.grad(b);
                         for (size_t i = 0; i < va.data.size(); ++i) {
                             const T d = va[i] - vb[i];
                             ga[i] += g * d;
                             gb[i] -= g * d;
                         }
                     });
}

template <typename T>
int l1(Tape<T>& tape, int a, int b) {
    const auto& va = tape.value(a);
    VF_CHECK(va.same_shape(tape.value(b)), "l1: shape mismatch");
    const int64_t m = va.numel();
    VF_CHECK(m > 0, "l1: empty tensors");
    double s = 0.0;
    for (size_t i = 0; i < va.data.size(); ++i)
        s += std::abs(static_cast<double>(va[i]) - static_cast<double>(tape.value(b)[i]));
    return tape.make(Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(m))),
                     [a, b, m](Tape<T>& t, int self) {
                         const T g = t.grad(self)[0] / static_cast<T>(m);
                         const auto& va = t.value(a);
                         const auto& vb = t.value(b);
                         auto& ga = t.grad(a);
                         auto& gb = t.grad(b);
                         for (size_t i = 0; i < va.data.size(); ++i) {
                             const T d = va[i] - vb[i];
                             const T sg = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                             ga[i] += g * sg;
                             gb[i] -= g * sg;
                         }
                     });
}

// Numerically stable binary cross entropy on logits, mean over elements.
template <typename T>
int bce_logits(Tape<T>& tape, int logits, int targets) {
    const auto& vx = tape.value(logits);
    const auto& vt = tape.value(targets);
    VF_CHECK(vx.same_shape(vt), "bce_logits: shape mismatch");
    const int64_t m = vx.numel();
    VF_CHECK(m > 0, "bce_logits: empty tensors");
    double s = 0.0;
    for (size_t i = 0; i < vx.data.size(); ++i) {
        const double x = static_cast<double>(vx[i]);
        const double t01 = static_cast<double>(vt[i]);
        s += std::max(x, 0.0) - x * t01 + std::log1p(std::exp(-std::abs(x)));
    }
    return tape.make(Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(m))),
                     [logits, targets, m](Tape<T>& t, int self) {
                         const T g = t.grad(self)[0] / static_cast<T>(m);
                         const auto& vx = t.value(logits);
                         const auto& vt = t.value(targets);
                         auto& gx = t.grad(logits);
                         auto& gt = t.grad(targets);
                         for (size_t i = 0; i < vx.data.size(); ++i) {
                             const T sig = T(1) / (T(1) + std::exp(-vx[i]));
                             gx[i] += g * (sig - vt[i]);
                             gt[i] -= g * vx[i];
                         }
                     });
}

// KL(N(mu, sigma^2) || N(0, 1)) = 0.5 * mean(mu^2 + sigma^2 - logvar - 1).
// The per-element mean keeps the term invariant to voxel count.
template <typename T>
int kl_unit_gauss(Tape<T>& tape, int mu, int logvar) {
    const auto& vm = tape.value(mu);
    VF_CHECK(vm.same_shape(tape.value(logvar)), "kl_unit_gauss: shape mismatch");
    const int64_t m = vm.numel();
    VF_CHECK(m > 0, "kl_unit_gauss: empty tensors");
    const auto& lv = tape.value(logvar);
    double s = 0.0;
    for (size_t i = 0; i < vm.data.size(); ++i) {
        const double mu_i = static_cast<double>(vm[i]);
        const double lv_i = static_cast<double>(lv[i]);
        s += 0.5 * (mu_i * mu_i + std::exp(lv_i) - lv_i - 1.0);
    }
    return tape.make(Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(m))),
                     [mu, logvar, m](Tape<T>& t, int self) {
                         const T g = t.grad(self)[0] / static_cast<T>(m);
                         const auto& vm = t.value(mu);
                         const auto& lv = t.value(logvar);
                         auto& gm = t.grad(mu);
                         auto& gl = t.grad(logvar);
                         for (size_t i = 0; i < vm.data.size(); ++i) {
                             gm[i] += g * vm[i];
                             gl[i] += g * T(0.5) * (std::exp(lv[i]) - T(1));
                         }
                     });
}

}  // namespace voxflow
