// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_helpers.hpp"
#include "voxflow/sparse_ops.hpp"

using namespace voxflow;
using namespace voxflow::testing;

namespace {

const auto kFail = [](const std::string& msg) { FAIL_CHECK(msg); };

int offset_index(int dx, int dy, int dz) {
    return ((dx + 1) * 3 + (dy + 1)) * 3 + (dz + 1);
}

// Dense reference: submanifold conv over the active set with zeros elsewhere.
template <typename T>
Tensor<T> dense_conv_oracle(const IndexGrid& grid, const Tensor<T>& x,
                            const Tensor<T>& w, const Tensor<T>& b) {
    const int64_t cin = w.shape[1], cout = w.shape[2];
    Tensor<T> out({x.rows(), cout});
    grid.for_each([&](uint64_t j, Coord c) {
        for (int64_t co = 0; co < cout; ++co) out.at2(static_cast<int64_t>(j), co) = b[co];
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    const auto i = grid.linear_index_of(c.offset(dx, dy, dz));
                    if (!i) continue;
                    const int o = offset_index(dx, dy, dz);
                    for (int64_t ci = 0; ci < cin; ++ci)
                        for (int64_t co = 0; co < cout; ++co)
                            out.at2(static_cast<int64_t>(j), co) +=
                                w.data[static_cast<size_t>((o * cin + ci) * cout + co)] *
                                x.at2(static_cast<int64_t>(*i), ci);
                }
    });
    return out;
}

}  // namespace

TEST_CASE("conv identity kernel") {
    auto grid = make_grid(IndexGrid::build_from_coords({{0, 0, 0}}));
    auto km = KernelMap::build(grid, grid);
    Tape<float> tape;
    const int x = tape.constant(Tensor<float>({1, 2}, {3.f, -1.f}));
    Tensor<float> w({27, 2, 2});
    const int center = offset_index(0, 0, 0);
    w.data[static_cast<size_t>((center * 2 + 0) * 2 + 0)] = 1.f;
    w.data[static_cast<size_t>((center * 2 + 1) * 2 + 1)] = 1.f;
    const int out = sparse_conv3(tape, x, tape.constant(w),
                                 tape.constant(Tensor<float>({2})), km);
    CHECK(tape.value(out).data == std::vector<float>{3.f, -1.f});
}

TEST_CASE("conv stencil orientation: out(c) reads in(c + o)") {
    auto grid = make_grid(IndexGrid::build_from_coords({{0, 0, 0}, {1, 0, 0}}));
    auto km = KernelMap::build(grid, grid);
    Tape<float> tape;
    const float a = 2.5f, b = -4.f;
    const int x = tape.constant(Tensor<float>({2, 1}, {a, b}));
    Tensor<float> w({27, 1, 1});
    w.data[static_cast<size_t>(offset_index(1, 0, 0))] = 1.f;
    const int out = sparse_conv3(tape, x, tape.constant(w),
                                 tape.constant(Tensor<float>({1})), km);
    CHECK(tape.value(out).at2(0, 0) == b);  // left voxel sees right neighbor
    CHECK(tape.value(out).at2(1, 0) == 0.f);
}

TEST_CASE("conv matches dense oracle on random grids") {
    for (uint64_t seed = 0; seed < 8; ++seed) {
        auto grid =
            make_grid(IndexGrid::build_from_coords(random_coords(60, 0, 6, 100 + seed)));
        Rng rng(seed);
        const int64_t cin = 3, cout = 4;
        auto x = random_tensor<float>({static_cast<int64_t>(grid->voxel_count()), cin}, rng);
        auto w = random_tensor<float>({27, cin, cout}, rng, 0.3);
        auto b = random_tensor<float>({cout}, rng);
        auto km = KernelMap::build(grid, grid);

        Tape<float> tape;
        const int out = sparse_conv3(tape, tape.constant(x), tape.constant(w),
                                     tape.constant(b), km);
        Tensor<float> expect = dense_conv_oracle(*grid, x, w, b);
        for (size_t i = 0; i < expect.data.size(); ++i)
            CHECK(std::abs(tape.value(out)[i] - expect[i]) <= 1e-5f);
    }
}

TEST_CASE("conv linearity") {
    auto grid = make_grid(IndexGrid::build_from_coords(random_coords(50, 0, 5, 9)));
    Rng rng(2);
    const int64_t c = 3;
    const auto n = static_cast<int64_t>(grid->voxel_count());
    auto xa = random_tensor<float>({n, c}, rng);
    auto xb = random_tensor<float>({n, c}, rng);
    auto w = random_tensor<float>({27, c, c}, rng, 0.3);
    Tensor<float> zero_bias({c});
    auto km = KernelMap::build(grid, grid);
    const float s = 1.7f, u = -0.6f;

    Tape<float> tape;
    Tensor<float> mix = xa;
    for (size_t i = 0; i < mix.data.size(); ++i) mix[i] = s * xa[i] + u * xb[i];
    const int out_mix = sparse_conv3(tape, tape.constant(mix), tape.constant(w),
                                     tape.constant(zero_bias), km);
    const int out_a = sparse_conv3(tape, tape.constant(xa), tape.constant(w),
                                   tape.constant(zero_bias), km);
    const int out_b = sparse_conv3(tape, tape.constant(xb), tape.constant(w),
                                   tape.constant(zero_bias), km);
    for (size_t i = 0; i < mix.data.size(); ++i) {
        const float lhs = tape.value(out_mix)[i];
        const float rhs = s * tape.value(out_a)[i] + u * tape.value(out_b)[i];
        CHECK(std::abs(lhs - rhs) <= 2e-4f * std::max(1.f, std::abs(rhs)));
    }
}

TEST_CASE("max pool basics and oracle") {
    auto fine = make_grid(IndexGrid::dense_box({0, 0, 0}, {2, 2, 2}));
    auto coarse = make_grid(coarsen_topology(*fine));
    auto pm = PoolMap::build(fine, coarse);
    Tape<float> tape;
    Tensor<float> x({8, 1});
    for (int i = 0; i < 8; ++i) x[static_cast<size_t>(i)] = static_cast<float>(i + 1);
    const int out = max_pool2(tape, tape.constant(x), pm);
    CHECK(tape.value(out).numel() == 1);
    CHECK(tape.value(out)[0] == 8.f);

    // single child: negative value must pass through, no zero contamination
    auto fine1 = make_grid(IndexGrid::build_from_coords({{0, 0, 0}}));
    auto coarse1 = make_grid(coarsen_topology(*fine1));
    auto pm1 = PoolMap::build(fine1, coarse1);
    Tape<float> t1;
    const int o1 = max_pool2(t1, t1.constant(Tensor<float>({1, 1}, {-5.f})), pm1);
    CHECK(t1.value(o1)[0] == -5.f);

    // random grid vs per-coarse-voxel child enumeration oracle
    auto g = make_grid(IndexGrid::build_from_coords(random_coords(300, -10, 10, 4)));
    auto cg = make_grid(coarsen_topology(*g));
    auto pmr = PoolMap::build(g, cg);
    Rng rng(8);
    auto xv = random_tensor<float>({static_cast<int64_t>(g->voxel_count()), 2}, rng);
    Tape<float> t2;
    const int o2 = max_pool2(t2, t2.constant(xv), pmr);
    cg->for_each([&](uint64_t j, Coord c) {
        for (int64_t ch = 0; ch < 2; ++ch) {
            float best = -1e30f;
            for (int k = 0; k < 8; ++k) {
                const auto i = g->linear_index_of(Coord(2 * c.x + ((k >> 2) & 1),
                                                        2 * c.y + ((k >> 1) & 1),
                                                        2 * c.z + (k & 1)));
                if (i) best = std::max(best, xv.at2(static_cast<int64_t>(*i), ch));
            }
            CHECK(t2.value(o2).at2(static_cast<int64_t>(j), ch) == best);
        }
    });

    // topology mismatch is a contract error
    CHECK_THROWS_AS(PoolMap::build(g, g), ContractError);
}

TEST_CASE("upsample subdivide copies parents, gradient sums children") {
    auto coarse = make_grid(IndexGrid::build_from_coords({{0, 0, 0}}));
    auto fine = make_grid(subdivide_topology(*coarse, {1}));
    auto sm = SubdivideMap::build(coarse, fine);
    Tape<double> tape;
    ParamStore<double> store;
    Rng rng(0);
    auto& p = store.create("v", {1, 1}, rng, 1.0);
    const int x = tape.param(p);
    const int up = upsample_subdivide(tape, x, sm);
    CHECK(tape.value(up).rows() == 8);
    for (int i = 0; i < 8; ++i) CHECK(tape.value(up)[static_cast<size_t>(i)] == p.value[0]);
    const int loss = sum_all(tape, up);
    tape.backward(loss);
    CHECK(p.grad[0] == 8.0);  // d(sum of children)/d(parent)

    // orphan fine voxel is a contract error
    auto bad = make_grid(IndexGrid::build_from_coords({{5, 5, 5}}));
    CHECK_THROWS_AS(SubdivideMap::build(coarse, bad), ContractError);

    // random topology: coord-map oracle
    auto g = make_grid(IndexGrid::build_from_coords(random_coords(200, -8, 8, 12)));
    auto fg = make_grid(subdivide_topology(*g, std::vector<uint8_t>(g->voxel_count(), 1)));
    auto smr = SubdivideMap::build(g, fg);
    Rng rng2(5);
    auto xv = random_tensor<float>({static_cast<int64_t>(g->voxel_count()), 3}, rng2);
    Tape<float> t2;
    const int o2 = upsample_subdivide(t2, t2.constant(xv), smr);
    fg->for_each([&](uint64_t j, Coord c) {
        const auto parent = g->linear_index_of(Coord(c.x >> 1, c.y >> 1, c.z >> 1));
        for (int64_t ch = 0; ch < 3; ++ch)
            CHECK(t2.value(o2).at2(static_cast<int64_t>(j), ch) ==
                  xv.at2(static_cast<int64_t>(*parent), ch));
    });
}

TEST_CASE("embed topology zero-fills") {
    auto from = make_grid(IndexGrid::build_from_coords({{0, 0, 0}}));
    auto to = make_grid(dilate(*from));
    auto em = EmbedMap::build(from, to);
    Tape<float> tape;
    const int out = embed_topology(tape, tape.constant(Tensor<float>({1, 1}, {7.f})), em);
    float sum = 0.f;
    for (float v : tape.value(out).data) sum += v;
    CHECK(tape.value(out).rows() == 27);
    CHECK(sum == 7.f);
    const auto center = to->linear_index_of({0, 0, 0});
    CHECK(tape.value(out)[static_cast<size_t>(*center)] == 7.f);

    // not a subset -> contract error
    auto disjoint = make_grid(IndexGrid::build_from_coords({{50, 0, 0}}));
    CHECK_THROWS_AS(EmbedMap::build(disjoint, to), ContractError);
}

TEST_CASE("group norm definitional behavior") {
    auto n = int64_t{40};
    Rng rng(3);
    Tape<float> tape;
    auto x = random_tensor<float>({n, 6}, rng, 2.0);
    const int gamma = tape.constant(Tensor<float>({6}, std::vector<float>(6, 1.5f)));
    const int beta = tape.constant(Tensor<float>({6}, std::vector<float>(6, 0.25f)));
    const int out = group_norm(tape, tape.constant(x), 2, gamma, beta, 1e-6f);
    // per-group mean ~= beta, std ~= gamma
    for (int grp = 0; grp < 2; ++grp) {
        double sum = 0.0, sq = 0.0;
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = grp * 3; j < (grp + 1) * 3; ++j) {
                sum += tape.value(out).at2(i, j);
                sq += tape.value(out).at2(i, j) * tape.value(out).at2(i, j);
            }
        const double m = sum / (n * 3);
        const double sd = std::sqrt(sq / (n * 3) - m * m);
        CHECK(std::abs(m - 0.25) < 1e-4);
        CHECK(std::abs(sd - 1.5) < 1e-3);
    }

    // constant input: output collapses to beta
    Tape<float> t2;
    const int cst = t2.constant(Tensor<float>({5, 2}, std::vector<float>(10, 3.f)));
    const int g2 = t2.constant(Tensor<float>({2}, {2.f, 2.f}));
    const int b2 = t2.constant(Tensor<float>({2}, {0.5f, 0.5f}));
    const int o2 = group_norm(t2, cst, 1, g2, b2, 1e-5f);
    for (float v : t2.value(o2).data) CHECK(v == doctest::Approx(0.5f).epsilon(1e-4));

    CHECK_THROWS_AS(group_norm(tape, tape.constant(x), 4, gamma, beta, 1e-5f),
                    ContractError);
}

TEST_CASE("positional encoding") {
    auto grid = make_grid(IndexGrid::build_from_coords({{7, 7, 7}}));  // center of 16^3
    auto pe0 = positional_encoding<float>(*grid, 0, 16);
    CHECK(pe0.cols() == 3);
    // (7+0.5)/16*2-1 = -0.0625
    CHECK(pe0[0] == doctest::Approx(-0.0625f));

    auto pe4 = positional_encoding<float>(*grid, 4, 16);
    CHECK(pe4.cols() == 27);

    // voxel whose normalized center is the origin: resolution 1, coord 0 ->
    // p = 0, all sin terms 0, cos terms 1
    auto g1 = make_grid(IndexGrid::build_from_coords({{0, 0, 0}}));
    auto pe = positional_encoding<float>(*g1, 2, 1);
    for (int a = 0; a < 3; ++a) {
        CHECK(pe[static_cast<size_t>(a)] == doctest::Approx(0.f));
        for (int k = 0; k < 2; ++k) {
            CHECK(pe[static_cast<size_t>(3 + 6 * k + a)] == doctest::Approx(0.f));
            CHECK(pe[static_cast<size_t>(3 + 6 * k + 3 + a)] == doctest::Approx(1.f));
        }
    }
}

TEST_CASE("loss closed forms") {
    Tape<double> tape;
    // bce with saturated logit
    const int big = tape.constant(Tensor<double>({1, 1}, {20.0}));
    const int one = tape.constant(Tensor<double>({1, 1}, {1.0}));
    CHECK(tape.value(bce_logits(tape, big, one))[0] < 1e-6);

    // kl closed forms
    const int z = tape.constant(Tensor<double>({1, 1}, {0.0}));
    CHECK(tape.value(kl_unit_gauss(tape, z, z))[0] == doctest::Approx(0.0));
    const int mu1 = tape.constant(Tensor<double>({1, 1}, {1.0}));
    CHECK(tape.value(kl_unit_gauss(tape, mu1, z))[0] == doctest::Approx(0.5));

    // kl is invariant to duplicating voxels with identical stats
    Rng rng(4);
    auto mu = random_tensor<double>({10, 4}, rng);
    auto lv = random_tensor<double>({10, 4}, rng, 0.3);
    Tensor<double> mu2({20, 4}), lv2({20, 4});
    std::copy(mu.data.begin(), mu.data.end(), mu2.data.begin());
    std::copy(mu.data.begin(), mu.data.end(), mu2.data.begin() + 40);
    std::copy(lv.data.begin(), lv.data.end(), lv2.data.begin());
    std::copy(lv.data.begin(), lv.data.end(), lv2.data.begin() + 40);
    const double k1 = tape.value(kl_unit_gauss(tape, tape.constant(mu), tape.constant(lv)))[0];
    const double k2 =
        tape.value(kl_unit_gauss(tape, tape.constant(mu2), tape.constant(lv2)))[0];
    CHECK(k1 == doctest::Approx(k2));

    CHECK_THROWS_AS(mse(tape, big, tape.constant(Tensor<double>({2, 1}))), ContractError);
}

TEST_CASE("reparameterize identities") {
    Tape<double> tape;
    ParamStore<double> store;
    Rng rng(1);
    auto& mu = store.create("mu", {4, 2}, rng, 1.0);
    auto& lv = store.create("lv", {4, 2}, rng, 0.0);
    std::fill(lv.value.begin(), lv.value.end(), -60.0);  // sigma ~ 0
    auto eps = random_tensor<double>({4, 2}, rng);
    const int x = reparameterize(tape, tape.param(mu), tape.param(lv), eps);
    for (size_t i = 0; i < 8; ++i)
        CHECK(tape.value(x)[i] == doctest::Approx(mu.value[i]).epsilon(1e-12));
    // dX/dmu = 1
    store.zero_grad();
    tape.backward(sum_all(tape, x));
    for (double g : mu.grad) CHECK(g == doctest::Approx(1.0));
}

TEST_CASE("backward accumulates across calls") {
    ParamStore<double> store;
    Rng rng(2);
    auto& w = store.create("w", {3, 1}, rng, 1.0);
    Tensor<double> xv({1, 3}, {1.0, 2.0, 3.0});
    Tape<double> tape;
    const int loss = sum_all(tape, linear(tape, tape.constant(xv), tape.param(w)));
    store.zero_grad();
    tape.backward(loss);
    std::vector<double> once = w.grad;
    CHECK(once == std::vector<double>{1.0, 2.0, 3.0});  // grad w = x
    tape.backward(loss);
    for (size_t i = 0; i < 3; ++i) CHECK(w.grad[i] == doctest::Approx(2.0 * once[i]));

    CHECK_THROWS_AS(tape.backward(tape.constant(Tensor<double>({2, 1}))), ContractError);
}

TEST_CASE("adam and ema") {
    ParamStore<double> store;
    Rng rng(0);
    auto& p = store.create("p", {3}, rng, 1.0);
    const std::vector<double> before = p.value;

    // zero gradient leaves values unchanged
    store.zero_grad();
    store.adam_step(0.01);
    CHECK(p.value == before);

    // first step magnitude ~= lr, direction -sign(g)
    ParamStore<double> s2;
    auto& q = s2.create("q", {2}, rng, 1.0);
    const std::vector<double> q0 = q.value;
    q.grad = {0.5, -2.0};
    s2.adam_step(0.01);
    CHECK(q.value[0] == doctest::Approx(q0[0] - 0.01).epsilon(1e-4));
    CHECK(q.value[1] == doctest::Approx(q0[1] + 0.01).epsilon(1e-4));

    // ema rate 0 snaps shadow to value
    s2.ema_update(0.0);
    CHECK(q.ema == q.value);
}

TEST_CASE("gradient checks per op (f64 central differences)") {
    const double h = 1e-5, tol = 1e-4;
    auto grid = make_grid(IndexGrid::build_from_coords(random_coords(40, 0, 5, 55)));
    const auto n = static_cast<int64_t>(grid->voxel_count());
    auto km = KernelMap::build(grid, grid);
    auto coarse = make_grid(coarsen_topology(*grid));
    auto pm = PoolMap::build(grid, coarse);
    auto fine = make_grid(subdivide_topology(*grid, std::vector<uint8_t>(grid->voxel_count(), 1)));
    auto sm = SubdivideMap::build(grid, fine);
    auto dil = make_grid(dilate(*grid));
    auto em = EmbedMap::build(grid, dil);

    for (uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(1000 + seed);
        const int64_t cin = 2, cout = 3;

        {  // sparse_conv3 w.r.t. input, weights, bias
            ParamStore<double> store;
            auto& px = store.create("x", {n, cin}, rng, 1.0);
            auto& pw = store.create("w", {27, cin, cout}, rng, 0.4);
            auto& pb = store.create("b", {cout}, rng, 0.5);
            auto target = random_tensor<double>({n, cout}, rng);
            auto fn = [&](bool with_grad) {
                Tape<double> t;
                const int out = sparse_conv3(t, t.param(px), t.param(pw), t.param(pb), km);
                const int loss = mse(t, out, t.constant(target));
                if (with_grad) t.backward(loss);
                return static_cast<double>(t.value(loss)[0]);
            };
            check_gradients(store, fn, h, tol, kFail);
        }
        {  // max_pool2 (avoid exact ties which break differentiability)
            ParamStore<double> store;
            auto& px = store.create("x", {n, cin}, rng, 1.0);
            auto target = random_tensor<double>({static_cast<int64_t>(coarse->voxel_count()), cin}, rng);
            auto fn = [&](bool with_grad) {
                Tape<double> t;
                const int out = max_pool2(t, t.param(px), pm);
                const int loss = mse(t, out, t.constant(target));
                if (with_grad) t.backward(loss);
                return static_cast<double>(t.value(loss)[0]);
            };
            check_gradients(store, fn, h, tol, kFail);
        }
        {  // upsample + embed + groupnorm + film + normalize + tanh chain pieces
            ParamStore<double> store;
            auto& px = store.create("x", {n, cin}, rng, 1.0);
            auto& pg = store.create("gamma", {cin}, rng, 0.2);
            auto& pbt = store.create("beta", {cin}, rng, 0.2);
            for (auto& v : pg.value) v += 1.0;
            auto target = random_tensor<double>({static_cast<int64_t>(fine->voxel_count()), cin}, rng);
            auto fn = [&](bool with_grad) {
                Tape<double> t;
                const int norm = group_norm(t, t.param(px), 1, t.param(pg), t.param(pbt), 1e-5);
                const int up = upsample_subdivide(t, norm, sm);
                const int loss = mse(t, up, t.constant(target));
                if (with_grad) t.backward(loss);
                return static_cast<double>(t.value(loss)[0]);
            };
            check_gradients(store, fn, h, tol, kFail);
        }
        {  // losses: bce, l1, kl reached through silu/linear
            ParamStore<double> store;
            auto& px = store.create("x", {6, 3}, rng, 1.0);
            auto& pw = store.create("w", {3, 2}, rng, 0.7);
            auto target = Tensor<double>({6, 2});
            for (auto& v : target.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
            auto fn = [&](bool with_grad) {
                Tape<double> t;
                const int y = linear(t, silu(t, t.param(px)), t.param(pw));
                const int loss = bce_logits(t, y, t.constant(target));
                if (with_grad) t.backward(loss);
                return static_cast<double>(t.value(loss)[0]);
            };
            check_gradients(store, fn, h, tol, kFail);
        }
        {  // kl + reparameterize + l1 + tanh_scale + normalize_rows
            ParamStore<double> store;
            auto& pmu = store.create("mu", {5, 3}, rng, 0.8);
            auto& plv = store.create("lv", {5, 3}, rng, 0.3);
            auto eps = random_tensor<double>({5, 3}, rng);
            auto target = random_tensor<double>({5, 3}, rng);
            auto fn = [&](bool with_grad) {
                Tape<double> t;
                const int xx = reparameterize(t, t.param(pmu), t.param(plv), eps);
                const int nr = normalize_rows(t, tanh_scale(t, xx, 3.0));
                const int loss =
                    add(t, l1(t, nr, t.constant(target)),
                        kl_unit_gauss(t, t.param(pmu), t.param(plv)));
                if (with_grad) t.backward(loss);
                return static_cast<double>(t.value(loss)[0]);
            };
            check_gradients(store, fn, h, tol, kFail);
        }
        {  // trilinear pull
            ParamStore<double> store;
            auto& px = store.create("x", {n, 1}, rng, 1.0);
            std::vector<Vec3d> pts;
            for (int i = 0; i < 20; ++i)
                pts.emplace_back(rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 5));
            auto tm = TrilinearMap::build(grid, pts);
            auto target = random_tensor<double>({20, 1}, rng);
            auto fn = [&](bool with_grad) {
                Tape<double> t;
                const int out = trilinear_pull(t, t.param(px), tm);
                const int loss = l1(t, out, t.constant(target));
                if (with_grad) t.backward(loss);
                return static_cast<double>(t.value(loss)[0]);
            };
            check_gradients(store, fn, h, tol, kFail);
        }
    }
}

TEST_CASE("composite network gradient check (conv-norm-act-conv-bce)") {
    const double h = 1e-5, tol = 1e-4;
    auto grid = make_grid(IndexGrid::build_from_coords(random_coords(30, 0, 4, 66)));
    const auto n = static_cast<int64_t>(grid->voxel_count());
    auto km = KernelMap::build(grid, grid);
    for (uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(2000 + seed);
        const int64_t cin = 2, mid = 3;
        ParamStore<double> store;
        auto& px = store.create("x", {n, cin}, rng, 1.0);
        auto& pw1 = store.create("w1", {27, cin, mid}, rng, 0.4);
        auto& pb1 = store.create("b1", {mid}, rng, 0.3);
        auto& pg = store.create("gamma", {mid}, rng, 0.1);
        auto& pbt = store.create("beta", {mid}, rng, 0.1);
        for (auto& v : pg.value) v += 1.0;
        auto& pw2 = store.create("w2", {27, mid, 1}, rng, 0.4);
        auto& pb2 = store.create("b2", {1}, rng, 0.3);
        Tensor<double> target({n, 1});
        for (auto& v : target.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        auto fn = [&](bool with_grad) {
            Tape<double> t;
            const int h1 = sparse_conv3(t, t.param(px), t.param(pw1), t.param(pb1), km);
            const int h2 = group_norm(t, h1, 1, t.param(pg), t.param(pbt), 1e-5);
            const int h3 = silu(t, h2);
            const int h4 = sparse_conv3(t, h3, t.param(pw2), t.param(pb2), km);
            const int loss = bce_logits(t, h4, t.constant(target));
            if (with_grad) t.backward(loss);
            return static_cast<double>(t.value(loss)[0]);
        };
        check_gradients(store, fn, h, tol, kFail);
    }
}

TEST_CASE("forward determinism") {
    auto grid = make_grid(IndexGrid::build_from_coords(random_coords(100, 0, 8, 5)));
    auto km = KernelMap::build(grid, grid);
    Rng rng(1);
    const auto n = static_cast<int64_t>(grid->voxel_count());
    auto x = random_tensor<float>({n, 4}, rng);
    auto w = random_tensor<float>({27, 4, 4}, rng, 0.3);
    auto b = random_tensor<float>({4}, rng);
    std::vector<float> first;
    for (int run = 0; run < 3; ++run) {
        Tape<float> t;
        const int out =
            sparse_conv3(t, t.constant(x), t.constant(w), t.constant(b), km);
        if (run == 0)
            first = t.value(out).data;
        else
            CHECK(t.value(out).data == first);  // bit-identical
    }
}
