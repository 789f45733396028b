// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "test_helpers.hpp"
#include <cstring>

#include "voxflow/hierarchy.hpp"
#include "voxflow/marching_cubes.hpp"
#include "voxflow/procedural.hpp"
#include "voxflow/svx_io.hpp"

using namespace voxflow;
using namespace voxflow::testing;

namespace {

TriMesh unit_cube_mesh() {
    auto shapes = procedural_dataset(ShapeFamily::kBoxes, 1, 12345);
    return shapes[0];
}

// independent brute-force point-triangle distance (plane clamp + edges)
double naive_point_tri_dist2(const Vec3d& p, const Vec3d& a, const Vec3d& b,
                             const Vec3d& c) {
    double best = 1e30;
    // dense barycentric sampling fallback is too slow; use edge+plane approach
    const Vec3d n = (b - a).cross(c - a);
    const double nn = n.norm2();
    if (nn > 0) {
        const double d = (p - a).dot(n) / std::sqrt(nn);
        const Vec3d proj = p - n * (d / std::sqrt(nn));
        // inside test via same-side checks
        auto side = [&](const Vec3d& u, const Vec3d& v) {
            return (v - u).cross(proj - u).dot(n) >= 0;
        };
        if (side(a, b) && side(b, c) && side(c, a)) best = d * d;
    }
    auto edge = [&](const Vec3d& u, const Vec3d& v) {
        const Vec3d uv = v - u;
        const double t = std::clamp((p - u).dot(uv) / uv.norm2(), 0.0, 1.0);
        best = std::min(best, (p - (u + uv * t)).norm2());
    };
    edge(a, b);
    edge(b, c);
    edge(c, a);
    return best;
}

}  // namespace

TEST_CASE("voxelize cube matches brute-force band oracle") {
    TriMesh cube = unit_cube_mesh();
    const int r = 8;
    AttributeSet attrs = voxelize_mesh(cube, r);

    // oracle: test every voxel center against every triangle
    TriMesh norm = cube;
    clean_mesh(norm);
    normalize_to_unit_cube(norm);
    const double vs = 1.0 / r;
    const double band2 = (kSurfaceBand * vs) * (kSurfaceBand * vs);
    std::set<Coord> oracle;
    for (int x = 0; x < r; ++x)
        for (int y = 0; y < r; ++y)
            for (int z = 0; z < r; ++z) {
                const Vec3d p((x + 0.5) * vs, (y + 0.5) * vs, (z + 0.5) * vs);
                double best = 1e30;
                for (const auto& t : norm.triangles)
                    best = std::min(best, naive_point_tri_dist2(p, norm.vertices[t[0]],
                                                                norm.vertices[t[1]],
                                                                norm.vertices[t[2]]));
                if (best <= band2) oracle.insert(Coord(x, y, z));
            }
    std::set<Coord> got;
    attrs.grid()->for_each([&](uint64_t, Coord c) { got.insert(c); });
    CHECK(got == oracle);
    CHECK(attrs.grid()->voxel_count() > 0);
}

TEST_CASE("voxelize sphere tsdf matches analytic sdf") {
    Rng rng(0);
    TriMesh sphere;
    {
        // fine tessellation so chord error stays well under the tolerance
        auto shapes = procedural_dataset(ShapeFamily::kSpheres, 1, 999);
        (void)shapes;
    }
    // exact sphere: build via the sphere generator with isotropic radius
    // (bypass anisotropy by averaging radii at high tessellation)
    // Simpler: tessellate a unit sphere manually here.
    const int seg = 128, rings = 64;
    const double kPi = 3.14159265358979323846;
    sphere.vertices.emplace_back(0, 0, 1);
    for (int ri = 1; ri < rings; ++ri) {
        const double theta = kPi * ri / rings;
        for (int s = 0; s < seg; ++s) {
            const double phi = 2 * kPi * s / seg;
            sphere.vertices.emplace_back(std::sin(theta) * std::cos(phi),
                                         std::sin(theta) * std::sin(phi),
                                         std::cos(theta));
        }
    }
    sphere.vertices.emplace_back(0, 0, -1);
    const int32_t south = static_cast<int32_t>(sphere.vertices.size()) - 1;
    auto rv = [&](int ri, int s) { return 1 + (ri - 1) * seg + (s % seg); };
    for (int s = 0; s < seg; ++s)
        sphere.triangles.push_back({0, rv(1, s), rv(1, s + 1)});
    for (int ri = 1; ri < rings - 1; ++ri)
        for (int s = 0; s < seg; ++s) {
            sphere.triangles.push_back({rv(ri, s), rv(ri + 1, s), rv(ri + 1, s + 1)});
            sphere.triangles.push_back({rv(ri, s), rv(ri + 1, s + 1), rv(ri, s + 1)});
        }
    for (int s = 0; s < seg; ++s)
        sphere.triangles.push_back({south, rv(rings - 1, s + 1), rv(rings - 1, s)});

    const int r = 64;
    AttributeSet attrs = voxelize_mesh(sphere, r);
    // after normalization the sphere has radius 0.45 centered at 0.5
    const double vs = 1.0 / r;
    double worst = 0.0;
    attrs.grid()->for_each([&](uint64_t i, Coord c) {
        const Vec3d p = attrs.grid()->voxel_center_world(c);
        const double analytic = ((p - Vec3d(0.5, 0.5, 0.5)).norm() - 0.45) / vs;
        worst = std::max(worst, std::abs(attrs.tsdf.at(i, 0) - analytic));
    });
    CHECK(worst < 0.1);

    SUBCASE("tsdf_at trilinear near-surface accuracy") {
        Rng prng(3);
        double worst_q = 0.0;
        int checked = 0;
        while (checked < 1000) {
            Vec3d dir(prng.gaussian(), prng.gaussian(), prng.gaussian());
            dir = dir.normalized();
            const double rr = 0.45 + prng.uniform(-0.25, 0.25) * vs;
            const Vec3d q = Vec3d(0.5, 0.5, 0.5) + dir * rr;
            const TsdfSample s = tsdf_at(attrs, q);
            if (s.out_of_band) continue;
            const double analytic = (rr - 0.45) / vs;
            worst_q = std::max(worst_q, std::abs(s.value - analytic));
            ++checked;
        }
        CHECK(worst_q < 0.15);
    }

    SUBCASE("extract_mesh vertices lie within one voxel of the sphere") {
        TriMesh out = extract_mesh(attrs);
        REQUIRE(out.vertices.size() > 100);
        double worst_v = 0.0;
        for (const Vec3d& v : out.vertices)
            worst_v =
                std::max(worst_v, std::abs((v - Vec3d(0.5, 0.5, 0.5)).norm() - 0.45));
        CHECK(worst_v < vs);

        // extract o voxelize round trip: two-sided Hausdorff <= 1.5 voxel
        auto a = sample_surface(sphere, 3000, 7);   // unnormalized sphere!
        // resample against the normalized mesh instead
        TriMesh ref = sphere;
        clean_mesh(ref);
        normalize_to_unit_cube(ref);
        a = sample_surface(ref, 3000, 7);
        auto b = sample_surface(out, 3000, 8);
        auto hausdorff = [](const std::vector<Vec3d>& s1, const std::vector<Vec3d>& s2) {
            double worst = 0.0;
            for (const Vec3d& p : s1) {
                double best = 1e30;
                for (const Vec3d& q : s2) best = std::min(best, (p - q).norm2());
                worst = std::max(worst, best);
            }
            return std::sqrt(worst);
        };
        CHECK(hausdorff(a, b) < 1.5 * vs);
        CHECK(hausdorff(b, a) < 1.5 * vs);
    }
}

TEST_CASE("single triangle near-plane tsdf") {
    TriMesh tri;
    tri.vertices = {{0, 0, 0.5}, {1, 0, 0.5}, {0, 1, 0.5}};
    tri.triangles = {{0, 1, 2}};
    AttributeSet attrs = voxelize_mesh(tri, 16);
    // voxels whose center projects onto the triangle: |tsdf| < 0.5 voxel
    bool any = false;
    attrs.grid()->for_each([&](uint64_t i, Coord c) {
        const Vec3d p = attrs.grid()->voxel_center_world(c);
        if (p.x + p.y < 0.8 && p.x > 0.1 && p.y > 0.1) {
            CHECK(std::abs(attrs.tsdf.at(i, 0)) < 0.5);
            any = true;
        }
    });
    CHECK(any);
}

TEST_CASE("voxelize_points") {
    const int r = 16;
    FeatureGrid one = voxelize_points({{0.001, 0.001, 0.001}}, {}, r);
    CHECK(one.grid->voxel_count() == 1);
    CHECK(one.grid->is_active({0, 0, 0}));

    // 8 points in one cell -> 1 voxel, attributes averaged
    std::vector<Vec3d> pts;
    std::vector<std::vector<float>> feats;
    for (int i = 0; i < 8; ++i) {
        pts.push_back(Vec3d(0.5, 0.5, 0.5) + Vec3d(1, 1, 1) * (0.001 * i));
        feats.push_back({static_cast<float>(i)});
    }
    FeatureGrid avg = voxelize_points(pts, feats, r);
    CHECK(avg.grid->voxel_count() == 1);
    CHECK(avg.values[0] == doctest::Approx(3.5f));

    // active set equals floor-quantization oracle
    Rng rng(5);
    pts.clear();
    for (int i = 0; i < 10000; ++i)
        pts.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    FeatureGrid fg = voxelize_points(pts, {}, r);
    std::set<Coord> oracle;
    for (const auto& p : pts)
        oracle.insert(Coord(static_cast<int32_t>(std::floor(p.x * r)),
                            static_cast<int32_t>(std::floor(p.y * r)),
                            static_cast<int32_t>(std::floor(p.z * r))));
    std::set<Coord> got;
    fg.grid->for_each([&](uint64_t, Coord c) { got.insert(c); });
    CHECK(got == oracle);

    CHECK_THROWS_AS(voxelize_points({}, {}, r), ContractError);
}

TEST_CASE("hierarchy build and containment") {
    auto shapes = procedural_dataset(ShapeFamily::kSpheres, 1, 3);
    AttributeSet fine = voxelize_mesh(shapes[0], 64);
    VoxelHierarchy h = build_hierarchy(fine, {16, 32, 64});
    REQUIRE(h.levels.size() == 3);
    CHECK(h.levels[0].resolution == 16);
    CHECK(check_containment(h));

    // coarse voxel counts match the coord-set map oracle
    std::set<Coord> fine_set;
    fine.grid()->for_each([&](uint64_t, Coord c) { fine_set.insert(c); });
    for (int l = 0; l < 2; ++l) {
        const int k = l == 0 ? 2 : 1;  // 64->16 shifts 2, 64->32 shifts 1
        std::set<Coord> oracle;
        for (const Coord& c : fine_set)
            oracle.insert(Coord(c.x >> k, c.y >> k, c.z >> k));
        CHECK(h.levels[l].grid()->voxel_count() == oracle.size());
    }

    // coarse tsdf lies within [min, max] of children
    const auto& coarse = h.levels[1];
    const auto& finest = h.levels[2];
    coarse.grid()->for_each([&](uint64_t j, Coord c) {
        float lo = 1e9f, hi = -1e9f;
        for (int k = 0; k < 8; ++k) {
            const auto i = finest.grid()->linear_index_of(
                Coord(2 * c.x + ((k >> 2) & 1), 2 * c.y + ((k >> 1) & 1),
                      2 * c.z + (k & 1)));
            if (!i) continue;
            lo = std::min(lo, finest.attrs.tsdf.at(*i, 0));
            hi = std::max(hi, finest.attrs.tsdf.at(*i, 0));
        }
        CHECK(coarse.attrs.tsdf.at(j, 0) >= lo - 1e-6f);
        CHECK(coarse.attrs.tsdf.at(j, 0) <= hi + 1e-6f);
    });

    // normals stay unit length
    h.levels[0].grid()->for_each([&](uint64_t j, Coord) {
        const Vec3f n(h.levels[0].attrs.normals.at(j, 0), h.levels[0].attrs.normals.at(j, 1),
                      h.levels[0].attrs.normals.at(j, 2));
        CHECK(std::abs(n.norm() - 1.f) < 1e-4f);
    });

    // trivial chain: single fine voxel
    CHECK_THROWS_AS(build_hierarchy(fine, {24, 64}), ContractError);
}

TEST_CASE("sample_surface statistics and determinism") {
    TriMesh square;
    square.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    square.triangles = {{0, 1, 2}, {0, 2, 3}};
    auto pts = sample_surface(square, 100000, 42);
    Vec3d mean;
    for (const auto& p : pts) mean += p;
    mean = mean / static_cast<double>(pts.size());
    CHECK(std::abs(mean.x - 0.5) < 0.01);
    CHECK(std::abs(mean.y - 0.5) < 0.01);

    // single sample on one triangle: inside (barycentric check via area)
    TriMesh tri;
    tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    tri.triangles = {{0, 1, 2}};
    auto p1 = sample_surface(tri, 1, 7);
    CHECK(p1[0].x >= 0);
    CHECK(p1[0].y >= 0);
    CHECK(p1[0].x + p1[0].y <= 1.0);

    auto a = sample_surface(square, 500, 11);
    auto b = sample_surface(square, 500, 11);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    CHECK_THROWS_AS(sample_surface(TriMesh{}, 10, 0), ContractError);
}

TEST_CASE("tsdf_at identities") {
    // two voxels with tsdf -1 and +1: midpoint interpolates to 0
    auto grid = make_grid(
        IndexGrid::build_from_coords({{0, 0, 0}, {1, 0, 0}}, 1.0, {0, 0, 0}));
    AttributeSet attrs;
    attrs.normals = FeatureGrid(grid, 3);
    attrs.semantics = FeatureGrid(grid, 4);
    attrs.tsdf = FeatureGrid(grid, 1);
    attrs.tsdf.at(0, 0) = -1.f;
    attrs.tsdf.at(1, 0) = 1.f;
    // voxel centers at (0.5,0.5,0.5) and (1.5,0.5,0.5)
    CHECK(tsdf_at(attrs, {0.5, 0.5, 0.5}).value == doctest::Approx(-1.0));
    CHECK(tsdf_at(attrs, {1.5, 0.5, 0.5}).value == doctest::Approx(1.0));
    CHECK(tsdf_at(attrs, {1.0, 0.5, 0.5}).value == doctest::Approx(0.0));

    const TsdfSample far = tsdf_at(attrs, {100, 100, 100});
    CHECK(far.out_of_band);
    CHECK(far.value == doctest::Approx(kTsdfClamp));
}

TEST_CASE("extract_mesh planar field and empty cases") {
    // slab with tsdf = z - 1.5 (zero plane between voxel layers z=1 and z=2)
    std::vector<Coord> coords;
    for (int x = 0; x < 6; ++x)
        for (int y = 0; y < 6; ++y)
            for (int z = 0; z < 4; ++z) coords.emplace_back(x, y, z);
    auto grid = make_grid(IndexGrid::build_from_coords(coords, 0.25, {0, 0, 0}));
    FeatureGrid tsdf(grid, 1);
    grid->for_each([&](uint64_t i, Coord c) {
        tsdf.at(i, 0) = static_cast<float>(c.z) - 1.5f;
    });
    TriMesh mesh = extract_mesh(tsdf);
    REQUIRE(!mesh.empty());
    // plane sits at z voxel coordinate 1.5 -> world z = (1.5+0.5)*0.25 = 0.5
    for (const Vec3d& v : mesh.vertices) CHECK(std::abs(v.z - 0.5) < 1e-4 * 0.25);

    // constant positive field -> empty mesh, not an error
    FeatureGrid pos(grid, 1);
    for (auto& v : pos.values) v = 2.f;
    CHECK(extract_mesh(pos).empty());
}

TEST_CASE("procedural dataset properties") {
    // sphere: closed manifold, Euler characteristic 2
    auto spheres = procedural_dataset(ShapeFamily::kSpheres, 1, 0);
    REQUIRE(spheres.size() == 1);
    CHECK(is_closed_manifold(spheres[0]));
    std::set<std::pair<int32_t, int32_t>> edges;
    for (const auto& t : spheres[0].triangles)
        for (int k = 0; k < 3; ++k)
            edges.insert({std::min(t[k], t[(k + 1) % 3]), std::max(t[k], t[(k + 1) % 3])});
    const auto euler = static_cast<int64_t>(spheres[0].vertices.size()) -
                       static_cast<int64_t>(edges.size()) +
                       static_cast<int64_t>(spheres[0].triangles.size());
    CHECK(euler == 2);

    // determinism
    auto a = procedural_dataset(ShapeFamily::kBoxUnions, 4, 7);
    auto b = procedural_dataset(ShapeFamily::kBoxUnions, 4, 7);
    for (size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].vertices.size() == b[i].vertices.size());
        for (size_t v = 0; v < a[i].vertices.size(); ++v)
            CHECK(a[i].vertices[v] == b[i].vertices[v]);
    }

    // 64 distinct shapes by vertex-data hash
    auto shapes = procedural_dataset(ShapeFamily::kBoxUnions, 64, 7);
    std::set<uint64_t> hashes;
    for (const auto& m : shapes) {
        uint64_t h = 1469598103934665603ULL;
        for (const auto& v : m.vertices) {
            for (double d : {v.x, v.y, v.z}) {
                uint64_t bits;
                std::memcpy(&bits, &d, 8);
                h = (h ^ bits) * 1099511628211ULL;
            }
        }
        hashes.insert(h);
    }
    CHECK(hashes.size() == 64);

    CHECK_THROWS_AS(parse_shape_family("donuts"), ContractError);

    // shapes normalized to the unit cube
    for (const auto& m : shapes) {
        const auto [lo, hi] = m.bounds();
        CHECK(lo.x >= -1e-9);
        CHECK(hi.x <= 1.0 + 1e-9);
        const Vec3d size = hi - lo;
        CHECK(std::max({size.x, size.y, size.z}) == doctest::Approx(0.9));
    }
}

TEST_CASE("voxelization is rotation-robust at the set level") {
    auto shapes = procedural_dataset(ShapeFamily::kLShapes, 1, 21);
    const int r = 32;
    AttributeSet base = voxelize_mesh(shapes[0], r);

    // rotate 90 degrees about z: (x, y, z) -> (-y, x, z)
    TriMesh rot = shapes[0];
    for (auto& v : rot.vertices) v = Vec3d(-v.y, v.x, v.z);
    AttributeSet rattr = voxelize_mesh(rot, r);

    // rotating the coord set about the grid center must give the rotated set
    std::set<Coord> expect;
    base.grid()->for_each([&](uint64_t, Coord c) {
        expect.insert(Coord(r - 1 - c.y, c.x, c.z));
    });
    std::set<Coord> got;
    rattr.grid()->for_each([&](uint64_t, Coord c) { got.insert(c); });
    CHECK(got == expect);
}

TEST_CASE("obj io roundtrip") {
    auto shapes = procedural_dataset(ShapeFamily::kBoxes, 1, 5);
    save_obj("roundtrip.obj", shapes[0]);
    TriMesh back = load_obj("roundtrip.obj");
    REQUIRE(back.vertices.size() == shapes[0].vertices.size());
    REQUIRE(back.triangles.size() == shapes[0].triangles.size());
    for (size_t i = 0; i < back.vertices.size(); ++i)
        CHECK((back.vertices[i] - shapes[0].vertices[i]).norm() < 1e-7);
    CHECK_THROWS_AS(load_mesh("missing.obj"), IoError);
    CHECK_THROWS_AS(load_mesh("bad.stl"), IoError);
}
