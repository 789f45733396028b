// Copyright Contributors to the VoxFlow Project
// SPDX-License-Identifier: Apache-2.0

#include "voxflow/mesh.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "voxflow/common.hpp"
#include "voxflow/rng.hpp"

namespace voxflow {

Vec3d TriMesh::face_normal(size_t f) const {
    const auto& t = triangles[f];
    const Vec3d e1 = vertices[t[1]] - vertices[t[0]];
    const Vec3d e2 = vertices[t[2]] - vertices[t[0]];
    return e1.cross(e2).normalized();
}

double TriMesh::face_area(size_t f) const {
    const auto& t = triangles[f];
    const Vec3d e1 = vertices[t[1]] - vertices[t[0]];
    const Vec3d e2 = vertices[t[2]] - vertices[t[0]];
    return 0.5 * e1.cross(e2).norm();
}

double TriMesh::total_area() const {
    double a = 0.0;
    for (size_t f = 0; f < triangles.size(); ++f) a += face_area(f);
    return a;
}

std::pair<Vec3d, Vec3d> TriMesh::bounds() const {
    VF_CHECK(!vertices.empty(), "bounds of empty mesh");
    Vec3d lo = vertices[0], hi = vertices[0];
    for (const Vec3d& v : vertices) {
        lo.x = std::min(lo.x, v.x); lo.y = std::min(lo.y, v.y); lo.z = std::min(lo.z, v.z);
        hi.x = std::max(hi.x, v.x); hi.y = std::max(hi.y, v.y); hi.z = std::max(hi.z, v.z);
    }
    return {lo, hi};
}

TriMesh load_mesh(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "obj") return load_obj(path);
    if (ext == "ply") return load_ply(path);
    throw IoError("unsupported mesh format: " + path);
}

TriMesh load_obj(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    TriMesh mesh;
    std::string line;
    int32_t current_label = 0;
    bool any_label = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3d v;
            ls >> v.x >> v.y >> v.z;
            mesh.vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int32_t> idx;
            std::string tok;
            while (ls >> tok) {
                // "i", "i/t", "i/t/n", "i//n"; negative = relative
                const long raw = std::strtol(tok.c_str(), nullptr, 10);
                const long resolved =
                    raw < 0 ? static_cast<long>(mesh.vertices.size()) + raw : raw - 1;
                idx.push_back(static_cast<int32_t>(resolved));
            }
            for (size_t k = 2; k < idx.size(); ++k) {  // fan-triangulate
                mesh.triangles.push_back({idx[0], idx[k - 1], idx[k]});
                mesh.face_labels.push_back(current_label);
            }
        } else if (tag == "usemtl" || tag == "g") {
            // consecutive groups/materials become consecutive semantic ids
            std::string name;
            ls >> name;
            if (any_label) ++current_label;
            any_label = true;
        }
    }
    if (!any_label) mesh.face_labels.clear();
    clean_mesh(mesh);
    return mesh;
}

TriMesh load_ply(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    std::string line;
    std::getline(is, line);
    if (line.rfind("ply", 0) != 0) throw IoError("not a PLY file: " + path);

    bool binary = false;
    size_t n_vert = 0, n_face = 0;
    int vertex_props = 0;
    bool in_vertex = false;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") binary = true;
            else if (fmt != "ascii") throw IoError("unsupported PLY format: " + fmt);
        } else if (tag == "element") {
            std::string what;
            size_t count;
            ls >> what >> count;
            in_vertex = what == "vertex";
            if (in_vertex) n_vert = count;
            else if (what == "face") n_face = count;
        } else if (tag == "property") {
            if (in_vertex) ++vertex_props;
        } else if (tag == "end_header") {
            break;
        }
    }
    VF_CHECK(vertex_props >= 3, "PLY vertex element needs at least x y z");

    TriMesh mesh;
    mesh.vertices.resize(n_vert);
    if (binary) {
        std::vector<float> props(static_cast<size_t>(vertex_props));
        for (size_t i = 0; i < n_vert; ++i) {
            is.read(reinterpret_cast<char*>(props.data()),
                    static_cast<std::streamsize>(props.size() * sizeof(float)));
            mesh.vertices[i] = {props[0], props[1], props[2]};
        }
        for (size_t f = 0; f < n_face; ++f) {
            uint8_t k = 0;
            is.read(reinterpret_cast<char*>(&k), 1);
            std::vector<int32_t> idx(k);
            is.read(reinterpret_cast<char*>(idx.data()),
                    static_cast<std::streamsize>(k * sizeof(int32_t)));
            for (size_t t = 2; t < idx.size(); ++t)
                mesh.triangles.push_back({idx[0], idx[t - 1], idx[t]});
        }
    } else {
        for (size_t i = 0; i < n_vert; ++i) {
            std::getline(is, line);
            std::istringstream ls(line);
            ls >> mesh.vertices[i].x >> mesh.vertices[i].y >> mesh.vertices[i].z;
        }
        for (size_t f = 0; f < n_face; ++f) {
            std::getline(is, line);
            std::istringstream ls(line);
            int k;
            ls >> k;
            std::vector<int32_t> idx(static_cast<size_t>(k));
            for (auto& v : idx) ls >> v;
            for (size_t t = 2; t < idx.size(); ++t)
                mesh.triangles.push_back({idx[0], idx[t - 1], idx[t]});
        }
    }
    if (!is) throw IoError("truncated PLY file: " + path);
    clean_mesh(mesh);
    return mesh;
}

void save_obj(const std::string& path, const TriMesh& mesh) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.precision(9);
    for (const Vec3d& v : mesh.vertices)
        os << "v " << v.x << " " << v.y << " " << v.z << "\n";
    for (const auto& t : mesh.triangles)
        os << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    if (!os) throw IoError("write failed: " + path);
}

void clean_mesh(TriMesh& mesh, double area_eps) {
    std::vector<std::array<int32_t, 3>> tris;
    std::vector<int32_t> labels;
    const auto n = static_cast<int32_t>(mesh.vertices.size());
    for (size_t f = 0; f < mesh.triangles.size(); ++f) {
        const auto& t = mesh.triangles[f];
        if (t[0] < 0 || t[1] < 0 || t[2] < 0 || t[0] >= n || t[1] >= n || t[2] >= n)
            continue;
        if (mesh.face_area(f) <= area_eps) continue;
        tris.push_back(t);
        if (!mesh.face_labels.empty()) labels.push_back(mesh.face_labels[f]);
    }
    mesh.triangles = std::move(tris);
    mesh.face_labels = std::move(labels);
}

void normalize_to_unit_cube(TriMesh& mesh, double extent) {
    const auto [lo, hi] = mesh.bounds();
    const Vec3d size = hi - lo;
    const double longest = std::max({size.x, size.y, size.z});
    VF_CHECK(longest > 0.0, "degenerate mesh extent");
    const double s = extent / longest;
    const Vec3d center = (lo + hi) * 0.5;
    for (Vec3d& v : mesh.vertices)
        v = (v - center) * s + Vec3d(0.5, 0.5, 0.5);
}

bool is_closed_manifold(const TriMesh& mesh) {
    std::map<std::pair<int32_t, int32_t>, int> edge_count;
    for (const auto& t : mesh.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int32_t a = t[k], b = t[(k + 1) % 3];
            ++edge_count[{std::min(a, b), std::max(a, b)}];
        }
    }
    for (const auto& [edge, count] : edge_count)
        if (count != 2) return false;
    return !mesh.triangles.empty();
}

namespace {

// Cumulative-area table lookup for area-uniform triangle selection.
std::vector<double> area_cdf(const TriMesh& mesh) {
    std::vector<double> cdf(mesh.triangles.size());
    double acc = 0.0;
    for (size_t f = 0; f < mesh.triangles.size(); ++f) {
        acc += mesh.face_area(f);
        cdf[f] = acc;
    }
    VF_CHECK(acc > 0.0, "sample_surface: mesh has zero area");
    return cdf;
}

}  // namespace

std::vector<SurfaceSample> sample_surface_full(const TriMesh& mesh, size_t n,
                                               uint64_t seed) {
    VF_CHECK(n >= 1, "sample_surface: n must be >= 1");
    VF_CHECK(!mesh.empty(), "sample_surface: empty mesh");
    const auto cdf = area_cdf(mesh);
    const double total = cdf.back();
    Rng rng(seed, 0xfacade);
    std::vector<SurfaceSample> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const double r = rng.uniform() * total;
        const size_t f = static_cast<size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
        const auto& t = mesh.triangles[std::min(f, mesh.triangles.size() - 1)];
        // uniform barycentric via sqrt trick
        const double su = std::sqrt(rng.uniform());
        const double v = rng.uniform();
        const double b0 = 1.0 - su, b1 = su * (1.0 - v), b2 = su * v;
        const size_t fi = std::min(f, mesh.triangles.size() - 1);
        out.push_back({mesh.vertices[t[0]] * b0 + mesh.vertices[t[1]] * b1 +
                           mesh.vertices[t[2]] * b2,
                       mesh.face_normal(fi), mesh.label_of(fi)});
    }
    return out;
}

std::vector<Vec3d> sample_surface(const TriMesh& mesh, size_t n, uint64_t seed) {
    auto full = sample_surface_full(mesh, n, seed);
    std::vector<Vec3d> out;
    out.reserve(n);
    for (const auto& s : full) out.push_back(s.position);
    return out;
}

}  // namespace voxflow
