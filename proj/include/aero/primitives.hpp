#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "aero/mesh.hpp"
#include "aero/vec3.hpp"

namespace aero {

/// Axis-aligned box centered at the origin, 12 triangles with consistent
/// outward winding and shared vertices (already merged topology).
inline TriangleMesh make_box(const Vec3& extents) {
    double hx = extents.x / 2, hy = extents.y / 2, hz = extents.z / 2;
    TriangleMesh mesh;
    mesh.vertices = {
        {-hx, -hy, -hz}, {hx, -hy, -hz}, {hx, hy, -hz}, {-hx, hy, -hz},
        {-hx, -hy, hz},  {hx, -hy, hz},  {hx, hy, hz},  {-hx, hy, hz},
    };
    mesh.faces = {
        {0, 2, 1}, {0, 3, 2},  // bottom  (-z)
        {4, 5, 6}, {4, 6, 7},  // top     (+z)
        {0, 1, 5}, {0, 5, 4},  // front   (-y)
        {2, 3, 7}, {2, 7, 6},  // back    (+y)
        {0, 4, 7}, {0, 7, 3},  // left    (-x)
        {1, 2, 6}, {1, 6, 5},  // right   (+x)
    };
    for (const auto& tri : mesh.faces) {
        mesh.face_normals.push_back(detail::face_normal(
            mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]));
    }
    return mesh;
}

/// Icosphere: icosahedron subdivided `subdivisions` times, vertices projected
/// to the given radius. Closed, consistently oriented, shared vertices.
inline TriangleMesh make_icosphere(double radius, int subdivisions = 2) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    std::vector<std::array<std::uint32_t, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
    };

    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) -> std::uint32_t {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            std::uint32_t idx = static_cast<std::uint32_t>(verts.size());
            verts.push_back((verts[a] + verts[b]) / 2.0);
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<std::array<std::uint32_t, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            std::uint32_t ab = mid(f[0], f[1]);
            std::uint32_t bc = mid(f[1], f[2]);
            std::uint32_t ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }

    TriangleMesh mesh;
    mesh.vertices.reserve(verts.size());
    for (const Vec3& v : verts) mesh.vertices.push_back(v.normalized() * radius);
    mesh.faces = std::move(faces);
    // Ensure outward orientation (sphere is star-shaped about the origin).
    for (auto& tri : mesh.faces) {
        Vec3 centroid = (mesh.vertices[tri[0]] + mesh.vertices[tri[1]] + mesh.vertices[tri[2]]) / 3.0;
        Vec3 n = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                     .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
        if (n.dot(centroid) < 0.0) std::swap(tri[1], tri[2]);
        mesh.face_normals.push_back(detail::face_normal(
            mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]));
    }
    return mesh;
}

} // namespace aero
