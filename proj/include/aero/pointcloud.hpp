#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aero/errors.hpp"
#include "aero/knn.hpp"
#include "aero/mesh.hpp"
#include "aero/rng.hpp"
#include "aero/util.hpp"
#include "aero/vec3.hpp"

namespace aero {

/// Fixed-size surface sample of one design. Coordinates are stored flat,
/// row-major n x 3, in double for metric work; the disk cache narrows to
/// float32.
struct PointCloud {
    std::vector<double> xyz;
    std::string design_id;
    std::optional<std::uint64_t> sample_seed;

    std::size_t size() const { return xyz.size() / 3; }
    const double* point(std::size_t i) const { return xyz.data() + i * 3; }
};

/// Map applied before inference: normalized = (p - translation) / scale.
/// Recorded so predictions stay reproducible and reversible.
struct NormalizationTransform {
    Vec3 translation;
    double scale = 1.0;
};

/// Draws n points with per-face probability proportional to area and uniform
/// barycentric placement. The stream contract is fixed: point i consumes
/// exactly three uniform doubles (face pick, then two barycentric draws) from
/// Pcg32(seed), so identical (mesh, n, seed) reproduce bit-identical output.
inline PointCloud sample_surface(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw Error("sample_surface: n must be >= 1");
    SurfaceAreas areas = surface_areas(mesh);
    if (areas.total < 1e-18) throw ZeroAreaMesh("sample_surface: total surface area below 1e-18");

    std::vector<double> cumulative(areas.per_face.size());
    double acc = 0.0;
    for (std::size_t f = 0; f < areas.per_face.size(); ++f) {
        acc += areas.per_face[f];
        cumulative[f] = acc;
    }
    const double total = acc;

    Pcg32 rng(seed);
    PointCloud pc;
    pc.sample_seed = seed;
    pc.xyz.resize(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        double r = rng.next_double() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        std::size_t f = std::min(static_cast<std::size_t>(it - cumulative.begin()),
                                 cumulative.size() - 1);
        double u = rng.next_double();
        double v = rng.next_double();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        const auto& tri = mesh.faces[f];
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        Vec3 p = a + (b - a) * u + (c - a) * v;
        pc.xyz[i * 3 + 0] = p.x;
        pc.xyz[i * 3 + 1] = p.y;
        pc.xyz[i * 3 + 2] = p.z;
    }
    return pc;
}

/// Centers the cloud on its centroid and scales the farthest point to unit
/// norm. Degenerate clouds (max radius < 1e-12) keep scale 1.
inline std::pair<PointCloud, NormalizationTransform> normalize_unit_sphere(const PointCloud& pc) {
    const std::size_t n = pc.size();
    NormalizationTransform transform;
    PointCloud out = pc;
    if (n == 0) return {out, transform};

    Vec3 centroid{0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        centroid.x += pc.xyz[i * 3 + 0];
        centroid.y += pc.xyz[i * 3 + 1];
        centroid.z += pc.xyz[i * 3 + 2];
    }
    centroid = centroid / static_cast<double>(n);

    double max_r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 p{pc.xyz[i * 3], pc.xyz[i * 3 + 1], pc.xyz[i * 3 + 2]};
        max_r = std::max(max_r, (p - centroid).norm());
    }
    double scale = max_r < 1e-12 ? 1.0 : max_r;
    for (std::size_t i = 0; i < n; ++i) {
        out.xyz[i * 3 + 0] = (pc.xyz[i * 3 + 0] - centroid.x) / scale;
        out.xyz[i * 3 + 1] = (pc.xyz[i * 3 + 1] - centroid.y) / scale;
        out.xyz[i * 3 + 2] = (pc.xyz[i * 3 + 2] - centroid.z) / scale;
    }
    transform.translation = centroid;
    transform.scale = scale;
    return {out, transform};
}

/// Chamfer distance
///   CD(A,B) = (1/|A|) sum_a min_b ||a-b||^2 + (1/|B|) sum_b min_a ||a-b||^2.
/// Nearest neighbors come from the exact spatial grid; per-direction terms
/// are combined with pairwise summation so the result does not depend on
/// evaluation order.
inline double chamfer_distance(const PointCloud& a, const PointCloud& b) {
    if (a.size() == 0 || b.size() == 0) throw EmptyCloud("chamfer_distance: empty cloud");
    auto direction = [](const PointCloud& from, const PointCloud& to) {
        SpatialGrid<double> grid(std::span<const double>(to.xyz), to.size());
        std::vector<double> mins(from.size());
        for (std::size_t i = 0; i < from.size(); ++i) {
            mins[i] = grid.nearest(from.point(i)).d2;
        }
        return pairwise_sum(mins) / static_cast<double>(from.size());
    };
    return direction(a, b) + direction(b, a);
}

/// Mean Chamfer distance over all unordered cloud pairs.
inline double diversity_score(const std::vector<PointCloud>& clouds, unsigned threads = 1) {
    if (clouds.size() < 2) throw TooFewClouds("diversity_score: need at least 2 clouds");
    const std::size_t m = clouds.size();
    const std::size_t pairs = m * (m - 1) / 2;
    std::vector<double> cd(pairs);
    parallel_for(pairs, threads, [&](std::size_t p) {
        // unrank p -> (i, j), i < j, ordered (0,1), (0,2), ..., (1,2), ...
        std::size_t i = 0;
        std::size_t rem = p;
        std::size_t row = m - 1;
        while (rem >= row) {
            rem -= row;
            ++i;
            --row;
        }
        std::size_t j = i + 1 + rem;
        cd[p] = chamfer_distance(clouds[i], clouds[j]);
    });
    return pairwise_sum(cd) / static_cast<double>(pairs);
}

/// Seeded subsample of m points without replacement (partial Fisher-Yates).
/// Returns the cloud unchanged when it has at most m points.
inline PointCloud subsample(const PointCloud& pc, std::size_t m, std::uint64_t seed) {
    const std::size_t n = pc.size();
    if (n <= m) return pc;
    std::vector<std::uint32_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(i);
    Pcg32 rng(seed);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(n - i));
        std::swap(idx[i], idx[j]);
    }
    PointCloud out;
    out.design_id = pc.design_id;
    out.sample_seed = pc.sample_seed;
    out.xyz.resize(m * 3);
    for (std::size_t i = 0; i < m; ++i) {
        const double* p = pc.point(idx[i]);
        out.xyz[i * 3 + 0] = p[0];
        out.xyz[i * 3 + 1] = p[1];
        out.xyz[i * 3 + 2] = p[2];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Disk cache: magic "DAPC", u32 version, u32 point count, n*3 float32 LE.
// File name <design_id>_<n>_<seed>.dapc.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCacheVersion = 1;

inline std::string cache_filename(const std::string& design_id, std::size_t n, std::uint64_t seed) {
    return design_id + "_" + std::to_string(n) + "_" + std::to_string(seed) + ".dapc";
}

inline void save_cache(const std::string& path, const PointCloud& pc) {
    std::vector<std::uint8_t> buf;
    buf.reserve(12 + pc.size() * 12);
    buf.insert(buf.end(), {'D', 'A', 'P', 'C'});
    detail::write_u32_le(buf, kCacheVersion);
    detail::write_u32_le(buf, static_cast<std::uint32_t>(pc.size()));
    for (double v : pc.xyz) detail::write_f32_le(buf, static_cast<float>(v));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write cache file: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write: " + path);
}

inline PointCloud load_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open cache file: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 12 || buf[0] != 'D' || buf[1] != 'A' || buf[2] != 'P' || buf[3] != 'C') {
        throw CorruptFile("point-cloud cache: bad magic: " + path);
    }
    std::uint32_t version = detail::read_u32_le(buf.data() + 4);
    if (version != kCacheVersion) {
        throw VersionMismatch("point-cloud cache: version " + std::to_string(version) +
                              ", expected " + std::to_string(kCacheVersion));
    }
    std::uint32_t count = detail::read_u32_le(buf.data() + 8);
    if (buf.size() != 12 + static_cast<std::size_t>(count) * 12) {
        throw CorruptFile("point-cloud cache: truncated payload: " + path);
    }
    PointCloud pc;
    pc.xyz.resize(static_cast<std::size_t>(count) * 3);
    for (std::size_t i = 0; i < pc.xyz.size(); ++i) {
        pc.xyz[i] = static_cast<double>(detail::read_f32_le(buf.data() + 12 + i * 4));
    }
    return pc;
}

} // namespace aero
