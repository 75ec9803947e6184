#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aero/errors.hpp"
#include "aero/util.hpp"
#include "aero/vec3.hpp"

namespace aero {

/// Indexed triangle mesh. Fresh from the parser it is a raw soup (three
/// private vertex slots per face); merge_vertices() welds it into shared
/// topology, which the feasibility checks require.
struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<Vec3> face_normals;  // unit length, zero for degenerate faces

    std::size_t vertex_count() const { return vertices.size(); }
    std::size_t face_count() const { return faces.size(); }
};

/// Outcome of the geometric feasibility checks. Surface self-intersection is
/// not checked; see docs/README for the documented gap.
struct FeasibilityReport {
    bool is_watertight = false;
    std::size_t boundary_edge_count = 0;
    std::size_t non_manifold_edge_count = 0;
    std::size_t degenerate_face_count = 0;
    bool is_consistently_oriented = false;
};

struct MergeResult {
    TriangleMesh mesh;
    std::size_t degenerate_faces_dropped = 0;
};

struct SurfaceAreas {
    std::vector<double> per_face;
    double total = 0.0;
};

namespace detail {

inline std::uint32_t read_u32_le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline float read_f32_le(const std::uint8_t* p) {
    return std::bit_cast<float>(read_u32_le(p));
}

inline void write_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline void write_f32_le(std::vector<std::uint8_t>& out, float f) {
    write_u32_le(out, std::bit_cast<std::uint32_t>(f));
}

inline Vec3 face_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
    return (b - a).cross(c - a).normalized();
}

/// Whitespace tokenizer over the ASCII STL body that tracks line numbers for
/// error reporting.
class StlLexer {
public:
    explicit StlLexer(std::string_view text) : text_(text) {}

    /// Next token, empty when exhausted.
    std::string_view next() {
        while (pos_ < text_.size() && is_space(text_[pos_])) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
        std::size_t start = pos_;
        while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
        return text_.substr(start, pos_ - start);
    }

    std::size_t line() const { return line_; }

private:
    static bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        char ca = a[i], cb = b[i];
        if (ca >= 'A' && ca <= 'Z') ca = static_cast<char>(ca - 'A' + 'a');
        if (cb >= 'A' && cb <= 'Z') cb = static_cast<char>(cb - 'A' + 'a');
        if (ca != cb) return false;
    }
    return true;
}

inline TriangleMesh parse_stl_ascii(std::string_view text) {
    StlLexer lex(text);
    auto expect = [&](std::string_view kw) {
        std::string_view tok = lex.next();
        if (!iequals(tok, kw)) {
            throw MalformedAscii("STL ASCII: expected '" + std::string(kw) + "', got '" +
                                 std::string(tok) + "' at line " + std::to_string(lex.line()));
        }
    };
    auto number = [&]() -> double {
        std::string_view tok = lex.next();
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) {
            throw MalformedAscii("STL ASCII: expected number, got '" + std::string(tok) +
                                 "' at line " + std::to_string(lex.line()));
        }
        return value;
    };

    expect("solid");
    // Optional name: consume tokens until 'facet'/'endsolid' on a later line is
    // fragile; STL names are single-line, so skip the rest of the header line.
    // The lexer is word based, so instead peek tokens until one is a keyword.
    TriangleMesh mesh;
    std::string_view tok = lex.next();
    while (!tok.empty() && !iequals(tok, "facet") && !iequals(tok, "endsolid")) tok = lex.next();

    while (iequals(tok, "facet")) {
        expect("normal");
        number(); number(); number();  // embedded normal, recomputed below
        expect("outer");
        expect("loop");
        std::array<Vec3, 3> v;
        for (int i = 0; i < 3; ++i) {
            expect("vertex");
            v[i].x = number();
            v[i].y = number();
            v[i].z = number();
        }
        expect("endloop");
        expect("endfacet");

        std::uint32_t base = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(v[0]);
        mesh.vertices.push_back(v[1]);
        mesh.vertices.push_back(v[2]);
        mesh.faces.push_back({base, base + 1, base + 2});
        mesh.face_normals.push_back(face_normal(v[0], v[1], v[2]));
        tok = lex.next();
    }
    // 'endsolid <name>' or bare EOF after the last facet are both accepted.
    if (mesh.faces.empty()) throw EmptyMesh("STL ASCII: no facets");
    return mesh;
}

inline TriangleMesh parse_stl_binary(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 84) throw TruncatedBinary("binary STL: shorter than the 84-byte preamble");
    std::uint32_t count = read_u32_le(bytes.data() + 80);
    if (count == 0) throw EmptyMesh("binary STL: zero facets declared");
    std::size_t needed = 84 + static_cast<std::size_t>(count) * 50;
    if (bytes.size() < needed) {
        throw TruncatedBinary("binary STL: header declares " + std::to_string(count) +
                              " facets (" + std::to_string(needed) + " bytes) but file has " +
                              std::to_string(bytes.size()));
    }
    TriangleMesh mesh;
    mesh.vertices.reserve(3 * static_cast<std::size_t>(count));
    mesh.faces.reserve(count);
    mesh.face_normals.reserve(count);
    const std::uint8_t* p = bytes.data() + 84;
    for (std::uint32_t f = 0; f < count; ++f, p += 50) {
        // record: normal (3 f32), vertices (9 f32), attribute (u16, ignored)
        std::array<Vec3, 3> v;
        for (int i = 0; i < 3; ++i) {
            v[i].x = read_f32_le(p + 12 + 12 * i);
            v[i].y = read_f32_le(p + 12 + 12 * i + 4);
            v[i].z = read_f32_le(p + 12 + 12 * i + 8);
        }
        std::uint32_t base = static_cast<std::uint32_t>(mesh.vertices.size());
        mesh.vertices.push_back(v[0]);
        mesh.vertices.push_back(v[1]);
        mesh.vertices.push_back(v[2]);
        mesh.faces.push_back({base, base + 1, base + 2});
        mesh.face_normals.push_back(face_normal(v[0], v[1], v[2]));
    }
    return mesh;
}

} // namespace detail

/// Parses STL bytes into a raw triangle soup. Binary vs ASCII is
/// auto-detected: a file is ASCII only when it starts with "solid" AND its
/// length is inconsistent with the binary layout (binary files legally begin
/// with "solid" too). Face normals are recomputed from the vertex winding;
/// embedded normals are frequently stale and are ignored.
inline TriangleMesh parse_stl(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw EmptyMesh("STL: empty input");
    bool starts_solid = bytes.size() >= 5 && std::memcmp(bytes.data(), "solid", 5) == 0;
    bool binary_consistent = false;
    if (bytes.size() >= 84) {
        std::uint32_t count = detail::read_u32_le(bytes.data() + 80);
        binary_consistent = bytes.size() == 84 + static_cast<std::size_t>(count) * 50;
    }
    if (starts_solid && !binary_consistent) {
        return detail::parse_stl_ascii(
            std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    }
    return detail::parse_stl_binary(bytes);
}

inline TriangleMesh parse_stl(const std::vector<std::uint8_t>& bytes) {
    return parse_stl(std::span<const std::uint8_t>(bytes));
}

inline TriangleMesh parse_stl_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open STL file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_stl(bytes);
}

/// Serializes to binary STL with a normalized (fixed) header, recomputed
/// normals, and zero attribute words.
inline std::vector<std::uint8_t> write_stl_binary(const TriangleMesh& mesh) {
    std::vector<std::uint8_t> out;
    out.reserve(84 + mesh.faces.size() * 50);
    const char header[] = "binary STL";
    for (std::size_t i = 0; i < 80; ++i) {
        out.push_back(i < sizeof(header) - 1 ? static_cast<std::uint8_t>(header[i]) : 0);
    }
    detail::write_u32_le(out, static_cast<std::uint32_t>(mesh.faces.size()));
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        const Vec3& a = mesh.vertices[tri[0]];
        const Vec3& b = mesh.vertices[tri[1]];
        const Vec3& c = mesh.vertices[tri[2]];
        Vec3 n = detail::face_normal(a, b, c);
        detail::write_f32_le(out, static_cast<float>(n.x));
        detail::write_f32_le(out, static_cast<float>(n.y));
        detail::write_f32_le(out, static_cast<float>(n.z));
        for (const Vec3* v : {&a, &b, &c}) {
            detail::write_f32_le(out, static_cast<float>(v->x));
            detail::write_f32_le(out, static_cast<float>(v->y));
            detail::write_f32_le(out, static_cast<float>(v->z));
        }
        out.push_back(0);
        out.push_back(0);
    }
    return out;
}

inline void write_stl_file(const std::string& path, const TriangleMesh& mesh) {
    std::vector<std::uint8_t> bytes = write_stl_binary(mesh);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write STL file: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write: " + path);
}

namespace detail {

inline std::int64_t snap_coord(double v, double epsilon) {
    if (epsilon == 0.0) {
        if (v == 0.0) v = 0.0;  // collapse -0.0 so exact equality merges
        return std::bit_cast<std::int64_t>(v);
    }
    return static_cast<std::int64_t>(std::floor(v / epsilon));
}

} // namespace detail

/// Welds vertices that fall into the same epsilon-sized grid cell (max-norm
/// snapping; deterministic and linear-time, unlike pairwise search). The
/// first vertex seen in a cell keeps its exact coordinates. epsilon 0 merges
/// bit-identical duplicates only. Faces collapsing to fewer than 3 distinct
/// vertices are dropped and reported.
inline MergeResult merge_vertices(const TriangleMesh& mesh, double epsilon = 1e-6) {
    if (epsilon < 0.0) throw Error("merge_vertices: epsilon must be >= 0");
    std::unordered_map<detail::GridKey, std::uint32_t, detail::GridKeyHash> cells;
    cells.reserve(mesh.vertices.size());
    std::vector<std::uint32_t> remap(mesh.vertices.size());

    MergeResult result;
    TriangleMesh& out = result.mesh;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& v = mesh.vertices[i];
        detail::GridKey key{{detail::snap_coord(v.x, epsilon), detail::snap_coord(v.y, epsilon),
                             detail::snap_coord(v.z, epsilon)}};
        auto [it, inserted] = cells.try_emplace(key, static_cast<std::uint32_t>(out.vertices.size()));
        if (inserted) out.vertices.push_back(v);
        remap[i] = it->second;
    }
    for (const auto& tri : mesh.faces) {
        std::array<std::uint32_t, 3> m{remap[tri[0]], remap[tri[1]], remap[tri[2]]};
        if (m[0] == m[1] || m[1] == m[2] || m[0] == m[2]) {
            ++result.degenerate_faces_dropped;
            continue;
        }
        out.faces.push_back(m);
        out.face_normals.push_back(detail::face_normal(out.vertices[m[0]], out.vertices[m[1]],
                                                       out.vertices[m[2]]));
    }
    return result;
}

/// Edge-based topology checks on a merged mesh. An undirected edge with
/// exactly one incident face is a boundary edge; with more than two,
/// non-manifold. Orientation is consistent iff every 2-incident edge is
/// traversed in opposite directions by its two faces. Reports, never throws.
inline FeasibilityReport validate_feasibility(const TriangleMesh& mesh) {
    struct EdgeInfo {
        std::uint32_t incident = 0;
        std::uint32_t forward = 0;  // traversals in low-index -> high-index direction
    };
    std::unordered_map<std::uint64_t, EdgeInfo> edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const auto& tri : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            std::uint32_t a = tri[e];
            std::uint32_t b = tri[(e + 1) % 3];
            std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
            EdgeInfo& info = edges[key];
            ++info.incident;
            if (a < b) ++info.forward;
        }
    }

    FeasibilityReport report;
    report.is_consistently_oriented = true;
    for (const auto& [key, info] : edges) {
        (void)key;
        if (info.incident == 1) ++report.boundary_edge_count;
        if (info.incident > 2) ++report.non_manifold_edge_count;
        if (info.incident == 2 && info.forward != 1) report.is_consistently_oriented = false;
    }
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& tri = mesh.faces[f];
        Vec3 cr = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                      .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
        if (cr.norm() == 0.0) ++report.degenerate_face_count;
    }
    report.is_watertight =
        report.boundary_edge_count == 0 && report.non_manifold_edge_count == 0;
    return report;
}

/// Per-face areas (half cross-product magnitude) and their total.
inline SurfaceAreas surface_areas(const TriangleMesh& mesh) {
    SurfaceAreas areas;
    areas.per_face.reserve(mesh.faces.size());
    for (const auto& tri : mesh.faces) {
        Vec3 cr = (mesh.vertices[tri[1]] - mesh.vertices[tri[0]])
                      .cross(mesh.vertices[tri[2]] - mesh.vertices[tri[0]]);
        areas.per_face.push_back(0.5 * cr.norm());
    }
    areas.total = pairwise_sum(areas.per_face);
    return areas;
}

/// Number of undirected edges in a merged mesh; with vertex and face counts
/// this gives the Euler characteristic V - E + F.
inline std::size_t undirected_edge_count(const TriangleMesh& mesh) {
    std::unordered_map<std::uint64_t, int> edges;
    edges.reserve(mesh.faces.size() * 3);
    for (const auto& tri : mesh.faces) {
        for (int e = 0; e < 3; ++e) {
            std::uint32_t a = tri[e];
            std::uint32_t b = tri[(e + 1) % 3];
            std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
            edges[key] = 1;
        }
    }
    return edges.size();
}

} // namespace aero
