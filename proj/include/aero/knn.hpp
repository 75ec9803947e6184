#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "aero/errors.hpp"
#include "aero/util.hpp"

namespace aero {

/// k-nearest-neighbor index table: row i lists the k neighbors of point i in
/// ascending (distance, index) order. Rebuilt in the current feature space
/// before every edge-convolution layer.
struct NeighborGraph {
    std::vector<std::uint32_t> indices;  // n*k, row-major
    std::size_t n = 0;
    std::size_t k = 0;
    std::size_t feature_dim = 0;

    std::uint32_t at(std::size_t row, std::size_t slot) const { return indices[row * k + slot]; }
};

namespace detail {

/// Squared Euclidean distance accumulated in double, axes in fixed order.
/// Both the brute-force and grid paths call this, so their distances are
/// bit-identical and tie-breaking by index carries over exactly.
template <typename T>
inline double sq_dist(const T* a, const T* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += diff * diff;
    }
    return acc;
}

struct Candidate {
    double d2;
    std::uint32_t idx;
    bool operator<(const Candidate& o) const {
        return d2 < o.d2 || (d2 == o.d2 && idx < o.idx);
    }
};

inline void check_k(std::size_t n, std::size_t k, bool include_self) {
    std::size_t pool = include_self ? n : (n > 0 ? n - 1 : 0);
    if (k < 1) throw KTooLarge("knn: k must be >= 1");
    if (k > pool) {
        throw KTooLarge("knn: k=" + std::to_string(k) + " exceeds available neighbors (n=" +
                        std::to_string(n) + ")");
    }
}

} // namespace detail

/// Dense n-by-n squared-distance matrix. Diagonal is exactly zero and the
/// matrix is exactly symmetric (the (i,j) value is mirrored, not recomputed).
template <typename T>
std::vector<double> pairwise_sq_dist(std::span<const T> points, std::size_t n, std::size_t d) {
    if (n < 1 || d < 1) throw Error("pairwise_sq_dist: need n >= 1, d >= 1");
    if (points.size() != n * d) throw ShapeMismatch("pairwise_sq_dist: data size != n*d");
    std::vector<double> out(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double d2 = detail::sq_dist(points.data() + i * d, points.data() + j * d, d);
            out[i * n + j] = d2;
            out[j * n + i] = d2;
        }
    }
    return out;
}

/// Exact brute-force kNN in arbitrary dimension. Row i holds the k
/// smallest-distance indices j != i (j == i allowed with include_self), ties
/// broken by smaller index. Deterministic for identical input.
template <typename T>
NeighborGraph knn_graph(std::span<const T> points, std::size_t n, std::size_t d, std::size_t k,
                        bool include_self = false) {
    if (points.size() != n * d) throw ShapeMismatch("knn_graph: data size != n*d");
    detail::check_k(n, k, include_self);

    NeighborGraph graph;
    graph.n = n;
    graph.k = k;
    graph.feature_dim = d;
    graph.indices.resize(n * k);

    std::vector<detail::Candidate> scratch;
    scratch.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        scratch.clear();
        const T* pi = points.data() + i * d;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i && !include_self) continue;
            scratch.push_back({detail::sq_dist(pi, points.data() + j * d, d),
                               static_cast<std::uint32_t>(j)});
        }
        std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k),
                          scratch.end());
        for (std::size_t s = 0; s < k; ++s) graph.indices[i * k + s] = scratch[s].idx;
    }
    return graph;
}

/// Uniform spatial hash over 3-D points with expanding-shell exact search.
/// Cell size is bounding-box diagonal / cbrt(n). Returns exactly the same
/// neighbors as the brute-force path, including tie outcomes.
template <typename T>
class SpatialGrid {
public:
    SpatialGrid(std::span<const T> points, std::size_t n) : points_(points), n_(n) {
        if (points.size() != n * 3) throw ShapeMismatch("SpatialGrid: data size != n*3");
        if (n == 0) throw Error("SpatialGrid: empty point set");
        for (int a = 0; a < 3; ++a) {
            lo_[a] = hi_[a] = static_cast<double>(points[static_cast<std::size_t>(a)]);
        }
        for (std::size_t i = 1; i < n; ++i) {
            for (int a = 0; a < 3; ++a) {
                double v = static_cast<double>(points[i * 3 + static_cast<std::size_t>(a)]);
                lo_[a] = std::min(lo_[a], v);
                hi_[a] = std::max(hi_[a], v);
            }
        }
        double dx = hi_[0] - lo_[0], dy = hi_[1] - lo_[1], dz = hi_[2] - lo_[2];
        double diag = std::sqrt(dx * dx + dy * dy + dz * dz);
        cell_ = diag / std::cbrt(static_cast<double>(n));
        degenerate_ = !(cell_ > 0.0) || !std::isfinite(cell_);
        if (degenerate_) return;
        cells_.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            cells_[cell_of(points.data() + i * 3)].push_back(static_cast<std::uint32_t>(i));
        }
        for (int a = 0; a < 3; ++a) {
            cell_lo_[a] = 0;
            cell_hi_[a] = static_cast<std::int64_t>(std::floor((hi_[a] - lo_[a]) / cell_));
        }
    }

    /// Exact k nearest neighbors of an arbitrary query point, ascending
    /// (distance, index). exclude = index to skip (pass n or more to keep all).
    std::vector<detail::Candidate> query_knn(const T* q, std::size_t k,
                                             std::size_t exclude = static_cast<std::size_t>(-1)) const {
        if (degenerate_) return brute_knn(q, k, exclude);

        detail::GridKey qc = cell_of(q);
        // Worst-first binary heap of the current best k.
        std::vector<detail::Candidate> heap;
        heap.reserve(k + 1);
        auto worse = [](const detail::Candidate& a, const detail::Candidate& b) { return a < b; };

        std::int64_t s_limit = 0;
        for (int a = 0; a < 3; ++a) {
            std::int64_t c = qc.v[static_cast<std::size_t>(a)];
            s_limit = std::max({s_limit, std::llabs(c - cell_lo_[a]), std::llabs(c - cell_hi_[a])});
        }

        for (std::int64_t s = 0;; ++s) {
            if (s > s_limit) break;  // every occupied cell scanned
            for (std::int64_t dx = -s; dx <= s; ++dx) {
                for (std::int64_t dy = -s; dy <= s; ++dy) {
                    for (std::int64_t dz = -s; dz <= s; ++dz) {
                        if (std::max({std::llabs(dx), std::llabs(dy), std::llabs(dz)}) != s) continue;
                        auto it = cells_.find({{qc.v[0] + dx, qc.v[1] + dy, qc.v[2] + dz}});
                        if (it == cells_.end()) continue;
                        for (std::uint32_t idx : it->second) {
                            if (idx == exclude) continue;
                            detail::Candidate c{detail::sq_dist(q, points_.data() + idx * 3, 3), idx};
                            if (heap.size() < k) {
                                heap.push_back(c);
                                std::push_heap(heap.begin(), heap.end(), worse);
                            } else if (c < heap.front()) {
                                std::pop_heap(heap.begin(), heap.end(), worse);
                                heap.back() = c;
                                std::push_heap(heap.begin(), heap.end(), worse);
                            }
                        }
                    }
                }
            }
            // Points in shells beyond s lie at distance >= s*cell. Stop only on a
            // strict bound so an exact tie in the next shell can still win by index.
            if (heap.size() == k) {
                double bound = static_cast<double>(s) * cell_;
                if (heap.front().d2 < bound * bound) break;
            }
        }
        std::sort_heap(heap.begin(), heap.end(), worse);
        return heap;
    }

    /// Nearest single neighbor; convenience for Chamfer-distance queries.
    detail::Candidate nearest(const T* q, std::size_t exclude = static_cast<std::size_t>(-1)) const {
        return query_knn(q, 1, exclude).front();
    }

private:
    detail::GridKey cell_of(const T* p) const {
        detail::GridKey key{};
        for (std::size_t a = 0; a < 3; ++a) {
            double v = static_cast<double>(p[a]);
            key.v[a] = static_cast<std::int64_t>(std::floor((v - lo_[a]) / cell_));
        }
        return key;
    }

    std::vector<detail::Candidate> brute_knn(const T* q, std::size_t k, std::size_t exclude) const {
        std::vector<detail::Candidate> all;
        all.reserve(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            if (j == exclude) continue;
            all.push_back({detail::sq_dist(q, points_.data() + j * 3, 3),
                           static_cast<std::uint32_t>(j)});
        }
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(k, all.size())),
                          all.end());
        all.resize(std::min(k, all.size()));
        return all;
    }

    std::span<const T> points_;
    std::size_t n_;
    double lo_[3]{}, hi_[3]{};
    double cell_ = 0.0;
    bool degenerate_ = false;
    std::int64_t cell_lo_[3]{}, cell_hi_[3]{};
    std::unordered_map<detail::GridKey, std::vector<std::uint32_t>, detail::GridKeyHash> cells_;
};

/// Spatial-hash-accelerated kNN for 3-D coordinates. Output is identical to
/// knn_graph, including tie-breaking. Feature-space (d > 3) graphs must use
/// the brute-force path.
template <typename T>
NeighborGraph knn_graph_accelerated(std::span<const T> points, std::size_t n, std::size_t k,
                                    bool include_self = false) {
    if (points.size() != n * 3) throw ShapeMismatch("knn_graph_accelerated: data size != n*3");
    detail::check_k(n, k, include_self);

    SpatialGrid<T> grid(points, n);
    NeighborGraph graph;
    graph.n = n;
    graph.k = k;
    graph.feature_dim = 3;
    graph.indices.resize(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        auto best = grid.query_knn(points.data() + i * 3, k,
                                   include_self ? static_cast<std::size_t>(-1) : i);
        for (std::size_t s = 0; s < k; ++s) graph.indices[i * k + s] = best[s].idx;
    }
    return graph;
}

} // namespace aero
