#ifndef LXK_AGGLOMERATIVE_HPP
#define LXK_AGGLOMERATIVE_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "error.hpp"
#include "kmeans.hpp"
#include "types.hpp"

/**
 * @file agglomerative.hpp
 *
 * @brief Ward agglomerative clustering via the nearest-neighbor chain.
 */

namespace lxk {

/// One merge of the dendrogram. `a` and `b` are representative point indices
/// of the two merged clusters; `height` is the Ward merge distance.
struct Merge {
    std::size_t a = 0;
    std::size_t b = 0;
    double height = 0.0;
    std::size_t size = 0;
};

/// Merges sorted by non-decreasing height; `merges.size() == n - 1`.
struct Dendrogram {
    std::size_t n = 0;
    std::vector<Merge> merges;
};

struct WardOptions {
    /// Refuse to allocate a dissimilarity matrix larger than this.
    std::size_t memory_budget_bytes = std::size_t{4} << 30;
};

/**
 * Ward linkage over the rows of `points`, optionally weighted (a row with
 * weight w stands for w coincident points, as for BIRCH subclusters).
 *
 * Dissimilarities start at 2 w_i w_j / (w_i + w_j) |x_i - x_j|^2, i.e. twice
 * the increase in within-cluster sum of squares, and are updated with the
 * Lance-Williams recurrence for Ward. Ties in nearest-neighbor searches go to
 * the previous chain element, then to the lowest index.
 */
inline Dendrogram ward_linkage(const MatrixD& points, const std::vector<double>& weights = {},
                               const WardOptions& options = {}) {
    const auto n = static_cast<std::size_t>(points.rows());
    const auto dim = static_cast<std::size_t>(points.cols());
    if (!weights.empty() && weights.size() != n) {
        throw ArgumentError("ward_linkage: weight count does not match point count");
    }
    Dendrogram dendrogram;
    dendrogram.n = n;
    if (n < 2) {
        return dendrogram;
    }
    if (n * (n - 1) / 2 * sizeof(double) > options.memory_budget_bytes) {
        throw BudgetError("ward_linkage: dissimilarity matrix for n=" + std::to_string(n) + " exceeds the memory budget");
    }

    std::vector<double> size(n);
    for (std::size_t i = 0; i < n; ++i) {
        size[i] = weights.empty() ? 1.0 : weights[i];
        if (!(size[i] > 0.0)) {
            throw ArgumentError("ward_linkage: weights must be positive");
        }
    }

    auto index = [n](std::size_t i, std::size_t j) {
        if (i > j) {
            std::swap(i, j);
        }
        return i * n - i * (i + 1) / 2 + (j - i - 1);
    };
    std::vector<double> dist(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double sq = detail::squared_distance(points.row(static_cast<Eigen::Index>(i)).data(),
                                                 points.row(static_cast<Eigen::Index>(j)).data(), dim);
            dist[index(i, j)] = 2.0 * size[i] * size[j] / (size[i] + size[j]) * sq;
        }
    }

    std::vector<char> active(n, 1);
    std::vector<std::size_t> chain;
    chain.reserve(n);
    std::vector<Merge> merges;
    merges.reserve(n - 1);

    for (std::size_t remaining = n; remaining > 1; --remaining) {
        if (chain.empty()) {
            std::size_t first = 0;
            while (!active[first]) {
                ++first;
            }
            chain.push_back(first);
        }
        std::size_t a = 0;
        std::size_t b = 0;
        double best = 0.0;
        while (true) {
            a = chain.back();
            std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : n;
            std::size_t nearest = n;
            best = std::numeric_limits<double>::infinity();
            if (prev != n) {
                nearest = prev;
                best = dist[index(a, prev)];
            }
            for (std::size_t x = 0; x < n; ++x) {
                if (!active[x] || x == a) {
                    continue;
                }
                double d = dist[index(a, x)];
                if (d < best) {
                    best = d;
                    nearest = x;
                }
            }
            if (nearest == prev) {
                b = prev;
                break;
            }
            chain.push_back(nearest);
        }
        chain.pop_back();
        chain.pop_back();

        // The merged cluster lives in the lower slot.
        std::size_t keep = std::min(a, b);
        std::size_t drop = std::max(a, b);
        const double na = size[keep];
        const double nb = size[drop];
        for (std::size_t x = 0; x < n; ++x) {
            if (!active[x] || x == keep || x == drop) {
                continue;
            }
            const double nx = size[x];
            double updated = ((na + nx) * dist[index(keep, x)] + (nb + nx) * dist[index(drop, x)] - nx * best) /
                             (na + nb + nx);
            dist[index(keep, x)] = updated;
        }
        active[drop] = 0;
        size[keep] = na + nb;
        merges.push_back({keep, drop, best, static_cast<std::size_t>(std::llround(na + nb))});
    }

    std::stable_sort(merges.begin(), merges.end(), [](const Merge& x, const Merge& y) { return x.height < y.height; });
    dendrogram.merges = std::move(merges);
    return dendrogram;
}

/// Flat labels (canonical, first-appearance order) after applying the lowest n - k merges.
inline std::vector<std::int32_t> cut_dendrogram(const Dendrogram& dendrogram, std::size_t k) {
    const std::size_t n = dendrogram.n;
    if (k < 1 || k > n) {
        throw ArgumentError("cut_dendrogram: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    }
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    for (std::size_t m = 0; m < n - k; ++m) {
        auto ra = find(dendrogram.merges[m].a);
        auto rb = find(dendrogram.merges[m].b);
        if (ra != rb) {
            parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    }
    std::vector<std::size_t> roots(n);
    for (std::size_t i = 0; i < n; ++i) {
        roots[i] = find(i);
    }
    return canonicalize_labels(roots);
}

/// Ward agglomerative clustering of the rows of `points` into exactly `k` clusters.
inline std::vector<std::int32_t> agglomerative_ward(const MatrixD& points, std::size_t k, const WardOptions& options = {}) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k < 1 || k > n) {
        throw ArgumentError("agglomerative_ward: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" +
                            std::to_string(n) + ")");
    }
    return cut_dendrogram(ward_linkage(points, {}, options), k);
}

}  // namespace lxk

#endif
