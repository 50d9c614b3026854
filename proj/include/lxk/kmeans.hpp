#ifndef LXK_KMEANS_HPP
#define LXK_KMEANS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "types.hpp"

/**
 * @file kmeans.hpp
 *
 * @brief Lloyd's k-means with k-means++ seeding.
 */

namespace lxk {

namespace detail {

inline double squared_distance(const double* a, const double* b, std::size_t d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace detail

/**
 * Sampling weights for the next k-means++ centroid: the squared distance of
 * every point to its closest already-chosen centroid, normalized to sum to 1.
 * Chosen points (and their exact duplicates) have weight 0. Returns all zeros
 * when every point coincides with a chosen centroid.
 */
inline std::vector<double> kmeans_pp_weights(const MatrixD& points, const std::vector<std::size_t>& chosen) {
    const auto n = static_cast<std::size_t>(points.rows());
    const auto d = static_cast<std::size_t>(points.cols());
    std::vector<double> weights(n, std::numeric_limits<double>::infinity());
    for (auto c : chosen) {
        for (std::size_t i = 0; i < n; ++i) {
            weights[i] = std::min(weights[i], detail::squared_distance(points.row(i).data(), points.row(c).data(), d));
        }
    }
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    for (double& w : weights) {
        w = total > 0.0 ? w / total : 0.0;
    }
    return weights;
}

/**
 * Indices of `k` points chosen by k-means++: the first uniformly, each later
 * one with probability proportional to its squared distance from the closest
 * chosen centroid. If all remaining mass is zero (duplicated data), the next
 * index is drawn uniformly from the points not chosen yet.
 */
inline std::vector<std::size_t> kmeans_pp_indices(const MatrixD& points, std::size_t k, std::uint64_t seed) {
    const auto n = static_cast<std::size_t>(points.rows());
    const auto d = static_cast<std::size_t>(points.cols());
    if (k < 1) {
        throw ArgumentError("kmeans++: k must be at least 1");
    }
    if (n < k) {
        throw ArgumentError("kmeans++: need at least k=" + std::to_string(k) + " points, got " + std::to_string(n));
    }
    Rng rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    std::vector<char> taken(n, 0);
    std::vector<double> closest(n, std::numeric_limits<double>::infinity());

    auto take = [&](std::size_t index) {
        chosen.push_back(index);
        taken[index] = 1;
        const double* c = points.row(index).data();
        for (std::size_t i = 0; i < n; ++i) {
            closest[i] = std::min(closest[i], detail::squared_distance(points.row(i).data(), c, d));
        }
    };

    take(uniform_index(rng, n));
    while (chosen.size() < k) {
        double total = 0.0;
        for (double w : closest) {
            total += w;
        }
        if (total > 0.0) {
            double target = uniform01(rng) * total;
            double running = 0.0;
            std::size_t pick = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (closest[i] <= 0.0) {
                    continue;
                }
                running += closest[i];
                pick = i;
                if (running > target) {
                    break;
                }
            }
            take(pick);
        } else {
            std::vector<std::size_t> remaining;
            for (std::size_t i = 0; i < n; ++i) {
                if (!taken[i]) {
                    remaining.push_back(i);
                }
            }
            take(remaining[uniform_index(rng, remaining.size())]);
        }
    }
    return chosen;
}

/// k-means++ initial centroids as a k x d matrix.
inline MatrixD kmeans_pp_init(const MatrixD& points, std::size_t k, std::uint64_t seed) {
    auto indices = kmeans_pp_indices(points, k, seed);
    MatrixD centroids(static_cast<Eigen::Index>(k), points.cols());
    for (std::size_t c = 0; c < k; ++c) {
        centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(indices[c]));
    }
    return centroids;
}

struct KMeansOptions {
    std::size_t max_iter = 100;
    /// Convergence threshold on the largest centroid shift (Euclidean).
    double tol = 1e-4;
    std::uint64_t seed = 0;
    int workers = 0;
    /// Start from these centroids instead of k-means++ seeding.
    std::optional<MatrixD> initial_centroids;
};

struct KMeansModel {
    MatrixD centroids;
    /// Sum of squared distances from points to their assigned centroid.
    double inertia = 0.0;
    std::size_t iterations_run = 0;
    /// Inertia after each assignment step, in order.
    std::vector<double> inertia_history;
};

struct KMeansResult {
    KMeansModel model;
    /// Cluster index per point (not canonicalized: matches centroid rows).
    std::vector<std::int32_t> labels;
};

/// Nearest centroid (squared Euclidean), ties to the lowest index.
inline std::pair<std::int32_t, double> nearest_centroid(const double* point, const MatrixD& centroids) {
    const auto d = static_cast<std::size_t>(centroids.cols());
    std::int32_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        double dist = detail::squared_distance(point, centroids.row(c).data(), d);
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<std::int32_t>(c);
        }
    }
    return {best, best_dist};
}

/**
 * Lloyd iterations from k-means++ (or given) centroids until the largest
 * centroid shift drops below `tol` or `max_iter` is reached.
 *
 * The assignment step runs in parallel over points; the update step is a
 * sequential reduction in point order. An empty cluster is repaired by
 * moving into it the point farthest from its own centroid.
 */
inline KMeansResult kmeans(const MatrixD& points, std::size_t k, const KMeansOptions& options = {}) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k < 1 || n < k) {
        throw ArgumentError("kmeans: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    }

    KMeansResult result;
    auto& model = result.model;
    if (options.initial_centroids) {
        if (static_cast<std::size_t>(options.initial_centroids->rows()) != k ||
            options.initial_centroids->cols() != points.cols()) {
            throw ArgumentError("kmeans: initial centroids must be k x d");
        }
        model.centroids = *options.initial_centroids;
    } else {
        model.centroids = kmeans_pp_init(points, k, options.seed);
    }

    auto& labels = result.labels;
    labels.assign(n, 0);
    std::vector<double> dists(n, 0.0);

    auto assign = [&] {
        parallel_for(
            n,
            [&](std::size_t i) {
                auto [label, dist] = nearest_centroid(points.row(static_cast<Eigen::Index>(i)).data(), model.centroids);
                labels[i] = label;
                dists[i] = dist;
            },
            options.workers);
        double inertia = 0.0;
        for (double v : dists) {
            inertia += v;
        }
        return inertia;
    };

    model.inertia = assign();
    model.inertia_history.push_back(model.inertia);

    std::vector<std::size_t> counts(k);
    MatrixD sums(static_cast<Eigen::Index>(k), points.cols());
    for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
        // Repair empty clusters before the update.
        std::fill(counts.begin(), counts.end(), 0);
        for (auto l : labels) {
            ++counts[static_cast<std::size_t>(l)];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                continue;
            }
            std::size_t far = n;
            double far_dist = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[static_cast<std::size_t>(labels[i])] > 1 && dists[i] > far_dist) {
                    far_dist = dists[i];
                    far = i;
                }
            }
            if (far == n) {
                break;
            }
            --counts[static_cast<std::size_t>(labels[far])];
            labels[far] = static_cast<std::int32_t>(c);
            dists[far] = 0.0;
            counts[c] = 1;
        }

        sums.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(labels[i]) += points.row(static_cast<Eigen::Index>(i));
        }
        double max_shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                continue;
            }
            auto row = static_cast<Eigen::Index>(c);
            Eigen::RowVectorXd updated = sums.row(row) / static_cast<double>(counts[c]);
            max_shift = std::max(max_shift, (updated - model.centroids.row(row)).norm());
            model.centroids.row(row) = updated;
        }
        model.iterations_run = iter + 1;
        model.inertia = assign();
        model.inertia_history.push_back(model.inertia);
        if (max_shift < options.tol) {
            break;
        }
    }
    return result;
}

}  // namespace lxk

#endif
