#ifndef LXK_BIRCH_HPP
#define LXK_BIRCH_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "agglomerative.hpp"
#include "error.hpp"
#include "types.hpp"

/**
 * @file birch.hpp
 *
 * @brief BIRCH: a clustering-feature (CF) tree whose leaf subclusters are
 * then merged to exactly k clusters by weighted Ward agglomeration.
 */

namespace lxk {

struct BirchOptions {
    /// Maximum average pairwise distance (diameter) of a leaf subcluster.
    double threshold = 0.25;
    /// Maximum number of entries per tree node.
    std::size_t branching = 50;
    WardOptions ward;
};

namespace detail {

/// Clustering feature: count, linear sum and sum of squared norms.
struct ClusteringFeature {
    double n = 0.0;
    VectorD linear_sum;
    double square_sum = 0.0;

    void add(const ClusteringFeature& other) {
        if (linear_sum.size() == 0) {
            linear_sum = other.linear_sum;
        } else {
            linear_sum += other.linear_sum;
        }
        n += other.n;
        square_sum += other.square_sum;
    }

    VectorD centroid() const { return linear_sum / n; }

    /// Average pairwise distance of the union of this CF with `other`.
    double merged_diameter(const ClusteringFeature& other) const {
        double m = n + other.n;
        if (m < 2.0) {
            return 0.0;
        }
        double ls2 = (linear_sum + other.linear_sum).squaredNorm();
        double sq = (2.0 * m * (square_sum + other.square_sum) - 2.0 * ls2) / (m * (m - 1.0));
        return std::sqrt(std::max(0.0, sq));
    }

    static ClusteringFeature of_point(const VectorD& x) { return {1.0, x, x.squaredNorm()}; }
};

struct BirchNode;

struct BirchEntry {
    ClusteringFeature cf;
    std::unique_ptr<BirchNode> child;  // non-leaf entries only
    std::vector<std::size_t> members;  // leaf entries only
};

struct BirchNode {
    bool leaf = true;
    std::vector<BirchEntry> entries;

    ClusteringFeature summary() const {
        ClusteringFeature cf;
        for (const auto& e : entries) {
            cf.add(e.cf);
        }
        return cf;
    }
};

class CfTree {
public:
    CfTree(double threshold, std::size_t branching) : threshold_(threshold), branching_(branching) {
        root_ = std::make_unique<BirchNode>();
    }

    void insert(const VectorD& x, std::size_t index) {
        auto split = insert_into(*root_, x, index);
        if (split) {
            auto new_root = std::make_unique<BirchNode>();
            new_root->leaf = false;
            BirchEntry left, right;
            left.cf = split->first->summary();
            left.child = std::move(split->first);
            right.cf = split->second->summary();
            right.child = std::move(split->second);
            new_root->entries.push_back(std::move(left));
            new_root->entries.push_back(std::move(right));
            root_ = std::move(new_root);
        }
    }

    /// Leaf entries in depth-first, left-to-right order.
    std::vector<const BirchEntry*> leaf_entries() const {
        std::vector<const BirchEntry*> out;
        collect(*root_, out);
        return out;
    }

private:
    using Split = std::pair<std::unique_ptr<BirchNode>, std::unique_ptr<BirchNode>>;

    static std::size_t closest_entry(const BirchNode& node, const VectorD& x) {
        std::size_t best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < node.entries.size(); ++i) {
            double d = (node.entries[i].cf.centroid() - x).squaredNorm();
            if (d < best_dist) {
                best_dist = d;
                best = i;
            }
        }
        return best;
    }

    std::optional<Split> insert_into(BirchNode& node, const VectorD& x, std::size_t index) {
        auto point = ClusteringFeature::of_point(x);
        if (node.leaf) {
            if (!node.entries.empty()) {
                auto& closest = node.entries[closest_entry(node, x)];
                if (closest.cf.merged_diameter(point) <= threshold_) {
                    closest.cf.add(point);
                    closest.members.push_back(index);
                    return std::nullopt;
                }
            }
            BirchEntry entry;
            entry.cf = point;
            entry.members.push_back(index);
            node.entries.push_back(std::move(entry));
        } else {
            auto& closest = node.entries[closest_entry(node, x)];
            auto child_split = insert_into(*closest.child, x, index);
            if (!child_split) {
                closest.cf.add(point);
                return std::nullopt;
            }
            auto position = static_cast<std::size_t>(&closest - node.entries.data());
            BirchEntry left, right;
            left.cf = child_split->first->summary();
            left.child = std::move(child_split->first);
            right.cf = child_split->second->summary();
            right.child = std::move(child_split->second);
            node.entries[position] = std::move(left);
            node.entries.insert(node.entries.begin() + static_cast<std::ptrdiff_t>(position) + 1, std::move(right));
        }
        if (node.entries.size() > branching_) {
            return split(node);
        }
        return std::nullopt;
    }

    /// Split around the farthest pair of entry centroids.
    static Split split(BirchNode& node) {
        const std::size_t m = node.entries.size();
        std::vector<VectorD> centroids(m);
        for (std::size_t i = 0; i < m; ++i) {
            centroids[i] = node.entries[i].cf.centroid();
        }
        std::size_t s1 = 0, s2 = 1;
        double far = -1.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                double d = (centroids[i] - centroids[j]).squaredNorm();
                if (d > far) {
                    far = d;
                    s1 = i;
                    s2 = j;
                }
            }
        }
        auto left = std::make_unique<BirchNode>();
        auto right = std::make_unique<BirchNode>();
        left->leaf = right->leaf = node.leaf;
        for (std::size_t i = 0; i < m; ++i) {
            double d1 = (centroids[i] - centroids[s1]).squaredNorm();
            double d2 = (centroids[i] - centroids[s2]).squaredNorm();
            bool to_left = (i == s1) || (i != s2 && d1 <= d2);
            (to_left ? left : right)->entries.push_back(std::move(node.entries[i]));
        }
        return {std::move(left), std::move(right)};
    }

    static void collect(const BirchNode& node, std::vector<const BirchEntry*>& out) {
        for (const auto& e : node.entries) {
            if (node.leaf) {
                out.push_back(&e);
            } else {
                collect(*e.child, out);
            }
        }
    }

    double threshold_;
    std::size_t branching_;
    std::unique_ptr<BirchNode> root_;
};

}  // namespace detail

struct BirchResult {
    std::vector<std::int32_t> labels;
    std::size_t n_subclusters = 0;
};

/**
 * BIRCH clustering of the rows of `points` into exactly `k` clusters.
 *
 * Points are inserted in row order into a CF tree; a point joins its closest
 * leaf subcluster when the merged subcluster's diameter stays within
 * `threshold`. The leaf subclusters are then merged by Ward linkage, weighted
 * by subcluster size, down to `k` clusters, and every point inherits the
 * cluster of its subcluster. Throws `ArgumentError` when the tree ends up with
 * fewer than `k` subclusters.
 */
inline BirchResult birch(const MatrixD& points, std::size_t k, const BirchOptions& options = {}) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (!(options.threshold > 0.0)) {
        throw ArgumentError("birch: threshold must be positive");
    }
    if (options.branching < 2) {
        throw ArgumentError("birch: branching factor must be at least 2");
    }
    if (k < 1 || k > n) {
        throw ArgumentError("birch: need 1 <= k <= n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    }

    detail::CfTree tree(options.threshold, options.branching);
    for (std::size_t i = 0; i < n; ++i) {
        tree.insert(points.row(static_cast<Eigen::Index>(i)).transpose(), i);
    }
    auto leaves = tree.leaf_entries();
    const std::size_t m = leaves.size();
    if (m < k) {
        throw ArgumentError("birch: threshold " + std::to_string(options.threshold) + " leaves only " +
                            std::to_string(m) + " subclusters, fewer than k=" + std::to_string(k));
    }

    MatrixD centroids(static_cast<Eigen::Index>(m), points.cols());
    std::vector<double> weights(m);
    for (std::size_t s = 0; s < m; ++s) {
        centroids.row(static_cast<Eigen::Index>(s)) = leaves[s]->cf.centroid().transpose();
        weights[s] = leaves[s]->cf.n;
    }
    auto sub_labels = cut_dendrogram(ward_linkage(centroids, weights, options.ward), k);

    std::vector<std::int32_t> labels(n, -1);
    for (std::size_t s = 0; s < m; ++s) {
        for (auto member : leaves[s]->members) {
            labels[member] = sub_labels[s];
        }
    }
    return {canonicalize_labels(labels), m};
}

}  // namespace lxk

#endif
