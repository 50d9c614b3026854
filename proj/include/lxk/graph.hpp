#ifndef LXK_GRAPH_HPP
#define LXK_GRAPH_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <tuple>
#include <type_traits>
#include <vector>

#include "distance.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "types.hpp"

/**
 * @file graph.hpp
 *
 * @brief Threshold similarity graphs over word segments.
 */

namespace lxk {

struct Edge {
    std::uint32_t i = 0;
    std::uint32_t j = 0;
    double weight = 0.0;

    bool operator==(const Edge&) const = default;
};

/**
 * Undirected weighted graph. Edges are stored once with `i < j`, sorted by
 * `(i, j)`; weights lie in (0, 1]. Nodes without edges are allowed.
 */
struct SimilarityGraph {
    std::size_t n_nodes = 0;
    std::vector<std::string> node_ids;
    std::vector<Edge> edges;
    double threshold = 0.0;
    DistanceKind kind = DistanceKind::Cosine;

    /// Graph from an explicit edge list; validates and sorts the edges.
    static SimilarityGraph from_edges(std::size_t n, std::vector<Edge> edges) {
        SimilarityGraph g;
        g.n_nodes = n;
        for (auto& e : edges) {
            if (e.i > e.j) {
                std::swap(e.i, e.j);
            }
            if (e.i == e.j) {
                throw ArgumentError("graph: self-loop on node " + std::to_string(e.i));
            }
            if (e.j >= n) {
                throw ArgumentError("graph: edge endpoint " + std::to_string(e.j) + " out of range");
            }
            if (!(e.weight > 0.0) || e.weight > 1.0) {
                throw ArgumentError("graph: edge weight must be in (0, 1]");
            }
        }
        std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return std::tie(a.i, a.j) < std::tie(b.i, b.j); });
        for (std::size_t e = 1; e < edges.size(); ++e) {
            if (edges[e].i == edges[e - 1].i && edges[e].j == edges[e - 1].j) {
                throw ArgumentError("graph: duplicate edge (" + std::to_string(edges[e].i) + ", " +
                                    std::to_string(edges[e].j) + ")");
            }
        }
        g.edges = std::move(edges);
        return g;
    }

    double max_weight() const {
        double m = 0.0;
        for (const auto& e : edges) {
            m = std::max(m, e.weight);
        }
        return m;
    }
};

namespace detail {

template <class Item>
std::string item_id(const Item& item, std::size_t index) {
    if constexpr (requires { item.segment_id; }) {
        return item.segment_id;
    } else {
        return std::to_string(index);
    }
}

/// The edge between two items, if their distance is within the threshold.
/// Distances of 1 or more would give non-positive weights and are dropped.
inline bool keep_edge(double distance, double threshold) {
    return distance <= threshold && distance < 1.0;
}

}  // namespace detail

struct GraphOptions {
    int workers = 0;
    DtwOptions dtw;
};

/**
 * Threshold graph: edge (i, j) with weight 1 - d(i, j) whenever
 * d(i, j) <= threshold. Distances are streamed row by row, so no pairwise
 * table is ever held in memory; rows run in parallel and are concatenated in
 * row order.
 */
template <class Item>
SimilarityGraph build_graph(const std::vector<Item>& items, DistanceKind kind, double threshold, const GraphOptions& options = {}) {
    if (kind != native_kind<Item>()) {
        throw ArgumentError("build_graph: kind '" + std::string(to_string(kind)) + "' does not apply to these items");
    }
    if (!(threshold >= 0.0)) {
        throw ArgumentError("build_graph: threshold must be non-negative");
    }
    const std::size_t n = items.size();
    std::vector<std::vector<Edge>> rows(n);
    parallel_for(
        n,
        [&](std::size_t i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double d = item_distance(items[i], items[j], kind, options.dtw);
                if (detail::keep_edge(d, threshold)) {
                    rows[i].push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), 1.0 - d});
                }
            }
        },
        options.workers);

    SimilarityGraph g;
    g.n_nodes = n;
    g.threshold = threshold;
    g.kind = kind;
    g.node_ids.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        g.node_ids.push_back(detail::item_id(items[i], i));
        g.edges.insert(g.edges.end(), rows[i].begin(), rows[i].end());
    }
    return g;
}

/**
 * Incremental construction: each added item is compared with every item
 * already in the graph and its edges are inserted. `graph()` yields the same
 * edge set as `build_graph` over the same items.
 */
template <class Item>
class GraphBuilder {
public:
    GraphBuilder(DistanceKind kind, double threshold, DtwOptions dtw = {}) : kind_(kind), threshold_(threshold), dtw_(dtw) {
        if (kind != native_kind<Item>()) {
            throw ArgumentError("GraphBuilder: kind '" + std::string(to_string(kind)) + "' does not apply to these items");
        }
    }

    void add(Item item) {
        const auto j = static_cast<std::uint32_t>(items_.size());
        for (std::uint32_t i = 0; i < j; ++i) {
            double d = item_distance(items_[i], item, kind_, dtw_);
            if (detail::keep_edge(d, threshold_)) {
                edges_.push_back({i, j, 1.0 - d});
            }
        }
        items_.push_back(std::move(item));
    }

    std::size_t size() const { return items_.size(); }

    SimilarityGraph graph() const {
        auto g = SimilarityGraph::from_edges(items_.size(), edges_);
        g.threshold = threshold_;
        g.kind = kind_;
        for (std::size_t i = 0; i < items_.size(); ++i) {
            g.node_ids.push_back(detail::item_id(items_[i], i));
        }
        return g;
    }

private:
    DistanceKind kind_;
    double threshold_;
    DtwOptions dtw_;
    std::vector<Item> items_;
    std::vector<Edge> edges_;
};

/// Default thresholds per distance kind.
inline double default_threshold(DistanceKind kind) {
    switch (kind) {
    case DistanceKind::Cosine:
        return 0.4;
    case DistanceKind::Dtw:
        return 0.35;
    case DistanceKind::Edit:
        return 0.65;
    }
    return 0.4;
}

}  // namespace lxk

#endif
