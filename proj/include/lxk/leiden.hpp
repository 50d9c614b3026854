#ifndef LXK_LEIDEN_HPP
#define LXK_LEIDEN_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "random.hpp"
#include "types.hpp"

/**
 * @file leiden.hpp
 *
 * @brief Leiden community detection under the constant Potts model (CPM).
 *
 * For a partition into communities c with n_c nodes and internal edge weight
 * w_c, the CPM quality is Q = sum_c [w_c - gamma * n_c (n_c - 1) / 2].
 */

namespace lxk {

/// CPM quality of `membership` (one community ID per node) on `graph`.
inline double cpm_quality(const SimilarityGraph& graph, const std::vector<std::int32_t>& membership, double gamma) {
    if (membership.size() != graph.n_nodes) {
        throw ArgumentError("cpm_quality: membership does not cover the graph");
    }
    auto labels = canonicalize_labels(membership);
    std::size_t k = 0;
    for (auto l : labels) {
        k = std::max<std::size_t>(k, static_cast<std::size_t>(l) + 1);
    }
    std::vector<double> internal(k, 0.0);
    std::vector<double> count(k, 0.0);
    for (auto l : labels) {
        count[static_cast<std::size_t>(l)] += 1.0;
    }
    for (const auto& e : graph.edges) {
        if (labels[e.i] == labels[e.j]) {
            internal[static_cast<std::size_t>(labels[e.i])] += e.weight;
        }
    }
    double q = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        q += internal[c] - gamma * count[c] * (count[c] - 1.0) / 2.0;
    }
    return q;
}

/// One accepted local move, reported to `LeidenOptions::on_move`.
struct LeidenMove {
    std::size_t level = 0;
    std::size_t node = 0;
    std::size_t from = 0;
    std::size_t to = 0;
    /// Quality gain computed incrementally by the algorithm.
    double gain = 0.0;
    /// Only filled when `verify_moves` is set: CPM quality of the flattened
    /// partition of the input graph immediately before and after the move.
    double quality_before = std::numeric_limits<double>::quiet_NaN();
    double quality_after = std::numeric_limits<double>::quiet_NaN();
};

struct LeidenOptions {
    std::uint64_t seed = 0;
    /// Starting partition (one label per node); singletons when unset.
    std::optional<std::vector<std::int32_t>> initial;
    /// Randomness of the refinement phase.
    double theta = 0.01;
    /// Local moves must gain more than this.
    double min_gain = 1e-12;
    /// Upper bound on full Leiden iterations.
    std::size_t max_iterations = 100;
    std::function<void(const LeidenMove&)> on_move;
    /// Recompute the flattened quality around every move (slow; for tests).
    bool verify_moves = false;
};

struct LeidenResult {
    /// Canonical community labels per node.
    std::vector<std::int32_t> membership;
    double quality = 0.0;
    std::size_t iterations = 0;
    std::size_t moves = 0;
    bool converged = false;
    std::size_t n_communities() const {
        std::int32_t m = -1;
        for (auto l : membership) {
            m = std::max(m, l);
        }
        return static_cast<std::size_t>(m + 1);
    }
};

namespace detail {

/// CSR graph with node sizes and self-loop weights, as produced by aggregation.
struct LeidenGraph {
    std::size_t n = 0;
    std::vector<std::size_t> offsets;
    std::vector<std::uint32_t> targets;
    std::vector<double> weights;
    std::vector<double> node_size;
    std::vector<double> self_weight;

    static LeidenGraph from(const SimilarityGraph& g) {
        LeidenGraph out;
        out.n = g.n_nodes;
        std::vector<std::size_t> degree(out.n, 0);
        for (const auto& e : g.edges) {
            ++degree[e.i];
            ++degree[e.j];
        }
        out.offsets.assign(out.n + 1, 0);
        for (std::size_t v = 0; v < out.n; ++v) {
            out.offsets[v + 1] = out.offsets[v] + degree[v];
        }
        out.targets.resize(out.offsets[out.n]);
        out.weights.resize(out.offsets[out.n]);
        std::vector<std::size_t> fill(out.offsets.begin(), out.offsets.end() - 1);
        for (const auto& e : g.edges) {
            out.targets[fill[e.i]] = e.j;
            out.weights[fill[e.i]++] = e.weight;
            out.targets[fill[e.j]] = e.i;
            out.weights[fill[e.j]++] = e.weight;
        }
        out.node_size.assign(out.n, 1.0);
        out.self_weight.assign(out.n, 0.0);
        return out;
    }
};

class LeidenRunner {
public:
    LeidenRunner(const SimilarityGraph& graph, double gamma, const LeidenOptions& options)
        : input_(graph), gamma_(gamma), options_(options), rng_(options.seed) {}

    LeidenResult run() {
        const std::size_t n = input_.n_nodes;
        LeidenResult result;
        std::vector<std::int32_t> membership;
        if (options_.initial) {
            if (options_.initial->size() != n) {
                throw ArgumentError("leiden: initial partition does not cover the graph");
            }
            membership = canonicalize_labels(*options_.initial);
        } else {
            membership.resize(n);
            std::iota(membership.begin(), membership.end(), 0);
        }

        const LeidenGraph base = LeidenGraph::from(input_);
        for (std::size_t iter = 0; iter < options_.max_iterations; ++iter) {
            bool moved = iterate(base, membership);
            result.iterations = iter + 1;
            if (!moved) {
                result.converged = true;
                break;
            }
        }
        result.membership = canonicalize_labels(membership);
        result.quality = cpm_quality(input_, result.membership, gamma_);
        result.moves = moves_;
        return result;
    }

private:
    /// One Leiden iteration starting from `membership`; returns whether any node moved.
    bool iterate(const LeidenGraph& base, std::vector<std::int32_t>& membership) {
        LeidenGraph graph = base;
        std::vector<std::size_t> partition(membership.begin(), membership.end());
        node_map_.resize(base.n);
        std::iota(node_map_.begin(), node_map_.end(), std::size_t{0});

        bool any_move = false;
        for (level_ = 0;; ++level_) {
            current_partition_ = &partition;
            any_move |= move_nodes_fast(graph, partition);
            std::size_t n_comms = count_distinct(partition);
            if (n_comms == graph.n) {
                break;
            }
            std::vector<std::size_t> refined = refine(graph, partition);
            std::size_t n_refined = compact(refined);
            if (n_refined == graph.n) {
                break;
            }
            // Aggregate on the refined partition; the aggregate starts from the
            // unrefined partition.
            std::vector<std::size_t> aggregate_partition(n_refined);
            for (std::size_t v = 0; v < graph.n; ++v) {
                aggregate_partition[refined[v]] = partition[v];
            }
            graph = aggregate(graph, refined, n_refined);
            for (auto& m : node_map_) {
                m = refined[m];
            }
            partition = std::move(aggregate_partition);
        }
        for (std::size_t i = 0; i < base.n; ++i) {
            membership[i] = static_cast<std::int32_t>(partition[node_map_[i]]);
        }
        current_partition_ = nullptr;
        return any_move;
    }

    static std::size_t count_distinct(const std::vector<std::size_t>& labels) {
        std::size_t bound = 0;
        for (auto l : labels) {
            bound = std::max(bound, l + 1);
        }
        std::vector<char> seen(bound, 0);
        std::size_t count = 0;
        for (auto l : labels) {
            if (!seen[l]) {
                seen[l] = 1;
                ++count;
            }
        }
        return count;
    }

    /// Relabel to 0..m-1 by first appearance; returns m.
    static std::size_t compact(std::vector<std::size_t>& labels) {
        std::size_t bound = 0;
        for (auto l : labels) {
            bound = std::max(bound, l + 1);
        }
        std::vector<std::size_t> remap(bound, SIZE_MAX);
        std::size_t next = 0;
        for (auto& l : labels) {
            if (remap[l] == SIZE_MAX) {
                remap[l] = next++;
            }
            l = remap[l];
        }
        return next;
    }

    std::vector<std::int32_t> flattened() const {
        std::vector<std::int32_t> flat(node_map_.size());
        for (std::size_t i = 0; i < node_map_.size(); ++i) {
            flat[i] = static_cast<std::int32_t>((*current_partition_)[node_map_[i]]);
        }
        return flat;
    }

    /// Queue-based local moving. Partition labels must lie in [0, n).
    bool move_nodes_fast(const LeidenGraph& g, std::vector<std::size_t>& partition) {
        const std::size_t n = g.n;
        // Community labels on entry may be any values < n after compaction.
        compact(partition);
        std::vector<double> comm_size(n, 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            comm_size[partition[v]] += g.node_size[v];
        }
        std::vector<std::size_t> empty;
        for (std::size_t c = n; c-- > 0;) {
            if (comm_size[c] == 0.0) {
                empty.push_back(c);
            }
        }

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle(order.begin(), order.end(), rng_);
        std::vector<std::size_t> queue(order.begin(), order.end());
        std::size_t head = 0;
        std::vector<char> queued(n, 1);

        std::vector<double> link(n, 0.0);
        std::vector<std::size_t> touched;
        bool moved_any = false;

        while (head < queue.size()) {
            const std::size_t v = queue[head++];
            queued[v] = 0;
            const std::size_t from = partition[v];
            const double sv = g.node_size[v];

            touched.clear();
            for (std::size_t e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
                std::size_t c = partition[g.targets[e]];
                if (link[c] == 0.0) {
                    touched.push_back(c);
                }
                link[c] += g.weights[e];
            }
            const double w_from = link[from];
            const double s_from = comm_size[from];

            std::size_t best = from;
            double best_gain = 0.0;
            for (auto c : touched) {
                if (c == from) {
                    continue;
                }
                double gain = link[c] - w_from - gamma_ * sv * (comm_size[c] - s_from + sv);
                if (gain > best_gain) {
                    best_gain = gain;
                    best = c;
                }
            }
            if (s_from > sv && !empty.empty()) {
                double gain = -w_from + gamma_ * sv * (s_from - sv);
                if (gain > best_gain) {
                    best_gain = gain;
                    best = empty.back();
                }
            }
            for (auto c : touched) {
                link[c] = 0.0;
            }

            if (best == from || !(best_gain > options_.min_gain)) {
                continue;
            }

            LeidenMove event{level_, v, from, best, best_gain};
            if (options_.verify_moves) {
                event.quality_before = cpm_quality(input_, flattened(), gamma_);
            }
            if (comm_size[best] == 0.0) {
                empty.pop_back();
            }
            comm_size[from] -= sv;
            comm_size[best] += sv;
            partition[v] = best;
            if (comm_size[from] == 0.0) {
                empty.push_back(from);
            }
            ++moves_;
            moved_any = true;
            if (options_.verify_moves) {
                event.quality_after = cpm_quality(input_, flattened(), gamma_);
            }
            if (options_.on_move) {
                options_.on_move(event);
            }
            for (std::size_t e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
                std::size_t u = g.targets[e];
                if (!queued[u] && partition[u] != best) {
                    queued[u] = 1;
                    queue.push_back(u);
                }
            }
        }
        return moved_any;
    }

    /**
     * Refinement: within each community, singletons are merged into
     * well-connected refined communities, picked at random with probability
     * proportional to exp(gain / theta) among non-negative gains.
     */
    std::vector<std::size_t> refine(const LeidenGraph& g, const std::vector<std::size_t>& partition) {
        const std::size_t n = g.n;
        std::vector<std::size_t> refined(n);
        std::iota(refined.begin(), refined.end(), std::size_t{0});
        std::vector<double> refined_size(g.node_size);
        std::vector<std::size_t> refined_count(n, 1);

        std::size_t n_comms = 0;
        for (auto c : partition) {
            n_comms = std::max(n_comms, c + 1);
        }
        std::vector<std::vector<std::size_t>> members(n_comms);
        for (std::size_t v = 0; v < n; ++v) {
            members[partition[v]].push_back(v);
        }

        // Weight from each node (and, as merges happen, each refined
        // community) to the rest of its community.
        std::vector<double> external(n, 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
                if (partition[g.targets[e]] == partition[v]) {
                    external[v] += g.weights[e];
                }
            }
        }

        std::vector<double> link(n, 0.0);
        std::vector<std::size_t> touched;
        std::vector<double> candidate_gain;
        std::vector<std::size_t> candidate;

        for (std::size_t c = 0; c < n_comms; ++c) {
            auto& nodes = members[c];
            if (nodes.size() < 2) {
                continue;
            }
            double comm_total = 0.0;
            for (auto v : nodes) {
                comm_total += g.node_size[v];
            }
            shuffle(nodes.begin(), nodes.end(), rng_);
            for (auto v : nodes) {
                if (refined_count[refined[v]] != 1) {
                    continue;
                }
                const double sv = g.node_size[v];
                if (external[v] < gamma_ * sv * (comm_total - sv)) {
                    continue;
                }
                touched.clear();
                for (std::size_t e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
                    std::size_t u = g.targets[e];
                    if (partition[u] != c) {
                        continue;
                    }
                    std::size_t r = refined[u];
                    if (link[r] == 0.0) {
                        touched.push_back(r);
                    }
                    link[r] += g.weights[e];
                }
                candidate.assign(1, refined[v]);
                candidate_gain.assign(1, 0.0);
                for (auto r : touched) {
                    if (r == refined[v]) {
                        continue;
                    }
                    const double sr = refined_size[r];
                    if (external[r] < gamma_ * sr * (comm_total - sr)) {
                        continue;
                    }
                    double gain = link[r] - gamma_ * sv * sr;
                    if (gain >= 0.0) {
                        candidate.push_back(r);
                        candidate_gain.push_back(gain);
                    }
                }
                std::size_t chosen = candidate.front();
                if (candidate.size() > 1) {
                    double top = *std::max_element(candidate_gain.begin(), candidate_gain.end());
                    double total = 0.0;
                    for (auto& gval : candidate_gain) {
                        gval = std::exp((gval - top) / options_.theta);
                        total += gval;
                    }
                    double target = uniform01(rng_) * total;
                    double running = 0.0;
                    for (std::size_t idx = 0; idx < candidate.size(); ++idx) {
                        running += candidate_gain[idx];
                        chosen = candidate[idx];
                        if (running > target) {
                            break;
                        }
                    }
                }
                if (chosen != refined[v]) {
                    const std::size_t own = refined[v];
                    external[chosen] = external[chosen] + external[v] - 2.0 * link[chosen];
                    refined_size[chosen] += sv;
                    refined_count[chosen] += 1;
                    refined_count[own] = 0;
                    refined[v] = chosen;
                }
                for (auto r : touched) {
                    link[r] = 0.0;
                }
            }
        }
        return refined;
    }

    static LeidenGraph aggregate(const LeidenGraph& g, const std::vector<std::size_t>& refined, std::size_t m) {
        LeidenGraph out;
        out.n = m;
        out.node_size.assign(m, 0.0);
        out.self_weight.assign(m, 0.0);
        for (std::size_t v = 0; v < g.n; ++v) {
            out.node_size[refined[v]] += g.node_size[v];
            out.self_weight[refined[v]] += g.self_weight[v];
        }
        // Collect inter-community weights per aggregate node, merging parallel edges.
        std::vector<std::vector<std::size_t>> nodes_of(m);
        for (std::size_t v = 0; v < g.n; ++v) {
            nodes_of[refined[v]].push_back(v);
        }
        std::vector<double> acc(m, 0.0);
        std::vector<std::size_t> touched;
        out.offsets.assign(m + 1, 0);
        for (std::size_t a = 0; a < m; ++a) {
            touched.clear();
            for (auto v : nodes_of[a]) {
                for (std::size_t e = g.offsets[v]; e < g.offsets[v + 1]; ++e) {
                    std::size_t b = refined[g.targets[e]];
                    if (b == a) {
                        // Each internal edge is seen from both ends.
                        out.self_weight[a] += g.weights[e] / 2.0;
                        continue;
                    }
                    if (acc[b] == 0.0) {
                        touched.push_back(b);
                    }
                    acc[b] += g.weights[e];
                }
            }
            std::sort(touched.begin(), touched.end());
            for (auto b : touched) {
                out.targets.push_back(static_cast<std::uint32_t>(b));
                out.weights.push_back(acc[b]);
                acc[b] = 0.0;
            }
            out.offsets[a + 1] = out.targets.size();
        }
        return out;
    }

    const SimilarityGraph& input_;
    double gamma_;
    const LeidenOptions& options_;
    Rng rng_;
    std::size_t level_ = 0;
    std::size_t moves_ = 0;
    std::vector<std::size_t> node_map_;
    const std::vector<std::size_t>* current_partition_ = nullptr;
};

}  // namespace detail

/**
 * Leiden algorithm maximizing CPM quality: fast local moving, refinement,
 * and aggregation, repeated until a full iteration moves no node. Every
 * emitted community is connected. Deterministic given the seed.
 */
inline LeidenResult leiden(const SimilarityGraph& graph, double gamma, const LeidenOptions& options = {}) {
    if (!(gamma > 0.0)) {
        throw ArgumentError("leiden: gamma must be positive");
    }
    detail::LeidenRunner runner(graph, gamma, options);
    return runner.run();
}

struct GammaTuneOptions {
    std::uint64_t seed = 0;
    /// Maximum number of Leiden runs.
    std::size_t max_steps = 40;
};

struct GammaTuneResult {
    double gamma = 1.0;
    std::size_t n_clusters = 0;
    std::size_t steps = 0;
    /// The cluster count equals the target.
    bool reached = false;
    /// The step budget ran out before reaching the target (best so far returned).
    bool budget_exhausted = false;
    /// No gamma can produce the target (for example an edgeless graph).
    bool unreachable = false;
};

/**
 * Search gamma so that Leiden yields (approximately) `target_k` communities.
 *
 * The community count grows with gamma: at gamma >= max edge weight every
 * node is a singleton, and as gamma approaches 0 connected components merge.
 * The search brackets the target by halving gamma, then bisects in log
 * space. The closest count seen is returned.
 */
inline GammaTuneResult tune_gamma(const SimilarityGraph& graph, std::size_t target_k, const GammaTuneOptions& options = {}) {
    if (target_k < 1) {
        throw ArgumentError("tune_gamma: target_k must be at least 1");
    }
    const std::size_t n = graph.n_nodes;
    GammaTuneResult best;
    const double top = graph.max_weight();
    if (graph.edges.empty() || n == 0) {
        best.gamma = 1.0;
        best.n_clusters = n;
        best.reached = (target_k == n);
        best.unreachable = !best.reached;
        return best;
    }

    std::size_t best_error = SIZE_MAX;
    auto evaluate = [&](double gamma) {
        LeidenOptions lo;
        lo.seed = options.seed;
        auto count = leiden(graph, gamma, lo).n_communities();
        ++best.steps;
        std::size_t error = count > target_k ? count - target_k : target_k - count;
        if (error < best_error) {
            best_error = error;
            best.gamma = gamma;
            best.n_clusters = count;
        }
        return count;
    };

    // All singletons at gamma = top.
    double hi = top;
    best.gamma = hi;
    best.n_clusters = n;
    best_error = n > target_k ? n - target_k : target_k - n;
    if (target_k >= n) {
        best.reached = (target_k == n);
        best.unreachable = (target_k > n);
        return best;
    }

    double lo = top / 2.0;
    const double floor = top * 1e-12;
    std::size_t count_lo = evaluate(lo);
    while (count_lo > target_k && best.steps < options.max_steps && lo > floor) {
        hi = lo;
        lo /= 2.0;
        count_lo = evaluate(lo);
    }
    if (count_lo > target_k && lo <= floor) {
        best.unreachable = true;
        return best;
    }
    while (best_error != 0 && best.steps < options.max_steps) {
        double mid = std::sqrt(lo * hi);
        std::size_t count = evaluate(mid);
        if (count > target_k) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    best.reached = (best_error == 0);
    best.budget_exhausted = !best.reached;
    return best;
}

}  // namespace lxk

#endif
