#ifndef LXK_DISTANCE_HPP
#define LXK_DISTANCE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "parallel.hpp"
#include "types.hpp"

/**
 * @file distance.hpp
 *
 * @brief Pairwise distance kernels: cosine between embeddings, length-normalized
 * DTW between frame sequences, and (normalized) Levenshtein distance between
 * symbol sequences.
 */

namespace lxk {

enum class DistanceKind : std::uint8_t { Cosine = 0, Dtw = 1, Edit = 2 };

inline std::string_view to_string(DistanceKind kind) {
    switch (kind) {
    case DistanceKind::Cosine:
        return "cosine";
    case DistanceKind::Dtw:
        return "dtw";
    case DistanceKind::Edit:
        return "edit";
    }
    return "unknown";
}

inline DistanceKind parse_distance_kind(std::string_view text) {
    if (text == "cosine") {
        return DistanceKind::Cosine;
    }
    if (text == "dtw") {
        return DistanceKind::Dtw;
    }
    if (text == "edit") {
        return DistanceKind::Edit;
    }
    throw ArgumentError("unknown distance kind '" + std::string(text) + "'");
}

namespace detail {

inline double dot(const float* a, const float* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return acc;
}

/// 1 - cos(a, b) from precomputed dot product and squared norms, clamped to [0, 2].
/// Two zero vectors are at distance 0; a zero vector is at distance 1 from anything else.
inline double cosine_from_parts(double dot_ab, double sq_norm_a, double sq_norm_b) {
    if (sq_norm_a == 0.0 || sq_norm_b == 0.0) {
        return (sq_norm_a == 0.0 && sq_norm_b == 0.0) ? 0.0 : 1.0;
    }
    double d = 1.0 - dot_ab / std::sqrt(sq_norm_a * sq_norm_b);
    return std::clamp(d, 0.0, 2.0);
}

}  // namespace detail

/**
 * Cosine distance `1 - a.b` between unit-norm word embeddings, clamped to [0, 2].
 */
inline double cosine_distance(const WordEmbedding& a, const WordEmbedding& b) {
    if (a.vector.size() != b.vector.size()) {
        throw ArgumentError("cosine_distance: dimension mismatch (" + std::to_string(a.vector.size()) + " vs " +
                            std::to_string(b.vector.size()) + ")");
    }
    double d = 1.0 - detail::dot(a.vector.data(), b.vector.data(), static_cast<std::size_t>(a.vector.size()));
    return std::clamp(d, 0.0, 2.0);
}

/// Cosine distance between two raw (not necessarily unit-norm) frames.
inline double frame_cosine_distance(const float* a, const float* b, std::size_t dim) {
    return detail::cosine_from_parts(detail::dot(a, b, dim), detail::dot(a, a, dim), detail::dot(b, b, dim));
}

struct DtwOptions {
    /// Sakoe-Chiba band half-width in frames, applied after rescaling the
    /// diagonal to the two lengths. Unset means unconstrained (exact).
    std::optional<std::size_t> band;
};

/**
 * Length-normalized dynamic time warping distance.
 *
 * The local cost of aligning frames `i` and `j` is their cosine distance. The
 * alignment path is monotone with steps (1,0), (0,1) and (1,1); the optimal
 * path minimizes total cost, ties going to the shorter path. The result is the
 * optimal total cost divided by the number of cells on that path.
 */
inline double dtw_distance(const FrameFeatureSequence& a, const FrameFeatureSequence& b, const DtwOptions& options = {}) {
    if (a.dim() != b.dim()) {
        throw ArgumentError("dtw_distance: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                            std::to_string(b.dim()) + ")");
    }
    const std::size_t ta = a.length();
    const std::size_t tb = b.length();
    if (ta == 0 || tb == 0) {
        throw ArgumentError("dtw_distance: empty sequence");
    }
    const std::size_t dim = a.dim();
    const float* pa = a.frames.data();
    const float* pb = b.frames.data();

    std::vector<double> sq_a(ta), sq_b(tb);
    for (std::size_t i = 0; i < ta; ++i) {
        sq_a[i] = detail::dot(pa + i * dim, pa + i * dim, dim);
    }
    for (std::size_t j = 0; j < tb; ++j) {
        sq_b[j] = detail::dot(pb + j * dim, pb + j * dim, dim);
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    // Two rolling rows of (cost, path length).
    std::vector<double> prev_cost(tb, inf), cur_cost(tb, inf);
    std::vector<std::uint32_t> prev_len(tb, 0), cur_len(tb, 0);

    auto in_band = [&](std::size_t i, std::size_t j) {
        if (!options.band) {
            return true;
        }
        double center = (ta == 1) ? 0.0 : static_cast<double>(i) * static_cast<double>(tb - 1) / static_cast<double>(ta - 1);
        return std::abs(static_cast<double>(j) - center) <= static_cast<double>(*options.band);
    };

    for (std::size_t i = 0; i < ta; ++i) {
        std::fill(cur_cost.begin(), cur_cost.end(), inf);
        for (std::size_t j = 0; j < tb; ++j) {
            if (!in_band(i, j)) {
                continue;
            }
            double local = detail::cosine_from_parts(detail::dot(pa + i * dim, pb + j * dim, dim), sq_a[i], sq_b[j]);
            if (i == 0 && j == 0) {
                cur_cost[0] = local;
                cur_len[0] = 1;
                continue;
            }
            double best = inf;
            std::uint32_t best_len = 0;
            auto consider = [&](double cost, std::uint32_t len) {
                if (cost < best || (cost == best && len < best_len)) {
                    best = cost;
                    best_len = len;
                }
            };
            if (i > 0) {
                consider(prev_cost[j], prev_len[j]);
            }
            if (j > 0) {
                consider(cur_cost[j - 1], cur_len[j - 1]);
            }
            if (i > 0 && j > 0) {
                consider(prev_cost[j - 1], prev_len[j - 1]);
            }
            if (best == inf) {
                continue;
            }
            cur_cost[j] = best + local;
            cur_len[j] = best_len + 1;
        }
        std::swap(prev_cost, cur_cost);
        std::swap(prev_len, cur_len);
    }

    double total = prev_cost[tb - 1];
    if (total == inf) {
        throw ArgumentError("dtw_distance: band too narrow to connect the end points");
    }
    return total / static_cast<double>(prev_len[tb - 1]);
}

/**
 * Levenshtein distance with unit insertion, deletion and substitution costs.
 * Works on any pair of random-access ranges with equality-comparable elements.
 */
template <class SeqA, class SeqB>
std::size_t edit_distance(const SeqA& a, const SeqB& b) {
    const std::size_t na = std::size(a);
    const std::size_t nb = std::size(b);
    if (na == 0) {
        return nb;
    }
    if (nb == 0) {
        return na;
    }
    std::vector<std::size_t> row(nb + 1);
    for (std::size_t j = 0; j <= nb; ++j) {
        row[j] = j;
    }
    auto ita = std::begin(a);
    for (std::size_t i = 1; i <= na; ++i, ++ita) {
        std::size_t diag = row[0];
        row[0] = i;
        auto itb = std::begin(b);
        for (std::size_t j = 1; j <= nb; ++j, ++itb) {
            std::size_t up = row[j];
            std::size_t sub = diag + ((*ita == *itb) ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[nb];
}

/// Edit distance divided by the longer length; 0 when both are empty.
template <class SeqA, class SeqB>
double normalized_edit_distance(const SeqA& a, const SeqB& b) {
    std::size_t longest = std::max<std::size_t>(std::size(a), std::size(b));
    if (longest == 0) {
        return 0.0;
    }
    return static_cast<double>(edit_distance(a, b)) / static_cast<double>(longest);
}

inline double unit_edit_distance(const UnitSequence& a, const UnitSequence& b) {
    return normalized_edit_distance(a.units, b.units);
}

// ---------------------------------------------------------------------------
// Kernel dispatch by item type
// ---------------------------------------------------------------------------

/// Distance kind natively associated with an item type.
template <class Item>
constexpr DistanceKind native_kind() {
    if constexpr (std::is_same_v<Item, WordEmbedding>) {
        return DistanceKind::Cosine;
    } else if constexpr (std::is_same_v<Item, FrameFeatureSequence>) {
        return DistanceKind::Dtw;
    } else {
        return DistanceKind::Edit;
    }
}

/**
 * The distance between two items under `kind`. Throws `ArgumentError` when the
 * item type does not support the kind: cosine applies to embeddings, DTW to
 * frame sequences, edit distance to unit sequences or phone strings.
 */
template <class Item>
double item_distance(const Item& a, const Item& b, DistanceKind kind, const DtwOptions& dtw = {}) {
    if (kind != native_kind<Item>()) {
        throw ArgumentError("distance kind '" + std::string(to_string(kind)) + "' does not apply to these items");
    }
    if constexpr (std::is_same_v<Item, WordEmbedding>) {
        return cosine_distance(a, b);
    } else if constexpr (std::is_same_v<Item, FrameFeatureSequence>) {
        return dtw_distance(a, b, dtw);
    } else if constexpr (std::is_same_v<Item, UnitSequence>) {
        return unit_edit_distance(a, b);
    } else {
        return normalized_edit_distance(a, b);
    }
}

// ---------------------------------------------------------------------------
// Pairwise tables
// ---------------------------------------------------------------------------

/**
 * Symmetric distance table with zero diagonal, stored as the condensed upper
 * triangle (row-major over i < j).
 */
class DistanceTable {
public:
    DistanceTable() = default;
    DistanceTable(std::size_t n, DistanceKind kind) : n_(n), kind_(kind), values_(n < 2 ? 0 : n * (n - 1) / 2, 0.0) {}

    std::size_t size() const { return n_; }
    DistanceKind kind() const { return kind_; }

    static std::size_t condensed_index(std::size_t n, std::size_t i, std::size_t j) {
        // Offset of row i in the condensed triangle plus column offset.
        return i * n - i * (i + 1) / 2 + (j - i - 1);
    }

    double operator()(std::size_t i, std::size_t j) const {
        if (i == j) {
            return 0.0;
        }
        if (i > j) {
            std::swap(i, j);
        }
        return values_[condensed_index(n_, i, j)];
    }

    void set(std::size_t i, std::size_t j, double value) {
        if (i > j) {
            std::swap(i, j);
        }
        values_[condensed_index(n_, i, j)] = value;
    }

    const std::vector<double>& condensed() const { return values_; }
    std::vector<double>& condensed() { return values_; }

    bool operator==(const DistanceTable&) const = default;

private:
    std::size_t n_ = 0;
    DistanceKind kind_ = DistanceKind::Cosine;
    std::vector<double> values_;
};

struct PairwiseOptions {
    /// Upper bound on the table's memory footprint.
    std::size_t memory_budget_bytes = std::size_t{2} << 30;
    int workers = 0;
    DtwOptions dtw;
};

inline std::size_t pairwise_table_bytes(std::size_t n) {
    return (n < 2 ? 0 : n * (n - 1) / 2) * sizeof(double);
}

/**
 * All pairwise distances between `items`. Rows of the upper triangle are
 * computed in parallel; each value is written to its own slot so the table is
 * identical for every worker count.
 */
template <class Item>
DistanceTable pairwise_distances(const std::vector<Item>& items, DistanceKind kind, const PairwiseOptions& options = {}) {
    if (kind != native_kind<Item>()) {
        throw ArgumentError("pairwise_distances: kind '" + std::string(to_string(kind)) +
                            "' does not apply to these items");
    }
    const std::size_t n = items.size();
    if (pairwise_table_bytes(n) > options.memory_budget_bytes) {
        throw BudgetError("pairwise table for n=" + std::to_string(n) + " needs " +
                          std::to_string(pairwise_table_bytes(n)) + " bytes, over the budget of " +
                          std::to_string(options.memory_budget_bytes) +
                          "; use the threshold-streaming graph build instead");
    }
    DistanceTable table(n, kind);
    auto& values = table.condensed();
    parallel_for(
        n,
        [&](std::size_t i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                values[DistanceTable::condensed_index(n, i, j)] = item_distance(items[i], items[j], kind, options.dtw);
            }
        },
        options.workers);
    return table;
}

/// Binary table file: magic `LXKD`, u32 n, u8 kind, then the condensed upper triangle as little-endian f64.
inline void write_distance_table(const DistanceTable& table, const std::filesystem::path& path) {
    auto out = io::detail::open_out(path, true);
    out.write("LXKD", 4);
    io::detail::write_le(out, static_cast<std::uint32_t>(table.size()));
    io::detail::write_le(out, static_cast<std::uint8_t>(table.kind()));
    for (double v : table.condensed()) {
        io::detail::write_le(out, v);
    }
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

inline DistanceTable read_distance_table(const std::filesystem::path& path) {
    auto in = io::detail::open_in(path, true);
    char magic[4];
    if (!in.read(magic, 4) || std::string_view(magic, 4) != "LXKD") {
        throw ParseError(path.string() + ": bad magic bytes (expected LXKD)");
    }
    auto n = io::detail::read_le<std::uint32_t>(in, path.string());
    auto kind = io::detail::read_le<std::uint8_t>(in, path.string());
    if (kind > 2) {
        throw ParseError(path.string() + ": unknown distance kind " + std::to_string(kind));
    }
    DistanceTable table(n, static_cast<DistanceKind>(kind));
    for (double& v : table.condensed()) {
        v = io::detail::read_le<double>(in, path.string());
    }
    return table;
}

}  // namespace lxk

#endif
