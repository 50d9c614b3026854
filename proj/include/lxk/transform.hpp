#ifndef LXK_TRANSFORM_HPP
#define LXK_TRANSFORM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Eigenvalues>

#include "error.hpp"
#include "io.hpp"
#include "kmeans.hpp"
#include "parallel.hpp"
#include "types.hpp"

/**
 * @file transform.hpp
 *
 * @brief Representation-side processing: mean-variance normalization, PCA,
 * averaged word embeddings, codebook training, quantization and
 * duration-penalized smoothing of unit sequences.
 */

namespace lxk {

// ---------------------------------------------------------------------------
// Mean-variance normalization
// ---------------------------------------------------------------------------

struct NormalizationStats {
    VectorD mean;
    /// Population standard deviation; 1 for constant dimensions.
    VectorD std;
    /// Dimensions that were constant over the pooled frames (only centered).
    std::vector<std::size_t> constant_dims;
};

namespace detail {

inline std::size_t check_common_dim(const std::vector<FrameFeatureSequence>& sequences, const char* what) {
    if (sequences.empty()) {
        throw ArgumentError(std::string(what) + ": no sequences");
    }
    std::size_t dim = sequences.front().dim();
    for (const auto& seq : sequences) {
        if (seq.dim() != dim) {
            throw ArgumentError(std::string(what) + ": segment '" + seq.segment_id + "' has dimension " +
                                std::to_string(seq.dim()) + ", expected " + std::to_string(dim));
        }
    }
    return dim;
}

inline std::size_t pooled_frames(const std::vector<FrameFeatureSequence>& sequences) {
    std::size_t total = 0;
    for (const auto& seq : sequences) {
        total += seq.length();
    }
    return total;
}

/// All frames stacked in sequence order as a double matrix.
inline MatrixD pool_frames(const std::vector<FrameFeatureSequence>& sequences) {
    std::size_t dim = sequences.empty() ? 0 : sequences.front().dim();
    MatrixD pooled(static_cast<Eigen::Index>(pooled_frames(sequences)), static_cast<Eigen::Index>(dim));
    Eigen::Index row = 0;
    for (const auto& seq : sequences) {
        pooled.middleRows(row, seq.frames.rows()) = seq.frames.cast<double>();
        row += seq.frames.rows();
    }
    return pooled;
}

}  // namespace detail

/// Pooled per-dimension mean and population standard deviation.
inline NormalizationStats fit_normalization(const std::vector<FrameFeatureSequence>& sequences) {
    const std::size_t dim = detail::check_common_dim(sequences, "normalize_mean_variance");
    const std::size_t total = detail::pooled_frames(sequences);
    if (total < 2) {
        throw ArgumentError("normalize_mean_variance: need at least 2 pooled frames");
    }
    NormalizationStats stats;
    stats.mean = VectorD::Zero(static_cast<Eigen::Index>(dim));
    VectorD lo = VectorD::Constant(static_cast<Eigen::Index>(dim), std::numeric_limits<double>::infinity());
    VectorD hi = VectorD::Constant(static_cast<Eigen::Index>(dim), -std::numeric_limits<double>::infinity());
    for (const auto& seq : sequences) {
        for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
            VectorD frame = seq.frames.row(t).cast<double>().transpose();
            stats.mean += frame;
            lo = lo.cwiseMin(frame);
            hi = hi.cwiseMax(frame);
        }
    }
    stats.mean /= static_cast<double>(total);

    VectorD var = VectorD::Zero(static_cast<Eigen::Index>(dim));
    for (const auto& seq : sequences) {
        for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
            VectorD centered = seq.frames.row(t).cast<double>().transpose() - stats.mean;
            var += centered.cwiseProduct(centered);
        }
    }
    var /= static_cast<double>(total);

    stats.std = var.cwiseSqrt();
    for (std::size_t j = 0; j < dim; ++j) {
        auto jj = static_cast<Eigen::Index>(j);
        if (lo(jj) == hi(jj) || stats.std(jj) == 0.0) {
            stats.std(jj) = 1.0;
            stats.constant_dims.push_back(j);
        }
    }
    return stats;
}

inline FrameFeatureSequence apply_normalization(const FrameFeatureSequence& seq, const NormalizationStats& stats) {
    if (static_cast<Eigen::Index>(seq.dim()) != stats.mean.size()) {
        throw ArgumentError("apply_normalization: segment '" + seq.segment_id + "' has dimension " +
                            std::to_string(seq.dim()) + ", stats have " + std::to_string(stats.mean.size()));
    }
    FrameFeatureSequence out{seq.segment_id, MatrixF(seq.frames.rows(), seq.frames.cols()), seq.frame_period_s};
    for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
        for (Eigen::Index j = 0; j < seq.frames.cols(); ++j) {
            out.frames(t, j) = static_cast<float>((static_cast<double>(seq.frames(t, j)) - stats.mean(j)) / stats.std(j));
        }
    }
    return out;
}

struct NormalizedFeatures {
    std::vector<FrameFeatureSequence> sequences;
    NormalizationStats stats;
};

/**
 * Standardize every dimension to zero mean and unit variance over the pooled
 * frames of all sequences. Constant dimensions are centered only; their
 * indices are reported in `stats.constant_dims` for the caller to log.
 */
inline NormalizedFeatures normalize_mean_variance(const std::vector<FrameFeatureSequence>& sequences, int workers = 0) {
    NormalizedFeatures out;
    out.stats = fit_normalization(sequences);
    out.sequences.resize(sequences.size());
    parallel_for(
        sequences.size(), [&](std::size_t i) { out.sequences[i] = apply_normalization(sequences[i], out.stats); },
        workers);
    return out;
}

/// Stats as a 2 x D matrix: row 0 is the mean, row 1 the standard deviation.
inline MatrixF stats_to_matrix(const NormalizationStats& stats) {
    MatrixF m(2, stats.mean.size());
    m.row(0) = stats.mean.cast<float>().transpose();
    m.row(1) = stats.std.cast<float>().transpose();
    return m;
}

inline NormalizationStats stats_from_matrix(const MatrixF& m) {
    if (m.rows() != 2) {
        throw ValidationError("normalization stats must have 2 rows");
    }
    NormalizationStats stats;
    stats.mean = m.row(0).cast<double>().transpose();
    stats.std = m.row(1).cast<double>().transpose();
    for (Eigen::Index j = 0; j < stats.std.size(); ++j) {
        if (!(stats.std(j) > 0.0)) {
            throw ValidationError("normalization stats: non-positive std in dimension " + std::to_string(j));
        }
    }
    return stats;
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

struct PcaProjection {
    VectorD mean;
    /// D x d, orthonormal columns sorted by descending explained variance.
    MatrixD components;
    VectorD explained_variance;

    std::size_t input_dim() const { return static_cast<std::size_t>(components.rows()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(components.cols()); }
};

inline constexpr std::size_t default_pca_dims = 350;

/**
 * Principal components of the pooled frames: the top-`d` eigenvectors of the
 * sample covariance (denominator N - 1). Each component's sign is fixed so
 * that its largest-magnitude entry is positive.
 */
inline PcaProjection fit_pca(const std::vector<FrameFeatureSequence>& sequences, std::size_t d) {
    const std::size_t dim = detail::check_common_dim(sequences, "fit_pca");
    const std::size_t total = detail::pooled_frames(sequences);
    if (d < 1 || d > dim) {
        throw ArgumentError("fit_pca: d=" + std::to_string(d) + " must be in [1, D=" + std::to_string(dim) + "]");
    }
    if (total <= d) {
        throw ArgumentError("fit_pca: need more than d=" + std::to_string(d) + " pooled frames, got " +
                            std::to_string(total));
    }

    MatrixD pooled = detail::pool_frames(sequences);
    PcaProjection p;
    p.mean = pooled.colwise().mean().transpose();
    pooled.rowwise() -= p.mean.transpose();
    Eigen::MatrixXd cov = (pooled.transpose() * pooled) / static_cast<double>(total - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw Error("fit_pca: eigendecomposition failed");
    }
    // Eigenvalues come back ascending.
    const auto D = static_cast<Eigen::Index>(dim);
    p.components.resize(D, static_cast<Eigen::Index>(d));
    p.explained_variance.resize(static_cast<Eigen::Index>(d));
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(d); ++c) {
        Eigen::Index src = D - 1 - c;
        VectorD v = solver.eigenvectors().col(src);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0) {
            v = -v;
        }
        p.components.col(c) = v;
        p.explained_variance(c) = std::max(0.0, solver.eigenvalues()(src));
    }
    return p;
}

/// frames' = (frames - mean) * components
inline FrameFeatureSequence apply_pca(const FrameFeatureSequence& seq, const PcaProjection& p) {
    if (seq.dim() != p.input_dim()) {
        throw ArgumentError("apply_pca: segment '" + seq.segment_id + "' has dimension " + std::to_string(seq.dim()) +
                            ", projection expects " + std::to_string(p.input_dim()));
    }
    MatrixD centered = seq.frames.cast<double>();
    centered.rowwise() -= p.mean.transpose();
    MatrixD projected = centered * p.components;
    return {seq.segment_id, projected.cast<float>(), seq.frame_period_s};
}

inline std::vector<FrameFeatureSequence> apply_pca(const std::vector<FrameFeatureSequence>& sequences,
                                                   const PcaProjection& p, int workers = 0) {
    std::vector<FrameFeatureSequence> out(sequences.size());
    parallel_for(sequences.size(), [&](std::size_t i) { out[i] = apply_pca(sequences[i], p); }, workers);
    return out;
}

/// Persist as three LXK1 files in `dir`: mean (1 x D), components (D x d), explained_variance (1 x d).
inline void write_pca(const PcaProjection& p, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    io::write_matrix(dir / "mean.lxk", MatrixF(p.mean.cast<float>().transpose()));
    io::write_matrix(dir / "components.lxk", MatrixF(p.components.cast<float>()));
    io::write_matrix(dir / "explained_variance.lxk", MatrixF(p.explained_variance.cast<float>().transpose()));
}

inline PcaProjection read_pca(const std::filesystem::path& dir) {
    MatrixF mean = io::read_matrix(dir / "mean.lxk");
    MatrixF components = io::read_matrix(dir / "components.lxk");
    MatrixF variance = io::read_matrix(dir / "explained_variance.lxk");
    if (mean.rows() != 1 || variance.rows() != 1 || components.rows() != mean.cols() ||
        components.cols() != variance.cols()) {
        throw ValidationError("PCA files in '" + dir.string() + "' have inconsistent shapes");
    }
    PcaProjection p;
    p.mean = mean.row(0).cast<double>().transpose();
    p.components = components.cast<double>();
    p.explained_variance = variance.row(0).cast<double>().transpose();
    return p;
}

// ---------------------------------------------------------------------------
// Averaged word embeddings
// ---------------------------------------------------------------------------

/// Mean frame scaled to unit L2 norm. Throws `DegenerateError` if the mean is zero.
inline WordEmbedding average_embed(const FrameFeatureSequence& seq) {
    if (seq.length() == 0) {
        throw ArgumentError("average_embed: segment '" + seq.segment_id + "' has no frames");
    }
    VectorD mean = seq.frames.cast<double>().colwise().mean().transpose();
    double norm = mean.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw DegenerateError("average_embed: segment '" + seq.segment_id + "' has a zero mean vector");
    }
    return {seq.segment_id, (mean / norm).cast<float>()};
}

inline std::vector<WordEmbedding> average_embed(const std::vector<FrameFeatureSequence>& sequences, int workers = 0) {
    std::vector<WordEmbedding> out(sequences.size());
    parallel_for(sequences.size(), [&](std::size_t i) { out[i] = average_embed(sequences[i]); }, workers);
    return out;
}

// ---------------------------------------------------------------------------
// Codebook and quantization
// ---------------------------------------------------------------------------

struct Codebook {
    /// K x D centroids.
    MatrixD centroids;

    std::size_t size() const { return static_cast<std::size_t>(centroids.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(centroids.cols()); }
};

inline constexpr std::size_t default_codebook_size = 500;

struct CodebookOptions {
    std::size_t max_iter = 100;
    double tol = 1e-4;
    int workers = 0;
};

/**
 * K-means codebook over the pooled raw frames (no normalization or PCA).
 * Throws `ArgumentError` when there are fewer pooled frames, or fewer distinct
 * frames, than `K`.
 */
inline Codebook train_codebook(const std::vector<FrameFeatureSequence>& sequences, std::size_t K, std::uint64_t seed,
                               const CodebookOptions& options = {}) {
    detail::check_common_dim(sequences, "train_codebook");
    const std::size_t total = detail::pooled_frames(sequences);
    if (K < 1 || total < K) {
        throw ArgumentError("train_codebook: need at least K=" + std::to_string(K) + " pooled frames, got " +
                            std::to_string(total));
    }
    MatrixD pooled = detail::pool_frames(sequences);
    KMeansOptions km;
    km.max_iter = options.max_iter;
    km.tol = options.tol;
    km.seed = seed;
    km.workers = options.workers;
    auto result = kmeans(pooled, K, km);

    // No duplicate centroids: identical rows only arise from too few distinct frames.
    std::vector<std::size_t> order(K);
    for (std::size_t i = 0; i < K; ++i) {
        order[i] = i;
    }
    const auto& c = result.model.centroids;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(c.row(a).data(), c.row(a).data() + c.cols(), c.row(b).data(),
                                            c.row(b).data() + c.cols());
    });
    for (std::size_t i = 1; i < K; ++i) {
        if (c.row(static_cast<Eigen::Index>(order[i])) == c.row(static_cast<Eigen::Index>(order[i - 1]))) {
            throw ArgumentError("train_codebook: fewer than K=" + std::to_string(K) + " distinct frames");
        }
    }
    return {result.model.centroids};
}

inline void write_codebook(const Codebook& cb, const std::filesystem::path& path) {
    io::write_matrix(path, MatrixF(cb.centroids.cast<float>()));
}

inline Codebook read_codebook(const std::filesystem::path& path) {
    MatrixF m = io::read_matrix(path);
    if (m.rows() < 1) {
        throw ValidationError("codebook '" + path.string() + "' is empty");
    }
    return {m.cast<double>()};
}

namespace detail {

inline void check_codebook_dim(const FrameFeatureSequence& seq, const Codebook& cb, const char* what) {
    if (seq.dim() != cb.dim()) {
        throw ArgumentError(std::string(what) + ": segment '" + seq.segment_id + "' has dimension " +
                            std::to_string(seq.dim()) + ", codebook has " + std::to_string(cb.dim()));
    }
    if (cb.size() == 0) {
        throw ArgumentError(std::string(what) + ": empty codebook");
    }
}

/// Squared Euclidean distance between frame t and centroid k.
inline double frame_centroid_cost(const FrameFeatureSequence& seq, Eigen::Index t, const Codebook& cb, Eigen::Index k) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < seq.frames.cols(); ++j) {
        double diff = static_cast<double>(seq.frames(t, j)) - cb.centroids(k, j);
        acc += diff * diff;
    }
    return acc;
}

}  // namespace detail

/// Nearest centroid per frame; ties go to the lowest index.
inline UnitSequence quantize(const FrameFeatureSequence& seq, const Codebook& cb) {
    detail::check_codebook_dim(seq, cb, "quantize");
    UnitSequence out{seq.segment_id, std::vector<std::int32_t>(seq.length())};
    for (Eigen::Index t = 0; t < seq.frames.rows(); ++t) {
        double best = std::numeric_limits<double>::infinity();
        std::int32_t arg = 0;
        for (Eigen::Index k = 0; k < cb.centroids.rows(); ++k) {
            double cost = detail::frame_centroid_cost(seq, t, cb, k);
            if (cost < best) {
                best = cost;
                arg = static_cast<std::int32_t>(k);
            }
        }
        out.units[static_cast<std::size_t>(t)] = arg;
    }
    return out;
}

/**
 * Duration-penalized smoothing: the unit sequence z minimizing
 *
 *     sum_t |frame_t - centroid(z_t)|^2 + lambda * #{t > 0 : z_t != z_(t-1)}
 *
 * by dynamic programming over (frame, unit). Ties go to the lowest unit index
 * at every decision, so lambda = 0 reproduces `quantize`. The output is not
 * deduplicated.
 */
inline UnitSequence dpdp_smooth(const FrameFeatureSequence& seq, const Codebook& cb, double lambda) {
    if (!(lambda >= 0.0)) {
        throw ArgumentError("dpdp_smooth: lambda must be non-negative");
    }
    detail::check_codebook_dim(seq, cb, "dpdp_smooth");
    if (lambda == 0.0) {
        // Without a switching penalty the objective separates per frame.
        return quantize(seq, cb);
    }
    const auto T = static_cast<std::size_t>(seq.length());
    const auto K = cb.size();

    std::vector<double> best(K), next(K);
    std::vector<std::int32_t> back(T * K, 0);
    for (std::size_t k = 0; k < K; ++k) {
        best[k] = detail::frame_centroid_cost(seq, 0, cb, static_cast<Eigen::Index>(k));
    }
    for (std::size_t t = 1; t < T; ++t) {
        std::size_t arg_min = 0;
        for (std::size_t k = 1; k < K; ++k) {
            if (best[k] < best[arg_min]) {
                arg_min = k;
            }
        }
        const double switch_cost = best[arg_min] + lambda;
        for (std::size_t k = 0; k < K; ++k) {
            std::size_t from = k;
            double prior = best[k];
            if (arg_min != k && (switch_cost < prior || (switch_cost == prior && arg_min < k))) {
                from = arg_min;
                prior = switch_cost;
            }
            next[k] = prior + detail::frame_centroid_cost(seq, static_cast<Eigen::Index>(t), cb, static_cast<Eigen::Index>(k));
            back[t * K + k] = static_cast<std::int32_t>(from);
        }
        std::swap(best, next);
    }

    std::size_t state = 0;
    for (std::size_t k = 1; k < K; ++k) {
        if (best[k] < best[state]) {
            state = k;
        }
    }
    UnitSequence out{seq.segment_id, std::vector<std::int32_t>(T)};
    for (std::size_t t = T; t-- > 0;) {
        out.units[t] = static_cast<std::int32_t>(state);
        if (t > 0) {
            state = static_cast<std::size_t>(back[t * K + state]);
        }
    }
    return out;
}

/// Objective minimized by `dpdp_smooth`, evaluated for a given unit sequence.
inline double dpdp_objective(const FrameFeatureSequence& seq, const Codebook& cb, const std::vector<std::int32_t>& units,
                             double lambda) {
    double total = 0.0;
    for (std::size_t t = 0; t < units.size(); ++t) {
        total += detail::frame_centroid_cost(seq, static_cast<Eigen::Index>(t), cb, units[t]);
        if (t > 0 && units[t] != units[t - 1]) {
            total += lambda;
        }
    }
    return total;
}

inline std::vector<UnitSequence> dpdp_smooth(const std::vector<FrameFeatureSequence>& sequences, const Codebook& cb,
                                             double lambda, int workers = 0) {
    std::vector<UnitSequence> out(sequences.size());
    parallel_for(sequences.size(), [&](std::size_t i) { out[i] = dpdp_smooth(sequences[i], cb, lambda); }, workers);
    return out;
}

}  // namespace lxk

#endif
