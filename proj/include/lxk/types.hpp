#ifndef LXK_TYPES_HPP
#define LXK_TYPES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

/**
 * @file types.hpp
 *
 * @brief Core value types: segment metadata, feature and unit sequences,
 * word embeddings and clusterings.
 */

namespace lxk {

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorF = Eigen::VectorXf;
using VectorD = Eigen::VectorXd;

inline constexpr double default_frame_period_s = 0.02;

/**
 * One word segment of the corpus. `word_label` and `phones` are only needed
 * for evaluation and are absent in unlabelled runs.
 */
struct SegmentMetadata {
    std::string segment_id;
    std::string utterance_id;
    std::string speaker_id;
    double start_s = 0.0;
    double end_s = 0.0;
    std::optional<std::string> word_label;
    std::optional<std::vector<std::string>> phones;

    double duration_s() const { return end_s - start_s; }

    bool operator==(const SegmentMetadata&) const = default;
};

/**
 * Ordered list of segments. The manifest order is the canonical segment order
 * used by every other module; construction validates the invariants.
 */
class Manifest {
public:
    Manifest() = default;

    explicit Manifest(std::vector<SegmentMetadata> segments) : segments_(std::move(segments)) {
        index_.reserve(segments_.size());
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& seg = segments_[i];
            if (seg.segment_id.empty()) {
                throw ValidationError("segment " + std::to_string(i) + " has an empty segment_id");
            }
            if (!(seg.end_s > seg.start_s)) {
                throw ValidationError("segment '" + seg.segment_id + "' has end_s <= start_s");
            }
            if (seg.phones && seg.phones->empty()) {
                throw ValidationError("segment '" + seg.segment_id + "' has an empty phone list");
            }
            if (!index_.emplace(seg.segment_id, i).second) {
                throw ValidationError("duplicate segment_id '" + seg.segment_id + "'");
            }
            total_duration_s_ += seg.duration_s();
        }
    }

    std::size_t size() const { return segments_.size(); }
    bool empty() const { return segments_.empty(); }
    const SegmentMetadata& operator[](std::size_t i) const { return segments_[i]; }
    const std::vector<SegmentMetadata>& segments() const { return segments_; }
    auto begin() const { return segments_.begin(); }
    auto end() const { return segments_.end(); }

    /// Sum of segment durations in seconds.
    double total_duration_s() const { return total_duration_s_; }

    std::optional<std::size_t> find(const std::string& segment_id) const {
        auto it = index_.find(segment_id);
        if (it == index_.end()) {
            return std::nullopt;
        }
        return it->second;
    }

    /// Word labels in manifest order; throws if any segment lacks one.
    std::vector<std::string> word_labels() const {
        std::vector<std::string> out;
        out.reserve(segments_.size());
        for (const auto& seg : segments_) {
            if (!seg.word_label) {
                throw ValidationError("segment '" + seg.segment_id + "' has no word_label");
            }
            out.push_back(*seg.word_label);
        }
        return out;
    }

    bool operator==(const Manifest& other) const { return segments_ == other.segments_; }

private:
    std::vector<SegmentMetadata> segments_;
    std::unordered_map<std::string, std::size_t> index_;
    double total_duration_s_ = 0.0;
};

/// Continuous frame features of one segment: T frames of dimension D.
struct FrameFeatureSequence {
    std::string segment_id;
    MatrixF frames;
    double frame_period_s = default_frame_period_s;

    std::size_t length() const { return static_cast<std::size_t>(frames.rows()); }
    std::size_t dim() const { return static_cast<std::size_t>(frames.cols()); }
};

/// Discrete unit IDs of one segment. Not deduplicated.
struct UnitSequence {
    std::string segment_id;
    std::vector<std::int32_t> units;

    std::size_t length() const { return units.size(); }
    bool operator==(const UnitSequence&) const = default;
};

/// Fixed-dimensional unit-norm vector for one segment.
struct WordEmbedding {
    std::string segment_id;
    VectorF vector;
};

/**
 * Relabel integer cluster IDs by order of first appearance, so the first
 * item is always in cluster 0, the next new cluster is 1, and so on.
 */
template <class Label>
std::vector<std::int32_t> canonicalize_labels(const std::vector<Label>& labels) {
    std::unordered_map<Label, std::int32_t> remap;
    std::vector<std::int32_t> out;
    out.reserve(labels.size());
    for (const auto& label : labels) {
        auto it = remap.find(label);
        if (it == remap.end()) {
            it = remap.emplace(label, static_cast<std::int32_t>(remap.size())).first;
        }
        out.push_back(it->second);
    }
    return out;
}

/**
 * Total assignment of segments to clusters: the learned lexicon.
 * Cluster IDs are always canonical, i.e. contiguous from 0 in order of first
 * appearance along `segment_ids()`.
 */
class Clustering {
public:
    Clustering() = default;

    Clustering(std::vector<std::string> segment_ids, const std::vector<std::int64_t>& cluster_ids)
        : segment_ids_(std::move(segment_ids)), labels_(canonicalize_labels(cluster_ids)) {
        if (segment_ids_.size() != labels_.size()) {
            throw ArgumentError("clustering: segment and label counts differ");
        }
        count_clusters();
    }

    Clustering(std::vector<std::string> segment_ids, const std::vector<std::int32_t>& cluster_ids)
        : segment_ids_(std::move(segment_ids)), labels_(canonicalize_labels(cluster_ids)) {
        if (segment_ids_.size() != labels_.size()) {
            throw ArgumentError("clustering: segment and label counts differ");
        }
        count_clusters();
    }

    /// Clustering of every manifest segment, with labels given in manifest order.
    template <class Label>
    static Clustering from_labels(const Manifest& manifest, const std::vector<Label>& labels) {
        if (labels.size() != manifest.size()) {
            throw ArgumentError("clustering: expected " + std::to_string(manifest.size()) +
                                " labels, got " + std::to_string(labels.size()));
        }
        std::vector<std::string> ids;
        ids.reserve(manifest.size());
        for (const auto& seg : manifest) {
            ids.push_back(seg.segment_id);
        }
        Clustering out;
        out.segment_ids_ = std::move(ids);
        out.labels_ = canonicalize_labels(labels);
        out.count_clusters();
        return out;
    }

    std::size_t size() const { return labels_.size(); }
    std::size_t n_clusters() const { return n_clusters_; }
    const std::vector<std::string>& segment_ids() const { return segment_ids_; }
    const std::vector<std::int32_t>& labels() const { return labels_; }

    /**
     * Labels reordered to follow `manifest`. Throws `ValidationError` when a
     * manifest segment is missing or the clustering names unknown segments.
     * The result is canonicalized along manifest order.
     */
    Clustering aligned_to(const Manifest& manifest) const {
        if (segment_ids_.size() != manifest.size()) {
            for (const auto& seg : manifest) {
                if (std::find(segment_ids_.begin(), segment_ids_.end(), seg.segment_id) == segment_ids_.end()) {
                    throw ValidationError("clustering does not cover segment '" + seg.segment_id + "'");
                }
            }
            throw ValidationError("clustering has " + std::to_string(segment_ids_.size()) +
                                  " assignments but the manifest has " + std::to_string(manifest.size()) +
                                  " segments");
        }
        std::vector<std::int32_t> ordered(manifest.size(), -1);
        for (std::size_t i = 0; i < segment_ids_.size(); ++i) {
            auto pos = manifest.find(segment_ids_[i]);
            if (!pos) {
                throw ValidationError("clustering names segment '" + segment_ids_[i] +
                                      "' which is not in the manifest");
            }
            if (ordered[*pos] >= 0) {
                throw ValidationError("segment '" + segment_ids_[i] + "' is assigned twice");
            }
            ordered[*pos] = labels_[i];
        }
        return from_labels(manifest, ordered);
    }

    bool operator==(const Clustering&) const = default;

private:
    void count_clusters() {
        std::int32_t max_label = -1;
        for (auto l : labels_) {
            max_label = std::max(max_label, l);
        }
        n_clusters_ = static_cast<std::size_t>(max_label + 1);
    }

    std::vector<std::string> segment_ids_;
    std::vector<std::int32_t> labels_;
    std::size_t n_clusters_ = 0;
};

/// Stack embeddings into an n x d double matrix, one row per segment.
inline MatrixD stack_embeddings(const std::vector<WordEmbedding>& embeddings) {
    if (embeddings.empty()) {
        return MatrixD(0, 0);
    }
    auto d = embeddings.front().vector.size();
    MatrixD out(static_cast<Eigen::Index>(embeddings.size()), d);
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (embeddings[i].vector.size() != d) {
            throw ArgumentError("embedding '" + embeddings[i].segment_id + "' has dimension " +
                                std::to_string(embeddings[i].vector.size()) + ", expected " + std::to_string(d));
        }
        out.row(static_cast<Eigen::Index>(i)) = embeddings[i].vector.cast<double>().transpose();
    }
    return out;
}

}  // namespace lxk

#endif
