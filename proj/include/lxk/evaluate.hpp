#ifndef LXK_EVALUATE_HPP
#define LXK_EVALUATE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "distance.hpp"
#include "error.hpp"
#include "parallel.hpp"
#include "types.hpp"

/**
 * @file evaluate.hpp
 *
 * @brief Lexicon quality metrics: NED, purity, homogeneity, completeness,
 * V-measure and bitrate. Percentages are in [0, 100]; entropies use base 2.
 */

namespace lxk {

namespace detail {

/// Joint counts of (cluster, label) pairs plus both marginals.
struct Contingency {
    std::map<std::pair<std::int32_t, std::int32_t>, double> joint;
    std::map<std::int32_t, double> clusters;
    std::map<std::int32_t, double> labels;
    double total = 0.0;

    Contingency(const std::vector<std::int32_t>& cluster_ids, const std::vector<std::int32_t>& label_ids) {
        if (cluster_ids.size() != label_ids.size()) {
            throw ArgumentError("metrics: cluster and label counts differ");
        }
        for (std::size_t i = 0; i < cluster_ids.size(); ++i) {
            joint[{cluster_ids[i], label_ids[i]}] += 1.0;
            clusters[cluster_ids[i]] += 1.0;
            labels[label_ids[i]] += 1.0;
        }
        total = static_cast<double>(cluster_ids.size());
    }
};

inline double entropy_of(const std::map<std::int32_t, double>& counts, double total) {
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        if (c > 0.0) {
            double p = c / total;
            h -= p * std::log2(p);
        }
    }
    return h;
}

inline const SegmentMetadata& require_labelled(const SegmentMetadata& seg) {
    if (!seg.word_label) {
        throw ValidationError("segment '" + seg.segment_id + "' has no word_label");
    }
    return seg;
}

}  // namespace detail

/// Integer IDs for the manifest's word labels (first-appearance order).
inline std::vector<std::int32_t> label_ids(const Manifest& manifest) {
    std::vector<std::string> labels;
    labels.reserve(manifest.size());
    for (const auto& seg : manifest) {
        labels.push_back(*detail::require_labelled(seg).word_label);
    }
    return canonicalize_labels(labels);
}

/// Percentage of items that belong to their cluster's majority label.
inline double purity(const std::vector<std::int32_t>& cluster_ids, const std::vector<std::int32_t>& label_ids) {
    if (cluster_ids.empty()) {
        throw ArgumentError("purity: no items");
    }
    detail::Contingency table(cluster_ids, label_ids);
    std::map<std::int32_t, double> majority;
    for (const auto& [key, count] : table.joint) {
        auto& best = majority[key.first];
        best = std::max(best, count);
    }
    double sum = 0.0;
    for (const auto& [_, count] : majority) {
        sum += count;
    }
    return 100.0 * sum / table.total;
}

struct VMeasure {
    double homogeneity = 0.0;
    double completeness = 0.0;
    double v_measure = 0.0;
};

/**
 * Entropy-based homogeneity h = 1 - H(label|cluster)/H(label), completeness
 * c = 1 - H(cluster|label)/H(cluster) and their harmonic mean, as percents.
 * h = 1 when H(label) = 0, c = 1 when H(cluster) = 0, v = 0 when h + c = 0.
 */
inline VMeasure v_measure(const std::vector<std::int32_t>& cluster_ids, const std::vector<std::int32_t>& label_ids) {
    if (cluster_ids.empty()) {
        throw ArgumentError("v_measure: no items");
    }
    detail::Contingency table(cluster_ids, label_ids);
    const double n = table.total;
    double h_label = detail::entropy_of(table.labels, n);
    double h_cluster = detail::entropy_of(table.clusters, n);
    double h_label_given_cluster = 0.0;
    double h_cluster_given_label = 0.0;
    for (const auto& [key, count] : table.joint) {
        double p = count / n;
        h_label_given_cluster -= p * std::log2(count / table.clusters.at(key.first));
        h_cluster_given_label -= p * std::log2(count / table.labels.at(key.second));
    }
    double h = h_label == 0.0 ? 1.0 : 1.0 - h_label_given_cluster / h_label;
    double c = h_cluster == 0.0 ? 1.0 : 1.0 - h_cluster_given_label / h_cluster;
    h = std::clamp(h, 0.0, 1.0);
    c = std::clamp(c, 0.0, 1.0);
    double v = (h + c) == 0.0 ? 0.0 : 2.0 * h * c / (h + c);
    return {100.0 * h, 100.0 * c, 100.0 * v};
}

/// Empirical entropy (bits) of the cluster-ID distribution.
inline double cluster_entropy_bits(const std::vector<std::int32_t>& cluster_ids) {
    std::map<std::int32_t, double> counts;
    for (auto c : cluster_ids) {
        counts[c] += 1.0;
    }
    return detail::entropy_of(counts, static_cast<double>(cluster_ids.size()));
}

/**
 * Bits per second of the encoded output: one cluster-ID symbol per segment,
 * coded at the empirical unigram entropy, over the total segment duration.
 */
inline double bitrate(const std::vector<std::int32_t>& cluster_ids, double total_duration_s) {
    if (!(total_duration_s > 0.0)) {
        throw ArgumentError("bitrate: total duration must be positive");
    }
    double rate = static_cast<double>(cluster_ids.size()) / total_duration_s;
    return rate * cluster_entropy_bits(cluster_ids);
}

enum class NedMode { PerCluster, PerPair };

/**
 * Normalized edit distance between phone transcriptions of all segment pairs
 * within each cluster, as a percent. `PerCluster` averages each cluster's mean
 * pair distance over clusters with at least two segments; `PerPair` averages
 * over all within-cluster pairs. Returns nullopt when no cluster has two
 * segments.
 */
inline std::optional<double> ned(const std::vector<std::int32_t>& cluster_ids,
                                 const std::vector<std::vector<std::string>>& phones, NedMode mode = NedMode::PerCluster,
                                 int workers = 0) {
    if (cluster_ids.size() != phones.size()) {
        throw ArgumentError("ned: cluster and transcription counts differ");
    }
    std::map<std::int32_t, std::vector<std::size_t>> by_cluster;
    for (std::size_t i = 0; i < cluster_ids.size(); ++i) {
        by_cluster[cluster_ids[i]].push_back(i);
    }
    std::vector<const std::vector<std::size_t>*> groups;
    for (const auto& [_, members] : by_cluster) {
        if (members.size() >= 2) {
            groups.push_back(&members);
        }
    }
    if (groups.empty()) {
        return std::nullopt;
    }
    std::vector<double> sums(groups.size(), 0.0);
    std::vector<double> pairs(groups.size(), 0.0);
    parallel_for(
        groups.size(),
        [&](std::size_t g) {
            const auto& members = *groups[g];
            for (std::size_t a = 0; a < members.size(); ++a) {
                for (std::size_t b = a + 1; b < members.size(); ++b) {
                    sums[g] += normalized_edit_distance(phones[members[a]], phones[members[b]]);
                    pairs[g] += 1.0;
                }
            }
        },
        workers);
    double total = 0.0;
    if (mode == NedMode::PerCluster) {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            total += sums[g] / pairs[g];
        }
        return 100.0 * total / static_cast<double>(groups.size());
    }
    double n_pairs = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        total += sums[g];
        n_pairs += pairs[g];
    }
    return 100.0 * total / n_pairs;
}

// ---------------------------------------------------------------------------
// Manifest-level wrappers
// ---------------------------------------------------------------------------

inline std::vector<std::vector<std::string>> phone_transcriptions(const Manifest& manifest) {
    std::vector<std::vector<std::string>> out;
    out.reserve(manifest.size());
    for (const auto& seg : manifest) {
        if (!seg.phones) {
            throw ValidationError("segment '" + seg.segment_id + "' has no phones");
        }
        out.push_back(*seg.phones);
    }
    return out;
}

inline std::optional<double> ned(const Clustering& clustering, const Manifest& manifest,
                                 NedMode mode = NedMode::PerCluster, int workers = 0) {
    auto aligned = clustering.aligned_to(manifest);
    return ned(aligned.labels(), phone_transcriptions(manifest), mode, workers);
}

inline double purity(const Clustering& clustering, const Manifest& manifest) {
    return purity(clustering.aligned_to(manifest).labels(), label_ids(manifest));
}

inline VMeasure v_measure(const Clustering& clustering, const Manifest& manifest) {
    return v_measure(clustering.aligned_to(manifest).labels(), label_ids(manifest));
}

inline double bitrate(const Clustering& clustering, const Manifest& manifest) {
    return bitrate(clustering.aligned_to(manifest).labels(), manifest.total_duration_s());
}

struct EvalReport {
    std::optional<double> ned;
    double purity = 0.0;
    double homogeneity = 0.0;
    double completeness = 0.0;
    double v_measure = 0.0;
    double bitrate = 0.0;
    std::size_t n_clusters = 0;
    double runtime_s = 0.0;

    bool operator==(const EvalReport&) const = default;
};

/// Every metric for `clustering` against the labels and phones in `manifest`.
inline EvalReport evaluate_all(const Clustering& clustering, const Manifest& manifest, double runtime_s = 0.0,
                               NedMode mode = NedMode::PerCluster, int workers = 0) {
    auto aligned = clustering.aligned_to(manifest);
    auto labels = label_ids(manifest);
    EvalReport report;
    report.ned = ned(aligned.labels(), phone_transcriptions(manifest), mode, workers);
    report.purity = purity(aligned.labels(), labels);
    auto v = v_measure(aligned.labels(), labels);
    report.homogeneity = v.homogeneity;
    report.completeness = v.completeness;
    report.v_measure = v.v_measure;
    report.bitrate = bitrate(aligned.labels(), manifest.total_duration_s());
    report.n_clusters = aligned.n_clusters();
    report.runtime_s = runtime_s;
    return report;
}

/**
 * Fixed-order JSON object. Runtime is wall-clock and therefore left out
 * unless requested, so that written reports are reproducible byte for byte.
 */
inline nlohmann::ordered_json report_to_json(const EvalReport& report, bool include_runtime = false) {
    nlohmann::ordered_json j;
    if (report.ned) {
        j["ned"] = *report.ned;
    } else {
        j["ned"] = nullptr;
    }
    j["purity"] = report.purity;
    j["homogeneity"] = report.homogeneity;
    j["completeness"] = report.completeness;
    j["v_measure"] = report.v_measure;
    j["bitrate"] = report.bitrate;
    j["n_clusters"] = report.n_clusters;
    if (include_runtime) {
        j["runtime_s"] = report.runtime_s;
    }
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport report;
    try {
        if (!j.at("ned").is_null()) {
            report.ned = j.at("ned").get<double>();
        }
        report.purity = j.at("purity").get<double>();
        report.homogeneity = j.at("homogeneity").get<double>();
        report.completeness = j.at("completeness").get<double>();
        report.v_measure = j.at("v_measure").get<double>();
        report.bitrate = j.at("bitrate").get<double>();
        report.n_clusters = j.at("n_clusters").get<std::size_t>();
        if (j.contains("runtime_s")) {
            report.runtime_s = j.at("runtime_s").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report: ") + e.what());
    }
    return report;
}

/// Aligned text table: System, NED, Purity, V-m, Bitrate, Runtime.
inline std::string format_report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::size_t name_width = 6;
    for (const auto& [name, _] : rows) {
        name_width = std::max(name_width, name.size());
    }
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_width)) << "System" << std::right << std::setw(8) << "NED"
        << std::setw(8) << "Purity" << std::setw(8) << "V-m" << std::setw(9) << "Bitrate" << std::setw(11) << "Runtime"
        << std::setw(6) << "K" << '\n';
    out << std::fixed << std::setprecision(1);
    for (const auto& [name, r] : rows) {
        out << std::left << std::setw(static_cast<int>(name_width)) << name << std::right;
        if (r.ned) {
            out << std::setw(8) << *r.ned;
        } else {
            out << std::setw(8) << "-";
        }
        out << std::setw(8) << r.purity << std::setw(8) << r.v_measure << std::setw(9) << r.bitrate << std::setw(11)
            << r.runtime_s << std::setw(6) << r.n_clusters << '\n';
    }
    return out.str();
}

}  // namespace lxk

#endif
