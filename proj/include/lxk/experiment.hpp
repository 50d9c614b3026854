#ifndef LXK_EXPERIMENT_HPP
#define LXK_EXPERIMENT_HPP

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agglomerative.hpp"
#include "birch.hpp"
#include "distance.hpp"
#include "error.hpp"
#include "evaluate.hpp"
#include "graph.hpp"
#include "kmeans.hpp"
#include "leiden.hpp"
#include "random.hpp"
#include "synth.hpp"
#include "transform.hpp"
#include "types.hpp"

/**
 * @file experiment.hpp
 *
 * @brief The six representation/clustering systems and the controlled
 * experiments that idealize either the clustering start or the
 * representations.
 */

namespace lxk {

enum class Representation { ContinuousAvg, ContinuousSeq, DiscreteSeq };
enum class Method { KMeans, Birch, Agglomerative, Graph };

inline std::string_view to_string(Representation r) {
    switch (r) {
    case Representation::ContinuousAvg:
        return "continuous-avg";
    case Representation::ContinuousSeq:
        return "continuous-seq";
    case Representation::DiscreteSeq:
        return "discrete-seq";
    }
    return "unknown";
}

inline std::string_view to_string(Method m) {
    switch (m) {
    case Method::KMeans:
        return "kmeans";
    case Method::Birch:
        return "birch";
    case Method::Agglomerative:
        return "agglom";
    case Method::Graph:
        return "graph";
    }
    return "unknown";
}

inline Method parse_method(std::string_view text) {
    for (auto m : {Method::KMeans, Method::Birch, Method::Agglomerative, Method::Graph}) {
        if (text == to_string(m)) {
            return m;
        }
    }
    throw ArgumentError("unknown clustering method '" + std::string(text) + "'");
}

/// CLI spelling of a representation: avg, dtw or edit.
inline Representation parse_representation(std::string_view text) {
    if (text == "avg" || text == "continuous-avg") {
        return Representation::ContinuousAvg;
    }
    if (text == "dtw" || text == "continuous-seq") {
        return Representation::ContinuousSeq;
    }
    if (text == "edit" || text == "discrete-seq") {
        return Representation::DiscreteSeq;
    }
    throw ArgumentError("unknown representation '" + std::string(text) + "'");
}

/// Knobs for every stage; unset optionals take data-driven defaults.
struct Hyperparameters {
    /// Number of clusters; defaults to the number of true word types.
    std::optional<std::size_t> k;
    /// CPM resolution; tuned to reach k when unset.
    std::optional<double> gamma;
    /// Graph distance threshold; defaults to 0.4 / 0.35 / 0.65 by distance kind.
    std::optional<double> threshold;
    bool normalize = true;
    /// PCA output dimension (capped at the feature dimension); 0 disables PCA.
    std::size_t pca_dims = default_pca_dims;
    double birch_threshold = 0.25;
    std::size_t birch_branching = 50;
    std::size_t kmeans_max_iter = 100;
    double kmeans_tol = 1e-4;
    std::size_t codebook_size = default_codebook_size;
    double dpdp_lambda = 0.0;
    std::optional<std::size_t> dtw_band;
    std::size_t gamma_steps = 40;
};

/// A representation/clustering combination. Only the six valid systems can be built.
class SystemSpec {
public:
    static SystemSpec make(Representation representation, Method method, Hyperparameters hp = {}) {
        bool valid = representation == Representation::ContinuousAvg || method == Method::Graph;
        if (!valid) {
            throw ArgumentError("invalid system: " + std::string(to_string(representation)) + " + " +
                                std::string(to_string(method)) + " (sequence representations only support graph clustering)");
        }
        SystemSpec spec;
        spec.representation_ = representation;
        spec.method_ = method;
        spec.hp_ = std::move(hp);
        return spec;
    }

    /// Parse a short system name: avg-kmeans, avg-birch, avg-agglom, avg-graph, dtw-graph or edit-graph.
    static SystemSpec parse(std::string_view name, Hyperparameters hp = {}) {
        auto dash = name.find('-');
        if (dash == std::string_view::npos) {
            throw ArgumentError("system name '" + std::string(name) + "' must look like <repr>-<method>");
        }
        return make(parse_representation(name.substr(0, dash)), parse_method(name.substr(dash + 1)), std::move(hp));
    }

    static std::vector<SystemSpec> all_six(const Hyperparameters& hp = {}) {
        return {make(Representation::ContinuousAvg, Method::KMeans, hp),
                make(Representation::ContinuousAvg, Method::Birch, hp),
                make(Representation::ContinuousAvg, Method::Agglomerative, hp),
                make(Representation::ContinuousAvg, Method::Graph, hp),
                make(Representation::ContinuousSeq, Method::Graph, hp),
                make(Representation::DiscreteSeq, Method::Graph, hp)};
    }

    Representation representation() const { return representation_; }
    Method method() const { return method_; }
    const Hyperparameters& hyperparameters() const { return hp_; }
    Hyperparameters& hyperparameters() { return hp_; }

    DistanceKind distance() const {
        switch (representation_) {
        case Representation::ContinuousSeq:
            return DistanceKind::Dtw;
        case Representation::DiscreteSeq:
            return DistanceKind::Edit;
        default:
            return DistanceKind::Cosine;
        }
    }

    std::string name() const {
        std::string repr = representation_ == Representation::ContinuousAvg ? "avg"
                           : representation_ == Representation::ContinuousSeq ? "dtw"
                                                                              : "edit";
        return repr + "-" + std::string(to_string(method_));
    }

private:
    SystemSpec() = default;
    Representation representation_ = Representation::ContinuousAvg;
    Method method_ = Method::KMeans;
    Hyperparameters hp_;
};

inline nlohmann::ordered_json to_json(const Hyperparameters& hp) {
    nlohmann::ordered_json j;
    j["k"] = hp.k ? nlohmann::ordered_json(*hp.k) : nlohmann::ordered_json(nullptr);
    j["gamma"] = hp.gamma ? nlohmann::ordered_json(*hp.gamma) : nlohmann::ordered_json(nullptr);
    j["threshold"] = hp.threshold ? nlohmann::ordered_json(*hp.threshold) : nlohmann::ordered_json(nullptr);
    j["normalize"] = hp.normalize;
    j["pca_dims"] = hp.pca_dims;
    j["birch_threshold"] = hp.birch_threshold;
    j["birch_branching"] = hp.birch_branching;
    j["kmeans_max_iter"] = hp.kmeans_max_iter;
    j["kmeans_tol"] = hp.kmeans_tol;
    j["codebook_size"] = hp.codebook_size;
    j["dpdp_lambda"] = hp.dpdp_lambda;
    j["dtw_band"] = hp.dtw_band ? nlohmann::ordered_json(*hp.dtw_band) : nlohmann::ordered_json(nullptr);
    j["gamma_steps"] = hp.gamma_steps;
    return j;
}

/// Overlay the fields present in `j` onto `base`.
inline Hyperparameters hyperparameters_from_json(const nlohmann::json& j, Hyperparameters base = {}) {
    auto known = to_json(base);
    for (const auto& [key, _] : j.items()) {
        if (key != "system" && !known.contains(key)) {
            throw ParseError("unknown hyperparameter '" + key + "'");
        }
    }
    try {
        auto opt = [&](const char* key, auto& field) {
            if (j.contains(key)) {
                using T = typename std::decay_t<decltype(field)>::value_type;
                field = j.at(key).is_null() ? std::nullopt : std::optional<T>(j.at(key).get<T>());
            }
        };
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) {
                field = j.at(key).get<std::decay_t<decltype(field)>>();
            }
        };
        opt("k", base.k);
        opt("gamma", base.gamma);
        opt("threshold", base.threshold);
        get("normalize", base.normalize);
        get("pca_dims", base.pca_dims);
        get("birch_threshold", base.birch_threshold);
        get("birch_branching", base.birch_branching);
        get("kmeans_max_iter", base.kmeans_max_iter);
        get("kmeans_tol", base.kmeans_tol);
        get("codebook_size", base.codebook_size);
        get("dpdp_lambda", base.dpdp_lambda);
        opt("dtw_band", base.dtw_band);
        get("gamma_steps", base.gamma_steps);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("hyperparameters: ") + e.what());
    }
    return base;
}

/// Input data shared by every system: the manifest and raw continuous features.
struct Corpus {
    Manifest manifest;
    std::vector<FrameFeatureSequence> features;
    /// Pretrained unit codebook; trained on the corpus's raw frames when absent.
    std::optional<Codebook> codebook;
};

struct RunContext {
    std::uint64_t seed = 0;
    int workers = 0;
};

struct SystemRun {
    std::string system;
    Clustering clustering;
    EvalReport report;
    std::size_t k = 0;
    std::optional<double> gamma;
    std::optional<GammaTuneResult> tuning;
};

namespace detail {

inline std::size_t true_type_count(const Manifest& manifest) {
    auto ids = label_ids(manifest);
    std::int32_t m = -1;
    for (auto l : ids) {
        m = std::max(m, l);
    }
    return static_cast<std::size_t>(m + 1);
}

inline std::size_t resolve_k(const Hyperparameters& hp, const Manifest& manifest) {
    return hp.k ? *hp.k : true_type_count(manifest);
}

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace detail

/// Normalization then PCA, as configured: the continuous clustering-side feature path.
inline std::vector<FrameFeatureSequence> prepare_continuous(const std::vector<FrameFeatureSequence>& features,
                                                            const Hyperparameters& hp, int workers = 0) {
    std::vector<FrameFeatureSequence> out = hp.normalize ? normalize_mean_variance(features, workers).sequences : features;
    if (hp.pca_dims > 0) {
        std::size_t d = std::min(hp.pca_dims, out.front().dim());
        auto projection = fit_pca(out, d);
        out = apply_pca(out, projection, workers);
    }
    return out;
}

inline std::vector<WordEmbedding> prepare_embeddings(const std::vector<FrameFeatureSequence>& features,
                                                     const Hyperparameters& hp, int workers = 0) {
    return average_embed(prepare_continuous(features, hp, workers), workers);
}

/// Raw features quantized with the corpus codebook (trained if needed) and DPDP-smoothed.
inline std::vector<UnitSequence> prepare_units(const Corpus& corpus, const Hyperparameters& hp, std::uint64_t seed,
                                               int workers = 0) {
    Codebook codebook = corpus.codebook ? *corpus.codebook
                                        : train_codebook(corpus.features, hp.codebook_size, seed, {100, 1e-4, workers});
    return dpdp_smooth(corpus.features, codebook, hp.dpdp_lambda, workers);
}

struct GraphClusteringResult {
    std::vector<std::int32_t> labels;
    double gamma = 0.0;
    std::optional<GammaTuneResult> tuning;
};

/// Leiden on `graph` with the given gamma, or with gamma tuned to `k` communities.
inline GraphClusteringResult cluster_graph(const SimilarityGraph& graph, std::size_t k, const Hyperparameters& hp,
                                           std::uint64_t seed, std::optional<std::vector<std::int32_t>> initial = {}) {
    GraphClusteringResult out;
    if (hp.gamma) {
        out.gamma = *hp.gamma;
    } else {
        GammaTuneOptions tune;
        tune.seed = seed;
        tune.max_steps = hp.gamma_steps;
        out.tuning = tune_gamma(graph, k, tune);
        out.gamma = out.tuning->gamma;
    }
    LeidenOptions options;
    options.seed = seed;
    options.initial = std::move(initial);
    out.labels = leiden(graph, out.gamma, options).membership;
    return out;
}

/**
 * Cluster averaged embeddings with one of the four methods into `k` clusters
 * (graph clustering tunes gamma towards `k` unless it is fixed).
 */
inline GraphClusteringResult cluster_embeddings(Method method, const std::vector<WordEmbedding>& embeddings, std::size_t k,
                                                const Hyperparameters& hp, const SeedSequence& seeds, int workers = 0) {
    GraphClusteringResult out;
    switch (method) {
    case Method::KMeans: {
        KMeansOptions options;
        options.max_iter = hp.kmeans_max_iter;
        options.tol = hp.kmeans_tol;
        options.seed = seeds.stream("kmeans");
        options.workers = workers;
        out.labels = kmeans(stack_embeddings(embeddings), k, options).labels;
        break;
    }
    case Method::Birch: {
        BirchOptions options;
        options.threshold = hp.birch_threshold;
        options.branching = hp.birch_branching;
        out.labels = birch(stack_embeddings(embeddings), k, options).labels;
        break;
    }
    case Method::Agglomerative:
        out.labels = agglomerative_ward(stack_embeddings(embeddings), k);
        break;
    case Method::Graph: {
        GraphOptions options;
        options.workers = workers;
        double threshold = hp.threshold.value_or(default_threshold(DistanceKind::Cosine));
        auto graph = build_graph(embeddings, DistanceKind::Cosine, threshold, options);
        out = cluster_graph(graph, k, hp, seeds.stream("leiden"));
        break;
    }
    }
    return out;
}

namespace detail {

inline SystemRun finish_run(std::string system, const Manifest& manifest, GraphClusteringResult result, std::size_t k,
                            bool graph, Clock::time_point start, int workers) {
    SystemRun run;
    run.system = std::move(system);
    run.k = k;
    run.clustering = Clustering::from_labels(manifest, result.labels);
    double runtime = seconds_since(start);
    run.report = evaluate_all(run.clustering, manifest, runtime, NedMode::PerCluster, workers);
    if (graph) {
        run.gamma = result.gamma;
        run.tuning = result.tuning;
    }
    return run;
}

}  // namespace detail

/**
 * Build the graph for a sequence representation (DTW over normalized/PCA
 * features, or edit distance over DPDP-smoothed units).
 */
inline SimilarityGraph build_system_graph(const SystemSpec& spec, const Corpus& corpus, const SeedSequence& seeds,
                                          int workers = 0) {
    const auto& hp = spec.hyperparameters();
    GraphOptions options;
    options.workers = workers;
    options.dtw.band = hp.dtw_band;
    double threshold = hp.threshold.value_or(default_threshold(spec.distance()));
    switch (spec.representation()) {
    case Representation::ContinuousAvg:
        return build_graph(prepare_embeddings(corpus.features, hp, workers), DistanceKind::Cosine, threshold, options);
    case Representation::ContinuousSeq:
        return build_graph(prepare_continuous(corpus.features, hp, workers), DistanceKind::Dtw, threshold, options);
    case Representation::DiscreteSeq:
        return build_graph(prepare_units(corpus, hp, seeds.stream("codebook"), workers), DistanceKind::Edit, threshold,
                           options);
    }
    throw ArgumentError("unreachable representation");
}

/**
 * Run one system end to end on `corpus` and evaluate it. The report's runtime
 * is the wall clock of the pipeline (transform, distances, clustering),
 * excluding loading the inputs and the evaluation itself.
 */
inline SystemRun run_system(const SystemSpec& spec, const Corpus& corpus, const RunContext& ctx = {}) {
    const auto start = detail::Clock::now();
    const SeedSequence seeds(ctx.seed);
    const auto& hp = spec.hyperparameters();
    const std::size_t k = detail::resolve_k(hp, corpus.manifest);

    GraphClusteringResult result;
    if (spec.representation() == Representation::ContinuousAvg) {
        auto embeddings = prepare_embeddings(corpus.features, hp, ctx.workers);
        result = cluster_embeddings(spec.method(), embeddings, k, hp, seeds, ctx.workers);
    } else {
        auto graph = build_system_graph(spec, corpus, seeds, ctx.workers);
        result = cluster_graph(graph, k, hp, seeds.stream("leiden"));
    }
    SystemRun run;
    run.system = spec.name();
    run.k = k;
    run.clustering = Clustering::from_labels(corpus.manifest, result.labels);
    run.report = evaluate_all(run.clustering, corpus.manifest, detail::seconds_since(start), NedMode::PerCluster, ctx.workers);
    if (spec.method() == Method::Graph) {
        run.gamma = result.gamma;
        run.tuning = result.tuning;
    }
    return run;
}

/// One row per spec, in the order given.
inline std::vector<SystemRun> compare_systems(const std::vector<SystemSpec>& specs, const Corpus& corpus,
                                              const RunContext& ctx = {}) {
    std::vector<SystemRun> rows;
    rows.reserve(specs.size());
    for (const auto& spec : specs) {
        rows.push_back(run_system(spec, corpus, ctx));
    }
    return rows;
}

inline std::string format_comparison(const std::vector<SystemRun>& rows) {
    std::vector<std::pair<std::string, EvalReport>> table;
    for (const auto& r : rows) {
        table.emplace_back(r.system, r.report);
    }
    return format_report_table(table);
}

/// A declarative comparison: systems in row order, shared hyperparameters and one seed.
struct CompareConfig {
    std::vector<SystemSpec> systems;
    Hyperparameters hyperparameters;
    std::uint64_t seed = 0;
};

/**
 * Parse `{"systems": [...], "hyperparameters": {...}, "seed": n}`. Each entry
 * of `systems` is either a system name or an object with a `system` name plus
 * per-system hyperparameter overrides.
 */
inline CompareConfig parse_compare_config(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ParseError("compare config must be a JSON object");
    }
    for (const auto& [key, _] : j.items()) {
        if (key != "systems" && key != "hyperparameters" && key != "seed") {
            throw ParseError("compare config: unknown field '" + key + "'");
        }
    }
    CompareConfig config;
    if (j.contains("hyperparameters")) {
        config.hyperparameters = hyperparameters_from_json(j.at("hyperparameters"));
    }
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) {
            throw ParseError("compare config: seed must be a non-negative integer");
        }
        config.seed = j.at("seed").get<std::uint64_t>();
    }
    if (!j.contains("systems") || !j.at("systems").is_array() || j.at("systems").empty()) {
        throw ParseError("compare config: 'systems' must be a non-empty list");
    }
    for (const auto& entry : j.at("systems")) {
        if (entry.is_string()) {
            config.systems.push_back(SystemSpec::parse(entry.get<std::string>(), config.hyperparameters));
        } else if (entry.is_object() && entry.contains("system") && entry.at("system").is_string()) {
            config.systems.push_back(SystemSpec::parse(entry.at("system").get<std::string>(),
                                                       hyperparameters_from_json(entry, config.hyperparameters)));
        } else {
            throw ParseError("compare config: each system must be a name or an object with a 'system' name");
        }
    }
    return config;
}

inline nlohmann::ordered_json to_json(const CompareConfig& config) {
    nlohmann::ordered_json systems = nlohmann::ordered_json::array();
    for (const auto& spec : config.systems) {
        auto entry = to_json(spec.hyperparameters());
        entry["system"] = spec.name();
        systems.push_back(std::move(entry));
    }
    nlohmann::ordered_json j;
    j["systems"] = std::move(systems);
    j["seed"] = config.seed;
    return j;
}

// ---------------------------------------------------------------------------
// Perfect cluster initialization
// ---------------------------------------------------------------------------

struct PerfectInitRun {
    /// The label partition the method starts from, and its scores.
    Clustering initial;
    EvalReport initial_report;
    /// The method's output after running to convergence from that start.
    SystemRun final;
    /// The same system started as usual, for comparison.
    SystemRun baseline;
};

/// Row i is the mean of the embeddings whose label id is i.
inline MatrixD label_means(const MatrixD& points, const std::vector<std::int32_t>& labels) {
    std::int32_t k = 0;
    for (auto l : labels) {
        k = std::max(k, l + 1);
    }
    MatrixD means = MatrixD::Zero(k, points.cols());
    std::vector<double> counts(static_cast<std::size_t>(k), 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        means.row(labels[i]) += points.row(static_cast<Eigen::Index>(i));
        counts[static_cast<std::size_t>(labels[i])] += 1.0;
    }
    for (std::int32_t c = 0; c < k; ++c) {
        means.row(c) /= counts[static_cast<std::size_t>(c)];
    }
    return means;
}

/**
 * Start clustering from the true word-type partition, then run the method as
 * usual. K-means starts from the per-type mean embeddings; graph clustering
 * passes the type partition to Leiden as its initial partition, with the gamma
 * tuned for the baseline run (or fixed by the hyperparameters).
 */
inline PerfectInitRun perfect_init(const SystemSpec& spec, const Corpus& corpus, const RunContext& ctx = {}) {
    if (spec.method() != Method::KMeans && spec.method() != Method::Graph) {
        throw ArgumentError("perfect_init supports k-means and graph clustering, not " +
                            std::string(to_string(spec.method())));
    }
    const SeedSequence seeds(ctx.seed);
    const auto& hp = spec.hyperparameters();
    const auto truth = label_ids(corpus.manifest);
    const std::size_t k = detail::true_type_count(corpus.manifest);

    PerfectInitRun out;
    out.initial = Clustering::from_labels(corpus.manifest, truth);
    out.initial_report = evaluate_all(out.initial, corpus.manifest, 0.0, NedMode::PerCluster, ctx.workers);

    if (spec.method() == Method::KMeans) {
        out.baseline = run_system(spec, corpus, ctx);
        const auto start = detail::Clock::now();
        auto points = stack_embeddings(prepare_embeddings(corpus.features, hp, ctx.workers));
        KMeansOptions options;
        options.max_iter = hp.kmeans_max_iter;
        options.tol = hp.kmeans_tol;
        options.workers = ctx.workers;
        options.initial_centroids = label_means(points, truth);
        GraphClusteringResult result;
        result.labels = kmeans(points, k, options).labels;
        out.final = detail::finish_run(spec.name() + "+perfect-init", corpus.manifest, std::move(result), k, false, start,
                                       ctx.workers);
        return out;
    }

    auto start = detail::Clock::now();
    auto graph = build_system_graph(spec, corpus, seeds, ctx.workers);
    double build_s = detail::seconds_since(start);
    const std::size_t target = hp.k.value_or(k);
    auto baseline = cluster_graph(graph, target, hp, seeds.stream("leiden"));
    out.baseline = detail::finish_run(spec.name(), corpus.manifest, baseline, target, true, start, ctx.workers);

    Hyperparameters fixed = hp;
    fixed.gamma = baseline.gamma;
    auto leiden_start = detail::Clock::now() - std::chrono::duration_cast<detail::Clock::duration>(
                                                   std::chrono::duration<double>(build_s));
    auto result = cluster_graph(graph, target, fixed, seeds.stream("leiden"), truth);
    result.tuning = baseline.tuning;
    out.final = detail::finish_run(spec.name() + "+perfect-init", corpus.manifest, std::move(result), target, true,
                                   leiden_start, ctx.workers);
    return out;
}

// ---------------------------------------------------------------------------
// Perfect representations
// ---------------------------------------------------------------------------

enum class PerfectMode { Embedding, Sequence };

inline constexpr double default_perfect_noise = 1e-4;

/**
 * Replace every embedding by its word type's mean embedding (scaled to unit
 * norm) plus isotropic Gaussian noise of standard deviation `sigma`, then
 * renormalize. Throws `DegenerateError` if a type's mean is the zero vector.
 */
inline std::vector<WordEmbedding> perfect_embeddings(const std::vector<WordEmbedding>& embeddings,
                                                     const std::vector<std::int32_t>& labels, double sigma,
                                                     std::uint64_t seed) {
    if (embeddings.size() != labels.size()) {
        throw ArgumentError("perfect_embeddings: embedding and label counts differ");
    }
    if (!(sigma >= 0.0)) {
        throw ArgumentError("perfect_embeddings: sigma must be non-negative");
    }
    MatrixD means = label_means(stack_embeddings(embeddings), labels);
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
        double norm = means.row(c).norm();
        if (!(norm > 0.0)) {
            throw DegenerateError("perfect_embeddings: word type " + std::to_string(c) + " has a zero mean embedding");
        }
        means.row(c) /= norm;
    }
    Rng rng(seed);
    std::vector<WordEmbedding> out(embeddings.size());
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        VectorD v = means.row(labels[i]).transpose();
        if (sigma > 0.0) {
            for (Eigen::Index j = 0; j < v.size(); ++j) {
                v(j) += sigma * normal01(rng);
            }
        }
        double norm = v.norm();
        if (!(norm > 0.0)) {
            throw DegenerateError("perfect_embeddings: noisy embedding collapsed to zero");
        }
        out[i] = {embeddings[i].segment_id, (v / norm).cast<float>()};
    }
    return out;
}

/// One uniformly chosen instance's unit sequence per word type, copied to every instance of that type.
inline std::vector<UnitSequence> perfect_sequences(const std::vector<UnitSequence>& units,
                                                   const std::vector<std::int32_t>& labels, std::uint64_t seed) {
    if (units.size() != labels.size()) {
        throw ArgumentError("perfect_sequences: unit and label counts differ");
    }
    std::int32_t k = 0;
    for (auto l : labels) {
        k = std::max(k, l + 1);
    }
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members[static_cast<std::size_t>(labels[i])].push_back(i);
    }
    Rng rng(seed);
    std::vector<std::size_t> representative(static_cast<std::size_t>(k));
    for (std::size_t c = 0; c < members.size(); ++c) {
        representative[c] = members[c][uniform_index(rng, members[c].size())];
    }
    std::vector<UnitSequence> out(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        out[i] = {units[i].segment_id, units[representative[static_cast<std::size_t>(labels[i])]].units};
    }
    return out;
}

/// Idealized representations: embeddings (embedding mode) or unit sequences (sequence mode).
struct PerfectRepresentations {
    PerfectMode mode = PerfectMode::Embedding;
    std::vector<WordEmbedding> embeddings;
    std::vector<UnitSequence> units;
};

/**
 * Compute the usual representations for `corpus`, then idealize them using
 * the true word labels. Phones and the manifest are left untouched.
 */
inline PerfectRepresentations perfect_representations(const Corpus& corpus, PerfectMode mode, double sigma,
                                                       const Hyperparameters& hp, const RunContext& ctx = {}) {
    const SeedSequence seeds(ctx.seed);
    const auto truth = label_ids(corpus.manifest);
    PerfectRepresentations out;
    out.mode = mode;
    if (mode == PerfectMode::Embedding) {
        out.embeddings = perfect_embeddings(prepare_embeddings(corpus.features, hp, ctx.workers), truth, sigma,
                                            seeds.stream("perfect-repr"));
    } else {
        out.units = perfect_sequences(prepare_units(corpus, hp, seeds.stream("codebook"), ctx.workers), truth,
                                      seeds.stream("perfect-repr"));
    }
    return out;
}

/**
 * Cluster idealized representations with `method` (graph clustering only for
 * sequence mode) and evaluate against the untouched manifest.
 */
inline SystemRun cluster_perfect(const PerfectRepresentations& repr, Method method, const Manifest& manifest,
                                 const Hyperparameters& hp, const RunContext& ctx = {}) {
    const auto start = detail::Clock::now();
    const SeedSequence seeds(ctx.seed);
    const std::size_t k = detail::resolve_k(hp, manifest);
    GraphClusteringResult result;
    std::string name;
    if (repr.mode == PerfectMode::Embedding) {
        result = cluster_embeddings(method, repr.embeddings, k, hp, seeds, ctx.workers);
        name = "perfect-avg-" + std::string(to_string(method));
    } else {
        if (method != Method::Graph) {
            throw ArgumentError("perfect sequences can only be graph clustered");
        }
        GraphOptions options;
        options.workers = ctx.workers;
        auto graph = build_graph(repr.units, DistanceKind::Edit, hp.threshold.value_or(default_threshold(DistanceKind::Edit)),
                                 options);
        result = cluster_graph(graph, k, hp, seeds.stream("leiden"));
        name = "perfect-edit-graph";
    }
    return detail::finish_run(name, manifest, std::move(result), k, method == Method::Graph, start, ctx.workers);
}

// ---------------------------------------------------------------------------
// Noise sweep
// ---------------------------------------------------------------------------

struct NoiseSweepRow {
    double sigma = 0.0;
    /// One report per seed.
    std::vector<EvalReport> reports;
    /// The same corpora after perfect (embedding) representations.
    std::vector<EvalReport> perfect_reports;
    double mean_purity = 0.0;
    double mean_v_measure = 0.0;
    double mean_perfect_purity = 0.0;
};

struct NoiseSweepOptions {
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    /// System evaluated at each noise level.
    Representation representation = Representation::ContinuousAvg;
    Method method = Method::Agglomerative;
    Hyperparameters hp;
    /// Noise of the perfect-representation control run.
    double perfect_sigma = default_perfect_noise;
    int workers = 0;
};

/**
 * For each noise level: generate one corpus per seed with that within-type
 * noise, run the system with the true k, and also cluster the corpus's
 * perfect embeddings with the same method.
 */
inline std::vector<NoiseSweepRow> sweep_noise(const SynthConfig& config, const std::vector<double>& sigmas,
                                              const NoiseSweepOptions& options = {}) {
    auto spec = SystemSpec::make(options.representation, options.method, options.hp);
    std::vector<NoiseSweepRow> rows;
    for (double sigma : sigmas) {
        NoiseSweepRow row;
        row.sigma = sigma;
        for (auto seed : options.seeds) {
            SynthConfig c = config;
            c.within_type_noise = sigma;
            c.seed = seed;
            auto synth = generate(c, options.workers);
            Corpus corpus{synth.manifest, std::move(synth.features), std::nullopt};
            RunContext ctx{seed, options.workers};
            row.reports.push_back(run_system(spec, corpus, ctx).report);
            auto perfect = perfect_representations(corpus, PerfectMode::Embedding, options.perfect_sigma, options.hp, ctx);
            row.perfect_reports.push_back(cluster_perfect(perfect, options.method, corpus.manifest, options.hp, ctx).report);
        }
        for (std::size_t s = 0; s < row.reports.size(); ++s) {
            row.mean_purity += row.reports[s].purity;
            row.mean_v_measure += row.reports[s].v_measure;
            row.mean_perfect_purity += row.perfect_reports[s].purity;
        }
        auto count = static_cast<double>(row.reports.size());
        row.mean_purity /= count;
        row.mean_v_measure /= count;
        row.mean_perfect_purity /= count;
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace lxk

#endif
