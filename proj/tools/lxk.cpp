#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"

#include <lxk/lxk.hpp>

#ifndef LXK_VERSION
#define LXK_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string version_string() {
    std::ostringstream out;
    out << "lxk " << LXK_VERSION << " (Eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
        << EIGEN_MINOR_VERSION << ", nlohmann_json " << NLOHMANN_JSON_VERSION_MAJOR << '.' << NLOHMANN_JSON_VERSION_MINOR
        << '.' << NLOHMANN_JSON_VERSION_PATCH << ", " <<
#if defined(__clang__)
        "clang " << __clang_version__
#elif defined(__GNUC__)
        "gcc " << __VERSION__
#else
        "unknown compiler"
#endif
        << ")";
    return out.str();
}

ordered_json versions_json() {
    ordered_json j;
    j["lxk"] = LXK_VERSION;
    j["build"] = version_string();
    return j;
}

/// Everything a subcommand needs to record in its run metadata.
struct Invocation {
    std::vector<std::string> argv;
    std::string command;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

Invocation g_invocation;

void log(const std::string& message) { std::cerr << "[lxk] " << message << '\n'; }

double elapsed_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - g_invocation.start).count();
}

void write_metadata(const fs::path& dir, ordered_json config, ordered_json extra = ordered_json::object()) {
    ordered_json meta;
    meta["command"] = g_invocation.command;
    meta["argv"] = g_invocation.argv;
    meta["config"] = std::move(config);
    meta["workers"] = lxk::default_workers();
    meta["versions"] = versions_json();
    for (auto& [key, value] : extra.items()) {
        meta[key] = value;
    }
    meta["wall_clock_s"] = elapsed_s();
    lxk::io::write_json(meta, dir / "metadata.json");
}

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

struct CorpusArgs {
    std::string manifest;
    std::string features;
    std::string codebook;

    void add(CLI::App* app, bool features_required = true) {
        app->add_option("--manifest", manifest, "Segment manifest (manifest.jsonl)")->required()->check(CLI::ExistingFile);
        auto* opt = app->add_option("--features", features, "Directory of per-segment .lxk feature files")
                        ->check(CLI::ExistingDirectory);
        if (features_required) {
            opt->required();
        }
    }

    void add_codebook(CLI::App* app) {
        app->add_option("--codebook", codebook, "Pretrained unit codebook (.lxk); trained on the corpus if absent")
            ->check(CLI::ExistingFile);
    }

    lxk::Corpus load() const {
        lxk::Corpus corpus;
        corpus.manifest = lxk::io::read_manifest(manifest);
        corpus.features = lxk::io::read_features(features, corpus.manifest);
        if (!codebook.empty()) {
            corpus.codebook = lxk::read_codebook(codebook);
        }
        return corpus;
    }

    ordered_json to_json() const {
        ordered_json j;
        j["manifest"] = manifest;
        j["features"] = features;
        j["codebook"] = codebook.empty() ? ordered_json(nullptr) : ordered_json(codebook);
        return j;
    }
};

struct HyperArgs {
    std::string file;
    std::optional<std::size_t> k;
    std::optional<double> gamma;
    std::optional<double> threshold;
    std::optional<std::size_t> pca_dims;
    bool no_normalize = false;
    std::optional<double> lambda;
    std::optional<std::size_t> codebook_size;
    std::optional<std::size_t> dtw_band;
    std::optional<double> birch_threshold;
    std::optional<std::size_t> birch_branching;

    void add(CLI::App* app) {
        app->add_option("--hparams", file, "JSON file of hyperparameters (flags override it)")->check(CLI::ExistingFile);
        app->add_option("--k", k, "Number of clusters (default: number of true word types)")->check(CLI::PositiveNumber);
        app->add_option("--gamma", gamma, "CPM resolution for graph clustering (default: tuned to k)")
            ->check(CLI::PositiveNumber);
        app->add_option("--threshold", threshold, "Graph distance threshold (default by distance kind)")
            ->check(CLI::Range(0.0, 2.0));
        app->add_option("--pca-dims", pca_dims, "PCA output dimension, 0 disables PCA (default 350)");
        app->add_flag("--no-normalize", no_normalize, "Skip per-dimension mean-variance normalization");
        app->add_option("--lambda", lambda, "DPDP per-transition penalty (default 0)")->check(CLI::NonNegativeNumber);
        app->add_option("--codebook-size", codebook_size, "Codebook size when training one (default 500)")
            ->check(CLI::PositiveNumber);
        app->add_option("--dtw-band", dtw_band, "Sakoe-Chiba band half-width for DTW (default: none)");
        app->add_option("--birch-threshold", birch_threshold, "BIRCH subcluster diameter threshold (default 0.25)")
            ->check(CLI::PositiveNumber);
        app->add_option("--birch-branching", birch_branching, "BIRCH branching factor (default 50)")
            ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));
    }

    lxk::Hyperparameters resolve(lxk::Hyperparameters base = {}) const {
        if (!file.empty()) {
            base = lxk::hyperparameters_from_json(lxk::io::read_json(file), base);
        }
        if (k) base.k = k;
        if (gamma) base.gamma = gamma;
        if (threshold) base.threshold = threshold;
        if (pca_dims) base.pca_dims = *pca_dims;
        if (no_normalize) base.normalize = false;
        if (lambda) base.dpdp_lambda = *lambda;
        if (codebook_size) base.codebook_size = *codebook_size;
        if (dtw_band) base.dtw_band = dtw_band;
        if (birch_threshold) base.birch_threshold = *birch_threshold;
        if (birch_branching) base.birch_branching = *birch_branching;
        return base;
    }
};

void require_labels(const lxk::Manifest& manifest, const lxk::Hyperparameters& hp, const char* what) {
    if (hp.k) {
        return;
    }
    for (const auto& seg : manifest) {
        if (!seg.word_label) {
            throw lxk::ArgumentError(std::string(what) + ": --k is required when the manifest has no word labels");
        }
    }
}

bool fully_labelled(const lxk::Manifest& manifest) {
    for (const auto& seg : manifest) {
        if (!seg.word_label) {
            return false;
        }
    }
    return true;
}

void write_run(const fs::path& dir, const lxk::SystemRun& run, const lxk::Manifest& manifest) {
    fs::create_directories(dir);
    lxk::io::write_clustering(run.clustering, dir / "clustering.tsv", &manifest);
    lxk::io::write_json(lxk::report_to_json(run.report), dir / "report.json");
}

ordered_json run_json(const lxk::SystemRun& run) {
    ordered_json j;
    j["system"] = run.system;
    j["k"] = run.k;
    j["gamma"] = run.gamma ? ordered_json(*run.gamma) : ordered_json(nullptr);
    if (run.tuning) {
        j["gamma_tuning"] = {{"steps", run.tuning->steps},
                             {"n_clusters", run.tuning->n_clusters},
                             {"reached", run.tuning->reached},
                             {"budget_exhausted", run.tuning->budget_exhausted},
                             {"unreachable", run.tuning->unreachable}};
    }
    j["runtime_s"] = run.report.runtime_s;
    j["report"] = lxk::report_to_json(run.report);
    return j;
}

void warn_tuning(const lxk::SystemRun& run) {
    if (run.tuning && !run.tuning->reached) {
        log(run.system + ": gamma tuning did not reach k=" + std::to_string(run.k) + " (got " +
            std::to_string(run.tuning->n_clusters) + " clusters" +
            (run.tuning->unreachable ? ", target unreachable" : ", step budget exhausted") + ")");
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

void add_synth(CLI::App& root) {
    auto* synth = root.add_subcommand("synth", "Synthetic corpora with known word types")->require_subcommand(1);
    auto* gen = synth->add_subcommand("generate", "Generate a labelled synthetic corpus");
    auto config = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto seed = std::make_shared<std::optional<std::uint64_t>>();
    gen->add_option("--config", *config, "SynthConfig JSON file")->required()->check(CLI::ExistingFile);
    gen->add_option("--out", *out, "Output directory")->required();
    gen->add_option("--seed", *seed, "Override the config's seed");
    gen->callback([=] {
        auto cfg = lxk::synth_config_from_json(lxk::io::read_json(*config));
        if (*seed) {
            cfg.seed = **seed;
        }
        cfg.validate();
        auto corpus = lxk::generate(cfg);
        fs::path dir(*out);
        fs::create_directories(dir);
        lxk::io::write_manifest(corpus.manifest, dir / "manifest.jsonl");
        lxk::io::write_features(dir / "features", corpus.features);
        write_metadata(dir, {{"synth", lxk::to_json(cfg)}});
        std::cout << "wrote " << corpus.manifest.size() << " segments to " << dir.string() << '\n';
    });
}

// ---------------------------------------------------------------------------
// transform
// ---------------------------------------------------------------------------

void add_transform(CLI::App& root) {
    auto* transform = root.add_subcommand("transform", "Feature transforms")->require_subcommand(1);

    {
        auto* sub = transform->add_subcommand("normalize", "Per-dimension mean-variance normalization");
        auto corpus = std::make_shared<CorpusArgs>();
        auto out = std::make_shared<std::string>();
        corpus->add(sub);
        sub->add_option("--out", *out, "Output directory")->required();
        sub->callback([=] {
            auto manifest = lxk::io::read_manifest(corpus->manifest);
            auto features = lxk::io::read_features(corpus->features, manifest);
            auto normalized = lxk::normalize_mean_variance(features);
            fs::path dir(*out);
            fs::create_directories(dir);
            lxk::io::write_features(dir / "features", normalized.sequences);
            lxk::io::write_matrix(dir / "stats.lxk", lxk::stats_to_matrix(normalized.stats));
            write_metadata(dir, {{"inputs", corpus->to_json()}},
                           {{"constant_dims", normalized.stats.constant_dims}});
        });
    }

    {
        auto* sub = transform->add_subcommand("pca", "Fit and/or apply a PCA projection");
        auto corpus = std::make_shared<CorpusArgs>();
        auto out = std::make_shared<std::string>();
        auto dims = std::make_shared<std::size_t>(lxk::default_pca_dims);
        auto projection = std::make_shared<std::string>();
        auto fit_manifest = std::make_shared<std::string>();
        auto fit_features = std::make_shared<std::string>();
        corpus->add(sub);
        sub->add_option("--out", *out, "Output directory")->required();
        sub->add_option("--dims", *dims, "Output dimension (capped at the feature dimension)")->check(CLI::PositiveNumber);
        auto* proj = sub->add_option("--projection", *projection, "Apply an existing projection directory instead of fitting")
                         ->check(CLI::ExistingDirectory);
        auto* fm = sub->add_option("--fit-manifest", *fit_manifest, "Fit on this manifest instead of the input corpus")
                       ->check(CLI::ExistingFile);
        auto* ff = sub->add_option("--fit-features", *fit_features, "Feature directory for --fit-manifest")
                       ->check(CLI::ExistingDirectory);
        fm->needs(ff);
        ff->needs(fm);
        proj->excludes(fm);
        sub->callback([=] {
            auto manifest = lxk::io::read_manifest(corpus->manifest);
            auto features = lxk::io::read_features(corpus->features, manifest);
            lxk::PcaProjection p;
            if (!projection->empty()) {
                p = lxk::read_pca(*projection);
            } else if (!fit_manifest->empty()) {
                auto fit_m = lxk::io::read_manifest(*fit_manifest);
                auto fit_f = lxk::io::read_features(*fit_features, fit_m);
                p = lxk::fit_pca(fit_f, std::min(*dims, fit_f.front().dim()));
            } else {
                p = lxk::fit_pca(features, std::min(*dims, features.front().dim()));
            }
            fs::path dir(*out);
            fs::create_directories(dir);
            lxk::io::write_features(dir / "features", lxk::apply_pca(features, p));
            if (projection->empty()) {
                lxk::write_pca(p, dir / "pca");
            }
            write_metadata(dir, {{"inputs", corpus->to_json()},
                                 {"dims", *dims},
                                 {"projection", projection->empty() ? ordered_json(nullptr) : ordered_json(*projection)},
                                 {"fit_manifest", fit_manifest->empty() ? ordered_json(nullptr) : ordered_json(*fit_manifest)},
                                 {"fit_features", fit_features->empty() ? ordered_json(nullptr) : ordered_json(*fit_features)}});
        });
    }

    {
        auto* sub = transform->add_subcommand("embed", "Average frames into unit-norm word embeddings");
        auto corpus = std::make_shared<CorpusArgs>();
        auto out = std::make_shared<std::string>();
        corpus->add(sub);
        sub->add_option("--out", *out, "Output directory")->required();
        sub->callback([=] {
            auto manifest = lxk::io::read_manifest(corpus->manifest);
            auto features = lxk::io::read_features(corpus->features, manifest);
            fs::path dir(*out);
            fs::create_directories(dir);
            lxk::io::write_embeddings(dir / "embeddings", lxk::average_embed(features));
            write_metadata(dir, {{"inputs", corpus->to_json()}});
        });
    }

    {
        auto* sub = transform->add_subcommand("quantize", "Quantize raw frames to DPDP-smoothed unit sequences");
        auto corpus = std::make_shared<CorpusArgs>();
        auto out = std::make_shared<std::string>();
        auto size = std::make_shared<std::size_t>(lxk::default_codebook_size);
        auto lambda = std::make_shared<double>(0.0);
        auto seed = std::make_shared<std::uint64_t>(0);
        corpus->add(sub);
        corpus->add_codebook(sub);
        sub->add_option("--out", *out, "Output directory")->required();
        sub->add_option("--codebook-size", *size, "Codebook size when training")->check(CLI::PositiveNumber);
        sub->add_option("--lambda", *lambda, "DPDP per-transition penalty")->check(CLI::NonNegativeNumber);
        sub->add_option("--seed", *seed, "Top-level seed");
        sub->callback([=] {
            auto manifest = lxk::io::read_manifest(corpus->manifest);
            auto features = lxk::io::read_features(corpus->features, manifest);
            lxk::SeedSequence seeds(*seed);
            auto codebook = corpus->codebook.empty() ? lxk::train_codebook(features, *size, seeds.stream("codebook"))
                                                     : lxk::read_codebook(corpus->codebook);
            fs::path dir(*out);
            fs::create_directories(dir);
            if (corpus->codebook.empty()) {
                lxk::write_codebook(codebook, dir / "codebook.lxk");
            }
            lxk::io::write_unit_sequences(dir / "units", lxk::dpdp_smooth(features, codebook, *lambda));
            write_metadata(dir, {{"inputs", corpus->to_json()},
                                 {"codebook_size", codebook.size()},
                                 {"lambda", *lambda},
                                 {"seed", *seed}});
        });
    }
}

// ---------------------------------------------------------------------------
// distance
// ---------------------------------------------------------------------------

void add_distance(CLI::App& root) {
    auto* distance = root.add_subcommand("distance", "Pairwise distances")->require_subcommand(1);
    auto* sub = distance->add_subcommand("pairwise", "Condensed pairwise distance table");
    auto kind = std::make_shared<std::string>();
    auto manifest = std::make_shared<std::string>();
    auto input = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto budget_gb = std::make_shared<double>(2.0);
    auto band = std::make_shared<std::optional<std::size_t>>();
    sub->add_option("--kind", *kind, "Distance kind")->required()->check(CLI::IsMember({"cosine", "dtw", "edit"}));
    sub->add_option("--manifest", *manifest, "Segment manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--input", *input,
                    "Per-segment directory: embeddings or features (cosine, averaged), features (dtw), units (edit)")
        ->required()
        ->check(CLI::ExistingDirectory);
    sub->add_option("--out", *out, "Output directory")->required();
    sub->add_option("--budget-gb", *budget_gb, "Refuse tables larger than this many GiB")->check(CLI::PositiveNumber);
    sub->add_option("--dtw-band", *band, "Sakoe-Chiba band half-width");
    sub->callback([=] {
        auto m = lxk::io::read_manifest(*manifest);
        lxk::PairwiseOptions options;
        options.memory_budget_bytes = static_cast<std::size_t>(*budget_gb * 1024.0 * 1024.0 * 1024.0);
        options.dtw.band = *band;
        auto k = lxk::parse_distance_kind(*kind);
        auto table = [&] {
            switch (k) {
            case lxk::DistanceKind::Cosine:
                return lxk::pairwise_distances(lxk::average_embed(lxk::io::read_features(*input, m)), k, options);
            case lxk::DistanceKind::Dtw:
                return lxk::pairwise_distances(lxk::io::read_features(*input, m), k, options);
            default:
                return lxk::pairwise_distances(lxk::io::read_unit_sequences(*input, m), k, options);
            }
        }();
        fs::path dir(*out);
        fs::create_directories(dir);
        lxk::write_distance_table(table, dir / "distances.lxkd");
        write_metadata(dir, {{"kind", *kind},
                             {"manifest", *manifest},
                             {"input", *input},
                             {"budget_gb", *budget_gb},
                             {"dtw_band", *band ? ordered_json(**band) : ordered_json(nullptr)}},
                       {{"n", table.size()}});
    });
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

void add_cluster(CLI::App& root) {
    auto* cluster = root.add_subcommand("cluster", "Cluster word segments")->require_subcommand(1);
    auto* sub = cluster->add_subcommand("run", "Run one representation + clustering method");
    auto method = std::make_shared<std::string>();
    auto repr = std::make_shared<std::string>();
    auto corpus = std::make_shared<CorpusArgs>();
    auto units = std::make_shared<std::string>();
    auto embeddings = std::make_shared<std::string>();
    auto hyper = std::make_shared<HyperArgs>();
    auto seed = std::make_shared<std::uint64_t>(0);
    auto out = std::make_shared<std::string>();
    sub->add_option("--method", *method, "Clustering method")
        ->required()
        ->check(CLI::IsMember({"kmeans", "birch", "agglom", "graph"}));
    sub->add_option("--repr", *repr, "Representation")->required()->check(CLI::IsMember({"avg", "dtw", "edit"}));
    corpus->add(sub, false);
    corpus->add_codebook(sub);
    auto* u = sub->add_option("--units", *units, "Precomputed unit sequences (edit representation)")
                  ->check(CLI::ExistingDirectory);
    auto* e = sub->add_option("--embeddings", *embeddings, "Precomputed word embeddings (avg representation)")
                  ->check(CLI::ExistingDirectory);
    hyper->add(sub);
    sub->add_option("--seed", *seed, "Top-level seed");
    sub->add_option("--out", *out, "Output directory")->required();
    u->excludes(e);
    sub->callback([=] {
        auto spec = lxk::SystemSpec::make(lxk::parse_representation(*repr), lxk::parse_method(*method), hyper->resolve());
        const auto& hp = spec.hyperparameters();
        if (!units->empty() && spec.representation() != lxk::Representation::DiscreteSeq) {
            throw lxk::ArgumentError("--units only applies to --repr edit");
        }
        if (!embeddings->empty() && spec.representation() != lxk::Representation::ContinuousAvg) {
            throw lxk::ArgumentError("--embeddings only applies to --repr avg");
        }
        if (units->empty() && embeddings->empty() && corpus->features.empty()) {
            throw lxk::ArgumentError("one of --features, --units or --embeddings is required");
        }
        auto manifest = lxk::io::read_manifest(corpus->manifest);
        require_labels(manifest, hp, "cluster run");
        lxk::SeedSequence seeds(*seed);
        const std::size_t k = hp.k ? *hp.k : lxk::detail::true_type_count(manifest);

        auto start = std::chrono::steady_clock::now();
        lxk::GraphClusteringResult result;
        if (!embeddings->empty()) {
            auto emb = lxk::average_embed(lxk::io::read_features(*embeddings, manifest));
            start = std::chrono::steady_clock::now();
            result = lxk::cluster_embeddings(spec.method(), emb, k, hp, seeds);
        } else if (!units->empty()) {
            auto seqs = lxk::io::read_unit_sequences(*units, manifest);
            start = std::chrono::steady_clock::now();
            lxk::GraphOptions options;
            auto graph = lxk::build_graph(seqs, lxk::DistanceKind::Edit,
                                          hp.threshold.value_or(lxk::default_threshold(lxk::DistanceKind::Edit)), options);
            result = lxk::cluster_graph(graph, k, hp, seeds.stream("leiden"));
        } else {
            lxk::Corpus data = corpus->load();
            start = std::chrono::steady_clock::now();
            if (spec.representation() == lxk::Representation::ContinuousAvg) {
                result = lxk::cluster_embeddings(spec.method(), lxk::prepare_embeddings(data.features, hp), k, hp, seeds);
            } else {
                result = lxk::cluster_graph(lxk::build_system_graph(spec, data, seeds), k, hp, seeds.stream("leiden"));
            }
        }
        double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        auto clustering = lxk::Clustering::from_labels(manifest, result.labels);
        fs::path dir(*out);
        fs::create_directories(dir);
        lxk::io::write_clustering(clustering, dir / "clustering.tsv", &manifest);

        ordered_json config;
        config["system"] = spec.name();
        config["method"] = *method;
        config["repr"] = *repr;
        config["inputs"] = corpus->to_json();
        config["units"] = units->empty() ? ordered_json(nullptr) : ordered_json(*units);
        config["embeddings"] = embeddings->empty() ? ordered_json(nullptr) : ordered_json(*embeddings);
        config["seed"] = *seed;
        config["hyperparameters"] = lxk::to_json(hp);
        ordered_json extra;
        extra["runtime_s"] = runtime;
        extra["n_clusters"] = clustering.n_clusters();
        if (spec.method() == lxk::Method::Graph) {
            extra["gamma"] = result.gamma;
        }
        write_metadata(dir, config, extra);
        std::cout << spec.name() << ": " << clustering.n_clusters() << " clusters in " << runtime << " s\n";
    });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

void add_evaluate(CLI::App& root) {
    auto* sub = root.add_subcommand("evaluate", "Score a clustering against the manifest's labels and phones");
    auto clustering = std::make_shared<std::string>();
    auto manifest = std::make_shared<std::string>();
    auto runtime = std::make_shared<double>(0.0);
    auto ned_mode = std::make_shared<std::string>("cluster");
    auto out = std::make_shared<std::string>();
    auto name = std::make_shared<std::string>("clustering");
    sub->add_option("--clustering", *clustering, "Clustering TSV")->required()->check(CLI::ExistingFile);
    sub->add_option("--manifest", *manifest, "Segment manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--runtime", *runtime, "Runtime in seconds to show in the table")->check(CLI::NonNegativeNumber);
    sub->add_option("--ned-mode", *ned_mode, "NED averaging: per-cluster mean or over all pairs")
        ->check(CLI::IsMember({"cluster", "pairs"}));
    sub->add_option("--out", *out, "Also write the JSON report to this file");
    sub->add_option("--name", *name, "Row label in the table");
    sub->callback([=] {
        auto m = lxk::io::read_manifest(*manifest);
        auto c = lxk::io::read_clustering(*clustering, &m);
        auto mode = *ned_mode == "pairs" ? lxk::NedMode::PerPair : lxk::NedMode::PerCluster;
        auto report = lxk::evaluate_all(c, m, *runtime, mode);
        auto json = lxk::report_to_json(report);
        if (!out->empty()) {
            lxk::io::write_json(json, *out);
        }
        std::cout << json.dump(2) << "\n\n" << lxk::format_report_table({{*name, report}});
    });
}

// ---------------------------------------------------------------------------
// experiment
// ---------------------------------------------------------------------------

void add_experiment(CLI::App& root) {
    auto* experiment = root.add_subcommand("experiment", "Systems and controlled experiments")->require_subcommand(1);

    {
        auto* sub = experiment->add_subcommand("run", "Run one of the six systems end to end");
        auto system = std::make_shared<std::string>();
        auto corpus = std::make_shared<CorpusArgs>();
        auto hyper = std::make_shared<HyperArgs>();
        auto seed = std::make_shared<std::uint64_t>(0);
        auto out = std::make_shared<std::string>();
        sub->add_option("--system", *system, "avg-kmeans, avg-birch, avg-agglom, avg-graph, dtw-graph or edit-graph")
            ->required();
        corpus->add(sub);
        corpus->add_codebook(sub);
        hyper->add(sub);
        sub->add_option("--seed", *seed, "Top-level seed");
        sub->add_option("--out", *out, "Output directory")->required();
        sub->callback([=] {
            auto spec = lxk::SystemSpec::parse(*system, hyper->resolve());
            auto data = corpus->load();
            require_labels(data.manifest, spec.hyperparameters(), "experiment run");
            auto run = lxk::run_system(spec, data, {*seed, 0});
            warn_tuning(run);
            fs::path dir(*out);
            write_run(dir, run, data.manifest);
            write_metadata(dir,
                           {{"system", spec.name()},
                            {"inputs", corpus->to_json()},
                            {"seed", *seed},
                            {"hyperparameters", lxk::to_json(spec.hyperparameters())}},
                           {{"run", run_json(run)}});
            std::cout << lxk::format_comparison({run});
        });
    }

    {
        auto* sub = experiment->add_subcommand("perfect-init", "Start clustering from the true word-type partition");
        auto system = std::make_shared<std::string>("avg-kmeans");
        auto corpus = std::make_shared<CorpusArgs>();
        auto hyper = std::make_shared<HyperArgs>();
        auto seed = std::make_shared<std::uint64_t>(0);
        auto out = std::make_shared<std::string>();
        sub->add_option("--system", *system, "A k-means or graph system (default avg-kmeans)");
        corpus->add(sub);
        corpus->add_codebook(sub);
        hyper->add(sub);
        sub->add_option("--seed", *seed, "Top-level seed");
        sub->add_option("--out", *out, "Output directory")->required();
        sub->callback([=] {
            auto spec = lxk::SystemSpec::parse(*system, hyper->resolve());
            auto data = corpus->load();
            auto result = lxk::perfect_init(spec, data, {*seed, 0});
            fs::path dir(*out);
            fs::create_directories(dir / "initial");
            lxk::io::write_clustering(result.initial, dir / "initial" / "clustering.tsv", &data.manifest);
            lxk::io::write_json(lxk::report_to_json(result.initial_report), dir / "initial" / "report.json");
            write_run(dir / "final", result.final, data.manifest);
            write_run(dir / "baseline", result.baseline, data.manifest);
            write_metadata(dir,
                           {{"system", spec.name()},
                            {"inputs", corpus->to_json()},
                            {"seed", *seed},
                            {"hyperparameters", lxk::to_json(spec.hyperparameters())}},
                           {{"baseline", run_json(result.baseline)}, {"final", run_json(result.final)}});
            std::cout << lxk::format_report_table({{"initial", result.initial_report},
                                                   {"perfect-init", result.final.report},
                                                   {"baseline", result.baseline.report}});
        });
    }

    {
        auto* sub = experiment->add_subcommand("perfect-repr", "Replace representations by idealized per-type ones");
        auto mode = std::make_shared<std::string>("embedding");
        auto sigma = std::make_shared<double>(lxk::default_perfect_noise);
        auto methods = std::make_shared<std::vector<std::string>>();
        auto corpus = std::make_shared<CorpusArgs>();
        auto hyper = std::make_shared<HyperArgs>();
        auto seed = std::make_shared<std::uint64_t>(0);
        auto out = std::make_shared<std::string>();
        sub->add_option("--mode", *mode, "embedding or sequence")->check(CLI::IsMember({"embedding", "sequence"}));
        sub->add_option("--sigma", *sigma, "Noise standard deviation (embedding mode)")->check(CLI::NonNegativeNumber);
        sub->add_option("--method", *methods,
                        "Clustering methods to run afterwards (default: all four for embeddings, graph for sequences)")
            ->check(CLI::IsMember({"kmeans", "birch", "agglom", "graph"}));
        corpus->add(sub);
        corpus->add_codebook(sub);
        hyper->add(sub);
        sub->add_option("--seed", *seed, "Top-level seed");
        sub->add_option("--out", *out, "Output directory")->required();
        sub->callback([=] {
            auto hp = hyper->resolve();
            auto data = corpus->load();
            if (!fully_labelled(data.manifest)) {
                throw lxk::ArgumentError("perfect-repr needs word labels for every segment");
            }
            auto pm = *mode == "sequence" ? lxk::PerfectMode::Sequence : lxk::PerfectMode::Embedding;
            std::vector<std::string> names = *methods;
            if (names.empty()) {
                names = pm == lxk::PerfectMode::Embedding ? std::vector<std::string>{"kmeans", "agglom", "birch", "graph"}
                                                          : std::vector<std::string>{"graph"};
            }
            lxk::RunContext ctx{*seed, 0};
            auto repr = lxk::perfect_representations(data, pm, *sigma, hp, ctx);
            fs::path dir(*out);
            fs::create_directories(dir);
            if (pm == lxk::PerfectMode::Embedding) {
                lxk::io::write_embeddings(dir / "embeddings", repr.embeddings);
            } else {
                lxk::io::write_unit_sequences(dir / "units", repr.units);
            }
            std::vector<lxk::SystemRun> runs;
            ordered_json results = ordered_json::array();
            for (const auto& name : names) {
                auto run = lxk::cluster_perfect(repr, lxk::parse_method(name), data.manifest, hp, ctx);
                warn_tuning(run);
                write_run(dir / name, run, data.manifest);
                results.push_back(run_json(run));
                runs.push_back(std::move(run));
            }
            write_metadata(dir,
                           {{"mode", *mode},
                            {"sigma", *sigma},
                            {"methods", names},
                            {"inputs", corpus->to_json()},
                            {"seed", *seed},
                            {"hyperparameters", lxk::to_json(hp)}},
                           {{"runs", results}});
            std::cout << lxk::format_comparison(runs);
        });
    }

    {
        auto* sub = experiment->add_subcommand("compare", "Run a declarative list of systems on one corpus");
        auto config = std::make_shared<std::string>();
        auto corpus = std::make_shared<CorpusArgs>();
        auto seed = std::make_shared<std::optional<std::uint64_t>>();
        auto out = std::make_shared<std::string>();
        sub->add_option("--config", *config, "JSON: {\"systems\": [...], \"hyperparameters\": {...}, \"seed\": n}")
            ->required()
            ->check(CLI::ExistingFile);
        corpus->add(sub);
        corpus->add_codebook(sub);
        sub->add_option("--seed", *seed, "Override the config's seed");
        sub->add_option("--out", *out, "Output directory")->required();
        sub->callback([=] {
            auto cfg = lxk::io::read_json(*config);
            auto parsed = lxk::parse_compare_config(cfg);
            if (*seed) {
                parsed.seed = **seed;
            }
            auto data = corpus->load();
            for (const auto& spec : parsed.systems) {
                require_labels(data.manifest, spec.hyperparameters(), "experiment compare");
            }
            auto rows = lxk::compare_systems(parsed.systems, data, {parsed.seed, 0});
            fs::path dir(*out);
            fs::create_directories(dir);
            ordered_json table = ordered_json::array();
            for (std::size_t i = 0; i < rows.size(); ++i) {
                warn_tuning(rows[i]);
                auto sub_dir = dir / (lxk::detail::zero_pad(i + 1, 2) + "_" + rows[i].system);
                write_run(sub_dir, rows[i], data.manifest);
                ordered_json row;
                row["system"] = rows[i].system;
                row["report"] = lxk::report_to_json(rows[i].report);
                table.push_back(row);
            }
            lxk::io::write_json(table, dir / "comparison.json");
            ordered_json runs = ordered_json::array();
            for (const auto& r : rows) {
                runs.push_back(run_json(r));
            }
            write_metadata(dir, {{"compare", lxk::to_json(parsed)}, {"inputs", corpus->to_json()}}, {{"runs", runs}});
            std::cout << lxk::format_comparison(rows);
        });
    }
}

CLI::App* deepest_parsed(CLI::App* app) {
    auto parsed = app->get_subcommands();
    return parsed.empty() ? app : deepest_parsed(parsed.front());
}

int structured_error(const char* kind, const std::string& message) {
    ordered_json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << '\n';
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lxk: zero-resource lexicon learning from word segments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", version_string());
    app.add_option_function<int>(
           "--workers", [](int workers) { lxk::set_default_workers(workers); },
           "Worker threads (default: LXK_WORKERS or 1)")
        ->check(CLI::PositiveNumber);

    add_synth(app);
    add_transform(app);
    add_distance(app);
    add_cluster(app);
    add_evaluate(app);
    add_experiment(app);

    g_invocation.argv.assign(argv, argv + argc);
    for (int i = 1; i < argc; ++i) {
        if (!g_invocation.command.empty()) {
            g_invocation.command += ' ';
        }
        g_invocation.command += argv[i];
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const lxk::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << deepest_parsed(&app)->help() << '\n';
        return 2;
    } catch (const lxk::Error& e) {
        return structured_error(e.kind(), e.what());
    } catch (const std::exception& e) {
        return structured_error("internal", e.what());
    }
    return 0;
}
