#include <algorithm>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include <lxk/experiment.hpp>

using namespace lxk;

namespace {

Corpus synth_corpus(double sigma, std::uint64_t seed = 1, std::size_t n_types = 10, std::size_t variants = 1) {
    SynthConfig c;
    c.n_types = n_types;
    c.min_instances = 4;
    c.max_instances = 8;
    c.dim = 16;
    c.mean_len = 12;
    c.within_type_noise = sigma;
    c.variants_per_type = variants;
    c.variant_divergence = variants > 1 ? 0.05 : 0.0;
    c.seed = seed;
    auto s = generate(c);
    return {std::move(s.manifest), std::move(s.features), std::nullopt};
}

Hyperparameters small_hp() {
    Hyperparameters hp;
    hp.pca_dims = 16;
    hp.codebook_size = 32;
    return hp;
}

}  // namespace

TEST(SystemSpec, ExactlySixValidCombinations) {
    std::set<std::string> valid;
    for (auto r : {Representation::ContinuousAvg, Representation::ContinuousSeq, Representation::DiscreteSeq}) {
        for (auto m : {Method::KMeans, Method::Birch, Method::Agglomerative, Method::Graph}) {
            try {
                valid.insert(SystemSpec::make(r, m).name());
            } catch (const ArgumentError&) {
            }
        }
    }
    EXPECT_EQ(valid, (std::set<std::string>{"avg-kmeans", "avg-birch", "avg-agglom", "avg-graph", "dtw-graph", "edit-graph"}));
    std::vector<std::string> names;
    for (const auto& s : SystemSpec::all_six()) {
        names.push_back(s.name());
    }
    EXPECT_EQ(names, (std::vector<std::string>{"avg-kmeans", "avg-birch", "avg-agglom", "avg-graph", "dtw-graph", "edit-graph"}));
}

TEST(SystemSpec, ParsingAndDistances) {
    EXPECT_EQ(SystemSpec::parse("dtw-graph").distance(), DistanceKind::Dtw);
    EXPECT_EQ(SystemSpec::parse("edit-graph").distance(), DistanceKind::Edit);
    EXPECT_EQ(SystemSpec::parse("avg-birch").distance(), DistanceKind::Cosine);
    EXPECT_EQ(SystemSpec::parse("avg-agglom").method(), Method::Agglomerative);
    EXPECT_THROW(SystemSpec::parse("edit-kmeans"), ArgumentError);
    EXPECT_THROW(SystemSpec::parse("dtw-agglom"), ArgumentError);
    EXPECT_THROW(SystemSpec::parse("avg-spectral"), ArgumentError);
    EXPECT_THROW(SystemSpec::parse("kmeans"), ArgumentError);
}

TEST(Hyperparameters, JsonRoundTripAndUnknownKeys) {
    Hyperparameters hp;
    hp.k = 12;
    hp.threshold = 0.3;
    hp.pca_dims = 20;
    hp.dpdp_lambda = 0.5;
    auto back = hyperparameters_from_json(to_json(hp));
    EXPECT_EQ(to_json(back), to_json(hp));
    EXPECT_EQ(back.k, std::optional<std::size_t>(12));
    EXPECT_FALSE(back.gamma.has_value());
    EXPECT_THROW(hyperparameters_from_json(nlohmann::json{{"pca_dim", 3}}), ParseError);
    EXPECT_THROW(hyperparameters_from_json(nlohmann::json{{"pca_dims", "x"}}), ParseError);
    auto overridden = hyperparameters_from_json(nlohmann::json{{"k", nullptr}}, hp);
    EXPECT_FALSE(overridden.k.has_value());
    EXPECT_EQ(overridden.pca_dims, 20u);
}

TEST(CompareConfig, NamesAndOverrides) {
    auto j = nlohmann::json::parse(R"({
        "systems": ["avg-kmeans", {"system": "edit-graph", "codebook_size": 64}],
        "hyperparameters": {"pca_dims": 30},
        "seed": 4
    })");
    auto config = parse_compare_config(j);
    ASSERT_EQ(config.systems.size(), 2u);
    EXPECT_EQ(config.seed, 4u);
    EXPECT_EQ(config.systems[0].hyperparameters().pca_dims, 30u);
    EXPECT_EQ(config.systems[1].hyperparameters().pca_dims, 30u);
    EXPECT_EQ(config.systems[1].hyperparameters().codebook_size, 64u);
    EXPECT_EQ(config.systems[0].hyperparameters().codebook_size, 500u);

    auto again = parse_compare_config(to_json(config));
    EXPECT_EQ(to_json(again), to_json(config));
}

TEST(CompareConfig, Errors) {
    EXPECT_THROW(parse_compare_config(nlohmann::json::array()), ParseError);
    EXPECT_THROW(parse_compare_config(nlohmann::json{{"systems", nlohmann::json::array()}}), ParseError);
    EXPECT_THROW(parse_compare_config(nlohmann::json{{"systems", {"avg-kmeans"}}, {"sede", 1}}), ParseError);
    EXPECT_THROW(parse_compare_config(nlohmann::json{{"systems", {"avg-kmeans"}}, {"seed", -1}}), ParseError);
    EXPECT_THROW(parse_compare_config(nlohmann::json{{"systems", {3}}}), ParseError);
    EXPECT_THROW(parse_compare_config(nlohmann::json{{"systems", {"dtw-kmeans"}}}), ArgumentError);
}

TEST(RunSystem, EverySystemIsPerfectOnNoiselessData) {
    auto corpus = synth_corpus(0.0);
    for (const auto& spec : SystemSpec::all_six(small_hp())) {
        auto run = run_system(spec, corpus);
        EXPECT_EQ(run.report.purity, 100.0) << spec.name();
        EXPECT_EQ(run.report.v_measure, 100.0) << spec.name();
        EXPECT_EQ(*run.report.ned, 0.0) << spec.name();
        EXPECT_EQ(run.k, 10u);
        EXPECT_GE(run.report.runtime_s, 0.0);
        EXPECT_EQ(run.gamma.has_value(), spec.method() == Method::Graph) << spec.name();
    }
}

TEST(RunSystem, ExplicitKOverridesTypeCount) {
    auto corpus = synth_corpus(0.0);
    auto hp = small_hp();
    hp.k = 3;
    auto run = run_system(SystemSpec::parse("avg-kmeans", hp), corpus);
    EXPECT_EQ(run.k, 3u);
    EXPECT_EQ(run.report.n_clusters, 3u);
}

TEST(RunSystem, WorkerCountDoesNotChangeResults) {
    auto corpus = synth_corpus(0.3);
    for (const auto& spec : SystemSpec::all_six(small_hp())) {
        auto a = run_system(spec, corpus, {7, 1});
        auto b = run_system(spec, corpus, {7, 8});
        EXPECT_EQ(a.clustering, b.clustering) << spec.name();
        EXPECT_EQ(report_to_json(a.report), report_to_json(b.report)) << spec.name();
    }
}

TEST(CompareSystems, RowsFollowSpecOrderAndRepeat) {
    auto corpus = synth_corpus(0.2);
    auto specs = SystemSpec::all_six(small_hp());
    std::reverse(specs.begin(), specs.end());
    auto first = compare_systems(specs, corpus, {3, 0});
    auto second = compare_systems(specs, corpus, {3, 0});
    ASSERT_EQ(first.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(first[i].system, specs[i].name());
        EXPECT_EQ(first[i].clustering, second[i].clustering);
        EXPECT_EQ(report_to_json(first[i].report), report_to_json(second[i].report));
    }
    auto table = format_comparison(first);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 7);
}

TEST(PerfectInit, LabelMeans) {
    MatrixD points(4, 2);
    points << 0, 0, 2, 2, 10, 0, 0, 10;
    MatrixD means = label_means(points, {0, 0, 1, 1});
    EXPECT_EQ(means(0, 0), 1.0);
    EXPECT_EQ(means(0, 1), 1.0);
    EXPECT_EQ(means(1, 0), 5.0);
    EXPECT_EQ(means(1, 1), 5.0);
}

TEST(PerfectInit, NoiselessDataIsAFixedPoint) {
    auto corpus = synth_corpus(0.0);
    for (const char* name : {"avg-kmeans", "avg-graph"}) {
        auto run = perfect_init(SystemSpec::parse(name, small_hp()), corpus);
        EXPECT_EQ(run.initial_report.purity, 100.0) << name;
        EXPECT_EQ(run.initial_report.v_measure, 100.0) << name;
        EXPECT_EQ(run.final.report.purity, 100.0) << name;
        EXPECT_EQ(run.final.clustering, run.initial) << name;
    }
}

TEST(PerfectInit, OverlappingTypesDriftAway) {
    auto corpus = synth_corpus(1.0, 2, 20);
    for (const char* name : {"avg-kmeans", "avg-graph"}) {
        auto run = perfect_init(SystemSpec::parse(name, small_hp()), corpus);
        EXPECT_EQ(run.initial_report.purity, 100.0) << name;
        EXPECT_LT(run.final.report.purity, 100.0) << name;
    }
}

TEST(PerfectInit, GraphReusesBaselineGamma) {
    auto corpus = synth_corpus(0.5);
    auto run = perfect_init(SystemSpec::parse("avg-graph", small_hp()), corpus);
    ASSERT_TRUE(run.baseline.gamma && run.final.gamma);
    EXPECT_EQ(*run.final.gamma, *run.baseline.gamma);
}

TEST(PerfectInit, OtherMethodsAreRejected) {
    auto corpus = synth_corpus(0.0);
    EXPECT_THROW(perfect_init(SystemSpec::parse("avg-agglom"), corpus), ArgumentError);
    EXPECT_THROW(perfect_init(SystemSpec::parse("avg-birch"), corpus), ArgumentError);
}

TEST(PerfectRepresentations, NoiselessEmbeddingsCollapseToTypeMeans) {
    std::vector<WordEmbedding> emb{{"a", VectorF::Unit(3, 0)}, {"b", VectorF::Unit(3, 1)}, {"c", VectorF::Unit(3, 2)},
                                   {"d", VectorF::Unit(3, 2)}};
    auto out = perfect_embeddings(emb, {0, 0, 1, 1}, 0.0, 0);
    std::set<std::vector<float>> distinct;
    for (const auto& e : out) {
        distinct.insert(std::vector<float>(e.vector.data(), e.vector.data() + e.vector.size()));
        EXPECT_NEAR(e.vector.norm(), 1.0f, 1e-6f);
    }
    EXPECT_EQ(distinct.size(), 2u);
    EXPECT_NEAR(out[0].vector(0), 1.0f / std::sqrt(2.0f), 1e-6f);
    EXPECT_EQ(out[2].vector, VectorF::Unit(3, 2));
    EXPECT_EQ(out[1].segment_id, "b");
}

TEST(PerfectRepresentations, ZeroMeanTypeIsDegenerate) {
    std::vector<WordEmbedding> emb{{"a", VectorF::Unit(2, 0)}, {"b", -VectorF::Unit(2, 0)}};
    EXPECT_THROW(perfect_embeddings(emb, {0, 0}, 0.0, 0), DegenerateError);
    EXPECT_THROW(perfect_embeddings(emb, {0, 1}, -1.0, 0), ArgumentError);
}

TEST(PerfectRepresentations, SequencesShareOneRepresentativePerType) {
    std::vector<UnitSequence> units{{"a", {1}}, {"b", {2}}, {"c", {3}}, {"d", {4, 4}}, {"e", {5}}};
    std::vector<std::int32_t> labels{0, 0, 0, 1, 1};
    std::map<std::int32_t, std::set<std::vector<std::int32_t>>> picks;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        auto out = perfect_sequences(units, labels, seed);
        EXPECT_EQ(out[0].units, out[1].units);
        EXPECT_EQ(out[1].units, out[2].units);
        EXPECT_EQ(out[3].units, out[4].units);
        EXPECT_EQ(out[4].segment_id, "e");
        picks[0].insert(out[0].units);
        picks[1].insert(out[3].units);
        EXPECT_EQ(out, perfect_sequences(units, labels, seed));
    }
    EXPECT_EQ(picks[0].size(), 3u);
    EXPECT_EQ(picks[1].size(), 2u);
}

TEST(PerfectRepresentations, EveryMethodRecoversTheLexicon) {
    auto corpus = synth_corpus(0.8, 5, 25, 3);
    auto hp = small_hp();
    auto perfect = perfect_representations(corpus, PerfectMode::Embedding, default_perfect_noise, hp);
    for (auto m : {Method::KMeans, Method::Agglomerative, Method::Birch, Method::Graph}) {
        auto run = cluster_perfect(perfect, m, corpus.manifest, hp);
        EXPECT_EQ(run.report.purity, 100.0) << to_string(m);
        EXPECT_EQ(run.report.v_measure, 100.0) << to_string(m);
        EXPECT_GT(*run.report.ned, 0.0) << to_string(m);
    }
    auto baseline = run_system(SystemSpec::parse("avg-kmeans", hp), corpus);
    EXPECT_LT(baseline.report.purity, 100.0);
}

TEST(PerfectRepresentations, SequenceModeOnlyAllowsGraph) {
    auto corpus = synth_corpus(0.1);
    auto hp = small_hp();
    auto perfect = perfect_representations(corpus, PerfectMode::Sequence, 0.0, hp);
    ASSERT_EQ(perfect.units.size(), corpus.manifest.size());
    auto labels = label_ids(corpus.manifest);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = i + 1; j < labels.size(); ++j) {
            if (labels[i] == labels[j]) {
                EXPECT_EQ(perfect.units[i].units, perfect.units[j].units);
            }
        }
    }
    EXPECT_THROW(cluster_perfect(perfect, Method::KMeans, corpus.manifest, hp), ArgumentError);
    auto run = cluster_perfect(perfect, Method::Graph, corpus.manifest, hp);
    EXPECT_EQ(run.clustering.size(), corpus.manifest.size());
    EXPECT_EQ(run.system, "perfect-edit-graph");
    EXPECT_TRUE(run.gamma.has_value());
}
