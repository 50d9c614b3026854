#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <lxk/distance.hpp>
#include <lxk/evaluate.hpp>
#include <lxk/io.hpp>
#include <lxk/transform.hpp>

#include "support.hpp"

using lxk_test::TempDir;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) {
        if (c == '\'') {
            q += "'\\''";
        } else {
            q += c;
        }
    }
    return q + "'";
}

/// Run the CLI with `args`, capturing stdout, stderr and the exit code.
Result run_cli(const std::vector<std::string>& args, const std::string& env = "") {
    static int counter = 0;
    fs::path err_file = fs::temp_directory_path() / ("lxk-cli-stderr-" + std::to_string(::getpid()) + "-" +
                                                     std::to_string(counter++));
    std::string cmd = env + (env.empty() ? "" : " ") + quote(LXK_CLI_PATH);
    for (const auto& a : args) {
        cmd += " " + quote(a);
    }
    cmd += " 2>" + quote(err_file.string());
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) {
        return r;
    }
    char buffer[4096];
    std::size_t n;
    while ((n = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) {
        r.out.append(buffer, n);
    }
    int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_file);
    fs::remove(err_file);
    return r;
}

std::string samples(const std::string& name) { return std::string(LXK_SAMPLES_DIR) + "/" + name; }

/// A generated sample corpus shared by the tests in this file.
class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new TempDir();
        auto r = run_cli({"synth", "generate", "--config", samples("synth_small.json"), "--out", corpus().string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static fs::path corpus() { return dir_->path() / "corpus"; }
    static std::string manifest() { return (corpus() / "manifest.jsonl").string(); }
    static std::string features() { return (corpus() / "features").string(); }

    TempDir scratch_;

private:
    static TempDir* dir_;
};

TempDir* Cli::dir_ = nullptr;

}  // namespace

TEST_F(Cli, VersionAndUsage) {
    auto v = run_cli({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_EQ(v.out.rfind("lxk 0.1.0", 0), 0u) << v.out;
    EXPECT_NE(v.out.find("Eigen"), std::string::npos);

    auto none = run_cli({});
    EXPECT_EQ(none.code, 2);
    auto unknown = run_cli({"--bogus"});
    EXPECT_EQ(unknown.code, 2);
    auto unknown_sub = run_cli({"synth", "generate", "--config", samples("synth_small.json"), "--out", "x", "--frobnicate"});
    EXPECT_EQ(unknown_sub.code, 2);
}

TEST_F(Cli, SynthWritesReadableCorpus) {
    auto m = lxk::io::read_manifest(manifest());
    EXPECT_GE(m.size(), 100u);
    auto f = lxk::io::read_features(features(), m);
    EXPECT_EQ(f.front().dim(), 32u);
    auto meta = nlohmann::json::parse(slurp(corpus() / "metadata.json"));
    EXPECT_EQ(meta["config"]["synth"]["seed"], 7);
    EXPECT_TRUE(meta.contains("wall_clock_s"));
    EXPECT_TRUE(meta.contains("versions"));
}

TEST_F(Cli, CompareProducesSixRows) {
    auto out = scratch_ / "compare";
    auto r = run_cli({"experiment", "compare", "--config", samples("compare_six.json"), "--manifest", manifest(), "--features",
                  features(), "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream table(r.out);
    std::string line;
    int rows = 0;
    while (std::getline(table, line)) {
        rows += line.find("-") != std::string::npos && line.rfind("System", 0) != 0;
    }
    EXPECT_EQ(rows, 6);
    auto comparison = nlohmann::json::parse(slurp(out / "comparison.json"));
    ASSERT_EQ(comparison.size(), 6u);
    EXPECT_EQ(comparison[0]["system"], "avg-kmeans");
    EXPECT_EQ(comparison[5]["system"], "edit-graph");
    EXPECT_TRUE(fs::exists(out / "06_edit-graph" / "clustering.tsv"));
    EXPECT_TRUE(fs::exists(out / "metadata.json"));
}

TEST_F(Cli, InvalidSystemIsUsageError) {
    auto r = run_cli({"experiment", "run", "--system", "dtw-kmeans", "--manifest", manifest(), "--features", features(),
                  "--out", (scratch_ / "bad").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("invalid system"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("--system"), std::string::npos);
}

TEST_F(Cli, MissingFeatureFileNamesTheSegment) {
    auto broken = scratch_ / "features";
    fs::copy(features(), broken);
    auto m = lxk::io::read_manifest(manifest());
    const std::string victim = m[3].segment_id;
    fs::remove(lxk::io::segment_path(broken, victim));
    auto r = run_cli({"experiment", "run", "--system", "avg-kmeans", "--manifest", manifest(), "--features", broken.string(),
                  "--out", (scratch_ / "run").string()});
    EXPECT_EQ(r.code, 1);
    auto err = nlohmann::json::parse(r.err.substr(0, r.err.find('\n')));
    EXPECT_EQ(err["error"], "io");
    EXPECT_NE(err["message"].get<std::string>().find(victim), std::string::npos);
}

TEST_F(Cli, ExperimentRunIsByteIdenticalAcrossRunsAndWorkers) {
    for (const char* system : {"avg-agglom", "dtw-graph"}) {
        std::vector<fs::path> dirs;
        for (const char* workers : {"1", "8", "8"}) {
            auto dir = scratch_ / (std::string(system) + "-" + workers + "-" + std::to_string(dirs.size()));
            auto r = run_cli({"--workers", workers, "experiment", "run", "--system", system, "--manifest", manifest(),
                          "--features", features(), "--pca-dims", "16", "--seed", "5", "--out", dir.string()});
            ASSERT_EQ(r.code, 0) << r.err;
            dirs.push_back(dir);
        }
        for (const char* file : {"clustering.tsv", "report.json"}) {
            EXPECT_EQ(slurp(dirs[0] / file), slurp(dirs[1] / file)) << system << " " << file;
            EXPECT_EQ(slurp(dirs[1] / file), slurp(dirs[2] / file)) << system << " " << file;
        }
        auto meta = nlohmann::json::parse(slurp(dirs[1] / "metadata.json"));
        EXPECT_EQ(meta["workers"], 8);
    }
}

TEST_F(Cli, WorkersFromEnvironment) {
    auto dir = scratch_ / "env";
    auto r = run_cli({"transform", "embed", "--manifest", manifest(), "--features", features(), "--out", dir.string()},
                 "LXK_WORKERS=3");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "metadata.json"))["workers"], 3);
}

TEST_F(Cli, TransformClusterEvaluatePipeline) {
    auto norm = scratch_ / "norm", pca = scratch_ / "pca", emb = scratch_ / "emb", clus = scratch_ / "clus";
    ASSERT_EQ(run_cli({"transform", "normalize", "--manifest", manifest(), "--features", features(), "--out", norm.string()}).code, 0);
    ASSERT_EQ(run_cli({"transform", "pca", "--manifest", manifest(), "--features", (norm / "features").string(), "--dims", "8",
                   "--out", pca.string()})
                  .code,
              0);
    auto m = lxk::io::read_manifest(manifest());
    EXPECT_EQ(lxk::io::read_features(pca / "features", m).front().dim(), 8u);
    ASSERT_EQ(run_cli({"transform", "embed", "--manifest", manifest(), "--features", (pca / "features").string(), "--out",
                   emb.string()})
                  .code,
              0);
    auto r = run_cli({"cluster", "run", "--method", "kmeans", "--repr", "avg", "--manifest", manifest(), "--embeddings",
                  (emb / "embeddings").string(), "--out", clus.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto meta = nlohmann::json::parse(slurp(clus / "metadata.json"));
    EXPECT_TRUE(meta.contains("runtime_s"));

    auto report_file = scratch_ / "report.json";
    auto e = run_cli({"evaluate", "--clustering", (clus / "clustering.tsv").string(), "--manifest", manifest(), "--out",
                  report_file.string()});
    ASSERT_EQ(e.code, 0) << e.err;
    auto report = lxk::report_from_json(lxk::io::read_json(report_file));
    auto expected = lxk::evaluate_all(lxk::io::read_clustering(clus / "clustering.tsv", &m), m);
    EXPECT_EQ(lxk::report_to_json(report), lxk::report_to_json(expected));
    EXPECT_EQ(report.n_clusters, 20u);
}

TEST_F(Cli, QuantizeThenEditGraph) {
    auto q = scratch_ / "q", clus = scratch_ / "edit";
    auto r = run_cli({"transform", "quantize", "--manifest", manifest(), "--features", features(), "--codebook-size", "40",
                  "--lambda", "0.1", "--out", q.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto m = lxk::io::read_manifest(manifest());
    auto units = lxk::io::read_unit_sequences(q / "units", m);
    ASSERT_EQ(units.size(), m.size());
    for (const auto& u : units) {
        for (auto x : u.units) {
            EXPECT_LT(x, 40);
        }
    }
    auto c = run_cli({"cluster", "run", "--method", "graph", "--repr", "edit", "--manifest", manifest(), "--units",
                  (q / "units").string(), "--out", clus.string()});
    ASSERT_EQ(c.code, 0) << c.err;
    EXPECT_TRUE(fs::exists(clus / "clustering.tsv"));
    auto bad = run_cli({"cluster", "run", "--method", "kmeans", "--repr", "edit", "--manifest", manifest(), "--units",
                    (q / "units").string(), "--out", clus.string()});
    EXPECT_EQ(bad.code, 2);
}

TEST_F(Cli, PairwiseDistanceTableMatchesLibrary) {
    auto out = scratch_ / "dist";
    auto r = run_cli({"distance", "pairwise", "--kind", "cosine", "--manifest", manifest(), "--input", features(), "--out",
                  out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto m = lxk::io::read_manifest(manifest());
    auto table = lxk::read_distance_table(out / "distances.lxkd");
    auto expected = lxk::pairwise_distances(lxk::average_embed(lxk::io::read_features(features(), m)), lxk::DistanceKind::Cosine);
    EXPECT_EQ(table, expected);
    auto over = run_cli({"distance", "pairwise", "--kind", "dtw", "--manifest", manifest(), "--input", features(), "--out",
                     out.string(), "--budget-gb", "0.0000001"});
    EXPECT_EQ(over.code, 1);
    EXPECT_NE(over.err.find("budget"), std::string::npos) << over.err;
}

TEST_F(Cli, PerfectReprAndPerfectInitLayouts) {
    auto pr = scratch_ / "pr";
    auto r = run_cli({"experiment", "perfect-repr", "--manifest", manifest(), "--features", features(), "--pca-dims", "16",
                  "--out", pr.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* method : {"kmeans", "agglom", "birch", "graph"}) {
        auto report = lxk::report_from_json(lxk::io::read_json(pr / method / "report.json"));
        EXPECT_EQ(report.purity, 100.0) << method;
    }
    EXPECT_TRUE(fs::exists(pr / "embeddings"));

    auto pi = scratch_ / "pi";
    auto i = run_cli({"experiment", "perfect-init", "--system", "avg-graph", "--manifest", manifest(), "--features", features(),
                  "--out", pi.string()});
    ASSERT_EQ(i.code, 0) << i.err;
    for (const char* sub : {"initial", "final", "baseline"}) {
        EXPECT_TRUE(fs::exists(pi / sub / "clustering.tsv")) << sub;
    }
    EXPECT_EQ(lxk::report_from_json(lxk::io::read_json(pi / "initial" / "report.json")).purity, 100.0);

    auto bad = run_cli({"experiment", "perfect-init", "--system", "avg-birch", "--manifest", manifest(), "--features",
                    features(), "--out", pi.string()});
    EXPECT_EQ(bad.code, 2);
}
