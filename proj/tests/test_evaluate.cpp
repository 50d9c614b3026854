#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include <lxk/evaluate.hpp>
#include <lxk/io.hpp>

#include "oracles.hpp"
#include "support.hpp"

using namespace lxk;
using lxk_oracle::entropy_bits;

namespace {

std::vector<std::string> chars(const std::string& s) {
    std::vector<std::string> out;
    for (char c : s) {
        out.emplace_back(1, c);
    }
    return out;
}

/// H(A | B) in bits.
double conditional_entropy(const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b) {
    std::map<std::int32_t, double> b_counts;
    std::map<std::pair<std::int32_t, std::int32_t>, double> joint;
    for (std::size_t i = 0; i < a.size(); ++i) {
        b_counts[b[i]] += 1;
        joint[{a[i], b[i]}] += 1;
    }
    std::vector<double> bv, jv;
    for (const auto& [_, c] : b_counts) {
        bv.push_back(c);
    }
    for (const auto& [_, c] : joint) {
        jv.push_back(c);
    }
    return entropy_bits(jv) - entropy_bits(bv);
}

std::vector<std::int32_t> random_labels(std::size_t n, int k, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> d(0, k - 1);
    std::vector<std::int32_t> out(n);
    for (auto& x : out) {
        x = d(rng);
    }
    return out;
}

}  // namespace

TEST(Ned, KittenSittingCluster) {
    auto value = ned(std::vector<std::int32_t>{0, 0}, {chars("kitten"), chars("sitting")});
    ASSERT_TRUE(value.has_value());
    EXPECT_NEAR(*value, 100.0 * 3.0 / 7.0, 1e-6);
}

TEST(Ned, UniformClustersScoreZero) {
    auto value = ned(std::vector<std::int32_t>{0, 1, 0, 1}, {chars("ab"), chars("cd"), chars("ab"), chars("cd")});
    EXPECT_EQ(*value, 0.0);
}

TEST(Ned, SingletonsAreUndefined) {
    EXPECT_FALSE(ned(std::vector<std::int32_t>{0, 1, 2}, {chars("a"), chars("b"), chars("c")}).has_value());
}

TEST(Ned, PerClusterAndPerPairAveraging) {
    // Cluster 0: {ab, ab, ab} -> 3 pairs at 0. Cluster 1: {ab, cd} -> 1 pair at 1.
    std::vector<std::int32_t> clusters{0, 0, 0, 1, 1};
    std::vector<std::vector<std::string>> phones{chars("ab"), chars("ab"), chars("ab"), chars("ab"), chars("cd")};
    EXPECT_NEAR(*ned(clusters, phones, NedMode::PerCluster), 50.0, 1e-9);
    EXPECT_NEAR(*ned(clusters, phones, NedMode::PerPair), 25.0, 1e-9);
}

TEST(Ned, InvariantToRelabelingAndOrder) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> sym(0, 3), len(1, 5);
    std::vector<std::vector<std::string>> phones(40);
    for (auto& p : phones) {
        for (int i = len(rng); i > 0; --i) {
            p.push_back(std::to_string(sym(rng)));
        }
    }
    auto clusters = random_labels(40, 6, rng);
    auto base = *ned(clusters, phones);

    auto relabeled = clusters;
    for (auto& c : relabeled) {
        c = 100 - c;
    }
    EXPECT_NEAR(*ned(relabeled, phones), base, 1e-12);

    std::vector<std::size_t> perm(40);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::int32_t> pc;
    std::vector<std::vector<std::string>> pp;
    for (auto i : perm) {
        pc.push_back(clusters[i]);
        pp.push_back(phones[i]);
    }
    EXPECT_NEAR(*ned(pc, pp), base, 1e-9);
    EXPECT_EQ(*ned(clusters, phones, NedMode::PerCluster, 1), *ned(clusters, phones, NedMode::PerCluster, 8));
}

TEST(Ned, MissingPhonesNameTheSegment) {
    auto manifest = lxk_test::labelled_manifest({"a", "a"});
    std::vector<SegmentMetadata> segs(manifest.begin(), manifest.end());
    segs[1].phones.reset();
    Manifest broken(std::move(segs));
    auto clustering = Clustering::from_labels(broken, std::vector<std::int32_t>{0, 0});
    try {
        ned(clustering, broken);
        FAIL() << "expected an error";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("s1"), std::string::npos);
    }
}

TEST(Purity, HandCounts) {
    EXPECT_NEAR(purity(std::vector<std::int32_t>{0, 0, 0}, {0, 0, 1}), 100.0 * 2.0 / 3.0, 1e-6);
    EXPECT_EQ(purity(std::vector<std::int32_t>{0, 1, 2}, {0, 0, 1}), 100.0);
    EXPECT_EQ(purity(std::vector<std::int32_t>{4, 4, 9}, {0, 0, 1}), 100.0);
}

TEST(Purity, HundredIffClustersAreLabelUniform) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 300; ++trial) {
        auto clusters = random_labels(12, 4, rng);
        auto labels = random_labels(12, 3, rng);
        std::map<std::int32_t, std::set<std::int32_t>> seen;
        for (std::size_t i = 0; i < 12; ++i) {
            seen[clusters[i]].insert(labels[i]);
        }
        bool uniform = std::all_of(seen.begin(), seen.end(), [](const auto& kv) { return kv.second.size() == 1; });
        EXPECT_EQ(purity(clusters, labels) == 100.0, uniform);
        EXPECT_EQ(std::abs(v_measure(clusters, labels).homogeneity - 100.0) < 1e-9, uniform);
    }
}

TEST(VMeasure, WorkedExample) {
    auto v = v_measure(std::vector<std::int32_t>{0, 0, 1, 2}, {0, 0, 1, 1});
    EXPECT_NEAR(v.homogeneity, 100.0, 1e-6);
    EXPECT_NEAR(v.completeness, 100.0 * (1.0 - 0.5 / 1.5), 1e-6);
    EXPECT_NEAR(v.v_measure, 80.0, 1e-6);
}

TEST(VMeasure, DegenerateConventions) {
    auto one_cluster = v_measure(std::vector<std::int32_t>{0, 0}, {0, 1});
    EXPECT_EQ(one_cluster.homogeneity, 0.0);
    EXPECT_EQ(one_cluster.completeness, 100.0);
    EXPECT_EQ(one_cluster.v_measure, 0.0);
    auto perfect = v_measure(std::vector<std::int32_t>{0, 1, 1}, {5, 3, 3});
    EXPECT_EQ(perfect.homogeneity, 100.0);
    EXPECT_EQ(perfect.completeness, 100.0);
    EXPECT_EQ(perfect.v_measure, 100.0);
}

TEST(VMeasure, MatchesJointEntropyReference) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        auto clusters = random_labels(30, 1 + trial % 7, rng);
        auto labels = random_labels(30, 1 + trial % 5, rng);
        auto got = v_measure(clusters, labels);
        auto want = lxk_oracle::v_measure(clusters, labels);
        EXPECT_NEAR(got.homogeneity, want[0], 1e-9);
        EXPECT_NEAR(got.completeness, want[1], 1e-9);
        EXPECT_NEAR(got.v_measure, want[2], 1e-9);
    }
}

TEST(VMeasure, SwappingRolesExchangesHomogeneityAndCompleteness) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        auto a = random_labels(25, 5, rng);
        auto b = random_labels(25, 3, rng);
        auto ab = v_measure(a, b);
        auto ba = v_measure(b, a);
        EXPECT_NEAR(ab.homogeneity, ba.completeness, 1e-9);
        EXPECT_NEAR(ab.completeness, ba.homogeneity, 1e-9);
        EXPECT_NEAR(ab.v_measure, ba.v_measure, 1e-9);
    }
}

TEST(VMeasure, MergingLowersHomogeneitySplittingRaisesConditionalEntropy) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        auto clusters = random_labels(20, 5, rng);
        auto labels = random_labels(20, 3, rng);
        auto base = v_measure(clusters, labels);

        auto merged = clusters;
        for (auto& c : merged) {
            c = c == 1 ? 0 : c;
        }
        EXPECT_LE(v_measure(merged, labels).homogeneity, base.homogeneity + 1e-9);

        auto split = clusters;
        for (std::size_t i = 0; i < split.size(); i += 2) {
            split[i] = split[i] == 0 ? 99 : split[i];
        }
        EXPECT_GE(conditional_entropy(split, labels), conditional_entropy(clusters, labels) - 1e-12);
        EXPECT_GE(v_measure(split, labels).homogeneity, base.homogeneity - 1e-9);
    }
}

TEST(Bitrate, HandValues) {
    std::vector<std::int32_t> two{0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    EXPECT_NEAR(bitrate(two, 10.0), 1.0, 1e-6);
    EXPECT_EQ(bitrate(std::vector<std::int32_t>(10, 3), 10.0), 0.0);
    std::vector<std::int32_t> four{0, 1, 2, 3, 0, 1, 2, 3};
    EXPECT_NEAR(bitrate(four, 4.0), 2.0 * 2.0, 1e-12);
    EXPECT_GT(bitrate(four, 10.0), bitrate(std::vector<std::int32_t>{0, 1, 0, 1, 0, 1, 0, 1}, 10.0));
    EXPECT_THROW(bitrate(two, 0.0), ArgumentError);
}

TEST(Report, PerfectClusteringOfALabelledManifest) {
    auto manifest = lxk_test::labelled_manifest({"a", "b", "a", "c", "b", "a"});
    auto clustering = Clustering::from_labels(manifest, std::vector<std::int32_t>{0, 1, 0, 2, 1, 0});
    auto report = evaluate_all(clustering, manifest, 1.5);
    EXPECT_EQ(*report.ned, 0.0);
    EXPECT_EQ(report.purity, 100.0);
    EXPECT_EQ(report.v_measure, 100.0);
    EXPECT_EQ(report.n_clusters, 3u);
    EXPECT_EQ(report.runtime_s, 1.5);
    EXPECT_NEAR(report.bitrate, entropy_bits({3, 2, 1}), 1e-12);
}

TEST(Report, HarmonicMeanInvariantAndRanges) {
    std::mt19937_64 rng(6);
    std::vector<std::string> names;
    for (int i = 0; i < 40; ++i) {
        names.push_back("t" + std::to_string(i % 7));
    }
    auto manifest = lxk_test::labelled_manifest(names);
    for (int trial = 0; trial < 50; ++trial) {
        auto r = evaluate_all(Clustering::from_labels(manifest, random_labels(40, 6, rng)), manifest);
        double h = r.homogeneity, c = r.completeness;
        EXPECT_NEAR(r.v_measure, h + c == 0 ? 0 : 2 * h * c / (h + c), 1e-6);
        for (double p : {*r.ned, r.purity, h, c, r.v_measure}) {
            EXPECT_GE(p, 0.0);
            EXPECT_LE(p, 100.0);
        }
    }
}

TEST(Report, ClusteringOrderDoesNotMatter) {
    auto manifest = lxk_test::labelled_manifest({"a", "b", "a"});
    Clustering shuffled({"s2", "s0", "s1"}, std::vector<std::int32_t>{0, 0, 1});
    auto report = evaluate_all(shuffled, manifest);
    EXPECT_EQ(report.purity, 100.0);
    Clustering partial({"s0", "s1"}, std::vector<std::int32_t>{0, 1});
    EXPECT_THROW(evaluate_all(partial, manifest), ValidationError);
}

TEST(Report, JsonRoundTrip) {
    EvalReport r;
    r.ned = 12.5;
    r.purity = 66.66666666666667;
    r.homogeneity = 50.0;
    r.completeness = 40.0;
    r.v_measure = 44.44444444444444;
    r.bitrate = 3.25;
    r.n_clusters = 17;
    r.runtime_s = 0.125;
    auto j = report_to_json(r);
    EXPECT_FALSE(j.contains("runtime_s"));
    auto back = report_from_json(report_to_json(r, true));
    EXPECT_EQ(back, r);

    lxk_test::TempDir dir;
    io::write_json(report_to_json(r, true), dir / "report.json");
    EXPECT_EQ(report_from_json(io::read_json(dir / "report.json")), r);

    EvalReport empty;
    EXPECT_TRUE(report_to_json(empty)["ned"].is_null());
    EXPECT_FALSE(report_from_json(report_to_json(empty)).ned.has_value());
    EXPECT_THROW(report_from_json(nlohmann::json::object()), ParseError);
}

TEST(Report, TableHasOneRowPerSystem) {
    EvalReport r;
    r.purity = 100;
    auto table = format_report_table({{"avg-kmeans", r}, {"dtw-graph", r}});
    std::istringstream in(table);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        lines.push_back(line);
    }
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0].rfind("System", 0), 0u);
    EXPECT_EQ(lines[1].rfind("avg-kmeans", 0), 0u);
    EXPECT_EQ(lines[2].rfind("dtw-graph", 0), 0u);
}
