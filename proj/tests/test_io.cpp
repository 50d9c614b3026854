#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include <lxk/io.hpp>

#include "support.hpp"

using namespace lxk;
using lxk_test::TempDir;

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Manifest, ParsesThreeRecordsInOrder) {
    TempDir dir;
    write_text(dir / "m.jsonl",
               R"({"segment_id":"c","utterance_id":"u","speaker_id":"s","start_s":0.0,"end_s":0.5,"word_label":"x","phones":["k","a"]})"
               "\n"
               R"({"segment_id":"a","utterance_id":"u","speaker_id":"s","start_s":0.5,"end_s":1.0})"
               "\n"
               R"({"segment_id":"b","utterance_id":"u","speaker_id":"s","start_s":1.0,"end_s":1.25,"word_label":"y"})"
               "\n");
    auto m = io::read_manifest(dir / "m.jsonl");
    ASSERT_EQ(m.size(), 3u);
    EXPECT_EQ(m[0].segment_id, "c");
    EXPECT_EQ(m[1].segment_id, "a");
    EXPECT_EQ(m[2].segment_id, "b");
    EXPECT_EQ(*m[0].phones, (std::vector<std::string>{"k", "a"}));
    EXPECT_FALSE(m[1].word_label.has_value());
    EXPECT_NEAR(m.total_duration_s(), 1.25, 1e-12);
    EXPECT_EQ(m.find("b"), std::optional<std::size_t>(2));
}

TEST(Manifest, DuplicateSegmentIdIsValidationError) {
    TempDir dir;
    write_text(dir / "m.jsonl",
               R"({"segment_id":"a","utterance_id":"u","speaker_id":"s","start_s":0.0,"end_s":0.5})"
               "\n"
               R"({"segment_id":"a","utterance_id":"u","speaker_id":"s","start_s":0.5,"end_s":1.0})"
               "\n");
    EXPECT_THROW(io::read_manifest(dir / "m.jsonl"), ValidationError);
}

TEST(Manifest, NonPositiveDurationIsValidationError) {
    TempDir dir;
    write_text(dir / "m.jsonl", R"({"segment_id":"a","utterance_id":"u","speaker_id":"s","start_s":1.0,"end_s":1.0})"
                                "\n");
    EXPECT_THROW(io::read_manifest(dir / "m.jsonl"), ValidationError);
}

TEST(Manifest, MalformedLineReportsLineNumber) {
    std::istringstream in(R"({"segment_id":"a","utterance_id":"u","speaker_id":"s","start_s":0.0,"end_s":0.5})"
                          "\n{not json\n");
    try {
        io::parse_manifest(in);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Manifest, MissingRequiredFieldIsParseError) {
    std::istringstream in(R"({"segment_id":"a","speaker_id":"s","start_s":0.0,"end_s":0.5})"
                          "\n");
    EXPECT_THROW(io::parse_manifest(in), ParseError);
}

TEST(Manifest, EmptyPhoneListIsRejected) {
    std::istringstream in(R"({"segment_id":"a","utterance_id":"u","speaker_id":"s","start_s":0.0,"end_s":0.5,"phones":[]})"
                          "\n");
    EXPECT_THROW(io::parse_manifest(in), Error);
}

TEST(Manifest, WriteReadRoundTrip) {
    TempDir dir;
    auto m = lxk_test::labelled_manifest({"a", "b", "a"});
    io::write_manifest(m, dir / "m.jsonl");
    auto back = io::read_manifest(dir / "m.jsonl");
    ASSERT_EQ(back.size(), m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        EXPECT_EQ(back[i], m[i]);
    }
}

TEST(Matrix, RoundTripIsExactAndBytesAreStable) {
    TempDir dir;
    std::mt19937_64 rng(1);
    auto frames = lxk_test::gaussian_frames(7, 5, rng);
    io::write_matrix(dir / "a.lxk", frames);
    io::write_matrix(dir / "b.lxk", frames);
    EXPECT_EQ(io::read_matrix(dir / "a.lxk"), frames);
    auto bytes = read_bytes(dir / "a.lxk");
    EXPECT_EQ(bytes, read_bytes(dir / "b.lxk"));
    ASSERT_EQ(bytes.size(), 4u + 4u + 4u + 1u + 7u * 5u * 4u);
    EXPECT_EQ(bytes.substr(0, 4), "LXK1");
    // u32 rows, little-endian.
    EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 7u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 5u);
    EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 0u);
}

TEST(Matrix, BadMagicIsRejected) {
    TempDir dir;
    write_text(dir / "x.lxk", "NOPE0000000000000");
    EXPECT_THROW(io::read_matrix(dir / "x.lxk"), Error);
}

TEST(Matrix, TruncatedPayloadIsRejected) {
    TempDir dir;
    std::mt19937_64 rng(2);
    io::write_matrix(dir / "a.lxk", lxk_test::gaussian_frames(3, 3, rng));
    auto bytes = read_bytes(dir / "a.lxk");
    write_text(dir / "b.lxk", bytes.substr(0, bytes.size() - 2));
    EXPECT_THROW(io::read_matrix(dir / "b.lxk"), Error);
}

TEST(Units, RoundTripThroughU16Payload) {
    std::stringstream buf;
    std::vector<std::int32_t> units{0, 3, 3, 499, 65535};
    io::write_units(buf, units);
    EXPECT_EQ(io::read_units(buf, "test"), units);
}

TEST(Units, OutOfRangeIdsAreRejected) {
    std::stringstream buf;
    EXPECT_THROW(io::write_units(buf, {70000}), Error);
    EXPECT_THROW(io::write_units(buf, {-1}), Error);
}

class FeatureDirectory : public ::testing::Test {
protected:
    TempDir dir;
    Manifest manifest = lxk_test::labelled_manifest({"a", "b"});
    std::mt19937_64 rng{3};
};

TEST_F(FeatureDirectory, ReadsOneSequencePerSegmentInManifestOrder) {
    auto f0 = lxk_test::gaussian_sequence("s0", 4, 16, rng);
    auto f1 = lxk_test::gaussian_sequence("s1", 6, 16, rng);
    io::write_features(dir.path(), {f1, f0});
    auto seqs = io::read_features(dir.path(), manifest);
    ASSERT_EQ(seqs.size(), 2u);
    EXPECT_EQ(seqs[0].segment_id, "s0");
    EXPECT_EQ(seqs[0].frames, f0.frames);
    EXPECT_EQ(seqs[1].frames, f1.frames);
}

TEST_F(FeatureDirectory, DimensionMismatchIsValidationError) {
    io::write_features(dir.path(), {lxk_test::gaussian_sequence("s0", 4, 16, rng), lxk_test::gaussian_sequence("s1", 4, 12, rng)});
    EXPECT_THROW(io::read_features(dir.path(), manifest), ValidationError);
}

TEST_F(FeatureDirectory, NonFiniteValueIsValidationError) {
    auto f0 = lxk_test::gaussian_sequence("s0", 4, 8, rng);
    f0.frames(0, 0) = std::numeric_limits<float>::quiet_NaN();
    io::write_features(dir.path(), {f0, lxk_test::gaussian_sequence("s1", 4, 8, rng)});
    EXPECT_THROW(io::read_features(dir.path(), manifest), ValidationError);
}

TEST_F(FeatureDirectory, MissingFileNamesTheSegment) {
    io::write_features(dir.path(), {lxk_test::gaussian_sequence("s0", 4, 8, rng)});
    try {
        io::read_features(dir.path(), manifest);
        FAIL() << "expected an io error";
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("'s1'"), std::string::npos);
    }
}

TEST_F(FeatureDirectory, UnitSequencesRoundTrip) {
    std::vector<UnitSequence> units{{"s0", {1, 2, 2}}, {"s1", {7}}};
    io::write_unit_sequences(dir.path(), units);
    auto back = io::read_unit_sequences(dir.path(), manifest);
    EXPECT_EQ(back[0].units, units[0].units);
    EXPECT_EQ(back[1].units, units[1].units);
}

TEST(ClusteringFile, RoundTripsUnchanged) {
    TempDir dir;
    Clustering c({"a", "b", "c"}, std::vector<std::int32_t>{0, 0, 1});
    io::write_clustering(c, dir / "c.tsv");
    EXPECT_EQ(read_bytes(dir / "c.tsv"), "a\t0\nb\t0\nc\t1\n");
    EXPECT_EQ(io::read_clustering(dir / "c.tsv"), c);
}

TEST(ClusteringFile, IdsCanonicalizeByFirstAppearance) {
    std::istringstream in("a\t9\nb\t5\nc\t9\n");
    auto c = io::parse_clustering(in);
    EXPECT_EQ(c.labels(), (std::vector<std::int32_t>{0, 1, 0}));
}

TEST(ClusteringFile, MissingManifestSegmentIsValidationError) {
    TempDir dir;
    auto m = lxk_test::labelled_manifest({"x", "y", "z"});
    write_text(dir / "c.tsv", "s0\t0\ns1\t1\n");
    EXPECT_THROW(io::read_clustering(dir / "c.tsv", &m), ValidationError);
    Clustering partial({"s0", "s1"}, std::vector<std::int32_t>{0, 1});
    EXPECT_THROW(io::write_clustering(partial, dir / "d.tsv", &m), ValidationError);
}

TEST(ClusteringFile, MalformedLineIsParseError) {
    std::istringstream in("a\t0\nb 1\n");
    EXPECT_THROW(io::parse_clustering(in), ParseError);
}

TEST(ClusteringFile, DuplicateSegmentIsRejected) {
    std::istringstream in("a\t0\na\t1\n");
    EXPECT_THROW(io::parse_clustering(in), Error);
}
