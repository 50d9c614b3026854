#ifndef LXK_IO_HPP
#define LXK_IO_HPP

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "parallel.hpp"
#include "types.hpp"

/**
 * @file io.hpp
 *
 * @brief On-disk formats.
 *
 * - Manifest: JSON Lines, one `SegmentMetadata` record per line.
 * - Feature/matrix files (`.lxk`): magic `LXK1`, u32 rows, u32 cols, u8 dtype
 *   (0 = f32, 1 = u16), then the row-major little-endian payload.
 * - Clustering: `segment_id<TAB>cluster_id` per line.
 */

namespace lxk::io {

namespace fs = std::filesystem;

inline constexpr std::array<char, 4> lxk_magic{'L', 'X', 'K', '1'};
inline constexpr std::uint8_t dtype_f32 = 0;
inline constexpr std::uint8_t dtype_u16 = 1;
inline constexpr const char* feature_extension = ".lxk";

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    out.write(bytes.data(), sizeof(T));
}

template <class T>
T read_le(std::istream& in, const std::string& what) {
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), sizeof(T))) {
        throw ParseError(what + ": unexpected end of file");
    }
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

inline std::ifstream open_in(const fs::path& path, bool binary) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "' for reading");
    }
    return in;
}

inline std::ofstream open_out(const fs::path& path, bool binary) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double value) {
    std::ostringstream s;
    s << std::setprecision(std::numeric_limits<double>::max_digits10) << value;
    return s.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

inline SegmentMetadata segment_from_json(const nlohmann::json& record) {
    if (!record.is_object()) {
        throw ParseError("record is not a JSON object");
    }
    auto required_string = [&](const char* key) {
        auto it = record.find(key);
        if (it == record.end() || !it->is_string()) {
            throw ParseError(std::string("missing or non-string field '") + key + "'");
        }
        return it->get<std::string>();
    };
    auto required_number = [&](const char* key) {
        auto it = record.find(key);
        if (it == record.end() || !it->is_number()) {
            throw ParseError(std::string("missing or non-numeric field '") + key + "'");
        }
        return it->get<double>();
    };

    SegmentMetadata seg;
    seg.segment_id = required_string("segment_id");
    seg.utterance_id = required_string("utterance_id");
    seg.speaker_id = required_string("speaker_id");
    seg.start_s = required_number("start_s");
    seg.end_s = required_number("end_s");
    if (auto it = record.find("word_label"); it != record.end() && !it->is_null()) {
        if (!it->is_string()) {
            throw ParseError("field 'word_label' is not a string");
        }
        seg.word_label = it->get<std::string>();
    }
    if (auto it = record.find("phones"); it != record.end() && !it->is_null()) {
        if (!it->is_array()) {
            throw ParseError("field 'phones' is not an array");
        }
        std::vector<std::string> phones;
        for (const auto& p : *it) {
            if (!p.is_string()) {
                throw ParseError("field 'phones' contains a non-string entry");
            }
            phones.push_back(p.get<std::string>());
        }
        seg.phones = std::move(phones);
    }
    return seg;
}

inline nlohmann::ordered_json segment_to_json(const SegmentMetadata& seg) {
    nlohmann::ordered_json record;
    record["segment_id"] = seg.segment_id;
    record["utterance_id"] = seg.utterance_id;
    record["speaker_id"] = seg.speaker_id;
    record["start_s"] = seg.start_s;
    record["end_s"] = seg.end_s;
    if (seg.word_label) {
        record["word_label"] = *seg.word_label;
    }
    if (seg.phones) {
        record["phones"] = *seg.phones;
    }
    return record;
}

/// Parse a manifest from a JSON Lines stream. Blank lines are skipped.
inline Manifest parse_manifest(std::istream& in) {
    std::vector<SegmentMetadata> segments;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(std::string("invalid JSON: ") + e.what(), line_number);
        }
        try {
            segments.push_back(segment_from_json(record));
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_number);
        }
    }
    return Manifest(std::move(segments));
}

inline Manifest read_manifest(const fs::path& path) {
    auto in = detail::open_in(path, false);
    return parse_manifest(in);
}

inline void write_manifest(const Manifest& manifest, const fs::path& path) {
    auto out = detail::open_out(path, false);
    for (const auto& seg : manifest) {
        out << segment_to_json(seg).dump() << '\n';
    }
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

// ---------------------------------------------------------------------------
// LXK1 binary matrices
// ---------------------------------------------------------------------------

struct LxkHeader {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint8_t dtype = dtype_f32;
};

inline void write_header(std::ostream& out, const LxkHeader& header) {
    out.write(lxk_magic.data(), lxk_magic.size());
    detail::write_le(out, header.rows);
    detail::write_le(out, header.cols);
    detail::write_le(out, header.dtype);
}

inline LxkHeader read_header(std::istream& in, const std::string& what) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != lxk_magic) {
        throw ParseError(what + ": bad magic bytes (expected LXK1)");
    }
    LxkHeader header;
    header.rows = detail::read_le<std::uint32_t>(in, what);
    header.cols = detail::read_le<std::uint32_t>(in, what);
    header.dtype = detail::read_le<std::uint8_t>(in, what);
    if (header.dtype != dtype_f32 && header.dtype != dtype_u16) {
        throw ParseError(what + ": unknown dtype tag " + std::to_string(header.dtype));
    }
    return header;
}

inline void write_matrix(std::ostream& out, const MatrixF& matrix) {
    write_header(out, {static_cast<std::uint32_t>(matrix.rows()), static_cast<std::uint32_t>(matrix.cols()), dtype_f32});
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
            detail::write_le(out, matrix(r, c));
        }
    }
}

inline void write_matrix(const fs::path& path, const MatrixF& matrix) {
    auto out = detail::open_out(path, true);
    write_matrix(out, matrix);
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

/// Read an f32 matrix. Non-finite values are rejected.
inline MatrixF read_matrix(std::istream& in, const std::string& what) {
    auto header = read_header(in, what);
    if (header.dtype != dtype_f32) {
        throw ValidationError(what + ": expected f32 payload, found dtype " + std::to_string(header.dtype));
    }
    MatrixF matrix(header.rows, header.cols);
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
            float v = detail::read_le<float>(in, what);
            if (!std::isfinite(v)) {
                throw ValidationError(what + ": non-finite value at frame " + std::to_string(r) + ", dim " +
                                      std::to_string(c));
            }
            matrix(r, c) = v;
        }
    }
    return matrix;
}

inline MatrixF read_matrix(const fs::path& path) {
    auto in = detail::open_in(path, true);
    return read_matrix(in, path.string());
}

inline void write_units(std::ostream& out, const std::vector<std::int32_t>& units) {
    write_header(out, {static_cast<std::uint32_t>(units.size()), 1, dtype_u16});
    for (auto u : units) {
        if (u < 0 || u > std::numeric_limits<std::uint16_t>::max()) {
            throw ArgumentError("unit id " + std::to_string(u) + " does not fit the u16 payload");
        }
        detail::write_le(out, static_cast<std::uint16_t>(u));
    }
}

inline std::vector<std::int32_t> read_units(std::istream& in, const std::string& what) {
    auto header = read_header(in, what);
    if (header.dtype != dtype_u16) {
        throw ValidationError(what + ": expected u16 payload, found dtype " + std::to_string(header.dtype));
    }
    if (header.cols != 1) {
        throw ValidationError(what + ": unit files have one column, found " + std::to_string(header.cols));
    }
    std::vector<std::int32_t> units(header.rows);
    for (auto& u : units) {
        u = detail::read_le<std::uint16_t>(in, what);
    }
    return units;
}

// ---------------------------------------------------------------------------
// Per-segment feature and unit directories
// ---------------------------------------------------------------------------

inline fs::path segment_path(const fs::path& dir, const std::string& segment_id) {
    return dir / (segment_id + feature_extension);
}

/**
 * Load one continuous feature file per manifest segment, in manifest order.
 * All files must share the same dimension and contain at least one frame.
 */
inline std::vector<FrameFeatureSequence> read_features(const fs::path& dir, const Manifest& manifest,
                                                       int workers = 0) {
    std::vector<FrameFeatureSequence> out(manifest.size());
    parallel_for(
        manifest.size(),
        [&](std::size_t i) {
            const auto& id = manifest[i].segment_id;
            auto path = segment_path(dir, id);
            if (!fs::exists(path)) {
                throw IoError("missing feature file for segment '" + id + "' (" + path.string() + ")");
            }
            auto in = detail::open_in(path, true);
            out[i].segment_id = id;
            out[i].frames = read_matrix(in, "segment '" + id + "'");
            if (out[i].frames.rows() < 1 || out[i].frames.cols() < 1) {
                throw ValidationError("segment '" + id + "': empty feature matrix");
            }
        },
        workers);
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (out[i].dim() != out[0].dim()) {
            throw ValidationError("dimension mismatch: segment '" + out[i].segment_id + "' has D=" +
                                  std::to_string(out[i].dim()) + " but segment '" + out[0].segment_id +
                                  "' has D=" + std::to_string(out[0].dim()));
        }
    }
    return out;
}

inline void write_features(const fs::path& dir, const std::vector<FrameFeatureSequence>& sequences, int workers = 0) {
    fs::create_directories(dir);
    parallel_for(
        sequences.size(), [&](std::size_t i) { write_matrix(segment_path(dir, sequences[i].segment_id), sequences[i].frames); },
        workers);
}

inline std::vector<UnitSequence> read_unit_sequences(const fs::path& dir, const Manifest& manifest, int workers = 0) {
    std::vector<UnitSequence> out(manifest.size());
    parallel_for(
        manifest.size(),
        [&](std::size_t i) {
            const auto& id = manifest[i].segment_id;
            auto path = segment_path(dir, id);
            if (!fs::exists(path)) {
                throw IoError("missing unit file for segment '" + id + "' (" + path.string() + ")");
            }
            auto in = detail::open_in(path, true);
            out[i].segment_id = id;
            out[i].units = read_units(in, "segment '" + id + "'");
            if (out[i].units.empty()) {
                throw ValidationError("segment '" + id + "': empty unit sequence");
            }
        },
        workers);
    return out;
}

inline void write_unit_sequences(const fs::path& dir, const std::vector<UnitSequence>& sequences, int workers = 0) {
    fs::create_directories(dir);
    parallel_for(
        sequences.size(),
        [&](std::size_t i) {
            auto path = segment_path(dir, sequences[i].segment_id);
            auto out = detail::open_out(path, true);
            write_units(out, sequences[i].units);
        },
        workers);
}

/// Embeddings are stored as single-frame feature files.
inline void write_embeddings(const fs::path& dir, const std::vector<WordEmbedding>& embeddings, int workers = 0) {
    fs::create_directories(dir);
    parallel_for(
        embeddings.size(),
        [&](std::size_t i) {
            MatrixF row = embeddings[i].vector.transpose();
            write_matrix(segment_path(dir, embeddings[i].segment_id), row);
        },
        workers);
}

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

inline void write_clustering(const Clustering& clustering, std::ostream& out) {
    const auto& ids = clustering.segment_ids();
    const auto& labels = clustering.labels();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << ids[i] << '\t' << labels[i] << '\n';
    }
}

/// Write a clustering. When `manifest` is given, coverage is validated first.
inline void write_clustering(const Clustering& clustering, const fs::path& path, const Manifest* manifest = nullptr) {
    if (manifest) {
        (void)clustering.aligned_to(*manifest);
    }
    auto out = detail::open_out(path, false);
    write_clustering(clustering, out);
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

inline Clustering parse_clustering(std::istream& in) {
    std::vector<std::string> ids;
    std::vector<std::int64_t> labels;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) {
            throw ParseError("expected 'segment_id<TAB>cluster_id'", line_number);
        }
        std::string label_text = line.substr(tab + 1);
        std::size_t consumed = 0;
        std::int64_t label = 0;
        try {
            label = std::stoll(label_text, &consumed);
        } catch (const std::exception&) {
            consumed = 0;
        }
        if (consumed == 0 || consumed != label_text.size()) {
            throw ParseError("cluster_id '" + label_text + "' is not an integer", line_number);
        }
        ids.push_back(line.substr(0, tab));
        if (!seen.insert(ids.back()).second) {
            throw ParseError("segment '" + ids.back() + "' is assigned twice", line_number);
        }
        labels.push_back(label);
    }
    return Clustering(std::move(ids), labels);
}

/// Read a clustering file. When `manifest` is given, the result is aligned to it.
inline Clustering read_clustering(const fs::path& path, const Manifest* manifest = nullptr) {
    auto in = detail::open_in(path, false);
    auto clustering = parse_clustering(in);
    if (manifest) {
        return clustering.aligned_to(*manifest);
    }
    return clustering;
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

inline void write_json(const nlohmann::ordered_json& document, const fs::path& path) {
    auto out = detail::open_out(path, false);
    out << document.dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

inline nlohmann::json read_json(const fs::path& path) {
    auto in = detail::open_in(path, false);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace lxk::io

#endif
