#ifndef LXK_TESTS_SUPPORT_HPP
#define LXK_TESTS_SUPPORT_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <lxk/types.hpp>

namespace lxk_test {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = fs::temp_directory_path() /
                ("lxk-test-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline lxk::SegmentMetadata segment(const std::string& id, double start, double end,
                                    std::optional<std::string> label = std::nullopt,
                                    std::optional<std::vector<std::string>> phones = std::nullopt) {
    lxk::SegmentMetadata s;
    s.segment_id = id;
    s.utterance_id = "u0";
    s.speaker_id = "s0";
    s.start_s = start;
    s.end_s = end;
    s.word_label = std::move(label);
    s.phones = std::move(phones);
    return s;
}

/// One-second segments s0, s1, ... with the given word labels and single-phone transcriptions equal to the label.
inline lxk::Manifest labelled_manifest(const std::vector<std::string>& labels) {
    std::vector<lxk::SegmentMetadata> segs;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        segs.push_back(segment("s" + std::to_string(i), static_cast<double>(i), static_cast<double>(i + 1), labels[i],
                               std::vector<std::string>{labels[i]}));
    }
    return lxk::Manifest(std::move(segs));
}

inline lxk::MatrixF gaussian_frames(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<float> normal(0.0f, 1.0f);
    lxk::MatrixF m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = normal(rng);
        }
    }
    return m;
}

inline lxk::FrameFeatureSequence gaussian_sequence(const std::string& id, std::size_t rows, std::size_t cols,
                                                   std::mt19937_64& rng) {
    return {id, gaussian_frames(rows, cols, rng), lxk::default_frame_period_s};
}

}  // namespace lxk_test

#endif
