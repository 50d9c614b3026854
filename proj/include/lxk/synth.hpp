#ifndef LXK_SYNTH_HPP
#define LXK_SYNTH_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "types.hpp"

/**
 * @file synth.hpp
 *
 * @brief Synthetic word-segment corpora with known ground truth.
 *
 * Every word type has a prototype frame sequence (frames uniform on the unit
 * sphere) and a phone string. Instances are time-warped copies of the
 * prototype with per-frame Gaussian noise. Optional pronunciation variants
 * give a type several prototypes whose phone strings differ by one phone.
 */

namespace lxk {

struct SynthConfig {
    std::size_t n_types = 100;
    std::size_t min_instances = 10;
    std::size_t max_instances = 10;
    std::size_t dim = 32;
    /// Mean prototype length in frames; lengths are uniform in [0.6, 1.4] x mean.
    std::size_t mean_len = 25;
    /// Standard deviation of the per-frame, per-dimension Gaussian noise.
    double within_type_noise = 0.0;
    /// Instances are resampled to length round(L (1 + u)), u uniform in [-jitter, jitter].
    double length_jitter = 0.0;
    std::size_t phone_alphabet_size = 40;
    std::size_t min_phones = 2;
    std::size_t max_phones = 7;
    /// Pronunciation variants per type; variant v > 0 substitutes one phone and
    /// perturbs the prototype frames with Gaussian noise of this standard deviation.
    std::size_t variants_per_type = 1;
    double variant_divergence = 0.0;
    std::size_t segments_per_utterance = 10;
    std::size_t n_speakers = 10;
    std::uint64_t seed = 0;

    void validate() const {
        auto positive = [](std::size_t v, const char* name) {
            if (v < 1) {
                throw ArgumentError(std::string("synth: ") + name + " must be positive");
            }
        };
        positive(n_types, "n_types");
        positive(min_instances, "min_instances");
        positive(dim, "dim");
        positive(mean_len, "mean_len");
        positive(phone_alphabet_size, "phone_alphabet_size");
        positive(min_phones, "min_phones");
        positive(variants_per_type, "variants_per_type");
        positive(segments_per_utterance, "segments_per_utterance");
        positive(n_speakers, "n_speakers");
        if (max_instances < min_instances) {
            throw ArgumentError("synth: max_instances < min_instances");
        }
        if (max_phones < min_phones) {
            throw ArgumentError("synth: max_phones < min_phones");
        }
        if (!(within_type_noise >= 0.0) || !(variant_divergence >= 0.0)) {
            throw ArgumentError("synth: noise levels must be non-negative");
        }
        if (!(length_jitter >= 0.0) || length_jitter >= 1.0) {
            throw ArgumentError("synth: length_jitter must be in [0, 1)");
        }
    }
};

inline nlohmann::ordered_json to_json(const SynthConfig& c) {
    nlohmann::ordered_json j;
    j["n_types"] = c.n_types;
    j["min_instances"] = c.min_instances;
    j["max_instances"] = c.max_instances;
    j["dim"] = c.dim;
    j["mean_len"] = c.mean_len;
    j["within_type_noise"] = c.within_type_noise;
    j["length_jitter"] = c.length_jitter;
    j["phone_alphabet_size"] = c.phone_alphabet_size;
    j["min_phones"] = c.min_phones;
    j["max_phones"] = c.max_phones;
    j["variants_per_type"] = c.variants_per_type;
    j["variant_divergence"] = c.variant_divergence;
    j["segments_per_utterance"] = c.segments_per_utterance;
    j["n_speakers"] = c.n_speakers;
    j["seed"] = c.seed;
    return j;
}

/// Fields missing from `j` keep their defaults; unknown fields are rejected.
inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ParseError("synth config must be a JSON object");
    }
    SynthConfig c;
    auto defaults = to_json(c);
    for (const auto& [key, _] : j.items()) {
        if (!defaults.contains(key)) {
            throw ParseError("synth config: unknown field '" + key + "'");
        }
    }
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) {
                field = j.at(key).get<std::decay_t<decltype(field)>>();
            }
        };
        get("n_types", c.n_types);
        get("min_instances", c.min_instances);
        get("max_instances", c.max_instances);
        get("dim", c.dim);
        get("mean_len", c.mean_len);
        get("within_type_noise", c.within_type_noise);
        get("length_jitter", c.length_jitter);
        get("phone_alphabet_size", c.phone_alphabet_size);
        get("min_phones", c.min_phones);
        get("max_phones", c.max_phones);
        get("variants_per_type", c.variants_per_type);
        get("variant_divergence", c.variant_divergence);
        get("segments_per_utterance", c.segments_per_utterance);
        get("n_speakers", c.n_speakers);
        get("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

struct SynthCorpus {
    Manifest manifest;
    std::vector<FrameFeatureSequence> features;
};

namespace detail {

struct SynthVariant {
    MatrixF frames;
    std::vector<std::string> phones;
};

struct SynthToken {
    std::size_t type = 0;
    std::size_t instance = 0;
    std::size_t variant = 0;
    MatrixF frames;
};

inline std::string zero_pad(std::size_t value, int width) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%0*zu", width, value);
    return buffer;
}

inline MatrixF random_sphere_frames(std::size_t length, std::size_t dim, Rng& rng) {
    MatrixF frames(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(dim));
    for (Eigen::Index t = 0; t < frames.rows(); ++t) {
        double norm = 0.0;
        do {
            for (Eigen::Index j = 0; j < frames.cols(); ++j) {
                frames(t, j) = static_cast<float>(normal01(rng));
            }
            norm = frames.row(t).cast<double>().norm();
        } while (norm == 0.0);
        frames.row(t) = (frames.row(t).cast<double>() / norm).cast<float>();
    }
    return frames;
}

/// Resample to `target` frames by deleting or repeating random frames; order is kept.
inline MatrixF warp_frames(const MatrixF& frames, std::size_t target, Rng& rng) {
    const auto length = static_cast<std::size_t>(frames.rows());
    std::vector<std::size_t> index(length);
    for (std::size_t i = 0; i < length; ++i) {
        index[i] = i;
    }
    while (index.size() > target) {
        index.erase(index.begin() + static_cast<std::ptrdiff_t>(uniform_index(rng, index.size())));
    }
    while (index.size() < target) {
        auto pos = uniform_index(rng, index.size());
        index.insert(index.begin() + static_cast<std::ptrdiff_t>(pos), index[pos]);
    }
    MatrixF out(static_cast<Eigen::Index>(target), frames.cols());
    for (std::size_t t = 0; t < target; ++t) {
        out.row(static_cast<Eigen::Index>(t)) = frames.row(static_cast<Eigen::Index>(index[t]));
    }
    return out;
}

}  // namespace detail

inline std::string synth_word_label(std::size_t type) { return "word" + detail::zero_pad(type, 5); }

/**
 * Generate a labelled corpus. Segments are shuffled across types, grouped
 * into utterances of `segments_per_utterance` consecutive segments, and timed
 * at 20 ms per frame. Deterministic given the config (including its seed) and
 * independent of the worker count.
 */
inline SynthCorpus generate(const SynthConfig& config, int workers = 0) {
    config.validate();
    const SeedSequence seeds(config.seed);
    const std::size_t lo_len = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(0.6 * static_cast<double>(config.mean_len))));
    const std::size_t hi_len = std::max(lo_len, static_cast<std::size_t>(std::lround(1.4 * static_cast<double>(config.mean_len))));

    std::vector<std::vector<detail::SynthToken>> per_type(config.n_types);
    std::vector<std::vector<detail::SynthVariant>> variants(config.n_types);
    parallel_for(
        config.n_types,
        [&](std::size_t type) {
            Rng rng(seeds.stream("type", type));
            std::size_t length = lo_len + uniform_index(rng, hi_len - lo_len + 1);
            std::size_t n_phones = config.min_phones + uniform_index(rng, config.max_phones - config.min_phones + 1);

            detail::SynthVariant base;
            base.frames = detail::random_sphere_frames(length, config.dim, rng);
            for (std::size_t p = 0; p < n_phones; ++p) {
                base.phones.push_back("p" + std::to_string(uniform_index(rng, config.phone_alphabet_size)));
            }
            variants[type].push_back(base);
            for (std::size_t v = 1; v < config.variants_per_type; ++v) {
                detail::SynthVariant variant = base;
                auto pos = uniform_index(rng, n_phones);
                variant.phones[pos] = "p" + std::to_string(uniform_index(rng, config.phone_alphabet_size));
                for (Eigen::Index t = 0; t < variant.frames.rows(); ++t) {
                    for (Eigen::Index j = 0; j < variant.frames.cols(); ++j) {
                        variant.frames(t, j) += static_cast<float>(config.variant_divergence * normal01(rng));
                    }
                }
                variants[type].push_back(std::move(variant));
            }

            std::size_t n_instances =
                config.min_instances + uniform_index(rng, config.max_instances - config.min_instances + 1);
            for (std::size_t i = 0; i < n_instances; ++i) {
                detail::SynthToken token;
                token.type = type;
                token.instance = i;
                token.variant = uniform_index(rng, variants[type].size());
                const MatrixF& proto = variants[type][token.variant].frames;
                std::size_t target = static_cast<std::size_t>(proto.rows());
                if (config.length_jitter > 0.0) {
                    double u = (2.0 * uniform01(rng) - 1.0) * config.length_jitter;
                    target = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(target) * (1.0 + u))));
                }
                token.frames = detail::warp_frames(proto, target, rng);
                if (config.within_type_noise > 0.0) {
                    for (Eigen::Index t = 0; t < token.frames.rows(); ++t) {
                        for (Eigen::Index j = 0; j < token.frames.cols(); ++j) {
                            token.frames(t, j) += static_cast<float>(config.within_type_noise * normal01(rng));
                        }
                    }
                }
                per_type[type].push_back(std::move(token));
            }
        },
        workers);

    std::vector<detail::SynthToken> tokens;
    for (auto& list : per_type) {
        for (auto& token : list) {
            tokens.push_back(std::move(token));
        }
    }
    Rng order_rng(seeds.stream("order"));
    shuffle(tokens.begin(), tokens.end(), order_rng);

    SynthCorpus corpus;
    std::vector<SegmentMetadata> segments;
    segments.reserve(tokens.size());
    corpus.features.reserve(tokens.size());
    double clock = 0.0;
    for (std::size_t s = 0; s < tokens.size(); ++s) {
        auto& token = tokens[s];
        std::size_t utterance = s / config.segments_per_utterance;
        if (s % config.segments_per_utterance == 0) {
            clock = 0.0;
        }
        SegmentMetadata seg;
        seg.segment_id = "w" + detail::zero_pad(token.type, 5) + "_" + detail::zero_pad(token.instance, 4);
        seg.utterance_id = "utt" + detail::zero_pad(utterance, 6);
        seg.speaker_id = "spk" + detail::zero_pad(utterance % config.n_speakers, 3);
        seg.start_s = clock;
        clock += static_cast<double>(token.frames.rows()) * default_frame_period_s;
        seg.end_s = clock;
        seg.word_label = synth_word_label(token.type);
        seg.phones = variants[token.type][token.variant].phones;
        corpus.features.push_back({seg.segment_id, std::move(token.frames), default_frame_period_s});
        segments.push_back(std::move(seg));
    }
    corpus.manifest = Manifest(std::move(segments));
    return corpus;
}

}  // namespace lxk

#endif
