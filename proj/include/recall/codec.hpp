#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "recall/errors.hpp"
#include "recall/matrix.hpp"
#include "recall/numio.hpp"
#include "recall/rng.hpp"
#include "recall/text.hpp"

namespace recall {

/// One latent vector; dimension is fixed per codec instance.
using LatentVector = std::vector<double>;

/// The codec surface the addressing and pipeline layers are written
/// against. Any deterministic text-to-latent encoder/decoder satisfying it
/// (e.g. a learned model wrapper) can replace the default codebook codec
/// without touching keys or memory.
template <typename T>
concept TextCodec = requires(T codec, const T const_codec, std::string_view text,
                             std::span<const double> z) {
    { codec.encode(text) } -> std::convertible_to<const LatentVector&>;
    { const_codec.decode(z) } -> std::convertible_to<const std::string&>;
    { const_codec.dim() } -> std::convertible_to<std::size_t>;
};

struct CodecConfig {
    std::size_t dim = 256;          // latent dimension C
    double separation = 0.1;        // minimum pairwise codebook distance
    std::size_t capacity = 1u << 20;
    std::uint64_t seed = 0;
};

/// Deterministic invertible text codec.
///
/// Each distinct normalized text maps to a seeded pseudo-random unit vector,
/// registered in a codebook and resampled (deterministically) in the
/// astronomically unlikely event it lands within `separation` of an existing
/// entry. Decoding returns the text of the nearest entry, so any readout
/// within separation/2 of a registered vector decodes exactly.
///
/// encode() mutates the codebook; keep registration single-writer. decode()
/// and lookups are read-only and safe once registration has quiesced.
class Codec {
public:
    explicit Codec(CodecConfig config = {}) : config_(config) {
        if (config_.dim == 0) throw InputError("Codec: dim must be positive");
        if (config_.separation <= 0.0) throw InputError("Codec: separation must be > 0");
        if (config_.capacity == 0) throw InputError("Codec: capacity must be positive");
    }

    std::size_t dim() const { return config_.dim; }
    double separation() const { return config_.separation; }
    std::size_t size() const { return entries_.size(); }
    const CodecConfig& config() const { return config_; }

    /// Latent encoding of `text` (registered on first sight). Equal
    /// normalized texts always return bitwise-identical vectors.
    const LatentVector& encode(std::string_view text) {
        const std::string norm = normalize_text(text);
        if (norm.empty()) throw InputError("Codec::encode: empty text");
        if (auto it = index_.find(norm); it != index_.end())
            return entries_[it->second].vector;
        if (entries_.size() >= config_.capacity)
            throw CapacityError("Codec::encode: codebook capacity exhausted");
        LatentVector vec = sample_separated(norm);
        entries_.push_back(Entry{norm, std::move(vec)});
        index_.emplace(entries_.back().text, entries_.size() - 1);
        return entries_.back().vector;
    }

    /// Text of the codebook entry nearest to `z` (ties -> lowest index).
    const std::string& decode(std::span<const double> z) const {
        if (entries_.empty()) throw StateError("Codec::decode: empty codebook");
        if (z.size() != config_.dim) throw InputError("Codec::decode: dimension mismatch");
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const double d = squared_distance(z, entries_[i].vector);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return entries_[best].text;
    }

    bool contains(std::string_view text) const {
        return index_.count(normalize_text(text)) > 0;
    }

    /// Minimum pairwise distance over the codebook; +inf for < 2 entries.
    /// O(n^2) — meant for invariant checks in tests, not hot paths.
    double min_pairwise_distance() const {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < entries_.size(); ++i)
            for (std::size_t j = i + 1; j < entries_.size(); ++j)
                best = std::min(best, euclidean_distance(entries_[i].vector, entries_[j].vector));
        return best;
    }

    /// Line-delimited export: "text<TAB>v0 v1 ...", full precision.
    /// Normalized text never contains tabs or newlines, so the format needs
    /// no escaping and round-trips bit-exactly.
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IOError("Codec::save: cannot open " + path);
        for (const auto& e : entries_) {
            out << e.text << '\t' << format_vector(e.vector) << '\n';
        }
        if (!out) throw IOError("Codec::save: write failed for " + path);
    }

    static Codec load(const std::string& path, CodecConfig config = {}) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IOError("Codec::load: cannot open " + path);
        Codec codec(config);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos)
                throw IOError("Codec::load: missing field separator at line " + std::to_string(lineno));
            std::string text = line.substr(0, tab);
            LatentVector vec = parse_vector(std::string_view(line).substr(tab + 1));
            if (vec.size() != config.dim)
                throw IOError("Codec::load: dimension mismatch at line " + std::to_string(lineno));
            if (codec.index_.count(text))
                throw IOError("Codec::load: duplicate text at line " + std::to_string(lineno));
            if (codec.entries_.size() >= config.capacity)
                throw CapacityError("Codec::load: codebook capacity exhausted");
            codec.entries_.push_back(Entry{std::move(text), std::move(vec)});
            codec.index_.emplace(codec.entries_.back().text, codec.entries_.size() - 1);
        }
        return codec;
    }

private:
    struct Entry {
        std::string text;
        LatentVector vector;
    };

    LatentVector sample_separated(const std::string& norm) const {
        const double sep_sq = config_.separation * config_.separation;
        for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
            LatentVector v = unit_vector(norm, attempt);
            bool ok = true;
            for (const auto& e : entries_) {
                // early exit once the running sum proves separation
                double s = 0.0;
                for (std::size_t i = 0; i < v.size(); ++i) {
                    const double d = v[i] - e.vector[i];
                    s += d * d;
                    if (s >= sep_sq) break;
                }
                if (s < sep_sq) {
                    ok = false;
                    break;
                }
            }
            if (ok) return v;
        }
        throw NumericalError("Codec: could not satisfy separation for '" + norm + "'");
    }

    LatentVector unit_vector(const std::string& norm, std::uint64_t attempt) const {
        SplitMix64 rng(mix_seed(mix_seed(config_.seed, fnv1a64(norm)), attempt));
        LatentVector v(config_.dim);
        double norm_sq = 0.0;
        do {
            norm_sq = 0.0;
            for (auto& x : v) {
                x = rng.next_gaussian();
                norm_sq += x * x;
            }
        } while (norm_sq == 0.0);
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (auto& x : v) x *= inv;
        return v;
    }

    CodecConfig config_;
    std::deque<Entry> entries_;  // deque: references returned by encode stay valid
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace recall
