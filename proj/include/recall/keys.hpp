#pragma once

#include <cstddef>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "recall/codec.hpp"
#include "recall/errors.hpp"
#include "recall/matrix.hpp"
#include "recall/numio.hpp"
#include "recall/rng.hpp"
#include "recall/text.hpp"

namespace recall {

/// One-hot key vector: exactly one unit entry selecting a memory row.
/// Stored as (size, hot index); dense() materializes the K-vector.
struct KeyVector {
    std::size_t size = 0;
    std::size_t hot_index = 0;

    std::vector<double> dense() const {
        std::vector<double> v(size, 0.0);
        v[hot_index] = 1.0;
        return v;
    }
};

inline KeyVector one_hot_key(std::size_t k_star, std::size_t num_slots) {
    if (num_slots == 0) throw InputError("one_hot_key: K must be positive");
    if (k_star >= num_slots) throw InputError("one_hot_key: index out of range");
    return KeyVector{num_slots, k_star};
}

inline std::uint64_t hash_encoding(std::span<const double> v) {
    return fnv1a64({reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)});
}

inline bool encoding_equal(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

/// The address store: rows are the key encodings of the in-context
/// sentences, used exclusively to locate slots. Immutable once built.
class KeyMemory {
public:
    KeyMemory(Matrix rows, std::vector<std::string> row_meta)
        : rows_(std::move(rows)), row_meta_(std::move(row_meta)) {
        if (rows_.rows() == 0) throw InputError("KeyMemory: no rows");
        if (rows_.rows() != row_meta_.size())
            throw InputError("KeyMemory: meta count mismatch");
        for (std::size_t k = 0; k < row_meta_.size(); ++k)
            meta_index_.emplace(row_meta_[k], k); // first occurrence wins
    }

    std::size_t num_slots() const { return rows_.rows(); }
    std::size_t dim() const { return rows_.cols(); }
    std::span<const double> row(std::size_t k) const { return rows_.row(k); }
    const std::string& meta(std::size_t k) const { return row_meta_[k]; }
    const Matrix& rows() const { return rows_; }

    /// Slot index of the key text `meta`, if it sourced a row. Exact-match
    /// shortcut: an encoding equal to a row is that row's unique argmin at
    /// distance zero (rows are pairwise separated), so this agrees with
    /// nearest_slot whenever it answers.
    std::optional<std::size_t> slot_of(const std::string& meta) const {
        auto it = meta_index_.find(meta);
        if (it == meta_index_.end()) return std::nullopt;
        return it->second;
    }

    /// Same line-delimited format as codebooks: "meta<TAB>row values".
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IOError("KeyMemory::save: cannot open " + path);
        for (std::size_t k = 0; k < rows_.rows(); ++k)
            out << row_meta_[k] << '\t' << format_vector(rows_.row(k)) << '\n';
        if (!out) throw IOError("KeyMemory::save: write failed for " + path);
    }

    static KeyMemory load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IOError("KeyMemory::load: cannot open " + path);
        std::vector<std::vector<double>> rows;
        std::vector<std::string> meta;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos) throw IOError("KeyMemory::load: missing separator");
            meta.push_back(line.substr(0, tab));
            rows.push_back(parse_vector(std::string_view(line).substr(tab + 1)));
        }
        if (rows.empty()) throw IOError("KeyMemory::load: empty file " + path);
        return KeyMemory(Matrix::from_rows(rows), std::move(meta));
    }

private:
    Matrix rows_;
    std::vector<std::string> row_meta_;
    std::unordered_map<std::string, std::size_t> meta_index_;
};

/// Builds the key memory from key encodings, one row per distinct encoding
/// in first-occurrence order. Repeated encodings (repeats of a sentence, or
/// distinct sentences whose key texts collide) collapse to one row.
inline KeyMemory build_key_memory(const std::vector<LatentVector>& key_encodings,
                                  const std::vector<std::string>& meta) {
    if (key_encodings.empty()) throw InputError("build_key_memory: empty input");
    if (key_encodings.size() != meta.size())
        throw InputError("build_key_memory: encoding/meta length mismatch");
    const std::size_t dim = key_encodings.front().size();
    std::vector<std::size_t> keep;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < key_encodings.size(); ++i) {
        const auto& enc = key_encodings[i];
        if (enc.size() != dim)
            throw InputError("build_key_memory: encoding dimension mismatch");
        auto& bucket = buckets[hash_encoding(enc)];
        bool dup = false;
        for (std::size_t slot : bucket) {
            if (encoding_equal(key_encodings[keep[slot]], enc)) {
                dup = true;
                break;
            }
        }
        if (!dup) {
            bucket.push_back(keep.size());
            keep.push_back(i);
        }
    }
    Matrix rows(keep.size(), dim);
    std::vector<std::string> row_meta;
    row_meta.reserve(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto& src = key_encodings[keep[k]];
        for (std::size_t j = 0; j < dim; ++j) rows(k, j) = src[j];
        row_meta.push_back(meta[keep[k]]);
    }
    return KeyMemory(std::move(rows), std::move(row_meta));
}

/// argmin_k ||z - row_k||; ties broken by lowest index.
inline std::size_t nearest_slot(std::span<const double> z, const KeyMemory& km) {
    if (z.size() != km.dim()) throw InputError("nearest_slot: dimension mismatch");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < km.num_slots(); ++k) {
        const double d = squared_distance(z, km.row(k));
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

/// How the key encoding is derived from a text: its n-word prefix, or the
/// full text.
struct KeyMode {
    enum class Kind { prefix, full } kind = Kind::prefix;
    std::size_t n_words = 4;

    static KeyMode prefix(std::size_t n_words = 4) { return {Kind::prefix, n_words}; }
    static KeyMode full() { return {Kind::full, 0}; }
    bool is_prefix() const { return kind == Kind::prefix; }

    std::string key_text(std::string_view text) const {
        const std::string norm = normalize_text(text);
        return is_prefix() ? prefix_of(norm, n_words) : norm;
    }
};

/// Reading/writing key for `text`: encode its key text, locate the nearest
/// key-memory row, return the one-hot key. Deterministic.
template <TextCodec C>
KeyVector derive_key(std::string_view text, KeyMode mode, C& codec, const KeyMemory& km) {
    const LatentVector& enc = codec.encode(mode.key_text(text));
    return one_hot_key(nearest_slot(enc, km), km.num_slots());
}

} // namespace recall
