#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "recall/codec.hpp"
#include "recall/errors.hpp"
#include "recall/keys.hpp"
#include "recall/memory.hpp"
#include "recall/text.hpp"

namespace recall {

/// One context's worth of segments plus the trailing query. The query is
/// never written to memory; it only produces the reading key.
struct Episode {
    std::vector<std::string> segments;
    std::string query;
    KeyMode key_mode = KeyMode::prefix(4);
};

struct EpisodeOptions {
    MemoryTier memory_tier = MemoryTier::host;
};

struct RecallResult {
    LatentVector readout;
    std::string decoded;
    std::size_t slot_used = 0;
    std::size_t prefix_collisions = 0;
    TransferLedger ledger;
};

/// Splits text into sentences: a sentence ends at a run of terminal
/// punctuation (. ! ?) followed by whitespace or end of text, and keeps the
/// punctuation. A trailing fragment without terminal punctuation is kept.
/// Each sentence is normalized; text with no sentences is an error.
inline std::vector<std::string> segment_context(std::string_view text) {
    if (text.empty()) throw InputError("segment_context: empty text");
    std::vector<std::string> out;
    auto is_terminal = [](char ch) { return ch == '.' || ch == '!' || ch == '?'; };

    std::size_t start = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_terminal(text[i])) {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < text.size() && is_terminal(text[j])) ++j;
        if (j < text.size() && !is_space(text[j])) {
            i = j; // mid-token punctuation, e.g. "3.14"
            continue;
        }
        std::string sentence = normalize_text(text.substr(start, j - start));
        if (!sentence.empty()) out.push_back(std::move(sentence));
        start = j;
        i = j;
    }
    std::string tail = normalize_text(text.substr(start));
    if (!tail.empty()) out.push_back(std::move(tail));
    if (out.empty()) throw InputError("segment_context: no sentences");
    return out;
}

namespace detail {

/// Transfer accounting model: encodings are produced device-side and cross
/// to the host once per encode the pipeline consumes (full segment
/// encodings, key encodings in prefix mode, and the query key); the readout
/// crosses back once per query. Only vector/matrix bytes are counted; the
/// device holds one transient vector at a time unless the memory matrix
/// itself is placed there.
template <TextCodec C>
const LatentVector& encode_crossing(C& codec, std::string_view text,
                                    TransferLedger& ledger) {
    const LatentVector& v = codec.encode(text);
    const std::uint64_t bytes = v.size() * kScalarBytes;
    ledger.device_alloc(bytes);
    ledger.device_to_host(bytes);
    ledger.device_free(bytes);
    return v;
}

} // namespace detail

/// The full inference flow over one episode: dedup segments, encode, build
/// the key memory, write the value memory (fast path when eligible), derive
/// the reading key from the query, read, decode. Deterministic.
template <TextCodec C>
RecallResult run_episode(const Episode& ep, C& codec, const EpisodeOptions& options = {}) {
    if (ep.segments.empty()) throw InputError("run_episode: no segments");
    const std::string query = normalize_text(ep.query);
    if (query.empty()) throw InputError("run_episode: empty query");

    RecallResult result;
    TransferLedger& ledger = result.ledger;

    // distinct normalized segments, first-occurrence order
    std::vector<std::string> unique;
    {
        std::unordered_set<std::string> seen;
        for (const auto& raw : ep.segments) {
            std::string norm = normalize_text(raw);
            if (norm.empty()) throw InputError("run_episode: blank segment");
            if (seen.insert(norm).second) unique.push_back(std::move(norm));
        }
    }

    // encodings to write, and the key encodings that address them
    const std::size_t n = unique.size();
    Matrix z(n, codec.dim());
    std::vector<LatentVector> key_encodings;
    std::vector<std::string> key_texts;
    key_encodings.reserve(n);
    key_texts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const LatentVector& enc = detail::encode_crossing(codec, unique[i], ledger);
        std::copy(enc.begin(), enc.end(), z.row(i).begin());
        if (ep.key_mode.is_prefix()) {
            std::string kt = ep.key_mode.key_text(unique[i]);
            key_encodings.push_back(detail::encode_crossing(codec, kt, ledger));
            key_texts.push_back(std::move(kt));
        } else {
            key_encodings.push_back(enc); // full text: same encoding, no extra crossing
            key_texts.push_back(unique[i]);
        }
    }

    KeyMemory km = build_key_memory(key_encodings, key_texts);
    result.prefix_collisions = n - km.num_slots();

    std::vector<KeyVector> writing_keys;
    writing_keys.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto slot = km.slot_of(key_texts[i]);
        const std::size_t k = slot ? *slot : nearest_slot(key_encodings[i], km);
        writing_keys.push_back(one_hot_key(k, km.num_slots()));
    }

    MemoryMatrix memory =
        write_onehot_fast(WriteBatch::one_hot(std::move(z), std::move(writing_keys))).memory;
    if (options.memory_tier == MemoryTier::device)
        memory = place(std::move(memory), MemoryTier::device, ledger);

    // the query is read, never written
    const std::string query_key_text = ep.key_mode.key_text(query);
    const LatentVector& query_enc = detail::encode_crossing(codec, query_key_text, ledger);
    const KeyVector reading_key = one_hot_key(nearest_slot(query_enc, km), km.num_slots());

    result.readout = read(reading_key, memory);
    result.slot_used = reading_key.hot_index;
    if (memory.tier == MemoryTier::host) {
        // readout moves to the device for decoding
        const std::uint64_t bytes = result.readout.size() * kScalarBytes;
        ledger.host_to_device(bytes);
        ledger.device_alloc(bytes);
        ledger.device_free(bytes);
    }
    result.decoded = codec.decode(result.readout);
    return result;
}

/// True iff running the episode with its segments permuted yields the same
/// decoded text and a bitwise-identical readout.
template <TextCodec C>
bool recall_ordering_check(const Episode& ep, const std::vector<std::size_t>& permutation,
                           C& codec) {
    if (permutation.size() != ep.segments.size())
        throw InputError("recall_ordering_check: permutation size mismatch");
    std::vector<bool> used(permutation.size(), false);
    for (std::size_t idx : permutation) {
        if (idx >= permutation.size() || used[idx])
            throw InputError("recall_ordering_check: not a permutation");
        used[idx] = true;
    }

    Episode permuted = ep;
    for (std::size_t i = 0; i < permutation.size(); ++i)
        permuted.segments[i] = ep.segments[permutation[i]];

    const RecallResult base = run_episode(ep, codec);
    const RecallResult other = run_episode(permuted, codec);
    return base.decoded == other.decoded &&
           encoding_equal(base.readout, other.readout);
}

} // namespace recall
