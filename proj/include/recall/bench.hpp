#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recall/errors.hpp"
#include "recall/keys.hpp"
#include "recall/pipeline.hpp"
#include "recall/rng.hpp"
#include "recall/text.hpp"

namespace recall {

// ---------------------------------------------------------------------------
// passkey protocol

inline constexpr std::string_view kPasskeyPreamble =
    "There is an important info hidden inside a lot of irrelevant text. "
    "Find it and memorize them. "
    "I will quiz you about the important information there.";
inline constexpr std::string_view kFillerBlock =
    "The grass is green. The sky is blue. The sun is yellow. "
    "Here we go. There and back again.";
inline constexpr std::string_view kPasskeyQuestion = "What is the pass key?";
inline constexpr std::string_view kPasskeyQuery = "The pass key is";

inline bool is_digit_string(std::string_view s, std::size_t min_len, std::size_t max_len) {
    if (s.size() < min_len || s.size() > max_len) return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

struct PasskeySpec {
    std::string passkey;                       // 3-8 digits
    std::size_t x_repeats = 1;                 // filler blocks before the passkey
    std::size_t y_repeats = 1;                 // filler blocks after it
    std::optional<std::size_t> target_tokens;  // overrides x/y when set

    void validate() const {
        if (!is_digit_string(passkey, 3, 8))
            throw InputError("PasskeySpec: passkey must be 3-8 digits");
    }
};

namespace detail {

/// Whitespace-token cost of the fixed template parts (query included) and of
/// one filler block.
inline std::size_t passkey_base_tokens() {
    return token_count(kPasskeyPreamble) + token_count(kPasskeyQuestion) +
           token_count(kPasskeyQuery) + 12; // the three passkey sentences
}

inline std::size_t filler_tokens() { return token_count(kFillerBlock); }

/// x/y for the spec: smallest even split reaching at least the target.
inline std::pair<std::size_t, std::size_t> resolve_repeats(const PasskeySpec& spec) {
    if (!spec.target_tokens) return {spec.x_repeats, spec.y_repeats};
    const std::size_t base = passkey_base_tokens();
    const std::size_t per = filler_tokens();
    const std::size_t target = *spec.target_tokens;
    const std::size_t total =
        target <= base ? 0 : (target - base + per - 1) / per;
    return {total - total / 2, total / 2};
}

} // namespace detail

/// The full context text: preamble, x filler blocks, the passkey sentences,
/// y filler blocks, the question. The trailing query is not part of the text
/// (it becomes Episode.query).
inline std::string passkey_context_text(const PasskeySpec& spec) {
    spec.validate();
    const auto [x, y] = detail::resolve_repeats(spec);
    const std::string passkey_block =
        "The pass key is " + spec.passkey + ". Remember it. " + spec.passkey +
        " is the pass key.";

    std::string text;
    text.reserve(kPasskeyPreamble.size() + passkey_block.size() +
                 (x + y) * (kFillerBlock.size() + 1) + kPasskeyQuestion.size() + 16);
    text.append(kPasskeyPreamble);
    for (std::size_t i = 0; i < x; ++i) {
        text.push_back(' ');
        text.append(kFillerBlock);
    }
    text.push_back(' ');
    text.append(passkey_block);
    for (std::size_t i = 0; i < y; ++i) {
        text.push_back(' ');
        text.append(kFillerBlock);
    }
    text.push_back(' ');
    text.append(kPasskeyQuestion);
    return text;
}

/// Context token count, query included.
inline std::size_t passkey_context_tokens(const PasskeySpec& spec) {
    const auto [x, y] = detail::resolve_repeats(spec);
    return detail::passkey_base_tokens() + (x + y) * detail::filler_tokens();
}

inline Episode gen_passkey_context(const PasskeySpec& spec,
                                   KeyMode key_mode = KeyMode::prefix(4)) {
    Episode ep;
    ep.segments = segment_context(passkey_context_text(spec));
    ep.query = std::string(kPasskeyQuery);
    ep.key_mode = key_mode;
    return ep;
}

// ---------------------------------------------------------------------------
// needle protocol

inline constexpr std::string_view kSfNeedle =
    "The best thing to do in San Francisco is eat a sandwich and sit in "
    "Dolores Park on a sunny day.";
inline constexpr std::string_view kSfQuery = "The best thing to do in San Francisco is";
inline constexpr std::string_view kSfExpected =
    "eat a sandwich and sit in Dolores Park on a sunny day.";

struct NeedleSpec {
    std::string needle;
    std::string query;
    std::string expected;
    double position_fraction = 0.5; // 0 = front of the corpus, 1 = end

    void validate() const {
        if (normalize_text(needle).empty()) throw InputError("NeedleSpec: empty needle");
        if (normalize_text(query).empty()) throw InputError("NeedleSpec: empty query");
        if (expected.empty()) throw InputError("NeedleSpec: empty expected");
        if (!(position_fraction >= 0.0 && position_fraction <= 1.0))
            throw InputError("NeedleSpec: position_fraction outside [0,1]");
    }
};

/// Corpus sentences with the needle inserted at the fraction's index.
inline Episode gen_needle_trial(const NeedleSpec& spec,
                                const std::vector<std::string>& corpus_sentences,
                                KeyMode key_mode = KeyMode::prefix(4)) {
    spec.validate();
    if (corpus_sentences.empty()) throw IOError("gen_needle_trial: empty corpus");
    const std::size_t n = corpus_sentences.size();
    const std::size_t index = std::min(
        n, static_cast<std::size_t>(std::llround(spec.position_fraction * double(n))));

    Episode ep;
    ep.segments.reserve(n + 1);
    ep.segments.insert(ep.segments.end(), corpus_sentences.begin(),
                       corpus_sentences.begin() + index);
    ep.segments.push_back(spec.needle);
    ep.segments.insert(ep.segments.end(), corpus_sentences.begin() + index,
                       corpus_sentences.end());
    ep.query = spec.query;
    ep.key_mode = key_mode;
    return ep;
}

/// Seeded synthetic distractor sentences: pairwise distinct, with distinct
/// four-word prefixes, so they never collide with each other or with the
/// stock needles.
inline std::vector<std::string> synthetic_haystack(std::size_t n, std::uint64_t seed) {
    static constexpr std::string_view adjectives[] = {
        "quiet", "bright", "heavy", "stale", "curious", "plain", "amber", "rusty"};
    static constexpr std::string_view nouns[] = {
        "lantern", "ledger", "orchard", "harbor", "compass", "teapot", "bridge", "meadow"};
    SplitMix64 rng(mix_seed(seed, 0x68617973746b)); // "haystk"
    std::vector<std::string> out;
    out.reserve(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const auto adj = adjectives[rng.next_below(std::size(adjectives))];
        const auto noun = nouns[rng.next_below(std::size(nouns))];
        const std::string num = std::to_string(i);
        std::string s;
        switch (i % 4) {
            case 0: s = "Filler note " + num + " records a "; break;
            case 1: s = "Observation " + num + " lists the "; break;
            case 2: s = "Entry " + num + " describes a "; break;
            default: s = "Reminder " + num + " mentions the "; break;
        }
        s.append(adj);
        s.push_back(' ');
        s.append(noun);
        s.push_back('.');
        out.push_back(std::move(s));
    }
    return out;
}

/// All regular files under `dir`, in lexicographic filename order,
/// concatenated and split into sentences.
inline std::vector<std::string> load_corpus_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IOError("load_corpus_dir: not a directory: " + dir);

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
    }
    if (ec) throw IOError("load_corpus_dir: cannot list " + dir);
    if (files.empty()) throw IOError("load_corpus_dir: no files in " + dir);
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

    std::string text;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw IOError("load_corpus_dir: cannot read " + f.string());
        text.append(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
        text.push_back('\n');
    }
    if (normalize_text(text).empty()) throw IOError("load_corpus_dir: corpus is empty");
    return segment_context(text);
}

// ---------------------------------------------------------------------------
// metrics

/// Presence check: `expected` appears as a substring of `decoded`.
inline bool score_exact(std::string_view decoded, std::string_view expected) {
    if (expected.empty()) throw InputError("score_exact: empty expected");
    return decoded.find(expected) != std::string_view::npos;
}

/// Tokens for rougeL: whitespace-split, case-folded, punctuation stripped
/// from token edges; tokens that vanish are dropped.
inline std::vector<std::string> rouge_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (auto raw : whitespace_tokens(text)) {
        std::size_t b = 0;
        std::size_t e = raw.size();
        while (b < e && std::ispunct(static_cast<unsigned char>(raw[b]))) ++b;
        while (e > b && std::ispunct(static_cast<unsigned char>(raw[e - 1]))) --e;
        if (b == e) continue;
        std::string tok(raw.substr(b, e - b));
        for (char& ch : tok) ch = char(std::tolower(static_cast<unsigned char>(ch)));
        out.push_back(std::move(tok));
    }
    return out;
}

/// rougeL recall: |LCS(decoded, expected)| / |expected|, over rouge tokens.
inline double score_rouge_l_recall(std::string_view decoded, std::string_view expected) {
    const std::vector<std::string> ref = rouge_tokens(expected);
    if (ref.empty()) throw InputError("score_rouge_l_recall: expected has no words");
    const std::vector<std::string> cand = rouge_tokens(decoded);
    if (cand.empty()) return 0.0;

    // two-row LCS
    std::vector<std::size_t> prev(ref.size() + 1, 0);
    std::vector<std::size_t> cur(ref.size() + 1, 0);
    for (std::size_t i = 1; i <= cand.size(); ++i) {
        for (std::size_t j = 1; j <= ref.size(); ++j) {
            cur[j] = cand[i - 1] == ref[j - 1] ? prev[j - 1] + 1
                                               : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return double(prev[ref.size()]) / double(ref.size());
}

} // namespace recall
