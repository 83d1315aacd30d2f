#pragma once

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "recall/bench.hpp"
#include "recall/codec.hpp"
#include "recall/errors.hpp"
#include "recall/pipeline.hpp"
#include "recall/rng.hpp"

namespace recall {

/// One grid cell's aggregate. Serialized fields are exactly these, in this
/// order, so report files are byte-stable run to run.
struct TrialReport {
    std::uint64_t trials = 0;
    std::uint64_t successes = 0;
    double recall_rate = 0.0;
    std::optional<double> rouge_l;
    std::uint64_t context_tokens = 0;
    TransferLedger ledger;
    std::uint64_t collisions = 0;
};

struct CellReport {
    std::string label; // human-readable cell description (table only)
    TrialReport report;
};

struct GridConfig {
    enum class Task { passkey, needle };

    Task task = Task::passkey;
    std::uint64_t seed = 0;
    std::size_t trials = 1;
    std::size_t prefix_words = 4;
    std::vector<KeyMode> key_modes = {KeyMode::prefix(4)};

    // passkey axes
    std::vector<std::size_t> digits;         // needle: optional {number} axis
    std::vector<std::size_t> context_tokens; // passkey only

    // needle settings
    std::string corpus;   // "synthetic:N" or "dir:PATH"
    std::string needle;   // may contain {number}
    std::string query;
    std::string expected; // may contain {number}
    std::vector<double> positions = {0.5};

    CodecConfig codec;
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view s, char delim = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto end = s.find(delim, start);
        const auto piece = s.substr(start, end == std::string_view::npos ? s.size() - start
                                                                         : end - start);
        out.push_back(normalize_text(piece));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

inline std::size_t parse_size(std::string_view s) {
    std::size_t v = 0;
    if (s.empty()) throw InputError("grid config: empty integer");
    for (char c : s) {
        if (c < '0' || c > '9') throw InputError("grid config: bad integer '" + std::string(s) + "'");
        v = v * 10 + std::size_t(c - '0');
    }
    return v;
}

inline double parse_fraction(std::string_view s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(std::string(s), &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw InputError("grid config: bad number '" + std::string(s) + "'");
    }
}

inline std::string substitute_number(std::string_view tpl, std::string_view number) {
    std::string out;
    std::size_t start = 0;
    while (true) {
        const auto pos = tpl.find("{number}", start);
        if (pos == std::string_view::npos) {
            out.append(tpl.substr(start));
            return out;
        }
        out.append(tpl.substr(start, pos - start));
        out.append(number);
        start = pos + 8;
    }
}

inline std::string random_digits(std::size_t count, SplitMix64& rng) {
    std::string s;
    s.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        s.push_back(char('0' + rng.next_below(10)));
    return s;
}

} // namespace detail

/// Key-value grid configuration; one "key = value" per line, '#' comments,
/// list axes comma-separated. See the README for the schema.
inline GridConfig parse_grid_config(std::istream& in) {
    GridConfig cfg;
    cfg.key_modes.clear();
    std::vector<std::string> key_mode_names;
    std::string line;
    std::size_t lineno = 0;

    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string trimmed = normalize_text(line);
        if (trimmed.empty()) continue;
        const auto eq = trimmed.find('=');
        if (eq == std::string::npos)
            throw InputError("grid config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = normalize_text(trimmed.substr(0, eq));
        const std::string value = normalize_text(trimmed.substr(eq + 1));
        if (key.empty() || value.empty())
            throw InputError("grid config line " + std::to_string(lineno) + ": empty key or value");

        if (key == "task") {
            if (value == "passkey") cfg.task = GridConfig::Task::passkey;
            else if (value == "needle") cfg.task = GridConfig::Task::needle;
            else throw InputError("grid config: unknown task '" + value + "'");
        } else if (key == "seed") {
            cfg.seed = detail::parse_size(value);
        } else if (key == "trials") {
            cfg.trials = detail::parse_size(value);
        } else if (key == "prefix_words") {
            cfg.prefix_words = detail::parse_size(value);
            if (cfg.prefix_words == 0) throw InputError("grid config: prefix_words must be >= 1");
        } else if (key == "key_mode") {
            key_mode_names = detail::split_list(value);
        } else if (key == "digits") {
            cfg.digits.clear();
            for (const auto& d : detail::split_list(value)) cfg.digits.push_back(detail::parse_size(d));
        } else if (key == "context_tokens") {
            cfg.context_tokens.clear();
            for (const auto& t : detail::split_list(value))
                cfg.context_tokens.push_back(detail::parse_size(t));
        } else if (key == "corpus") {
            cfg.corpus = value;
        } else if (key == "needle") {
            cfg.needle = value;
        } else if (key == "query") {
            cfg.query = value;
        } else if (key == "expected") {
            cfg.expected = value;
        } else if (key == "positions") {
            cfg.positions.clear();
            for (const auto& p : detail::split_list(value))
                cfg.positions.push_back(detail::parse_fraction(p));
        } else if (key == "latent_dim") {
            cfg.codec.dim = detail::parse_size(value);
            if (cfg.codec.dim == 0) throw InputError("grid config: latent_dim must be >= 1");
        } else {
            throw InputError("grid config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }

    if (key_mode_names.empty()) key_mode_names = {"prefix"};
    for (const auto& name : key_mode_names) {
        if (name == "prefix") cfg.key_modes.push_back(KeyMode::prefix(cfg.prefix_words));
        else if (name == "full") cfg.key_modes.push_back(KeyMode::full());
        else throw InputError("grid config: unknown key_mode '" + name + "'");
    }

    if (cfg.task == GridConfig::Task::passkey) {
        if (cfg.digits.empty()) cfg.digits = {4};
        if (cfg.context_tokens.empty()) cfg.context_tokens = {10000};
        for (std::size_t d : cfg.digits)
            if (d < 3 || d > 8) throw InputError("grid config: passkey digits must be 3-8");
    } else {
        if (cfg.corpus.empty()) cfg.corpus = "synthetic:1000";
        if (cfg.needle.empty() || cfg.query.empty() || cfg.expected.empty())
            throw InputError("grid config: needle task requires needle, query and expected");
        for (double p : cfg.positions)
            if (!(p >= 0.0 && p <= 1.0))
                throw InputError("grid config: positions must lie in [0,1]");
    }
    return cfg;
}

// an unreadable config is a config error (exit 2); IOError stays reserved
// for corpus ingestion (exit 3)
inline GridConfig parse_grid_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("grid config: cannot open " + path);
    return parse_grid_config(in);
}

/// Sentences for a needle corpus spec: "synthetic:N" or "dir:PATH".
inline std::vector<std::string> resolve_corpus(const std::string& spec, std::uint64_t seed) {
    if (spec.rfind("synthetic:", 0) == 0) {
        const std::size_t n = detail::parse_size(std::string_view(spec).substr(10));
        if (n == 0) throw InputError("corpus: synthetic size must be >= 1");
        return synthetic_haystack(n, seed);
    }
    if (spec.rfind("dir:", 0) == 0) return load_corpus_dir(spec.substr(4));
    throw InputError("corpus: expected 'synthetic:N' or 'dir:PATH', got '" + spec + "'");
}

namespace detail {

struct TrialOutcome {
    bool success = false;
    double rouge = 0.0;
    std::size_t context_tokens = 0;
    RecallResult result;
};

inline void accumulate(TrialReport& report, const TrialOutcome& t, bool with_rouge) {
    report.trials += 1;
    report.successes += t.success ? 1 : 0;
    if (with_rouge) report.rouge_l = report.rouge_l.value_or(0.0) + t.rouge;
    report.context_tokens = t.context_tokens;
    report.ledger.merge(t.result.ledger);
    report.collisions += t.result.prefix_collisions;
}

inline void finalize(TrialReport& report) {
    report.recall_rate =
        report.trials ? double(report.successes) / double(report.trials) : 0.0;
    if (report.rouge_l)
        report.rouge_l = report.trials ? *report.rouge_l / double(report.trials) : 0.0;
}

} // namespace detail

/// Runs the whole grid. Deterministic for a given config: per-trial seeds
/// derive from (seed, cell index, trial index) only. A trial that throws is
/// reported to `errors` and skipped; the grid never aborts.
inline std::vector<CellReport> run_grid(const GridConfig& cfg,
                                        std::ostream* errors = nullptr) {
    std::vector<CellReport> cells;
    if (cfg.trials == 0) return cells;

    auto report_failure = [&](const std::string& label, std::size_t trial,
                              const std::exception& e) {
        if (errors)
            (*errors) << "trial failed: " << label << " trial " << trial << ": " << e.what()
                      << '\n';
    };

    if (cfg.task == GridConfig::Task::passkey) {
        std::size_t cell_index = 0;
        for (std::size_t d : cfg.digits) {
            for (std::size_t tokens : cfg.context_tokens) {
                for (const KeyMode& mode : cfg.key_modes) {
                    CellReport cell;
                    cell.label = "passkey digits=" + std::to_string(d) +
                                 " tokens=" + std::to_string(tokens) +
                                 (mode.is_prefix() ? " mode=prefix" : " mode=full");
                    CodecConfig cc = cfg.codec;
                    cc.seed = mix_seed(cfg.seed, 0xc0dec);
                    Codec codec(cc);
                    for (std::size_t t = 0; t < cfg.trials; ++t) {
                        try {
                            SplitMix64 rng(mix_seed(mix_seed(cfg.seed, cell_index), t));
                            PasskeySpec spec;
                            spec.passkey = detail::random_digits(d, rng);
                            spec.target_tokens = tokens;
                            detail::TrialOutcome out;
                            out.context_tokens = passkey_context_tokens(spec);
                            out.result = run_episode(gen_passkey_context(spec, mode), codec);
                            out.success = score_exact(out.result.decoded, spec.passkey);
                            detail::accumulate(cell.report, out, /*with_rouge=*/false);
                        } catch (const std::exception& e) {
                            report_failure(cell.label, t, e);
                        }
                    }
                    detail::finalize(cell.report);
                    cells.push_back(std::move(cell));
                    ++cell_index;
                }
            }
        }
        return cells;
    }

    // needle task
    const std::vector<std::string> corpus = resolve_corpus(cfg.corpus, cfg.seed);
    const std::vector<std::size_t> digit_axis =
        cfg.digits.empty() ? std::vector<std::size_t>{0} : cfg.digits;

    std::size_t cell_index = 0;
    for (std::size_t d : digit_axis) {
        for (const KeyMode& mode : cfg.key_modes) {
            CellReport cell;
            cell.label = "needle" + (d ? " digits=" + std::to_string(d) : std::string()) +
                         (mode.is_prefix() ? " mode=prefix" : " mode=full");
            CodecConfig cc = cfg.codec;
            cc.seed = mix_seed(cfg.seed, 0xc0dec);
            Codec codec(cc);
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                SplitMix64 rng(mix_seed(mix_seed(cfg.seed, cell_index), t));
                const std::string number = d ? detail::random_digits(d, rng) : std::string();
                for (std::size_t p = 0; p < cfg.positions.size(); ++p) {
                    try {
                        NeedleSpec spec;
                        spec.needle = detail::substitute_number(cfg.needle, number);
                        spec.query = detail::substitute_number(cfg.query, number);
                        spec.expected = detail::substitute_number(cfg.expected, number);
                        spec.position_fraction = cfg.positions[p];
                        Episode ep = gen_needle_trial(spec, corpus, mode);
                        detail::TrialOutcome out;
                        out.context_tokens = token_count(ep.query);
                        for (const auto& s : ep.segments) out.context_tokens += token_count(s);
                        out.result = run_episode(ep, codec);
                        out.success = score_exact(out.result.decoded, spec.expected);
                        out.rouge = score_rouge_l_recall(out.result.decoded, spec.expected);
                        detail::accumulate(cell.report, out, /*with_rouge=*/true);
                    } catch (const std::exception& e) {
                        report_failure(cell.label, t * cfg.positions.size() + p, e);
                    }
                }
            }
            detail::finalize(cell.report);
            cells.push_back(std::move(cell));
            ++cell_index;
        }
    }
    return cells;
}

// ---------------------------------------------------------------------------
// report output

inline nlohmann::ordered_json report_to_json(const TrialReport& r) {
    nlohmann::ordered_json j;
    j["trials"] = r.trials;
    j["successes"] = r.successes;
    j["recall_rate"] = r.recall_rate;
    if (r.rouge_l) j["rouge_l"] = *r.rouge_l;
    j["context_tokens"] = r.context_tokens;
    j["ledger"] = {{"bytes_host_to_device", r.ledger.bytes_host_to_device()},
                   {"bytes_device_to_host", r.ledger.bytes_device_to_host()},
                   {"peak_device_bytes", r.ledger.peak_device_bytes()}};
    j["collisions"] = r.collisions;
    return j;
}

/// JSON-lines report: one TrialReport per line.
inline void write_report_file(const std::vector<CellReport>& cells, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("write_report_file: cannot open " + path);
    for (const auto& c : cells) out << report_to_json(c.report).dump() << '\n';
    if (!out) throw IOError("write_report_file: write failed for " + path);
}

/// Aligned human-readable table.
inline std::string format_report_table(const std::vector<CellReport>& cells) {
    std::vector<std::vector<std::string>> rows;
    rows.push_back({"cell", "trials", "recall", "rouge_l", "context_tokens", "collisions",
                    "peak_device_bytes"});
    for (const auto& c : cells) {
        char recall[32], rouge[32];
        std::snprintf(recall, sizeof(recall), "%.3f", c.report.recall_rate);
        if (c.report.rouge_l) std::snprintf(rouge, sizeof(rouge), "%.3f", *c.report.rouge_l);
        rows.push_back({c.label, std::to_string(c.report.trials), recall,
                        c.report.rouge_l ? rouge : "-", std::to_string(c.report.context_tokens),
                        std::to_string(c.report.collisions),
                        std::to_string(c.report.ledger.peak_device_bytes())});
    }
    std::vector<std::size_t> widths(rows.front().size(), 0);
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
    std::string out;
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += row[i];
            if (i + 1 < row.size()) out.append(widths[i] - row[i].size() + 2, ' ');
        }
        out.push_back('\n');
    }
    return out;
}

} // namespace recall
