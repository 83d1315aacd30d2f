// Command-line harness: passkey and needle recall trials over the
// associative-memory pipeline, plus config-driven trial grids.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "recall/grid.hpp"

namespace {

std::vector<std::size_t> parse_size_list(const std::string& csv, const char* what) {
    std::vector<std::size_t> out;
    for (const auto& piece : recall::detail::split_list(csv)) {
        if (piece.empty()) throw recall::InputError(std::string(what) + ": empty list entry");
        out.push_back(recall::detail::parse_size(piece));
    }
    if (out.empty()) throw recall::InputError(std::string(what) + ": empty list");
    return out;
}

void emit(const std::vector<recall::CellReport>& cells, const std::string& report_path) {
    std::cout << recall::format_report_table(cells);
    if (!report_path.empty()) {
        recall::write_report_file(cells, report_path);
        std::cout << "report written to " << report_path << "\n";
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"external associative memory recall harness"};
    app.require_subcommand(1);

    // --- passkey ---
    auto* passkey = app.add_subcommand("passkey", "hidden-passkey recall trials");
    std::string pk_digits = "4";
    std::size_t pk_trials = 10;
    std::string pk_tokens = "10000";
    std::size_t pk_prefix_words = 4;
    std::uint64_t pk_seed = 0;
    std::string pk_report;
    passkey->add_option("--digits", pk_digits, "passkey digit counts, comma-separated (3-8)");
    passkey->add_option("--trials", pk_trials, "random passkeys per cell");
    passkey->add_option("--context-tokens", pk_tokens,
                        "approximate context lengths in whitespace tokens, comma-separated");
    passkey->add_option("--prefix-words", pk_prefix_words, "words in the key prefix");
    passkey->add_option("--seed", pk_seed, "master seed");
    passkey->add_option("--report", pk_report, "JSON-lines report path");

    // --- needle ---
    auto* needle = app.add_subcommand("needle", "needle-in-a-haystack recall trials");
    std::string nd_corpus_dir;
    std::size_t nd_synthetic = 0;
    std::string nd_needle{recall::kSfNeedle};
    std::string nd_query{recall::kSfQuery};
    std::string nd_expected{recall::kSfExpected};
    double nd_position = -1.0;
    std::size_t nd_sweep = 0;
    std::string nd_key_mode = "prefix";
    std::uint64_t nd_seed = 0;
    std::string nd_report;
    auto* corpus_opt = needle->add_option("--corpus", nd_corpus_dir,
                                          "directory of plain-text haystack files");
    auto* synth_opt = needle->add_option("--synthetic", nd_synthetic,
                                         "use N generated distractor sentences instead");
    corpus_opt->excludes(synth_opt);
    needle->add_option("--needle", nd_needle, "needle sentence");
    needle->add_option("--query", nd_query, "trailing query");
    needle->add_option("--expected", nd_expected, "expected completion");
    auto* pos_opt = needle->add_option("--position", nd_position,
                                       "needle position as a fraction in [0,1]");
    auto* sweep_opt =
        needle->add_option("--sweep", nd_sweep, "sweep K uniform positions (default 10)");
    pos_opt->excludes(sweep_opt);
    needle->add_option("--key-mode", nd_key_mode, "prefix | full")
        ->check(CLI::IsMember({"prefix", "full"}));
    needle->add_option("--seed", nd_seed, "master seed");
    needle->add_option("--report", nd_report, "JSON-lines report path");

    // --- grid ---
    auto* grid = app.add_subcommand("grid", "run a trial grid from a config file");
    std::string grid_config_path;
    std::string grid_report;
    grid->add_option("--config", grid_config_path, "grid config file")->required();
    grid->add_option("--report", grid_report, "JSON-lines report path (overrides stdout-only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (passkey->parsed()) {
            recall::GridConfig cfg;
            cfg.task = recall::GridConfig::Task::passkey;
            cfg.seed = pk_seed;
            cfg.trials = pk_trials;
            cfg.prefix_words = pk_prefix_words;
            cfg.key_modes = {recall::KeyMode::prefix(pk_prefix_words)};
            cfg.digits = parse_size_list(pk_digits, "--digits");
            cfg.context_tokens = parse_size_list(pk_tokens, "--context-tokens");
            for (std::size_t d : cfg.digits)
                if (d < 3 || d > 8) throw recall::InputError("--digits: values must be 3-8");
            emit(recall::run_grid(cfg, &std::cerr), pk_report);
            return 0;
        }
        if (needle->parsed()) {
            recall::GridConfig cfg;
            cfg.task = recall::GridConfig::Task::needle;
            cfg.seed = nd_seed;
            cfg.trials = 1;
            cfg.needle = nd_needle;
            cfg.query = nd_query;
            cfg.expected = nd_expected;
            cfg.key_modes = {nd_key_mode == "full" ? recall::KeyMode::full()
                                                   : recall::KeyMode::prefix(4)};
            if (!nd_corpus_dir.empty()) cfg.corpus = "dir:" + nd_corpus_dir;
            else if (nd_synthetic > 0) cfg.corpus = "synthetic:" + std::to_string(nd_synthetic);
            else cfg.corpus = "synthetic:1000";

            cfg.positions.clear();
            if (nd_position >= 0.0) {
                cfg.positions.push_back(nd_position);
            } else {
                const std::size_t sweep = nd_sweep ? nd_sweep : 10;
                for (std::size_t i = 0; i < sweep; ++i)
                    cfg.positions.push_back(sweep == 1 ? 0.5 : double(i) / double(sweep - 1));
            }
            for (double p : cfg.positions)
                if (!(p >= 0.0 && p <= 1.0))
                    throw recall::InputError("--position: fraction must lie in [0,1]");
            emit(recall::run_grid(cfg, &std::cerr), nd_report);
            return 0;
        }
        // grid
        const recall::GridConfig cfg = recall::parse_grid_config_file(grid_config_path);
        const auto cells = recall::run_grid(cfg, &std::cerr);
        std::cout << recall::format_report_table(cells);
        if (!grid_report.empty()) {
            recall::write_report_file(cells, grid_report);
            std::cout << "report written to " << grid_report << "\n";
        }
        return 0;
    } catch (const recall::IOError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const recall::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
