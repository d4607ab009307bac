// ptbench: desk-scale post-training benchmark driver.
//
// Subcommands: sweep, analyze, report, audit-determinism, list-algorithms,
// eval, train. Configuration comes from flat key-value files plus --set
// overrides; results land in a JSONL store that analyze/report consume.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptbench/audit.hpp"
#include "ptbench/evaluator.hpp"
#include "ptbench/kernels.hpp"
#include "ptbench/losses.hpp"
#include "ptbench/reporting.hpp"
#include "ptbench/store.hpp"
#include "ptbench/sweep.hpp"
#include "ptbench/trainer.hpp"

namespace fs = std::filesystem;
using namespace ptbench;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

TrainConfig load_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = config_from_text(read_file(config_path));
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        }
        apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
    std::vector<std::uint64_t> seeds;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
    }
    return seeds;
}

std::vector<std::string> parse_names(const std::string& csv) {
    std::vector<std::string> names;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) names.push_back(tok);
    }
    return names;
}

int cmd_list_algorithms() {
    const auto& reg = LossRegistry::global();
    std::printf("%-12s %-24s %-40s %-4s %s\n", "id", "category", "modification", "ref",
                "defaults");
    for (const auto* info : reg.list()) {
        std::string defaults;
        for (const auto& [k, v] : info->defaults) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%s%s=%g", defaults.empty() ? "" : " ", k.c_str(), v);
            defaults += buf;
        }
        for (const auto& [k, v] : info->link_defaults) {
            defaults += (defaults.empty() ? "" : " ") + k + "=" + v;
        }
        std::printf("%-12s %-24s %-40s %-4s %s\n", info->display.c_str(), info->family.c_str(),
                    info->modification.c_str(), info->requires_ref ? "yes" : "no",
                    defaults.c_str());
    }
    const char* rl_rows[3][3] = {
        {"SGRPO", "Online RL", "Token-level clipped surrogate"},
        {"GSPO", "Online RL", "Sequence-level ratio surrogate"},
        {"CISPO", "Online RL", "Clipped importance-sampling weights"},
    };
    for (const auto& row : rl_rows) {
        std::printf("%-12s %-24s %-40s %-4s %s\n", row[0], row[1], row[2], "no",
                    "n=4 clip=[0.8,1.2] kl_coeff=0");
    }
    return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& out_dir) {
    RunRecord rec = run_cell(cfg, out_dir);
    std::printf("algorithm: %s seed: %llu\n", rec.algorithm.c_str(),
                static_cast<unsigned long long>(rec.seed));
    std::printf("init strict: %.2f%%  final strict: %.2f%%  flexible: %.2f%%\n", rec.init_strict,
                rec.final_strict, rec.final_flexible);
    std::printf("wall clock: %.1fs  verdict: %s\n", rec.wall_clock_seconds, rec.verdict.c_str());
    std::printf("outputs in %s\n", out_dir.c_str());
    return rec.verdict == "ok" ? 0 : 1;
}

int cmd_eval(const std::string& checkpoint, const TrainConfig& cfg, const std::string& split,
             const std::string& out_path) {
    auto ckpt = load_checkpoint(checkpoint);
    auto problems = generate_problems(cfg.data_seed,
                                      split == "train" ? cfg.train_problems : cfg.test_problems,
                                      difficulty_from_name(cfg.difficulty),
                                      split == "train" ? Split::train : Split::test);
    auto result = evaluate(ckpt.params, problems);
    std::printf("problems: %d  strict: %.2f%%  flexible: %.2f%%  format gap: %+.2f pp\n",
                result.summary.n_problems, result.summary.strict_accuracy,
                result.summary.flexible_accuracy, result.summary.format_gap);
    if (!out_path.empty()) {
        write_file(out_path, records_to_jsonl(result.records));
        std::printf("records written to %s\n", out_path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale post-training benchmark"};
    app.require_subcommand(1);
    app.fallthrough();  // --config/--set may appear after the subcommand

    std::string config_path, out_dir = "runs", store_dir = "runs";
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "flat key-value config file")->capture_default_str();
    app.add_option("--set", overrides, "config override key=value (repeatable)");

    auto* sc_list = app.add_subcommand("list-algorithms", "print the algorithm registry");

    auto* sc_train = app.add_subcommand("train", "train one (algorithm, seed) cell");
    sc_train->add_option("--out", out_dir, "output directory")->capture_default_str();

    auto* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string checkpoint, split = "test", eval_out;
    sc_eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    sc_eval->add_option("--split", split, "train|test")->capture_default_str();
    sc_eval->add_option("--records-out", eval_out, "write per-problem records JSONL");

    auto* sc_sweep = app.add_subcommand("sweep", "run an algorithm x seed grid");
    std::string algorithms_csv, seeds_csv = "42,123,456";
    int parallelism = 0;
    bool overwrite = false;
    sc_sweep->add_option("--algorithms", algorithms_csv, "comma-separated registry ids")->required();
    sc_sweep->add_option("--seeds", seeds_csv, "comma-separated seeds")->capture_default_str();
    sc_sweep->add_option("--out", store_dir, "store directory")->capture_default_str();
    sc_sweep->add_option("--parallelism", parallelism, "max concurrent cells (0 = cores-1)");
    sc_sweep->add_flag("--overwrite", overwrite, "re-run completed cells");

    auto* sc_analyze = app.add_subcommand("analyze", "significance analysis of a store or CSV");
    std::string baseline = "dpo", summary_csv, csv_out, text_out;
    double alpha = 0.05;
    sc_analyze->add_option("--store", store_dir, "store directory")->capture_default_str();
    sc_analyze->add_option("--summary-csv", summary_csv,
                           "analyze published summary rows (algorithm,mean,std,n) instead");
    sc_analyze->add_option("--baseline", baseline, "baseline algorithm id")->capture_default_str();
    sc_analyze->add_option("--alpha", alpha, "significance level")->capture_default_str();
    sc_analyze->add_option("--csv-out", csv_out, "write the comparison table as CSV");
    sc_analyze->add_option("--text-out", text_out, "write the text report");

    auto* sc_report = app.add_subcommand("report", "accuracy and wall-clock accounting");
    sc_report->add_option("--store", store_dir, "store directory")->capture_default_str();

    auto* sc_audit = app.add_subcommand("audit-determinism", "seed-propagation audit");
    std::string audit_seeds_csv = "42,123,456", audit_json_out;
    sc_audit->add_option("--seeds", audit_seeds_csv, "comma-separated seeds")->capture_default_str();
    sc_audit->add_option("--json-out", audit_json_out, "write the audit report as JSON");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sc_list) return cmd_list_algorithms();
        if (*sc_train) return cmd_train(load_config(config_path, overrides), out_dir);
        if (*sc_eval) return cmd_eval(checkpoint, load_config(config_path, overrides), split, eval_out);
        if (*sc_sweep) {
            SweepSpec spec;
            spec.base = load_config(config_path, overrides);
            spec.algorithms = parse_names(algorithms_csv);
            spec.seeds = parse_seeds(seeds_csv);
            spec.out_dir = store_dir;
            spec.parallelism = parallelism;
            spec.overwrite = overwrite;
            auto outcome = run_sweep(spec);
            std::printf("sweep: %d completed, %d skipped, %d failed\n", outcome.completed,
                        outcome.skipped, outcome.failed);
            return 0;
        }
        if (*sc_analyze) {
            Analysis analysis;
            if (!summary_csv.empty()) {
                analysis = analyze_summaries(parse_summary_csv(read_file(summary_csv)), baseline,
                                             alpha);
            } else {
                ResultsStore store(store_dir);
                store.verify_integrity();
                analysis = analyze_records(store.records(), baseline, alpha);
            }
            const std::string text = analysis_to_text(analysis);
            std::fputs(text.c_str(), stdout);
            if (!text_out.empty()) write_file(text_out, text);
            if (!csv_out.empty()) write_file(csv_out, analysis_to_csv(analysis));
            return 0;
        }
        if (*sc_report) {
            ResultsStore store(store_dir);
            store.verify_integrity();
            std::fputs(report_text(store.records()).c_str(), stdout);
            return 0;
        }
        if (*sc_audit) {
            auto report =
                audit_determinism(load_config(config_path, overrides), parse_seeds(audit_seeds_csv));
            std::fputs(audit_to_text(report).c_str(), stdout);
            if (!audit_json_out.empty()) write_file(audit_json_out, audit_to_json(report));
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
