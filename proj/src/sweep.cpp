#include "ptbench/sweep.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <stdexcept>
#include <thread>

#include "ptbench/evaluator.hpp"
#include "ptbench/kernels.hpp"

namespace ptbench {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("sweep: cannot write " + path.string());
    out << content;
}

std::string cell_name(const std::string& algorithm, std::uint64_t seed) {
    return algorithm + "_s" + std::to_string(seed);
}

}  // namespace

RunRecord run_cell(const TrainConfig& cfg, const std::string& cell_dir,
                   const LossRegistry& registry) {
    fs::create_directories(cell_dir);
    const fs::path dir(cell_dir);

    RunRecord rec;
    rec.algorithm = cfg.algorithm;
    rec.seed = cfg.seed;
    rec.config_text = config_to_text(cfg);
    rec.config_hash = config_hash(cfg);
    write_file(dir / "config.cfg", rec.config_text);

    try {
        ModelParams init = cfg.init_checkpoint.empty()
                               ? ModelParams::random_init(cfg.model, cfg.adapter, cfg.init_seed)
                               : load_checkpoint(cfg.init_checkpoint).params;
        Dataset data = build_dataset(cfg, init);
        write_file(dir / "problems.jsonl", problems_to_jsonl(data.train_problems));
        if (!data.pairs.empty()) write_file(dir / "pairs.jsonl", pairs_to_jsonl(data.pairs));

        auto test_problems = generate_problems(cfg.data_seed, cfg.test_problems,
                                               difficulty_from_name(cfg.difficulty), Split::test);
        rec.init_strict = evaluate(init, test_problems).summary.strict_accuracy;

        TrainResult result = train(cfg, data, init, registry);
        result.manifest.final_checkpoint = (dir / "final.ckpt").string();
        save_checkpoint(result.manifest.final_checkpoint, result.params, rec.config_hash);

        auto eval = evaluate(result.params, test_problems);
        write_file(dir / "eval_records.jsonl", records_to_jsonl(eval.records));
        write_file(dir / "manifest.json", manifest_to_json(result.manifest));
        {
            std::ofstream metrics(dir / "metrics.jsonl");
            for (const auto& m : result.manifest.metrics) {
                metrics << "{\"step\":" << m.step << ",\"epoch\":" << m.epoch << ",\"lr\":" << m.lr
                        << ",\"loss\":" << (std::isfinite(m.loss) ? std::to_string(m.loss) : "null")
                        << ",\"skipped\":" << (m.skipped ? "true" : "false")
                        << ",\"nan_flag\":" << (m.nan_flag ? "true" : "false");
                if (std::isfinite(m.mean_reward)) {
                    metrics << ",\"mean_reward\":" << m.mean_reward
                            << ",\"clip_fraction\":" << m.clip_fraction
                            << ",\"approx_kl\":" << m.approx_kl;
                }
                metrics << "}\n";
            }
        }

        rec.final_strict = eval.summary.strict_accuracy;
        rec.final_flexible = eval.summary.flexible_accuracy;
        rec.wall_clock_seconds = result.manifest.wall_clock_seconds;
        rec.param_hash = result.manifest.param_hash;
        rec.pathological = result.manifest.pathological;
        rec.verdict = result.manifest.pathological
                          ? "pathological: " + result.manifest.pathology_reason
                          : "ok";
        rec.manifest_path = (dir / "manifest.json").string();
        rec.checkpoint_path = result.manifest.final_checkpoint;
    } catch (const std::exception& e) {
        rec.pathological = true;
        rec.verdict = std::string("failed: ") + e.what();
    }
    return rec;
}

SweepOutcome run_sweep(const SweepSpec& spec, const LossRegistry& registry) {
    // reject bad specs before any run starts
    for (const auto& alg : spec.algorithms) {
        const bool rl = alg == "sgrpo" || alg == "gspo" || alg == "cispo";
        if (!rl && !registry.contains(alg)) {
            throw std::invalid_argument("sweep: unknown algorithm id '" + alg + "'");
        }
    }
    {
        std::set<std::uint64_t> distinct(spec.seeds.begin(), spec.seeds.end());
        if (distinct.size() != spec.seeds.size()) {
            throw std::invalid_argument("sweep: seeds must be distinct");
        }
    }
    if (spec.seeds.empty() || spec.algorithms.empty()) {
        throw std::invalid_argument("sweep: need at least one algorithm and one seed");
    }

    ResultsStore store(spec.out_dir);
    const fs::path cells_dir = fs::path(spec.out_dir) / "cells";
    fs::create_directories(cells_dir);

    struct Cell {
        TrainConfig cfg;
        std::string dir;
        pid_t pid = -1;
        bool skipped = false;
        bool done = false;
    };
    std::vector<Cell> cells;
    SweepOutcome outcome;
    for (const auto& alg : spec.algorithms) {
        for (std::uint64_t seed : spec.seeds) {
            if (!spec.overwrite && store.contains(alg, seed)) {
                std::fprintf(stderr, "sweep: cell (%s, seed %llu) already complete, skipping\n",
                             alg.c_str(), static_cast<unsigned long long>(seed));
                ++outcome.skipped;
                continue;
            }
            Cell cell;
            cell.cfg = spec.base;
            apply_override(cell.cfg, "algorithm", alg);
            cell.cfg.seed = seed;
            cell.dir = (cells_dir / cell_name(alg, seed)).string();
            cells.push_back(std::move(cell));
        }
    }

    const int limit = spec.parallelism > 0
                          ? spec.parallelism
                          : std::max(1u, std::thread::hardware_concurrency() - 1);

    if (limit == 1) {
        // in-process path: keeps OpenMP kernels available inside the cell
        for (auto& cell : cells) {
            RunRecord rec = run_cell(cell.cfg, cell.dir, registry);
            store.append(rec, spec.overwrite);
            rec.verdict.rfind("failed", 0) == 0 ? ++outcome.failed : ++outcome.completed;
        }
        return outcome;
    }

    // fork per cell; children run their kernels serially (the parallelism
    // budget is spent on concurrent cells) and report through record.json
    std::size_t next = 0;
    int active = 0;
    auto reap = [&](bool block) {
        int status = 0;
        const pid_t pid = waitpid(-1, &status, block ? 0 : WNOHANG);
        if (pid <= 0) return false;
        for (auto& cell : cells) {
            if (cell.pid == pid) {
                cell.done = true;
                --active;
                return true;
            }
        }
        return true;
    };
    while (next < cells.size() || active > 0) {
        while (next < cells.size() && active < limit) {
            Cell& cell = cells[next];
            const pid_t pid = fork();
            if (pid < 0) throw std::runtime_error("sweep: fork failed");
            if (pid == 0) {
                kernels::set_parallel(false);
                RunRecord rec = run_cell(cell.cfg, cell.dir, registry);
                try {
                    write_file(fs::path(cell.dir) / "record.json", record_to_json(rec));
                } catch (...) {
                    _exit(2);
                }
                _exit(0);
            }
            cell.pid = pid;
            ++active;
            ++next;
        }
        if (active > 0) reap(true);
    }

    // single-writer merge in grid order
    for (const auto& cell : cells) {
        const fs::path record_path = fs::path(cell.dir) / "record.json";
        RunRecord rec;
        if (fs::exists(record_path)) {
            std::ifstream in(record_path);
            std::string content((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
            rec = record_from_json(content);
        } else {
            rec.algorithm = cell.cfg.algorithm;
            rec.seed = cell.cfg.seed;
            rec.config_text = config_to_text(cell.cfg);
            rec.config_hash = config_hash(cell.cfg);
            rec.pathological = true;
            rec.verdict = "failed: cell process exited without a record";
        }
        store.append(rec, spec.overwrite);
        rec.verdict.rfind("failed", 0) == 0 ? ++outcome.failed : ++outcome.completed;
    }
    return outcome;
}

}  // namespace ptbench
