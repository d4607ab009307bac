#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptbench/store.hpp"
#include "ptbench/trainer.hpp"

namespace ptbench {

struct SweepSpec {
    std::vector<std::string> algorithms;  // registry ids plus sgrpo/gspo/cispo
    std::vector<std::uint64_t> seeds;     // must be distinct
    TrainConfig base;
    std::string out_dir = "runs";
    int parallelism = 0;  // 0 = available cores - 1
    bool overwrite = false;
};

struct SweepOutcome {
    int completed = 0;
    int skipped = 0;
    int failed = 0;
};

// Trains + evaluates one cell, writing checkpoint/manifest/metrics/data files
// under cell_dir. Never throws for pathological training; the record carries
// the verdict.
RunRecord run_cell(const TrainConfig& cfg, const std::string& cell_dir,
                   const LossRegistry& registry = LossRegistry::global());

// Runs the algorithm x seed grid. Unknown algorithm ids are rejected before
// any run starts. Cells are process-isolated (fork per cell) up to the
// parallelism limit; the parent is the single store writer and merges cell
// results in grid order. A failed cell records a verdict without aborting
// the sweep.
SweepOutcome run_sweep(const SweepSpec& spec, const LossRegistry& registry = LossRegistry::global());

}  // namespace ptbench
