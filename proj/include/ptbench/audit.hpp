#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ptbench/trainer.hpp"

namespace ptbench {

struct AuditRow {
    std::uint64_t seed = 0;
    std::uint64_t param_hash = 0;
    double strict_accuracy = 0.0;
    double final_loss = 0.0;
};

struct AuditReport {
    std::string verdict;  // DETERMINISTIC-ACROSS-SEEDS | SEED-SENSITIVE
    bool propagate_seed = false;
    bool param_hashes_identical = false;
    bool accuracies_identical = false;
    bool permutations_identical = false;
    std::vector<AuditRow> rows;
    std::vector<std::string> notes;
};

// Runs one short training job per seed (sequentially) and classifies the
// pipeline: identical parameter hashes across seeds is the sampler-bug
// signature. A training failure aborts with the offending seed identified.
AuditReport audit_determinism(const TrainConfig& base, const std::vector<std::uint64_t>& seeds,
                              const LossRegistry& registry = LossRegistry::global());

std::string audit_to_text(const AuditReport& report);
std::string audit_to_json(const AuditReport& report);

}  // namespace ptbench
