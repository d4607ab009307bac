#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptbench/extract.hpp"
#include "ptbench/model.hpp"
#include "ptbench/taskdata.hpp"

namespace ptbench {

struct EvalRecord {
    std::uint64_t problem_id = 0;
    std::vector<int> tokens;
    std::string text;
    std::optional<long long> strict_extracted;
    std::optional<long long> flexible_extracted;
    bool strict_correct = false;
    bool flexible_correct = false;
    bool generation_failed = false;
};

struct EvalSummary {
    double strict_accuracy = 0.0;    // percent
    double flexible_accuracy = 0.0;  // percent
    double format_gap = 0.0;         // strict - flexible, percentage points
    int n_problems = 0;
};

struct EvalResult {
    EvalSummary summary;
    std::vector<EvalRecord> records;
};

struct EvalOptions {
    int max_tokens = 24;
};

// Greedy-decoding exact-match evaluation; a pure function of (params,
// problems). Generation failures are recorded and counted incorrect.
EvalResult evaluate(const ModelParams& params, std::span<const Problem> problems,
                    const EvalOptions& opts = {});
EvalResult evaluate_serial(const ModelParams& params, std::span<const Problem> problems,
                           const EvalOptions& opts = {});

// Counterexamples to "strict success whose marker integer is the text's last
// number implies flexible success"; empty on well-behaved corpora.
std::vector<const EvalRecord*> extract_implication_violations(std::span<const EvalRecord> records);

std::string records_to_jsonl(const std::vector<EvalRecord>& records);

// max - min over a list of percentages (0 for empty/singleton input).
double spread(std::span<const double> values);

// Spearman rank correlation over two keyed score maps (descending scores,
// ties by average rank). Throws on key mismatch or fewer than 2 keys.
double rank_correlation(const std::map<std::string, double>& a,
                        const std::map<std::string, double>& b);

}  // namespace ptbench
