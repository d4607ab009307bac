#pragma once

#include <map>
#include <string>
#include <vector>

#include "ptbench/stats.hpp"
#include "ptbench/store.hpp"

namespace ptbench {

struct Analysis {
    std::vector<SummaryStat> summaries;    // baseline first, then variants
    std::vector<ComparisonRow> rows;       // sorted by delta descending
    std::string baseline;
    double alpha = 0.05;
    double corrected_alpha = 0.0;
    bool tests_run = false;  // false when any algorithm has n < 2
    std::string warning;
    // cross-task sections (present when the inputs span several tasks)
    std::map<std::string, std::map<std::string, double>> task_means;  // task -> alg -> mean
    std::map<std::string, double> task_spreads;
    std::vector<std::pair<std::string, double>> rank_correlations;  // "taskA vs taskB" -> rho
    double power_at_claimed_effect = 0.0;  // two-sample power at d=0.8 for the observed n
    int power_n = 0;
};

// Core comparison: baseline + variants -> Welch/Bonferroni/Cohen table.
Analysis analyze_summaries(const std::vector<SummaryStat>& stats, const std::string& baseline,
                           double alpha);

// Aggregates store records per (task, algorithm) and analyzes the requested
// task's grid; adds spread and rank-correlation sections across tasks.
Analysis analyze_records(const std::vector<RunRecord>& records, const std::string& baseline,
                         double alpha, const std::string& task = "arith");

// CSV rows "algorithm,mean,std,n" (header optional).
std::vector<SummaryStat> parse_summary_csv(const std::string& text);

std::string analysis_to_text(const Analysis& analysis);
std::string analysis_to_csv(const Analysis& analysis);

// Accuracy grid plus wall-clock accounting (hours per percentage point
// gained over each run's own initialization; undefined when the gain is not
// positive).
std::string report_text(const std::vector<RunRecord>& records);

double hours_per_pp(double gain_pp, double hours);  // quiet NaN when gain <= 0

}  // namespace ptbench
