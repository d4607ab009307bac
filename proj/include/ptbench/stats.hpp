#pragma once

#include <string>
#include <vector>

namespace ptbench {

// Multi-seed aggregate for one algorithm: sample std (n-1 denominator).
struct SummaryStat {
    std::string algorithm;
    double mean = 0.0;
    double std = 0.0;  // NaN when n < 2
    int n = 0;
};

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;  // two-sided
    bool zero_variance = false;
};

// Welch's two-sample t-test from summary statistics; df by
// Welch-Satterthwaite, p via the regularized incomplete beta (abs error well
// under 1e-6). Zero variance on both sides: equal means -> p = 1, unequal
// -> p = 0 with the zero_variance flag set.
WelchResult welch_t(const SummaryStat& a, const SummaryStat& b);

// (mean_a - mean_b) / pooled std, (n-1)-weighted pooled variance.
double cohens_d(const SummaryStat& a, const SummaryStat& b);

double bonferroni(double alpha, int m);

struct ComparisonRow {
    std::string variant;
    double delta = 0.0;  // variant mean - baseline mean
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
    double d = 0.0;
    bool significant = false;  // at alpha / #variants
};

// One row per variant vs the baseline, Bonferroni-corrected at
// alpha / |variants|, sorted by delta descending.
std::vector<ComparisonRow> compare_variants(const SummaryStat& baseline,
                                            const std::vector<SummaryStat>& variants, double alpha);

struct RunResult {
    std::string algorithm;
    double accuracy = 0.0;  // percent
};

// Mean / sample std / n per algorithm, sorted by algorithm id. Single-run
// algorithms get std = NaN (untestable).
std::vector<SummaryStat> aggregate(const std::vector<RunResult>& runs);

// Power of a two-sided two-sample t-test at effect size d with n per group,
// via the noncentral t distribution (numeric integration).
double power_two_sample(double d, int n_per_group, double alpha);

// Distribution helpers (exposed for tests).
namespace dist {
double reg_incomplete_beta(double a, double b, double x);
double student_t_sf(double t, double df);        // P(T > t)
double student_t_quantile(double p, double df);  // inverse CDF
double noncentral_t_cdf(double t, double df, double delta);
double normal_cdf(double x);
}  // namespace dist

}  // namespace ptbench
