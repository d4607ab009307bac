#include "ptbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace ptbench {

namespace dist {

namespace {
// Continued-fraction evaluation of the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}
}  // namespace

double reg_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double df) {
    if (!(df > 0.0)) throw std::domain_error("student_t_sf: df must be positive");
    if (std::isinf(t)) return t > 0.0 ? 0.0 : 1.0;
    const double x = df / (df + t * t);
    const double tail = 0.5 * reg_incomplete_beta(df / 2.0, 0.5, x);
    return t >= 0.0 ? tail : 1.0 - tail;
}

double student_t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("student_t_quantile: p in (0,1) required");
    // symmetric: solve for the upper tail by bisection on the CDF
    double lo = -1e3, hi = 1e3;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (1.0 - student_t_sf(mid, df) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730951); }

// P(T <= t) for noncentral t: E_V[ Phi(t * sqrt(V/df) - delta) ], V ~ chi2(df),
// integrated with composite Simpson over the chi2 density.
double noncentral_t_cdf(double t, double df, double delta) {
    if (!(df > 0.0)) throw std::domain_error("noncentral_t_cdf: df must be positive");
    const double vmax = df + 12.0 * std::sqrt(2.0 * df) + 40.0;
    const int n = 4096;  // even
    const double h = vmax / n;
    const double half_df = df / 2.0;
    const double log_norm = -half_df * std::log(2.0) - std::lgamma(half_df);
    auto integrand = [&](double v) {
        if (v <= 0.0) return 0.0;
        const double logpdf = log_norm + (half_df - 1.0) * std::log(v) - v / 2.0;
        return std::exp(logpdf) * normal_cdf(t * std::sqrt(v / df) - delta);
    };
    double acc = integrand(0.0) + integrand(vmax);
    for (int i = 1; i < n; ++i) {
        acc += integrand(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

}  // namespace dist

// ---------------------------------------------------------------------------

WelchResult welch_t(const SummaryStat& a, const SummaryStat& b) {
    if (a.n < 2 || b.n < 2) throw std::domain_error("welch_t: need n >= 2 on both sides");
    if (a.std < 0.0 || b.std < 0.0) throw std::domain_error("welch_t: negative std");
    WelchResult r;
    const double va = a.std * a.std / a.n, vb = b.std * b.std / b.n;
    const double se2 = va + vb;
    if (se2 == 0.0) {
        r.zero_variance = true;
        r.df = static_cast<double>(a.n + b.n - 2);
        if (a.mean == b.mean) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = a.mean > b.mean ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
        }
        return r;
    }
    r.t = (a.mean - b.mean) / std::sqrt(se2);
    r.df = se2 * se2 / (va * va / (a.n - 1) + vb * vb / (b.n - 1));
    r.p = 2.0 * dist::student_t_sf(std::fabs(r.t), r.df);
    return r;
}

double cohens_d(const SummaryStat& a, const SummaryStat& b) {
    if (a.n < 2 || b.n < 2) throw std::domain_error("cohens_d: need n >= 2 on both sides");
    const double pooled_var =
        ((a.n - 1) * a.std * a.std + (b.n - 1) * b.std * b.std) / (a.n + b.n - 2);
    if (pooled_var == 0.0) {
        if (a.mean == b.mean) return 0.0;
        return a.mean > b.mean ? std::numeric_limits<double>::infinity()
                               : -std::numeric_limits<double>::infinity();
    }
    return (a.mean - b.mean) / std::sqrt(pooled_var);
}

double bonferroni(double alpha, int m) {
    if (m < 1) throw std::domain_error("bonferroni: m must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("bonferroni: alpha in (0,1)");
    return alpha / m;
}

std::vector<ComparisonRow> compare_variants(const SummaryStat& baseline,
                                            const std::vector<SummaryStat>& variants,
                                            double alpha) {
    std::set<std::string> seen;
    for (const auto& v : variants) {
        if (v.algorithm == baseline.algorithm) {
            throw std::domain_error("compare_variants: baseline appears among variants");
        }
        if (!seen.insert(v.algorithm).second) {
            throw std::domain_error("compare_variants: duplicate id " + v.algorithm);
        }
    }
    if (variants.empty()) return {};
    const double corrected = bonferroni(alpha, static_cast<int>(variants.size()));
    std::vector<ComparisonRow> rows;
    rows.reserve(variants.size());
    for (const auto& v : variants) {
        ComparisonRow row;
        row.variant = v.algorithm;
        row.delta = v.mean - baseline.mean;
        const auto w = welch_t(v, baseline);
        row.t = w.t;
        row.df = w.df;
        row.p = w.p;
        row.d = cohens_d(v, baseline);
        row.significant = row.p < corrected;
        rows.push_back(row);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ComparisonRow& x, const ComparisonRow& y) { return x.delta > y.delta; });
    return rows;
}

std::vector<SummaryStat> aggregate(const std::vector<RunResult>& runs) {
    std::map<std::string, std::vector<double>> by_alg;
    for (const auto& r : runs) by_alg[r.algorithm].push_back(r.accuracy);
    std::vector<SummaryStat> out;
    for (const auto& [alg, xs] : by_alg) {
        SummaryStat s;
        s.algorithm = alg;
        s.n = static_cast<int>(xs.size());
        for (double x : xs) s.mean += x / static_cast<double>(xs.size());
        if (xs.size() >= 2) {
            double acc = 0.0;
            for (double x : xs) acc += (x - s.mean) * (x - s.mean);
            s.std = std::sqrt(acc / static_cast<double>(xs.size() - 1));
        } else {
            s.std = std::numeric_limits<double>::quiet_NaN();  // untestable
        }
        out.push_back(s);
    }
    return out;
}

double power_two_sample(double d, int n_per_group, double alpha) {
    if (n_per_group < 2) throw std::domain_error("power_two_sample: n must be >= 2");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("power_two_sample: alpha in (0,1)");
    const double df = 2.0 * n_per_group - 2.0;
    const double tc = dist::student_t_quantile(1.0 - alpha / 2.0, df);
    const double delta = d * std::sqrt(n_per_group / 2.0);
    return 1.0 - (dist::noncentral_t_cdf(tc, df, delta) - dist::noncentral_t_cdf(-tc, df, delta));
}

}  // namespace ptbench
