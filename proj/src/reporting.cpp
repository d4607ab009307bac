#include "ptbench/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ptbench/evaluator.hpp"
#include "ptbench/losses.hpp"

namespace ptbench {

namespace {

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

const VariantInfo* registry_info(const std::string& id) {
    const auto& reg = LossRegistry::global();
    return reg.contains(id) ? &reg.get(id) : nullptr;
}

std::string display_name(const std::string& id) {
    if (const auto* info = registry_info(id)) return info->display;
    if (id == "sgrpo") return "SGRPO";
    if (id == "gspo") return "GSPO";
    if (id == "cispo") return "CISPO";
    return id;
}

std::string family_name(const std::string& id) {
    if (const auto* info = registry_info(id)) return info->family;
    return "Online RL";
}

}  // namespace

Analysis analyze_summaries(const std::vector<SummaryStat>& stats, const std::string& baseline,
                           double alpha) {
    Analysis a;
    a.baseline = baseline;
    a.alpha = alpha;

    const SummaryStat* base = nullptr;
    std::vector<SummaryStat> variants;
    for (const auto& s : stats) {
        if (s.algorithm == baseline) {
            base = &s;
        } else {
            variants.push_back(s);
        }
    }
    if (base == nullptr) throw std::domain_error("analyze: baseline '" + baseline + "' absent");

    a.summaries.push_back(*base);
    a.summaries.insert(a.summaries.end(), variants.begin(), variants.end());

    bool testable = base->n >= 2;
    for (const auto& v : variants) testable = testable && v.n >= 2;
    if (!variants.empty() && testable) {
        a.rows = compare_variants(*base, variants, alpha);
        a.corrected_alpha = bonferroni(alpha, static_cast<int>(variants.size()));
        a.tests_run = true;
        int n_min = base->n;
        for (const auto& v : variants) n_min = std::min(n_min, v.n);
        a.power_n = n_min;
        a.power_at_claimed_effect = power_two_sample(0.8, n_min, alpha);
    } else if (!variants.empty()) {
        a.warning = "single-seed algorithms present; significance tests skipped (means only)";
    }
    return a;
}

Analysis analyze_records(const std::vector<RunRecord>& records, const std::string& baseline,
                         double alpha, const std::string& task) {
    std::map<std::string, std::vector<RunResult>> by_task;
    for (const auto& r : records) {
        if (r.verdict.rfind("failed", 0) == 0 || r.pathological) continue;
        by_task[r.task].push_back({r.algorithm, r.final_strict});
    }
    auto it = by_task.find(task);
    if (it == by_task.end()) throw std::domain_error("analyze: no usable records for task " + task);

    Analysis a = analyze_summaries(aggregate(it->second), baseline, alpha);

    for (const auto& [task_name, runs] : by_task) {
        auto stats = aggregate(runs);
        std::vector<double> means;
        for (const auto& s : stats) {
            a.task_means[task_name][s.algorithm] = s.mean;
            means.push_back(s.mean);
        }
        a.task_spreads[task_name] = spread(means);
    }
    // rank correlations between tasks sharing the same algorithm set
    for (auto i = a.task_means.begin(); i != a.task_means.end(); ++i) {
        for (auto j = std::next(i); j != a.task_means.end(); ++j) {
            if (i->second.size() != j->second.size() || i->second.size() < 2) continue;
            bool same_keys = true;
            for (const auto& [k, _] : i->second) same_keys = same_keys && j->second.count(k) > 0;
            if (!same_keys) continue;
            a.rank_correlations.emplace_back(i->first + " vs " + j->first,
                                             rank_correlation(i->second, j->second));
        }
    }
    return a;
}

std::vector<SummaryStat> parse_summary_csv(const std::string& text) {
    std::vector<SummaryStat> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string alg, mean, std_s, n;
        if (!std::getline(row, alg, ',') || !std::getline(row, mean, ',') ||
            !std::getline(row, std_s, ',') || !std::getline(row, n)) {
            throw std::invalid_argument("summary csv: bad line '" + line + "'");
        }
        if (alg == "algorithm") continue;  // header
        out.push_back({alg, std::stod(mean), std::stod(std_s), std::stoi(n)});
    }
    return out;
}

std::string analysis_to_text(const Analysis& a) {
    std::ostringstream out;
    out << "variant comparison vs " << display_name(a.baseline) << " (alpha " << fmt("%.4g", a.alpha);
    if (a.tests_run) {
        out << ", Bonferroni-corrected " << fmt("%.6f", a.corrected_alpha) << " over "
            << a.rows.size() << " comparisons";
    }
    out << ")\n";
    if (!a.warning.empty()) out << "warning: " << a.warning << '\n';

    const SummaryStat& base = a.summaries.front();
    char header[160];
    std::snprintf(header, sizeof(header), "  %-12s %-22s %9s %7s %8s %8s %8s  %s\n", "variant",
                  "category", "mean(%)", "std", "delta", "p", "d", "sig");
    out << header;
    auto emit = [&](const std::string& alg, double mean, double std_v, const std::string& delta,
                    const std::string& p, const std::string& d, const std::string& sig) {
        char buf[200];
        std::snprintf(buf, sizeof(buf), "  %-12s %-22s %9.2f %7.2f %8s %8s %8s  %s\n",
                      display_name(alg).c_str(), family_name(alg).c_str(), mean, std_v,
                      delta.c_str(), p.c_str(), d.c_str(), sig.c_str());
        out << buf;
    };
    emit(base.algorithm, base.mean, base.std, "--", "--", "--", "");
    if (a.tests_run) {
        for (const auto& row : a.rows) {
            const SummaryStat* stat = nullptr;
            for (const auto& s : a.summaries) {
                if (s.algorithm == row.variant) stat = &s;
            }
            emit(row.variant, stat ? stat->mean : 0.0, stat ? stat->std : 0.0,
                 fmt("%+.2f", row.delta), fmt("%.4f", row.p), fmt("%+.2f", row.d),
                 row.significant ? "*" : "");
        }
        char power[160];
        std::snprintf(power, sizeof(power),
                      "power: two-sample t-test at d=0.8, n=%d per group, alpha %.2f -> %.1f%% "
                      "(cf. the 80%% design claim)\n",
                      a.power_n, a.alpha, 100.0 * a.power_at_claimed_effect);
        out << power;
    } else {
        for (std::size_t i = 1; i < a.summaries.size(); ++i) {
            const auto& s = a.summaries[i];
            emit(s.algorithm, s.mean, std::isfinite(s.std) ? s.std : 0.0, "--", "--", "--", "");
        }
    }

    if (!a.task_spreads.empty()) {
        out << "spread (max - min of per-algorithm means, pp):\n";
        for (const auto& [task_name, value] : a.task_spreads) {
            out << "  " << task_name << ": " << fmt("%.2f", value) << '\n';
        }
    }
    if (!a.rank_correlations.empty()) {
        out << "rank correlation (Spearman):\n";
        for (const auto& [pair_name, rho] : a.rank_correlations) {
            out << "  " << pair_name << ": " << fmt("%.2f", rho) << '\n';
        }
    }
    return out.str();
}

std::string analysis_to_csv(const Analysis& a) {
    std::ostringstream out;
    out << "variant,category,mean,std,delta,t,df,p,d,significant\n";
    const SummaryStat& base = a.summaries.front();
    out << display_name(base.algorithm) << ',' << family_name(base.algorithm) << ','
        << fmt("%.2f", base.mean) << ',' << fmt("%.2f", base.std) << ",,,,,,\n";
    for (const auto& row : a.rows) {
        const SummaryStat* stat = nullptr;
        for (const auto& s : a.summaries) {
            if (s.algorithm == row.variant) stat = &s;
        }
        out << display_name(row.variant) << ',' << family_name(row.variant) << ','
            << fmt("%.2f", stat ? stat->mean : 0.0) << ',' << fmt("%.2f", stat ? stat->std : 0.0)
            << ',' << fmt("%+.2f", row.delta) << ',' << fmt("%.4f", row.t) << ','
            << fmt("%.3f", row.df) << ',' << fmt("%.4f", row.p) << ',' << fmt("%+.2f", row.d) << ','
            << (row.significant ? "yes" : "no") << '\n';
    }
    return out.str();
}

double hours_per_pp(double gain_pp, double hours) {
    if (!(gain_pp > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return hours / gain_pp;
}

std::string report_text(const std::vector<RunRecord>& records) {
    std::ostringstream out;
    if (records.empty()) {
        out << "report: store is empty\n";
        return out.str();
    }
    std::map<std::string, std::vector<const RunRecord*>> by_alg;
    double total_seconds = 0.0;
    for (const auto& r : records) {
        by_alg[r.algorithm].push_back(&r);
        total_seconds += r.wall_clock_seconds;
    }
    char header[160];
    std::snprintf(header, sizeof(header), "%-12s %6s %10s %9s %10s %12s  %s\n", "algorithm", "runs",
                  "strict(%)", "std", "gain(pp)", "h/pp", "verdicts");
    out << header;
    for (const auto& [alg, rs] : by_alg) {
        std::vector<RunResult> acc;
        double init_mean = 0.0, seconds = 0.0;
        std::set<std::string> verdicts;
        int usable = 0;
        for (const auto* r : rs) {
            seconds += r->wall_clock_seconds;
            if (r->verdict == "ok") {
                acc.push_back({alg, r->final_strict});
                init_mean += r->init_strict;
                ++usable;
            }
            verdicts.insert(r->verdict == "ok" ? "ok" : r->verdict);
        }
        std::string verdict_str;
        for (const auto& v : verdicts) verdict_str += (verdict_str.empty() ? "" : "; ") + v;
        if (usable == 0) {
            char buf[240];
            std::snprintf(buf, sizeof(buf), "%-12s %6zu %10s %9s %10s %12s  %s\n",
                          display_name(alg).c_str(), rs.size(), "--", "--", "--", "--",
                          verdict_str.c_str());
            out << buf;
            continue;
        }
        init_mean /= usable;
        auto stats = aggregate(acc);
        const auto& s = stats.front();
        const double gain = s.mean - init_mean;
        const double hpp = hours_per_pp(gain, seconds / 3600.0);
        char buf[240];
        std::snprintf(buf, sizeof(buf), "%-12s %6d %10.2f %9s %10.2f %12s  %s\n",
                      display_name(alg).c_str(), s.n, s.mean,
                      s.n >= 2 ? fmt("%.2f", s.std).c_str() : "--", gain,
                      std::isfinite(hpp) ? fmt("%.2f", hpp).c_str() : "undefined",
                      verdict_str.c_str());
        out << buf;
    }
    out << "total wall clock: " << fmt("%.1f", total_seconds) << " s ("
        << fmt("%.3f", total_seconds / 3600.0) << " h)\n";
    return out.str();
}

}  // namespace ptbench
