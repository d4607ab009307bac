#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ptbench/stats.hpp"

using namespace ptbench;

namespace {

// published 20-row grid: (id, mean, std), n = 5 everywhere, DPO is baseline
struct Row {
    const char* name;
    double mean, std, p, d;
};
const Row kPublished[] = {
    {"ORPO", 53.89, 0.60, 0.0134, 2.48},   {"DPOP", 53.62, 1.80, 0.0189, 1.88},
    {"SPPO", 52.60, 1.45, 0.0521, 1.49},   {"IPO", 52.36, 0.75, 0.0614, 1.53},
    {"CalDPO", 52.16, 1.58, 0.0934, 1.22}, {"CPO", 51.43, 1.57, 0.2187, 0.85},
    {"GPO", 50.98, 2.41, 0.4370, 0.52},    {"RobustDPO", 50.89, 2.13, 0.4442, 0.51},
    {"CDPO", 50.72, 1.89, 0.4916, 0.46},   {"KTO", 50.48, 2.11, 0.6211, 0.33},
    {"Hinge", 49.87, 2.43, 0.9449, 0.05},  {"ODPO", 48.37, 3.20, 0.4525, -0.50},
    {"APO", 48.07, 2.73, 0.3175, -0.68},   {"EXO", 47.52, 2.92, 0.2145, -0.86},
    {"FocalPO", 47.04, 3.27, 0.1686, -0.97}, {"RDPO", 46.79, 2.47, 0.0835, -1.25},
    {"BetaDPO", 45.75, 4.31, 0.1145, -1.17}, {"AlphaPO", 41.68, 5.13, 0.0204, -2.04},
    {"SimPO", 38.23, 2.12, 0.0000, -5.25},
};
const SummaryStat kBaseline{"DPO", 49.76, 2.27, 5};

}  // namespace

TEST_CASE("special functions match frozen high-precision references") {
    // regularized incomplete beta spot values (reference: symmetry and the
    // uniform case I_x(1,1) = x)
    CHECK(dist::reg_incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
    CHECK(dist::reg_incomplete_beta(2.0, 3.0, 0.5) +
              dist::reg_incomplete_beta(3.0, 2.0, 0.5) ==
          doctest::Approx(1.0).epsilon(1e-12));
    // Student t tail at df=1 is a Cauchy: P(T > 1) = 1/4
    CHECK(dist::student_t_sf(1.0, 1.0) == doctest::Approx(0.25).epsilon(1e-10));
    // large-df tail approaches the normal tail
    CHECK(dist::student_t_sf(1.959964, 1e6) == doctest::Approx(0.025).epsilon(1e-4));
    // quantile inverts the CDF
    const double q = dist::student_t_quantile(0.975, 8.0);
    CHECK(1.0 - dist::student_t_sf(q, 8.0) == doctest::Approx(0.975).epsilon(1e-9));
    CHECK(q == doctest::Approx(2.306004).epsilon(1e-5));
    // noncentral t at delta 0 reduces to central
    CHECK(dist::noncentral_t_cdf(1.0, 5.0, 0.0) ==
          doctest::Approx(1.0 - dist::student_t_sf(1.0, 5.0)).epsilon(1e-7));
}

TEST_CASE("welch t spot rows from the published grid") {
    SUBCASE("top positive row") {
        auto w = welch_t(SummaryStat{"ORPO", 53.89, 0.60, 5}, kBaseline);
        CHECK(w.t == doctest::Approx(3.9332).epsilon(1e-4));
        CHECK(w.df == doctest::Approx(4.556).epsilon(1e-3));
        CHECK(w.p == doctest::Approx(0.01325).epsilon(1e-3));
        CHECK(std::fabs(w.p - 0.0134) < 0.002);
    }
    SUBCASE("the one significant row") {
        auto w = welch_t(kBaseline, SummaryStat{"SimPO", 38.23, 2.12, 5});
        CHECK(w.t == doctest::Approx(8.3006).epsilon(1e-4));
        CHECK(w.p < 1e-4);
    }
    SUBCASE("identical summaries give t 0, p 1") {
        auto w = welch_t(kBaseline, kBaseline);
        CHECK(w.t == 0.0);
        CHECK(w.p == doctest::Approx(1.0));
    }
    SUBCASE("antisymmetry and scale coherence") {
        SummaryStat a{"a", 52.0, 1.4, 5}, b{"b", 49.5, 2.2, 5};
        auto ab = welch_t(a, b), ba = welch_t(b, a);
        CHECK(ab.t == doctest::Approx(-ba.t).epsilon(1e-12));
        CHECK(ab.p == doctest::Approx(ba.p).epsilon(1e-12));
        SummaryStat a2 = a, b2 = b;
        a2.mean *= 3.0;
        a2.std *= 3.0;
        b2.mean *= 3.0;
        b2.std *= 3.0;
        auto scaled = welch_t(a2, b2);
        CHECK(scaled.t == doctest::Approx(ab.t).epsilon(1e-12));
        CHECK(scaled.p == doctest::Approx(ab.p).epsilon(1e-12));
        CHECK(cohens_d(a2, b2) == doctest::Approx(cohens_d(a, b)).epsilon(1e-12));
    }
    SUBCASE("zero-variance conventions") {
        SummaryStat a{"a", 50.0, 0.0, 5}, b{"b", 50.0, 0.0, 5}, c{"c", 51.0, 0.0, 5};
        auto same = welch_t(a, b);
        CHECK(same.p == 1.0);
        CHECK(same.zero_variance);
        auto diff = welch_t(c, a);
        CHECK(diff.p == 0.0);
        CHECK(diff.zero_variance);
        CHECK(std::isinf(diff.t));
    }
    CHECK_THROWS_AS(welch_t(SummaryStat{"x", 1, 1, 1}, kBaseline), std::domain_error);
}

TEST_CASE("cohens d spot rows") {
    CHECK(cohens_d(SummaryStat{"ORPO", 53.89, 0.60, 5}, kBaseline) ==
          doctest::Approx(2.48).epsilon(0.01));
    CHECK(cohens_d(SummaryStat{"SimPO", 38.23, 2.12, 5}, kBaseline) ==
          doctest::Approx(-5.25).epsilon(0.01));
    CHECK(cohens_d(kBaseline, kBaseline) == 0.0);
}

TEST_CASE("bonferroni") {
    CHECK(bonferroni(0.05, 19) == doctest::Approx(0.05 / 19.0).epsilon(1e-15));
    CHECK(bonferroni(0.05, 19) == doctest::Approx(0.002632).epsilon(1e-3));
    CHECK(bonferroni(0.05, 1) == doctest::Approx(0.05));
    double prev = 1.0;
    for (int m = 1; m <= 30; ++m) {
        const double cur = bonferroni(0.05, m);
        CHECK(cur < prev);
        prev = cur;
    }
    CHECK_THROWS_AS(bonferroni(0.05, 0), std::domain_error);
}

TEST_CASE("compare_variants reproduces the published significance pattern") {
    std::vector<SummaryStat> variants;
    for (const auto& row : kPublished) variants.push_back({row.name, row.mean, row.std, 5});
    auto rows = compare_variants(kBaseline, variants, 0.05);
    REQUIRE(rows.size() == 19);

    // sorted by delta descending
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i - 1].delta >= rows[i].delta);

    int significant = 0;
    for (const auto& row : rows) {
        if (row.significant) {
            ++significant;
            CHECK(row.variant == "SimPO");
            CHECK(row.delta < 0.0);  // the sole significant variant is worse
        }
    }
    CHECK(significant == 1);

    // recomputed d matches the published column within 0.02 on all rows;
    // recomputed p within 0.004 (see the acceptance suite for the stated
    // 0.002 criterion and its per-row status)
    for (const auto& row : rows) {
        const Row* pub = nullptr;
        for (const auto& r : kPublished) {
            if (row.variant == r.name) pub = &r;
        }
        REQUIRE(pub != nullptr);
        CHECK(std::fabs(row.d - pub->d) <= 0.02);
        CHECK(std::fabs(row.p - pub->p) <= 0.004);
        if (pub->p < 0.01) CHECK(std::fabs(row.p - pub->p) <= 0.0005);
    }

    SUBCASE("duplicate ids and baseline among variants are rejected") {
        auto dup = variants;
        dup.push_back({"ORPO", 50.0, 1.0, 5});
        CHECK_THROWS_AS(compare_variants(kBaseline, dup, 0.05), std::domain_error);
        auto with_base = variants;
        with_base.push_back(kBaseline);
        CHECK_THROWS_AS(compare_variants(kBaseline, with_base, 0.05), std::domain_error);
    }
    SUBCASE("empty variant list gives empty output") {
        CHECK(compare_variants(kBaseline, {}, 0.05).empty());
    }
    SUBCASE("significance is monotone in alpha and Bonferroni set is nested") {
        auto strict_rows = compare_variants(kBaseline, variants, 0.01);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (strict_rows[i].significant) CHECK(rows[i].significant);
            // Bonferroni-corrected significance implies uncorrected
            if (rows[i].significant) CHECK(rows[i].p < 0.05);
        }
    }
}

TEST_CASE("aggregate uses the n-1 convention and flags single runs") {
    SUBCASE("three-seed row from the seed-fix table") {
        std::vector<RunResult> runs = {{"sft", 53.90}, {"sft", 55.19}, {"sft", 53.98}};
        auto stats = aggregate(runs);
        REQUIRE(stats.size() == 1);
        CHECK(stats[0].mean == doctest::Approx(54.36).epsilon(1e-3));
        CHECK(stats[0].n == 3);
        // published sigma 0.59 came from unrounded data; the pinned n-1
        // convention lands within 0.15 of it
        CHECK(std::fabs(stats[0].std - 0.59) <= 0.15);
        CHECK(stats[0].std == doctest::Approx(0.7228).epsilon(1e-3));
    }
    SUBCASE("single run is flagged untestable") {
        auto stats = aggregate({{"dpo", 50.0}});
        REQUIRE(stats.size() == 1);
        CHECK(stats[0].n == 1);
        CHECK(std::isnan(stats[0].std));
    }
    SUBCASE("order independence") {
        std::vector<RunResult> runs = {{"a", 1.0}, {"b", 2.0}, {"a", 3.0}};
        std::vector<RunResult> perm = {{"b", 2.0}, {"a", 3.0}, {"a", 1.0}};
        auto s1 = aggregate(runs), s2 = aggregate(perm);
        REQUIRE(s1.size() == s2.size());
        for (std::size_t i = 0; i < s1.size(); ++i) {
            CHECK(s1[i].algorithm == s2[i].algorithm);
            CHECK(s1[i].mean == doctest::Approx(s2[i].mean));
        }
    }
}

TEST_CASE("two-sample power") {
    SUBCASE("null effect has power alpha") {
        CHECK(power_two_sample(0.0, 5, 0.05) == doctest::Approx(0.05).epsilon(1e-4));
    }
    SUBCASE("monotone in d and n") {
        double prev = 0.0;
        for (double d : {0.2, 0.5, 0.8, 1.2, 1.8}) {
            const double p = power_two_sample(d, 5, 0.05);
            CHECK(p > prev);
            prev = p;
        }
        prev = 0.0;
        for (int n : {3, 5, 10, 20, 40}) {
            const double p = power_two_sample(0.8, n, 0.05);
            CHECK(p > prev);
            prev = p;
        }
    }
    SUBCASE("the 5-seed design's computed power at d = 0.8 is reported as ~20%") {
        // the 80% design claim does not match the standard two-sample quantity;
        // the computed value is reported alongside the claim, not forced to it
        const double p = power_two_sample(0.8, 5, 0.05);
        CHECK(p == doctest::Approx(0.2007).epsilon(2e-3));
        CHECK(std::fabs(p - 0.80) > 0.5);  // the discrepancy is real and visible
    }
}
