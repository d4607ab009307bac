#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ptbench/evaluator.hpp"
#include "ptbench/vocab.hpp"

using namespace ptbench;

TEST_CASE("strict extraction") {
    CHECK(extract_strict("so the total is 40 then #### 42") == 42);
    CHECK(extract_strict("the answer is 42.") == std::nullopt);
    CHECK(extract_strict("#### 42 junk #### 17") == 17);  // final marker wins
    CHECK(extract_strict("#### -7") == -7);
    CHECK(extract_strict("ends with marker ####") == std::nullopt);
    CHECK(extract_strict("#### junk 42") == std::nullopt);
    CHECK(extract_strict("") == std::nullopt);
}

TEST_CASE("flexible extraction") {
    CHECK(extract_flexible("the answer is 42.") == 42);
    CHECK(extract_flexible("no digits here") == std::nullopt);
    CHECK(extract_flexible("first 7 then 9") == 9);
    CHECK(extract_flexible("#### 42") == 42);
    CHECK(extract_flexible("negative -13 here") == -13);
}

TEST_CASE("evaluate is deterministic and handles the perfect-policy case via gold echo") {
    // an untrained model scores ~0; determinism is the load-bearing property
    ModelConfig mc;
    auto params = ModelParams::random_init(mc, {}, 3);
    auto problems = generate_problems(7, 24, difficulty_from_name("1step"), Split::test);
    auto a = evaluate(params, problems);
    auto b = evaluate(params, problems);
    CHECK(a.summary.strict_accuracy == b.summary.strict_accuracy);
    CHECK(a.summary.flexible_accuracy == b.summary.flexible_accuracy);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].tokens == b.records[i].tokens);
    }
    CHECK(a.summary.n_problems == 24);
    CHECK(a.summary.format_gap ==
          doctest::Approx(a.summary.strict_accuracy - a.summary.flexible_accuracy));

    SUBCASE("parallel evaluation equals the serial reference bit-for-bit") {
        auto s = evaluate_serial(params, problems);
        CHECK(s.summary.strict_accuracy == a.summary.strict_accuracy);
        for (std::size_t i = 0; i < s.records.size(); ++i) {
            CHECK(s.records[i].tokens == a.records[i].tokens);
        }
    }
}

TEST_CASE("gold responses evaluated as model output give 100 percent") {
    // feed gold responses through the extraction path directly
    auto problems = generate_problems(9, 50, difficulty_from_name("mix12"), Split::train);
    int strict = 0, flexible = 0;
    for (const auto& p : problems) {
        const std::string text = vocab::detokenize(p.gold_response);
        auto s = extract_strict(text);
        auto f = extract_flexible(text);
        if (s && *s == p.gold_answer) ++strict;
        if (f && *f == p.gold_answer) ++flexible;
    }
    CHECK(strict == 50);
    CHECK(flexible == 50);
}

TEST_CASE("format gap reproduces recorded accuracy-pair arithmetic") {
    EvalSummary s;
    s.strict_accuracy = 85.82;
    s.flexible_accuracy = 80.97;
    s.format_gap = s.strict_accuracy - s.flexible_accuracy;
    CHECK(s.format_gap == doctest::Approx(4.85).epsilon(1e-9));
}

TEST_CASE("extractor implication audit finds no counterexamples corpus-wide") {
    ModelConfig mc;
    auto params = ModelParams::random_init(mc, {}, 11);
    auto problems = generate_problems(13, 64, difficulty_from_name("mix12"), Split::train);
    auto result = evaluate(params, problems);
    auto violations = extract_implication_violations(result.records);
    CHECK(violations.empty());
    if (!violations.empty()) {
        for (const auto* rec : violations) MESSAGE("counterexample: ", rec->text);
    }
}

TEST_CASE("spread") {
    std::vector<double> gsm = {58.00, 54.36, 51.15, 49.08, 38.67};
    CHECK(spread(gsm) == doctest::Approx(19.33).epsilon(1e-9));
    std::vector<double> math_scores = {27.04, 26.72, 26.64, 26.58, 26.50};
    CHECK(spread(math_scores) == doctest::Approx(0.54).epsilon(1e-9));
    std::vector<double> singleton = {42.0};
    CHECK(spread(singleton) == 0.0);
}

TEST_CASE("rank correlation") {
    SUBCASE("published cross-task rankings give exactly zero") {
        std::map<std::string, double> gsm8k = {{"sgrpo", 58.00},
                                               {"sft", 54.36},
                                               {"kto", 51.15},
                                               {"dpo", 49.08},
                                               {"simpo", 38.67}};
        std::map<std::string, double> math_scores = {{"sft", 27.04},
                                                     {"simpo", 26.72},
                                                     {"kto", 26.64},
                                                     {"sgrpo", 26.58},
                                                     {"dpo", 26.50}};
        CHECK(rank_correlation(gsm8k, math_scores) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("identity and antisymmetry") {
        std::map<std::string, double> a = {{"x", 3.0}, {"y", 2.0}, {"z", 1.0}};
        CHECK(rank_correlation(a, a) == doctest::Approx(1.0));
        std::map<std::string, double> rev = {{"x", 1.0}, {"y", 2.0}, {"z", 3.0}};
        CHECK(rank_correlation(a, rev) == doctest::Approx(-1.0));
    }
    SUBCASE("ties share average ranks") {
        std::map<std::string, double> a = {{"x", 1.0}, {"y", 1.0}, {"z", 0.0}};
        std::map<std::string, double> b = {{"x", 2.0}, {"y", 1.0}, {"z", 0.0}};
        CHECK(std::isfinite(rank_correlation(a, b)));
    }
    SUBCASE("key mismatch and tiny inputs are domain errors") {
        std::map<std::string, double> a = {{"x", 1.0}, {"y", 2.0}};
        std::map<std::string, double> b = {{"x", 1.0}, {"q", 2.0}};
        CHECK_THROWS_AS(rank_correlation(a, b), std::domain_error);
        std::map<std::string, double> single = {{"x", 1.0}};
        CHECK_THROWS_AS(rank_correlation(single, single), std::domain_error);
    }
}
