#include <doctest.h>

#include <cmath>

#include "ch/baselines.hpp"

using namespace ch;

namespace {

SerumPanel panel(double age, double ast, double plt, double alt, double albumin = 4.0,
                 double alp = 100.0) {
    SerumPanel p;
    p.age_years = age;
    p.ast_u_per_l = ast;
    p.platelets_1e9_per_l = plt;
    p.alt_u_per_l = alt;
    p.albumin_g_per_dl = albumin;
    p.alp_u_per_l = alp;
    return p;
}

} // namespace

TEST_CASE("fib4 hand example") {
    // 61 * 80 / (150 * sqrt(49)) = 4880 / 1050
    CHECK(fib4(panel(61, 80, 150, 49)) == doctest::Approx(4880.0 / 1050.0).epsilon(1e-12));
    CHECK(std::abs(fib4(panel(61, 80, 150, 49)) - 4.647619047619048) < 1e-9);
}

TEST_CASE("fib4 limits and domain errors") {
    CHECK(fib4(panel(61, 0, 150, 49)) == 0.0); // zero numerator
    CHECK_THROWS_AS(fib4(panel(61, 80, 0, 49)), Error);
    CHECK_THROWS_AS(fib4(panel(61, 80, 150, 0)), Error);
}

TEST_CASE("fib4 is scale-invariant in (AST, platelets) jointly") {
    const double base = fib4(panel(61, 80, 150, 49));
    const double doubled = fib4(panel(61, 160, 300, 49));
    CHECK(std::abs(base - doubled) < 1e-12);
}

TEST_CASE("fib4 monotonicity directions") {
    const double base = fib4(panel(61, 80, 150, 49));
    CHECK(fib4(panel(62, 80, 150, 49)) > base);
    CHECK(fib4(panel(61, 81, 150, 49)) > base);
    CHECK(fib4(panel(61, 80, 151, 49)) < base);
    CHECK(fib4(panel(61, 80, 150, 50)) < base);
}

TEST_CASE("fib5 hand example") {
    // albumin 4.0 g/dL -> 40 g/L: 12 + 10 - 1.4 - 6 - 14 = 0.6
    CHECK(fib5(panel(0, 50, 200, 50, 4.0, 100.0)) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("fib5 constant floor and linearity") {
    // all contributions zero except the constant
    CHECK(fib5(panel(0, 0, 0, 1.0, 0.0, 0.0)) == doctest::Approx(-14.0));

    const double base = fib5(panel(0, 50, 200, 50, 4.0, 100.0));
    CHECK(fib5(panel(0, 50, 220, 50, 4.0, 100.0)) - base == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fib5 slopes match the stated coefficients to 1e-12") {
    auto at = [&](double albumin, double plt, double alp, double ratio) {
        return fib5(panel(0, ratio * 50.0, plt, 50.0, albumin, alp));
    };
    const double f0 = at(4.0, 200, 100, 1.0);
    // albumin: +0.3 per g/L -> +3 per g/dL
    CHECK(std::abs((at(5.0, 200, 100, 1.0) - f0) - 3.0) < 1e-12);
    CHECK(std::abs((at(4.0, 201, 100, 1.0) - f0) - 0.05) < 1e-12);
    CHECK(std::abs((at(4.0, 200, 101, 1.0) - f0) + 0.014) < 1e-12);
    CHECK(std::abs((at(4.0, 200, 100, 2.0) - f0) + 6.0) < 1e-12);
}

TEST_CASE("classify_cutoff uses strict inequality") {
    CHECK(classify_cutoff(1.50, 2.02, CutoffDirection::lt_is_low_risk) == RiskClass::low_risk);
    CHECK(classify_cutoff(2.02, 2.02, CutoffDirection::lt_is_low_risk) == RiskClass::elevated);
    CHECK(classify_cutoff(-8.0, -7.11, CutoffDirection::lt_is_low_risk) == RiskClass::low_risk);
    CHECK(classify_cutoff(3.0, 2.02, CutoffDirection::gt_is_low_risk) == RiskClass::low_risk);
    CHECK(classify_cutoff(2.02, 2.02, CutoffDirection::gt_is_low_risk) == RiskClass::elevated);
}

TEST_CASE("classify_cutoff is monotone in the score") {
    double previous_rank = 0.0;
    for (double score : {-3.0, -1.0, 2.01, 2.02, 2.03, 5.0}) {
        const double rank =
            classify_cutoff(score, 2.02, CutoffDirection::lt_is_low_risk) == RiskClass::elevated
                ? 1.0
                : 0.0;
        CHECK(rank >= previous_rank);
        previous_rank = rank;
    }
}

namespace {

FeatureMatrix matrix_fixture(double alt_mean) {
    CcsMap empty_ccs; // default-constructed: no categories
    FeatureMatrix m;
    m.schema = FeatureSchema::create(empty_ccs);
    m.patient_ids = {"R1", "R2"};
    m.labels = {1, 0};
    m.values.assign(2 * m.schema.columns.size(), 0.0);
    m.missing.assign(2 * m.schema.columns.size(), 0);
    auto set = [&](std::size_t row, const std::string& col, double v) {
        m.values[row * m.schema.columns.size() + m.schema.column_index(col)] = v;
    };
    for (std::size_t r = 0; r < 2; ++r) {
        set(r, "age_at_prediction", 61.0);
        set(r, "lab_1920-8_mean", 80.0);
        set(r, "lab_1742-6_mean", alt_mean);
        set(r, "lab_26515-7_mean", 150.0);
        set(r, "lab_1751-7_mean", 4.0);
        set(r, "lab_6768-6_mean", 100.0);
    }
    return m;
}

} // namespace

TEST_CASE("fib4_for_cohort composes the scalar formula row-wise") {
    auto m = matrix_fixture(49.0);
    auto scores = fib4_for_cohort(m);
    REQUIRE(scores.size() == 2);
    CHECK(std::abs(scores[0] - 4880.0 / 1050.0) < 1e-12);
    CHECK(scores[0] == scores[1]); // identical rows, identical scores
}

TEST_CASE("fib4_for_cohort surfaces the failing row id") {
    auto m = matrix_fixture(0.0);
    CHECK_THROWS_WITH_AS(static_cast<void>(fib4_for_cohort(m)), doctest::Contains("R1"), Error);

    auto missing_col = matrix_fixture(49.0);
    missing_col.schema.columns[missing_col.schema.column_index("lab_1920-8_mean")] = "other";
    CHECK_THROWS_AS(static_cast<void>(fib4_for_cohort(missing_col)), Error);
}

TEST_CASE("fib5_for_cohort matches the scalar formula") {
    auto m = matrix_fixture(80.0); // AST/ALT = 1
    auto scores = fib5_for_cohort(m);
    SerumPanel p = panel(61, 80, 150, 80, 4.0, 100.0);
    CHECK(scores[0] == doctest::Approx(fib5(p)).epsilon(1e-12));
}
