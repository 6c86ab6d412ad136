#pragma once

// FIB-4 and FIB-5 serum-index calculators and cutoff classifiers, the
// benchmark against the boosted-tree models. Closed forms are pinned here as
// configuration constants: FIB-4 after Vallet-Pichard, FIB-5 after the
// Fibrofast formulation. Albumin unit conversion (g/dL -> g/L) lives here and
// nowhere else.

#include <cmath>
#include <string>
#include <vector>

#include "ch/error.hpp"
#include "ch/features.hpp"

namespace ch {

struct SerumPanel {
    double age_years = 0.0;
    double ast_u_per_l = 0.0;
    double alt_u_per_l = 0.0;
    double platelets_1e9_per_l = 0.0;
    double albumin_g_per_dl = 0.0;
    double alp_u_per_l = 0.0;
};

// Recommended low-risk cutoffs (score below the cutoff rules out).
inline constexpr double kFib4LowRiskCutoff = 2.02;
inline constexpr double kFib5LowRiskCutoff = -7.11;

// Published operating characteristics at those cutoffs, shown in report
// footnotes for reference only; they describe a different cohort.
inline constexpr double kFib4ReferenceSensitivity = 0.468;
inline constexpr double kFib4ReferenceSpecificity = 0.864;
inline constexpr double kFib5ReferenceSensitivity = 0.818;
inline constexpr double kFib5ReferenceSpecificity = 0.468;

// age * AST / (platelets * sqrt(ALT)), platelets in 10^9/L.
inline double fib4(const SerumPanel& panel) {
    if (!(panel.alt_u_per_l > 0.0)) {
        throw_error(ErrorKind::domain, "FIB-4 requires ALT > 0");
    }
    if (!(panel.platelets_1e9_per_l > 0.0)) {
        throw_error(ErrorKind::domain, "FIB-4 requires platelets > 0");
    }
    return panel.age_years * panel.ast_u_per_l /
           (panel.platelets_1e9_per_l * std::sqrt(panel.alt_u_per_l));
}

struct Fib5Coefficients {
    double albumin_per_g_l = 0.3;
    double platelets = 0.05;
    double alp = 0.014;
    double ast_alt_ratio = 6.0;
    double constant = 14.0;
};

// (albumin[g/L] * 0.3 + platelets * 0.05) - (ALP * 0.014 + AST/ALT * 6 + 14).
inline double fib5(const SerumPanel& panel, const Fib5Coefficients& k = {}) {
    if (!(panel.alt_u_per_l > 0.0)) {
        throw_error(ErrorKind::domain, "FIB-5 requires ALT > 0");
    }
    const double albumin_g_per_l = panel.albumin_g_per_dl * 10.0;
    return albumin_g_per_l * k.albumin_per_g_l + panel.platelets_1e9_per_l * k.platelets -
           (panel.alp_u_per_l * k.alp +
            (panel.ast_u_per_l / panel.alt_u_per_l) * k.ast_alt_ratio + k.constant);
}

enum class RiskClass { low_risk, elevated };

inline std::string to_string(RiskClass c) {
    return c == RiskClass::low_risk ? "low_risk" : "elevated";
}

enum class CutoffDirection { lt_is_low_risk, gt_is_low_risk };

// Strict inequality; a score exactly at the cutoff is elevated.
inline RiskClass classify_cutoff(double score, double cutoff, CutoffDirection direction) {
    const bool low = direction == CutoffDirection::lt_is_low_risk ? score < cutoff : score > cutoff;
    return low ? RiskClass::low_risk : RiskClass::elevated;
}

namespace detail {

inline double required_cell(const FeatureMatrix& m, std::size_t row, std::size_t col) {
    if (m.is_missing(row, col)) {
        throw_error(ErrorKind::data, "row " + m.patient_ids[row] + ": required value for '" +
                                         m.schema.columns[col] + "' is missing");
    }
    return m.at(row, col);
}

} // namespace detail

// Row-wise FIB-4 over window-mean labs and age at prediction.
inline std::vector<double> fib4_for_cohort(const FeatureMatrix& m) {
    const std::size_t age = m.schema.column_index("age_at_prediction");
    const std::size_t ast = m.schema.column_index("lab_1920-8_mean");
    const std::size_t alt = m.schema.column_index("lab_1742-6_mean");
    const std::size_t plt = m.schema.column_index("lab_26515-7_mean");
    std::vector<double> scores;
    scores.reserve(m.n_rows());
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        SerumPanel p;
        p.age_years = detail::required_cell(m, r, age);
        p.ast_u_per_l = detail::required_cell(m, r, ast);
        p.alt_u_per_l = detail::required_cell(m, r, alt);
        p.platelets_1e9_per_l = detail::required_cell(m, r, plt);
        try {
            scores.push_back(fib4(p));
        } catch (const Error& e) {
            throw_error(e.kind(), "row " + m.patient_ids[r] + ": " + e.what());
        }
    }
    return scores;
}

inline std::vector<double> fib5_for_cohort(const FeatureMatrix& m) {
    const std::size_t ast = m.schema.column_index("lab_1920-8_mean");
    const std::size_t alt = m.schema.column_index("lab_1742-6_mean");
    const std::size_t plt = m.schema.column_index("lab_26515-7_mean");
    const std::size_t alb = m.schema.column_index("lab_1751-7_mean");
    const std::size_t alp = m.schema.column_index("lab_6768-6_mean");
    std::vector<double> scores;
    scores.reserve(m.n_rows());
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        SerumPanel p;
        p.ast_u_per_l = detail::required_cell(m, r, ast);
        p.alt_u_per_l = detail::required_cell(m, r, alt);
        p.platelets_1e9_per_l = detail::required_cell(m, r, plt);
        p.albumin_g_per_dl = detail::required_cell(m, r, alb);
        p.alp_u_per_l = detail::required_cell(m, r, alp);
        try {
            scores.push_back(fib5(p));
        } catch (const Error& e) {
            throw_error(e.kind(), "row " + m.patient_ids[r] + ": " + e.what());
        }
    }
    return scores;
}

} // namespace ch
