#pragma once

// Config-driven synthetic EHR generator calibrated to the published group
// statistics, so the full pipeline can run at desk scale without private
// data. Draws are group-conditional and independent across variables (only
// marginals are published); the group gap on each signal variable is the
// planted multivariate signal.
//
// Mechanics worth knowing:
//  - Each member gets one window-1 prediction point (cases: index date minus
//    the window; controls: an anchor encounter within +/-7 days of some
//    case's prediction point, plus matching anchors one and two years
//    earlier so longer-window runs can re-match them).
//  - The mean Charlson index is planted by stamping weight-1 comorbidity
//    codes on encounter dates: floor(target) categories on every encounter
//    and one extra category on round(frac * n) of them, so the per-encounter
//    average recovers the drawn target.
//  - The fatty-liver entry code is dated before the first encounter (a day
//    with no encounter does not enter the per-encounter CCI).
//  - Lab/vital measurement dates are stratified across the member's history
//    depth, so complete-case survival at longer windows tracks history depth.

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ch/cohort.hpp"
#include "ch/date.hpp"
#include "ch/features.hpp"
#include "ch/records.hpp"
#include "ch/rng.hpp"

namespace ch {

enum class DistKind { truncated_normal, lognormal };

struct ContinuousSpec {
    double mean = 0.0;
    double sd = 0.0;
    DistKind dist = DistKind::truncated_normal;
    double clamp_lo = 0.0; // draws are rejected at or below this
    double clamp_hi = std::numeric_limits<double>::infinity();
};

struct GroupSpec {
    ContinuousSpec age;
    ContinuousSpec cci;
    ContinuousSpec bmi, dbp, sbp;
    std::map<std::string, ContinuousSpec> labs; // keyed by LOINC
    std::vector<double> gender_probs;           // aligned to gender_levels()
    std::vector<double> race_probs;             // aligned to race_levels()
    std::vector<double> marital_probs;          // aligned to marital_levels()
    std::vector<double> rucc_probs;             // aligned to rucc_levels()
    std::map<int, double> ccs_prevalence;       // CCS category id -> P(flag)
};

struct GeneratorConfig {
    std::size_t n_cases = 904;
    std::size_t n_controls = 2139;
    int window_years = 1; // anchor window for prediction points
    GroupSpec control;
    GroupSpec lc_case;
    std::vector<std::string> signal_variables; // names expected to differ by group
    double encounters_per_year = 10.0;
    double measurements_per_series_per_year = 2.0;
    double coverage_years_min = 0.25;
    double coverage_years_max = 6.0;
    double panel_incomplete_fraction = 0.08;
    Date index_date_min = Date(2016, 1, 1);
    Date index_date_max = Date(2019, 12, 31);
    std::map<int, std::string> fips_by_rucc; // representative county per RUCC code
    std::uint64_t rng_seed = 7;

    void validate() const;
};

struct GeneratedMember {
    std::string patient_id;
    int label = 0; // 1 = case
    std::optional<Date> index_date;
    Date prediction_point; // window-1 anchor
};

struct GeneratedData {
    ClinicalRecordSet records;
    std::vector<GeneratedMember> truth;
};

namespace synth_detail {

// Weight-1 Quan categories used to plant the Charlson index. None of these
// codes maps to the demo CCS table, so CCI planting does not disturb the
// configured CCS prevalences (and vice versa).
struct PlantCode {
    IcdVersion version;
    const char* code;
};

inline const std::vector<std::array<PlantCode, 2>>& charlson_weight1_codes() {
    static const std::vector<std::array<PlantCode, 2>> codes = {
        {{{IcdVersion::icd9, "4280"}, {IcdVersion::icd10, "I509"}}},   // chf
        {{{IcdVersion::icd9, "5319"}, {IcdVersion::icd10, "K259"}}},   // pud
        {{{IcdVersion::icd9, "2900"}, {IcdVersion::icd10, "F039"}}},   // dementia
        {{{IcdVersion::icd9, "4109"}, {IcdVersion::icd10, "I219"}}},   // mi
        {{{IcdVersion::icd9, "4439"}, {IcdVersion::icd10, "I739"}}},   // pvd
        {{{IcdVersion::icd9, "43491"}, {IcdVersion::icd10, "I639"}}},  // cvd
    };
    return codes;
}

// Concrete codes per demo CCS category; all map through data/ccs_map.csv and
// none collides with the Quan Charlson prefixes.
inline const std::map<int, std::vector<PlantCode>>& ccs_plant_codes() {
    static const std::map<int, std::vector<PlantCode>> codes = {
        {1, {{IcdVersion::icd10, "E669"}, {IcdVersion::icd10, "E039"},
             {IcdVersion::icd9, "27800"}, {IcdVersion::icd9, "2449"}}},
        {2, {{IcdVersion::icd10, "E785"}, {IcdVersion::icd9, "2724"}}},
        {3, {{IcdVersion::icd10, "K759"}, {IcdVersion::icd10, "K7581"},
             {IcdVersion::icd9, "5730"}}},
        {4, {{IcdVersion::icd10, "J189"}, {IcdVersion::icd10, "J209"},
             {IcdVersion::icd9, "4860"}}},
        {5, {{IcdVersion::icd10, "K219"}, {IcdVersion::icd10, "K2970"},
             {IcdVersion::icd9, "53081"}}},
        {6, {{IcdVersion::icd10, "M359"}, {IcdVersion::icd10, "M797"},
             {IcdVersion::icd9, "7291"}}},
        {7, {{IcdVersion::icd10, "G439"}, {IcdVersion::icd10, "G4700"},
             {IcdVersion::icd9, "34590"}, {IcdVersion::icd9, "32723"}}},
        {8, {{IcdVersion::icd10, "M47816"}, {IcdVersion::icd9, "7210"}}},
        {9, {{IcdVersion::icd10, "M545"}, {IcdVersion::icd9, "7242"}}},
        {10, {{IcdVersion::icd10, "I10"}, {IcdVersion::icd9, "4019"}}},
        {11, {{IcdVersion::icd10, "F329"}, {IcdVersion::icd9, "3110"}}},
    };
    return codes;
}

inline const std::vector<PlantCode>& fatty_liver_codes() {
    static const std::vector<PlantCode> codes = {{IcdVersion::icd9, "5718"},
                                                 {IcdVersion::icd10, "K760"}};
    return codes;
}

inline const std::vector<PlantCode>& lc_codes() {
    static const std::vector<PlantCode> codes = {{IcdVersion::icd9, "5712"},
                                                 {IcdVersion::icd9, "5713"},
                                                 {IcdVersion::icd10, "K7460"},
                                                 {IcdVersion::icd10, "K7030"}};
    return codes;
}

// Mills-ratio based hazard phi(a) / (1 - Phi(a)).
inline double normal_hazard(double alpha) {
    if (alpha > 25.0) {
        // asymptotic form; the erfc tail underflows far out
        const double a2 = alpha * alpha;
        return alpha / (1.0 - 1.0 / a2 + 3.0 / (a2 * a2) - 15.0 / (a2 * a2 * a2));
    }
    const double phi = std::exp(-0.5 * alpha * alpha) / std::sqrt(2.0 * M_PI);
    const double tail = 0.5 * std::erfc(alpha / std::sqrt(2.0));
    return phi / tail;
}

// Pre-truncation (mu, sigma) such that N(mu, sigma) truncated to (0, inf)
// has the target mean and sd. Solved by bisection on alpha = -mu/sigma; the
// attainable sd/mean ratio of an at-zero-truncated normal is (0, 1).
inline std::pair<double, double> truncated_normal_params(double mean, double sd) {
    if (!(mean > 0.0)) {
        throw_error(ErrorKind::config, "truncated normal requires mean > 0");
    }
    const double ratio = sd / mean;
    if (ratio < 0.005) return {mean, sd}; // truncation bias beyond any tolerance
    if (ratio >= 0.995) {
        throw_error(ErrorKind::config,
                    "truncated normal cannot reach sd/mean >= 1; use the lognormal");
    }
    const double target = ratio * ratio;
    auto ratio2 = [](double alpha) {
        const double l = normal_hazard(alpha);
        const double m = l - alpha;
        const double v = 1.0 + alpha * l - l * l;
        return v / (m * m);
    };
    double lo = -500.0, hi = 30.0;
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = (lo + hi) / 2.0;
        if (ratio2(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double alpha = (lo + hi) / 2.0;
    const double sigma = mean / (normal_hazard(alpha) - alpha);
    return {-alpha * sigma, sigma};
}

inline double draw_continuous(Rng& rng, const ContinuousSpec& spec) {
    if (spec.sd == 0.0) return spec.mean;
    if (spec.dist == DistKind::lognormal) {
        const double sigma2 = std::log(1.0 + (spec.sd * spec.sd) / (spec.mean * spec.mean));
        const double mu = std::log(spec.mean) - sigma2 / 2.0;
        const double sigma = std::sqrt(sigma2);
        double v;
        do {
            v = std::exp(rng.normal(mu, sigma));
        } while (v <= spec.clamp_lo || v > spec.clamp_hi);
        return v;
    }
    // memoized moment-matched parameters per (mean, sd)
    thread_local std::map<std::pair<double, double>, std::pair<double, double>> memo;
    auto [it, inserted] = memo.try_emplace({spec.mean, spec.sd});
    if (inserted) it->second = truncated_normal_params(spec.mean, spec.sd);
    const auto [mu, sigma] = it->second;
    double v;
    do {
        v = rng.normal(mu, sigma);
    } while (v <= spec.clamp_lo || v > spec.clamp_hi);
    return v;
}

inline std::size_t draw_categorical(Rng& rng, const std::vector<double>& probs) {
    const double u = rng.uniform();
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last_positive = i;
        cum += probs[i];
        if (u < cum) return i;
    }
    // float residue: fall back to the last level with positive mass
    return last_positive;
}

inline void check_probs(const std::vector<double>& probs, std::size_t expected,
                        const std::string& name) {
    if (probs.size() != expected) {
        throw_error(ErrorKind::config, name + ": expected " + std::to_string(expected) +
                                           " proportions, got " + std::to_string(probs.size()));
    }
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw_error(ErrorKind::config, name + ": negative proportion");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw_error(ErrorKind::config, name + ": proportions must sum to 1");
    }
}

} // namespace synth_detail

inline void GeneratorConfig::validate() const {
    if (window_years < 1 || window_years > 3) {
        throw_error(ErrorKind::config, "window_years must be 1, 2 or 3");
    }
    if (!(encounters_per_year > 0.0) || !(measurements_per_series_per_year > 0.0)) {
        throw_error(ErrorKind::config, "event intensities must be > 0");
    }
    if (!(coverage_years_min > 0.0) || coverage_years_max < coverage_years_min) {
        throw_error(ErrorKind::config, "invalid history coverage range");
    }
    if (panel_incomplete_fraction < 0.0 || panel_incomplete_fraction >= 1.0) {
        throw_error(ErrorKind::config, "panel_incomplete_fraction must be in [0, 1)");
    }
    if (index_date_max < index_date_min) {
        throw_error(ErrorKind::config, "index date range is reversed");
    }
    if (n_cases > 0 && index_date_min.year() - 1 - static_cast<int>(coverage_years_max) < 1) {
        throw_error(ErrorKind::config, "index dates leave no room for history");
    }
    for (const GroupSpec* g : {&control, &lc_case}) {
        synth_detail::check_probs(g->gender_probs, gender_levels().size(), "gender");
        synth_detail::check_probs(g->race_probs, race_levels().size(), "race");
        synth_detail::check_probs(g->marital_probs, marital_levels().size(), "marital");
        synth_detail::check_probs(g->rucc_probs, rucc_levels().size(), "rucc");
        if (g->labs.size() != default_loinc_panel().size()) {
            throw_error(ErrorKind::config, "lab specs must cover the 9-analyte panel");
        }
        for (const auto& [loinc, spec] : g->labs) {
            if (spec.sd < 0.0) throw_error(ErrorKind::config, loinc + ": sd must be >= 0");
            if (spec.dist == DistKind::lognormal && !(spec.mean > 0.0)) {
                throw_error(ErrorKind::config, loinc + ": lognormal needs mean > 0");
            }
        }
        for (const auto& [cat, p] : g->ccs_prevalence) {
            if (p < 0.0 || p > 1.0) {
                throw_error(ErrorKind::config,
                            "ccs_" + std::to_string(cat) + ": prevalence must be in [0,1]");
            }
            if (!synth_detail::ccs_plant_codes().count(cat)) {
                throw_error(ErrorKind::config, "no demo diagnosis codes for CCS category " +
                                                   std::to_string(cat));
            }
        }
        if (g->ccs_prevalence.size() != control.ccs_prevalence.size()) {
            throw_error(ErrorKind::config, "both groups must configure the same CCS categories");
        }
    }
    // Signal names are declarative metadata; they must reference real variables.
    std::set<std::string> known = {"gender", "race", "marital", "rucc",
                                   "age",    "cci",  "bmi",     "dbp",  "sbp"};
    for (const auto& loinc : default_loinc_panel()) known.insert("lab_" + loinc);
    for (const auto& [cat, p] : control.ccs_prevalence) {
        known.insert("ccs_" + std::to_string(cat));
    }
    for (const auto& name : signal_variables) {
        if (!known.count(name)) {
            throw_error(ErrorKind::config, "signal variable '" + name + "' does not exist");
        }
    }
}

// --------------------------------------------------------------------------
// Default calibration (per-window published group statistics)

namespace synth_detail {

struct VariableCalibration {
    const char* name; // "age", "cci", "bmi", "dbp", "sbp" or a LOINC
    double overall_mean, overall_sd;
    double control_mean, control_sd;
    double case_mean, case_sd;
    DistKind dist;
};

struct WindowCalibration {
    std::size_t n_controls, n_cases;
    std::vector<VariableCalibration> continuous;
    // counts per fixed level order (see features.hpp); overall, control, case
    std::vector<std::array<std::vector<double>, 3>> categorical; // gender, race, marital, rucc
};

inline const WindowCalibration& window_calibration(int window_years) {
    static const WindowCalibration w1 = {
        2139,
        904,
        {
            {"age", 55.8, 13.3, 55.5, 13.9, 56.8, 11.9, DistKind::truncated_normal},
            {"cci", 0.3, 0.4, 0.3, 0.4, 0.4, 0.4, DistKind::lognormal},
            {"bmi", 33.1, 8.3, 33.5, 8.5, 32.3, 7.7, DistKind::truncated_normal},
            {"dbp", 79.2, 7.2, 79.3, 7.1, 79.0, 7.4, DistKind::truncated_normal},
            {"sbp", 131.8, 12.7, 131.6, 12.5, 132.3, 13.3, DistKind::truncated_normal},
            {"1742-6", 36.4, 36.6, 33.1, 36.6, 44.2, 35.6, DistKind::lognormal},
            {"1751-7", 4.1, 4.6, 4.2, 0.5, 3.8, 0.5, DistKind::truncated_normal},
            {"1920-8", 36.4, 32.7, 31.3, 29.3, 48.4, 36.8, DistKind::lognormal},
            {"1975-2", 0.7, 0.7, 0.6, 0.5, 1.0, 0.8, DistKind::lognormal},
            {"26515-7", 227.9, 89.3, 243.2, 81.4, 191.7, 96.5, DistKind::truncated_normal},
            {"2885-2", 7.0, 0.6, 7.0, 0.5, 7.1, 0.6, DistKind::truncated_normal},
            {"5902-2", 14.3, 2.7, 14.2, 2.6, 14.8, 3.0, DistKind::lognormal},
            {"6768-6", 92.4, 66.5, 85.0, 42.9, 109.9, 100.5, DistKind::lognormal},
            {"718-7", 12.9, 1.7, 12.9, 1.7, 13.0, 1.8, DistKind::truncated_normal},
        },
        {
            // gender: Female, Male, Unknown
            {{{1767, 1275, 1}, {1295, 843, 1}, {472, 432, 0}}},
            // race: Asian, Black, Decline, Hispanic, Multiple, Native American, White, Unknown
            {{{83, 973, 11, 29, 1, 5, 1941, 0},
              {63, 748, 10, 23, 1, 4, 1290, 0},
              {20, 225, 1, 6, 0, 1, 651, 0}}},
            // marital: Divorced, Life Partner, Married, Separated, Single, Widowed, Unknown
            {{{362, 14, 1457, 41, 852, 263, 54},
              {261, 12, 1024, 30, 585, 189, 38},
              {101, 2, 433, 11, 267, 74, 16}}},
            // rucc: 1..9, Unknown
            {{{2235, 221, 198, 176, 18, 61, 12, 75, 47, 0},
              {1683, 115, 107, 110, 9, 36, 7, 46, 26, 0},
              {552, 106, 91, 66, 9, 25, 5, 29, 21, 0}}},
        },
    };
    static const WindowCalibration w2 = {
        1473,
        508,
        {
            {"age", 55.3, 13.5, 55.2, 13.8, 55.3, 12.7, DistKind::truncated_normal},
            {"cci", 0.3, 0.4, 0.3, 0.4, 0.3, 0.3, DistKind::lognormal},
            {"bmi", 33.2, 8.1, 33.6, 8.1, 32.2, 7.9, DistKind::truncated_normal},
            {"dbp", 79.4, 6.9, 79.2, 6.8, 80.0, 6.9, DistKind::truncated_normal},
            {"sbp", 132.0, 12.3, 131.7, 12.3, 132.9, 12.3, DistKind::truncated_normal},
            {"1742-6", 36.0, 41.3, 32.6, 38.8, 46.1, 46.3, DistKind::lognormal},
            {"1751-7", 4.3, 7.8, 4.5, 0.4, 3.9, 0.4, DistKind::truncated_normal},
            {"1920-8", 35.1, 34.5, 30.4, 29.3, 48.7, 43.8, DistKind::lognormal},
            {"1975-2", 0.7, 0.6, 0.6, 0.5, 0.9, 0.8, DistKind::lognormal},
            {"26515-7", 234.1, 79.6, 241.8, 75.7, 211.8, 86.2, DistKind::truncated_normal},
            {"2885-2", 7.1, 0.6, 7.0, 0.5, 7.1, 0.6, DistKind::truncated_normal},
            {"5902-2", 14.2, 2.6, 14.1, 2.5, 14.5, 2.9, DistKind::lognormal},
            {"6768-6", 89.3, 57.8, 83.7, 40.0, 105.7, 89.6, DistKind::lognormal},
            {"718-7", 13.0, 1.7, 13.0, 1.7, 13.0, 1.8, DistKind::truncated_normal},
        },
        {
            {{{1132, 848, 1}, {885, 587, 1}, {247, 261, 0}}},
            {{{58, 683, 7, 22, 0, 4, 1207, 0},
              {49, 524, 7, 18, 0, 3, 872, 0},
              {9, 159, 0, 4, 0, 1, 335, 0}}},
            {{{229, 10, 945, 26, 563, 173, 35},
              {167, 8, 715, 22, 399, 135, 27},
              {62, 2, 230, 4, 164, 38, 8}}},
            {{{1542, 114, 104, 112, 10, 37, 6, 31, 25, 0},
              {1186, 73, 64, 76, 6, 25, 2, 23, 18, 0},
              {356, 41, 40, 36, 4, 12, 4, 8, 7, 0}}},
        },
    };
    static const WindowCalibration w3 = {
        1099,
        371,
        {
            {"age", 54.6, 13.4, 54.6, 13.7, 54.7, 12.6, DistKind::truncated_normal},
            {"cci", 0.3, 0.4, 0.3, 0.4, 0.3, 0.3, DistKind::lognormal},
            {"bmi", 33.2, 8.0, 33.3, 7.9, 32.8, 8.2, DistKind::truncated_normal},
            {"dbp", 79.3, 7.0, 79.0, 7.1, 80.1, 6.9, DistKind::truncated_normal},
            {"sbp", 131.6, 12.4, 131.2, 12.2, 132.8, 12.9, DistKind::truncated_normal},
            {"1742-6", 35.1, 33.9, 31.9, 30.8, 44.5, 40.2, DistKind::lognormal},
            {"1751-7", 4.4, 8.6, 4.5, 0.4, 3.9, 0.4, DistKind::truncated_normal},
            {"1920-8", 33.5, 29.0, 29.6, 23.8, 44.9, 38.6, DistKind::lognormal},
            {"1975-2", 0.7, 0.6, 0.6, 0.5, 0.8, 0.6, DistKind::lognormal},
            {"26515-7", 235.7, 79.0, 242.6, 77.4, 215.2, 80.3, DistKind::truncated_normal},
            {"2885-2", 7.0, 0.6, 7.0, 0.6, 7.1, 0.6, DistKind::truncated_normal},
            {"5902-2", 14.2, 2.7, 14.1, 2.5, 14.6, 3.1, DistKind::lognormal},
            {"6768-6", 87.7, 55.8, 83.1, 41.3, 101.5, 83.9, DistKind::lognormal},
            {"718-7", 13.1, 1.8, 13.0, 1.8, 13.2, 1.8, DistKind::truncated_normal},
        },
        {
            {{{849, 621, 0}, {665, 434, 0}, {184, 187, 0}}},
            {{{43, 486, 6, 14, 0, 3, 918, 0},
              {36, 381, 6, 13, 0, 2, 661, 0},
              {7, 105, 0, 1, 0, 1, 257, 0}}},
            {{{159, 8, 715, 19, 421, 125, 23},
              {122, 7, 537, 16, 305, 96, 16},
              {37, 1, 178, 3, 116, 29, 7}}},
            {{{1152, 84, 68, 85, 5, 29, 6, 22, 19, 0},
              {892, 54, 42, 56, 4, 20, 2, 16, 13, 0},
              {260, 30, 26, 29, 1, 9, 4, 6, 6, 0}}},
        },
    };
    switch (window_years) {
        case 1: return w1;
        case 2: return w2;
        case 3: return w3;
        default: throw_error(ErrorKind::config, "window_years must be 1, 2 or 3");
    }
}

// Variables whose window-1 group comparison is significant; the fixed default
// signal set for every window.
inline const std::set<std::string>& default_signal_set() {
    static const std::set<std::string> s = {
        "gender",      "race",        "rucc",        "age",        "cci",
        "bmi",         "lab_1742-6",  "lab_1751-7",  "lab_1920-8", "lab_1975-2",
        "lab_26515-7", "lab_2885-2",  "lab_5902-2",  "lab_6768-6", "ccs_1",
        "ccs_2",       "ccs_3",       "ccs_4",       "ccs_5",      "ccs_6",
        "ccs_7",       "ccs_8",       "ccs_9"};
    return s;
}

inline std::vector<double> normalize_counts(const std::vector<double>& counts) {
    double total = 0.0;
    for (double c : counts) total += c;
    std::vector<double> probs;
    probs.reserve(counts.size());
    for (double c : counts) probs.push_back(c / total);
    return probs;
}

} // namespace synth_detail

// Config populated from the published per-window tables. Signal variables get
// the control/case columns; the rest use the overall column for both groups.
// The control albumin SD is an artifact of the de-identified source and is
// replaced by the case-column SD (draws are also clamped to (1, 6) g/dL).
inline GeneratorConfig default_config(int window_years) {
    const auto& cal = synth_detail::window_calibration(window_years);
    const auto& signal = synth_detail::default_signal_set();

    GeneratorConfig cfg;
    cfg.window_years = window_years;
    cfg.n_cases = cal.n_cases;
    cfg.n_controls = cal.n_controls;
    cfg.signal_variables.assign(signal.begin(), signal.end());

    auto continuous = [&](const synth_detail::VariableCalibration& v, bool is_lab) {
        const std::string name = is_lab ? "lab_" + std::string(v.name) : v.name;
        ContinuousSpec control_spec, case_spec;
        control_spec.dist = case_spec.dist = v.dist;
        if (signal.count(name)) {
            control_spec.mean = v.control_mean;
            control_spec.sd = v.control_sd;
            case_spec.mean = v.case_mean;
            case_spec.sd = v.case_sd;
        } else {
            control_spec.mean = case_spec.mean = v.overall_mean;
            control_spec.sd = case_spec.sd = v.overall_sd;
        }
        if (is_lab && std::string(v.name) == "1751-7") {
            control_spec.sd = v.case_sd; // de-identification artifact, see above
            control_spec.clamp_lo = case_spec.clamp_lo = 1.0;
            control_spec.clamp_hi = case_spec.clamp_hi = 6.0;
        }
        return std::make_pair(control_spec, case_spec);
    };

    for (const auto& v : cal.continuous) {
        const std::string name = v.name;
        const bool is_lab = name.find('-') != std::string::npos;
        auto [control_spec, case_spec] = continuous(v, is_lab);
        if (name == "age") {
            cfg.control.age = control_spec;
            cfg.lc_case.age = case_spec;
        } else if (name == "cci") {
            cfg.control.cci = control_spec;
            cfg.lc_case.cci = case_spec;
        } else if (name == "bmi") {
            cfg.control.bmi = control_spec;
            cfg.lc_case.bmi = case_spec;
        } else if (name == "dbp") {
            cfg.control.dbp = control_spec;
            cfg.lc_case.dbp = case_spec;
        } else if (name == "sbp") {
            cfg.control.sbp = control_spec;
            cfg.lc_case.sbp = case_spec;
        } else {
            cfg.control.labs[name] = control_spec;
            cfg.lc_case.labs[name] = case_spec;
        }
    }

    const std::array<const char*, 4> group_names = {"gender", "race", "marital", "rucc"};
    for (std::size_t gi = 0; gi < group_names.size(); ++gi) {
        const auto& counts = cal.categorical[gi];
        std::vector<double> control_probs, case_probs;
        if (signal.count(group_names[gi])) {
            control_probs = synth_detail::normalize_counts(counts[1]);
            case_probs = synth_detail::normalize_counts(counts[2]);
        } else {
            control_probs = case_probs = synth_detail::normalize_counts(counts[0]);
        }
        auto assign = [&](GroupSpec& g, std::vector<double> probs) {
            switch (gi) {
                case 0: g.gender_probs = std::move(probs); break;
                case 1: g.race_probs = std::move(probs); break;
                case 2: g.marital_probs = std::move(probs); break;
                default: g.rucc_probs = std::move(probs); break;
            }
        };
        assign(cfg.control, std::move(control_probs));
        assign(cfg.lc_case, std::move(case_probs));
    }

    // Demo CCS prevalences (the tables publish no per-category rates); the
    // Results-named disease groups carry a planted case excess.
    const std::map<int, std::pair<double, double>> ccs = {
        {1, {0.50, 0.68}}, {2, {0.45, 0.60}}, {3, {0.22, 0.45}}, {4, {0.18, 0.30}},
        {5, {0.35, 0.50}}, {6, {0.10, 0.18}}, {7, {0.15, 0.25}}, {8, {0.10, 0.18}},
        {9, {0.25, 0.36}}, {10, {0.55, 0.55}}, {11, {0.25, 0.25}},
    };
    for (const auto& [cat, probs] : ccs) {
        cfg.control.ccs_prevalence[cat] = probs.first;
        cfg.lc_case.ccs_prevalence[cat] = probs.second;
    }

    cfg.fips_by_rucc = {{1, "01073"}, {2, "01089"}, {3, "01081"}, {4, "01055"}, {5, "01071"},
                        {6, "01007"}, {7, "01013"}, {8, "01063"}, {9, "01131"}};
    return cfg;
}

// --------------------------------------------------------------------------
// Generation

namespace synth_detail {

struct MemberContext {
    const GeneratorConfig* cfg;
    const GroupSpec* group;
    std::string patient_id;
    Date prediction_point;
    std::optional<Date> index_date;    // cases only
    std::vector<Date> extra_encounters; // pre-prediction-point dates to include
    double coverage_years = 1.0;
};

inline void emit_member(const MemberContext& m, Rng& rng, ClinicalRecordSet& set,
                        int& encounter_seq) {
    const GeneratorConfig& cfg = *m.cfg;
    const GroupSpec& group = *m.group;
    const Date& pp = m.prediction_point;

    PatientRecord patient;
    patient.patient_id = m.patient_id;
    const double age_years = draw_continuous(rng, group.age);
    patient.birth_date = pp.plus_days(-static_cast<std::int64_t>(
        std::llround((age_years + 0.5) * 365.2425)));
    patient.gender = gender_from_string(gender_levels()[draw_categorical(rng, group.gender_probs)],
                                        "generator");
    patient.race = race_levels()[draw_categorical(rng, group.race_probs)];
    patient.marital_status = marital_levels()[draw_categorical(rng, group.marital_probs)];
    const std::string rucc_level = rucc_levels()[draw_categorical(rng, group.rucc_probs)];
    if (rucc_level != "Unknown") {
        auto it = cfg.fips_by_rucc.find(std::stoi(rucc_level));
        if (it == cfg.fips_by_rucc.end()) {
            throw_error(ErrorKind::config, "no county configured for RUCC " + rucc_level);
        }
        patient.county_fips = it->second;
    }
    set.patients.push_back(patient);

    const double coverage_days = m.coverage_years * 365.2425;
    const auto span = static_cast<std::int64_t>(std::llround(coverage_days));

    // Encounters on distinct days: the planted anchors plus background visits
    // across the history span. Distinct days keep the per-encounter CCI
    // arithmetic exact.
    std::set<std::int64_t> offsets; // days before the prediction point
    for (const Date& d : m.extra_encounters) {
        const std::int64_t off = days_between(d, pp);
        if (off < 0) throw_error(ErrorKind::internal, "extra encounter after prediction point");
        offsets.insert(off);
    }
    const auto n_enc = static_cast<std::size_t>(std::max<long long>(
        2, std::llround(cfg.encounters_per_year * m.coverage_years)));
    const auto capacity = static_cast<std::size_t>(span + 1);
    while (offsets.size() < std::min(n_enc + m.extra_encounters.size(), capacity)) {
        offsets.insert(static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span + 1))));
    }
    std::vector<Date> encounter_dates;
    encounter_dates.reserve(offsets.size());
    for (auto it = offsets.rbegin(); it != offsets.rend(); ++it) {
        encounter_dates.push_back(pp.plus_days(-*it)); // ascending by date
    }
    for (const Date& d : encounter_dates) {
        set.encounters.push_back({"E" + std::to_string(++encounter_seq), m.patient_id, d});
    }

    // Fatty-liver entry code, dated before the first encounter so it does not
    // contribute to any per-encounter CCI (the code itself is a Quan
    // mild-liver code).
    {
        const auto& fl = fatty_liver_codes()[rng.below(fatty_liver_codes().size())];
        const std::int64_t fl_offset = *offsets.rbegin() + 30;
        set.diagnoses.push_back({m.patient_id, pp.plus_days(-fl_offset), fl.version, fl.code});
    }

    // Charlson planting toward the drawn mean CCI target.
    {
        const double target = draw_continuous(rng, group.cci);
        const auto& pool = charlson_weight1_codes();
        auto base = static_cast<std::size_t>(std::min(5.0, std::floor(target)));
        const double frac = target - std::floor(target);
        for (std::size_t cat = 0; cat < base; ++cat) {
            const PlantCode& code = pool[cat][rng.below(2)];
            for (const Date& d : encounter_dates) {
                set.diagnoses.push_back({m.patient_id, d, code.version, code.code});
            }
        }
        const auto stamped = static_cast<std::size_t>(
            std::llround(frac * static_cast<double>(encounter_dates.size())));
        if (stamped > 0 && base < pool.size()) {
            const PlantCode& code = pool[base][rng.below(2)];
            for (std::size_t i = 0; i < stamped; ++i) {
                set.diagnoses.push_back(
                    {m.patient_id, encounter_dates[i], code.version, code.code});
            }
        }
    }

    // CCS category flags.
    for (const auto& [cat, p] : group.ccs_prevalence) {
        if (!rng.bernoulli(p)) continue;
        const auto& pool = ccs_plant_codes().at(cat);
        const auto n_events = 1 + rng.below(3);
        for (std::uint64_t i = 0; i < n_events; ++i) {
            const PlantCode& code = pool[rng.below(pool.size())];
            const Date& d = encounter_dates[rng.below(encounter_dates.size())];
            set.diagnoses.push_back({m.patient_id, d, code.version, code.code});
        }
    }

    // Panel series: measurement dates stratified across the history depth so
    // the deepest measurement sits near the coverage horizon.
    std::vector<std::string> series = default_loinc_panel(); // then 3 vitals
    series.push_back("SBP");
    series.push_back("DBP");
    series.push_back("BMI");
    std::set<std::size_t> dropped;
    if (rng.bernoulli(cfg.panel_incomplete_fraction)) {
        const auto count = 1 + rng.below(3);
        for (std::size_t p : rng.sample_without_replacement(series.size(),
                                                            static_cast<std::size_t>(count))) {
            dropped.insert(p);
        }
    }
    const auto n_meas = static_cast<std::size_t>(std::max<long long>(
        1, std::llround(cfg.measurements_per_series_per_year * m.coverage_years)));
    for (std::size_t s = 0; s < series.size(); ++s) {
        if (dropped.count(s)) continue;
        const bool is_vital = s >= default_loinc_panel().size();
        for (std::size_t j = 0; j < n_meas; ++j) {
            const double depth = (static_cast<double>(j) + rng.uniform()) /
                                 static_cast<double>(n_meas);
            const Date d = pp.plus_days(-static_cast<std::int64_t>(
                std::llround(depth * coverage_days)));
            if (is_vital) {
                const VitalKind kind = series[s] == "SBP"  ? VitalKind::sbp
                                       : series[s] == "DBP" ? VitalKind::dbp
                                                            : VitalKind::bmi;
                const ContinuousSpec& spec = kind == VitalKind::sbp   ? group.sbp
                                             : kind == VitalKind::dbp ? group.dbp
                                                                      : group.bmi;
                set.vitals.push_back({m.patient_id, d, kind, draw_continuous(rng, spec)});
            } else {
                set.labs.push_back(
                    {m.patient_id, d, series[s], draw_continuous(rng, group.labs.at(series[s]))});
            }
        }
    }

    // Cases carry their history forward: an LC diagnosis with an encounter on
    // the index date and a pre-diagnosis panel inside the excluded prediction
    // window. These events sit after the prediction point and must never
    // reach a feature.
    if (m.index_date) {
        const Date& index = *m.index_date;
        set.encounters.push_back({"E" + std::to_string(++encounter_seq), m.patient_id, index});
        const auto& lc = lc_codes()[rng.below(lc_codes().size())];
        set.diagnoses.push_back({m.patient_id, index, lc.version, lc.code});
        const Date near_dx = index.plus_days(-static_cast<std::int64_t>(1 + rng.below(14)));
        for (std::size_t s = 0; s < series.size(); ++s) {
            const bool is_vital = s >= default_loinc_panel().size();
            if (is_vital) {
                const VitalKind kind = series[s] == "SBP"  ? VitalKind::sbp
                                       : series[s] == "DBP" ? VitalKind::dbp
                                                            : VitalKind::bmi;
                const ContinuousSpec& spec = kind == VitalKind::sbp   ? group.sbp
                                             : kind == VitalKind::dbp ? group.dbp
                                                                      : group.bmi;
                set.vitals.push_back({m.patient_id, near_dx, kind, draw_continuous(rng, spec)});
            } else {
                set.labs.push_back({m.patient_id, near_dx, series[s],
                                    draw_continuous(rng, group.labs.at(series[s]))});
            }
        }
    }
}

} // namespace synth_detail

inline GeneratedData generate(const GeneratorConfig& cfg) {
    cfg.validate();
    GeneratedData out;
    int encounter_seq = 0;

    auto member_id = [](std::size_t ordinal) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "P%06zu", ordinal + 1);
        return std::string(buf);
    };

    const std::int64_t index_span = days_between(cfg.index_date_min, cfg.index_date_max);

    // Cases first; their prediction points anchor the controls.
    std::vector<Date> case_index_dates;
    case_index_dates.reserve(cfg.n_cases);
    for (std::size_t i = 0; i < cfg.n_cases; ++i) {
        Rng rng = Rng::stream(cfg.rng_seed, static_cast<std::uint64_t>(i));
        const Date index = cfg.index_date_min.plus_days(
            static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(index_span + 1))));
        case_index_dates.push_back(index);

        synth_detail::MemberContext m;
        m.cfg = &cfg;
        m.group = &cfg.lc_case;
        m.patient_id = member_id(i);
        m.index_date = index;
        m.prediction_point = subtract_years(index, cfg.window_years);
        m.coverage_years = rng.uniform(cfg.coverage_years_min, cfg.coverage_years_max);
        synth_detail::emit_member(m, rng, out.records, encounter_seq);
        out.truth.push_back({m.patient_id, 1, index, m.prediction_point});
    }

    for (std::size_t i = 0; i < cfg.n_controls; ++i) {
        const std::size_t ordinal = cfg.n_cases + i;
        Rng rng = Rng::stream(cfg.rng_seed, static_cast<std::uint64_t>(ordinal));

        synth_detail::MemberContext m;
        m.cfg = &cfg;
        m.group = &cfg.control;
        m.patient_id = member_id(ordinal);
        m.coverage_years = rng.uniform(cfg.coverage_years_min, cfg.coverage_years_max);

        if (cfg.n_cases > 0) {
            const Date& anchor_index = case_index_dates[i % cfg.n_cases];
            // The window-anchor encounter becomes the control's own prediction
            // point; later anchors let longer-window runs re-match the patient.
            const Date anchor_pp = subtract_years(anchor_index, cfg.window_years);
            m.prediction_point = anchor_pp.plus_days(
                static_cast<std::int64_t>(rng.below(15)) - 7);
            m.extra_encounters.push_back(m.prediction_point);
            for (int w = cfg.window_years + 1; w <= 3; ++w) {
                const Date anchor_w = subtract_years(anchor_index, w);
                m.extra_encounters.push_back(
                    anchor_w.plus_days(static_cast<std::int64_t>(rng.below(15)) - 7));
            }
        } else {
            m.prediction_point = subtract_years(cfg.index_date_min, cfg.window_years);
        }
        synth_detail::emit_member(m, rng, out.records, encounter_seq);
        out.truth.push_back({m.patient_id, 0, std::nullopt, m.prediction_point});
    }

    out.records.finalize();
    return out;
}

// --------------------------------------------------------------------------
// truth.csv

inline void save_truth(const std::vector<GeneratedMember>& truth, const std::string& path,
                       const std::string& provenance_comment = "") {
    std::ofstream out(path);
    if (!out) throw_error(ErrorKind::io, "cannot write " + path);
    if (!provenance_comment.empty()) out << "# " << provenance_comment << '\n';
    csv::write_row(out, {"patient_id", "true_label", "index_date"});
    for (const auto& t : truth) {
        csv::write_row(out, {t.patient_id, std::to_string(t.label),
                             t.index_date ? t.index_date->to_string() : ""});
    }
}

// --------------------------------------------------------------------------
// GeneratorConfig JSON round-trip

inline nlohmann::json continuous_to_json(const ContinuousSpec& s) {
    nlohmann::json j{{"mean", s.mean},
                     {"sd", s.sd},
                     {"dist", s.dist == DistKind::lognormal ? "lognormal" : "truncated_normal"}};
    if (s.clamp_lo != 0.0) j["clamp_lo"] = s.clamp_lo;
    if (std::isfinite(s.clamp_hi)) j["clamp_hi"] = s.clamp_hi;
    return j;
}

inline ContinuousSpec continuous_from_json(const nlohmann::json& j) {
    ContinuousSpec s;
    s.mean = j.at("mean").get<double>();
    s.sd = j.at("sd").get<double>();
    const std::string dist = j.at("dist").get<std::string>();
    if (dist == "lognormal") {
        s.dist = DistKind::lognormal;
    } else if (dist == "truncated_normal") {
        s.dist = DistKind::truncated_normal;
    } else {
        throw_error(ErrorKind::config, "unknown distribution '" + dist + "'");
    }
    if (j.contains("clamp_lo")) s.clamp_lo = j.at("clamp_lo").get<double>();
    if (j.contains("clamp_hi")) s.clamp_hi = j.at("clamp_hi").get<double>();
    return s;
}

inline nlohmann::json group_to_json(const GroupSpec& g) {
    nlohmann::json labs;
    for (const auto& [loinc, spec] : g.labs) labs[loinc] = continuous_to_json(spec);
    nlohmann::json ccs;
    for (const auto& [cat, p] : g.ccs_prevalence) ccs[std::to_string(cat)] = p;
    return nlohmann::json{{"age", continuous_to_json(g.age)},
                          {"cci", continuous_to_json(g.cci)},
                          {"bmi", continuous_to_json(g.bmi)},
                          {"dbp", continuous_to_json(g.dbp)},
                          {"sbp", continuous_to_json(g.sbp)},
                          {"labs", std::move(labs)},
                          {"gender_probs", g.gender_probs},
                          {"race_probs", g.race_probs},
                          {"marital_probs", g.marital_probs},
                          {"rucc_probs", g.rucc_probs},
                          {"ccs_prevalence", std::move(ccs)}};
}

inline GroupSpec group_from_json(const nlohmann::json& j) {
    GroupSpec g;
    g.age = continuous_from_json(j.at("age"));
    g.cci = continuous_from_json(j.at("cci"));
    g.bmi = continuous_from_json(j.at("bmi"));
    g.dbp = continuous_from_json(j.at("dbp"));
    g.sbp = continuous_from_json(j.at("sbp"));
    for (const auto& [loinc, spec] : j.at("labs").items()) {
        g.labs[loinc] = continuous_from_json(spec);
    }
    g.gender_probs = j.at("gender_probs").get<std::vector<double>>();
    g.race_probs = j.at("race_probs").get<std::vector<double>>();
    g.marital_probs = j.at("marital_probs").get<std::vector<double>>();
    g.rucc_probs = j.at("rucc_probs").get<std::vector<double>>();
    for (const auto& [cat, p] : j.at("ccs_prevalence").items()) {
        g.ccs_prevalence[std::stoi(cat)] = p.get<double>();
    }
    return g;
}

inline nlohmann::json generator_config_to_json(const GeneratorConfig& cfg) {
    nlohmann::json fips;
    for (const auto& [code, f] : cfg.fips_by_rucc) fips[std::to_string(code)] = f;
    return nlohmann::json{{"n_cases", cfg.n_cases},
                          {"n_controls", cfg.n_controls},
                          {"window_years", cfg.window_years},
                          {"control", group_to_json(cfg.control)},
                          {"case", group_to_json(cfg.lc_case)},
                          {"signal_variables", cfg.signal_variables},
                          {"encounters_per_year", cfg.encounters_per_year},
                          {"measurements_per_series_per_year",
                           cfg.measurements_per_series_per_year},
                          {"coverage_years_min", cfg.coverage_years_min},
                          {"coverage_years_max", cfg.coverage_years_max},
                          {"panel_incomplete_fraction", cfg.panel_incomplete_fraction},
                          {"index_date_min", cfg.index_date_min.to_string()},
                          {"index_date_max", cfg.index_date_max.to_string()},
                          {"fips_by_rucc", std::move(fips)},
                          {"rng_seed", cfg.rng_seed}};
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j) {
    GeneratorConfig cfg;
    cfg.n_cases = j.at("n_cases").get<std::size_t>();
    cfg.n_controls = j.at("n_controls").get<std::size_t>();
    cfg.window_years = j.at("window_years").get<int>();
    cfg.control = group_from_json(j.at("control"));
    cfg.lc_case = group_from_json(j.at("case"));
    cfg.signal_variables = j.at("signal_variables").get<std::vector<std::string>>();
    cfg.encounters_per_year = j.at("encounters_per_year").get<double>();
    cfg.measurements_per_series_per_year =
        j.at("measurements_per_series_per_year").get<double>();
    cfg.coverage_years_min = j.at("coverage_years_min").get<double>();
    cfg.coverage_years_max = j.at("coverage_years_max").get<double>();
    cfg.panel_incomplete_fraction = j.at("panel_incomplete_fraction").get<double>();
    cfg.index_date_min = Date::parse(j.at("index_date_min").get<std::string>());
    cfg.index_date_max = Date::parse(j.at("index_date_max").get<std::string>());
    for (const auto& [code, f] : j.at("fips_by_rucc").items()) {
        cfg.fips_by_rucc[std::stoi(code)] = f.get<std::string>();
    }
    cfg.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    return cfg;
}

} // namespace ch
