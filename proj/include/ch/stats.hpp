#pragma once

// Evaluation statistics: stratified splitting, ROC/AUC, operating-point
// metrics, Pearson chi-square and Welch t with p-values, and the cohort
// characteristics table. The incomplete gamma/beta functions are evaluated
// with the standard series + continued-fraction (modified Lentz) forms at
// relative tolerance 1e-12 so any reimplementation can match them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ch/error.hpp"
#include "ch/features.hpp"
#include "ch/rng.hpp"
#include "ch/terminology.hpp"

namespace ch {

// --------------------------------------------------------------------------
// Special functions

// Lanczos approximation (g = 7, n = 9).
inline double log_gamma(double x) {
    static constexpr double coeff[9] = {0.99999999999980993,     676.5203681218851,
                                        -1259.1392167224028,     771.32342877765313,
                                        -176.61502916214059,     12.507343278686905,
                                        -0.13857109526572012,    9.9843695780195716e-6,
                                        1.5056327351493116e-7};
    if (x < 0.5) {
        return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
    }
    x -= 1.0;
    double a = coeff[0];
    for (int i = 1; i < 9; ++i) a += coeff[i] / (x + i);
    const double t = x + 7.5;
    return 0.5 * std::log(2.0 * M_PI) + (x + 0.5) * std::log(t) - t + std::log(a);
}

namespace detail {

inline constexpr double kSfEps = 1e-12;
inline constexpr int kSfMaxIter = 500;

// Lower regularized incomplete gamma by power series (x < a + 1).
inline double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n <= kSfMaxIter; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kSfEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - log_gamma(a));
}

// Upper regularized incomplete gamma by continued fraction (x >= a + 1).
inline double gamma_q_continued_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= kSfMaxIter; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kSfEps) break;
    }
    return h * std::exp(-x + a * std::log(x) - log_gamma(a));
}

} // namespace detail

// Regularized lower incomplete gamma P(a, x).
inline double regularized_gamma_p(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw_error(ErrorKind::domain, "gamma_p requires a > 0, x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_continued_fraction(a, x);
}

inline double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || x < 0.0) throw_error(ErrorKind::domain, "gamma_q requires a > 0, x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_continued_fraction(a, x);
}

namespace detail {

// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kSfMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kSfEps) break;
    }
    return h;
}

} // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double regularized_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw_error(ErrorKind::domain, "beta requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return std::exp(ln_front) * detail::beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - std::exp(ln_front) * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

// Survivor function of the chi-square distribution.
inline double chi_square_survivor(double statistic, double df) {
    return regularized_gamma_q(df / 2.0, statistic / 2.0);
}

// Two-sided p for a Student t statistic.
inline double student_t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw_error(ErrorKind::domain, "t distribution requires df > 0");
    return regularized_beta(df / 2.0, 0.5, df / (df + t * t));
}

// --------------------------------------------------------------------------
// Pearson chi-square and Welch t

struct ChiSquareResult {
    double statistic = 0.0;
    double df = 0.0;
    double p = 1.0;
};

inline ChiSquareResult chi_square_p(const std::vector<std::vector<double>>& contingency) {
    const std::size_t rows = contingency.size();
    if (rows < 2) throw_error(ErrorKind::domain, "chi-square needs >= 2 rows");
    const std::size_t cols = contingency[0].size();
    if (cols < 2) throw_error(ErrorKind::domain, "chi-square needs >= 2 columns");
    std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (contingency[r].size() != cols) {
            throw_error(ErrorKind::domain, "ragged contingency table");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = contingency[r][c];
            if (v < 0.0 || !std::isfinite(v)) {
                throw_error(ErrorKind::domain, "counts must be finite and non-negative");
            }
            row_sum[r] += v;
            col_sum[c] += v;
            total += v;
        }
    }
    for (double s : row_sum) {
        if (s == 0.0) throw_error(ErrorKind::domain, "degenerate table: zero row marginal");
    }
    for (double s : col_sum) {
        if (s == 0.0) throw_error(ErrorKind::domain, "degenerate table: zero column marginal");
    }
    ChiSquareResult out;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double expected = row_sum[r] * col_sum[c] / total;
            const double diff = contingency[r][c] - expected;
            out.statistic += diff * diff / expected;
        }
    }
    out.df = static_cast<double>((rows - 1) * (cols - 1));
    out.p = chi_square_survivor(out.statistic, out.df);
    return out;
}

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

inline double sample_mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double sample_variance(const std::vector<double>& xs, double mean) {
    double s = 0.0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return s / static_cast<double>(xs.size() - 1);
}

inline WelchResult welch_t_p(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) {
        throw_error(ErrorKind::domain, "Welch t needs >= 2 samples per group");
    }
    const double ma = sample_mean(a), mb = sample_mean(b);
    const double va = sample_variance(a, ma), vb = sample_variance(b, mb);
    if (va == 0.0 && vb == 0.0) {
        throw_error(ErrorKind::domain, "degenerate: both sample variances are zero");
    }
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    WelchResult out;
    out.t = (ma - mb) / std::sqrt(se2);
    out.df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    out.p = out.t == 0.0 ? 1.0 : student_t_two_sided_p(out.t, out.df);
    return out;
}

// --------------------------------------------------------------------------
// Train/test splitting

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Per-stratum test count is round-half-up(fraction * stratum size); shuffles
// are seeded, so a fixed (labels, fraction, seed) always yields the same split.
inline SplitIndices stratified_split(const std::vector<int>& labels, double test_fraction,
                                     std::uint64_t seed, bool stratify = true) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw_error(ErrorKind::config, "test_fraction must be in (0, 1)");
    }
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        (labels[i] != 0 ? pos : neg).push_back(i);
    }
    if (pos.empty() || neg.empty()) {
        throw_error(ErrorKind::data, "split requires both classes present");
    }
    Rng rng(seed);
    SplitIndices out;
    auto take = [&](std::vector<std::size_t>& stratum) {
        rng.shuffle(stratum);
        const auto n_test = static_cast<std::size_t>(
            std::floor(test_fraction * static_cast<double>(stratum.size()) + 0.5));
        for (std::size_t i = 0; i < stratum.size(); ++i) {
            (i < n_test ? out.test : out.train).push_back(stratum[i]);
        }
    };
    if (stratify) {
        take(neg);
        take(pos);
    } else {
        std::vector<std::size_t> all(labels.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        take(all);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

// --------------------------------------------------------------------------
// ROC / AUC

struct RocResult {
    std::vector<std::pair<double, double>> points; // (fpr, tpr) from (0,0) to (1,1)
    double auc = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
};

// Descending-score sweep with tied scores collapsed into a single step; the
// trapezoid area then equals the Mann-Whitney statistic with half credit for
// ties.
inline RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw_error(ErrorKind::internal, "scores/labels size mismatch");
    }
    RocResult out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw_error(ErrorKind::domain, "ROC requires finite scores");
        }
        out.n_pos += labels[i] != 0;
        out.n_neg += labels[i] == 0;
    }
    if (out.n_pos == 0 || out.n_neg == 0) {
        throw_error(ErrorKind::domain, "AUC undefined: both classes required");
    }
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });

    out.points.emplace_back(0.0, 0.0);
    double auc = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::size_t d_tp = 0, d_fp = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] != 0) {
                ++d_tp;
            } else {
                ++d_fp;
            }
            ++j;
        }
        const double x0 = static_cast<double>(fp) / static_cast<double>(out.n_neg);
        const double y0 = static_cast<double>(tp) / static_cast<double>(out.n_pos);
        tp += d_tp;
        fp += d_fp;
        const double x1 = static_cast<double>(fp) / static_cast<double>(out.n_neg);
        const double y1 = static_cast<double>(tp) / static_cast<double>(out.n_pos);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        out.points.emplace_back(x1, y1);
        i = j;
    }
    out.auc = auc;
    return out;
}

struct SensSpec {
    double sensitivity = 0.0;
    double specificity = 0.0;
};

// Strict threshold with declared orientation: with high_is_positive, a score
// above the cutoff predicts positive.
inline SensSpec sens_spec_at(const std::vector<double>& scores, const std::vector<int>& labels,
                             double cutoff, bool high_is_positive) {
    std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = high_is_positive ? scores[i] > cutoff : scores[i] < cutoff;
        if (labels[i] != 0) {
            (predicted ? tp : fn) += 1;
        } else {
            (predicted ? fp : tn) += 1;
        }
    }
    if (tp + fn == 0 || tn + fp == 0) {
        throw_error(ErrorKind::domain, "sens/spec require both classes present");
    }
    return {static_cast<double>(tp) / static_cast<double>(tp + fn),
            static_cast<double>(tn) / static_cast<double>(tn + fp)};
}

// --------------------------------------------------------------------------
// Cohort characteristics table

struct CharacteristicsRow {
    std::string variable;
    std::string level;      // empty for continuous rows and variable headers
    std::string overall;    // count, or "mean (sd)"
    std::string controls;
    std::string cases;
    std::optional<double> p;  // on the variable's header row
    std::string note;         // degenerate-test annotation
};

struct CharacteristicsTable {
    std::vector<CharacteristicsRow> rows;
};

namespace detail {

inline std::string mean_sd_text(const std::vector<double>& xs) {
    if (xs.empty()) return "-";
    const double m = sample_mean(xs);
    double sd = 0.0;
    if (xs.size() > 1) sd = std::sqrt(sample_variance(xs, m));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f (%.1f)", m, sd);
    return buf;
}

} // namespace detail

// Reproduces the published cohort-characteristics layout: level counts with a
// chi-square p for categoricals, mean (SD) with a Welch p for continuous
// variables. Degenerate comparisons get an annotation instead of a p-value.
inline CharacteristicsTable characteristics_table(const FeatureMatrix& m) {
    CharacteristicsTable table;
    std::size_t n_cases = 0;
    for (int label : m.labels) n_cases += label != 0;
    const std::size_t n_controls = m.n_rows() - n_cases;
    if (m.n_rows() == 0 || n_cases == 0 || n_controls == 0) {
        throw_error(ErrorKind::data, "characteristics table requires both labels present");
    }

    table.rows.push_back({"Patient Counts", "", std::to_string(m.n_rows()),
                          std::to_string(n_controls), std::to_string(n_cases), std::nullopt,
                          ""});

    // Categorical groups.
    for (const auto& g : m.schema.groups) {
        std::vector<std::array<std::size_t, 2>> counts(g.levels.size(), {0, 0});
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            for (std::size_t i = 0; i < g.levels.size(); ++i) {
                if (m.at(r, g.begin + i) == 1.0) {
                    counts[i][m.labels[r] != 0 ? 1 : 0] += 1;
                    break;
                }
            }
        }
        // Keep levels observed in the cohort; zero rows would degenerate the test.
        std::vector<std::size_t> kept;
        for (std::size_t i = 0; i < g.levels.size(); ++i) {
            if (counts[i][0] + counts[i][1] > 0) kept.push_back(i);
        }
        CharacteristicsRow header{g.name, "", "", "", "", std::nullopt, ""};
        if (kept.size() >= 2) {
            std::vector<std::vector<double>> contingency;
            for (std::size_t i : kept) {
                contingency.push_back({static_cast<double>(counts[i][0]),
                                       static_cast<double>(counts[i][1])});
            }
            try {
                header.p = chi_square_p(contingency).p;
            } catch (const Error&) {
                header.note = "degenerate";
            }
        } else {
            header.note = "degenerate";
        }
        table.rows.push_back(header);
        for (std::size_t i : kept) {
            table.rows.push_back({g.name, g.levels[i],
                                  std::to_string(counts[i][0] + counts[i][1]),
                                  std::to_string(counts[i][0]), std::to_string(counts[i][1]),
                                  std::nullopt, ""});
        }
    }

    // Continuous variables: everything before the first one-hot group.
    const std::size_t continuous_end = m.schema.groups.front().begin;
    for (std::size_t c = 0; c < continuous_end; ++c) {
        std::vector<double> control_vals, case_vals, all_vals;
        for (std::size_t r = 0; r < m.n_rows(); ++r) {
            if (m.is_missing(r, c)) continue;
            const double v = m.at(r, c);
            all_vals.push_back(v);
            (m.labels[r] != 0 ? case_vals : control_vals).push_back(v);
        }
        CharacteristicsRow row{m.schema.columns[c], "", detail::mean_sd_text(all_vals),
                               detail::mean_sd_text(control_vals),
                               detail::mean_sd_text(case_vals), std::nullopt, ""};
        try {
            row.p = welch_t_p(control_vals, case_vals).p;
        } catch (const Error&) {
            row.note = "degenerate";
        }
        table.rows.push_back(row);
    }
    return table;
}

inline void save_characteristics_table(const CharacteristicsTable& table, const std::string& path,
                                       const std::string& provenance_comment = "") {
    std::ofstream out(path);
    if (!out) throw_error(ErrorKind::io, "cannot write " + path);
    if (!provenance_comment.empty()) out << "# " << provenance_comment << '\n';
    csv::write_row(out, {"variable", "level", "overall", "controls", "cases", "p_value", "note"});
    for (const auto& r : table.rows) {
        csv::write_row(out, {r.variable, r.level, r.overall, r.controls, r.cases,
                             r.p ? format_double(*r.p) : "", r.note});
    }
}

} // namespace ch
