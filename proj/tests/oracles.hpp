#pragma once

// Independent oracles used by the unit and acceptance suites. Each one takes
// a deliberately different route from the library implementation it checks:
// pairwise concordance instead of the trapezoid sweep, full threshold
// enumeration instead of the prefix scan, adaptive quadrature instead of
// series/continued fractions, and a per-category rescan of the raw mapping
// file for the Charlson index.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ch/gbdt.hpp"
#include "ch/records.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// AUC as the Mann-Whitney pairwise statistic with half credit for ties.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double concordant = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 0) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                concordant += 1.0;
            } else if (scores[i] == scores[j]) {
                concordant += 0.5;
            }
        }
    }
    return concordant / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------
// Exhaustive best-split search: every midpoint of every feature, both missing
// directions, same tie rule (lowest feature, lowest threshold, prefer left).
struct BruteSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
    double gain = 0.0;
};

// Summation order matters for exact-tie argmax agreement: like the library,
// present rows are summed in (value, row) order and the right child is the
// node total minus the left child, so mathematically tied candidates carry
// bitwise-identical gains in both implementations.
inline BruteSplit brute_force_split(const ch::FeatureMatrix& m,
                                    const std::vector<std::uint32_t>& rows,
                                    const std::vector<double>& g, const std::vector<double>& h,
                                    const ch::GbdtParams& params) {
    BruteSplit best;
    double g_total = 0.0, h_total = 0.0;
    for (std::uint32_t r : rows) {
        g_total += g[r];
        h_total += h[r];
    }
    for (std::size_t f = 0; f < m.n_cols(); ++f) {
        std::vector<std::uint32_t> present;
        double g_missing = 0.0, h_missing = 0.0;
        for (std::uint32_t r : rows) {
            if (m.is_missing(r, f)) {
                g_missing += g[r];
                h_missing += h[r];
            }
        }
        for (std::uint32_t r : rows) {
            if (!m.is_missing(r, f)) present.push_back(r);
        }
        std::sort(present.begin(), present.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (m.at(a, f) != m.at(b, f)) return m.at(a, f) < m.at(b, f);
            return a < b;
        });
        for (std::size_t i = 0; i + 1 < present.size(); ++i) {
            const double v = m.at(present[i], f);
            const double v_next = m.at(present[i + 1], f);
            if (v == v_next) continue;
            const double threshold = v + (v_next - v) / 2.0;
            if (!(v < threshold)) continue;
            double g_prefix = 0.0, h_prefix = 0.0;
            for (std::size_t k = 0; k <= i; ++k) {
                g_prefix += g[present[k]];
                h_prefix += h[present[k]];
            }
            for (int side = 0; side < 2; ++side) {
                const bool missing_left = side == 0;
                const double gl = g_prefix + (missing_left ? g_missing : 0.0);
                const double hl = h_prefix + (missing_left ? h_missing : 0.0);
                const double gr = g_total - gl;
                const double hr = h_total - hl;
                if (hl < params.min_child_weight || hr < params.min_child_weight) continue;
                if (!(hl + params.lambda > 0.0) || !(hr + params.lambda > 0.0)) continue;
                const double gain = ch::split_gain(gl, hl, gr, hr, params.lambda, params.gamma);
                if (!(gain > 0.0)) continue;
                const bool better =
                    !best.found || gain > best.gain ||
                    (gain == best.gain &&
                     (static_cast<int>(f) < best.feature ||
                      (static_cast<int>(f) == best.feature && threshold < best.threshold)));
                if (better) {
                    best = {true, static_cast<int>(f), threshold, missing_left, gain};
                }
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature for the survivor functions.
namespace detail {

template <typename Fn>
double simpson(Fn&& f, double a, double b, double fa, double fm, double fb, double eps,
               int depth) {
    const double m = (a + b) / 2.0;
    const double lm = (a + m) / 2.0, rm = (m + b) / 2.0;
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps) {
        return left + right + (left + right - whole) / 15.0;
    }
    return simpson(f, a, m, fa, flm, fm, eps / 2.0, depth - 1) +
           simpson(f, m, b, fm, frm, fb, eps / 2.0, depth - 1);
}

template <typename Fn>
double integrate(Fn&& f, double a, double b, double eps = 1e-12) {
    const double m = (a + b) / 2.0;
    return simpson(f, a, b, f(a), f(m), f(b), eps, 48);
}

} // namespace detail

// P(X > x) for chi-square with df degrees of freedom, by quadrature over the
// density from x to a far tail bound.
inline double chi_square_survivor_quadrature(double x, double df) {
    const double log_norm = -(df / 2.0) * std::log(2.0) - std::lgamma(df / 2.0);
    auto density = [&](double t) {
        if (t <= 0.0) return 0.0;
        return std::exp(log_norm + (df / 2.0 - 1.0) * std::log(t) - t / 2.0);
    };
    const double upper = std::max(x + 40.0 * std::sqrt(2.0 * df) + 40.0, x * 2.0 + 40.0);
    return detail::integrate(density, x, upper);
}

// Two-sided p for Student t with (possibly fractional) df, by quadrature.
inline double student_t_two_sided_quadrature(double t, double df) {
    const double at = std::abs(t);
    const double log_norm = std::lgamma((df + 1.0) / 2.0) - std::lgamma(df / 2.0) -
                            0.5 * std::log(df * M_PI);
    auto density = [&](double u) {
        return std::exp(log_norm - (df + 1.0) / 2.0 * std::log1p(u * u / df));
    };
    // Integrate the central mass and subtract; the tails decay polynomially.
    const double central = detail::integrate(density, -at, at);
    return 1.0 - central;
}

// ---------------------------------------------------------------------------
// Charlson index by per-category rescan of the raw mapping file.
struct CharlsonOracle {
    struct Row {
        int icd_version;
        std::string prefix;
        std::string category;
    };
    std::vector<Row> rows;
    std::map<std::string, int> weight_by_category;
    std::map<std::string, std::string> supersedes_by_category;

    static CharlsonOracle load(const std::string& path) {
        CharlsonOracle o;
        std::ifstream in(path);
        std::string line;
        std::getline(in, line); // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string version, prefix, category, weight, supersedes;
            std::getline(ss, version, ',');
            std::getline(ss, prefix, ',');
            std::getline(ss, category, ',');
            std::getline(ss, weight, ',');
            std::getline(ss, supersedes, ',');
            o.rows.push_back({std::stoi(version), prefix, category});
            o.weight_by_category[category] = std::stoi(weight);
            if (!supersedes.empty()) o.supersedes_by_category[category] = supersedes;
        }
        return o;
    }

    int score(const std::vector<std::pair<ch::IcdVersion, std::string>>& diagnoses,
              bool apply_hierarchy) const {
        std::set<std::string> present;
        for (const auto& [version, code] : diagnoses) {
            const int v = version == ch::IcdVersion::icd9 ? 9 : 10;
            // Longest matching prefix across the whole file decides the category.
            std::size_t best_len = 0;
            std::string best_category;
            for (const auto& row : rows) {
                if (row.icd_version != v) continue;
                if (code.size() < row.prefix.size()) continue;
                if (code.compare(0, row.prefix.size(), row.prefix) != 0) continue;
                if (row.prefix.size() > best_len) {
                    best_len = row.prefix.size();
                    best_category = row.category;
                }
            }
            if (best_len > 0) present.insert(best_category);
        }
        if (apply_hierarchy) {
            std::set<std::string> suppressed;
            for (const auto& category : present) {
                auto it = supersedes_by_category.find(category);
                if (it != supersedes_by_category.end()) suppressed.insert(it->second);
            }
            for (const auto& category : suppressed) present.erase(category);
        }
        int total = 0;
        for (const auto& category : present) total += weight_by_category.at(category);
        return total;
    }
};

} // namespace oracles
