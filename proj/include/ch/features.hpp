#pragma once

// Observation-window aggregation: one fixed-order numeric feature vector per
// cohort member. Column order is a pure function of the loaded CCS map and
// the fixed demographic category lists below.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ch/cohort.hpp"
#include "ch/csv.hpp"
#include "ch/records.hpp"
#include "ch/terminology.hpp"

namespace ch {

inline const std::vector<std::string>& gender_levels() {
    static const std::vector<std::string> levels = {"Female", "Male", "Unknown"};
    return levels;
}

inline const std::vector<std::string>& race_levels() {
    static const std::vector<std::string> levels = {"Asian",    "Black",           "Decline",
                                                    "Hispanic", "Multiple",        "Native American",
                                                    "White",    "Unknown"};
    return levels;
}

inline const std::vector<std::string>& marital_levels() {
    static const std::vector<std::string> levels = {"Divorced", "Life Partner", "Married",
                                                    "Separated", "Single",      "Widowed",
                                                    "Unknown"};
    return levels;
}

inline const std::vector<std::string>& rucc_levels() {
    static const std::vector<std::string> levels = {"1", "2", "3", "4", "5", "6", "7", "8", "9",
                                                    "Unknown"};
    return levels;
}

inline std::string sanitize_column_token(std::string text) {
    for (char& c : text) {
        if (c == ' ' || c == ',') c = '_';
    }
    return text;
}

struct FeatureSchema {
    struct OneHotGroup {
        std::string name;
        std::size_t begin = 0; // column range [begin, end)
        std::size_t end = 0;
        std::vector<std::string> levels;
    };

    std::vector<std::string> columns;
    std::vector<OneHotGroup> groups;
    std::vector<int> ccs_ids;          // ascending
    std::size_t ccs_begin = 0;         // first CCS flag column
    std::vector<std::string> loincs;   // panel order used for lab mean columns

    static FeatureSchema create(const CcsMap& ccs,
                                const std::vector<std::string>& loinc_panel =
                                    default_loinc_panel()) {
        FeatureSchema s;
        s.loincs = loinc_panel;
        s.columns = {"age_at_prediction", "cci_mean", "bmi_mean", "dbp_mean", "sbp_mean"};
        for (const auto& loinc : s.loincs) s.columns.push_back("lab_" + loinc + "_mean");
        auto add_group = [&](const std::string& name, const std::vector<std::string>& levels) {
            OneHotGroup g;
            g.name = name;
            g.begin = s.columns.size();
            g.levels = levels;
            for (const auto& level : levels) {
                s.columns.push_back(name + "_" + sanitize_column_token(level));
            }
            g.end = s.columns.size();
            s.groups.push_back(std::move(g));
        };
        add_group("gender", gender_levels());
        add_group("race", race_levels());
        add_group("marital", marital_levels());
        add_group("rucc", rucc_levels());
        s.ccs_begin = s.columns.size();
        s.ccs_ids = ccs.category_ids();
        for (int id : s.ccs_ids) s.columns.push_back("ccs_" + std::to_string(id));
        return s;
    }

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw_error(ErrorKind::data, "feature schema has no column '" + name + "'");
    }

    bool operator==(const FeatureSchema& other) const {
        return columns == other.columns; // column list determines the rest
    }
};

struct FeatureMatrix {
    FeatureSchema schema;
    std::vector<std::string> patient_ids;  // row-aligned to cohort members
    std::vector<int> labels;               // 1 = case
    std::vector<double> values;            // row-major
    std::vector<std::uint8_t> missing;     // row-major, 1 = missing

    std::size_t n_rows() const { return patient_ids.size(); }
    std::size_t n_cols() const { return schema.columns.size(); }

    double at(std::size_t row, std::size_t col) const { return values[row * n_cols() + col]; }
    bool is_missing(std::size_t row, std::size_t col) const {
        return missing[row * n_cols() + col] != 0;
    }

    std::vector<double> column(std::size_t col) const {
        std::vector<double> out;
        out.reserve(n_rows());
        for (std::size_t r = 0; r < n_rows(); ++r) out.push_back(at(r, col));
        return out;
    }
};

// Counts every event actually folded into a feature; consuming an event dated
// after the member's prediction point is a leakage violation.
struct WindowGuard {
    std::size_t events_consumed = 0;
    std::size_t violations = 0;

    void consume(const Date& event_date, const Date& prediction_point) {
        ++events_consumed;
        if (event_date > prediction_point) ++violations;
    }
};

// Arithmetic mean of values dated <= prediction_point; absent if none.
inline std::optional<double> mean_in_window(const std::vector<std::pair<Date, double>>& series,
                                            const Date& prediction_point,
                                            WindowGuard* guard = nullptr) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [date, value] : series) {
        if (date > prediction_point) continue;
        if (guard) guard->consume(date, prediction_point);
        sum += value;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

// 1 per CCS category with at least one mapped diagnosis, in ascending
// category-id order.
inline std::vector<double> diagnosis_flags(const std::vector<DiagnosisEvent>& window_diagnoses,
                                           const CcsMap& ccs) {
    auto ids = ccs.category_ids();
    std::set<int> present;
    for (const auto& dx : window_diagnoses) {
        auto cat = ccs.lookup(dx.icd_version, dx.code);
        if (cat) present.insert(*cat);
    }
    std::vector<double> flags;
    flags.reserve(ids.size());
    for (int id : ids) flags.push_back(present.count(id) ? 1.0 : 0.0);
    return flags;
}

inline int age_at(const Date& prediction_point, const Date& birth_date) {
    return age_in_years(birth_date, prediction_point);
}

// CCI per encounter from that encounter-date's diagnoses, averaged over the
// member's encounters in the observation window. 0 when the window holds no
// encounters (callers may flag such members).
inline double mean_cci(const ClinicalRecordSet& records, const std::string& patient_id,
                       const Date& prediction_point, const CharlsonMap& charlson,
                       bool apply_hierarchy = true, WindowGuard* guard = nullptr,
                       bool* no_encounters = nullptr) {
    std::map<Date, std::vector<std::pair<IcdVersion, std::string>>> dx_by_date;
    for (const auto& dx : records.diagnoses_for(patient_id)) {
        if (dx.date > prediction_point) continue;
        dx_by_date[dx.date].emplace_back(dx.icd_version, dx.code);
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& enc : records.encounters_for(patient_id)) {
        if (enc.date > prediction_point) continue;
        if (guard) guard->consume(enc.date, prediction_point);
        auto it = dx_by_date.find(enc.date);
        if (it == dx_by_date.end()) {
            ++n;
            continue;
        }
        if (guard) {
            for (std::size_t i = 0; i < it->second.size(); ++i) {
                guard->consume(enc.date, prediction_point);
            }
        }
        sum += charlson.cci(it->second, apply_hierarchy);
        ++n;
    }
    if (no_encounters) *no_encounters = (n == 0);
    if (n == 0) return 0.0;
    return sum / static_cast<double>(n);
}

struct AssembleOptions {
    bool apply_charlson_hierarchy = true;
};

struct AssembleResult {
    FeatureMatrix matrix;
    WindowGuard guard;
    std::size_t members_without_encounters = 0;
};

inline AssembleResult assemble_matrix(const ClinicalRecordSet& records,
                                      const std::vector<CohortAssignment>& members,
                                      const CcsMap& ccs, const CharlsonMap& charlson,
                                      const RuccTable& rucc,
                                      const AssembleOptions& options = {}) {
    AssembleResult result;
    FeatureMatrix& m = result.matrix;
    m.schema = FeatureSchema::create(ccs);
    const std::size_t cols = m.schema.columns.size();
    m.values.assign(members.size() * cols, 0.0);
    m.missing.assign(members.size() * cols, 0);
    m.patient_ids.reserve(members.size());
    m.labels.reserve(members.size());

    auto one_hot = [&](std::vector<double>& row, const FeatureSchema::OneHotGroup& g,
                       const std::string& raw) {
        std::string level = raw.empty() ? "Unknown" : raw;
        std::size_t hit = g.end - g.begin - 1; // trailing Unknown fallback
        for (std::size_t i = 0; i < g.levels.size(); ++i) {
            if (g.levels[i] == level) {
                hit = i;
                break;
            }
        }
        row[g.begin + hit] = 1.0;
    };

    for (std::size_t r = 0; r < members.size(); ++r) {
        const CohortAssignment& member = members[r];
        const PatientRecord& patient = records.patient(member.patient_id);
        const Date& pp = member.prediction_point;
        std::vector<double> row(cols, 0.0);
        std::vector<std::uint8_t> row_missing(cols, 0);

        row[0] = static_cast<double>(age_at(pp, patient.birth_date));

        bool no_encounters = false;
        row[1] = mean_cci(records, member.patient_id, pp, charlson,
                          options.apply_charlson_hierarchy, &result.guard, &no_encounters);
        if (no_encounters) ++result.members_without_encounters;

        auto set_mean = [&](std::size_t col, std::optional<double> mean) {
            if (mean) {
                row[col] = *mean;
            } else {
                row_missing[col] = 1;
            }
        };

        auto vitals = records.vitals_for(member.patient_id);
        auto vital_mean = [&](VitalKind kind) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& v : vitals) {
                if (v.kind != kind || v.date > pp) continue;
                result.guard.consume(v.date, pp);
                sum += v.value;
                ++n;
            }
            return n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt;
        };
        set_mean(2, vital_mean(VitalKind::bmi));
        set_mean(3, vital_mean(VitalKind::dbp));
        set_mean(4, vital_mean(VitalKind::sbp));

        auto labs = records.labs_for(member.patient_id);
        for (std::size_t i = 0; i < m.schema.loincs.size(); ++i) {
            const std::string& loinc = m.schema.loincs[i];
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& lab : labs) {
                if (lab.loinc != loinc || lab.date > pp) continue;
                result.guard.consume(lab.date, pp);
                sum += lab.value;
                ++n;
            }
            set_mean(5 + i, n ? std::optional<double>(sum / static_cast<double>(n))
                              : std::nullopt);
        }

        one_hot(row, m.schema.groups[0], to_string(patient.gender));
        one_hot(row, m.schema.groups[1], patient.race);
        one_hot(row, m.schema.groups[2], patient.marital_status);
        std::string rucc_level = "Unknown";
        if (!patient.county_fips.empty()) {
            if (auto hit = rucc.lookup(patient.county_fips)) {
                rucc_level = std::to_string(hit->rucc_code);
            }
        }
        one_hot(row, m.schema.groups[3], rucc_level);

        std::vector<DiagnosisEvent> window_dx;
        for (const auto& dx : records.diagnoses_for(member.patient_id)) {
            if (dx.date > pp) continue;
            result.guard.consume(dx.date, pp);
            window_dx.push_back(dx);
        }
        auto flags = diagnosis_flags(window_dx, ccs);
        for (std::size_t i = 0; i < flags.size(); ++i) row[m.schema.ccs_begin + i] = flags[i];

        // One-hot validity is a hard internal invariant.
        for (const auto& g : m.schema.groups) {
            double sum = 0.0;
            for (std::size_t c = g.begin; c < g.end; ++c) sum += row[c];
            if (sum != 1.0) {
                throw_error(ErrorKind::internal, "one-hot group '" + g.name +
                                                     "' does not sum to 1 for patient " +
                                                     member.patient_id);
            }
        }

        std::copy(row.begin(), row.end(), m.values.begin() + static_cast<std::ptrdiff_t>(r * cols));
        std::copy(row_missing.begin(), row_missing.end(),
                  m.missing.begin() + static_cast<std::ptrdiff_t>(r * cols));
        m.patient_ids.push_back(member.patient_id);
        m.labels.push_back(member.label == CohortLabel::lc_case ? 1 : 0);
    }

    if (m.patient_ids.size() != members.size() || m.values.size() != members.size() * cols) {
        throw_error(ErrorKind::internal, "feature matrix misaligned with cohort");
    }
    return result;
}

// --------------------------------------------------------------------------
// features.csv round-trip (missing cells are written empty)

inline void save_feature_matrix(const FeatureMatrix& m, const std::string& path,
                                const std::string& provenance_comment = "") {
    std::ofstream out(path);
    if (!out) throw_error(ErrorKind::io, "cannot write " + path);
    if (!provenance_comment.empty()) out << "# " << provenance_comment << '\n';
    std::vector<std::string> header = {"patient_id", "label"};
    header.insert(header.end(), m.schema.columns.begin(), m.schema.columns.end());
    csv::write_row(out, header);
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        std::vector<std::string> fields = {m.patient_ids[r], std::to_string(m.labels[r])};
        for (std::size_t c = 0; c < m.n_cols(); ++c) {
            fields.push_back(m.is_missing(r, c) ? "" : format_double(m.at(r, c)));
        }
        csv::write_row(out, fields);
    }
}

inline FeatureMatrix load_feature_matrix(const std::string& path, const FeatureSchema& schema) {
    FeatureMatrix m;
    m.schema = schema;
    csv::Reader reader(path);
    auto header = reader.next();
    if (!header) throw_error(ErrorKind::data, path + ": empty file");
    std::vector<std::string> expected = {"patient_id", "label"};
    expected.insert(expected.end(), schema.columns.begin(), schema.columns.end());
    if (header->fields != expected) {
        throw_error(ErrorKind::data, path + ": header does not match the feature schema");
    }
    const std::size_t cols = schema.columns.size();
    while (auto row = reader.next()) {
        const std::string where = path + ":" + std::to_string(row->line);
        if (row->fields.size() != expected.size()) {
            throw_error(ErrorKind::data, where + ": wrong column count");
        }
        m.patient_ids.push_back(row->fields[0]);
        m.labels.push_back(static_cast<int>(parse_int(row->fields[1], where)));
        for (std::size_t c = 0; c < cols; ++c) {
            const std::string& cell = row->fields[2 + c];
            if (cell.empty()) {
                m.values.push_back(0.0);
                m.missing.push_back(1);
            } else {
                m.values.push_back(parse_double(cell, where));
                m.missing.push_back(0);
            }
        }
    }
    return m;
}

} // namespace ch
