#pragma once

// EHR extract domain types and CSV ingestion.
//
// File schemas (UTF-8, header row required, RFC-4180 quoting, ISO dates):
//   patients.csv    patient_id,birth_date,gender,race,marital_status,county_fips
//   encounters.csv  encounter_id,patient_id,date
//   diagnoses.csv   patient_id,date,icd_version,code        (icd_version in {9,10})
//   labs.csv        patient_id,date,loinc,value
//   vitals.csv      patient_id,date,kind,value              (kind in {SBP,DBP,BMI})

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ch/csv.hpp"
#include "ch/date.hpp"
#include "ch/error.hpp"

namespace ch {

enum class IcdVersion { icd9, icd10 };

inline std::string to_string(IcdVersion v) { return v == IcdVersion::icd9 ? "9" : "10"; }

inline IcdVersion icd_version_from_string(const std::string& text, const std::string& where) {
    if (text == "9") return IcdVersion::icd9;
    if (text == "10") return IcdVersion::icd10;
    throw_error(ErrorKind::data, where + ": icd_version must be 9 or 10, got '" + text + "'");
}

enum class Gender { female, male, unknown };

inline std::string to_string(Gender g) {
    switch (g) {
        case Gender::female: return "Female";
        case Gender::male: return "Male";
        default: return "Unknown";
    }
}

inline Gender gender_from_string(const std::string& text, const std::string& where) {
    if (text == "Female") return Gender::female;
    if (text == "Male") return Gender::male;
    if (text == "Unknown" || text.empty()) return Gender::unknown;
    throw_error(ErrorKind::data, where + ": gender must be Female, Male or Unknown, got '" + text + "'");
}

enum class VitalKind { sbp, dbp, bmi };

inline std::string to_string(VitalKind k) {
    switch (k) {
        case VitalKind::sbp: return "SBP";
        case VitalKind::dbp: return "DBP";
        default: return "BMI";
    }
}

inline VitalKind vital_kind_from_string(const std::string& text, const std::string& where) {
    if (text == "SBP") return VitalKind::sbp;
    if (text == "DBP") return VitalKind::dbp;
    if (text == "BMI") return VitalKind::bmi;
    throw_error(ErrorKind::data, where + ": vital kind must be SBP, DBP or BMI, got '" + text + "'");
}

inline constexpr std::array<VitalKind, 3> kVitalKinds = {VitalKind::sbp, VitalKind::dbp,
                                                         VitalKind::bmi};

// The nine panel analytes, lexicographic LOINC order.
inline const std::vector<std::string>& default_loinc_panel() {
    static const std::vector<std::string> panel = {
        "1742-6",  // ALT
        "1751-7",  // albumin
        "1920-8",  // AST
        "1975-2",  // bilirubin, total
        "26515-7", // platelets
        "2885-2",  // protein, total
        "5902-2",  // prothrombin time
        "6768-6",  // alkaline phosphatase
        "718-7",   // hemoglobin
    };
    return panel;
}

struct PatientRecord {
    std::string patient_id;
    Date birth_date;
    Gender gender = Gender::unknown;
    std::string race;           // open set; empty means unknown
    std::string marital_status; // open set; empty means unknown
    std::string county_fips;    // 5 chars or empty (absent)

    bool operator==(const PatientRecord&) const = default;
};

struct Encounter {
    std::string encounter_id;
    std::string patient_id;
    Date date;

    bool operator==(const Encounter&) const = default;
};

struct DiagnosisEvent {
    std::string patient_id;
    Date date;
    IcdVersion icd_version = IcdVersion::icd10;
    std::string code; // normalized: uppercase, no dots

    bool operator==(const DiagnosisEvent&) const = default;
};

struct LabResult {
    std::string patient_id;
    Date date;
    std::string loinc;
    double value = 0.0;

    bool operator==(const LabResult&) const = default;
};

struct VitalSign {
    std::string patient_id;
    Date date;
    VitalKind kind = VitalKind::sbp;
    double value = 0.0;

    bool operator==(const VitalSign&) const = default;
};

// --------------------------------------------------------------------------
// ICD code handling

inline std::string trim(const std::string& text) {
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return text.substr(b, e - b);
}

// Uppercase, dots stripped, surrounding whitespace removed. The ICD version
// travels with the code elsewhere; it does not affect normalization.
inline std::string normalize_icd(const std::string& raw, IcdVersion /*version*/ = IcdVersion::icd10) {
    std::string out;
    out.reserve(raw.size());
    for (char c : trim(raw)) {
        if (c == '.') continue;
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    if (out.empty()) throw_error(ErrorKind::data, "malformed ICD code: empty after trimming");
    return out;
}

// Pattern match over normalized codes. A trailing 'x'/'X' makes the pattern a
// prefix wildcard: "K746x" matches "K746", "K7460", "K7469".
inline bool code_matches_pattern(const std::string& code, const std::string& pattern) {
    if (!pattern.empty() && (pattern.back() == 'x' || pattern.back() == 'X')) {
        const std::size_t n = pattern.size() - 1;
        return code.size() >= n && code.compare(0, n, pattern, 0, n) == 0;
    }
    return code == pattern;
}

// A version-qualified code pattern, e.g. {icd9, "5718"}.
struct CodePattern {
    IcdVersion icd_version = IcdVersion::icd10;
    std::string pattern; // normalized, optional trailing wildcard

    bool matches(const DiagnosisEvent& dx) const {
        return dx.icd_version == icd_version && code_matches_pattern(dx.code, pattern);
    }

    bool operator==(const CodePattern&) const = default;
};

// --------------------------------------------------------------------------
// Record set

class ClinicalRecordSet {
public:
    std::vector<PatientRecord> patients;
    std::vector<Encounter> encounters;
    std::vector<DiagnosisEvent> diagnoses;
    std::vector<LabResult> labs;
    std::vector<VitalSign> vitals;

    // Sorts events by (patient_id, date) and rebuilds per-patient indices.
    // Must be called after the collections are (re)populated.
    void finalize() {
        auto by_patient_date = [](const auto& a, const auto& b) {
            if (a.patient_id != b.patient_id) return a.patient_id < b.patient_id;
            return a.date < b.date;
        };
        std::stable_sort(encounters.begin(), encounters.end(), by_patient_date);
        std::stable_sort(diagnoses.begin(), diagnoses.end(), by_patient_date);
        std::stable_sort(labs.begin(), labs.end(), by_patient_date);
        std::stable_sort(vitals.begin(), vitals.end(), by_patient_date);
        std::stable_sort(patients.begin(), patients.end(),
                         [](const auto& a, const auto& b) { return a.patient_id < b.patient_id; });

        patient_index_.clear();
        for (std::size_t i = 0; i < patients.size(); ++i) {
            if (!patient_index_.emplace(patients[i].patient_id, i).second) {
                throw_error(ErrorKind::data,
                            "duplicate patient_id '" + patients[i].patient_id + "'");
            }
        }
        build_span_index(encounters, encounter_spans_);
        build_span_index(diagnoses, diagnosis_spans_);
        build_span_index(labs, lab_spans_);
        build_span_index(vitals, vital_spans_);
    }

    bool has_patient(const std::string& patient_id) const {
        return patient_index_.count(patient_id) != 0;
    }

    const PatientRecord& patient(const std::string& patient_id) const {
        auto it = patient_index_.find(patient_id);
        if (it == patient_index_.end()) {
            throw_error(ErrorKind::data, "unknown patient_id '" + patient_id + "'");
        }
        return patients[it->second];
    }

    std::span<const Encounter> encounters_for(const std::string& patient_id) const {
        return lookup_span(encounters, encounter_spans_, patient_id);
    }
    std::span<const DiagnosisEvent> diagnoses_for(const std::string& patient_id) const {
        return lookup_span(diagnoses, diagnosis_spans_, patient_id);
    }
    std::span<const LabResult> labs_for(const std::string& patient_id) const {
        return lookup_span(labs, lab_spans_, patient_id);
    }
    std::span<const VitalSign> vitals_for(const std::string& patient_id) const {
        return lookup_span(vitals, vital_spans_, patient_id);
    }

    bool operator==(const ClinicalRecordSet& other) const {
        return patients == other.patients && encounters == other.encounters &&
               diagnoses == other.diagnoses && labs == other.labs && vitals == other.vitals;
    }

private:
    using SpanIndex = std::unordered_map<std::string, std::pair<std::size_t, std::size_t>>;

    template <typename T>
    static void build_span_index(const std::vector<T>& events, SpanIndex& index) {
        index.clear();
        std::size_t begin = 0;
        for (std::size_t i = 1; i <= events.size(); ++i) {
            if (i == events.size() || events[i].patient_id != events[begin].patient_id) {
                index.emplace(events[begin].patient_id, std::make_pair(begin, i));
                begin = i;
            }
        }
    }

    template <typename T>
    static std::span<const T> lookup_span(const std::vector<T>& events, const SpanIndex& index,
                                          const std::string& patient_id) {
        auto it = index.find(patient_id);
        if (it == index.end()) return {};
        return std::span<const T>(events.data() + it->second.first,
                                  it->second.second - it->second.first);
    }

    std::unordered_map<std::string, std::size_t> patient_index_;
    SpanIndex encounter_spans_;
    SpanIndex diagnosis_spans_;
    SpanIndex lab_spans_;
    SpanIndex vital_spans_;
};

// --------------------------------------------------------------------------
// Loading

struct RecordSetPaths {
    std::string patients;
    std::string encounters;
    std::string diagnoses;
    std::string labs;
    std::string vitals;
};

struct LoadOptions {
    bool lenient = false; // report and skip bad rows instead of failing fast
    std::vector<std::string> loinc_panel = default_loinc_panel();
};

struct RejectedRow {
    std::string file;
    std::size_t line = 0;
    std::string reason;
};

struct LoadReport {
    std::vector<RejectedRow> rejected;
    std::size_t rows_loaded = 0;
};

struct LoadResult {
    ClinicalRecordSet records;
    LoadReport report;
};

namespace detail {

class TableReader {
public:
    TableReader(const std::string& path, const std::vector<std::string>& expected_header,
                bool lenient, LoadReport& report)
        : reader_(path), lenient_(lenient), report_(&report) {
        auto header = reader_.next();
        if (!header) throw_error(ErrorKind::data, path + ": empty file (header row required)");
        if (header->fields != expected_header) {
            std::string want;
            for (std::size_t i = 0; i < expected_header.size(); ++i) {
                if (i) want += ",";
                want += expected_header[i];
            }
            throw_error(ErrorKind::data, path + ":" + std::to_string(header->line) +
                                             ": bad header (expected " + want + ")");
        }
        columns_ = expected_header.size();
    }

    // Applies `parse` to each data row; parse errors reject the row under
    // lenient loading and fail fast otherwise.
    template <typename Fn>
    void for_each(Fn&& parse) {
        while (auto row = reader_.next()) {
            const std::string where = reader_.path() + ":" + std::to_string(row->line);
            if (row->fields.size() != columns_) {
                handle(where, "expected " + std::to_string(columns_) + " columns, got " +
                                  std::to_string(row->fields.size()),
                       row->line);
                continue;
            }
            try {
                parse(row->fields, where);
                ++report_->rows_loaded;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::data) throw;
                handle(where, e.what(), row->line);
            }
        }
    }

private:
    void handle(const std::string& where, const std::string& reason, std::size_t line) {
        const std::string message =
            reason.compare(0, where.size(), where) == 0 ? reason : where + ": " + reason;
        if (!lenient_) throw_error(ErrorKind::data, message);
        report_->rejected.push_back({reader_.path(), line, reason});
    }

    csv::Reader reader_;
    bool lenient_;
    LoadReport* report_;
    std::size_t columns_ = 0;
};

} // namespace detail

inline LoadResult load_record_set(const RecordSetPaths& paths, const LoadOptions& options = {}) {
    LoadResult result;
    ClinicalRecordSet& set = result.records;
    LoadReport& report = result.report;

    std::set<std::string> panel(options.loinc_panel.begin(), options.loinc_panel.end());
    std::set<std::string> known_patients;

    {
        detail::TableReader table(paths.patients,
                                  {"patient_id", "birth_date", "gender", "race", "marital_status",
                                   "county_fips"},
                                  options.lenient, report);
        table.for_each([&](const std::vector<std::string>& f, const std::string& where) {
            PatientRecord p;
            p.patient_id = f[0];
            if (p.patient_id.empty()) throw_error(ErrorKind::data, "empty patient_id");
            if (known_patients.count(p.patient_id)) {
                throw_error(ErrorKind::data, "duplicate patient_id '" + p.patient_id + "'");
            }
            p.birth_date = Date::parse(f[1]);
            p.gender = gender_from_string(f[2], where);
            p.race = f[3];
            p.marital_status = f[4];
            p.county_fips = f[5];
            if (!p.county_fips.empty() && p.county_fips.size() != 5) {
                throw_error(ErrorKind::data, "county_fips must be 5 characters or empty, got '" +
                                                 p.county_fips + "'");
            }
            known_patients.insert(p.patient_id);
            set.patients.push_back(std::move(p));
        });
    }

    auto check_patient = [&](const std::string& id) {
        if (!known_patients.count(id)) {
            throw_error(ErrorKind::data, "patient_id '" + id + "' not present in patients file");
        }
    };

    {
        detail::TableReader table(paths.encounters, {"encounter_id", "patient_id", "date"},
                                  options.lenient, report);
        table.for_each([&](const std::vector<std::string>& f, const std::string&) {
            Encounter e;
            e.encounter_id = f[0];
            e.patient_id = f[1];
            check_patient(e.patient_id);
            e.date = Date::parse(f[2]);
            set.encounters.push_back(std::move(e));
        });
    }

    {
        detail::TableReader table(paths.diagnoses, {"patient_id", "date", "icd_version", "code"},
                                  options.lenient, report);
        table.for_each([&](const std::vector<std::string>& f, const std::string& where) {
            DiagnosisEvent d;
            d.patient_id = f[0];
            check_patient(d.patient_id);
            d.date = Date::parse(f[1]);
            d.icd_version = icd_version_from_string(f[2], where);
            d.code = normalize_icd(f[3], d.icd_version);
            set.diagnoses.push_back(std::move(d));
        });
    }

    {
        detail::TableReader table(paths.labs, {"patient_id", "date", "loinc", "value"},
                                  options.lenient, report);
        table.for_each([&](const std::vector<std::string>& f, const std::string& where) {
            LabResult l;
            l.patient_id = f[0];
            check_patient(l.patient_id);
            l.date = Date::parse(f[1]);
            l.loinc = f[2];
            if (!panel.count(l.loinc)) {
                throw_error(ErrorKind::data, "loinc '" + l.loinc + "' not in the configured panel");
            }
            l.value = parse_double(f[3], where);
            if (!std::isfinite(l.value)) throw_error(ErrorKind::data, "lab value must be finite");
            set.labs.push_back(std::move(l));
        });
    }

    {
        detail::TableReader table(paths.vitals, {"patient_id", "date", "kind", "value"},
                                  options.lenient, report);
        table.for_each([&](const std::vector<std::string>& f, const std::string& where) {
            VitalSign v;
            v.patient_id = f[0];
            check_patient(v.patient_id);
            v.date = Date::parse(f[1]);
            v.kind = vital_kind_from_string(f[2], where);
            v.value = parse_double(f[3], where);
            if (!(std::isfinite(v.value) && v.value > 0)) {
                throw_error(ErrorKind::data, "vital value must be finite and positive");
            }
            set.vitals.push_back(std::move(v));
        });
    }

    set.finalize();
    return result;
}

// --------------------------------------------------------------------------
// Saving (round-trips through load_record_set)

inline void save_record_set(const ClinicalRecordSet& set, const RecordSetPaths& paths,
                            const std::string& provenance_comment = "") {
    auto open = [&](const std::string& path) {
        std::ofstream out(path);
        if (!out) throw_error(ErrorKind::io, "cannot write " + path);
        if (!provenance_comment.empty()) out << "# " << provenance_comment << '\n';
        return out;
    };

    {
        auto out = open(paths.patients);
        csv::write_row(out, {"patient_id", "birth_date", "gender", "race", "marital_status",
                             "county_fips"});
        for (const auto& p : set.patients) {
            csv::write_row(out, {p.patient_id, p.birth_date.to_string(), to_string(p.gender),
                                 p.race, p.marital_status, p.county_fips});
        }
    }
    {
        auto out = open(paths.encounters);
        csv::write_row(out, {"encounter_id", "patient_id", "date"});
        for (const auto& e : set.encounters) {
            csv::write_row(out, {e.encounter_id, e.patient_id, e.date.to_string()});
        }
    }
    {
        auto out = open(paths.diagnoses);
        csv::write_row(out, {"patient_id", "date", "icd_version", "code"});
        for (const auto& d : set.diagnoses) {
            csv::write_row(out, {d.patient_id, d.date.to_string(), to_string(d.icd_version),
                                 d.code});
        }
    }
    {
        auto out = open(paths.labs);
        csv::write_row(out, {"patient_id", "date", "loinc", "value"});
        for (const auto& l : set.labs) {
            csv::write_row(out, {l.patient_id, l.date.to_string(), l.loinc,
                                 format_double(l.value)});
        }
    }
    {
        auto out = open(paths.vitals);
        csv::write_row(out, {"patient_id", "date", "kind", "value"});
        for (const auto& v : set.vitals) {
            csv::write_row(out, {v.patient_id, v.date.to_string(), to_string(v.kind),
                                 format_double(v.value)});
        }
    }
}

} // namespace ch
