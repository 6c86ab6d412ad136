#pragma once

// Temporal cohort construction: fatty-liver base population, LC/non-LC split,
// index dates and prediction points, time-matched control sampling, and
// complete-case filtering.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ch/date.hpp"
#include "ch/records.hpp"
#include "ch/rng.hpp"

namespace ch {

struct CohortSpec {
    std::vector<CodePattern> fatty_liver_patterns = {{IcdVersion::icd9, "5718"},
                                                     {IcdVersion::icd10, "K760"}};
    std::vector<CodePattern> lc_patterns = {{IcdVersion::icd9, "5712"},
                                            {IcdVersion::icd9, "5713"},
                                            {IcdVersion::icd10, "K746X"},
                                            {IcdVersion::icd10, "K703X"}};
    int window_years = 1;
    int controls_per_case = 5;
    int match_tolerance_days = 7;
    std::uint64_t rng_seed = 7;

    void validate() const {
        if (window_years < 1) throw_error(ErrorKind::config, "window_years must be >= 1");
        if (controls_per_case < 1) throw_error(ErrorKind::config, "controls_per_case must be >= 1");
        if (match_tolerance_days < 0) {
            throw_error(ErrorKind::config, "match_tolerance_days must be >= 0");
        }
        if (fatty_liver_patterns.empty() || lc_patterns.empty()) {
            throw_error(ErrorKind::config, "cohort code pattern lists must be non-empty");
        }
    }
};

enum class CohortLabel { control = 0, lc_case = 1 };

inline std::string to_string(CohortLabel label) {
    return label == CohortLabel::lc_case ? "case" : "control";
}

struct CohortAssignment {
    std::string patient_id;
    CohortLabel label = CohortLabel::control;
    std::optional<Date> index_date; // cases only: first LC diagnosis
    Date prediction_point;
    int window_years = 1;
    // Controls only: the case whose prediction time matched, and that case's
    // prediction point. Kept so the matching contract stays auditable even
    // when the anchor case is later dropped by complete-case filtering.
    std::string anchor_case_id;
    std::optional<Date> anchor_prediction_point;
};

// Counts per derivation stage, one per Fig-4-style filtering step.
struct FilteringReport {
    std::size_t fatty_liver = 0;
    std::size_t lc = 0;
    std::size_t non_lc = 0;
    std::size_t matched_controls = 0; // unique control patients after dedup
    std::size_t pre_dedup_sampled = 0;
    std::size_t max_pre_dedup_per_case = 0;
    std::size_t final_cases = 0;
    std::size_t final_controls = 0;
    int window_years = 1;
};

inline bool matches_any(const DiagnosisEvent& dx, const std::vector<CodePattern>& patterns) {
    for (const auto& p : patterns) {
        if (p.matches(dx)) return true;
    }
    return false;
}

// Patients carrying at least one fatty-liver code, in sorted id order.
inline std::vector<std::string> identify_fatty_liver(const ClinicalRecordSet& records,
                                                     const CohortSpec& spec) {
    std::set<std::string> ids;
    for (const auto& dx : records.diagnoses) {
        if (matches_any(dx, spec.fatty_liver_patterns)) ids.insert(dx.patient_id);
    }
    return {ids.begin(), ids.end()};
}

// Earliest date of any LC-pattern diagnosis; absent if the patient never has one.
inline std::optional<Date> first_lc_diagnosis(const ClinicalRecordSet& records,
                                              const CohortSpec& spec,
                                              const std::string& patient_id) {
    std::optional<Date> first;
    for (const auto& dx : records.diagnoses_for(patient_id)) {
        if (!matches_any(dx, spec.lc_patterns)) continue;
        if (!first || dx.date < *first) first = dx.date;
    }
    return first;
}

inline Date prediction_point_for(const Date& index_date, int window_years) {
    return subtract_years(index_date, window_years);
}

// Up to controls_per_case encounters from distinct never-LC fatty-liver
// patients within +/- tolerance days of each case's prediction point, sampled
// without replacement from per-case RNG streams, then deduplicated to unique
// patients with the first case (ascending index date, ties by id) winning.
inline std::vector<CohortAssignment> sample_matched_controls(
    const ClinicalRecordSet& records, const CohortSpec& spec,
    const std::vector<CohortAssignment>& cases, FilteringReport* report = nullptr) {
    spec.validate();

    std::set<std::string> pool;
    for (const auto& id : identify_fatty_liver(records, spec)) {
        if (!first_lc_diagnosis(records, spec, id)) pool.insert(id);
    }

    // All pool encounters ordered by date for range scans.
    std::vector<std::pair<std::int64_t, std::size_t>> by_date; // (serial, encounter idx)
    for (std::size_t i = 0; i < records.encounters.size(); ++i) {
        if (pool.count(records.encounters[i].patient_id)) {
            by_date.emplace_back(records.encounters[i].date.serial(), i);
        }
    }
    std::sort(by_date.begin(), by_date.end());

    std::vector<const CohortAssignment*> ordered;
    ordered.reserve(cases.size());
    for (const auto& c : cases) ordered.push_back(&c);
    std::sort(ordered.begin(), ordered.end(), [](const auto* a, const auto* b) {
        if (a->index_date != b->index_date) return a->index_date < b->index_date;
        return a->patient_id < b->patient_id;
    });

    std::vector<CohortAssignment> controls;
    std::set<std::string> used;
    for (const auto* cs : ordered) {
        const std::int64_t target = cs->prediction_point.serial();
        auto lo = std::lower_bound(by_date.begin(), by_date.end(),
                                   std::make_pair(target - spec.match_tolerance_days,
                                                  std::size_t{0}));
        // Best eligible encounter per candidate patient: smallest |delta|, then
        // earliest date.
        std::map<std::string, std::pair<std::int64_t, std::int64_t>> best; // id -> (|d|, serial)
        for (auto it = lo; it != by_date.end() && it->first <= target + spec.match_tolerance_days;
             ++it) {
            const Encounter& enc = records.encounters[it->second];
            std::int64_t delta = it->first > target ? it->first - target : target - it->first;
            auto [slot, inserted] = best.emplace(enc.patient_id, std::make_pair(delta, it->first));
            if (!inserted && (delta < slot->second.first ||
                              (delta == slot->second.first && it->first < slot->second.second))) {
                slot->second = {delta, it->first};
            }
        }
        std::vector<const std::pair<const std::string, std::pair<std::int64_t, std::int64_t>>*>
            candidates;
        candidates.reserve(best.size());
        for (const auto& kv : best) candidates.push_back(&kv);

        Rng rng = Rng::stream(spec.rng_seed, cs->patient_id);
        auto picks = rng.sample_without_replacement(
            candidates.size(), static_cast<std::size_t>(spec.controls_per_case));
        if (report) {
            report->pre_dedup_sampled += picks.size();
            report->max_pre_dedup_per_case = std::max(report->max_pre_dedup_per_case,
                                                      picks.size());
        }
        for (std::size_t pick : picks) {
            const auto& [patient_id, slot] = *candidates[pick];
            if (!used.insert(patient_id).second) continue; // already assigned to an earlier case
            CohortAssignment ctrl;
            ctrl.patient_id = patient_id;
            ctrl.label = CohortLabel::control;
            ctrl.prediction_point = Date::from_serial(slot.second);
            ctrl.window_years = spec.window_years;
            ctrl.anchor_case_id = cs->patient_id;
            ctrl.anchor_prediction_point = cs->prediction_point;
            controls.push_back(std::move(ctrl));
        }
    }
    return controls;
}

inline std::vector<VitalKind> default_vital_panel() {
    return {kVitalKinds.begin(), kVitalKinds.end()};
}

// Keep members having at least one measurement of every panel lab and every
// panel vital kind at dates <= prediction_point.
inline std::vector<CohortAssignment> complete_case_filter(
    const ClinicalRecordSet& records, const std::vector<CohortAssignment>& members,
    const std::vector<std::string>& loinc_panel = default_loinc_panel(),
    const std::vector<VitalKind>& vital_panel = default_vital_panel()) {
    std::vector<CohortAssignment> kept;
    kept.reserve(members.size());
    for (const auto& m : members) {
        std::set<std::string> labs_seen;
        for (const auto& lab : records.labs_for(m.patient_id)) {
            if (lab.date <= m.prediction_point) labs_seen.insert(lab.loinc);
        }
        bool complete = true;
        for (const auto& loinc : loinc_panel) {
            if (!labs_seen.count(loinc)) {
                complete = false;
                break;
            }
        }
        if (complete && !vital_panel.empty()) {
            std::set<VitalKind> vitals_seen;
            for (const auto& v : records.vitals_for(m.patient_id)) {
                if (v.date <= m.prediction_point) vitals_seen.insert(v.kind);
            }
            for (VitalKind kind : vital_panel) {
                if (!vitals_seen.count(kind)) {
                    complete = false;
                    break;
                }
            }
        }
        if (complete) kept.push_back(m);
    }
    return kept;
}

struct CohortResult {
    std::vector<CohortAssignment> members; // cases first, then controls
    FilteringReport report;
};

inline CohortResult build_cohort(const ClinicalRecordSet& records, const CohortSpec& spec,
                                 const std::vector<std::string>& loinc_panel =
                                     default_loinc_panel(),
                                 const std::vector<VitalKind>& vital_panel =
                                     default_vital_panel()) {
    spec.validate();
    CohortResult result;
    FilteringReport& report = result.report;
    report.window_years = spec.window_years;

    auto fatty = identify_fatty_liver(records, spec);
    report.fatty_liver = fatty.size();
    if (fatty.empty()) {
        throw_error(ErrorKind::data, "empty cohort at stage 'fatty-liver identification'");
    }

    std::vector<CohortAssignment> cases;
    for (const auto& id : fatty) {
        auto index = first_lc_diagnosis(records, spec, id);
        if (!index) continue;
        CohortAssignment c;
        c.patient_id = id;
        c.label = CohortLabel::lc_case;
        c.index_date = *index;
        c.prediction_point = prediction_point_for(*index, spec.window_years);
        c.window_years = spec.window_years;
        cases.push_back(std::move(c));
    }
    report.lc = cases.size();
    report.non_lc = report.fatty_liver - report.lc;
    if (cases.empty()) throw_error(ErrorKind::data, "empty cohort at stage 'LC-case identification'");

    std::sort(cases.begin(), cases.end(), [](const auto& a, const auto& b) {
        if (a.index_date != b.index_date) return a.index_date < b.index_date;
        return a.patient_id < b.patient_id;
    });

    auto controls = sample_matched_controls(records, spec, cases, &report);
    report.matched_controls = controls.size();

    auto kept_cases = complete_case_filter(records, cases, loinc_panel, vital_panel);
    auto kept_controls = complete_case_filter(records, controls, loinc_panel, vital_panel);
    report.final_cases = kept_cases.size();
    report.final_controls = kept_controls.size();
    if (kept_cases.empty() && kept_controls.empty()) {
        throw_error(ErrorKind::data, "empty cohort at stage 'complete-case filtering'");
    }

    result.members = std::move(kept_cases);
    result.members.insert(result.members.end(), kept_controls.begin(), kept_controls.end());
    return result;
}

} // namespace ch
