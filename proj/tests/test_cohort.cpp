#include <doctest.h>

#include <algorithm>

#include "ch/cohort.hpp"

using namespace ch;

namespace {

// Small in-memory extract: P1 is an LC case, C1..C3 are never-LC fatty-liver
// patients, X1 has no fatty-liver code at all.
ClinicalRecordSet fixture() {
    ClinicalRecordSet set;
    auto add_patient = [&](const std::string& id) {
        set.patients.push_back({id, Date(1960, 1, 1), Gender::female, "White", "Married", ""});
    };
    for (const char* id : {"P1", "C1", "C2", "C3", "X1"}) add_patient(id);

    auto dx = [&](const std::string& id, Date date, IcdVersion v, const std::string& code) {
        set.diagnoses.push_back({id, date, v, code});
    };
    dx("P1", Date(2014, 2, 1), IcdVersion::icd10, "K760");
    dx("P1", Date(2016, 6, 10), IcdVersion::icd10, "K7030"); // first LC
    dx("P1", Date(2017, 1, 2), IcdVersion::icd9, "5712");    // later LC
    dx("C1", Date(2014, 3, 1), IcdVersion::icd9, "5718");
    dx("C2", Date(2014, 4, 1), IcdVersion::icd10, "K760");
    dx("C3", Date(2014, 5, 1), IcdVersion::icd10, "K760");
    dx("X1", Date(2014, 6, 1), IcdVersion::icd10, "E119");

    auto enc = [&](const std::string& id, const std::string& eid, Date date) {
        set.encounters.push_back({eid, id, date});
    };
    enc("P1", "E1", Date(2015, 6, 10));
    enc("C1", "E2", Date(2015, 6, 3));  // |d| = 7, eligible
    enc("C1", "E3", Date(2015, 6, 18)); // |d| = 8, not eligible
    enc("C2", "E4", Date(2015, 6, 12)); // |d| = 2, eligible
    enc("C3", "E5", Date(2015, 7, 1));  // |d| = 21, not eligible
    enc("X1", "E6", Date(2015, 6, 10)); // not fatty-liver, never eligible

    set.finalize();
    return set;
}

std::vector<CohortAssignment> cases_of(const std::vector<CohortAssignment>& members) {
    std::vector<CohortAssignment> out;
    for (const auto& m : members) {
        if (m.label == CohortLabel::lc_case) out.push_back(m);
    }
    return out;
}

} // namespace

TEST_CASE("identify_fatty_liver matches either coding system") {
    auto set = fixture();
    CohortSpec spec;
    auto ids = identify_fatty_liver(set, spec);
    CHECK(ids == std::vector<std::string>{"C1", "C2", "C3", "P1"});
}

TEST_CASE("first_lc_diagnosis is the minimum across versions") {
    auto set = fixture();
    CohortSpec spec;
    CHECK(first_lc_diagnosis(set, spec, "P1") == Date(2016, 6, 10));
    CHECK_FALSE(first_lc_diagnosis(set, spec, "C1").has_value());

    ClinicalRecordSet two;
    two.patients.push_back({"A", Date(1960, 1, 1), Gender::male, "", "", ""});
    two.diagnoses.push_back({"A", Date(2014, 1, 1), IcdVersion::icd9, "5712"});
    two.diagnoses.push_back({"A", Date(2013, 5, 5), IcdVersion::icd10, "K7460"});
    two.finalize();
    CHECK(first_lc_diagnosis(two, spec, "A") == Date(2013, 5, 5));
}

TEST_CASE("matching respects the +/-7 day boundary and samples distinct patients") {
    auto set = fixture();
    CohortSpec spec;
    spec.window_years = 1;

    CohortAssignment case1;
    case1.patient_id = "P1";
    case1.label = CohortLabel::lc_case;
    case1.index_date = Date(2016, 6, 10);
    case1.prediction_point = Date(2015, 6, 10);
    case1.window_years = 1;

    auto controls = sample_matched_controls(set, spec, {case1});
    REQUIRE(controls.size() == 2); // C1 (|d|=7) and C2 (|d|=2); C3 and X1 excluded
    std::vector<std::string> ids;
    for (const auto& c : controls) ids.push_back(c.patient_id);
    std::sort(ids.begin(), ids.end());
    CHECK(ids == std::vector<std::string>{"C1", "C2"});
    for (const auto& c : controls) {
        CHECK(c.anchor_case_id == "P1");
        const auto delta = days_between(c.prediction_point, case1.prediction_point);
        CHECK(std::abs(delta) <= 7);
        CHECK(c.window_years == 1);
    }
}

TEST_CASE("a control patient shared by two cases goes to the earlier case") {
    auto set = fixture();
    // Second case anchored one day after the first so C2 is eligible for both.
    set.patients.push_back({"P2", Date(1958, 1, 1), Gender::male, "", "", ""});
    set.diagnoses.push_back({"P2", Date(2014, 1, 1), IcdVersion::icd10, "K760"});
    set.diagnoses.push_back({"P2", Date(2016, 6, 11), IcdVersion::icd10, "K7460"});
    set.finalize();

    CohortSpec spec;
    auto make_case = [&](const std::string& id, Date index) {
        CohortAssignment c;
        c.patient_id = id;
        c.label = CohortLabel::lc_case;
        c.index_date = index;
        c.prediction_point = prediction_point_for(index, 1);
        c.window_years = 1;
        return c;
    };
    auto controls = sample_matched_controls(
        set, spec, {make_case("P2", Date(2016, 6, 11)), make_case("P1", Date(2016, 6, 10))});

    // every control appears once and the earlier-indexed case (P1) won C1/C2
    std::set<std::string> unique;
    for (const auto& c : controls) CHECK(unique.insert(c.patient_id).second);
    for (const auto& c : controls) {
        if (c.patient_id == "C1" || c.patient_id == "C2") CHECK(c.anchor_case_id == "P1");
    }
}

TEST_CASE("matching takes all eligible controls when short of controls_per_case") {
    auto set = fixture();
    CohortSpec spec;
    spec.controls_per_case = 5;
    CohortAssignment case1;
    case1.patient_id = "P1";
    case1.label = CohortLabel::lc_case;
    case1.index_date = Date(2016, 6, 10);
    case1.prediction_point = Date(2015, 6, 10);
    case1.window_years = 1;
    FilteringReport report;
    auto controls = sample_matched_controls(set, spec, {case1}, &report);
    CHECK(controls.size() == 2);
    CHECK(report.max_pre_dedup_per_case <= 5);
}

TEST_CASE("tolerance zero with no same-day encounters yields zero controls") {
    auto set = fixture();
    CohortSpec spec;
    spec.match_tolerance_days = 0;
    auto cohort = build_cohort(set, spec, {}, {}); // empty panel: nothing required
    CHECK(cohort.report.lc == 1);
    CHECK(cohort.report.matched_controls == 0);
    CHECK(cohort.report.final_cases == 1);
    CHECK(cohort.report.final_controls == 0);
}

TEST_CASE("two LC patterns on one patient yield a single case row") {
    auto set = fixture();
    CohortSpec spec;
    auto cohort = build_cohort(set, spec, {}, {});
    auto cases = cases_of(cohort.members);
    REQUIRE(cases.size() == 1);
    CHECK(cases[0].patient_id == "P1");
    CHECK(cases[0].index_date == Date(2016, 6, 10));
    CHECK(cases[0].prediction_point == Date(2015, 6, 10));
}

TEST_CASE("build_cohort names the empty stage") {
    ClinicalRecordSet set;
    set.patients.push_back({"A", Date(1960, 1, 1), Gender::male, "", "", ""});
    set.diagnoses.push_back({"A", Date(2014, 1, 1), IcdVersion::icd10, "E119"});
    set.finalize();
    CohortSpec spec;
    CHECK_THROWS_WITH_AS(static_cast<void>(build_cohort(set, spec)),
                         doctest::Contains("fatty-liver"), Error);

    ClinicalRecordSet no_lc;
    no_lc.patients.push_back({"A", Date(1960, 1, 1), Gender::male, "", "", ""});
    no_lc.diagnoses.push_back({"A", Date(2014, 1, 1), IcdVersion::icd10, "K760"});
    no_lc.finalize();
    CHECK_THROWS_WITH_AS(static_cast<void>(build_cohort(no_lc, spec)),
                         doctest::Contains("LC-case"), Error);
}

TEST_CASE("complete_case_filter requires every panel series in the window") {
    ClinicalRecordSet set;
    set.patients.push_back({"A", Date(1960, 1, 1), Gender::male, "", "", ""});
    const Date pp(2015, 6, 10);
    for (const auto& loinc : default_loinc_panel()) {
        set.labs.push_back({"A", Date(2015, 1, 1), loinc, 1.0});
    }
    set.vitals.push_back({"A", Date(2015, 1, 1), VitalKind::sbp, 120.0});
    set.vitals.push_back({"A", Date(2015, 1, 1), VitalKind::dbp, 80.0});
    set.vitals.push_back({"A", Date(2015, 1, 1), VitalKind::bmi, 30.0});
    set.finalize();

    CohortAssignment member;
    member.patient_id = "A";
    member.prediction_point = pp;

    CHECK(complete_case_filter(set, {member}).size() == 1);

    // missing one platelet series -> dropped
    ClinicalRecordSet missing = set;
    missing.labs.erase(std::remove_if(missing.labs.begin(), missing.labs.end(),
                                      [](const LabResult& l) { return l.loinc == "26515-7"; }),
                       missing.labs.end());
    missing.finalize();
    CHECK(complete_case_filter(missing, {member}).empty());

    // the only ALT dated after the prediction point -> dropped
    ClinicalRecordSet late = set;
    for (auto& lab : late.labs) {
        if (lab.loinc == "1742-6") lab.date = Date(2015, 6, 11);
    }
    late.finalize();
    CHECK(complete_case_filter(late, {member}).empty());
}

TEST_CASE("cohort construction is deterministic and input-order independent") {
    auto set = fixture();
    CohortSpec spec;
    auto first = build_cohort(set, spec, {}, {});

    ClinicalRecordSet shuffled = set;
    std::reverse(shuffled.encounters.begin(), shuffled.encounters.end());
    std::reverse(shuffled.diagnoses.begin(), shuffled.diagnoses.end());
    std::reverse(shuffled.patients.begin(), shuffled.patients.end());
    shuffled.finalize();
    auto second = build_cohort(shuffled, spec, {}, {});

    REQUIRE(first.members.size() == second.members.size());
    for (std::size_t i = 0; i < first.members.size(); ++i) {
        CHECK(first.members[i].patient_id == second.members[i].patient_id);
        CHECK(first.members[i].prediction_point == second.members[i].prediction_point);
        CHECK(first.members[i].anchor_case_id == second.members[i].anchor_case_id);
    }
}
