#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ch/records.hpp"

using namespace ch;

namespace {

RecordSetPaths write_fixture(const std::string& dir,
                             const std::string& labs_extra = "",
                             const std::string& diagnoses_extra = "") {
    std::filesystem::create_directories(dir);
    RecordSetPaths paths{dir + "/patients.csv", dir + "/encounters.csv", dir + "/diagnoses.csv",
                         dir + "/labs.csv", dir + "/vitals.csv"};
    {
        std::ofstream f(paths.patients);
        f << "patient_id,birth_date,gender,race,marital_status,county_fips\n"
          << "P1,1960-03-15,Female,White,Married,01073\n"
          << "P2,1955-07-02,Male,Black,Single,\n";
    }
    {
        std::ofstream f(paths.encounters);
        f << "encounter_id,patient_id,date\n"
          << "E1,P1,2015-06-10\n"
          << "E2,P2,2015-06-03\n"
          << "E3,P1,2014-01-20\n";
    }
    {
        std::ofstream f(paths.diagnoses);
        f << "patient_id,date,icd_version,code\n"
          << "P1,2015-06-10,10,K76.0\n"
          << "P2,2015-06-03,9,571.8\n"
          << diagnoses_extra;
    }
    {
        std::ofstream f(paths.labs);
        f << "patient_id,date,loinc,value\n"
          << "P1,2015-06-10,1742-6,36.5\n"
          << "P2,2015-06-03,26515-7,243.2\n"
          << labs_extra;
    }
    {
        std::ofstream f(paths.vitals);
        f << "patient_id,date,kind,value\n"
          << "P1,2015-06-10,BMI,33.1\n"
          << "P2,2015-06-03,SBP,131.8\n";
    }
    return paths;
}

} // namespace

TEST_CASE("normalize_icd strips dots, uppercases and trims") {
    CHECK(normalize_icd("K74.60", IcdVersion::icd10) == "K7460");
    CHECK(normalize_icd("571.2", IcdVersion::icd9) == "5712");
    CHECK(normalize_icd("  k70.30 ", IcdVersion::icd10) == "K7030");
    CHECK_THROWS_AS(normalize_icd("   ", IcdVersion::icd10), Error);
    CHECK_THROWS_AS(normalize_icd(".", IcdVersion::icd9), Error);
}

TEST_CASE("normalize_icd is idempotent") {
    for (const char* raw : {"K74.60", "571.2", " e11.9 ", "V43.4", "k7030"}) {
        const std::string once = normalize_icd(raw, IcdVersion::icd10);
        CHECK(normalize_icd(once, IcdVersion::icd10) == once);
    }
}

TEST_CASE("code_matches_pattern handles the trailing wildcard") {
    CHECK(code_matches_pattern("K7460", "K746x"));
    CHECK(code_matches_pattern("K746", "K746x"));
    CHECK(code_matches_pattern("K7469", "K746x"));
    CHECK_FALSE(code_matches_pattern("K7400", "K746x"));
    CHECK(code_matches_pattern("5712", "5712"));
    CHECK_FALSE(code_matches_pattern("57120", "5712"));
}

TEST_CASE("non-wildcard pattern match is exactly string equality") {
    const std::vector<std::string> codes = {"K7460", "5712", "E119", "K746", ""};
    for (const auto& a : codes) {
        for (const auto& b : codes) {
            if (b.empty() || b.back() == 'x' || b.back() == 'X') continue;
            CHECK(code_matches_pattern(a, b) == (a == b));
        }
    }
}

TEST_CASE("well-formed files load with counts matching rows") {
    auto paths = write_fixture("tmp_records_ok");
    auto result = load_record_set(paths);
    CHECK(result.records.patients.size() == 2);
    CHECK(result.records.encounters.size() == 3);
    CHECK(result.records.diagnoses.size() == 2);
    CHECK(result.records.labs.size() == 2);
    CHECK(result.records.vitals.size() == 2);
    CHECK(result.report.rejected.empty());

    // exposed sorted by (patient_id, date)
    CHECK(result.records.encounters[0].patient_id == "P1");
    CHECK(result.records.encounters[0].date == Date(2014, 1, 20));
    CHECK(result.records.encounters_for("P1").size() == 2);
    CHECK(result.records.diagnoses_for("P2")[0].code == "5718");
}

TEST_CASE("bad lab value is fail-fast by default, reported under lenient") {
    auto paths = write_fixture("tmp_records_badlab", "P1,2015-06-11,1742-6,abc\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_record_set(paths)),
                         doctest::Contains("labs.csv:4"), Error);
    LoadOptions lenient;
    lenient.lenient = true;
    auto result = load_record_set(paths, lenient);
    REQUIRE(result.report.rejected.size() == 1);
    CHECK(result.report.rejected[0].file == paths.labs);
    CHECK(result.report.rejected[0].line == 4);
    CHECK(result.records.labs.size() == 2);
}

TEST_CASE("dangling patient reference is a referential-integrity error") {
    auto paths = write_fixture("tmp_records_dangling", "", "P9,2015-01-01,10,K76.0\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_record_set(paths)), doctest::Contains("P9"),
                         Error);
}

TEST_CASE("schema violations and duplicates fail loudly") {
    auto paths = write_fixture("tmp_records_schema");
    {
        std::ofstream f(paths.patients);
        f << "patient_id,birth_date,gender\nP1,1960-01-01,Female\n";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_record_set(paths)),
                         doctest::Contains("bad header"), Error);

    paths = write_fixture("tmp_records_dup");
    {
        std::ofstream f(paths.patients, std::ios::app);
        f << "P1,1961-01-01,Male,White,Single,\n";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_record_set(paths)),
                         doctest::Contains("duplicate patient_id"), Error);

    paths = write_fixture("tmp_records_fips");
    {
        std::ofstream f(paths.patients, std::ios::app);
        f << "P3,1961-01-01,Male,White,Single,123\n";
    }
    CHECK_THROWS_WITH_AS(static_cast<void>(load_record_set(paths)),
                         doctest::Contains("county_fips"), Error);

    paths = write_fixture("tmp_records_loinc", "P1,2015-01-01,9999-9,1.0\n");
    CHECK_THROWS_WITH_AS(static_cast<void>(load_record_set(paths)),
                         doctest::Contains("not in the configured panel"), Error);
}

TEST_CASE("record set save/load round trip is equal") {
    auto paths = write_fixture("tmp_records_roundtrip");
    auto original = load_record_set(paths);

    RecordSetPaths copy{"tmp_records_roundtrip/p2.csv", "tmp_records_roundtrip/e2.csv",
                        "tmp_records_roundtrip/d2.csv", "tmp_records_roundtrip/l2.csv",
                        "tmp_records_roundtrip/v2.csv"};
    save_record_set(original.records, copy, "round trip fixture");
    auto reloaded = load_record_set(copy);
    CHECK(reloaded.records == original.records);
}
