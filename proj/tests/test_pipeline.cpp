#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ch/pipeline.hpp"

using namespace ch;

namespace {

const std::string kDataDir = CH_DATA_DIR;

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small_run_config(const std::string& data_dir, const std::string& out_dir) {
    RunConfig config;
    config.records.patients = data_dir + "/patients.csv";
    config.records.encounters = data_dir + "/encounters.csv";
    config.records.diagnoses = data_dir + "/diagnoses.csv";
    config.records.labs = data_dir + "/labs.csv";
    config.records.vitals = data_dir + "/vitals.csv";
    config.ccs_map_path = kDataDir + "/ccs_map.csv";
    config.charlson_map_path = kDataDir + "/charlson_map.csv";
    config.rucc_path = kDataDir + "/rucc.csv";
    config.cohort.rng_seed = 13;
    config.gbdt.rng_seed = 13;
    config.gbdt.num_rounds = 25;
    config.split_seed = 13;
    config.out_dir = out_dir;
    return config;
}

} // namespace

TEST_CASE("run config json round trips and hashes stably") {
    RunConfig config;
    config.cohort.window_years = 2;
    config.gbdt.num_rounds = 123;
    config.test_fraction = 0.25;
    auto j = run_config_to_json(config);
    auto back = run_config_from_json(j);
    CHECK(run_config_to_json(back) == j);
    CHECK(back.cohort.window_years == 2);
    CHECK(back.gbdt.num_rounds == 123);
    CHECK(back.cohort.lc_patterns.size() == 4);

    CHECK(config_hash(j) == config_hash(run_config_to_json(back)));
    config.cohort.rng_seed += 1;
    CHECK(config_hash(run_config_to_json(config)) != config_hash(j));
}

TEST_CASE("code pattern json normalizes on load") {
    auto patterns = code_patterns_from_json(
        nlohmann::json::parse(R"([{"icd_version":10,"pattern":"k74.6x"}])"));
    REQUIRE(patterns.size() == 1);
    CHECK(patterns[0].pattern == "K746X");
    CHECK(patterns[0].matches({"p", Date(2015, 1, 1), IcdVersion::icd10, "K7460"}));
    CHECK_THROWS_AS(code_patterns_from_json(
                        nlohmann::json::parse(R"([{"icd_version":8,"pattern":"x"}])")),
                    Error);
}

TEST_CASE("cohort csv round trips including anchor columns") {
    std::filesystem::create_directories("tmp_pipeline");
    std::vector<CohortAssignment> members(2);
    members[0].patient_id = "P1";
    members[0].label = CohortLabel::lc_case;
    members[0].index_date = Date(2016, 6, 10);
    members[0].prediction_point = Date(2015, 6, 10);
    members[0].window_years = 1;
    members[1].patient_id = "C1";
    members[1].label = CohortLabel::control;
    members[1].prediction_point = Date(2015, 6, 12);
    members[1].window_years = 1;
    members[1].anchor_case_id = "P1";
    members[1].anchor_prediction_point = Date(2015, 6, 10);

    save_cohort(members, "tmp_pipeline/cohort.csv", "fixture");
    auto loaded = load_cohort("tmp_pipeline/cohort.csv");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].label == CohortLabel::lc_case);
    CHECK(loaded[0].index_date == Date(2016, 6, 10));
    CHECK_FALSE(loaded[0].anchor_prediction_point.has_value());
    CHECK(loaded[1].anchor_case_id == "P1");
    CHECK(loaded[1].anchor_prediction_point == Date(2015, 6, 10));
}

TEST_CASE("stage chain is deterministic and eval modes agree on the gbdt auc") {
    auto gen = default_config(1);
    gen.n_cases = 50;
    gen.n_controls = 120;
    gen.rng_seed = 404;
    run_generate(gen, "tmp_pipeline/data");

    auto config = small_run_config("tmp_pipeline/data", "tmp_pipeline/run");
    run_cohort(config);
    run_features(config);
    run_train(config);
    auto mean_eval = run_eval(config);
    REQUIRE(mean_eval.auc_gbdt.has_value());

    // the persisted model carries the provenance triplet
    auto model = load_model("tmp_pipeline/run/model.json");
    CHECK(model.metadata.count("tool_version") == 1);
    CHECK(model.metadata.count("config_hash") == 1);
    CHECK(model.metadata.count("seed") == 1);

    // rerunning the train stage rewrites identical bytes
    const auto model_bytes = file_bytes("tmp_pipeline/run/model.json");
    run_train(config);
    CHECK(file_bytes("tmp_pipeline/run/model.json") == model_bytes);

    // FIB-4 from last-observed labs changes only the fib4 side
    auto last_eval = run_eval(config, false, Fib4LabsMode::last);
    CHECK(last_eval.auc_gbdt == mean_eval.auc_gbdt);
    CHECK(last_eval.n_test == mean_eval.n_test);

    // benchmark-only mode needs no model and reports no gbdt auc
    std::filesystem::remove("tmp_pipeline/run/model.json");
    auto bench = run_eval(config, true);
    CHECK_FALSE(bench.auc_gbdt.has_value());
    CHECK(bench.auc_fib4 == mean_eval.auc_fib4);

    // missing model is a dependency error in full mode
    CHECK_THROWS_AS(static_cast<void>(run_eval(config)), Error);
}

TEST_CASE("unknown replicate window is a config error") {
    ReplicateOptions options;
    options.windows = {4};
    CHECK_THROWS_AS(static_cast<void>(run_replicate(options)), Error);
    options.windows = {};
    CHECK_THROWS_AS(static_cast<void>(run_replicate(options)), Error);
}
