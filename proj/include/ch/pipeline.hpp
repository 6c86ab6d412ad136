#pragma once

// Pipeline stages behind the CLI: generate -> cohort -> features -> train ->
// eval, plus the end-to-end replicate driver. Stages persist flat files and
// are pure functions of (inputs, config); every output carries the
// (tool version, config hash, seed) provenance triplet.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ch/baselines.hpp"
#include "ch/cohort.hpp"
#include "ch/features.hpp"
#include "ch/gbdt.hpp"
#include "ch/records.hpp"
#include "ch/stats.hpp"
#include "ch/synth.hpp"
#include "ch/terminology.hpp"
#include "ch/version.hpp"

namespace ch {

struct RunConfig {
    RecordSetPaths records;
    std::string ccs_map_path = "data/ccs_map.csv";
    std::string charlson_map_path = "data/charlson_map.csv";
    std::string rucc_path = "data/rucc.csv";
    CohortSpec cohort;
    GbdtParams gbdt;
    double test_fraction = 0.3;
    std::uint64_t split_seed = 7;
    bool stratify = true;
    bool lenient = false;
    bool apply_charlson_hierarchy = true;
    std::string out_dir = "out";
};

inline nlohmann::json code_patterns_to_json(const std::vector<CodePattern>& patterns) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : patterns) {
        out.push_back({{"icd_version", p.icd_version == IcdVersion::icd9 ? 9 : 10},
                       {"pattern", p.pattern}});
    }
    return out;
}

inline std::vector<CodePattern> code_patterns_from_json(const nlohmann::json& j) {
    std::vector<CodePattern> out;
    for (const auto& pj : j) {
        CodePattern p;
        const int v = pj.at("icd_version").get<int>();
        if (v != 9 && v != 10) throw_error(ErrorKind::config, "icd_version must be 9 or 10");
        p.icd_version = v == 9 ? IcdVersion::icd9 : IcdVersion::icd10;
        p.pattern = normalize_icd(pj.at("pattern").get<std::string>(), p.icd_version);
        out.push_back(std::move(p));
    }
    return out;
}

inline nlohmann::json run_config_to_json(const RunConfig& c) {
    return nlohmann::json{
        {"paths",
         {{"patients", c.records.patients},
          {"encounters", c.records.encounters},
          {"diagnoses", c.records.diagnoses},
          {"labs", c.records.labs},
          {"vitals", c.records.vitals},
          {"ccs_map", c.ccs_map_path},
          {"charlson_map", c.charlson_map_path},
          {"rucc", c.rucc_path}}},
        {"cohort",
         {{"window_years", c.cohort.window_years},
          {"controls_per_case", c.cohort.controls_per_case},
          {"match_tolerance_days", c.cohort.match_tolerance_days},
          {"rng_seed", c.cohort.rng_seed},
          {"fatty_liver_patterns", code_patterns_to_json(c.cohort.fatty_liver_patterns)},
          {"lc_patterns", code_patterns_to_json(c.cohort.lc_patterns)}}},
        {"gbdt", params_to_json(c.gbdt)},
        {"split",
         {{"test_fraction", c.test_fraction}, {"seed", c.split_seed}, {"stratify", c.stratify}}},
        {"lenient", c.lenient},
        {"apply_charlson_hierarchy", c.apply_charlson_hierarchy},
        {"out_dir", c.out_dir}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        if (p.contains("patients")) c.records.patients = p.at("patients").get<std::string>();
        if (p.contains("encounters")) c.records.encounters = p.at("encounters").get<std::string>();
        if (p.contains("diagnoses")) c.records.diagnoses = p.at("diagnoses").get<std::string>();
        if (p.contains("labs")) c.records.labs = p.at("labs").get<std::string>();
        if (p.contains("vitals")) c.records.vitals = p.at("vitals").get<std::string>();
        if (p.contains("ccs_map")) c.ccs_map_path = p.at("ccs_map").get<std::string>();
        if (p.contains("charlson_map")) {
            c.charlson_map_path = p.at("charlson_map").get<std::string>();
        }
        if (p.contains("rucc")) c.rucc_path = p.at("rucc").get<std::string>();
    }
    if (j.contains("cohort")) {
        const auto& k = j.at("cohort");
        if (k.contains("window_years")) c.cohort.window_years = k.at("window_years").get<int>();
        if (k.contains("controls_per_case")) {
            c.cohort.controls_per_case = k.at("controls_per_case").get<int>();
        }
        if (k.contains("match_tolerance_days")) {
            c.cohort.match_tolerance_days = k.at("match_tolerance_days").get<int>();
        }
        if (k.contains("rng_seed")) c.cohort.rng_seed = k.at("rng_seed").get<std::uint64_t>();
        if (k.contains("fatty_liver_patterns")) {
            c.cohort.fatty_liver_patterns = code_patterns_from_json(k.at("fatty_liver_patterns"));
        }
        if (k.contains("lc_patterns")) {
            c.cohort.lc_patterns = code_patterns_from_json(k.at("lc_patterns"));
        }
    }
    if (j.contains("gbdt")) c.gbdt = params_from_json(j.at("gbdt"));
    if (j.contains("split")) {
        const auto& s = j.at("split");
        if (s.contains("test_fraction")) c.test_fraction = s.at("test_fraction").get<double>();
        if (s.contains("seed")) c.split_seed = s.at("seed").get<std::uint64_t>();
        if (s.contains("stratify")) c.stratify = s.at("stratify").get<bool>();
    }
    if (j.contains("lenient")) c.lenient = j.at("lenient").get<bool>();
    if (j.contains("apply_charlson_hierarchy")) {
        c.apply_charlson_hierarchy = j.at("apply_charlson_hierarchy").get<bool>();
    }
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    return c;
}

// --------------------------------------------------------------------------
// Provenance

inline std::string config_hash(const nlohmann::json& config_json) {
    const std::uint64_t h = fnv1a64(config_json.dump());
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Provenance {
    std::string tool_version = kToolVersion;
    std::string config_hash;
    std::uint64_t seed = 0;

    std::string comment() const {
        return std::string(kToolName) + " " + tool_version + " config=" + config_hash +
               " seed=" + std::to_string(seed);
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"tool_version", tool_version},
                              {"config_hash", config_hash},
                              {"seed", seed}};
    }
};

namespace detail {

inline void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw_error(ErrorKind::io, "cannot create output directory " + dir);
}

inline void require_file(const std::string& path, const std::string& producer = "") {
    if (!std::filesystem::exists(path)) {
        std::string message = "missing " + path;
        if (!producer.empty()) message += " (run '" + producer + "' first)";
        throw_error(ErrorKind::dependency, message);
    }
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw_error(ErrorKind::io, "cannot write " + path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::string& path, ErrorKind missing_kind) {
    std::ifstream in(path);
    if (!in) throw_error(missing_kind, "cannot open " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw_error(ErrorKind::config, path + ": " + e.what());
    }
}

} // namespace detail

// --------------------------------------------------------------------------
// generate

struct GenerateResult {
    std::size_t n_patients = 0;
    std::size_t n_encounters = 0;
    std::size_t n_diagnoses = 0;
    std::size_t n_labs = 0;
    std::size_t n_vitals = 0;
};

inline GenerateResult run_generate(const GeneratorConfig& cfg, const std::string& out_dir) {
    detail::ensure_out_dir(out_dir);
    Provenance prov;
    prov.config_hash = config_hash(generator_config_to_json(cfg));
    prov.seed = cfg.rng_seed;

    auto data = generate(cfg);
    RecordSetPaths paths;
    paths.patients = out_dir + "/patients.csv";
    paths.encounters = out_dir + "/encounters.csv";
    paths.diagnoses = out_dir + "/diagnoses.csv";
    paths.labs = out_dir + "/labs.csv";
    paths.vitals = out_dir + "/vitals.csv";
    save_record_set(data.records, paths, prov.comment());
    save_truth(data.truth, out_dir + "/truth.csv", prov.comment());

    GenerateResult result{data.records.patients.size(), data.records.encounters.size(),
                          data.records.diagnoses.size(), data.records.labs.size(),
                          data.records.vitals.size()};
    detail::write_json(nlohmann::json{{"provenance", prov.to_json()},
                                      {"config", generator_config_to_json(cfg)},
                                      {"counts",
                                       {{"patients", result.n_patients},
                                        {"encounters", result.n_encounters},
                                        {"diagnoses", result.n_diagnoses},
                                        {"labs", result.n_labs},
                                        {"vitals", result.n_vitals}}}},
                       out_dir + "/manifest.json");
    return result;
}

// --------------------------------------------------------------------------
// cohort

inline void save_cohort(const std::vector<CohortAssignment>& members, const std::string& path,
                        const std::string& provenance_comment) {
    std::ofstream out(path);
    if (!out) throw_error(ErrorKind::io, "cannot write " + path);
    if (!provenance_comment.empty()) out << "# " << provenance_comment << '\n';
    csv::write_row(out, {"patient_id", "label", "index_date", "prediction_point", "window_years",
                         "anchor_case", "anchor_prediction_point"});
    for (const auto& m : members) {
        csv::write_row(out, {m.patient_id, to_string(m.label),
                             m.index_date ? m.index_date->to_string() : "",
                             m.prediction_point.to_string(), std::to_string(m.window_years),
                             m.anchor_case_id,
                             m.anchor_prediction_point ? m.anchor_prediction_point->to_string()
                                                       : ""});
    }
}

inline std::vector<CohortAssignment> load_cohort(const std::string& path) {
    csv::Reader reader(path);
    auto header = reader.next();
    const std::vector<std::string> expected = {
        "patient_id",   "label",       "index_date",              "prediction_point",
        "window_years", "anchor_case", "anchor_prediction_point"};
    if (!header || header->fields != expected) {
        throw_error(ErrorKind::data, path + ": bad cohort header");
    }
    std::vector<CohortAssignment> members;
    while (auto row = reader.next()) {
        const std::string where = path + ":" + std::to_string(row->line);
        if (row->fields.size() != expected.size()) {
            throw_error(ErrorKind::data, where + ": wrong column count");
        }
        CohortAssignment m;
        m.patient_id = row->fields[0];
        if (row->fields[1] == "case") {
            m.label = CohortLabel::lc_case;
        } else if (row->fields[1] == "control") {
            m.label = CohortLabel::control;
        } else {
            throw_error(ErrorKind::data, where + ": label must be case or control");
        }
        if (!row->fields[2].empty()) m.index_date = Date::parse(row->fields[2]);
        m.prediction_point = Date::parse(row->fields[3]);
        m.window_years = static_cast<int>(parse_int(row->fields[4], where));
        m.anchor_case_id = row->fields[5];
        if (!row->fields[6].empty()) {
            m.anchor_prediction_point = Date::parse(row->fields[6]);
        }
        members.push_back(std::move(m));
    }
    return members;
}

struct CohortStageResult {
    CohortResult cohort;
};

inline CohortStageResult run_cohort(const RunConfig& config) {
    detail::require_file(config.records.patients, "generate");
    detail::ensure_out_dir(config.out_dir);
    Provenance prov;
    prov.config_hash = config_hash(run_config_to_json(config));
    prov.seed = config.cohort.rng_seed;

    auto loaded = load_record_set(config.records, LoadOptions{config.lenient});
    auto cohort = build_cohort(loaded.records, config.cohort);
    save_cohort(cohort.members, config.out_dir + "/cohort.csv", prov.comment());

    const FilteringReport& r = cohort.report;
    detail::write_json(
        nlohmann::json{{"provenance", prov.to_json()},
                       {"stages",
                        {{"fatty_liver", r.fatty_liver},
                         {"lc", r.lc},
                         {"non_lc", r.non_lc},
                         {"matched_controls", r.matched_controls},
                         {"pre_dedup_sampled", r.pre_dedup_sampled},
                         {"max_pre_dedup_per_case", r.max_pre_dedup_per_case},
                         {"final_cases", r.final_cases},
                         {"final_controls", r.final_controls}}},
                       {"window_years", r.window_years},
                       {"rejected_rows", loaded.report.rejected.size()}},
        config.out_dir + "/cohort_report.json");
    return {std::move(cohort)};
}

// --------------------------------------------------------------------------
// features

inline void save_schema(const FeatureSchema& schema, const std::string& path,
                        const Provenance& prov) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : schema.groups) {
        groups.push_back({{"name", g.name}, {"begin", g.begin}, {"end", g.end},
                          {"levels", g.levels}});
    }
    detail::write_json(nlohmann::json{{"provenance", prov.to_json()},
                                      {"columns", schema.columns},
                                      {"groups", groups},
                                      {"ccs_ids", schema.ccs_ids},
                                      {"ccs_begin", schema.ccs_begin},
                                      {"loincs", schema.loincs}},
                       path);
}

inline FeatureSchema load_schema(const std::string& path) {
    auto j = detail::read_json(path, ErrorKind::dependency);
    FeatureSchema s;
    s.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& gj : j.at("groups")) {
        FeatureSchema::OneHotGroup g;
        g.name = gj.at("name").get<std::string>();
        g.begin = gj.at("begin").get<std::size_t>();
        g.end = gj.at("end").get<std::size_t>();
        g.levels = gj.at("levels").get<std::vector<std::string>>();
        s.groups.push_back(std::move(g));
    }
    s.ccs_ids = j.at("ccs_ids").get<std::vector<int>>();
    s.ccs_begin = j.at("ccs_begin").get<std::size_t>();
    s.loincs = j.at("loincs").get<std::vector<std::string>>();
    return s;
}

struct FeatureStageResult {
    AssembleResult assembled;
};

inline FeatureStageResult run_features(const RunConfig& config) {
    detail::require_file(config.out_dir + "/cohort.csv", "cohort");
    detail::require_file(config.ccs_map_path);
    Provenance prov;
    prov.config_hash = config_hash(run_config_to_json(config));
    prov.seed = config.cohort.rng_seed;

    auto loaded = load_record_set(config.records, LoadOptions{config.lenient});
    auto members = load_cohort(config.out_dir + "/cohort.csv");
    auto ccs = CcsMap::load(config.ccs_map_path);
    auto charlson = CharlsonMap::load(config.charlson_map_path);
    auto rucc = RuccTable::load(config.rucc_path);

    AssembleOptions options;
    options.apply_charlson_hierarchy = config.apply_charlson_hierarchy;
    auto assembled = assemble_matrix(loaded.records, members, ccs, charlson, rucc, options);

    save_feature_matrix(assembled.matrix, config.out_dir + "/features.csv", prov.comment());
    save_schema(assembled.matrix.schema, config.out_dir + "/schema.json", prov);
    detail::write_json(
        nlohmann::json{{"provenance", prov.to_json()},
                       {"window_guard",
                        {{"events_consumed", assembled.guard.events_consumed},
                         {"violations", assembled.guard.violations}}},
                       {"members_without_encounters", assembled.members_without_encounters},
                       {"rows", assembled.matrix.n_rows()},
                       {"columns", assembled.matrix.n_cols()}},
        config.out_dir + "/features_report.json");
    return {std::move(assembled)};
}

// --------------------------------------------------------------------------
// train

struct TrainStageResult {
    TrainResult trained;
};

inline TrainStageResult run_train(const RunConfig& config, int n_threads = 1) {
    detail::require_file(config.out_dir + "/features.csv", "features");
    detail::require_file(config.out_dir + "/schema.json", "features");
    Provenance prov;
    prov.config_hash = config_hash(run_config_to_json(config));
    prov.seed = config.gbdt.rng_seed;

    auto schema = load_schema(config.out_dir + "/schema.json");
    auto matrix = load_feature_matrix(config.out_dir + "/features.csv", schema);
    auto split = stratified_split(matrix.labels, config.test_fraction, config.split_seed,
                                  config.stratify);

    FeatureMatrix train_matrix;
    train_matrix.schema = matrix.schema;
    for (std::size_t idx : split.train) {
        train_matrix.patient_ids.push_back(matrix.patient_ids[idx]);
        train_matrix.labels.push_back(matrix.labels[idx]);
        for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
            train_matrix.values.push_back(matrix.at(idx, c));
            train_matrix.missing.push_back(matrix.is_missing(idx, c) ? 1 : 0);
        }
    }

    auto trained = train(train_matrix, config.gbdt, n_threads);
    trained.model.metadata["tool_version"] = prov.tool_version;
    trained.model.metadata["config_hash"] = prov.config_hash;
    trained.model.metadata["seed"] = std::to_string(prov.seed);
    save_model(trained.model, config.out_dir + "/model.json");
    return {std::move(trained)};
}

// --------------------------------------------------------------------------
// eval

struct EvalStageResult {
    std::optional<double> auc_gbdt;
    double auc_fib4 = 0.0;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

// FIB-4 inputs: window-average labs (as in the feature matrix) or the latest
// observed value at or before the prediction point.
enum class Fib4LabsMode { mean, last };

namespace detail {

inline std::vector<double> fib4_last_observed(const RunConfig& config,
                                              const FeatureMatrix& test_matrix) {
    auto loaded = load_record_set(config.records, LoadOptions{config.lenient});
    auto members = load_cohort(config.out_dir + "/cohort.csv");
    std::map<std::string, const CohortAssignment*> by_id;
    for (const auto& m : members) by_id[m.patient_id] = &m;

    const std::size_t age_col = test_matrix.schema.column_index("age_at_prediction");
    std::vector<double> scores;
    scores.reserve(test_matrix.n_rows());
    for (std::size_t r = 0; r < test_matrix.n_rows(); ++r) {
        auto it = by_id.find(test_matrix.patient_ids[r]);
        if (it == by_id.end()) {
            throw_error(ErrorKind::data, "cohort.csv lacks member " + test_matrix.patient_ids[r]);
        }
        const Date& pp = it->second->prediction_point;
        auto last_value = [&](const std::string& loinc) -> double {
            std::optional<std::pair<Date, double>> last;
            for (const auto& lab : loaded.records.labs_for(it->first)) {
                if (lab.loinc != loinc || lab.date > pp) continue;
                if (!last || lab.date >= last->first) last = {lab.date, lab.value};
            }
            if (!last) {
                throw_error(ErrorKind::data, "no observed '" + loinc + "' for " + it->first);
            }
            return last->second;
        };
        SerumPanel panel;
        panel.age_years = test_matrix.at(r, age_col);
        panel.alt_u_per_l = last_value("1742-6");
        panel.ast_u_per_l = last_value("1920-8");
        panel.platelets_1e9_per_l = last_value("26515-7");
        scores.push_back(fib4(panel));
    }
    return scores;
}

} // namespace detail

inline EvalStageResult run_eval(const RunConfig& config, bool benchmark_only = false,
                                Fib4LabsMode fib4_labs = Fib4LabsMode::mean) {
    detail::require_file(config.out_dir + "/features.csv", "features");
    detail::require_file(config.out_dir + "/schema.json", "features");
    if (!benchmark_only) detail::require_file(config.out_dir + "/model.json", "train");
    Provenance prov;
    prov.config_hash = config_hash(run_config_to_json(config));
    prov.seed = config.split_seed;

    auto schema = load_schema(config.out_dir + "/schema.json");
    auto matrix = load_feature_matrix(config.out_dir + "/features.csv", schema);
    auto split = stratified_split(matrix.labels, config.test_fraction, config.split_seed,
                                  config.stratify);

    FeatureMatrix test_matrix;
    test_matrix.schema = matrix.schema;
    for (std::size_t idx : split.test) {
        test_matrix.patient_ids.push_back(matrix.patient_ids[idx]);
        test_matrix.labels.push_back(matrix.labels[idx]);
        for (std::size_t c = 0; c < matrix.n_cols(); ++c) {
            test_matrix.values.push_back(matrix.at(idx, c));
            test_matrix.missing.push_back(matrix.is_missing(idx, c) ? 1 : 0);
        }
    }

    EvalStageResult result;
    result.n_train = split.train.size();
    result.n_test = split.test.size();

    std::ofstream roc_csv(config.out_dir + "/roc.csv");
    if (!roc_csv) throw_error(ErrorKind::io, "cannot write " + config.out_dir + "/roc.csv");
    roc_csv << "# " << prov.comment() << '\n';
    csv::write_row(roc_csv, {"method", "fpr", "tpr"});

    nlohmann::json auc_json;
    std::optional<RocResult> roc_gbdt;
    if (!benchmark_only) {
        auto model = load_model(config.out_dir + "/model.json");
        auto probs = predict(model, test_matrix);
        roc_gbdt = roc_auc(probs, test_matrix.labels);
        result.auc_gbdt = roc_gbdt->auc;
        auc_json["gbdt"] = roc_gbdt->auc;
        for (const auto& [fpr, tpr] : roc_gbdt->points) {
            csv::write_row(roc_csv, {"gbdt", format_double(fpr), format_double(tpr)});
        }
    }

    auto fib4_scores = fib4_labs == Fib4LabsMode::mean
                           ? fib4_for_cohort(test_matrix)
                           : detail::fib4_last_observed(config, test_matrix);
    auto roc_fib4 = roc_auc(fib4_scores, test_matrix.labels);
    result.auc_fib4 = roc_fib4.auc;
    auc_json["fib4"] = roc_fib4.auc;
    for (const auto& [fpr, tpr] : roc_fib4.points) {
        csv::write_row(roc_csv, {"fib4", format_double(fpr), format_double(tpr)});
    }

    auto fib4_op = sens_spec_at(fib4_scores, test_matrix.labels, kFib4LowRiskCutoff,
                                /*high_is_positive=*/true);
    auto fib5_scores = fib5_for_cohort(test_matrix);
    auto fib5_op = sens_spec_at(fib5_scores, test_matrix.labels, kFib5LowRiskCutoff,
                                /*high_is_positive=*/true);

    auto table = characteristics_table(matrix);
    save_characteristics_table(table, config.out_dir + "/table_characteristics.csv",
                               prov.comment());

    detail::write_json(
        nlohmann::json{
            {"provenance", prov.to_json()},
            {"auc", auc_json},
            {"counts",
             {{"train", result.n_train}, {"test", result.n_test}, {"rows", matrix.n_rows()}}},
            {"operating_points",
             {{"fib4_at_cutoff",
               {{"cutoff", kFib4LowRiskCutoff},
                {"sensitivity", fib4_op.sensitivity},
                {"specificity", fib4_op.specificity}}},
              {"fib5_at_cutoff",
               {{"cutoff", kFib5LowRiskCutoff},
                {"sensitivity", fib5_op.sensitivity},
                {"specificity", fib5_op.specificity}}}}},
            {"reference_operating_points",
             {{"note", "published values from a different cohort; shown for reference only"},
              {"fib4_at_2.02",
               {{"sensitivity", kFib4ReferenceSensitivity},
                {"specificity", kFib4ReferenceSpecificity}}},
              {"fib5_at_-7.11",
               {{"sensitivity", kFib5ReferenceSensitivity},
                {"specificity", kFib5ReferenceSpecificity}}}}}},
        config.out_dir + "/metrics.json");

    // A ready-to-render plot spec over roc.csv; no plotting engine bundled.
    detail::write_json(
        nlohmann::json{
            {"$schema", "https://vega.github.io/schema/vega-lite/v5.json"},
            {"description", "ROC curves by method"},
            {"usermeta", {{"provenance", prov.to_json()}}},
            {"data", {{"url", "roc.csv"}}},
            {"mark", "line"},
            {"encoding",
             {{"x", {{"field", "fpr"}, {"type", "quantitative"}}},
              {"y", {{"field", "tpr"}, {"type", "quantitative"}}},
              {"color", {{"field", "method"}, {"type", "nominal"}}}}}},
        config.out_dir + "/roc_plot.vg.json");
    return result;
}

// --------------------------------------------------------------------------
// replicate

struct ReplicateOptions {
    std::vector<int> windows = {1, 2, 3};
    std::uint64_t seed = 7;
    std::string out_dir = "out/replicate";
    std::string ccs_map_path = "data/ccs_map.csv";
    std::string charlson_map_path = "data/charlson_map.csv";
    std::string rucc_path = "data/rucc.csv";
    std::optional<GeneratorConfig> generator; // defaults to default_config(1)
};

struct ReplicateWindowResult {
    int window_years = 0;
    double auc_gbdt = 0.0;
    double auc_fib4 = 0.0;
    std::size_t final_cases = 0;
    std::size_t final_controls = 0;
    std::size_t guard_events = 0;
    std::size_t guard_violations = 0;
};

struct ReplicateResult {
    std::vector<ReplicateWindowResult> windows;
    bool complete_case_monotonic = true;
    std::size_t total_guard_violations = 0;
};

// AUCs from the original study, shown next to the synthetic results.
inline const std::map<int, std::pair<double, double>>& published_reference_aucs() {
    static const std::map<int, std::pair<double, double>> refs = {
        {1, {0.81, 0.71}}, {2, {0.73, 0.63}}, {3, {0.69, 0.57}}};
    return refs;
}

inline ReplicateResult run_replicate(const ReplicateOptions& options) {
    if (options.windows.empty()) {
        throw_error(ErrorKind::config, "replicate needs at least one window");
    }
    for (int w : options.windows) {
        if (w < 1 || w > 3) throw_error(ErrorKind::config, "windows must be 1, 2 or 3");
    }
    GeneratorConfig gen_cfg = options.generator ? *options.generator : default_config(1);
    gen_cfg.rng_seed = options.seed;

    const std::string data_dir = options.out_dir + "/data";
    run_generate(gen_cfg, data_dir);

    ReplicateResult result;
    nlohmann::json window_json = nlohmann::json::array();
    std::optional<std::size_t> previous_cases;
    for (int w : options.windows) {
        RunConfig config;
        config.records.patients = data_dir + "/patients.csv";
        config.records.encounters = data_dir + "/encounters.csv";
        config.records.diagnoses = data_dir + "/diagnoses.csv";
        config.records.labs = data_dir + "/labs.csv";
        config.records.vitals = data_dir + "/vitals.csv";
        config.ccs_map_path = options.ccs_map_path;
        config.charlson_map_path = options.charlson_map_path;
        config.rucc_path = options.rucc_path;
        config.cohort.window_years = w;
        config.cohort.rng_seed = options.seed;
        config.gbdt.rng_seed = options.seed;
        config.split_seed = options.seed;
        config.out_dir = options.out_dir + "/w" + std::to_string(w);

        auto cohort_result = run_cohort(config);
        auto features_result = run_features(config);
        run_train(config);
        auto eval_result = run_eval(config);

        ReplicateWindowResult wr;
        wr.window_years = w;
        wr.auc_gbdt = eval_result.auc_gbdt.value_or(0.0);
        wr.auc_fib4 = eval_result.auc_fib4;
        wr.final_cases = cohort_result.cohort.report.final_cases;
        wr.final_controls = cohort_result.cohort.report.final_controls;
        wr.guard_events = features_result.assembled.guard.events_consumed;
        wr.guard_violations = features_result.assembled.guard.violations;
        result.total_guard_violations += wr.guard_violations;
        if (previous_cases && wr.final_cases > *previous_cases) {
            result.complete_case_monotonic = false;
        }
        previous_cases = wr.final_cases;

        const auto ref = published_reference_aucs().at(w);
        window_json.push_back({{"window_years", w},
                               {"auc_gbdt", wr.auc_gbdt},
                               {"auc_fib4", wr.auc_fib4},
                               {"published_auc_xgboost", ref.first},
                               {"published_auc_fib4", ref.second},
                               {"final_cases", wr.final_cases},
                               {"final_controls", wr.final_controls},
                               {"window_guard",
                                {{"events_consumed", wr.guard_events},
                                 {"violations", wr.guard_violations}}}});
        result.windows.push_back(wr);
    }

    Provenance prov;
    prov.config_hash = config_hash(generator_config_to_json(gen_cfg));
    prov.seed = options.seed;
    detail::write_json(
        nlohmann::json{
            {"provenance", prov.to_json()},
            {"note", "synthetic AUCs are generator-dependent; published study values shown for reference"},
            {"windows", window_json},
            {"complete_case_monotonic", result.complete_case_monotonic},
            {"total_window_guard_violations", result.total_guard_violations}},
        options.out_dir + "/replicate_summary.json");
    return result;
}

} // namespace ch
