// cirrhosis-horizon: batch CLI over the pipeline stages.
//
//   generate   synthesize a record set calibrated to the published tables
//   cohort     build the matched case/control cohort for one window
//   features   aggregate observation windows into the feature matrix
//   train      fit the boosted-tree model on the 70% training split
//   eval       ROC/AUC vs FIB-4, operating points, characteristics table
//   replicate  generate + run all three windows and print the comparison
//   score      FIB-4/FIB-5 over a per-patient serum panel CSV
//
// Exit codes: 0 ok, 2 config/input error, 3 missing stage dependency, 4 I/O.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ch/pipeline.hpp"

namespace {

std::optional<std::uint64_t> env_seed_override() {
    const char* raw = std::getenv("CH_SEED");
    if (raw == nullptr || *raw == '\0') return std::nullopt;
    try {
        return std::stoull(raw);
    } catch (const std::exception&) {
        ch::throw_error(ch::ErrorKind::config, "CH_SEED must be an unsigned integer");
    }
}

void apply_data_dir(ch::RunConfig& config, const std::string& dir) {
    config.records.patients = dir + "/patients.csv";
    config.records.encounters = dir + "/encounters.csv";
    config.records.diagnoses = dir + "/diagnoses.csv";
    config.records.labs = dir + "/labs.csv";
    config.records.vitals = dir + "/vitals.csv";
}

int exit_code_for(const ch::Error& e) {
    switch (e.kind()) {
        case ch::ErrorKind::config:
        case ch::ErrorKind::data: return 2;
        case ch::ErrorKind::dependency: return 3;
        case ch::ErrorKind::io: return 4;
        default: return 1;
    }
}

struct CommonFlags {
    std::string config_path;
    std::string data_dir;
    std::string out_dir;
    std::string ccs_map, charlson_map, rucc;
    int window = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool lenient = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "run configuration JSON");
    cmd->add_option("--data", flags.data_dir, "directory holding the five record-set CSVs");
    cmd->add_option("--out", flags.out_dir, "output directory");
    cmd->add_option("--ccs-map", flags.ccs_map, "CCS map CSV");
    cmd->add_option("--charlson-map", flags.charlson_map, "Charlson map CSV");
    cmd->add_option("--rucc", flags.rucc, "RUCC table CSV");
    cmd->add_option("--window", flags.window, "prediction window in years (1, 2 or 3)");
    cmd->add_flag("--lenient", flags.lenient, "report and skip bad input rows (default: fail fast)");
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&flags](const std::uint64_t& s) {
            flags.seed = s;
            flags.seed_set = true;
        },
        "seed for cohort sampling, training and splitting");
}

ch::RunConfig resolve_config(const CommonFlags& flags) {
    ch::RunConfig config;
    if (!flags.config_path.empty()) {
        config = ch::run_config_from_json(
            ch::detail::read_json(flags.config_path, ch::ErrorKind::config));
    }
    if (!flags.data_dir.empty()) apply_data_dir(config, flags.data_dir);
    if (!flags.out_dir.empty()) config.out_dir = flags.out_dir;
    if (!flags.ccs_map.empty()) config.ccs_map_path = flags.ccs_map;
    if (!flags.charlson_map.empty()) config.charlson_map_path = flags.charlson_map;
    if (!flags.rucc.empty()) config.rucc_path = flags.rucc;
    if (flags.window != 0) config.cohort.window_years = flags.window;
    if (flags.lenient) config.lenient = true;
    if (flags.seed_set) {
        config.cohort.rng_seed = flags.seed;
        config.gbdt.rng_seed = flags.seed;
        config.split_seed = flags.seed;
    }
    if (auto env = env_seed_override()) {
        config.cohort.rng_seed = *env;
        config.gbdt.rng_seed = *env;
        config.split_seed = *env;
    }
    return config;
}

int run_score(const std::string& method, const std::string& input, const std::string& output) {
    ch::csv::Reader reader(input);
    auto header = reader.next();
    if (!header) ch::throw_error(ch::ErrorKind::data, input + ": empty file");
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header->fields.size(); ++i) {
            if (header->fields[i] == name) return i;
        }
        return std::nullopt;
    };
    auto require = [&](const std::string& name) {
        auto c = column(name);
        if (!c) ch::throw_error(ch::ErrorKind::data, input + ": missing column '" + name + "'");
        return *c;
    };
    const std::size_t id_col = require("patient_id");
    const std::size_t ast_col = require("ast_u_per_l");
    const std::size_t alt_col = require("alt_u_per_l");
    const std::size_t plt_col = require("platelets_1e9_per_l");
    std::optional<std::size_t> age_col, alb_col, alp_col;
    if (method == "fib4") {
        age_col = require("age_years");
    } else {
        alb_col = require("albumin_g_per_dl");
        alp_col = require("alp_u_per_l");
    }

    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!output.empty()) {
        file.open(output);
        if (!file) ch::throw_error(ch::ErrorKind::io, "cannot write " + output);
        out = &file;
    }
    ch::csv::write_row(*out, {"patient_id", "score", "classification"});
    while (auto row = reader.next()) {
        const std::string where = input + ":" + std::to_string(row->line);
        auto cell = [&](std::size_t c) { return ch::parse_double(row->fields.at(c), where); };
        ch::SerumPanel panel;
        panel.ast_u_per_l = cell(ast_col);
        panel.alt_u_per_l = cell(alt_col);
        panel.platelets_1e9_per_l = cell(plt_col);
        double score;
        if (method == "fib4") {
            panel.age_years = cell(*age_col);
            score = ch::fib4(panel);
        } else {
            panel.albumin_g_per_dl = cell(*alb_col);
            panel.alp_u_per_l = cell(*alp_col);
            score = ch::fib5(panel);
        }
        const double cutoff = method == "fib4" ? ch::kFib4LowRiskCutoff : ch::kFib5LowRiskCutoff;
        const auto cls = ch::classify_cutoff(score, cutoff, ch::CutoffDirection::lt_is_low_risk);
        ch::csv::write_row(*out, {row->fields.at(id_col), ch::format_double(score),
                                  ch::to_string(cls)});
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Liver-cirrhosis risk pipeline: cohorts, features, boosted trees, FIB-4/5"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic record set");
    int gen_window = 1;
    std::uint64_t gen_seed = 7;
    std::string gen_out = "out/data";
    std::string gen_config_path, gen_dump_path;
    std::size_t gen_cases = 0, gen_controls = 0;
    gen->add_option("--window", gen_window, "calibration table to use (1, 2 or 3)");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--config", gen_config_path, "generator configuration JSON");
    gen->add_option("--cases", gen_cases, "override case count");
    gen->add_option("--controls", gen_controls, "override control count");
    gen->add_option("--dump-config", gen_dump_path,
                    "write the default configuration JSON to this path and exit");

    // pipeline stages
    CommonFlags cohort_flags, features_flags, train_flags, eval_flags;
    auto* cohort_cmd = app.add_subcommand("cohort", "build the matched cohort");
    add_common(cohort_cmd, cohort_flags);
    int controls_per_case = 0, tolerance = -1;
    cohort_cmd->add_option("--controls-per-case", controls_per_case, "controls sampled per case");
    cohort_cmd->add_option("--tolerance", tolerance, "matching tolerance in days");

    auto* features_cmd = app.add_subcommand("features", "aggregate the feature matrix");
    add_common(features_cmd, features_flags);
    bool no_hierarchy = false;
    features_cmd->add_flag("--no-charlson-hierarchy", no_hierarchy,
                           "disable Charlson category hierarchy suppression");

    auto* train_cmd = app.add_subcommand("train", "train the boosted-tree model");
    add_common(train_cmd, train_flags);
    int threads = 1;
    train_cmd->add_option("--threads", threads, "split-scan worker threads");
    int rounds = 0, max_depth = 0, early_stopping = -1;
    double eta = 0.0, lambda = -1.0, gamma = -1.0, min_child_weight = -1.0;
    double subsample = 0.0, colsample = 0.0, train_test_fraction = 0.0;
    bool train_no_stratify = false;
    train_cmd->add_option("--rounds", rounds, "boosting rounds");
    train_cmd->add_option("--eta", eta, "learning rate");
    train_cmd->add_option("--max-depth", max_depth, "maximum tree depth");
    train_cmd->add_option("--lambda", lambda, "L2 penalty on leaf weights");
    train_cmd->add_option("--gamma", gamma, "penalty per split");
    train_cmd->add_option("--min-child-weight", min_child_weight, "minimum hessian sum per child");
    train_cmd->add_option("--subsample", subsample, "row subsampling fraction");
    train_cmd->add_option("--colsample", colsample, "feature subsampling fraction");
    train_cmd->add_option("--early-stopping", early_stopping,
                          "stop after this many rounds without holdout improvement (0 = off; "
                          "the source study discloses no tuning protocol)");
    train_cmd->add_option("--test-fraction", train_test_fraction, "held-out fraction");
    train_cmd->add_flag("--no-stratify", train_no_stratify,
                        "split without label stratification");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate on the held-out test split");
    add_common(eval_cmd, eval_flags);
    std::string benchmark;
    eval_cmd->add_option("--benchmark", benchmark, "evaluate a benchmark only (fib4)");
    std::string labs_mode = "mean";
    eval_cmd->add_option("--labs", labs_mode,
                         "FIB-4 lab aggregation: mean (window average) or last (latest value)")
        ->check(CLI::IsMember({"mean", "last"}));
    double test_fraction = 0.0;
    eval_cmd->add_option("--test-fraction", test_fraction, "held-out fraction");
    bool no_stratify = false;
    eval_cmd->add_flag("--no-stratify", no_stratify, "split without label stratification");

    // replicate
    auto* rep = app.add_subcommand("replicate", "run the full three-window study");
    std::vector<int> rep_windows = {1, 2, 3};
    std::uint64_t rep_seed = 7;
    std::string rep_out = "out/replicate";
    std::string rep_ccs = "data/ccs_map.csv", rep_charlson = "data/charlson_map.csv",
                rep_rucc = "data/rucc.csv";
    std::string rep_gen_config;
    rep->add_option("--windows", rep_windows, "prediction windows to run")->delimiter(',');
    rep->add_option("--seed", rep_seed, "seed for every stage");
    rep->add_option("--out", rep_out, "output directory");
    rep->add_option("--ccs-map", rep_ccs, "CCS map CSV");
    rep->add_option("--charlson-map", rep_charlson, "Charlson map CSV");
    rep->add_option("--rucc", rep_rucc, "RUCC table CSV");
    rep->add_option("--gen-config", rep_gen_config, "generator configuration JSON");

    // score
    auto* score = app.add_subcommand("score", "FIB-4/FIB-5 over a serum panel CSV");
    std::string score_method, score_input, score_output;
    score->add_option("method", score_method, "fib4 or fib5")
        ->required()
        ->check(CLI::IsMember({"fib4", "fib5"}));
    score->add_option("--input", score_input, "input CSV")->required();
    score->add_option("--output", score_output, "output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            ch::GeneratorConfig cfg;
            if (!gen_config_path.empty()) {
                cfg = ch::generator_config_from_json(
                    ch::detail::read_json(gen_config_path, ch::ErrorKind::config));
            } else {
                cfg = ch::default_config(gen_window);
            }
            if (gen->count("--seed")) cfg.rng_seed = gen_seed;
            if (auto env = env_seed_override()) cfg.rng_seed = *env;
            if (gen_cases > 0) cfg.n_cases = gen_cases;
            if (gen_controls > 0) cfg.n_controls = gen_controls;
            if (!gen_dump_path.empty()) {
                ch::detail::write_json(ch::generator_config_to_json(cfg), gen_dump_path);
                std::cout << "wrote " << gen_dump_path << "\n";
                return 0;
            }
            auto result = ch::run_generate(cfg, gen_out);
            std::cout << "generated " << result.n_patients << " patients, "
                      << result.n_encounters << " encounters, " << result.n_diagnoses
                      << " diagnoses, " << result.n_labs << " labs, " << result.n_vitals
                      << " vitals -> " << gen_out << "\n";
        } else if (cohort_cmd->parsed()) {
            auto config = resolve_config(cohort_flags);
            if (controls_per_case > 0) config.cohort.controls_per_case = controls_per_case;
            if (tolerance >= 0) config.cohort.match_tolerance_days = tolerance;
            auto result = ch::run_cohort(config);
            const auto& r = result.cohort.report;
            std::cout << "fatty liver " << r.fatty_liver << " -> LC " << r.lc << " / non-LC "
                      << r.non_lc << " -> matched controls " << r.matched_controls
                      << " -> complete-case " << r.final_cases << " cases / " << r.final_controls
                      << " controls\n";
        } else if (features_cmd->parsed()) {
            auto config = resolve_config(features_flags);
            if (no_hierarchy) config.apply_charlson_hierarchy = false;
            auto result = ch::run_features(config);
            std::cout << "features: " << result.assembled.matrix.n_rows() << " rows x "
                      << result.assembled.matrix.n_cols() << " columns; window guard consumed "
                      << result.assembled.guard.events_consumed << " events, "
                      << result.assembled.guard.violations << " violations\n";
        } else if (train_cmd->parsed()) {
            auto config = resolve_config(train_flags);
            if (rounds > 0) config.gbdt.num_rounds = rounds;
            if (eta > 0.0) config.gbdt.learning_rate = eta;
            if (max_depth > 0) config.gbdt.max_depth = max_depth;
            if (lambda >= 0.0) config.gbdt.lambda = lambda;
            if (gamma >= 0.0) config.gbdt.gamma = gamma;
            if (min_child_weight >= 0.0) config.gbdt.min_child_weight = min_child_weight;
            if (subsample > 0.0) config.gbdt.subsample = subsample;
            if (colsample > 0.0) config.gbdt.colsample = colsample;
            if (early_stopping >= 0) config.gbdt.early_stopping_rounds = early_stopping;
            if (train_test_fraction > 0.0) config.test_fraction = train_test_fraction;
            if (train_no_stratify) config.stratify = false;
            auto result = ch::run_train(config, threads);
            std::cout << "trained " << result.trained.model.trees.size()
                      << " trees; final objective "
                      << result.trained.objectives.back() << " -> " << config.out_dir
                      << "/model.json\n";
        } else if (eval_cmd->parsed()) {
            auto config = resolve_config(eval_flags);
            if (test_fraction > 0.0) config.test_fraction = test_fraction;
            if (no_stratify) config.stratify = false;
            if (!benchmark.empty() && benchmark != "fib4") {
                ch::throw_error(ch::ErrorKind::config, "unknown benchmark '" + benchmark + "'");
            }
            auto result = ch::run_eval(config, !benchmark.empty(),
                                       labs_mode == "last" ? ch::Fib4LabsMode::last
                                                           : ch::Fib4LabsMode::mean);
            std::cout << "test n=" << result.n_test;
            if (result.auc_gbdt) std::cout << " auc_gbdt=" << *result.auc_gbdt;
            std::cout << " auc_fib4=" << result.auc_fib4 << " -> " << config.out_dir
                      << "/metrics.json\n";
        } else if (rep->parsed()) {
            ch::ReplicateOptions options;
            options.windows = rep_windows;
            options.seed = rep_seed;
            if (auto env = env_seed_override()) options.seed = *env;
            options.out_dir = rep_out;
            options.ccs_map_path = rep_ccs;
            options.charlson_map_path = rep_charlson;
            options.rucc_path = rep_rucc;
            if (!rep_gen_config.empty()) {
                options.generator = ch::generator_config_from_json(
                    ch::detail::read_json(rep_gen_config, ch::ErrorKind::config));
            }
            auto result = ch::run_replicate(options);
            std::printf("%-8s %-10s %-10s %-16s %-14s\n", "window", "auc_gbdt", "auc_fib4",
                        "pub_xgboost", "pub_fib4");
            for (const auto& w : result.windows) {
                const auto ref = ch::published_reference_aucs().at(w.window_years);
                std::printf("%-8d %-10.3f %-10.3f %-16.2f %-14.2f\n", w.window_years, w.auc_gbdt,
                            w.auc_fib4, ref.first, ref.second);
            }
            std::cout << "(synthetic AUCs are generator-dependent; published study values are shown for "
                         "reference)\n";
            if (!result.complete_case_monotonic) {
                std::cerr << "warning: complete-case case counts increased with window length\n";
            }
        } else if (score->parsed()) {
            return run_score(score_method, score_input, score_output);
        }
    } catch (const ch::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
