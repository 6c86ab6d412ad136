#pragma once

// Second-order (Newton) gradient-boosted regression trees with logistic loss.
// Exact greedy split finding over sorted distinct values, sparsity-aware
// default directions for missing values, L2 leaf regularization and an
// optional split penalty. Deterministic for a fixed seed regardless of the
// worker count: per-feature scan results are reduced in ascending feature
// order with ties broken by (lowest feature index, lowest threshold).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ch/error.hpp"
#include "ch/features.hpp"
#include "ch/rng.hpp"
#include "ch/version.hpp"

namespace ch {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Numerically stable log(1 + exp(x)).
inline double softplus(double x) {
    const double m = x > 0.0 ? x : 0.0;
    return m + std::log1p(std::exp(-(x > 0.0 ? x : -x)));
}

inline double logistic_loss(double raw, int label) { return softplus(raw) - label * raw; }

// p = sigmoid(raw); g = p - label; h = p(1-p).
inline std::pair<double, double> logistic_grad_hess(double raw, int label) {
    const double p = sigmoid(raw);
    return {p - static_cast<double>(label), p * (1.0 - p)};
}

inline double leaf_weight(double grad_sum, double hess_sum, double lambda) {
    if (!(hess_sum + lambda > 0.0)) {
        throw_error(ErrorKind::domain, "degenerate node: hessian sum plus lambda must be > 0");
    }
    return -grad_sum / (hess_sum + lambda);
}

inline double split_gain(double gl, double hl, double gr, double hr, double lambda,
                         double gamma) {
    return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                  (gl + gr) * (gl + gr) / (hl + hr + lambda)) -
           gamma;
}

struct GbdtParams {
    int num_rounds = 300;
    double learning_rate = 0.1;
    int max_depth = 4;
    double lambda = 1.0;
    double gamma = 0.0;
    double min_child_weight = 1.0;
    double subsample = 1.0;
    double colsample = 1.0;
    std::uint64_t rng_seed = 7;
    // Optional validation-holdout early stopping. The source study discloses
    // no tuning protocol; this is an extrapolation and is off by default.
    int early_stopping_rounds = 0; // 0 disables
    double validation_fraction = 0.2;

    void validate() const {
        if (num_rounds < 1) throw_error(ErrorKind::config, "num_rounds must be >= 1");
        if (!(learning_rate > 0.0)) throw_error(ErrorKind::config, "learning_rate must be > 0");
        if (max_depth < 1) throw_error(ErrorKind::config, "max_depth must be >= 1");
        if (lambda < 0.0) throw_error(ErrorKind::config, "lambda must be >= 0");
        if (gamma < 0.0) throw_error(ErrorKind::config, "gamma must be >= 0");
        if (min_child_weight < 0.0) {
            throw_error(ErrorKind::config, "min_child_weight must be >= 0");
        }
        if (!(subsample > 0.0 && subsample <= 1.0)) {
            throw_error(ErrorKind::config, "subsample must be in (0, 1]");
        }
        if (!(colsample > 0.0 && colsample <= 1.0)) {
            throw_error(ErrorKind::config, "colsample must be in (0, 1]");
        }
        if (early_stopping_rounds < 0) {
            throw_error(ErrorKind::config, "early_stopping_rounds must be >= 0");
        }
        if (early_stopping_rounds > 0 &&
            !(validation_fraction > 0.0 && validation_fraction < 1.0)) {
            throw_error(ErrorKind::config, "validation_fraction must be in (0, 1)");
        }
    }
};

// Internal nodes carry feature/threshold/default; leaves carry the
// (learning-rate-scaled) weight. Nodes are stored in preorder.
struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    bool default_left = true;
    int left = -1;
    int right = -1;
    double weight = 0.0;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;

    double output(const double* row_values, const std::uint8_t* row_missing) const {
        int at = 0;
        while (!nodes[static_cast<std::size_t>(at)].is_leaf()) {
            const TreeNode& n = nodes[static_cast<std::size_t>(at)];
            const auto f = static_cast<std::size_t>(n.feature);
            bool go_left;
            if (row_missing != nullptr && row_missing[f]) {
                go_left = n.default_left;
            } else {
                const double v = row_values[f];
                go_left = std::isnan(v) ? n.default_left : v < n.threshold;
            }
            at = go_left ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(at)].weight;
    }

    std::size_t leaf_count() const {
        std::size_t n = 0;
        for (const auto& node : nodes) n += node.is_leaf();
        return n;
    }

    double weight_squared_sum() const {
        double s = 0.0;
        for (const auto& node : nodes) {
            if (node.is_leaf()) s += node.weight * node.weight;
        }
        return s;
    }
};

struct GbdtModel {
    double base_score = 0.0; // raw log-odds
    std::vector<Tree> trees;
    std::vector<std::string> feature_names;
    GbdtParams params;
    std::map<std::string, std::string> metadata; // opaque; round-trips with the file
};

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
    double gain = 0.0;
};

namespace detail {

struct FeatureColumns {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<std::vector<double>> values;        // [col][row]
    std::vector<std::vector<std::uint8_t>> missing; // [col][row]
    std::vector<std::vector<std::uint32_t>> sorted; // present rows by (value, row)
    std::vector<char> any_missing;                  // per column

    static FeatureColumns from_matrix(const FeatureMatrix& m) {
        FeatureColumns fc;
        fc.n_rows = m.n_rows();
        fc.n_cols = m.n_cols();
        fc.values.assign(fc.n_cols, {});
        fc.missing.assign(fc.n_cols, {});
        fc.sorted.assign(fc.n_cols, {});
        fc.any_missing.assign(fc.n_cols, 0);
        for (std::size_t c = 0; c < fc.n_cols; ++c) {
            auto& vals = fc.values[c];
            auto& miss = fc.missing[c];
            vals.resize(fc.n_rows);
            miss.resize(fc.n_rows);
            auto& order = fc.sorted[c];
            for (std::size_t r = 0; r < fc.n_rows; ++r) {
                vals[r] = m.at(r, c);
                miss[r] = m.is_missing(r, c) ? 1 : 0;
                if (!miss[r]) {
                    order.push_back(static_cast<std::uint32_t>(r));
                } else {
                    fc.any_missing[c] = 1;
                }
            }
            std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
                if (vals[a] != vals[b]) return vals[a] < vals[b];
                return a < b;
            });
        }
        return fc;
    }
};

struct FeatureScanResult {
    bool found = false;
    double threshold = 0.0;
    bool default_left = true;
    double gain = 0.0;
};

// Exact greedy scan of one feature. `present` is the node's rows sorted by
// value; thresholds are midpoints of adjacent distinct values; missing rows
// are tried on both sides (ties prefer left).
inline FeatureScanResult scan_feature(const std::vector<double>& col_values,
                                      const std::vector<std::uint32_t>& present,
                                      double g_missing, double h_missing, double g_total,
                                      double h_total, const std::vector<double>& g,
                                      const std::vector<double>& h, const GbdtParams& params) {
    FeatureScanResult best;
    double g_prefix = 0.0;
    double h_prefix = 0.0;
    for (std::size_t i = 0; i + 1 < present.size(); ++i) {
        const std::uint32_t row = present[i];
        g_prefix += g[row];
        h_prefix += h[row];
        const double v = col_values[row];
        const double v_next = col_values[present[i + 1]];
        if (v == v_next) continue;
        const double threshold = v + (v_next - v) / 2.0;
        if (!(v < threshold)) continue; // adjacent representable values
        for (int side = 0; side < 2; ++side) {
            const bool missing_left = side == 0;
            const double gl = g_prefix + (missing_left ? g_missing : 0.0);
            const double hl = h_prefix + (missing_left ? h_missing : 0.0);
            const double gr = g_total - gl;
            const double hr = h_total - hl;
            if (hl < params.min_child_weight || hr < params.min_child_weight) continue;
            if (!(hl + params.lambda > 0.0) || !(hr + params.lambda > 0.0)) continue;
            const double gain = split_gain(gl, hl, gr, hr, params.lambda, params.gamma);
            const bool better =
                !best.found || gain > best.gain ||
                (gain == best.gain && threshold < best.threshold);
            if (better && gain > 0.0) {
                best.found = true;
                best.threshold = threshold;
                best.default_left = missing_left;
                best.gain = gain;
            }
        }
    }
    return best;
}

} // namespace detail

// Best split over the given rows; absent means "make a leaf". `g`/`h` are
// indexed by global row id. `features` must be ascending; it defaults to all.
inline std::optional<SplitChoice> find_best_split(
    const detail::FeatureColumns& fc, const std::vector<std::uint32_t>& rows,
    const std::vector<double>& g, const std::vector<double>& h, const GbdtParams& params,
    const std::vector<int>& features, int n_threads = 1) {
    double g_total = 0.0, h_total = 0.0;
    for (std::uint32_t r : rows) {
        g_total += g[r];
        h_total += h[r];
    }

    std::vector<char> in_node(fc.n_rows, 0);
    for (std::uint32_t r : rows) in_node[r] = 1;

    std::vector<detail::FeatureScanResult> results(features.size());
    auto scan_range = [&](std::size_t from, std::size_t to) {
        std::vector<std::uint32_t> present;
        for (std::size_t k = from; k < to; ++k) {
            const auto f = static_cast<std::size_t>(features[k]);
            present.clear();
            double g_missing = 0.0, h_missing = 0.0;
            for (std::uint32_t r : fc.sorted[f]) {
                if (in_node[r]) present.push_back(r);
            }
            if (fc.any_missing[f]) {
                for (std::uint32_t r : rows) {
                    if (fc.missing[f][r]) {
                        g_missing += g[r];
                        h_missing += h[r];
                    }
                }
            }
            results[k] = detail::scan_feature(fc.values[f], present, g_missing, h_missing,
                                              g_total, h_total, g, h, params);
        }
    };

    if (n_threads <= 1 || features.size() < 2) {
        scan_range(0, features.size());
    } else {
        const std::size_t workers =
            std::min(static_cast<std::size_t>(n_threads), features.size());
        std::vector<std::thread> pool;
        const std::size_t chunk = (features.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t from = w * chunk;
            const std::size_t to = std::min(features.size(), from + chunk);
            if (from >= to) break;
            pool.emplace_back(scan_range, from, to);
        }
        for (auto& t : pool) t.join();
    }

    // Ordered reduction: the first strictly-better candidate wins, so equal
    // gains resolve to the lowest feature index, then the lowest threshold.
    std::optional<SplitChoice> best;
    for (std::size_t k = 0; k < features.size(); ++k) {
        const auto& r = results[k];
        if (!r.found) continue;
        if (!best || r.gain > best->gain) {
            best = SplitChoice{features[k], r.threshold, r.default_left, r.gain};
        }
    }
    return best;
}

inline std::optional<SplitChoice> find_best_split(const FeatureMatrix& m,
                                                  const std::vector<std::uint32_t>& rows,
                                                  const std::vector<double>& g,
                                                  const std::vector<double>& h,
                                                  const GbdtParams& params) {
    auto fc = detail::FeatureColumns::from_matrix(m);
    std::vector<int> features(m.n_cols());
    for (std::size_t i = 0; i < features.size(); ++i) features[i] = static_cast<int>(i);
    return find_best_split(fc, rows, g, h, params, features);
}

namespace detail {

struct GrowContext {
    const FeatureColumns* fc;
    const std::vector<double>* g;
    const std::vector<double>* h;
    const GbdtParams* params;
    const std::vector<int>* features;
    int n_threads = 1;
    Tree* tree;
};

inline int grow_node(GrowContext& ctx, std::vector<std::uint32_t> rows, double g_sum,
                     double h_sum, int depth) {
    const int id = static_cast<int>(ctx.tree->nodes.size());
    ctx.tree->nodes.emplace_back();

    std::optional<SplitChoice> split;
    if (depth < ctx.params->max_depth) {
        split = find_best_split(*ctx.fc, rows, *ctx.g, *ctx.h, *ctx.params, *ctx.features,
                                ctx.n_threads);
    }
    if (!split) {
        ctx.tree->nodes[static_cast<std::size_t>(id)].weight =
            ctx.params->learning_rate * leaf_weight(g_sum, h_sum, ctx.params->lambda);
        return id;
    }

    const auto f = static_cast<std::size_t>(split->feature);
    std::vector<std::uint32_t> left_rows, right_rows;
    double gl = 0.0, hl = 0.0;
    for (std::uint32_t r : rows) {
        bool go_left;
        if (ctx.fc->missing[f][r]) {
            go_left = split->default_left;
        } else {
            go_left = ctx.fc->values[f][r] < split->threshold;
        }
        if (go_left) {
            left_rows.push_back(r);
            gl += (*ctx.g)[r];
            hl += (*ctx.h)[r];
        } else {
            right_rows.push_back(r);
        }
    }
    rows.clear();
    rows.shrink_to_fit();

    {
        TreeNode& n = ctx.tree->nodes[static_cast<std::size_t>(id)];
        n.feature = split->feature;
        n.threshold = split->threshold;
        n.default_left = split->default_left;
    }
    const int left = grow_node(ctx, std::move(left_rows), gl, hl, depth + 1);
    const int right = grow_node(ctx, std::move(right_rows), g_sum - gl, h_sum - hl, depth + 1);
    ctx.tree->nodes[static_cast<std::size_t>(id)].left = left;
    ctx.tree->nodes[static_cast<std::size_t>(id)].right = right;
    return id;
}

} // namespace detail

struct TrainResult {
    GbdtModel model;
    std::vector<double> final_raw_scores;  // training rows, final round
    std::vector<double> objectives;        // regularized objective after each round
    int best_round = -1;                   // set when early stopping triggered
};

inline TrainResult train(const FeatureMatrix& matrix, const GbdtParams& params,
                         int n_threads = 1) {
    params.validate();
    const std::size_t n = matrix.n_rows();
    if (n < 2) throw_error(ErrorKind::data, "training requires at least 2 rows");
    std::size_t n_pos = 0;
    for (int label : matrix.labels) n_pos += label != 0;
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) {
        throw_error(ErrorKind::data, "training requires both classes present");
    }

    // Early stopping holds out a label-stratified validation slice; trees are
    // grown on the remainder and the model is truncated at the best round.
    std::vector<std::uint32_t> grow_pool;
    std::vector<std::uint32_t> holdout;
    const bool early_stopping = params.early_stopping_rounds > 0;
    if (early_stopping) {
        Rng rng = Rng::stream(params.rng_seed, "early-stopping-holdout");
        std::vector<std::uint32_t> strata[2];
        for (std::size_t i = 0; i < n; ++i) {
            strata[matrix.labels[i] != 0 ? 1 : 0].push_back(static_cast<std::uint32_t>(i));
        }
        for (auto& stratum : strata) {
            rng.shuffle(stratum);
            const auto n_holdout = static_cast<std::size_t>(std::floor(
                params.validation_fraction * static_cast<double>(stratum.size()) + 0.5));
            for (std::size_t i = 0; i < stratum.size(); ++i) {
                (i < n_holdout ? holdout : grow_pool).push_back(stratum[i]);
            }
        }
        std::sort(grow_pool.begin(), grow_pool.end());
        std::sort(holdout.begin(), holdout.end());
        bool grow_pos = false, grow_neg = false;
        for (std::uint32_t r : grow_pool) {
            (matrix.labels[r] != 0 ? grow_pos : grow_neg) = true;
        }
        if (holdout.empty() || !grow_pos || !grow_neg) {
            throw_error(ErrorKind::data, "too few rows for the early-stopping holdout");
        }
    } else {
        grow_pool.resize(n);
        for (std::size_t i = 0; i < n; ++i) grow_pool[i] = static_cast<std::uint32_t>(i);
    }

    auto fc = detail::FeatureColumns::from_matrix(matrix);

    TrainResult result;
    GbdtModel& model = result.model;
    model.params = params;
    model.feature_names = matrix.schema.columns;
    model.base_score = std::log(static_cast<double>(n_pos) / static_cast<double>(n_neg));

    std::vector<double> raw(n, model.base_score);
    std::vector<double> g(n, 0.0), h(n, 0.0);

    std::vector<int> all_features(matrix.n_cols());
    for (std::size_t i = 0; i < all_features.size(); ++i) all_features[i] = static_cast<int>(i);

    double penalty_sum = 0.0;
    double best_holdout_loss = std::numeric_limits<double>::infinity();
    int best_round = -1;
    for (int round = 0; round < params.num_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            auto [gi, hi] = logistic_grad_hess(raw[i], matrix.labels[i]);
            g[i] = gi;
            h[i] = hi;
        }

        Rng rng = Rng::stream(params.rng_seed, static_cast<std::uint64_t>(round));
        std::vector<std::uint32_t> rows;
        if (params.subsample < 1.0) {
            auto count = static_cast<std::size_t>(std::max<long long>(
                1, std::llround(params.subsample * static_cast<double>(grow_pool.size()))));
            auto picks = rng.sample_without_replacement(grow_pool.size(), count);
            rows.reserve(picks.size());
            for (std::size_t p : picks) rows.push_back(grow_pool[p]);
            std::sort(rows.begin(), rows.end());
        } else {
            rows = grow_pool;
        }

        std::vector<int> features;
        if (params.colsample < 1.0) {
            auto count = static_cast<std::size_t>(std::max<long long>(
                1, std::llround(params.colsample * static_cast<double>(all_features.size()))));
            auto picks = rng.sample_without_replacement(all_features.size(), count);
            features.reserve(picks.size());
            for (std::size_t p : picks) features.push_back(static_cast<int>(p));
            std::sort(features.begin(), features.end());
        } else {
            features = all_features;
        }

        double g_sum = 0.0, h_sum = 0.0;
        for (std::uint32_t r : rows) {
            g_sum += g[r];
            h_sum += h[r];
        }

        Tree tree;
        detail::GrowContext ctx{&fc, &g, &h, &params, &features, n_threads, &tree};
        detail::grow_node(ctx, std::move(rows), g_sum, h_sum, 0);
        for (std::size_t i = 0; i < n; ++i) {
            raw[i] += tree.output(&matrix.values[i * matrix.n_cols()],
                                  &matrix.missing[i * matrix.n_cols()]);
        }
        penalty_sum += params.gamma * static_cast<double>(tree.leaf_count()) +
                       0.5 * params.lambda * tree.weight_squared_sum();
        model.trees.push_back(std::move(tree));

        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) loss += logistic_loss(raw[i], matrix.labels[i]);
        result.objectives.push_back(loss + penalty_sum);

        if (early_stopping) {
            double holdout_loss = 0.0;
            for (std::uint32_t r : holdout) {
                holdout_loss += logistic_loss(raw[r], matrix.labels[r]);
            }
            if (holdout_loss < best_holdout_loss) {
                best_holdout_loss = holdout_loss;
                best_round = round;
            } else if (round - best_round >= params.early_stopping_rounds) {
                break;
            }
        }
    }

    if (early_stopping && best_round + 1 < static_cast<int>(model.trees.size())) {
        model.trees.resize(static_cast<std::size_t>(best_round + 1));
        result.objectives.resize(static_cast<std::size_t>(best_round + 1));
        raw.assign(n, model.base_score);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = &matrix.values[i * matrix.n_cols()];
            const std::uint8_t* miss = &matrix.missing[i * matrix.n_cols()];
            for (const auto& tree : model.trees) raw[i] += tree.output(row, miss);
        }
    }
    result.best_round = early_stopping ? best_round : -1;
    result.final_raw_scores = std::move(raw);
    return result;
}

inline std::vector<double> predict_raw(const GbdtModel& model, const FeatureMatrix& matrix) {
    if (matrix.schema.columns.size() != model.feature_names.size()) {
        throw_error(ErrorKind::data,
                    "feature schema mismatch: expected " +
                        std::to_string(model.feature_names.size()) + " columns, got " +
                        std::to_string(matrix.schema.columns.size()));
    }
    for (std::size_t i = 0; i < model.feature_names.size(); ++i) {
        if (matrix.schema.columns[i] != model.feature_names[i]) {
            throw_error(ErrorKind::data, "feature schema mismatch at column '" +
                                             matrix.schema.columns[i] + "' (model expects '" +
                                             model.feature_names[i] + "')");
        }
    }
    std::vector<double> raw(matrix.n_rows(), model.base_score);
    for (std::size_t r = 0; r < matrix.n_rows(); ++r) {
        const double* row = &matrix.values[r * matrix.n_cols()];
        const std::uint8_t* miss = &matrix.missing[r * matrix.n_cols()];
        for (const auto& tree : model.trees) raw[r] += tree.output(row, miss);
    }
    return raw;
}

inline std::vector<double> predict(const GbdtModel& model, const FeatureMatrix& matrix) {
    auto raw = predict_raw(model, matrix);
    for (double& x : raw) x = sigmoid(x);
    return raw;
}

// --------------------------------------------------------------------------
// model.json (round-trips exactly)

inline nlohmann::json params_to_json(const GbdtParams& p) {
    return nlohmann::json{{"num_rounds", p.num_rounds},
                          {"learning_rate", p.learning_rate},
                          {"max_depth", p.max_depth},
                          {"lambda", p.lambda},
                          {"gamma", p.gamma},
                          {"min_child_weight", p.min_child_weight},
                          {"subsample", p.subsample},
                          {"colsample", p.colsample},
                          {"rng_seed", p.rng_seed},
                          {"early_stopping_rounds", p.early_stopping_rounds},
                          {"validation_fraction", p.validation_fraction}};
}

inline GbdtParams params_from_json(const nlohmann::json& j) {
    GbdtParams p;
    p.num_rounds = j.at("num_rounds").get<int>();
    p.learning_rate = j.at("learning_rate").get<double>();
    p.max_depth = j.at("max_depth").get<int>();
    p.lambda = j.at("lambda").get<double>();
    p.gamma = j.at("gamma").get<double>();
    p.min_child_weight = j.at("min_child_weight").get<double>();
    p.subsample = j.at("subsample").get<double>();
    p.colsample = j.at("colsample").get<double>();
    p.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    if (j.contains("early_stopping_rounds")) {
        p.early_stopping_rounds = j.at("early_stopping_rounds").get<int>();
    }
    if (j.contains("validation_fraction")) {
        p.validation_fraction = j.at("validation_fraction").get<double>();
    }
    return p;
}

inline nlohmann::json model_to_json(const GbdtModel& model) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
            const TreeNode& n = tree.nodes[i];
            if (n.is_leaf()) {
                nodes.push_back({{"id", i}, {"weight", n.weight}});
            } else {
                nodes.push_back({{"id", i},
                                 {"feature", n.feature},
                                 {"threshold", n.threshold},
                                 {"default", n.default_left ? "left" : "right"},
                                 {"left", n.left},
                                 {"right", n.right}});
            }
        }
        trees.push_back(std::move(nodes));
    }
    nlohmann::json out{{"version", kToolVersion},
                       {"base_score", model.base_score},
                       {"params", params_to_json(model.params)},
                       {"feature_names", model.feature_names},
                       {"trees", std::move(trees)}};
    if (!model.metadata.empty()) out["metadata"] = model.metadata;
    return out;
}

inline GbdtModel model_from_json(const nlohmann::json& j) {
    GbdtModel model;
    model.base_score = j.at("base_score").get<double>();
    model.params = params_from_json(j.at("params"));
    model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    if (j.contains("metadata")) {
        model.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    }
    for (const auto& tj : j.at("trees")) {
        Tree tree;
        tree.nodes.resize(tj.size());
        for (const auto& nj : tj) {
            const auto id = nj.at("id").get<std::size_t>();
            if (id >= tree.nodes.size()) {
                throw_error(ErrorKind::data, "model.json: node id out of range");
            }
            TreeNode& n = tree.nodes[id];
            if (nj.contains("feature")) {
                n.feature = nj.at("feature").get<int>();
                n.threshold = nj.at("threshold").get<double>();
                n.default_left = nj.at("default").get<std::string>() == "left";
                n.left = nj.at("left").get<int>();
                n.right = nj.at("right").get<int>();
            } else {
                n.feature = -1;
                n.weight = nj.at("weight").get<double>();
            }
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline void save_model(const GbdtModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw_error(ErrorKind::io, "cannot write " + path);
    out << model_to_json(model).dump(2) << '\n';
}

inline GbdtModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_error(ErrorKind::dependency, "missing model file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw_error(ErrorKind::data, path + ": " + e.what());
    }
    return model_from_json(j);
}

} // namespace ch
