#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mfagl/date.hpp"
#include "mfagl/error.hpp"
#include "mfagl/regions.hpp"
#include "mfagl/rng.hpp"

namespace mfagl::baselines {

using LabelMap = std::map<std::pair<AreaId, Period>, double>;

/// Autoregression over coarse labels. coefficients[j] multiplies the lag-(j+1)
/// value, so index 0 pairs with the newest history entry.
struct ArModel {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;

    int lag_order() const { return static_cast<int>(coefficients.size()); }
};

/// intercept + dot(coefficients, lags); `recent` is chronological, newest last.
inline double predict_ar(const ArModel& model, const std::vector<double>& recent) {
    const int k = model.lag_order();
    if (static_cast<int>(recent.size()) != k)
        throw InvalidArgument("predict_ar needs exactly " + std::to_string(k) +
                              " recent values, got " + std::to_string(recent.size()));
    double out = model.intercept;
    for (int j = 0; j < k; ++j) out += model.coefficients[j] * recent[static_cast<std::size_t>(k - 1 - j)];
    return out;
}

namespace detail {

struct ArRows {
    Eigen::MatrixXd x; // n x lag_order, column j = lag-(j+1)
    Eigen::VectorXd y;
};

/// Stacks one row per labeled (p, t) whose lag_order predecessors are all
/// labeled. Also reports the longest consecutive run seen, for diagnostics.
inline std::pair<ArRows, int> stack_ar_rows(const LabelMap& labels, int lag_order,
                                            const std::optional<AreaId>& only_area) {
    std::map<AreaId, std::map<int, double>> series; // period index -> value
    for (const auto& [key, value] : labels) {
        if (only_area && key.first != *only_area) continue;
        series[key.first][key.second.index()] = value;
    }
    std::vector<std::pair<std::vector<double>, double>> rows;
    int longest_run = 0;
    for (const auto& [p, by_index] : series) {
        int run = 0, prev = std::numeric_limits<int>::min();
        for (const auto& [idx, value] : by_index) {
            run = (idx == prev + 1) ? run + 1 : 1;
            prev = idx;
            longest_run = std::max(longest_run, run);
            (void)value;
        }
        for (const auto& [idx, value] : by_index) {
            std::vector<double> lags;
            lags.reserve(static_cast<std::size_t>(lag_order));
            bool complete = true;
            for (int j = 1; j <= lag_order; ++j) {
                const auto it = by_index.find(idx - j);
                if (it == by_index.end()) {
                    complete = false;
                    break;
                }
                lags.push_back(it->second);
            }
            if (complete) rows.push_back({std::move(lags), value});
        }
    }
    ArRows out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), lag_order);
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (int j = 0; j < lag_order; ++j)
            out.x(static_cast<Eigen::Index>(r), j) = rows[r].first[static_cast<std::size_t>(j)];
        out.y[static_cast<Eigen::Index>(r)] = rows[r].second;
    }
    return {std::move(out), longest_run};
}

/// Least squares with intercept via normal equations; ridge 1e-8 I on the
/// Gram matrix when it is singular.
inline ArModel solve_ar(const ArRows& rows, int lag_order) {
    const Eigen::Index n = rows.y.size();
    Eigen::MatrixXd a(n, lag_order + 1);
    a.col(0).setOnes();
    a.rightCols(lag_order) = rows.x;
    Eigen::MatrixXd gram = a.transpose() * a;
    const Eigen::VectorXd rhs = a.transpose() * rows.y;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible()) {
        gram.diagonal().array() += 1e-8;
        lu.compute(gram);
    }
    const Eigen::VectorXd theta = lu.solve(rhs);
    ArModel model;
    model.intercept = theta[0];
    model.coefficients = theta.tail(lag_order);
    return model;
}

} // namespace detail

/// One coefficient set pooled across all large areas.
inline ArModel fit_ar(const LabelMap& labels, int lag_order = 11) {
    if (lag_order < 1) throw InvalidArgument("lag_order must be positive");
    auto [rows, longest_run] = detail::stack_ar_rows(labels, lag_order, std::nullopt);
    if (rows.y.size() == 0)
        throw InvalidArgument("autoregression needs " + std::to_string(lag_order + 1) +
                              " consecutive labeled periods for at least one area; longest run is " +
                              std::to_string(longest_run));
    return detail::solve_ar(rows, lag_order);
}

/// Separate coefficients per large area (keyed by area id).
inline std::map<AreaId, ArModel> fit_ar_per_area(const LabelMap& labels, int lag_order = 11) {
    std::map<AreaId, ArModel> out;
    std::vector<AreaId> areas;
    for (const auto& [key, value] : labels)
        if (areas.empty() || areas.back() != key.first) areas.push_back(key.first);
    std::sort(areas.begin(), areas.end());
    areas.erase(std::unique(areas.begin(), areas.end()), areas.end());
    for (const AreaId& p : areas) {
        auto [rows, longest_run] = detail::stack_ar_rows(labels, lag_order, p);
        if (rows.y.size() == 0)
            throw InvalidArgument("area '" + p + "' lacks " + std::to_string(lag_order + 1) +
                                  " consecutive labeled periods; longest run is " +
                                  std::to_string(longest_run));
        out[p] = detail::solve_ar(rows, lag_order);
    }
    return out;
}

/// Rolls the model forward `steps` periods, feeding each prediction back in
/// as the newest lag.
inline std::vector<double> forecast_ar(const ArModel& model, std::vector<double> history,
                                       int steps) {
    const int k = model.lag_order();
    if (static_cast<int>(history.size()) < k)
        throw InvalidArgument("forecast needs at least " + std::to_string(k) + " history values");
    if (steps < 0) throw InvalidArgument("steps must be non-negative");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        const std::vector<double> recent(history.end() - k, history.end());
        const double next = predict_ar(model, recent);
        out.push_back(next);
        history.push_back(next);
    }
    return out;
}

struct RfConfig {
    int n_trees = 100;
    int max_depth = 8;
    int min_leaf = 2;
    int mtry = 0; // 0 means ceil(sqrt(n_features))
    std::uint64_t seed = 0;

    void validate() const {
        if (n_trees < 1) throw InvalidArgument("n_trees must be positive");
        if (max_depth < 0) throw InvalidArgument("max_depth must be non-negative");
        if (min_leaf < 1) throw InvalidArgument("min_leaf must be positive");
        if (mtry < 0) throw InvalidArgument("mtry must be non-negative");
    }
};

/// feature < 0 marks a leaf carrying `value`; split rule is x[feature] <= threshold.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;
};

struct RandomForest {
    std::vector<Tree> trees;
    int n_features = 0;
    RfConfig config;
};

namespace detail {

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    const Eigen::VectorXd& y;
    const RfConfig& cfg;
    int mtry;
    Rng tree_rng;
    Tree tree;

    // Each node draws its feature candidates from an rng keyed by its heap
    // path code, so shallower depth limits reproduce the same split prefix.
    int build(std::vector<int>& idx, int depth, std::uint64_t path_code) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        double sum = 0.0, sum_sq = 0.0;
        for (const int i : idx) {
            sum += y[i];
            sum_sq += y[i] * y[i];
        }
        const double n = static_cast<double>(idx.size());
        const double mean = sum / n;
        tree.nodes[node_id].value = mean;
        if (depth >= cfg.max_depth || static_cast<int>(idx.size()) < 2 * cfg.min_leaf)
            return node_id;
        if (sum_sq - sum * sum / n <= 0.0) return node_id; // pure node

        Rng node_rng = tree_rng.derive(path_code);
        const int d = static_cast<int>(x.cols());
        std::vector<int> features(static_cast<std::size_t>(d));
        for (int f = 0; f < d; ++f) features[static_cast<std::size_t>(f)] = f;
        for (int k = 0; k < mtry; ++k) {
            const std::size_t j = static_cast<std::size_t>(k) +
                                  node_rng.uniform_index(static_cast<std::uint64_t>(d - k));
            std::swap(features[static_cast<std::size_t>(k)], features[j]);
        }

        double best_sse = std::numeric_limits<double>::infinity();
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::pair<double, double>> vals(idx.size());
        for (int k = 0; k < mtry; ++k) {
            const int f = features[static_cast<std::size_t>(k)];
            for (std::size_t i = 0; i < idx.size(); ++i)
                vals[i] = {x(idx[i], f), y[idx[i]]};
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t s = 1; s < vals.size(); ++s) {
                left_sum += vals[s - 1].second;
                left_sq += vals[s - 1].second * vals[s - 1].second;
                if (vals[s - 1].first == vals[s].first) continue;
                const auto ls = static_cast<double>(s);
                const auto rs = n - ls;
                if (s < static_cast<std::size_t>(cfg.min_leaf) ||
                    vals.size() - s < static_cast<std::size_t>(cfg.min_leaf))
                    continue;
                const double right_sum = sum - left_sum;
                const double right_sq = sum_sq - left_sq;
                const double sse = (left_sq - left_sum * left_sum / ls) +
                                   (right_sq - right_sum * right_sum / rs);
                if (sse < best_sse) {
                    best_sse = sse;
                    best_feature = f;
                    double thr = (vals[s - 1].first + vals[s].first) / 2.0;
                    if (!(thr < vals[s].first)) thr = vals[s - 1].first;
                    best_threshold = thr;
                }
            }
        }
        if (best_feature < 0) return node_id; // no candidate admits a valid split

        std::vector<int> left_idx, right_idx;
        for (const int i : idx)
            (x(i, best_feature) <= best_threshold ? left_idx : right_idx).push_back(i);
        idx.clear();
        idx.shrink_to_fit();
        tree.nodes[node_id].feature = best_feature;
        tree.nodes[node_id].threshold = best_threshold;
        const int left = build(left_idx, depth + 1, path_code * 2);
        tree.nodes[node_id].left = left;
        const int right = build(right_idx, depth + 1, path_code * 2 + 1);
        tree.nodes[node_id].right = right;
        return node_id;
    }
};

inline Tree fit_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RfConfig& cfg,
                     int mtry, Rng tree_rng) {
    Rng bootstrap_rng = tree_rng.derive(0);
    const auto n = static_cast<std::uint64_t>(y.size());
    std::vector<int> idx(y.size());
    for (auto& i : idx) i = static_cast<int>(bootstrap_rng.uniform_index(n));
    std::sort(idx.begin(), idx.end()); // canonical order for deterministic splits
    TreeBuilder builder{x, y, cfg, mtry, tree_rng, {}};
    builder.build(idx, 0, 1);
    return std::move(builder.tree);
}

} // namespace detail

/// CART regression forest: bootstrap resamples, variance-reduction splits
/// over mtry sampled features, leaf means. Deterministic given the seed.
inline RandomForest fit_rf(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                           const RfConfig& config) {
    config.validate();
    if (y.size() == 0) throw InvalidArgument("random forest needs at least one training row");
    if (x.rows() != y.size()) throw ShapeError("feature rows do not match target length");
    if (!x.allFinite() || !y.allFinite())
        throw InvalidArgument("random forest training data must be finite");
    RandomForest forest;
    forest.n_features = static_cast<int>(x.cols());
    forest.config = config;
    const int mtry = config.mtry > 0
                         ? std::min(config.mtry, forest.n_features)
                         : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(forest.n_features))));
    Rng root(config.seed);
    forest.trees.reserve(static_cast<std::size_t>(config.n_trees));
    for (int i = 0; i < config.n_trees; ++i)
        forest.trees.push_back(
            detail::fit_tree(x, y, config, mtry, root.derive(static_cast<std::uint64_t>(i))));
    return forest;
}

inline double predict_tree(const Tree& tree, const Eigen::Ref<const Eigen::VectorXd>& row) {
    int at = 0;
    while (tree.nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(at)];
        at = row[node.feature] <= node.threshold ? node.left : node.right;
    }
    return tree.nodes[static_cast<std::size_t>(at)].value;
}

/// Mean of per-tree predictions. Summation order is pinned by sorting the
/// leaf values, so reordering trees cannot perturb the result.
inline double predict_rf(const RandomForest& forest, const Eigen::Ref<const Eigen::VectorXd>& row) {
    if (row.size() != forest.n_features)
        throw ShapeError("row has " + std::to_string(row.size()) + " features; forest expects " +
                         std::to_string(forest.n_features));
    if (forest.trees.empty()) throw UsageError("forest has no trees");
    std::vector<double> leaf_values;
    leaf_values.reserve(forest.trees.size());
    for (const Tree& tree : forest.trees) leaf_values.push_back(predict_tree(tree, row));
    std::sort(leaf_values.begin(), leaf_values.end());
    double sum = 0.0;
    for (const double v : leaf_values) sum += v;
    return sum / static_cast<double>(forest.trees.size());
}

/// Feature layout for forests fit on coarse labels: lag_order lags (newest
/// first), then year, month, and large-area one-hot blocks.
struct RfLabelSchema {
    int lag_order = 11;
    std::vector<int> years;       // ascending
    std::vector<AreaId> areas;    // ascending

    int width() const {
        return lag_order + static_cast<int>(years.size()) + 12 + static_cast<int>(areas.size());
    }

    Eigen::VectorXd encode(const std::vector<double>& lags_newest_first, const Period& t,
                           const AreaId& p) const {
        if (static_cast<int>(lags_newest_first.size()) != lag_order)
            throw InvalidArgument("schema expects " + std::to_string(lag_order) + " lags");
        Eigen::VectorXd row = Eigen::VectorXd::Zero(width());
        for (int j = 0; j < lag_order; ++j) row[j] = lags_newest_first[static_cast<std::size_t>(j)];
        const auto yit = std::lower_bound(years.begin(), years.end(), t.year());
        if (yit == years.end() || *yit != t.year())
            throw LookupError("year " + std::to_string(t.year()) + " is not in the schema");
        row[lag_order + static_cast<int>(yit - years.begin())] = 1.0;
        row[lag_order + static_cast<int>(years.size()) + t.month() - 1] = 1.0;
        const auto ait = std::lower_bound(areas.begin(), areas.end(), p);
        if (ait == areas.end() || *ait != p)
            throw LookupError("area '" + p + "' is not in the schema");
        row[lag_order + static_cast<int>(years.size()) + 12 + static_cast<int>(ait - areas.begin())] =
            1.0;
        return row;
    }

    static RfLabelSchema from_labels(const LabelMap& labels, int lag_order) {
        RfLabelSchema schema;
        schema.lag_order = lag_order;
        std::set<int> years;
        std::set<AreaId> areas;
        for (const auto& [key, value] : labels) {
            years.insert(key.second.year());
            areas.insert(key.first);
        }
        schema.years.assign(years.begin(), years.end());
        schema.areas.assign(areas.begin(), areas.end());
        return schema;
    }
};

/// Lags for (p, t) pulled from the label map, newest first; empty when any of
/// the lag_order predecessors is unlabeled.
inline std::optional<std::vector<double>> label_lags(const LabelMap& labels, const AreaId& p,
                                                     const Period& t, int lag_order) {
    std::vector<double> lags;
    lags.reserve(static_cast<std::size_t>(lag_order));
    for (int j = 1; j <= lag_order; ++j) {
        const auto it = labels.find({p, t.plus_months(-j)});
        if (it == labels.end()) return std::nullopt;
        lags.push_back(it->second);
    }
    return lags;
}

struct RfTrainingTable {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    std::vector<std::pair<AreaId, Period>> keys;
};

/// One row per labeled (p, t) with a complete lag history.
inline RfTrainingTable build_rf_table(const LabelMap& labels, const RfLabelSchema& schema) {
    std::vector<Eigen::VectorXd> rows;
    RfTrainingTable table;
    for (const auto& [key, value] : labels) {
        const auto lags = label_lags(labels, key.first, key.second, schema.lag_order);
        if (!lags) continue;
        rows.push_back(schema.encode(*lags, key.second, key.first));
        table.keys.push_back(key);
    }
    if (rows.empty())
        throw InvalidArgument("no labeled period has " + std::to_string(schema.lag_order) +
                              " labeled predecessors");
    table.x.resize(static_cast<Eigen::Index>(rows.size()), schema.width());
    table.y.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        table.x.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
        const auto it = labels.find(table.keys[r]);
        table.y[static_cast<Eigen::Index>(r)] = it->second;
    }
    return table;
}

} // namespace mfagl::baselines
