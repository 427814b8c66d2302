#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mfagl/aggl.hpp"
#include "mfagl/baselines.hpp"
#include "mfagl/csv.hpp"
#include "mfagl/date.hpp"
#include "mfagl/error.hpp"
#include "mfagl/regions.hpp"

namespace mfagl::harness {

/// Mean absolute percentage error over matching keys, in percent.
inline double mape(const std::map<AreaId, double>& actual,
                   const std::map<AreaId, double>& predicted) {
    if (actual.empty()) throw InvalidArgument("MAPE over an empty set");
    if (actual.size() != predicted.size())
        throw InvalidArgument("actual and predicted key sets differ in size");
    double sum = 0.0;
    for (const auto& [p, y] : actual) {
        const auto it = predicted.find(p);
        if (it == predicted.end()) throw InvalidArgument("no prediction for '" + p + "'");
        if (y == 0.0) throw InvalidArgument("actual value for '" + p + "' is zero; MAPE undefined");
        sum += std::abs(y - it->second) / std::abs(y);
    }
    return sum / static_cast<double>(actual.size()) * 100.0;
}

/// Table-style fixed two-decimal percent formatting.
inline std::string format_percent(double pct) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", pct);
    return buf;
}

struct ModelScore {
    std::string model;
    double mape_pct = 0.0;
    double se_pct = 0.0; // standard error of the per-area APE mean
    int n = 0;
    std::map<AreaId, double> ape_pct; // per large area
};

struct EvaluationReport {
    Period holdout{1970, 1};
    std::vector<ModelScore> rows;
};

/// Scores one model's aggregate predictions; SE is the sample standard
/// deviation of per-area APEs over sqrt(n) (0 when n < 2).
inline ModelScore score_model(const std::string& name, const std::map<AreaId, double>& actual,
                              const std::map<AreaId, double>& predicted) {
    ModelScore score;
    score.model = name;
    score.mape_pct = mape(actual, predicted);
    score.n = static_cast<int>(actual.size());
    for (const auto& [p, y] : actual)
        score.ape_pct[p] = std::abs(y - predicted.at(p)) / std::abs(y) * 100.0;
    if (score.n >= 2) {
        double var = 0.0;
        for (const auto& [p, ape] : score.ape_pct)
            var += (ape - score.mape_pct) * (ape - score.mape_pct);
        var /= static_cast<double>(score.n - 1);
        score.se_pct = std::sqrt(var / static_cast<double>(score.n));
    }
    return score;
}

struct EvaluateConfig {
    aggl::TrainConfig train;
    int lag_order = 11;
    baselines::RfConfig rf;
    std::optional<Period> holdout; // default: last labeled period
    bool ar_per_area = false;
    bool include_mfagl = true; // false compares the baselines alone
};

struct EvaluateResult {
    EvaluationReport report;
    std::map<AreaId, double> actual;                            // per large area at holdout
    std::map<std::string, std::map<AreaId, double>> aggregated; // model -> p -> prediction
    std::vector<aggl::GranularPrediction> granular;             // MF-AGL, per q at holdout
    aggl::MfAglModel model;
};

namespace detail {

/// Longest consecutive labeled run ending at `last`, chronological order.
inline std::vector<double> history_ending_at(const baselines::LabelMap& labels, const AreaId& p,
                                             const Period& last) {
    std::vector<double> run;
    Period t = last;
    while (true) {
        const auto it = labels.find({p, t});
        if (it == labels.end()) break;
        run.push_back(it->second);
        t = t.plus_months(-1);
    }
    std::reverse(run.begin(), run.end());
    return run;
}

/// Recursive multi-step AR forecast from the last labeled period before
/// `target` to `target` itself.
inline double forecast_ar_to(const baselines::ArModel& model, const baselines::LabelMap& labels,
                             const AreaId& p, const Period& target, const Period& last_labeled) {
    const std::vector<double> history = history_ending_at(labels, p, last_labeled);
    if (static_cast<int>(history.size()) < model.lag_order())
        throw InvalidArgument("area '" + p + "' has only " + std::to_string(history.size()) +
                              " consecutive labeled periods before " + target.to_string() +
                              "; the autoregression needs " + std::to_string(model.lag_order()));
    const int steps = target.index() - last_labeled.index();
    if (steps < 1)
        throw InvalidArgument("target " + target.to_string() + " is not after the labeled history");
    return baselines::forecast_ar(model, history, steps).back();
}

/// Same recursion for the forest: predicted months are fed back as lags.
inline double forecast_rf_to(const baselines::RandomForest& forest,
                             const baselines::RfLabelSchema& schema, baselines::LabelMap labels,
                             const AreaId& p, const Period& target, const Period& last_labeled) {
    const int steps = target.index() - last_labeled.index();
    if (steps < 1)
        throw InvalidArgument("target " + target.to_string() + " is not after the labeled history");
    double out = 0.0;
    for (int s = 1; s <= steps; ++s) {
        const Period t = last_labeled.plus_months(s);
        const auto lags = baselines::label_lags(labels, p, t, schema.lag_order);
        if (!lags)
            throw InvalidArgument("area '" + p + "' lacks " + std::to_string(schema.lag_order) +
                                  " consecutive labeled periods before " + t.to_string());
        out = baselines::predict_rf(forest, schema.encode(*lags, t, p));
        labels[{p, t}] = out;
    }
    return out;
}

inline Period last_labeled_period(const baselines::LabelMap& labels) {
    if (labels.empty()) throw InvalidArgument("no labels");
    Period last = labels.begin()->first.second;
    for (const auto& [key, value] : labels)
        if (last < key.second) last = key.second;
    return last;
}

} // namespace detail

/// Temporal-holdout comparison: train MF-AGL, AR, and RF on labels strictly
/// before the holdout period, score aggregate predictions for the holdout
/// against its labels. MF-AGL predicts per small area as of the holdout's
/// last day and is aggregated before scoring.
inline EvaluateResult evaluate_models(const MixedFrequencyPanel& panel, const EvaluateConfig& config,
                                      const std::function<void(int, double)>& on_epoch = {}) {
    const auto labeled = panel.labeled_pairs();
    if (labeled.empty()) throw InvalidArgument("panel has no labels to evaluate against");
    baselines::LabelMap all_labels;
    for (const auto& key : labeled) all_labels[key] = *panel.label_at(key.first, key.second);

    const Period holdout = config.holdout.value_or(detail::last_labeled_period(all_labels));
    EvaluateResult result;
    result.report.holdout = holdout;
    baselines::LabelMap train_labels;
    for (const auto& [key, value] : all_labels) {
        if (key.second == holdout) result.actual[key.first] = value;
        if (key.second < holdout) train_labels[key] = value;
    }
    if (result.actual.empty())
        throw InvalidArgument("holdout period " + holdout.to_string() + " has no labels");
    if (train_labels.empty())
        throw InvalidArgument("no labeled periods precede the holdout " + holdout.to_string());

    // MF-AGL: trained without holdout labels, predicting from features alone.
    std::map<AreaId, double> mfagl_agg;
    if (config.include_mfagl) {
        MixedFrequencyPanel train_panel(panel.hierarchy(), panel.calendar(), panel.raw_features(),
                                        train_labels);
        result.model = aggl::train(train_panel, config.train, on_epoch);
        const Date as_of = holdout.last_day();
        std::map<AreaId, double> mfagl_granular;
        for (const AreaId& q : panel.hierarchy().small_areas()) {
            aggl::GranularPrediction g = aggl::predict_granular(result.model, panel, q, as_of);
            mfagl_granular[q] = g.value;
            result.granular.push_back(std::move(g));
        }
        for (const AreaId& p : panel.hierarchy().large_areas())
            mfagl_agg[p] = aggl::aggregate(mfagl_granular, panel.hierarchy(), p);
    }

    // AR
    const Period last_train = holdout.plus_months(-1);
    std::map<AreaId, double> ar_pred;
    if (config.ar_per_area) {
        const auto models = baselines::fit_ar_per_area(train_labels, config.lag_order);
        for (const auto& [p, model] : models)
            ar_pred[p] = detail::forecast_ar_to(model, train_labels, p, holdout, last_train);
    } else {
        const baselines::ArModel ar = baselines::fit_ar(train_labels, config.lag_order);
        for (const AreaId& p : panel.hierarchy().large_areas())
            ar_pred[p] = detail::forecast_ar_to(ar, train_labels, p, holdout, last_train);
    }

    // RF
    const auto schema = baselines::RfLabelSchema::from_labels(all_labels, config.lag_order);
    const auto table = baselines::build_rf_table(train_labels, schema);
    const baselines::RandomForest forest = baselines::fit_rf(table.x, table.y, config.rf);
    std::map<AreaId, double> rf_pred;
    for (const AreaId& p : panel.hierarchy().large_areas())
        rf_pred[p] = detail::forecast_rf_to(forest, schema, train_labels, p, holdout, last_train);

    result.aggregated["ar"] = ar_pred;
    result.aggregated["rf"] = rf_pred;
    result.report.rows.push_back(score_model("ar", result.actual, ar_pred));
    result.report.rows.push_back(score_model("rf", result.actual, rf_pred));
    if (config.include_mfagl) {
        result.aggregated["mfagl"] = mfagl_agg;
        result.report.rows.push_back(score_model("mfagl", result.actual, mfagl_agg));
    }
    return result;
}

/// Labels for month m are published on the second-to-last day of month m+2,
/// shifted by release_lag_days.
inline Date release_date(const Period& m, int release_lag_days = 0) {
    return m.plus_months(2).last_day().plus_days(-1 + release_lag_days);
}

struct ScheduleConfig {
    int lag_order = 11;
    int release_lag_days = 0;
    baselines::RfConfig rf;
};

struct ScheduleResult {
    Date as_of{1970, 1, 1};
    Period target{1970, 1};
    std::optional<Period> last_released; // newest period whose label is out
    bool baselines_available = false;
    std::string baselines_unavailable_reason;
    std::map<AreaId, double> ar, rf;            // per large area, when available
    std::map<AreaId, double> mfagl_granular;    // per small area, as of as_of
    std::map<AreaId, double> mfagl_aggregated;  // per large area
};

/// Replays the real-time regime at `as_of`: AR/RF see only labels already
/// released by then; the MF-AGL model (trained earlier, not re-trained here)
/// sees features through as_of and nothing after.
inline ScheduleResult schedule_run(const MixedFrequencyPanel& panel, const aggl::MfAglModel& model,
                                   const Date& as_of, const ScheduleConfig& config = {}) {
    ScheduleResult result;
    result.as_of = as_of;
    result.target = Period::of(as_of);

    // Released labels only; unreleased (p, t) label values are never read.
    baselines::LabelMap released;
    for (const auto& [p, t] : panel.labeled_pairs()) {
        if (release_date(t, config.release_lag_days) <= as_of) {
            released[{p, t}] = *panel.label_at(p, t);
            if (!result.last_released || *result.last_released < t) result.last_released = t;
        }
    }

    if (!result.last_released) {
        result.baselines_unavailable_reason = "no labels are released as of " + as_of.to_string();
    } else {
        try {
            const baselines::ArModel ar = baselines::fit_ar(released, config.lag_order);
            const auto schema = baselines::RfLabelSchema::from_labels(released, config.lag_order);
            const auto table = baselines::build_rf_table(released, schema);
            const baselines::RandomForest forest = baselines::fit_rf(table.x, table.y, config.rf);
            for (const AreaId& p : panel.hierarchy().large_areas()) {
                result.ar[p] = detail::forecast_ar_to(ar, released, p, result.target,
                                                      *result.last_released);
                result.rf[p] = detail::forecast_rf_to(forest, schema, released, p, result.target,
                                                      *result.last_released);
            }
            result.baselines_available = true;
        } catch (const InvalidArgument& e) {
            result.ar.clear();
            result.rf.clear();
            result.baselines_unavailable_reason = e.what();
        }
    }

    // MF-AGL: mask features after as_of, then nowcast the current period.
    MixedFrequencyPanel::FeatureMap visible;
    for (const auto& [key, value] : panel.raw_features())
        if (key.second <= as_of) visible[key] = value;
    MixedFrequencyPanel masked(panel.hierarchy(), panel.calendar(), std::move(visible), {});
    for (const AreaId& q : panel.hierarchy().small_areas())
        result.mfagl_granular[q] = aggl::predict_granular(model, masked, q, as_of).value;
    for (const AreaId& p : panel.hierarchy().large_areas())
        result.mfagl_aggregated[p] =
            aggl::aggregate(result.mfagl_granular, panel.hierarchy(), p);
    return result;
}

/// report CSV: model,mape_pct,se,n with two-decimal percents.
inline void write_report(const std::string& path, const EvaluationReport& report) {
    csv::Writer out(path, {"model", "mape_pct", "se", "n"});
    for (const ModelScore& row : report.rows)
        out.row({row.model, format_percent(row.mape_pct), format_percent(row.se_pct),
                 std::to_string(row.n)});
    out.close();
}

inline EvaluationReport load_report(const std::string& path) {
    const csv::Table table = csv::Table::read(path, {"model", "mape_pct", "se", "n"});
    EvaluationReport report;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = path + " row " + std::to_string(i + 2);
        ModelScore score;
        score.model = row[0];
        score.mape_pct = csv::parse_double(row[1], where + " mape_pct");
        score.se_pct = csv::parse_double(row[2], where + " se");
        score.n = static_cast<int>(csv::parse_double(row[3], where + " n"));
        report.rows.push_back(std::move(score));
    }
    return report;
}

/// Fixed-width table for standard output.
inline std::string render_report(const EvaluationReport& report) {
    std::ostringstream out;
    out << "holdout period: " << report.holdout.to_string() << "\n";
    char line[128];
    std::snprintf(line, sizeof(line), "%-8s %12s %10s %6s\n", "model", "mape_pct", "se", "n");
    out << line;
    for (const ModelScore& row : report.rows) {
        std::snprintf(line, sizeof(line), "%-8s %12s %10s %6d\n", row.model.c_str(),
                      format_percent(row.mape_pct).c_str(), format_percent(row.se_pct).c_str(),
                      row.n);
        out << line;
    }
    return out.str();
}

/// GeoJSON FeatureCollection with one feature per area: properties
/// {small_area_id, metric, value}, geometry joined from an optional external
/// GeoJSON keyed by properties.small_area_id (null where absent). Join misses
/// produce warnings, never failure.
inline std::vector<std::string> export_choropleth(const std::map<AreaId, double>& values,
                                                  const std::string& metric,
                                                  const std::string& out_path,
                                                  const std::string& geometry_path = "") {
    for (const auto& [q, v] : values)
        if (!std::isfinite(v))
            throw InvalidArgument("non-finite value for area '" + q + "'");
    std::map<AreaId, nlohmann::json> geometry;
    std::vector<std::string> warnings;
    if (!geometry_path.empty()) {
        std::ifstream in(geometry_path);
        if (!in) throw IoError("cannot open geometry file '" + geometry_path + "'");
        nlohmann::json geo;
        try {
            in >> geo;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("geometry file '" + geometry_path + "' is not valid JSON: " + e.what());
        }
        if (!geo.is_object() || geo.value("type", "") != "FeatureCollection" ||
            !geo.contains("features"))
            throw IoError("geometry file '" + geometry_path + "' is not a FeatureCollection");
        for (const auto& feature : geo["features"]) {
            if (!feature.contains("properties") || !feature["properties"].is_object()) continue;
            const auto& props = feature["properties"];
            if (!props.contains("small_area_id")) continue;
            geometry[props["small_area_id"].get<std::string>()] =
                feature.value("geometry", nlohmann::json());
        }
    }

    nlohmann::json features = nlohmann::json::array();
    for (const auto& [q, v] : values) {
        nlohmann::json feature;
        feature["type"] = "Feature";
        if (const auto it = geometry.find(q); it != geometry.end()) {
            feature["geometry"] = it->second;
        } else {
            feature["geometry"] = nullptr;
            if (!geometry_path.empty())
                warnings.push_back("no geometry for area '" + q + "'");
        }
        feature["properties"] = {{"small_area_id", q}, {"metric", metric}, {"value", v}};
        features.push_back(std::move(feature));
    }
    nlohmann::json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = std::move(features);
    if (!warnings.empty()) doc["warnings"] = warnings;
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write '" + out_path + "'");
    out << doc.dump(2) << "\n";
    out.close();
    if (!out) throw IoError("error writing '" + out_path + "'");
    return warnings;
}

} // namespace mfagl::harness
