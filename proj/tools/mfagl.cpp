// Command-line front end: simulate, extract-features, train, nowcast,
// evaluate, baseline, export-map. One key=value config file plus --set
// overrides; every run prints the resolved config and seed.
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfagl/mfagl.hpp"

namespace {

using namespace mfagl;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

config::RunConfig resolve_config(const CommonArgs& args) {
    config::RunConfig cfg;
    if (!args.config_path.empty()) cfg = config::load_config(args.config_path);
    for (const std::string& assignment : args.overrides) config::apply_assignment(cfg, assignment);
    std::cout << "resolved config:\n" << cfg.render_resolved();
    std::cout << "seed: " << cfg.train.seed << "\n";
    return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value config file");
    cmd->add_option("--set", args.overrides, "override one config key (key=value, repeatable)");
}

int cmd_simulate(const CommonArgs& common, const std::string& out_dir) {
    const config::RunConfig cfg = resolve_config(common);
    const synth::SyntheticWorld world = pipeline::run_simulate(cfg.world, out_dir);
    const auto& h = world.panel.hierarchy();
    std::cout << "wrote " << out_dir << ": " << h.large_areas().size() << " large areas, "
              << h.small_areas().size() << " small areas, "
              << world.panel.calendar().coarse_periods().size() << " months, "
              << world.panel.raw_features().size() << " feature rows\n";
    return 0;
}

int cmd_extract(const CommonArgs& common, const std::string& trajectories_path,
                const std::string& pois_path, const std::string& out_path,
                const std::string& visits_path) {
    const config::RunConfig cfg = resolve_config(common);
    const auto trajectories = geo::load_trajectories(trajectories_path);
    const auto pois = geo::load_pois(pois_path);
    const auto rows = geo::extract_rows(trajectories, pois, cfg.extraction);
    geo::write_geofeatures(out_path, rows, cfg.extraction.radius_ladder);
    std::cout << "wrote " << out_path << ": " << rows.size() << " rows from "
              << trajectories.size() << " users and " << pois.size() << " offices\n";
    if (!visits_path.empty()) {
        const geo::VisitClassifier classifier = geo::ThresholdClassifier{cfg.visit_min_inside};
        const auto counts = geo::daily_visit_counts(trajectories, pois, classifier, cfg.extraction);
        csv::Writer out(visits_path, {"date", "small_area_id", "visit_count"});
        std::map<std::pair<Date, std::string>, int> by_date;
        for (const auto& [key, count] : counts) by_date[{key.second, key.first}] = count;
        for (const auto& [key, count] : by_date)
            out.row({key.first.to_string(), key.second, std::to_string(count)});
        out.close();
        std::cout << "wrote " << visits_path << ": " << counts.size() << " office-days\n";
    }
    return 0;
}

int cmd_train(const CommonArgs& common, const std::string& data_dir,
              const std::string& checkpoint_path) {
    const config::RunConfig cfg = resolve_config(common);
    const MixedFrequencyPanel panel = pipeline::load_data(data_dir);
    pipeline::run_train(panel, cfg, checkpoint_path, &std::cout);
    std::cout << "wrote " << checkpoint_path << "\n";
    return 0;
}

int cmd_nowcast(const CommonArgs& common, const std::string& data_dir,
                const std::string& checkpoint_path, const std::string& as_of_text,
                const std::string& out_path) {
    const config::RunConfig cfg = resolve_config(common);
    const MixedFrequencyPanel panel = pipeline::load_data(data_dir);
    const aggl::MfAglModel model = checkpoint::load_model(checkpoint_path);
    const Date as_of = Date::parse(as_of_text);
    harness::ScheduleConfig schedule;
    schedule.lag_order = cfg.lag_order;
    schedule.release_lag_days = cfg.release_lag_days;
    schedule.rf = cfg.rf;
    const harness::ScheduleResult result = harness::schedule_run(panel, model, as_of, schedule);

    std::cout << "as of " << result.as_of.to_string() << ", target period "
              << result.target.to_string() << "\n";
    if (result.last_released)
        std::cout << "labels released through " << result.last_released->to_string() << "\n";
    if (!result.baselines_available)
        std::cout << "baselines unavailable: " << result.baselines_unavailable_reason << "\n";
    std::printf("%-12s %14s %14s %14s\n", "large_area", "mfagl", "ar", "rf");
    for (const auto& [p, value] : result.mfagl_aggregated) {
        const auto show = [&](const std::map<AreaId, double>& m) {
            return m.count(p) ? csv::format_double(m.at(p)) : std::string("-");
        };
        std::printf("%-12s %14s %14s %14s\n", p.c_str(), csv::format_double(value).c_str(),
                    show(result.ar).c_str(), show(result.rf).c_str());
    }

    if (!out_path.empty()) {
        std::vector<aggl::GranularPrediction> rows;
        for (const auto& [q, value] : result.mfagl_granular)
            rows.push_back({q, as_of, result.target, value});
        aggl::write_predictions(out_path, rows);
        std::cout << "wrote " << out_path << ": " << rows.size() << " small areas\n";
    }
    return 0;
}

int cmd_evaluate(const CommonArgs& common, const std::string& data_dir,
                 const std::string& report_path, const std::string& predictions_path,
                 bool baselines_only) {
    config::RunConfig cfg = resolve_config(common);
    const MixedFrequencyPanel panel = pipeline::load_data(data_dir);
    harness::EvaluateConfig eval;
    eval.train = cfg.train;
    eval.lag_order = cfg.lag_order;
    eval.rf = cfg.rf;
    eval.holdout = cfg.holdout;
    eval.ar_per_area = cfg.ar_per_area;
    eval.include_mfagl = !baselines_only;
    const auto on_epoch = [&](int epoch, double loss) {
        if (epoch % 50 == 0 || epoch == 1 || epoch == cfg.train.epochs)
            std::cout << "epoch " << epoch << " loss " << loss << "\n";
    };
    const harness::EvaluateResult result = harness::evaluate_models(panel, eval, on_epoch);
    std::cout << harness::render_report(result.report);
    if (!report_path.empty()) {
        harness::write_report(report_path, result.report);
        std::cout << "wrote " << report_path << "\n";
    }
    if (!predictions_path.empty()) {
        aggl::write_predictions(predictions_path, result.granular);
        std::cout << "wrote " << predictions_path << "\n";
    }
    return 0;
}

int cmd_export_map(const std::string& predictions_path, const std::string& period_text,
                   const std::string& metric, const std::string& geometry_path,
                   const std::string& out_path) {
    const auto predictions = aggl::load_predictions(predictions_path);
    std::optional<Period> wanted;
    if (!period_text.empty()) wanted = Period::parse(period_text);
    std::map<AreaId, double> values;
    std::set<Period> seen;
    for (const auto& row : predictions) {
        if (wanted && row.period != *wanted) continue;
        seen.insert(row.period);
        values[row.small_area] = row.value;
    }
    if (seen.size() > 1)
        throw InvalidArgument("predictions cover " + std::to_string(seen.size()) +
                              " periods; pick one with --period");
    const auto warnings = harness::export_choropleth(values, metric, out_path, geometry_path);
    for (const std::string& w : warnings) std::cout << "warning: " << w << "\n";
    std::cout << "wrote " << out_path << ": " << values.size() << " features\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixed-frequency aggregate learning toolkit"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string out_dir, trajectories_path, pois_path, out_path, visits_path;
    std::string data_dir, checkpoint_path, as_of_text, report_path, predictions_path;
    std::string period_text, metric = "nowcast", geometry_path;

    CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic world");
    add_common(simulate, common);
    simulate->add_option("--out", out_dir, "output directory")->required();

    CLI::App* extract = app.add_subcommand("extract-features", "GPS trajectories to visit features");
    add_common(extract, common);
    extract->add_option("--trajectories", trajectories_path, "user_id,timestamp,lat,lon CSV")
        ->required();
    extract->add_option("--pois", pois_path, "office_id,lat,lon,radius_m CSV")->required();
    extract->add_option("--out", out_path, "geofeature CSV to write")->required();
    extract->add_option("--visits", visits_path, "also write daily visit counts per office");

    CLI::App* train = app.add_subcommand("train", "fit the granular predictor");
    add_common(train, common);
    train->add_option("--data", data_dir, "directory with hierarchy/labels/features CSVs")
        ->required();
    train->add_option("--checkpoint", checkpoint_path, "checkpoint file to write")->required();

    CLI::App* nowcast = app.add_subcommand("nowcast", "real-time prediction at a date");
    add_common(nowcast, common);
    nowcast->add_option("--data", data_dir, "directory with hierarchy/labels/features CSVs")
        ->required();
    nowcast->add_option("--checkpoint", checkpoint_path, "trained checkpoint")->required();
    nowcast->add_option("--as-of", as_of_text, "prediction date YYYY-MM-DD")->required();
    nowcast->add_option("--out", out_path, "granular predictions CSV to write");

    CLI::App* evaluate = app.add_subcommand("evaluate", "holdout comparison of all models");
    add_common(evaluate, common);
    evaluate->add_option("--data", data_dir, "directory with hierarchy/labels/features CSVs")
        ->required();
    evaluate->add_option("--report", report_path, "report CSV to write");
    evaluate->add_option("--predictions", predictions_path, "granular predictions CSV to write");

    CLI::App* baseline = app.add_subcommand("baseline", "holdout comparison of AR and RF only");
    add_common(baseline, common);
    baseline->add_option("--data", data_dir, "directory with hierarchy/labels/features CSVs")
        ->required();
    baseline->add_option("--report", report_path, "report CSV to write");

    CLI::App* export_map = app.add_subcommand("export-map", "predictions to GeoJSON choropleth");
    export_map->add_option("--predictions", predictions_path, "granular predictions CSV")
        ->required();
    export_map->add_option("--period", period_text, "period to map when several are present");
    export_map->add_option("--metric", metric, "metric tag stored on each feature");
    export_map->add_option("--geometry", geometry_path, "GeoJSON with small_area_id properties");
    export_map->add_option("--out", out_path, "GeoJSON file to write")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(simulate)) return cmd_simulate(common, out_dir);
        if (app.got_subcommand(extract))
            return cmd_extract(common, trajectories_path, pois_path, out_path, visits_path);
        if (app.got_subcommand(train)) return cmd_train(common, data_dir, checkpoint_path);
        if (app.got_subcommand(nowcast))
            return cmd_nowcast(common, data_dir, checkpoint_path, as_of_text, out_path);
        if (app.got_subcommand(evaluate))
            return cmd_evaluate(common, data_dir, report_path, predictions_path, false);
        if (app.got_subcommand(baseline)) return cmd_evaluate(common, data_dir, report_path, "", true);
        if (app.got_subcommand(export_map))
            return cmd_export_map(predictions_path, period_text, metric, geometry_path, out_path);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
