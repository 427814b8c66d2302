#pragma once

#include <functional>
#include <ostream>
#include <string>

#include "mfagl/aggl.hpp"
#include "mfagl/checkpoint.hpp"
#include "mfagl/config.hpp"
#include "mfagl/harness.hpp"
#include "mfagl/panel_io.hpp"
#include "mfagl/synth.hpp"

namespace mfagl::pipeline {

/// On-disk layout every subcommand shares: one directory of CSVs.
struct DataPaths {
    std::string dir;
    std::string hierarchy() const { return dir + "/hierarchy.csv"; }
    std::string labels() const { return dir + "/labels.csv"; }
    std::string features() const { return dir + "/features.csv"; }
    std::string truth() const { return dir + "/truth.csv"; }
};

inline synth::SyntheticWorld run_simulate(const synth::WorldConfig& config,
                                          const std::string& out_dir) {
    synth::SyntheticWorld world = synth::generate_world(config);
    synth::write_world(out_dir, world);
    return world;
}

inline MixedFrequencyPanel load_data(const std::string& dir) {
    const DataPaths paths{dir};
    return load_panel(paths.hierarchy(), paths.labels(), paths.features());
}

inline aggl::MfAglModel run_train(const MixedFrequencyPanel& panel, const config::RunConfig& config,
                                  const std::string& checkpoint_path, std::ostream* log = nullptr) {
    const auto on_epoch = [&](int epoch, double loss) {
        if (log && (epoch % 50 == 0 || epoch == 1 || epoch == config.train.epochs))
            *log << "epoch " << epoch << " loss " << loss << "\n";
    };
    aggl::MfAglModel model = aggl::train(panel, config.train, on_epoch);
    if (!checkpoint_path.empty()) checkpoint::save_model(checkpoint_path, model);
    return model;
}

struct EvaluateOutputs {
    std::string report_csv;      // model,mape_pct,se,n
    std::string predictions_csv; // granular nowcasts; empty skips the write
};

inline harness::EvaluateResult run_evaluate(const MixedFrequencyPanel& panel,
                                            const config::RunConfig& config,
                                            const EvaluateOutputs& outputs,
                                            std::ostream* log = nullptr) {
    harness::EvaluateConfig eval;
    eval.train = config.train;
    eval.lag_order = config.lag_order;
    eval.rf = config.rf;
    eval.holdout = config.holdout;
    eval.ar_per_area = config.ar_per_area;
    const auto on_epoch = [&](int epoch, double loss) {
        if (log && (epoch % 50 == 0 || epoch == 1 || epoch == config.train.epochs))
            *log << "epoch " << epoch << " loss " << loss << "\n";
    };
    harness::EvaluateResult result = harness::evaluate_models(panel, eval, on_epoch);
    if (!outputs.report_csv.empty()) harness::write_report(outputs.report_csv, result.report);
    if (!outputs.predictions_csv.empty())
        aggl::write_predictions(outputs.predictions_csv, result.granular);
    return result;
}

} // namespace mfagl::pipeline
