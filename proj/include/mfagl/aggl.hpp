#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mfagl/csv.hpp"
#include "mfagl/date.hpp"
#include "mfagl/error.hpp"
#include "mfagl/netcore.hpp"
#include "mfagl/regions.hpp"
#include "mfagl/rng.hpp"

namespace mfagl::aggl {

/// Weighted sum of child predictions inside p.
inline double aggregate(const std::map<AreaId, double>& predictions,
                        const RegionHierarchy& hierarchy, const AreaId& p) {
    double sum = 0.0;
    for (const AreaId& q : hierarchy.children(p)) {
        const auto it = predictions.find(q);
        if (it == predictions.end())
            throw LookupError("no prediction for child area '" + q + "' of '" + p + "'");
        sum += hierarchy.weight(q) * it->second;
    }
    return sum;
}

struct TrainConfig {
    int lag_days = 31;
    int hidden_size = 32;
    std::vector<int> mlp_hidden = {32};
    int epochs = 600;
    int batch_size = 1;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    net::OutputTransform output = net::OutputTransform::Softplus;

    void validate() const {
        if (lag_days < 1) throw InvalidArgument("lag_days must be positive");
        if (hidden_size < 1) throw InvalidArgument("hidden_size must be positive");
        if (epochs < 0) throw InvalidArgument("epochs must be non-negative");
        if (batch_size != 1) throw InvalidArgument("only batch_size 1 is supported");
        if (!(lr > 0.0)) throw InvalidArgument("lr must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw InvalidArgument("beta1/beta2 must lie in [0,1)");
    }
};

/// A trained granular predictor plus everything needed to encode its inputs.
struct MfAglModel {
    net::ModelParams params;
    Vocabulary vocab;
    RegionHierarchy hierarchy;
    TrainConfig config;
    std::vector<double> epoch_losses; // running per-step squared residuals, one entry per epoch
};

struct GranularPrediction {
    AreaId small_area;
    Date as_of;
    Period period;
    double value = 0.0;
};

/// Loss value together with the number of squared-residual terms.
struct LossDetail {
    double value = 0.0;
    std::int64_t terms = 0;
};

namespace detail {

/// Lag windows and dummy blocks for every (small area, tick), one column per
/// pair, column index q * n_ticks + tau.
struct EncodedPanel {
    Eigen::MatrixXd lags;    // lag_days x (nQ * nT)
    Eigen::MatrixXd dummies; // dummy_dim x (nQ * nT)
    int n_ticks = 0;

    static EncodedPanel build(const MixedFrequencyPanel& panel, const Vocabulary& vocab,
                              int lag_days) {
        const auto& smalls = panel.hierarchy().small_areas();
        const auto& ticks = panel.calendar().fine_ticks();
        EncodedPanel e;
        e.n_ticks = static_cast<int>(ticks.size());
        e.lags.resize(lag_days, static_cast<Eigen::Index>(smalls.size() * ticks.size()));
        e.dummies.resize(vocab.dummy_dim(),
                         static_cast<Eigen::Index>(smalls.size() * ticks.size()));
        for (std::size_t qi = 0; qi < smalls.size(); ++qi) {
            for (std::size_t ti = 0; ti < ticks.size(); ++ti) {
                const FeatureWindow w =
                    build_feature_window(panel, smalls[qi], ticks[ti], lag_days, vocab);
                const Eigen::Index col = static_cast<Eigen::Index>(qi * ticks.size() + ti);
                e.lags.col(col) = w.visit_lags;
                e.dummies.col(col) = w.dummies();
            }
        }
        return e;
    }

    Eigen::Index col(int q_index, int tick_index) const {
        return static_cast<Eigen::Index>(q_index) * n_ticks + tick_index;
    }
};

} // namespace detail

/// Mixed-frequency aggregate squared error: every labeled (p, t) is revisited
/// once per fine tick in t against the aggregated granular predictions.
inline LossDetail loss_detail(const MixedFrequencyPanel& panel, const MfAglModel& model) {
    const auto labeled = panel.labeled_pairs();
    if (labeled.empty()) throw InvalidArgument("panel has no labeled (area, period) pairs");
    net::ForwardTape tape;
    LossDetail out;
    for (const auto& [p, period] : labeled) {
        const double y = *panel.label_at(p, period);
        for (const Date& tau : panel.calendar().ticks_in(period)) {
            double agg = 0.0;
            for (const AreaId& q : panel.hierarchy().children(p)) {
                const FeatureWindow w =
                    build_feature_window(panel, q, tau, model.config.lag_days, model.vocab);
                agg += panel.hierarchy().weight(q) *
                       net::forward(model.params, w.visit_lags, w.dummies(), tape);
            }
            const double r = y - agg;
            out.value += r * r;
            out.terms += 1;
        }
    }
    return out;
}

inline double loss(const MixedFrequencyPanel& panel, const MfAglModel& model) {
    return loss_detail(panel, model).value;
}

/// Adam on the aggregate loss, batch size 1, one (p, t, tau) triple per step,
/// seeded shuffle each epoch. Aborts with the offending epoch and sample on a
/// non-finite residual.
inline MfAglModel train(const MixedFrequencyPanel& panel, const TrainConfig& config,
                        const std::function<void(int, double)>& on_epoch = {}) {
    config.validate();
    if (const auto violations = validate_panel(panel); !violations.empty())
        throw InvalidArgument("panel fails validation: " + violations.front());
    const auto labeled = panel.labeled_pairs();
    if (labeled.empty()) throw InvalidArgument("panel has no labeled (area, period) pairs");

    MfAglModel model;
    model.vocab = panel.vocabulary();
    model.hierarchy = panel.hierarchy();
    model.config = config;
    Rng root(config.seed);
    Rng init_rng = root.derive(0);
    Rng shuffle_rng = root.derive(1);
    model.params = net::init_model(config.hidden_size, model.vocab.dummy_dim(),
                                   config.mlp_hidden, config.output, init_rng);
    if (config.epochs == 0) return model;

    const detail::EncodedPanel encoded =
        detail::EncodedPanel::build(panel, model.vocab, config.lag_days);
    const auto& calendar = panel.calendar();
    const auto& hierarchy = panel.hierarchy();

    // One training sample per (p, t, tau); labels fetched once, through the
    // observable accessor.
    struct Sample {
        int pair;       // index into `labeled`
        int tick;       // global tick index
    };
    std::vector<double> label_of(labeled.size());
    std::vector<std::vector<std::pair<int, double>>> children_of(labeled.size()); // (q idx, weight)
    std::vector<Sample> samples;
    for (std::size_t k = 0; k < labeled.size(); ++k) {
        const auto& [p, period] = labeled[k];
        label_of[k] = *panel.label_at(p, period);
        for (const AreaId& q : hierarchy.children(p))
            children_of[k].push_back({model.vocab.small_index(q), hierarchy.weight(q)});
        for (const Date& tau : calendar.ticks_in(period))
            samples.push_back({static_cast<int>(k), calendar.tick_index(tau)});
    }

    net::AdamState adam = net::AdamState::for_params(model.params);
    const net::AdamConfig adam_cfg{config.lr, config.beta1, config.beta2, config.eps};
    net::Gradient grad = net::zero_like(model.params);
    std::vector<net::ForwardTape> tapes;
    std::vector<double> preds;
    model.epoch_losses.reserve(static_cast<std::size_t>(config.epochs));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(samples);
        double epoch_loss = 0.0;
        for (const Sample& s : samples) {
            const auto& kids = children_of[static_cast<std::size_t>(s.pair)];
            if (tapes.size() < kids.size()) tapes.resize(kids.size());
            preds.resize(kids.size());
            double agg = 0.0;
            for (std::size_t k = 0; k < kids.size(); ++k) {
                const Eigen::Index col = encoded.col(kids[k].first, s.tick);
                preds[k] = net::forward(model.params, encoded.lags.col(col),
                                        encoded.dummies.col(col), tapes[k]);
                agg += kids[k].second * preds[k];
            }
            const double r = label_of[static_cast<std::size_t>(s.pair)] - agg;
            if (!std::isfinite(r)) {
                const auto& [p, period] = labeled[static_cast<std::size_t>(s.pair)];
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                   " on sample (" + p + ", " + period.to_string() + ", " +
                                   calendar.fine_ticks()[static_cast<std::size_t>(s.tick)].to_string() +
                                   ")");
            }
            epoch_loss += r * r;
            net::set_zero(grad);
            for (std::size_t k = 0; k < kids.size(); ++k)
                net::backward(model.params, tapes[k], -2.0 * kids[k].second * r, grad);
            net::adam_step(adam, model.params, grad, adam_cfg);
        }
        model.epoch_losses.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch + 1, epoch_loss);
    }
    return model;
}

/// Nowcast for one small area as of one day; uses only features, no label.
inline GranularPrediction predict_granular(const MfAglModel& model,
                                           const MixedFrequencyPanel& panel, const AreaId& q,
                                           const Date& tau) {
    const FeatureWindow w = build_feature_window(panel, q, tau, model.config.lag_days, model.vocab);
    net::ForwardTape tape;
    GranularPrediction out;
    out.small_area = q;
    out.as_of = tau;
    out.period = Period::of(tau);
    out.value = net::forward(model.params, w.visit_lags, w.dummies(), tape);
    return out;
}

/// Relative change of the tau nowcast against the prediction for the same
/// date one year earlier, both from the same checkpoint.
inline double year_over_year(const MfAglModel& model, const MixedFrequencyPanel& panel,
                             const AreaId& q, const Date& tau) {
    const Date prior = tau.minus_one_year();
    if (!window_has_data(panel, q, tau, model.config.lag_days))
        throw LookupError("no features around " + tau.to_string() + " for '" + q + "'");
    if (!window_has_data(panel, q, prior, model.config.lag_days))
        throw LookupError("no prior-year features around " + prior.to_string() + " for '" + q +
                          "'");
    const double now = predict_granular(model, panel, q, tau).value;
    const double then = predict_granular(model, panel, q, prior).value;
    return now / then - 1.0;
}

inline void write_predictions(const std::string& path,
                              const std::vector<GranularPrediction>& predictions) {
    csv::Writer out(path, {"as_of_date", "small_area_id", "period", "predicted_value"});
    for (const GranularPrediction& g : predictions)
        out.row({g.as_of.to_string(), g.small_area, g.period.to_string(),
                 csv::format_double(g.value)});
    out.close();
}

inline std::vector<GranularPrediction> load_predictions(const std::string& path) {
    const csv::Table table =
        csv::Table::read(path, {"as_of_date", "small_area_id", "period", "predicted_value"});
    std::vector<GranularPrediction> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        GranularPrediction g;
        g.as_of = Date::parse(row[0]);
        g.small_area = row[1];
        g.period = Period::parse(row[2]);
        g.value = csv::parse_double(row[3], path + " row " + std::to_string(i + 2));
        out.push_back(std::move(g));
    }
    return out;
}

} // namespace mfagl::aggl
