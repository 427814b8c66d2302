#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mfagl/csv.hpp"
#include "mfagl/date.hpp"
#include "mfagl/error.hpp"
#include "mfagl/panel_io.hpp"
#include "mfagl/regions.hpp"
#include "mfagl/rng.hpp"

namespace mfagl::synth {

struct WorldConfig {
    int n_large_areas = 3;
    int children_per_large = 4;
    int n_months = 24;
    Period start{2019, 1};
    std::uint64_t seed = 0;
    // latent dynamics
    double base_level = 100.0;     // mean monthly level per small area
    double base_spread = 0.5;      // relative heterogeneity across areas, in [0, 1)
    double seasonal_amplitude = 0.3;
    int shock_month = 18;          // month index where the step shock starts; -1 disables
    double shock_magnitude = 0.5;  // level multiplier becomes (1 + magnitude)
    // feature model
    double visits_per_applicant = 1.0;
    double noise_sigma = 0.05;     // multiplicative observation noise on features

    void validate() const {
        if (n_large_areas < 1 || children_per_large < 1 || n_months < 1)
            throw InvalidArgument("world counts must be at least 1");
        if (!(base_level > 0.0)) throw InvalidArgument("base_level must be positive");
        if (!(base_spread >= 0.0 && base_spread < 1.0))
            throw InvalidArgument("base_spread must lie in [0, 1)");
        if (!(seasonal_amplitude >= 0.0 && seasonal_amplitude < 1.0))
            throw InvalidArgument("seasonal_amplitude must lie in [0, 1)");
        if (!(shock_magnitude > -1.0)) throw InvalidArgument("shock_magnitude must exceed -1");
        if (!(visits_per_applicant > 0.0))
            throw InvalidArgument("visits_per_applicant must be positive");
        if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be non-negative");
    }
};

/// A generated panel plus the latent granular monthly truth the labels were
/// aggregated from.
struct SyntheticWorld {
    MixedFrequencyPanel panel;
    std::map<std::pair<AreaId, Period>, double> truth;
    WorldConfig config;
};

namespace detail {

/// Snaps to the 2^-20 grid so that daily * days_in(month) and sums across
/// children stay exact in double arithmetic.
inline double quantize(double v) {
    const double grid = 1048576.0; // 2^20
    return std::round(v * grid) / grid;
}

inline std::string padded(const char* prefix, int i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s%02d", prefix, i);
    return buf;
}

} // namespace detail

/// Latent monthly truth y_t^q = base_q * seasonal(t) * shock(t), quantized at
/// the daily scale so every aggregation identity holds bit-exactly. Daily
/// features are the daily share of the truth times the visit ratio, with
/// multiplicative noise, truncated at zero. Labels carry no noise.
inline SyntheticWorld generate_world(const WorldConfig& config) {
    config.validate();
    Rng rng(config.seed);

    std::map<AreaId, AreaId> parent;
    std::vector<AreaId> smalls;
    for (int p = 1; p <= config.n_large_areas; ++p) {
        const AreaId large = detail::padded("P", p);
        for (int c = 1; c <= config.children_per_large; ++c) {
            const AreaId small = large + "-" + detail::padded("Q", c);
            parent[small] = large;
            smalls.push_back(small);
        }
    }
    RegionHierarchy hierarchy(std::move(parent));

    std::map<AreaId, double> base;
    for (const AreaId& q : hierarchy.small_areas())
        base[q] = config.base_level * (1.0 + config.base_spread * rng.uniform(-1.0, 1.0));

    const Period last = config.start.plus_months(config.n_months - 1);
    FrequencyCalendar calendar =
        FrequencyCalendar::daily(config.start.first_day(), last.last_day());

    std::map<std::pair<AreaId, Period>, double> truth;
    MixedFrequencyPanel::FeatureMap features;
    for (const AreaId& q : hierarchy.small_areas()) {
        for (int m = 0; m < config.n_months; ++m) {
            const Period t = config.start.plus_months(m);
            const double seasonal =
                1.0 + config.seasonal_amplitude *
                          std::sin(2.0 * std::numbers::pi * (t.month() - 1) / 12.0);
            const double shock =
                (config.shock_month >= 0 && m >= config.shock_month) ? 1.0 + config.shock_magnitude
                                                                     : 1.0;
            const int days = t.days_in();
            const double daily = detail::quantize(base[q] * seasonal * shock / days);
            truth[{q, t}] = daily * days;
            for (const Date& tau : calendar.ticks_in(t)) {
                double x = daily * config.visits_per_applicant;
                if (config.noise_sigma > 0.0) x *= 1.0 + config.noise_sigma * rng.normal();
                features[{q, tau}] = std::max(0.0, x);
            }
        }
    }

    MixedFrequencyPanel::LabelMap labels;
    for (const AreaId& p : hierarchy.large_areas()) {
        for (int m = 0; m < config.n_months; ++m) {
            const Period t = config.start.plus_months(m);
            double label = 0.0;
            for (const AreaId& q : hierarchy.children(p)) label += truth.at({q, t});
            labels[{p, t}] = label;
        }
    }

    SyntheticWorld world{
        MixedFrequencyPanel(std::move(hierarchy), std::move(calendar), std::move(features),
                            std::move(labels)),
        std::move(truth), config};
    return world;
}

enum class TruthMetric { Mape, Pearson };

/// Scores predictions against the latent truth over the prediction keys.
/// MAPE is returned in percent.
inline double truth_error(const SyntheticWorld& world,
                          const std::map<std::pair<AreaId, Period>, double>& predictions,
                          TruthMetric metric) {
    if (predictions.empty()) throw InvalidArgument("no predictions to score");
    std::vector<double> t, p;
    for (const auto& [key, value] : predictions) {
        const auto it = world.truth.find(key);
        if (it == world.truth.end())
            throw LookupError("no truth for (" + key.first + ", " + key.second.to_string() + ")");
        t.push_back(it->second);
        p.push_back(value);
    }
    const auto n = static_cast<double>(t.size());
    if (metric == TruthMetric::Mape) {
        double sum = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] == 0.0) throw InvalidArgument("truth value is zero; MAPE undefined");
            sum += std::abs(t[i] - p[i]) / std::abs(t[i]);
        }
        return sum / n * 100.0;
    }
    double mt = 0.0, mp = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        mt += t[i];
        mp += p[i];
    }
    mt /= n;
    mp /= n;
    double stt = 0.0, spp = 0.0, stp = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - mt) * (t[i] - mt);
        spp += (p[i] - mp) * (p[i] - mp);
        stp += (t[i] - mt) * (p[i] - mp);
    }
    if (stt == 0.0 || spp == 0.0)
        throw InvalidArgument(std::string("correlation undefined: zero variance in ") +
                              (stt == 0.0 ? "truth" : "predictions"));
    return stp / std::sqrt(stt * spp);
}

/// truth.csv: period,small_area_id,value.
inline void write_truth(const std::string& path,
                        const std::map<std::pair<AreaId, Period>, double>& truth) {
    csv::Writer out(path, {"period", "small_area_id", "value"});
    for (const auto& [key, value] : truth)
        out.row({key.second.to_string(), key.first, csv::format_double(value)});
    out.close();
}

inline std::map<std::pair<AreaId, Period>, double> load_truth(const std::string& path) {
    const csv::Table table = csv::Table::read(path, {"period", "small_area_id", "value"});
    std::map<std::pair<AreaId, Period>, double> truth;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        const std::string where = path + " row " + std::to_string(i + 2);
        const auto key = std::make_pair(row[1], Period::parse(row[0]));
        if (truth.count(key))
            throw IoError(where + ": duplicate truth for (" + row[1] + ", " + row[0] + ")");
        truth[key] = csv::parse_double(row[2], where + " value");
    }
    return truth;
}

/// Writes hierarchy.csv, labels.csv, features.csv, and truth.csv into dir,
/// creating the directory when needed.
inline void write_world(const std::string& dir, const SyntheticWorld& world) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
    write_hierarchy(dir + "/hierarchy.csv", world.panel.hierarchy());
    write_labels(dir + "/labels.csv", world.panel.raw_labels());
    write_features(dir + "/features.csv", world.panel.raw_features());
    write_truth(dir + "/truth.csv", world.truth);
}

} // namespace mfagl::synth
