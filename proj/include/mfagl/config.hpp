#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mfagl/aggl.hpp"
#include "mfagl/baselines.hpp"
#include "mfagl/csv.hpp"
#include "mfagl/date.hpp"
#include "mfagl/error.hpp"
#include "mfagl/geofeatures.hpp"
#include "mfagl/synth.hpp"

namespace mfagl::config {

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline long long parse_int(const std::string& value, const std::string& key) {
    long long out = 0;
    const auto* first = value.data();
    const auto* last = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last)
        throw InvalidArgument("config key '" + key + "': '" + value + "' is not an integer");
    return out;
}

inline double parse_real(const std::string& value, const std::string& key) {
    return csv::parse_double(value, "config key '" + key + "'");
}

inline bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw InvalidArgument("config key '" + key + "': '" + value + "' is not true/false");
}

inline std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
    std::vector<int> out;
    std::stringstream stream(value);
    std::string item;
    while (std::getline(stream, item, ','))
        out.push_back(static_cast<int>(parse_int(trim(item), key)));
    if (out.empty()) throw InvalidArgument("config key '" + key + "' needs at least one value");
    return out;
}

} // namespace detail

/// One flat key-value configuration shared by every subcommand. Unknown keys
/// are rejected so typos fail loudly.
struct RunConfig {
    aggl::TrainConfig train;
    int lag_order = 11;
    baselines::RfConfig rf;
    int release_lag_days = 0;
    std::optional<Period> holdout;
    bool ar_per_area = false;
    synth::WorldConfig world;
    geo::ExtractionConfig extraction;
    int visit_min_inside = 3; // threshold classifier: >= this many points in the building

    void set(const std::string& key, const std::string& value) {
        using namespace detail;
        if (key == "lag_days") train.lag_days = static_cast<int>(parse_int(value, key));
        else if (key == "hidden_size") train.hidden_size = static_cast<int>(parse_int(value, key));
        else if (key == "mlp_hidden") train.mlp_hidden = parse_int_list(value, key);
        else if (key == "epochs") train.epochs = static_cast<int>(parse_int(value, key));
        else if (key == "batch_size") train.batch_size = static_cast<int>(parse_int(value, key));
        else if (key == "lr") train.lr = parse_real(value, key);
        else if (key == "beta1") train.beta1 = parse_real(value, key);
        else if (key == "beta2") train.beta2 = parse_real(value, key);
        else if (key == "eps") train.eps = parse_real(value, key);
        else if (key == "seed") {
            const auto s = static_cast<std::uint64_t>(parse_int(value, key));
            train.seed = s;
            rf.seed = s;
            world.seed = s;
        } else if (key == "output") {
            if (value == "softplus") train.output = net::OutputTransform::Softplus;
            else if (value == "identity") train.output = net::OutputTransform::Identity;
            else throw InvalidArgument("config key 'output': expected softplus or identity, got '" +
                                       value + "'");
        } else if (key == "lag_order") lag_order = static_cast<int>(parse_int(value, key));
        else if (key == "rf.n_trees") rf.n_trees = static_cast<int>(parse_int(value, key));
        else if (key == "rf.max_depth") rf.max_depth = static_cast<int>(parse_int(value, key));
        else if (key == "rf.min_leaf") rf.min_leaf = static_cast<int>(parse_int(value, key));
        else if (key == "rf.mtry") rf.mtry = static_cast<int>(parse_int(value, key));
        else if (key == "release_lag_days") release_lag_days = static_cast<int>(parse_int(value, key));
        else if (key == "holdout") holdout = Period::parse(value);
        else if (key == "ar_per_area") ar_per_area = parse_bool(value, key);
        else if (key == "synth.n_large_areas") world.n_large_areas = static_cast<int>(parse_int(value, key));
        else if (key == "synth.children_per_large") world.children_per_large = static_cast<int>(parse_int(value, key));
        else if (key == "synth.n_months") world.n_months = static_cast<int>(parse_int(value, key));
        else if (key == "synth.start") world.start = Period::parse(value);
        else if (key == "synth.base_level") world.base_level = parse_real(value, key);
        else if (key == "synth.base_spread") world.base_spread = parse_real(value, key);
        else if (key == "synth.seasonal_amplitude") world.seasonal_amplitude = parse_real(value, key);
        else if (key == "synth.shock_month") world.shock_month = static_cast<int>(parse_int(value, key));
        else if (key == "synth.shock_magnitude") world.shock_magnitude = parse_real(value, key);
        else if (key == "synth.visits_per_applicant") world.visits_per_applicant = parse_real(value, key);
        else if (key == "synth.noise_sigma") world.noise_sigma = parse_real(value, key);
        else if (key == "geo.stay_dist_m") extraction.stay_dist_m = parse_real(value, key);
        else if (key == "geo.stay_time_s") extraction.stay_time_s = parse_real(value, key);
        else if (key == "geo.visit_min_inside") visit_min_inside = static_cast<int>(parse_int(value, key));
        else throw InvalidArgument("unknown config key '" + key + "'");
    }

    /// Every key with its effective value, for the resolved-config printout.
    std::map<std::string, std::string> resolved() const {
        std::map<std::string, std::string> out;
        out["lag_days"] = std::to_string(train.lag_days);
        out["hidden_size"] = std::to_string(train.hidden_size);
        std::string hidden;
        for (std::size_t i = 0; i < train.mlp_hidden.size(); ++i)
            hidden += (i ? "," : "") + std::to_string(train.mlp_hidden[i]);
        out["mlp_hidden"] = hidden;
        out["epochs"] = std::to_string(train.epochs);
        out["batch_size"] = std::to_string(train.batch_size);
        out["lr"] = csv::format_double(train.lr);
        out["beta1"] = csv::format_double(train.beta1);
        out["beta2"] = csv::format_double(train.beta2);
        out["eps"] = csv::format_double(train.eps);
        out["seed"] = std::to_string(train.seed);
        out["output"] = train.output == net::OutputTransform::Softplus ? "softplus" : "identity";
        out["lag_order"] = std::to_string(lag_order);
        out["rf.n_trees"] = std::to_string(rf.n_trees);
        out["rf.max_depth"] = std::to_string(rf.max_depth);
        out["rf.min_leaf"] = std::to_string(rf.min_leaf);
        out["rf.mtry"] = std::to_string(rf.mtry);
        out["release_lag_days"] = std::to_string(release_lag_days);
        out["holdout"] = holdout ? holdout->to_string() : "auto";
        out["ar_per_area"] = ar_per_area ? "true" : "false";
        out["synth.n_large_areas"] = std::to_string(world.n_large_areas);
        out["synth.children_per_large"] = std::to_string(world.children_per_large);
        out["synth.n_months"] = std::to_string(world.n_months);
        out["synth.start"] = world.start.to_string();
        out["synth.base_level"] = csv::format_double(world.base_level);
        out["synth.base_spread"] = csv::format_double(world.base_spread);
        out["synth.seasonal_amplitude"] = csv::format_double(world.seasonal_amplitude);
        out["synth.shock_month"] = std::to_string(world.shock_month);
        out["synth.shock_magnitude"] = csv::format_double(world.shock_magnitude);
        out["synth.visits_per_applicant"] = csv::format_double(world.visits_per_applicant);
        out["synth.noise_sigma"] = csv::format_double(world.noise_sigma);
        out["geo.stay_dist_m"] = csv::format_double(extraction.stay_dist_m);
        out["geo.stay_time_s"] = csv::format_double(extraction.stay_time_s);
        out["geo.visit_min_inside"] = std::to_string(visit_min_inside);
        return out;
    }

    std::string render_resolved() const {
        std::string out;
        for (const auto& [key, value] : resolved()) out += key + "=" + value + "\n";
        return out;
    }
};

/// Parses one `key=value` assignment (flag override syntax).
inline void apply_assignment(RunConfig& config, const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos)
        throw InvalidArgument("expected key=value, got '" + text + "'");
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    if (key.empty()) throw InvalidArgument("empty key in '" + text + "'");
    config.set(key, value);
}

/// key=value lines; `#` starts a comment; blank lines ignored.
inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        const std::string text = detail::trim(line);
        if (text.empty()) continue;
        try {
            apply_assignment(base, text);
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return base;
}

} // namespace mfagl::config
