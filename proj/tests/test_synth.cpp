// Synthetic world generator: aggregation identities that must hold bit-exact,
// seasonal and shock structure, determinism, and the truth scoring metrics.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mfagl/synth.hpp"
#include "support/stats.hpp"
#include "support/tmpdir.hpp"

using namespace mfagl;
using synth::WorldConfig;

namespace {

WorldConfig small_world() {
    WorldConfig config;
    config.n_large_areas = 2;
    config.children_per_large = 3;
    config.n_months = 14;
    config.start = Period(2020, 3);
    config.seed = 71;
    return config;
}

} // namespace

TEST_CASE("world config validation") {
    WorldConfig config;
    CHECK_NOTHROW(config.validate());
    config.n_months = 0;
    CHECK_THROWS_AS(config.validate(), InvalidArgument);
    config = {};
    config.base_level = 0.0;
    CHECK_THROWS_AS(config.validate(), InvalidArgument);
    config = {};
    config.base_spread = 1.0;
    CHECK_THROWS_AS(config.validate(), InvalidArgument);
    config = {};
    config.seasonal_amplitude = -0.1;
    CHECK_THROWS_AS(config.validate(), InvalidArgument);
    config = {};
    config.shock_magnitude = -1.0;
    CHECK_THROWS_AS(config.validate(), InvalidArgument);
    config = {};
    config.noise_sigma = -0.01;
    CHECK_THROWS_AS(config.validate(), InvalidArgument);
    config = {};
    config.shock_month = -1; // no shock is fine
    CHECK_NOTHROW(config.validate());
}

TEST_CASE("generated worlds have the advertised shape") {
    const auto world = synth::generate_world(small_world());
    const auto& h = world.panel.hierarchy();
    CHECK(h.large_areas() == std::vector<AreaId>{"P01", "P02"});
    REQUIRE(h.small_areas().size() == 6);
    CHECK(h.small_areas().front() == "P01-Q01");
    CHECK(h.small_areas().back() == "P02-Q03");
    CHECK(h.children("P02") == std::vector<AreaId>{"P02-Q01", "P02-Q02", "P02-Q03"});

    const auto& cal = world.panel.calendar();
    CHECK(cal.fine_ticks().front() == Date(2020, 3, 1));
    CHECK(cal.fine_ticks().back() == Date(2021, 4, 30));
    CHECK(world.panel.labeled_pairs().size() == 2 * 14);
    CHECK(world.truth.size() == 6 * 14);
    CHECK(validate_panel(world.panel).empty());

    // every (area, day) inside the span carries a feature
    std::size_t expected = 6 * cal.fine_ticks().size();
    CHECK(world.panel.raw_features().size() == expected);
}

TEST_CASE("labels are exactly the sum of their children's truth") {
    const auto world = synth::generate_world(small_world());
    for (const auto& [pair, label] : world.panel.raw_labels()) {
        double sum = 0.0;
        for (const AreaId& q : world.panel.hierarchy().children(pair.first))
            sum += world.truth.at({q, pair.second});
        CHECK(label == sum); // bit-exact by construction
    }
}

TEST_CASE("noise-free features sum to the truth exactly") {
    auto config = small_world();
    config.noise_sigma = 0.0;
    config.visits_per_applicant = 1.0;
    const auto world = synth::generate_world(config);
    for (const auto& [key, truth_value] : world.truth) {
        double sum = 0.0;
        for (const Date& tau : world.panel.calendar().ticks_in(key.second))
            sum += *world.panel.feature_at(key.first, tau);
        CHECK(sum == truth_value); // the dyadic grid keeps this exact

        // daily values sit on the 2^-20 grid
        const double daily = *world.panel.feature_at(key.first, key.second.first_day());
        const double scaled = daily * 1048576.0;
        CHECK(scaled == std::round(scaled));
    }
}

TEST_CASE("features scale with the visit ratio") {
    auto config = small_world();
    config.noise_sigma = 0.0;
    const auto one = synth::generate_world(config);
    config.visits_per_applicant = 3.0;
    const auto three = synth::generate_world(config);
    const Date tau(2020, 4, 7);
    CHECK(*three.panel.feature_at("P01-Q02", tau) ==
          3.0 * *one.panel.feature_at("P01-Q02", tau));
}

TEST_CASE("seasonality peaks in april and troughs in october") {
    auto config = small_world();
    config.n_months = 24;
    config.start = Period(2019, 1);
    config.shock_month = -1;
    config.seasonal_amplitude = 0.3;
    const auto world = synth::generate_world(config);
    // sin is +1 at month 4 and -1 at month 10
    const double april = world.truth.at({"P01-Q01", Period(2019, 4)});
    const double october = world.truth.at({"P01-Q01", Period(2019, 10)});
    const double january = world.truth.at({"P01-Q01", Period(2019, 1)});
    CHECK(april > january);
    CHECK(october < january);
    CHECK(april / october == Catch::Approx(1.3 / 0.7).epsilon(1e-3));
    // the next year repeats the level exactly up to quantization
    CHECK(world.truth.at({"P01-Q01", Period(2020, 4)}) == Catch::Approx(april).epsilon(1e-5));
}

TEST_CASE("the shock lifts every month from its start onward") {
    auto config = small_world();
    config.seasonal_amplitude = 0.0;
    config.shock_month = 6;
    config.shock_magnitude = 0.5;
    const auto world = synth::generate_world(config);
    const double before = world.truth.at({"P02-Q01", config.start.plus_months(5)});
    const double at = world.truth.at({"P02-Q01", config.start.plus_months(6)});
    const double after = world.truth.at({"P02-Q01", config.start.plus_months(9)});
    CHECK(at == Catch::Approx(1.5 * before).epsilon(1e-5));
    CHECK(after == Catch::Approx(1.5 * before).epsilon(1e-5));

    config.shock_month = -1;
    const auto flat = synth::generate_world(config);
    // adjacent months differ only by daily-scale quantization
    CHECK(flat.truth.at({"P02-Q01", config.start.plus_months(6)}) ==
          Catch::Approx(flat.truth.at({"P02-Q01", config.start.plus_months(5)})).epsilon(1e-6));
}

TEST_CASE("generation is deterministic per seed") {
    const auto a = synth::generate_world(small_world());
    const auto b = synth::generate_world(small_world());
    CHECK(a.panel == b.panel);
    CHECK(a.truth == b.truth);

    auto other = small_world();
    other.seed = 72;
    const auto c = synth::generate_world(other);
    CHECK_FALSE(a.panel == c.panel);
}

TEST_CASE("feature noise is multiplicative and truncated at zero") {
    auto config = small_world();
    config.noise_sigma = 0.0;
    const auto clean = synth::generate_world(config);
    config.noise_sigma = 5.0; // huge noise so truncation certainly fires
    const auto noisy = synth::generate_world(config);
    bool any_zero = false, any_above = false;
    for (const auto& [key, value] : noisy.panel.raw_features()) {
        CHECK(value >= 0.0);
        any_zero = any_zero || value == 0.0;
        any_above = any_above || value > *clean.panel.feature_at(key.first, key.second);
    }
    CHECK(any_zero);
    CHECK(any_above);
    // labels stay noise-free
    CHECK(noisy.panel.raw_labels() == clean.panel.raw_labels());
}

TEST_CASE("truth metrics match independent oracles") {
    const auto world = synth::generate_world(small_world());
    std::map<std::pair<AreaId, Period>, double> predictions;
    std::vector<double> t, p;
    Rng rng(73);
    for (const auto& [key, value] : world.truth) {
        const double pred = value * rng.uniform(0.8, 1.2);
        predictions[key] = pred;
        t.push_back(value);
        p.push_back(pred);
    }
    CHECK(synth::truth_error(world, predictions, synth::TruthMetric::Mape) ==
          Catch::Approx(oracle::mape_percent(t, p)).epsilon(1e-12));
    CHECK(synth::truth_error(world, predictions, synth::TruthMetric::Pearson) ==
          Catch::Approx(oracle::pearson(t, p)).epsilon(1e-12));

    // a perfect prediction scores zero error
    const auto& anchor = *world.truth.begin();
    CHECK(synth::truth_error(world, {{anchor.first, anchor.second}},
                             synth::TruthMetric::Mape) == 0.0);
}

TEST_CASE("truth scoring rejects unknown keys and degenerate inputs") {
    const auto world = synth::generate_world(small_world());
    CHECK_THROWS_AS(synth::truth_error(world, {}, synth::TruthMetric::Mape), InvalidArgument);
    CHECK_THROWS_AS(synth::truth_error(world, {{{"ghost", Period(2020, 3)}, 1.0}},
                                       synth::TruthMetric::Mape),
                    LookupError);
    std::map<std::pair<AreaId, Period>, double> constant;
    for (const auto& [key, value] : world.truth) constant[key] = 5.0;
    CHECK_THROWS_WITH(synth::truth_error(world, constant, synth::TruthMetric::Pearson),
                      Catch::Matchers::ContainsSubstring("predictions"));
}

TEST_CASE("truth csv round-trips exactly") {
    oracle::TmpDir dir("truth");
    const auto world = synth::generate_world(small_world());
    synth::write_truth(dir.file("truth.csv"), world.truth);
    const auto back = synth::load_truth(dir.file("truth.csv"));
    CHECK(back == world.truth);

    // duplicate rows are rejected
    {
        csv::Writer out(dir.file("dup.csv"), {"period", "small_area_id", "value"});
        out.row({"2020-01", "q", "1.5"});
        out.row({"2020-01", "q", "2.5"});
    }
    CHECK_THROWS_AS(synth::load_truth(dir.file("dup.csv")), IoError);
}

TEST_CASE("write_world lays down the full on-disk dataset") {
    oracle::TmpDir dir("world");
    const auto world = synth::generate_world(small_world());
    synth::write_world(dir.str(), world);
    const auto panel = load_panel(dir.file("hierarchy.csv"), dir.file("labels.csv"),
                                  dir.file("features.csv"));
    CHECK(panel.hierarchy() == world.panel.hierarchy());
    CHECK(panel.raw_labels() == world.panel.raw_labels());
    CHECK(panel.raw_features() == world.panel.raw_features());
    CHECK(synth::load_truth(dir.file("truth.csv")) == world.truth);
}
