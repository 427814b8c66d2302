// Autoregression and random-forest baselines: exact recovery on noise-free
// series, deterministic forests, and the lag/one-hot row layout.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "mfagl/baselines.hpp"
#include "mfagl/rng.hpp"
#include "support/golden.hpp"

using namespace mfagl;
using baselines::ArModel;
using baselines::LabelMap;

namespace {

/// Noise-free AR(2) labels y_t = c + a1*y_{t-1} + a2*y_{t-2} per area.
LabelMap ar2_labels(double c, double a1, double a2,
                    const std::vector<std::pair<double, double>>& initials, int months) {
    LabelMap labels;
    for (std::size_t i = 0; i < initials.size(); ++i) {
        const AreaId p = "P" + std::to_string(i + 1);
        double prev2 = initials[i].first;
        double prev1 = initials[i].second;
        labels[{p, Period(2020, 1)}] = prev2;
        labels[{p, Period(2020, 2)}] = prev1;
        for (int m = 2; m < months; ++m) {
            const double y = c + a1 * prev1 + a2 * prev2;
            labels[{p, Period(2020, 1).plus_months(m)}] = y;
            prev2 = prev1;
            prev1 = y;
        }
    }
    return labels;
}

double training_mse(const baselines::RandomForest& forest, const Eigen::MatrixXd& x,
                    const Eigen::VectorXd& y) {
    double sse = 0.0;
    for (Eigen::Index r = 0; r < y.size(); ++r) {
        const double e = baselines::predict_rf(forest, x.row(r).transpose()) - y[r];
        sse += e * e;
    }
    return sse / static_cast<double>(y.size());
}

/// Piecewise-linear target over random features; deterministic per seed.
void step_dataset(Eigen::MatrixXd& x, Eigen::VectorXd& y, int n, int d, std::uint64_t seed) {
    Rng rng(seed);
    x.resize(n, d);
    y.resize(n);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < d; ++c) x(r, c) = rng.uniform(0.0, 1.0);
        y[r] = 3.0 * x(r, 0) + (x(r, 1) > 0.5 ? 2.0 : 0.0);
    }
}

} // namespace

TEST_CASE("ar prediction is intercept plus lag dot product") {
    ArModel model;
    model.intercept = 1.0;
    model.coefficients = Eigen::Vector2d(0.5, -0.25);
    // chronological input, newest last; coefficient 0 pairs with the newest lag
    CHECK(baselines::predict_ar(model, {2.0, 4.0}) == 1.0 + 0.5 * 4.0 - 0.25 * 2.0);
    CHECK_THROWS_AS(baselines::predict_ar(model, {1.0}), InvalidArgument);
    CHECK_THROWS_AS(baselines::predict_ar(model, {1.0, 2.0, 3.0}), InvalidArgument);
}

TEST_CASE("pooled least squares recovers a noise-free ar(2) exactly") {
    const auto labels =
        ar2_labels(2.0, 0.6, -0.3, {{9.0, 1.5}, {0.5, 7.0}, {4.0, 12.0}}, 10);
    const auto model = baselines::fit_ar(labels, 2);
    REQUIRE(model.lag_order() == 2);
    CHECK(model.intercept == Catch::Approx(2.0).margin(1e-7));
    CHECK(model.coefficients[0] == Catch::Approx(0.6).margin(1e-7));
    CHECK(model.coefficients[1] == Catch::Approx(-0.3).margin(1e-7));

    // the fitted model continues each series to machine-level accuracy
    const double y8 = labels.at({"P1", Period(2020, 9)});
    const double y9 = labels.at({"P1", Period(2020, 10)});
    const double y10 = 2.0 + 0.6 * y9 - 0.3 * y8;
    CHECK(baselines::predict_ar(model, {y8, y9}) == Catch::Approx(y10).margin(1e-7));
}

TEST_CASE("fit_ar reports the longest available run when history is short") {
    LabelMap labels;
    for (int m = 0; m < 3; ++m) labels[{"P1", Period(2021, 1).plus_months(m)}] = 1.0 + m;
    CHECK_THROWS_WITH(baselines::fit_ar(labels, 11),
                      Catch::Matchers::ContainsSubstring("12") &&
                          Catch::Matchers::ContainsSubstring("longest run is 3"));
    CHECK_THROWS_AS(baselines::fit_ar(labels, 0), InvalidArgument);
}

TEST_CASE("per-area fits separate the dynamics of each area") {
    LabelMap labels;
    double a = 10.0, b = 10.0;
    for (int m = 0; m < 10; ++m) {
        labels[{"A", Period(2020, 1).plus_months(m)}] = a;
        labels[{"B", Period(2020, 1).plus_months(m)}] = b;
        a *= 0.9;
        b *= 0.5;
    }
    const auto models = baselines::fit_ar_per_area(labels, 1);
    REQUIRE(models.size() == 2);
    CHECK(models.at("A").coefficients[0] == Catch::Approx(0.9).margin(1e-6));
    CHECK(models.at("A").intercept == Catch::Approx(0.0).margin(1e-6));
    CHECK(models.at("B").coefficients[0] == Catch::Approx(0.5).margin(1e-6));

    labels[{"C", Period(2020, 1)}] = 3.0; // one label: no usable row
    CHECK_THROWS_WITH(baselines::fit_ar_per_area(labels, 1),
                      Catch::Matchers::ContainsSubstring("area 'C' lacks 2"));
}

TEST_CASE("multi-step forecasts feed predictions back as lags") {
    ArModel one;
    one.intercept = 1.0;
    one.coefficients = Eigen::VectorXd::Constant(1, 0.5);
    CHECK(baselines::forecast_ar(one, {4.0}, 3) == std::vector<double>{3.0, 2.5, 2.25});

    ArModel two;
    two.intercept = 1.0;
    two.coefficients = Eigen::Vector2d(0.5, 0.25);
    CHECK(baselines::forecast_ar(two, {2.0, 4.0}, 2) == std::vector<double>{3.5, 3.75});

    CHECK(baselines::forecast_ar(one, {4.0}, 0).empty());
    CHECK_THROWS_AS(baselines::forecast_ar(two, {4.0}, 1), InvalidArgument);
}

TEST_CASE("forest config validation") {
    baselines::RfConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.n_trees = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.max_depth = -1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.min_leaf = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.max_depth = 0; // a forest of stumps is legal
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("a constant target yields the constant exactly") {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    step_dataset(x, y, 20, 3, 50);
    y.setConstant(7.0);

    baselines::RfConfig cfg;
    cfg.n_trees = 25;
    const auto forest = baselines::fit_rf(x, y, cfg);
    CHECK(baselines::predict_rf(forest, x.row(4).transpose()) == 7.0);

    cfg.max_depth = 0;
    const auto stumps = baselines::fit_rf(x, y, cfg);
    for (const auto& tree : stumps.trees) {
        REQUIRE(tree.nodes.size() == 1);
        CHECK(tree.nodes[0].feature == -1);
        CHECK(tree.nodes[0].value == 7.0);
    }
}

TEST_CASE("deeper forests fit the training data better") {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    step_dataset(x, y, 80, 4, 51);

    baselines::RfConfig cfg;
    cfg.n_trees = 30;
    cfg.seed = 7;
    std::vector<double> mse;
    for (const int depth : {0, 2, 8}) {
        cfg.max_depth = depth;
        mse.push_back(training_mse(baselines::fit_rf(x, y, cfg), x, y));
    }
    CHECK(mse[1] < mse[0]);
    CHECK(mse[2] < mse[1]);
    CHECK(mse[2] < 0.3 * mse[0]);
}

TEST_CASE("forest predictions ignore tree order") {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    step_dataset(x, y, 50, 4, 52);
    baselines::RfConfig cfg;
    cfg.n_trees = 15;
    auto forest = baselines::fit_rf(x, y, cfg);
    auto reversed = forest;
    std::reverse(reversed.trees.begin(), reversed.trees.end());
    for (int r = 0; r < 10; ++r) {
        const Eigen::VectorXd row = x.row(r).transpose();
        CHECK(baselines::predict_rf(forest, row) == baselines::predict_rf(reversed, row));
    }
    CHECK_THROWS_AS(baselines::predict_rf(forest, Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST_CASE("mtry zero means the square-root default") {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    step_dataset(x, y, 60, 5, 53);
    baselines::RfConfig auto_cfg;
    auto_cfg.n_trees = 10;
    auto_cfg.seed = 3;
    baselines::RfConfig explicit_cfg = auto_cfg;
    explicit_cfg.mtry = 3; // ceil(sqrt(5))
    const auto a = baselines::fit_rf(x, y, auto_cfg);
    const auto b = baselines::fit_rf(x, y, explicit_cfg);
    for (int r = 0; r < 10; ++r) {
        const Eigen::VectorXd row = x.row(r).transpose();
        CHECK(baselines::predict_rf(a, row) == baselines::predict_rf(b, row));
    }
}

TEST_CASE("forests are deterministic per seed") {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    step_dataset(x, y, 60, 4, 54);
    baselines::RfConfig cfg;
    cfg.n_trees = 12;
    cfg.seed = 11;
    const auto a = baselines::fit_rf(x, y, cfg);
    const auto b = baselines::fit_rf(x, y, cfg);
    cfg.seed = 12;
    const auto c = baselines::fit_rf(x, y, cfg);
    bool any_differs = false;
    for (int r = 0; r < 20; ++r) {
        const Eigen::VectorXd row = x.row(r).transpose();
        CHECK(baselines::predict_rf(a, row) == baselines::predict_rf(b, row));
        any_differs = any_differs || baselines::predict_rf(a, row) != baselines::predict_rf(c, row);
    }
    CHECK(any_differs);
}

TEST_CASE("pinned ten-tree prediction stays frozen") {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    step_dataset(x, y, 40, 3, 55);
    baselines::RfConfig cfg;
    cfg.n_trees = 10;
    cfg.max_depth = 4;
    cfg.seed = 99;
    const auto forest = baselines::fit_rf(x, y, cfg);
    const Eigen::Vector3d probe(0.25, 0.75, 0.5);
    CHECK(baselines::predict_rf(forest, probe) == oracle::kGoldenRfPrediction);
}

TEST_CASE("rf rows lay out lags then year, month, and area one-hots") {
    baselines::RfLabelSchema schema;
    schema.lag_order = 2;
    schema.years = {2019, 2020};
    schema.areas = {"a", "b"};
    REQUIRE(schema.width() == 2 + 2 + 12 + 2);

    const Eigen::VectorXd row = schema.encode({5.0, 3.0}, Period(2020, 3), "b");
    CHECK(row[0] == 5.0);
    CHECK(row[1] == 3.0);
    CHECK(row[2] == 0.0); // 2019
    CHECK(row[3] == 1.0); // 2020
    CHECK(row[4 + 2] == 1.0); // March
    CHECK(row.segment(4, 12).sum() == 1.0);
    CHECK(row[16] == 0.0); // "a"
    CHECK(row[17] == 1.0); // "b"
    CHECK(row.sum() == 5.0 + 3.0 + 3.0);

    CHECK_THROWS_AS(schema.encode({5.0}, Period(2020, 3), "b"), InvalidArgument);
    CHECK_THROWS_AS(schema.encode({5.0, 3.0}, Period(2021, 3), "b"), LookupError);
    CHECK_THROWS_AS(schema.encode({5.0, 3.0}, Period(2020, 3), "c"), LookupError);
}

TEST_CASE("schema derives its vocab from the label map") {
    LabelMap labels;
    labels[{"B", Period(2019, 11)}] = 1.0;
    labels[{"A", Period(2020, 2)}] = 2.0;
    const auto schema = baselines::RfLabelSchema::from_labels(labels, 3);
    CHECK(schema.lag_order == 3);
    CHECK(schema.years == std::vector<int>{2019, 2020});
    CHECK(schema.areas == std::vector<AreaId>{"A", "B"});
}

TEST_CASE("label lags demand an unbroken run") {
    LabelMap labels;
    for (const int m : {1, 2, 4, 5}) labels[{"p", Period(2020, m)}] = static_cast<double>(m);
    CHECK(baselines::label_lags(labels, "p", Period(2020, 6), 2) ==
          std::vector<double>{5.0, 4.0});
    CHECK_FALSE(baselines::label_lags(labels, "p", Period(2020, 6), 3).has_value());
    CHECK_FALSE(baselines::label_lags(labels, "q", Period(2020, 6), 1).has_value());
}

TEST_CASE("training tables keep one row per fully lagged label") {
    LabelMap labels;
    for (int m = 0; m < 6; ++m)
        for (const char* p : {"A", "B"})
            labels[{p, Period(2020, 1).plus_months(m)}] = 10.0 * (m + 1) + (p[0] == 'A' ? 0 : 1);
    const auto schema = baselines::RfLabelSchema::from_labels(labels, 2);
    const auto table = baselines::build_rf_table(labels, schema);
    REQUIRE(table.keys.size() == 8); // periods 3..6 for each of two areas
    CHECK(table.x.rows() == 8);
    CHECK(table.x.cols() == schema.width());
    CHECK(table.keys.front() == std::make_pair(AreaId("A"), Period(2020, 3)));
    for (std::size_t r = 0; r < table.keys.size(); ++r)
        CHECK(table.y[static_cast<Eigen::Index>(r)] == labels.at(table.keys[r]));
    // first row's newest lag is the February label for area A
    CHECK(table.x(0, 0) == labels.at({"A", Period(2020, 2)}));

    LabelMap thin;
    thin[{"A", Period(2020, 1)}] = 1.0;
    CHECK_THROWS_WITH(baselines::build_rf_table(thin, baselines::RfLabelSchema::from_labels(thin, 2)),
                      Catch::Matchers::ContainsSubstring("labeled predecessors"));
}
