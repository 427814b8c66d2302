// Dates, random numbers, CSV plumbing, configuration.
#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <set>

#include "mfagl/config.hpp"
#include "mfagl/csv.hpp"
#include "mfagl/date.hpp"
#include "mfagl/error.hpp"
#include "mfagl/rng.hpp"
#include "support/tmpdir.hpp"

using namespace mfagl;

TEST_CASE("date parse and format round-trip") {
    for (const std::string text : {"1970-01-01", "2020-02-29", "2019-12-31", "2024-07-15"}) {
        CHECK(Date::parse(text).to_string() == text);
    }
    CHECK(Date(1970, 1, 1).serial() == 0);
    CHECK(Date(1970, 1, 2).serial() == 1);
    CHECK(Date(1969, 12, 31).serial() == -1);
}

TEST_CASE("date arithmetic crosses month and year boundaries") {
    CHECK(Date(2020, 1, 31).plus_days(1) == Date(2020, 2, 1));
    CHECK(Date(2020, 2, 28).plus_days(1) == Date(2020, 2, 29));
    CHECK(Date(2021, 2, 28).plus_days(1) == Date(2021, 3, 1));
    CHECK(Date(2020, 12, 31).plus_days(1) == Date(2021, 1, 1));
    CHECK(Date(2020, 3, 1).plus_days(-1) == Date(2020, 2, 29));
}

TEST_CASE("leap years feed day validation") {
    CHECK_NOTHROW(Date(2020, 2, 29));
    CHECK_THROWS_AS(Date(2021, 2, 29), InvalidArgument);
    CHECK_THROWS_AS(Date(2020, 4, 31), InvalidArgument);
    CHECK_THROWS_AS(Date(2020, 13, 1), InvalidArgument);
    CHECK(is_leap_year(2000));
    CHECK_FALSE(is_leap_year(1900));
    CHECK(days_in_month(2020, 2) == 29);
    CHECK(days_in_month(2100, 2) == 28);
}

TEST_CASE("minus_one_year clamps leap day") {
    CHECK(Date(2020, 2, 29).minus_one_year() == Date(2019, 2, 28));
    CHECK(Date(2020, 7, 15).minus_one_year() == Date(2019, 7, 15));
}

TEST_CASE("date parse rejects malformed text") {
    CHECK_THROWS_AS(Date::parse("2020/01/01"), InvalidArgument);
    CHECK_THROWS_AS(Date::parse("2020-1-1"), InvalidArgument);
    CHECK_THROWS_AS(Date::parse("20200101"), InvalidArgument);
    CHECK_THROWS_AS(Date::parse("2020-00-10"), InvalidArgument);
    CHECK_THROWS_AS(Date::parse("2020-02-30"), InvalidArgument);
}

TEST_CASE("periods order, step, and bound their days") {
    const Period p(2020, 11);
    CHECK(Period::parse("2020-11") == p);
    CHECK(p.to_string() == "2020-11");
    CHECK(p.plus_months(2) == Period(2021, 1));
    CHECK(p.plus_months(-11) == Period(2019, 12));
    CHECK(Period(2020, 1).plus_months(-1) == Period(2019, 12));
    CHECK(p.days_in() == 30);
    CHECK(p.first_day() == Date(2020, 11, 1));
    CHECK(p.last_day() == Date(2020, 11, 30));
    CHECK(Period::of(Date(2020, 11, 17)) == p);
    CHECK(Period(2020, 1) < Period(2020, 2));
    CHECK(Period(2020, 12) < Period(2021, 1));
    CHECK(Period(2021, 1).index() - Period(2020, 12).index() == 1);
}

TEST_CASE("timestamps parse, format, and map to days") {
    const Timestamp t = parse_timestamp("2020-01-02T03:04:05Z");
    CHECK(t == (Date(2020, 1, 2).serial() * 86400LL + 3 * 3600 + 4 * 60 + 5));
    CHECK(format_timestamp(t) == "2020-01-02T03:04:05Z");
    CHECK(date_of_timestamp(t) == Date(2020, 1, 2));
    CHECK(date_of_timestamp(parse_timestamp("1969-12-31T23:59:59Z")) == Date(1969, 12, 31));
    CHECK_THROWS_AS(parse_timestamp("2020-01-02 03:04:05"), InvalidArgument);
    CHECK_THROWS_AS(parse_timestamp("2020-01-02T25:00:00Z"), InvalidArgument);
}

TEST_CASE("rng is deterministic per seed and distinct across seeds") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    bool differs = false;
    Rng a2(42);
    for (int i = 0; i < 10; ++i) differs = differs || (a2.next_u64() != c.next_u64());
    CHECK(differs);
}

TEST_CASE("uniform stays in range and covers it") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
    CHECK(sum / n == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("uniform_index and shuffle stay within bounds") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) CHECK(rng.uniform_index(7) < 7);
    std::vector<int> values{1, 2, 3, 4, 5, 6, 7, 8};
    auto shuffled = values;
    rng.shuffle(shuffled);
    CHECK(std::set<int>(shuffled.begin(), shuffled.end()) ==
          std::set<int>(values.begin(), values.end()));
}

TEST_CASE("normal draws have roughly standard moments") {
    Rng rng(13);
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        REQUIRE(std::isfinite(z));
        sum += z;
        sq += z * z;
    }
    CHECK(sum / n == Catch::Approx(0.0).margin(0.03));
    CHECK(sq / n == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("derived streams are reproducible and mutually distinct") {
    const Rng root(99);
    Rng d0 = root.derive(0);
    Rng d0_again = root.derive(0);
    Rng d1 = root.derive(1);
    CHECK(d0.next_u64() == d0_again.next_u64());
    Rng d0_fresh = root.derive(0);
    Rng d1_fresh = root.derive(1);
    CHECK(d0_fresh.next_u64() != d1_fresh.next_u64());
    (void)d1;
}

TEST_CASE("format_double survives a parse round-trip") {
    Rng rng(3);
    for (const double v : {0.0, -0.0, 0.1, 1.0 / 3.0, 1e300, 5e-324, -12345.6789,
                           123456789.123456789, 2.2250738585072014e-308}) {
        CHECK(csv::parse_double(csv::format_double(v), "t") == v);
    }
    for (int i = 0; i < 1000; ++i) {
        const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-20.0, 20.0));
        CHECK(csv::parse_double(csv::format_double(v), "t") == v);
    }
}

TEST_CASE("parse_double reports context on garbage") {
    CHECK_THROWS_AS(csv::parse_double("abc", "ctx"), IoError);
    CHECK_THROWS_AS(csv::parse_double("", "ctx"), IoError);
    CHECK_THROWS_AS(csv::parse_double("1.5x", "ctx"), IoError);
    try {
        csv::parse_double("nope", "labels.csv row 3");
        FAIL("expected a throw");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("labels.csv row 3") != std::string::npos);
    }
}

TEST_CASE("csv table enforces header and arity") {
    oracle::TmpDir dir("csv");
    {
        std::ofstream out(dir.file("ok.csv"));
        out << "a,b\n1,2\n3,4\n";
    }
    const auto table = csv::Table::read(dir.file("ok.csv"), {"a", "b"});
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[1][1] == "4");
    CHECK(table.header == std::vector<std::string>{"a", "b"});

    {
        std::ofstream out(dir.file("badheader.csv"));
        out << "a,c\n1,2\n";
    }
    CHECK_THROWS_AS(csv::Table::read(dir.file("badheader.csv"), {"a", "b"}), IoError);

    {
        std::ofstream out(dir.file("badrow.csv"));
        out << "a,b\n1,2,3\n";
    }
    CHECK_THROWS_AS(csv::Table::read(dir.file("badrow.csv"), {"a", "b"}), IoError);

    CHECK_THROWS_AS(csv::Table::read(dir.file("missing.csv"), {"a"}), IoError);
}

TEST_CASE("csv table accepts an alternate header and any header") {
    oracle::TmpDir dir("csvalt");
    {
        std::ofstream out(dir.file("two.csv"));
        out << "x,y\n1,2\n";
    }
    CHECK_NOTHROW(csv::Table::read(dir.file("two.csv"), {"x", "y", "z"},
                                   std::vector<std::string>{"x", "y"}));
    const auto any = csv::Table::read(dir.file("two.csv"), {});
    CHECK(any.header == std::vector<std::string>{"x", "y"});
}

TEST_CASE("csv writer checks arity and writes verbatim fields") {
    oracle::TmpDir dir("csvw");
    csv::Writer out(dir.file("w.csv"), {"a", "b"});
    out.row({"1", "x y"});
    CHECK_THROWS_AS(out.row({"only-one"}), InvalidArgument);
    out.close();
    const auto table = csv::Table::read(dir.file("w.csv"), {"a", "b"});
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0][1] == "x y");
}

TEST_CASE("config defaults match the documented values") {
    const config::RunConfig cfg;
    const auto resolved = cfg.resolved();
    CHECK(resolved.at("lag_days") == "31");
    CHECK(resolved.at("hidden_size") == "32");
    CHECK(resolved.at("epochs") == "600");
    CHECK(resolved.at("batch_size") == "1");
    CHECK(resolved.at("lr") == "1e-04"); // shortest round-trip form of 1e-4
    CHECK(resolved.at("beta1") == "0.9");
    CHECK(resolved.at("beta2") == "0.999");
    CHECK(resolved.at("seed") == "0");
    CHECK(resolved.at("lag_order") == "11");
    CHECK(resolved.at("rf.n_trees") == "100");
    CHECK(resolved.at("rf.max_depth") == "8");
    CHECK(resolved.at("release_lag_days") == "0");
    CHECK(resolved.at("output") == "softplus");
    CHECK(resolved.at("holdout") == "auto");
}

TEST_CASE("config file parses comments, blanks, and overrides") {
    oracle::TmpDir dir("cfg");
    {
        std::ofstream out(dir.file("run.cfg"));
        out << "# comment line\n\n"
            << "epochs = 12   # trailing comment\n"
            << "seed=77\n"
            << "output=identity\n"
            << "holdout=2020-10\n"
            << "synth.n_months=6\n"
            << "mlp_hidden=16,8\n";
    }
    config::RunConfig cfg = config::load_config(dir.file("run.cfg"));
    CHECK(cfg.train.epochs == 12);
    CHECK(cfg.train.seed == 77);
    CHECK(cfg.rf.seed == 77);
    CHECK(cfg.world.seed == 77);
    CHECK(cfg.train.output == net::OutputTransform::Identity);
    REQUIRE(cfg.holdout.has_value());
    CHECK(*cfg.holdout == Period(2020, 10));
    CHECK(cfg.world.n_months == 6);
    CHECK(cfg.train.mlp_hidden == std::vector<int>{16, 8});

    config::apply_assignment(cfg, "epochs=3");
    CHECK(cfg.train.epochs == 3);
}

TEST_CASE("config rejects unknown keys and bad values") {
    config::RunConfig cfg;
    CHECK_THROWS_AS(config::apply_assignment(cfg, "no_such_key=1"), InvalidArgument);
    CHECK_THROWS_AS(config::apply_assignment(cfg, "epochs=ten"), InvalidArgument);
    CHECK_THROWS_AS(config::apply_assignment(cfg, "missing-equals"), InvalidArgument);
    CHECK_THROWS_AS(config::apply_assignment(cfg, "output=cubic"), InvalidArgument);
    CHECK_THROWS_AS(config::apply_assignment(cfg, "ar_per_area=maybe"), InvalidArgument);

    oracle::TmpDir dir("cfgbad");
    {
        std::ofstream out(dir.file("bad.cfg"));
        out << "epochs=1\nbogus=2\n";
    }
    try {
        config::load_config(dir.file("bad.cfg"));
        FAIL("expected a throw");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
}
