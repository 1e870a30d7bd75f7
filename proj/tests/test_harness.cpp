#include "losssim/harness/compare.hpp"
#include "losssim/harness/config.hpp"
#include "losssim/harness/report.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

using namespace losssim;
using namespace losssim::harness;

namespace
{

json minimal()
{
    return json::parse(R"({
        "traffic": {
            "eta0": 1.0,
            "inter_arrival": {"family": "exponential", "rate": 100.0},
            "packet_size": {"family": "deterministic", "value": 0.01}
        },
        "run": {"duration": 2000.0, "warmup": 0.0, "streams": 2}
    })");
}

std::string field_of(const json& doc)
{
    try
    {
        parse_config(doc);
    }
    catch (const ConfigError& e)
    {
        return e.field();
    }
    return "<accepted>";
}

} // namespace

TEST(Config, MinimalDocument)
{
    const ExperimentConfig c = parse_config(minimal());
    EXPECT_EQ(c.traffic.eta0, 1.0);
    EXPECT_EQ(c.streams, 2);
    EXPECT_FALSE(c.initial_ell.has_value());
    EXPECT_FALSE(c.compare.has_value());
    EXPECT_EQ(c.run_config(3).stream_id, 3u);
}

TEST(Config, FieldPaths)
{
    json d = minimal();
    d["traffic"].erase("eta0");
    EXPECT_EQ(field_of(d), "/traffic/eta0");

    d = minimal();
    d["traffic"]["inter_arrival"]["family"] = "weibull";
    EXPECT_EQ(field_of(d), "/traffic/inter_arrival/family");

    d = minimal();
    d["run"]["duraton"] = 5.0;
    EXPECT_EQ(field_of(d), "/run/duraton");

    d = minimal();
    d["run"]["duration"] = -1.0;
    EXPECT_EQ(field_of(d), "/run/duration");

    d = minimal();
    d["traffic"]["packet_size"]["value"] = 0.5;
    EXPECT_EQ(field_of(d), "/traffic");

    d = minimal();
    d["compare"] = json::array({{{"statistic", "loss_moment"}}});
    EXPECT_EQ(field_of(d), "/compare/0/tau");

    d = minimal();
    d["compare"] = json::array({{{"statistic", "mean"}, {"tau", 1.0}}});
    EXPECT_EQ(field_of(d), "/compare/0/statistic");

    d = minimal();
    d["compare"] = json::array({{{"statistic", "loss_moment"}, {"tau", 1.0}, {"tolerance", -1.0}}});
    EXPECT_EQ(field_of(d), "/compare/0/tolerance");

    d = minimal();
    d["correlate"] = {{"lags", json::array({1.0, "x"})}};
    EXPECT_EQ(field_of(d), "/correlate/lags/1");
}

TEST(Config, HashIsCanonical)
{
    const json a = minimal();
    const json b = json::parse(R"({
        "run": {"streams": 2, "warmup": 0.0, "duration": 2000.0},
        "traffic": {
            "packet_size": {"value": 0.01, "family": "deterministic"},
            "inter_arrival": {"rate": 100.0, "family": "exponential"},
            "eta0": 1.0
        }
    })");
    EXPECT_EQ(config_hash(a), config_hash(b));
    json c = a;
    c["run"]["duration"] = 2001.0;
    EXPECT_NE(config_hash(a), config_hash(c));
    json moved = a;
    moved["output_dir"] = "somewhere/else";
    EXPECT_EQ(config_hash(a), config_hash(moved));
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Config, EnvironmentOverridesOnlyOutputAndSeed)
{
    json d = minimal();
    ::setenv(kEnvOutputDir, "elsewhere", 1);
    ::setenv(kEnvBaseSeed, "77", 1);
    apply_environment(d);
    ::unsetenv(kEnvOutputDir);
    ::unsetenv(kEnvBaseSeed);
    const ExperimentConfig c = parse_config(d);
    EXPECT_EQ(c.output_dir, "elsewhere");
    EXPECT_EQ(c.base_seed, 77u);

    ::setenv(kEnvBaseSeed, "-3", 1);
    json e = minimal();
    EXPECT_THROW(apply_environment(e), ConfigError);
    ::unsetenv(kEnvBaseSeed);
}

TEST(Tolerance, DefaultsAndTightening)
{
    StatisticSpec s;
    s.name = "loss_moment";
    s.tau = 5.0;
    s.pointer = "/compare/0";
    Tolerance t = resolve_tolerance(s, 0.0);
    EXPECT_EQ(t.kind, ScoreKind::z);
    EXPECT_EQ(t.value, 3.0);
    ASSERT_TRUE(t.relative.has_value());
    EXPECT_EQ(*t.relative, 0.05);

    s.tolerance = 2.0;
    EXPECT_EQ(resolve_tolerance(s, 0.0).value, 2.0);
    s.tolerance = 3.5;
    EXPECT_THROW(resolve_tolerance(s, 0.0), ConfigError);
    s.tolerance.reset();
    s.relative_tolerance = 0.1;
    EXPECT_THROW(resolve_tolerance(s, 0.0), ConfigError);

    StatisticSpec ks;
    ks.name = "occupancy_ks";
    EXPECT_EQ(resolve_tolerance(ks, 0.0).value, 0.01);
    EXPECT_EQ(resolve_tolerance(ks, 1.0).value, 0.02);
}

TEST(Tolerance, JudgeUsesRecordedNumbersOnly)
{
    ComparisonRow r;
    r.tolerance = {ScoreKind::z, 3.0, std::nullopt};
    r.score = 2.99;
    EXPECT_TRUE(judge(r));
    r.score = 3.01;
    EXPECT_FALSE(judge(r));
    r.score = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(judge(r));

    r.tolerance = {ScoreKind::z, 3.0, 0.05};
    r.score = 1.0;
    r.relative_error = 0.06;
    EXPECT_FALSE(judge(r));

    r.tolerance = {ScoreKind::ks, 0.01, std::nullopt};
    r.score = 0.01;
    EXPECT_FALSE(judge(r));
    r.tolerance = {ScoreKind::exact, 0.0, std::nullopt};
    r.score = 0.0;
    EXPECT_TRUE(judge(r));
}

TEST(Compare, SmallEnsemble)
{
    json d = minimal();
    d["run"]["duration"] = 20000.0;
    d["compare"] = json::parse(R"([
        {"statistic": "conservation"},
        {"statistic": "loss_moment", "tau": 0.5},
        {"statistic": "correlation", "t1": 10.0, "t2": 10.0, "T": 0.0},
        {"statistic": "loss_moment", "tau": 0.5, "tolerance": 0}
    ])");
    const ComparisonReport r = compare(parse_config(d));
    ASSERT_EQ(r.rows.size(), 4u);
    EXPECT_TRUE(r.rows[0].pass);
    EXPECT_EQ(r.rows[1].analytic, 0.5);
    EXPECT_GT(r.rows[1].se, 0.0);
    EXPECT_FALSE(r.rows[3].pass);
    EXPECT_FALSE(r.all_pass());
    EXPECT_EQ(r.provenance.streams, 2);

    // Thread count does not change the numbers.
    ExperimentConfig c = parse_config(d);
    c.threads = 2;
    const ComparisonReport r2 = compare(c);
    for (std::size_t i = 0; i < r.rows.size(); ++i)
    {
        EXPECT_EQ(r.rows[i].simulated, r2.rows[i].simulated);
    }
}

TEST(Compare, RejectsPlansTheRunCannotSupport)
{
    json d = minimal();
    d["compare"] = json::parse(R"([{"statistic": "variance_ratio", "tau": 20.0}])");
    EXPECT_THROW(compare(parse_config(d)), ConfigError);
    d["compare"] = json::parse(R"([{"statistic": "correlation", "t1": 1.5, "t2": 1.0, "T": 0.0}])");
    EXPECT_THROW(compare(parse_config(d)), ConfigError);
    d["compare"] = json::array();
    EXPECT_THROW(compare(parse_config(d)), ConfigError);
}

TEST(Correlate, SingleLagHasNoSlope)
{
    json d = minimal();
    d["run"]["duration"] = 5000.0;
    d["correlate"] = {{"lags", json::array({2.0})}};
    const CorrelationSweep s = correlate(parse_config(d));
    ASSERT_EQ(s.rows.size(), 1u);
    EXPECT_FALSE(s.slope.has_value());
    std::ostringstream out;
    write_correlation_csv(out, s);
    EXPECT_EQ(out.str().find("slope"), std::string::npos);

    d["correlate"] = {{"lags", json::array({2.0, 4.0, 8.0})}};
    const CorrelationSweep m = correlate(parse_config(d));
    ASSERT_TRUE(m.slope.has_value());
    EXPECT_TRUE(std::isfinite(m.slope->se));
}

TEST(Report, NumbersRoundTrip)
{
    for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300})
    {
        EXPECT_EQ(std::stod(num(x)), x);
    }
    EXPECT_EQ(num(2.0), "2");
    EXPECT_EQ(quote("a,b"), "\"a,b\"");
}
