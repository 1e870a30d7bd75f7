#pragma once

// Experiment configuration: JSON document -> validated ExperimentConfig.
//
// Every rejection is a ConfigError carrying the JSON pointer of the offending
// entry. Unknown keys are rejected so typos do not silently fall back to
// defaults.

#include "losssim/errors.hpp"
#include "losssim/loss_stats.hpp"
#include "losssim/model.hpp"
#include "losssim/simulator.hpp"

#include <json.hpp>

#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace losssim::harness
{

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";
inline constexpr int kCsvSchemaVersion = 1;

inline constexpr const char* kEnvOutputDir = "LOSSSIM_OUTPUT_DIR";
inline constexpr const char* kEnvBaseSeed = "LOSSSIM_BASE_SEED";

enum class ParameterSource
{
    /// Drift and diffusion from the traffic model.
    derived,
    /// Drift and diffusion estimated from the simulated increments.
    measured,
};

/// One row of a comparison plan.
struct StatisticSpec
{
    std::string name;
    std::string pointer; ///< location in the document, for diagnostics
    int order = 1;
    double tau = 0.0;
    double t1 = 0.0;
    double t2 = 0.0;
    double T = 0.0;
    std::optional<double> threshold;
    std::optional<double> tolerance;
    std::optional<double> relative_tolerance;
};

struct CorrelateSpec
{
    double t1 = 1.0;
    double t2 = 1.0;
    std::vector<double> lags;
    double confidence = 0.95;
};

struct ExperimentConfig
{
    TrafficModel traffic;

    double duration = 1e5;
    std::optional<double> warmup;
    std::optional<double> initial_ell; ///< empty: stationary draw
    double window_length = 1.0;
    int streams = 16;
    std::uint64_t base_seed = 1;
    int threads = 1;

    AnalyticOptions analytic;
    ParameterSource parameters = ParameterSource::derived;

    std::optional<std::vector<StatisticSpec>> compare;
    std::optional<CorrelateSpec> correlate;

    std::string output_dir = "losssim-out";

    /// Effective document after overrides, and its FNV-1a hash. The hash
    /// leaves out output_dir so relocating results keeps the identity.
    json document;
    std::uint64_t hash = 0;

    RunConfig run_config(std::uint64_t stream) const
    {
        RunConfig c;
        c.traffic = traffic;
        c.duration = duration;
        c.seed = base_seed;
        c.stream_id = stream;
        c.initial_ell = initial_ell;
        c.warmup = warmup;
        c.window_length = window_length;
        return c;
    }
};

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes)
    {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Hash of the canonical serialization (keys sorted, no whitespace).
inline std::uint64_t config_hash(const json& doc)
{
    if (doc.is_object() && doc.contains("output_dir"))
    {
        json copy = doc;
        copy.erase("output_dir");
        return fnv1a(copy.dump());
    }
    return fnv1a(doc.dump());
}

inline std::string hex(std::uint64_t h)
{
    std::ostringstream s;
    s << std::hex;
    s.width(16);
    s.fill('0');
    s << h;
    return s.str();
}

namespace detail
{

/// Strict accessor over one JSON object.
class Object
{
public:
    Object(const json& j, std::string pointer) : j_(j), pointer_(std::move(pointer))
    {
        if (!j_.is_object())
        {
            throw ConfigError(pointer_.empty() ? "/" : pointer_, "expected an object");
        }
    }

    std::string at(const std::string& key) const { return pointer_ + "/" + key; }

    bool has(const std::string& key) const
    {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& raw(const std::string& key) const
    {
        if (!has(key))
        {
            throw ConfigError(at(key), "missing required key");
        }
        return j_.at(key);
    }

    double number(const std::string& key) const
    {
        const json& v = raw(key);
        if (!v.is_number())
        {
            throw ConfigError(at(key), "expected a number");
        }
        const double x = v.get<double>();
        if (!std::isfinite(x))
        {
            throw ConfigError(at(key), "expected a finite number");
        }
        return x;
    }

    double positive(const std::string& key) const
    {
        const double x = number(key);
        if (!(x > 0.0))
        {
            throw ConfigError(at(key), "must be positive");
        }
        return x;
    }

    double non_negative(const std::string& key) const
    {
        const double x = number(key);
        if (x < 0.0)
        {
            throw ConfigError(at(key), "must be non-negative");
        }
        return x;
    }

    std::optional<double> optional_number(const std::string& key) const
    {
        return has(key) ? std::optional<double>(number(key)) : std::nullopt;
    }

    double number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

    std::int64_t integer(const std::string& key) const
    {
        const json& v = raw(key);
        if (!v.is_number_integer())
        {
            throw ConfigError(at(key), "expected an integer");
        }
        return v.get<std::int64_t>();
    }

    std::string string(const std::string& key) const
    {
        const json& v = raw(key);
        if (!v.is_string())
        {
            throw ConfigError(at(key), "expected a string");
        }
        return v.get<std::string>();
    }

    void reject_unknown() const
    {
        for (const auto& [key, value] : j_.items())
        {
            if (!seen_.count(key))
            {
                throw ConfigError(at(key), "unknown key");
            }
        }
    }

private:
    const json& j_;
    std::string pointer_;
    mutable std::set<std::string> seen_;
};

/// Adapts model-level InvalidArgument into a ConfigError at `pointer`.
template <class F>
auto checked(const std::string& pointer, F&& f)
{
    try
    {
        return f();
    }
    catch (const InvalidArgument& e)
    {
        throw ConfigError(pointer, e.what());
    }
}

inline GapDistribution parse_gap(const json& j, const std::string& ptr)
{
    Object o(j, ptr);
    const std::string family = o.string("family");
    GapDistribution d;
    if (family == "exponential")
    {
        d = dist::Exponential{o.positive("rate")};
    }
    else if (family == "deterministic")
    {
        d = dist::Deterministic{o.positive("value")};
    }
    else if (family == "uniform")
    {
        d = dist::Uniform{o.non_negative("lo"), o.positive("hi")};
    }
    else if (family == "pareto")
    {
        d = dist::Pareto{o.positive("shape"), o.positive("scale")};
    }
    else
    {
        throw ConfigError(o.at("family"), "unknown inter-arrival family '" + family +
                                              "' (exponential, deterministic, uniform, pareto)");
    }
    o.reject_unknown();
    return d;
}

inline SizeDistribution parse_size(const json& j, const std::string& ptr)
{
    Object o(j, ptr);
    const std::string family = o.string("family");
    SizeDistribution d;
    if (family == "deterministic")
    {
        d = dist::Deterministic{o.positive("value")};
    }
    else if (family == "uniform")
    {
        d = dist::Uniform{o.positive("lo"), o.positive("hi")};
    }
    else if (family == "exponential-truncated")
    {
        d = dist::TruncatedExponential{o.positive("mean"), o.positive("cap")};
    }
    else
    {
        throw ConfigError(o.at("family"),
                          "unknown packet-size family '" + family + "' (deterministic, uniform, exponential-truncated)");
    }
    o.reject_unknown();
    return d;
}

inline const std::set<std::string>& statistic_names()
{
    static const std::set<std::string> names = {"occupancy_ks",  "loss_moment",    "idle_moment",
                                                "near_full_loss", "variance_ratio", "prob_any_loss",
                                                "correlation",    "conservation"};
    return names;
}

inline StatisticSpec parse_statistic(const json& j, const std::string& ptr)
{
    Object o(j, ptr);
    StatisticSpec s;
    s.pointer = ptr;
    s.name = o.string("statistic");
    if (!statistic_names().count(s.name))
    {
        std::string known;
        for (const auto& n : statistic_names())
        {
            known += (known.empty() ? "" : ", ") + n;
        }
        throw ConfigError(o.at("statistic"), "unknown statistic '" + s.name + "' (" + known + ")");
    }
    if (s.name == "loss_moment" || s.name == "idle_moment")
    {
        s.tau = o.positive("tau");
        if (o.has("order"))
        {
            s.order = static_cast<int>(o.integer("order"));
            if (s.order < 1 || s.order > 4)
            {
                throw ConfigError(o.at("order"), "moment order must lie in [1, 4]");
            }
        }
    }
    else if (s.name == "variance_ratio" || s.name == "prob_any_loss")
    {
        s.tau = o.positive("tau");
    }
    else if (s.name == "near_full_loss")
    {
        s.threshold = o.optional_number("threshold");
        if (s.threshold && (*s.threshold < 0.0 || *s.threshold >= 1.0))
        {
            throw ConfigError(o.at("threshold"), "threshold must lie in [0, 1)");
        }
    }
    else if (s.name == "correlation")
    {
        s.t1 = o.positive("t1");
        s.t2 = o.positive("t2");
        s.T = o.non_negative("T");
    }
    if (o.has("tolerance"))
    {
        s.tolerance = o.non_negative("tolerance");
    }
    if (o.has("relative_tolerance"))
    {
        s.relative_tolerance = o.non_negative("relative_tolerance");
    }
    o.reject_unknown();
    return s;
}

inline void parse_analytic(const json& j, ExperimentConfig& c)
{
    Object o(j, "/analytic");
    AnalyticOptions& a = c.analytic;
    if (o.has("series_cutoff"))
    {
        a.series_cutoff = static_cast<int>(o.integer("series_cutoff"));
        if (a.series_cutoff < 1)
        {
            throw ConfigError(o.at("series_cutoff"), "must be at least 1");
        }
    }
    if (o.has("image_cutoff"))
    {
        a.image_cutoff = static_cast<int>(o.integer("image_cutoff"));
        if (a.image_cutoff < 1)
        {
            throw ConfigError(o.at("image_cutoff"), "must be at least 1");
        }
    }
    if (o.has("tau_crossover"))
    {
        a.tau_crossover = o.positive("tau_crossover");
    }
    if (o.has("quadrature_rel_tol"))
    {
        a.quadrature.rel_tol = o.positive("quadrature_rel_tol");
    }
    if (o.has("inversion_abs_tol"))
    {
        a.inversion.abs_tol = o.positive("inversion_abs_tol");
        a.bromwich.abs_tol = a.inversion.abs_tol;
    }
    if (o.has("inversion_rel_tol"))
    {
        a.inversion.rel_tol = o.positive("inversion_rel_tol");
    }
    if (o.has("parameters"))
    {
        const std::string p = o.string("parameters");
        if (p == "derived")
        {
            c.parameters = ParameterSource::derived;
        }
        else if (p == "measured")
        {
            c.parameters = ParameterSource::measured;
        }
        else
        {
            throw ConfigError(o.at("parameters"), "expected 'derived' or 'measured'");
        }
    }
    o.reject_unknown();
}

inline void parse_run(const json& j, ExperimentConfig& c)
{
    Object o(j, "/run");
    c.duration = o.positive("duration");
    if (o.has("warmup"))
    {
        c.warmup = o.non_negative("warmup");
    }
    if (o.has("initial_ell"))
    {
        const json& v = o.raw("initial_ell");
        if (v.is_string() && v.get<std::string>() == "stationary")
        {
            c.initial_ell = std::nullopt;
        }
        else
        {
            const double x = o.number("initial_ell");
            if (x < 0.0 || x > 1.0)
            {
                throw ConfigError(o.at("initial_ell"), "must lie in [0, 1] or be \"stationary\"");
            }
            c.initial_ell = x;
        }
    }
    else
    {
        c.initial_ell = std::nullopt;
    }
    if (o.has("window_length"))
    {
        c.window_length = o.positive("window_length");
    }
    if (o.has("streams"))
    {
        const auto n = o.integer("streams");
        if (n < 1 || n > 4096)
        {
            throw ConfigError(o.at("streams"), "must lie in [1, 4096]");
        }
        c.streams = static_cast<int>(n);
    }
    if (o.has("base_seed"))
    {
        const json& v = o.raw("base_seed");
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        {
            throw ConfigError(o.at("base_seed"), "expected a non-negative integer");
        }
        c.base_seed = v.get<std::uint64_t>();
    }
    if (o.has("threads"))
    {
        const auto n = o.integer("threads");
        if (n < 0 || n > 1024)
        {
            throw ConfigError(o.at("threads"), "must lie in [0, 1024] (0: one per hardware thread)");
        }
        c.threads = static_cast<int>(n);
    }
    o.reject_unknown();
    if (c.warmup && *c.warmup >= c.duration)
    {
        throw ConfigError("/run/warmup", "warmup must be shorter than the duration");
    }
}

inline void parse_correlate(const json& j, ExperimentConfig& c)
{
    Object o(j, "/correlate");
    CorrelateSpec s;
    s.t1 = o.number_or("t1", c.window_length);
    s.t2 = o.number_or("t2", s.t1);
    if (!(s.t1 > 0.0) || !(s.t2 > 0.0))
    {
        throw ConfigError(o.at("t1"), "window lengths must be positive");
    }
    const json& lags = o.raw("lags");
    if (!lags.is_array() || lags.empty())
    {
        throw ConfigError(o.at("lags"), "expected a non-empty array of lags");
    }
    for (std::size_t i = 0; i < lags.size(); ++i)
    {
        if (!lags[i].is_number() || !(lags[i].get<double>() >= 0.0))
        {
            throw ConfigError(o.at("lags") + "/" + std::to_string(i), "lag must be a non-negative number");
        }
        s.lags.push_back(lags[i].get<double>());
    }
    if (o.has("confidence"))
    {
        s.confidence = o.number("confidence");
        if (!(s.confidence > 0.0 && s.confidence < 1.0))
        {
            throw ConfigError(o.at("confidence"), "must lie in (0, 1)");
        }
    }
    o.reject_unknown();
    c.correlate = s;
}

} // namespace detail

/// Validates a document and builds the configuration it describes.
inline ExperimentConfig parse_config(const json& doc)
{
    detail::Object root(doc, "");
    ExperimentConfig c;

    {
        detail::Object t(root.raw("traffic"), "/traffic");
        c.traffic.eta0 = t.positive("eta0");
        c.traffic.inter_arrival = detail::parse_gap(t.raw("inter_arrival"), "/traffic/inter_arrival");
        c.traffic.packet_size = detail::parse_size(t.raw("packet_size"), "/traffic/packet_size");
        t.reject_unknown();
        detail::checked("/traffic", [&] { return c.traffic.validate(); });
    }

    detail::parse_run(root.raw("run"), c);
    if (root.has("analytic"))
    {
        detail::parse_analytic(root.raw("analytic"), c);
    }
    if (root.has("compare"))
    {
        const json& plan = root.raw("compare");
        if (!plan.is_array())
        {
            throw ConfigError("/compare", "expected an array of statistics");
        }
        std::vector<StatisticSpec> rows;
        for (std::size_t i = 0; i < plan.size(); ++i)
        {
            rows.push_back(detail::parse_statistic(plan[i], "/compare/" + std::to_string(i)));
        }
        c.compare = std::move(rows);
    }
    if (root.has("correlate"))
    {
        detail::parse_correlate(root.raw("correlate"), c);
    }
    if (root.has("output_dir"))
    {
        c.output_dir = root.string("output_dir");
    }
    root.reject_unknown();

    c.document = doc;
    c.hash = config_hash(doc);
    return c;
}

/// Sets the value at a JSON pointer, creating intermediate objects.
inline void set_pointer(json& doc, const std::string& pointer, const json& value)
{
    try
    {
        doc[json::json_pointer(pointer)] = value;
    }
    catch (const json::exception& e)
    {
        throw ConfigError(pointer, std::string("cannot apply override: ") + e.what());
    }
}

/// Applies LOSSSIM_OUTPUT_DIR and LOSSSIM_BASE_SEED. Nothing else may be
/// overridden from the environment.
inline void apply_environment(json& doc)
{
    if (const char* dir = std::getenv(kEnvOutputDir); dir && *dir)
    {
        set_pointer(doc, "/output_dir", std::string(dir));
    }
    if (const char* seed = std::getenv(kEnvBaseSeed); seed && *seed)
    {
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(seed, &end, 10);
        if (errno != 0 || *end != '\0' || seed[0] == '-')
        {
            throw ConfigError("/run/base_seed", std::string(kEnvBaseSeed) + " is not a non-negative integer");
        }
        set_pointer(doc, "/run/base_seed", static_cast<std::uint64_t>(v));
    }
}

inline json read_document(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw ConfigError("", "cannot open configuration file '" + path + "'");
    }
    try
    {
        return json::parse(in);
    }
    catch (const json::parse_error& e)
    {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
}

} // namespace losssim::harness
