#pragma once

// Theory-versus-simulation comparison and the correlation lag sweep.

#include "losssim/estimators.hpp"
#include "losssim/harness/config.hpp"
#include "losssim/harness/ensemble.hpp"
#include "losssim/loss_stats.hpp"
#include "losssim/stats.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace losssim::harness
{

enum class ScoreKind
{
    z,        ///< |simulated - analytic| / se
    ks,       ///< Kolmogorov-Smirnov distance
    relative, ///< |simulated - analytic| / |analytic|
    exact,    ///< largest absolute deviation, in integer units
};

inline const char* to_string(ScoreKind k)
{
    switch (k)
    {
    case ScoreKind::z:
        return "z";
    case ScoreKind::ks:
        return "ks";
    case ScoreKind::relative:
        return "relative";
    case ScoreKind::exact:
        return "exact";
    }
    return "?";
}

struct Tolerance
{
    ScoreKind kind = ScoreKind::z;
    double value = 3.0;
    /// Extra bound on the relative error, checked in addition to `value`.
    std::optional<double> relative;
};

/// Default tolerances; a configuration may lower them but never raise them.
inline Tolerance default_tolerance(const StatisticSpec& s, double v)
{
    if (s.name == "occupancy_ks")
    {
        return {ScoreKind::ks, std::abs(v) < 1e-9 ? 0.01 : 0.02, std::nullopt};
    }
    if (s.name == "loss_moment" || s.name == "idle_moment")
    {
        Tolerance t{ScoreKind::z, 3.0, std::nullopt};
        if (s.order == 1 && s.tau >= 5.0)
        {
            t.relative = 0.05;
        }
        return t;
    }
    if (s.name == "near_full_loss")
    {
        return {ScoreKind::relative, 0.2, std::nullopt};
    }
    if (s.name == "variance_ratio")
    {
        return {ScoreKind::relative, 0.1, std::nullopt};
    }
    if (s.name == "conservation")
    {
        return {ScoreKind::exact, 0.0, std::nullopt};
    }
    return {ScoreKind::z, 3.0, std::nullopt};
}

inline Tolerance resolve_tolerance(const StatisticSpec& s, double v)
{
    Tolerance t = default_tolerance(s, v);
    if (s.tolerance)
    {
        if (*s.tolerance > t.value)
        {
            std::ostringstream msg;
            msg << "tolerance may only be tightened (default " << t.value << ")";
            throw ConfigError(s.pointer + "/tolerance", msg.str());
        }
        t.value = *s.tolerance;
    }
    if (s.relative_tolerance)
    {
        if (t.relative && *s.relative_tolerance > *t.relative)
        {
            std::ostringstream msg;
            msg << "relative_tolerance may only be tightened (default " << *t.relative << ")";
            throw ConfigError(s.pointer + "/relative_tolerance", msg.str());
        }
        t.relative = *s.relative_tolerance;
    }
    return t;
}

struct ComparisonRow
{
    std::string name;
    std::string parameters;
    double analytic = 0.0;
    double simulated = 0.0;
    double se = 0.0;
    double score = 0.0;
    Tolerance tolerance;
    double relative_error = 0.0;
    bool pass = false;
};

struct Provenance
{
    std::uint64_t config_hash = 0;
    std::uint64_t base_seed = 0;
    int streams = 0;
    std::string generator = kGeneratorName;
    std::string version = kVersion;
    FpParams params;
    ParameterSource source = ParameterSource::derived;
};

struct ComparisonReport
{
    Provenance provenance;
    std::vector<ComparisonRow> rows;

    bool all_pass() const
    {
        for (const auto& r : rows)
        {
            if (!r.pass)
            {
                return false;
            }
        }
        return true;
    }
};

/// Pass/fail from the recorded numbers alone.
inline bool judge(const ComparisonRow& r)
{
    bool ok = std::isfinite(r.score) && r.score <= r.tolerance.value;
    if (r.tolerance.kind == ScoreKind::ks)
    {
        ok = std::isfinite(r.score) && r.score < r.tolerance.value;
    }
    if (r.tolerance.relative)
    {
        ok = ok && std::isfinite(r.relative_error) && r.relative_error <= *r.tolerance.relative;
    }
    return ok;
}

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

namespace detail
{

/// Number of base windows per stream after the warmup.
inline std::size_t windows_per_stream(const ExperimentConfig& c)
{
    const double measured = c.duration - resolved_warmup(c.run_config(0));
    return static_cast<std::size_t>(std::floor(measured / c.window_length + 1e-9));
}

inline std::size_t exact_multiple(double t, const ExperimentConfig& c, const std::string& pointer)
{
    const double r = t / c.window_length;
    const double k = std::round(r);
    if (k < 1.0 || std::abs(r - k) > 1e-9 * std::max(1.0, r))
    {
        std::ostringstream msg;
        msg << "interval " << t << " is not a positive multiple of the window length " << c.window_length;
        throw ConfigError(pointer, msg.str());
    }
    return static_cast<std::size_t>(k);
}

inline std::size_t nearest_multiple(double t, const ExperimentConfig& c)
{
    return static_cast<std::size_t>(std::max(1.0, std::round(t / c.window_length)));
}

struct Planned
{
    StatisticSpec spec;
    Tolerance tolerance;
    std::size_t factor = 1; ///< base windows per statistic window
    double t = 0.0;         ///< statistic window length in time units
    std::size_t m1 = 0, m2 = 0;
    std::ptrdiff_t lag = 0;
};

inline std::vector<Planned> plan(const ExperimentConfig& c, const FpParams& p)
{
    const std::size_t windows = windows_per_stream(c);
    std::vector<Planned> out;
    for (const StatisticSpec& s : *c.compare)
    {
        Planned q;
        q.spec = s;
        q.tolerance = resolve_tolerance(s, p.v);
        if (s.name == "loss_moment" || s.name == "idle_moment" || s.name == "variance_ratio" ||
            s.name == "prob_any_loss")
        {
            q.factor = nearest_multiple(2.0 * s.tau / p.sigma2, c);
            q.t = static_cast<double>(q.factor) * c.window_length;
            const std::size_t need = c.streams == 1 ? kMinWindows : 2;
            if (windows / q.factor < need)
            {
                std::ostringstream msg;
                msg << "runs of " << windows << " windows hold fewer than " << need << " windows of tau = " << s.tau;
                throw ConfigError(s.pointer + "/tau", msg.str());
            }
        }
        else if (s.name == "near_full_loss")
        {
            q.t = c.window_length;
        }
        else if (s.name == "correlation")
        {
            q.m1 = exact_multiple(s.t1, c, s.pointer + "/t1");
            q.m2 = exact_multiple(s.t2, c, s.pointer + "/t2");
            const double lag = s.T / c.window_length;
            if (std::abs(lag - std::round(lag)) > 1e-9 * std::max(1.0, lag))
            {
                throw ConfigError(s.pointer + "/T", "separation is not a multiple of the window length");
            }
            q.lag = static_cast<std::ptrdiff_t>(std::round(lag));
            const std::size_t span = q.m1 + static_cast<std::size_t>(q.lag) + q.m2;
            if (windows / span < kMinCorrelationPairs)
            {
                throw ConfigError(s.pointer, "runs too short for 200 interval pairs at this separation");
            }
        }
        out.push_back(q);
    }
    return out;
}

/// One stream's contribution to one statistic.
struct Sample
{
    double value = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN(); ///< within-stream, when available
    double sum = 0.0;
    double sum2 = 0.0;
    double count = 0.0;
};

struct StreamResult
{
    std::vector<Sample> samples;
    std::array<double, kHistogramBins> histogram{};
    std::int64_t residual = 0;
    IncrementStats increments;
};

inline StreamResult reduce_stream(const std::vector<Planned>& plan, RunOutput&& out)
{
    StreamResult r;
    r.histogram = out.summary.occupancy_histogram;
    r.residual = out.summary.conservation_residual;
    r.increments = out.summary.increments;
    const WindowSeries& base = out.windows;
    for (const Planned& q : plan)
    {
        Sample s;
        const std::string& n = q.spec.name;
        if (n == "loss_moment" || n == "idle_moment" || n == "variance_ratio" || n == "prob_any_loss")
        {
            const WindowSeries w = base.coarsen(q.factor);
            const WindowQuantity what = n == "idle_moment" ? WindowQuantity::idle : WindowQuantity::loss;
            for (std::size_t i = 0; i < w.size(); ++i)
            {
                const double x = what == WindowQuantity::loss ? w.lost_traffic(i) : w.idle_deficit(i);
                if (n == "prob_any_loss")
                {
                    s.sum += x > 0.0 ? 1.0 : 0.0;
                }
                else if (n == "variance_ratio")
                {
                    s.sum += x;
                    s.sum2 += x * x;
                }
                else
                {
                    s.sum += std::pow(x, q.spec.order);
                }
            }
            s.count = static_cast<double>(w.size());
            if (n == "variance_ratio")
            {
                const double mean = s.sum / s.count;
                s.value = (s.sum2 - s.count * mean * mean) / (s.count - 1.0) / mean;
            }
            else
            {
                s.value = s.sum / s.count;
                if (w.size() >= kMinWindows)
                {
                    s.se = n == "prob_any_loss" ? affected_fraction(w, what).se
                                                : windowed_moment(w, q.spec.order, what).se;
                }
            }
        }
        else if (n == "near_full_loss")
        {
            const ConditionalLoss c = conditional_window_loss(base, *q.spec.threshold);
            s.sum = c.sum;
            s.count = static_cast<double>(c.windows);
            s.value = c.mean;
        }
        else if (n == "correlation")
        {
            const SampleCorrelation c = loss_window_correlation(base, q.spec.t1, q.spec.t2, q.spec.T);
            s.value = c.value;
            s.se = c.se;
        }
        r.samples.push_back(s);
    }
    return r;
}

inline double analytic_value(const Planned& q, const FpParams& p, const AnalyticOptions& opts, double& tau_used)
{
    const std::string& n = q.spec.name;
    tau_used = tau_of_t(p, q.t);
    if (n == "loss_moment")
    {
        return loss_moment({q.spec.order, tau_used, p.v}, opts).value;
    }
    if (n == "idle_moment")
    {
        return idleness_dual(LossMomentRequest{q.spec.order, tau_used, p.v}, opts).value;
    }
    if (n == "variance_ratio")
    {
        return variance_bracket(p.v);
    }
    if (n == "prob_any_loss")
    {
        return prob_any_loss(tau_used, p.v, ProbabilityMethod::inversion, opts).value;
    }
    if (n == "near_full_loss")
    {
        const double th = *q.spec.threshold;
        const auto num = numerics::integrate(
            [&](double l) {
                return stationary_density(l, p.v) * conditional_loss_moment(1, tau_used, l, p.v, opts).value;
            },
            th, 1.0, opts.quadrature);
        return num.value / (1.0 - stationary_cdf(th, p.v));
    }
    if (n == "correlation")
    {
        return loss_correlator({q.spec.t1, q.spec.t2, q.spec.T, p.sigma2, p.v}, CorrelatorMethod::quadrature, opts)
            .value;
    }
    return 0.0;
}

inline std::string describe(const Planned& q, double tau)
{
    std::ostringstream s;
    s.precision(6);
    const std::string& n = q.spec.name;
    if (n == "loss_moment" || n == "idle_moment")
    {
        s << "k=" << q.spec.order << " tau=" << tau << " t=" << q.t;
    }
    else if (n == "variance_ratio" || n == "prob_any_loss")
    {
        s << "tau=" << tau << " t=" << q.t;
    }
    else if (n == "near_full_loss")
    {
        s << "threshold=" << *q.spec.threshold << " t=" << q.t;
    }
    else if (n == "correlation")
    {
        s << "t1=" << q.spec.t1 << " t2=" << q.spec.t2 << " T=" << q.spec.T;
    }
    return s.str();
}

/// Stream-level mean and standard error; a single stream falls back to its
/// own batch-means error.
inline MeanEstimate pool(const std::vector<Sample>& samples)
{
    if (samples.size() == 1)
    {
        return {samples[0].value, samples[0].se, 0};
    }
    std::vector<double> x;
    for (const auto& s : samples)
    {
        x.push_back(s.value);
    }
    return replicate_mean(x);
}

inline FpParams resolve_params(const ExperimentConfig& c, const std::vector<IncrementStats>& increments)
{
    if (c.parameters == ParameterSource::derived)
    {
        return derive_fp_params(c.traffic);
    }
    IncrementStats pooled = pool_increments(increments);
    RunSummary s;
    s.increments = pooled;
    return estimate_fp_params(s, IncrementSource::free);
}

} // namespace detail

/// Runs the ensemble and scores every statistic of the comparison plan.
inline ComparisonReport compare(const ExperimentConfig& c)
{
    if (!c.compare || c.compare->empty())
    {
        throw ConfigError("/compare", "comparison plan is empty");
    }
    ComparisonReport report;
    Provenance& prov = report.provenance;
    prov.config_hash = c.hash;
    prov.base_seed = c.base_seed;
    prov.streams = c.streams;
    prov.source = c.parameters;

    // Near-full thresholds default to one diffusion length below the wall.
    ExperimentConfig cfg = c;
    auto fill_thresholds = [&](const FpParams& p) {
        for (StatisticSpec& s : *cfg.compare)
        {
            if (s.name == "near_full_loss" && !s.threshold)
            {
                s.threshold = std::max(0.0, 1.0 - 2.0 * std::sqrt(p.sigma2 * cfg.window_length));
            }
        }
    };

    // Window lengths follow from the derived parameters or, when measuring,
    // from the first stream; the reported parameters pool every stream.
    std::vector<detail::StreamResult> streams;
    std::vector<detail::Planned> planned;
    auto reduce = [&](int, RunOutput&& o) { return detail::reduce_stream(planned, std::move(o)); };
    if (cfg.parameters == ParameterSource::derived)
    {
        const FpParams derived = derive_fp_params(cfg.traffic);
        fill_thresholds(derived);
        planned = detail::plan(cfg, derived);
        streams = run_ensemble(cfg, reduce);
    }
    else
    {
        RunOutput pilot = run(cfg.run_config(0));
        RunSummary probe;
        probe.increments = pilot.summary.increments;
        const FpParams pilot_params = estimate_fp_params(probe, IncrementSource::free);
        fill_thresholds(pilot_params);
        planned = detail::plan(cfg, pilot_params);
        streams.push_back(detail::reduce_stream(planned, std::move(pilot)));
        for (auto& r : run_streams(cfg, 1, cfg.streams - 1, reduce))
        {
            streams.push_back(std::move(r));
        }
    }
    std::vector<IncrementStats> increments;
    for (const auto& s : streams)
    {
        increments.push_back(s.increments);
    }
    const FpParams params = detail::resolve_params(cfg, increments);
    prov.params = params;
    for (auto& q : planned)
    {
        q.tolerance = resolve_tolerance(q.spec, params.v);
    }

    for (std::size_t i = 0; i < planned.size(); ++i)
    {
        const detail::Planned& q = planned[i];
        ComparisonRow row;
        row.name = q.spec.name;
        row.tolerance = q.tolerance;
        const std::string& n = q.spec.name;

        if (n == "occupancy_ks")
        {
            RunSummary pooled;
            for (const auto& s : streams)
            {
                for (int b = 0; b < kHistogramBins; ++b)
                {
                    pooled.occupancy_histogram[b] += s.histogram[b] / static_cast<double>(streams.size());
                }
            }
            std::ostringstream desc;
            desc.precision(6);
            desc << "v=" << params.v;
            row.parameters = desc.str();
            row.analytic = 0.0;
            row.simulated = occupancy_ks(pooled, params.v);
            row.score = row.simulated;
            row.relative_error = std::numeric_limits<double>::quiet_NaN();
        }
        else if (n == "conservation")
        {
            std::int64_t worst = 0;
            for (const auto& s : streams)
            {
                worst = std::max(worst, std::abs(s.residual));
            }
            row.parameters = "quanta";
            row.simulated = static_cast<double>(worst);
            row.score = row.simulated;
            row.relative_error = std::numeric_limits<double>::quiet_NaN();
        }
        else
        {
            std::vector<detail::Sample> samples;
            for (const auto& s : streams)
            {
                samples.push_back(s.samples[i]);
            }
            double tau = 0.0;
            row.analytic = detail::analytic_value(q, params, cfg.analytic, tau);
            row.parameters = detail::describe(q, tau);
            MeanEstimate est = detail::pool(samples);
            if (n == "near_full_loss" || n == "variance_ratio")
            {
                // Pooled over all windows rather than averaged per stream.
                double sum = 0.0, sum2 = 0.0, count = 0.0;
                for (const auto& s : samples)
                {
                    sum += s.sum;
                    sum2 += s.sum2;
                    count += s.count;
                }
                if (n == "near_full_loss")
                {
                    est.mean = count > 0.0 ? sum / count : 0.0;
                }
                else
                {
                    const double mean = sum / count;
                    est.mean = (sum2 - count * mean * mean) / (count - 1.0) / mean;
                }
                if (samples.size() == 1)
                {
                    est.se = std::numeric_limits<double>::quiet_NaN();
                }
            }
            row.simulated = est.mean;
            row.se = est.se;
            row.relative_error = std::abs(row.simulated - row.analytic) / std::abs(row.analytic);
            if (q.tolerance.kind == ScoreKind::relative)
            {
                row.score = row.relative_error;
            }
            else if (row.se > 0.0)
            {
                row.score = std::abs(row.simulated - row.analytic) / row.se;
            }
            else
            {
                row.score = row.simulated == row.analytic ? 0.0 : std::numeric_limits<double>::infinity();
            }
        }
        row.pass = judge(row);
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Lag sweep
// ---------------------------------------------------------------------------

struct CorrelationRow
{
    double T = 0.0;
    double separation_tau = 0.0;
    CorrelatorRegime regime = CorrelatorRegime::critical;
    double corr = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double analytic = 0.0;
    std::optional<double> asymptotic;
};

struct CorrelationSweep
{
    Provenance provenance;
    double t1 = 0.0;
    double t2 = 0.0;
    std::vector<CorrelationRow> rows;
    /// Log-log slope of |corr| against T over the critical lags; needs two or more.
    std::optional<SlopeFit> slope;
};

inline const char* to_string(CorrelatorRegime r)
{
    switch (r)
    {
    case CorrelatorRegime::critical:
        return "critical";
    case CorrelatorRegime::intermediate:
        return "intermediate";
    case CorrelatorRegime::decayed:
        return "decayed";
    }
    return "?";
}

namespace detail
{

inline std::optional<SlopeFit> critical_slope(const std::vector<double>& lags, const std::vector<double>& corr)
{
    std::vector<double> x, y;
    for (std::size_t i = 0; i < lags.size(); ++i)
    {
        if (lags[i] > 0.0 && corr[i] != 0.0)
        {
            x.push_back(std::log(lags[i]));
            y.push_back(std::log(std::abs(corr[i])));
        }
    }
    if (x.size() < 2)
    {
        return std::nullopt;
    }
    if (x.size() == 2)
    {
        SlopeFit f;
        f.slope = (y[1] - y[0]) / (x[1] - x[0]);
        f.intercept = y[0] - f.slope * x[0];
        f.se = std::numeric_limits<double>::quiet_NaN();
        return f;
    }
    return fit_line(x, y);
}

} // namespace detail

/// Covariance of the losses in windows of lengths t1, t2 at each lag, pooled
/// over streams, with the analytic prediction alongside.
inline CorrelationSweep correlate(const ExperimentConfig& c)
{
    if (!c.correlate)
    {
        throw ConfigError("/correlate", "missing required key");
    }
    const CorrelateSpec& spec = *c.correlate;
    const std::size_t windows = detail::windows_per_stream(c);
    const std::size_t m1 = detail::exact_multiple(spec.t1, c, "/correlate/t1");
    const std::size_t m2 = detail::exact_multiple(spec.t2, c, "/correlate/t2");
    for (std::size_t i = 0; i < spec.lags.size(); ++i)
    {
        const std::string ptr = "/correlate/lags/" + std::to_string(i);
        const double r = spec.lags[i] / c.window_length;
        if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r))
        {
            throw ConfigError(ptr, "lag is not a multiple of the window length");
        }
        const std::size_t span = m1 + static_cast<std::size_t>(std::round(r)) + m2;
        if (windows / span < kMinCorrelationPairs)
        {
            throw ConfigError(ptr, "lag leaves fewer than 200 interval pairs per stream");
        }
    }

    const FpParams params = derive_fp_params(c.traffic);
    auto per_stream = run_ensemble(c, [&](int, RunOutput&& o) {
        std::vector<SampleCorrelation> row;
        for (double T : spec.lags)
        {
            row.push_back(loss_window_correlation(o.windows, spec.t1, spec.t2, T, spec.confidence));
        }
        return row;
    });

    CorrelationSweep sweep;
    sweep.provenance = {c.hash, c.base_seed, c.streams, kGeneratorName, kVersion, params, ParameterSource::derived};
    sweep.t1 = spec.t1;
    sweep.t2 = spec.t2;
    const std::size_t n = per_stream.size();
    std::vector<double> critical_lags;
    std::vector<std::size_t> critical_index;
    for (std::size_t j = 0; j < spec.lags.size(); ++j)
    {
        CorrelationRow row;
        row.T = spec.lags[j];
        const CorrelatorRequest req{spec.t1, spec.t2, row.T, params.sigma2, params.v};
        row.separation_tau = tau_of_t(params, row.T);
        row.regime = classify(req);
        row.analytic = loss_correlator(req, CorrelatorMethod::quadrature, c.analytic).value;
        if (row.regime == CorrelatorRegime::critical && row.T > 0.0)
        {
            row.asymptotic = loss_correlator(req, CorrelatorMethod::asymptotic, c.analytic).value;
            critical_lags.push_back(row.T);
            critical_index.push_back(j);
        }
        if (n == 1)
        {
            const SampleCorrelation& s = per_stream[0][j];
            row.corr = s.value;
            row.se = s.se;
            row.ci_low = s.ci_low;
            row.ci_high = s.ci_high;
        }
        else
        {
            std::vector<double> x;
            for (const auto& s : per_stream)
            {
                x.push_back(s[j].value);
            }
            const MeanEstimate est = replicate_mean(x);
            row.corr = est.mean;
            row.se = est.se;
            const double h = est.half_width(spec.confidence);
            row.ci_low = est.mean - h;
            row.ci_high = est.mean + h;
        }
        sweep.rows.push_back(row);
    }

    if (critical_lags.size() >= 2)
    {
        std::vector<double> corr;
        for (std::size_t j : critical_index)
        {
            corr.push_back(sweep.rows[j].corr);
        }
        sweep.slope = detail::critical_slope(critical_lags, corr);
        if (sweep.slope && n >= 2)
        {
            // Delete-one-stream jackknife.
            std::vector<double> slopes;
            for (std::size_t drop = 0; drop < n; ++drop)
            {
                std::vector<double> c_drop;
                for (std::size_t j : critical_index)
                {
                    double sum = 0.0;
                    for (std::size_t s = 0; s < n; ++s)
                    {
                        sum += s == drop ? 0.0 : per_stream[s][j].value;
                    }
                    c_drop.push_back(sum / static_cast<double>(n - 1));
                }
                if (auto f = detail::critical_slope(critical_lags, c_drop))
                {
                    slopes.push_back(f->slope);
                }
            }
            double mean = 0.0;
            for (double s : slopes)
            {
                mean += s;
            }
            mean /= static_cast<double>(slopes.size());
            double ss = 0.0;
            for (double s : slopes)
            {
                ss += (s - mean) * (s - mean);
            }
            const double k = static_cast<double>(slopes.size());
            sweep.slope->se = std::sqrt((k - 1.0) / k * ss);
        }
    }
    return sweep;
}

} // namespace losssim::harness
