#pragma once

// Estimators computed from a simulated run: sample counterparts of the
// analytic loss and idleness statistics.

#include "losssim/errors.hpp"
#include "losssim/fokker_planck.hpp"
#include "losssim/model.hpp"
#include "losssim/simulator.hpp"
#include "losssim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace losssim
{

inline constexpr std::size_t kMinWindows = 100;
inline constexpr std::size_t kDefaultBatch = 20;
inline constexpr std::size_t kMinIncrements = 1000;
inline constexpr std::size_t kMinCorrelationPairs = 200;
inline constexpr std::size_t kCorrelationBatches = 20;

// ---------------------------------------------------------------------------
// Drift and diffusion
// ---------------------------------------------------------------------------

struct FpEstimate
{
    FpParams params;
    double a_se = 0.0;
    double sigma2_se = 0.0;
    std::uint64_t samples = 0;
};

enum class IncrementSource
{
    /// Increments that stayed inside [0.1, 0.9] throughout.
    banded,
    /// All increments with lost traffic added back and idle service removed.
    free,
};

inline const Welford& increments_of(const RunSummary& summary, IncrementSource source)
{
    return source == IncrementSource::banded ? summary.increments.banded : summary.increments.free;
}

/// Drift and diffusion from the coarse increments recorded during a run.
/// Increments are treated as independent when forming standard errors.
inline FpEstimate estimate_fp_params_detailed(const RunSummary& summary,
                                              IncrementSource source = IncrementSource::banded)
{
    const Welford& w = increments_of(summary, source);
    const double dt = summary.increments.dt;
    if (w.count < kMinIncrements)
    {
        throw InvalidArgument("only " + std::to_string(w.count) + " usable increments; at least 1000 are needed");
    }
    const double n = static_cast<double>(w.count);
    const double var = w.variance();
    FpEstimate out;
    out.params = make_fp_params(w.mean / dt, var / dt);
    out.a_se = std::sqrt(var / n) / dt;
    out.sigma2_se = var * std::sqrt(2.0 / (n - 1.0)) / dt;
    out.samples = w.count;
    return out;
}

inline FpParams estimate_fp_params(const RunSummary& summary, IncrementSource source = IncrementSource::banded)
{
    return estimate_fp_params_detailed(summary, source).params;
}

/// Chan et al. merge of two running-variance accumulators.
inline void merge(Welford& into, const Welford& other)
{
    if (other.count == 0)
    {
        return;
    }
    const double na = static_cast<double>(into.count);
    const double nb = static_cast<double>(other.count);
    const double delta = other.mean - into.mean;
    into.mean += delta * nb / (na + nb);
    into.m2 += other.m2 + delta * delta * na * nb / (na + nb);
    into.count += other.count;
}

/// Increment statistics of several runs pooled into one summary.
inline IncrementStats pool_increments(const std::vector<IncrementStats>& runs)
{
    require(!runs.empty(), "nothing to pool");
    IncrementStats out = runs.front();
    for (std::size_t i = 1; i < runs.size(); ++i)
    {
        require(runs[i].dt == out.dt, "increment lengths differ");
        merge(out.banded, runs[i].banded);
        merge(out.free, runs[i].free);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Occupancy
// ---------------------------------------------------------------------------

/// Kolmogorov-Smirnov distance between the time-weighted occupancy law and
/// the stationary law with drift v, evaluated at the histogram bin edges.
inline double occupancy_ks(const RunSummary& summary, double v)
{
    double cdf = 0.0;
    double worst = 0.0;
    for (int b = 0; b < kHistogramBins; ++b)
    {
        cdf += summary.occupancy_histogram[b];
        const double edge = static_cast<double>(b + 1) / kHistogramBins;
        worst = std::max(worst, std::abs(cdf - stationary_cdf(edge, v)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Windowed moments
// ---------------------------------------------------------------------------

enum class WindowQuantity
{
    loss,
    idle,
};

namespace detail
{

inline double window_value(const WindowSeries& s, std::size_t i, WindowQuantity q)
{
    return q == WindowQuantity::loss ? s.lost_traffic(i) : s.idle_deficit(i);
}

inline std::size_t window_multiple(double t, double base, const char* what)
{
    const double r = t / base;
    const double k = std::round(r);
    require(k >= 1.0 && std::abs(r - k) <= 1e-9 * std::max(1.0, r),
            std::string(what) + " must be a positive multiple of the window length");
    return static_cast<std::size_t>(k);
}

inline std::ptrdiff_t signed_window_multiple(double t, double base, const char* what)
{
    const double r = t / base;
    const double k = std::round(r);
    require(std::abs(r - k) <= 1e-9 * std::max(1.0, std::abs(r)),
            std::string(what) + " must be a multiple of the window length");
    return static_cast<std::ptrdiff_t>(k);
}

} // namespace detail

/// k-th raw sample moment of the per-window amount, with a batch-means standard error.
inline MeanEstimate windowed_moment(const WindowSeries& series, int k, WindowQuantity what,
                                    std::size_t batch = kDefaultBatch)
{
    require(k >= 1 && k <= 4, "sample moment order must lie in [1, 4]");
    if (series.size() < kMinWindows)
    {
        throw InvalidArgument("need at least 100 windows, have " + std::to_string(series.size()));
    }
    std::vector<double> x(series.size());
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        x[i] = std::pow(detail::window_value(series, i, what), k);
    }
    return batch_means(x, batch);
}

inline MeanEstimate windowed_loss_moments(const WindowSeries& series, int k, std::size_t batch = kDefaultBatch)
{
    return windowed_moment(series, k, WindowQuantity::loss, batch);
}

inline MeanEstimate idleness_series(const WindowSeries& series, int k, std::size_t batch = kDefaultBatch)
{
    return windowed_moment(series, k, WindowQuantity::idle, batch);
}

/// Sample variance of the per-window amount (not a batch-means estimate).
inline double windowed_variance(const WindowSeries& series, WindowQuantity what)
{
    require(series.size() >= 2, "need at least two windows");
    Welford w;
    for (std::size_t i = 0; i < series.size(); ++i)
    {
        w.add(detail::window_value(series, i, what));
    }
    return w.variance();
}

/// Fraction of windows with at least one dropped packet (or any idle time).
inline MeanEstimate affected_fraction(const WindowSeries& series, WindowQuantity what,
                                      std::size_t batch = kDefaultBatch)
{
    if (series.size() < kMinWindows)
    {
        throw InvalidArgument("need at least 100 windows, have " + std::to_string(series.size()));
    }
    std::vector<double> x(series.size());
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        x[i] = detail::window_value(series, i, what) > 0.0 ? 1.0 : 0.0;
    }
    return batch_means(x, batch);
}

/// Mean per-window loss over windows that start with occupancy above `threshold`.
struct ConditionalLoss
{
    double mean = 0.0;
    std::size_t windows = 0;
    double sum = 0.0;
};

inline ConditionalLoss conditional_window_loss(const WindowSeries& series, double threshold)
{
    ConditionalLoss out;
    for (std::size_t i = 0; i < series.size(); ++i)
    {
        if (series.start_occupancy(i) > threshold)
        {
            out.sum += series.lost_traffic(i);
            ++out.windows;
        }
    }
    out.mean = out.windows ? out.sum / static_cast<double>(out.windows) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Correlations
// ---------------------------------------------------------------------------

struct SampleCorrelation
{
    double value = 0.0;
    double se = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t pairs = 0; ///< non-overlapping interval pairs the trace supports
};

/// Covariance of the amounts in [s, s + t1) and [s + t1 + T, s + t1 + T + t2)
/// over all window-aligned starts s. T is the gap between the intervals and
/// may be negative down to -t1, where the two intervals start together.
inline SampleCorrelation window_correlation(const WindowSeries& series, double t1, double t2, double T,
                                            WindowQuantity what, double confidence = 0.95)
{
    const double w = series.window_length();
    const std::size_t m1 = detail::window_multiple(t1, w, "t1");
    const std::size_t m2 = detail::window_multiple(t2, w, "t2");
    const std::ptrdiff_t lag = detail::signed_window_multiple(T, w, "T");
    require(lag >= -static_cast<std::ptrdiff_t>(m1), "T must be at least -t1");
    const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(m1) + lag;
    const std::size_t span = std::max(m1, static_cast<std::size_t>(offset) + m2);
    require(series.size() >= span, "trace shorter than one interval pair");

    SampleCorrelation out;
    out.pairs = series.size() / span;
    if (out.pairs < kMinCorrelationPairs)
    {
        throw InvalidArgument("trace supports only " + std::to_string(out.pairs) +
                              " interval pairs; at least 200 are needed");
    }

    // Prefix sums make each interval total O(1).
    std::vector<double> prefix(series.size() + 1, 0.0);
    for (std::size_t i = 0; i < series.size(); ++i)
    {
        prefix[i + 1] = prefix[i] + detail::window_value(series, i, what);
    }
    const std::size_t n = series.size() - span + 1;
    std::vector<double> x(n);
    std::vector<double> y(n);
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t s = 0; s < n; ++s)
    {
        x[s] = prefix[s + m1] - prefix[s];
        const std::size_t b = s + static_cast<std::size_t>(offset);
        y[s] = prefix[b + m2] - prefix[b];
        mx += x[s];
        my += y[s];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    std::vector<double> prod(n);
    for (std::size_t s = 0; s < n; ++s)
    {
        prod[s] = (x[s] - mx) * (y[s] - my);
    }
    const MeanEstimate est = batch_means_count(prod, kCorrelationBatches);
    out.value = est.mean;
    out.se = est.se;
    const double h = est.half_width(confidence);
    out.ci_low = est.mean - h;
    out.ci_high = est.mean + h;
    return out;
}

inline SampleCorrelation loss_window_correlation(const WindowSeries& series, double t1, double t2, double T,
                                                 double confidence = 0.95)
{
    return window_correlation(series, t1, t2, T, WindowQuantity::loss, confidence);
}

} // namespace losssim
