#pragma once

// Output analysis for correlated simulation data: batch means and Student-t
// intervals.

#include "losssim/errors.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace losssim
{

/// Sample mean with its standard error and the degrees of freedom behind it.
struct MeanEstimate
{
    double mean = 0.0;
    double se = 0.0;
    std::size_t dof = 0;

    /// Half-width of the two-sided interval at the given confidence.
    double half_width(double confidence = 0.95) const;
};

inline double t_quantile(double probability, std::size_t dof)
{
    require(dof >= 1, "Student t needs at least one degree of freedom");
    const boost::math::students_t dist(static_cast<double>(dof));
    return boost::math::quantile(dist, probability);
}

inline double MeanEstimate::half_width(double confidence) const
{
    if (dof == 0)
    {
        return std::numeric_limits<double>::infinity();
    }
    return t_quantile(0.5 + 0.5 * confidence, dof) * se;
}

/// Mean of independent replicates and the usual standard error.
inline MeanEstimate replicate_mean(std::span<const double> x)
{
    require(x.size() >= 2, "need at least two replicates");
    double mean = 0.0;
    for (double v : x)
    {
        mean += v;
    }
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x)
    {
        ss += (v - mean) * (v - mean);
    }
    const double n = static_cast<double>(x.size());
    return {mean, std::sqrt(ss / (n - 1.0) / n), x.size() - 1};
}

/// Batch-means estimate for a correlated sequence. A trailing partial batch is dropped.
inline MeanEstimate batch_means(std::span<const double> x, std::size_t batch_size)
{
    require(batch_size >= 1, "batch size must be >= 1");
    const std::size_t batches = x.size() / batch_size;
    require(batches >= 2, "need at least two complete batches");
    std::vector<double> means(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b)
    {
        double s = 0.0;
        for (std::size_t i = b * batch_size; i < (b + 1) * batch_size; ++i)
        {
            s += x[i];
        }
        means[b] = s / static_cast<double>(batch_size);
    }
    return replicate_mean(means);
}

/// Batch means with a fixed number of contiguous batches.
inline MeanEstimate batch_means_count(std::span<const double> x, std::size_t batches)
{
    require(batches >= 2, "need at least two batches");
    require(x.size() >= batches, "fewer samples than batches");
    return batch_means(x, x.size() / batches);
}

/// Least-squares slope of y on x with its standard error.
struct SlopeFit
{
    double slope = 0.0;
    double intercept = 0.0;
    double se = 0.0;
};

inline SlopeFit fit_line(std::span<const double> x, std::span<const double> y)
{
    require(x.size() == y.size() && x.size() >= 2, "line fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    require(sxx > 0.0, "line fit needs distinct abscissae");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2)
    {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.se = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return fit;
}

} // namespace losssim
