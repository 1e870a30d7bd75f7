#pragma once

// Numerical building blocks shared by the analytic modules: overflow-safe
// hyperbolic ratios, a scaled complementary error function, fixed-Talbot
// Laplace inversion and adaptive Gauss-Kronrod quadrature wrappers.

#include "losssim/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <sstream>
#include <vector>

namespace losssim
{

using complex = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// A computed value together with an estimate of its absolute error.
struct Estimate
{
    double value = 0.0;
    double error = 0.0;
};

/// Point mass standing in for a density that has collapsed to a delta.
struct Atom
{
    double location = 0.0;
    double mass = 1.0;
};

namespace numerics
{

/// e^{log_scale} * erfc(x), finite whenever the product is representable.
inline double exp_erfc(double log_scale, double x)
{
    if (x < 26.0)
    {
        const double e = std::erfc(x);
        if (std::abs(log_scale) < 700.0)
        {
            return std::exp(log_scale) * e;
        }
        return std::exp(log_scale + std::log(e));
    }
    // Asymptotic expansion; four terms give full double precision past x = 26.
    const double inv2 = 1.0 / (x * x);
    const double series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2;
    return std::exp(log_scale - x * x) * series / (x * std::sqrt(kPi));
}

/// cosh(k*y) / sinh(k) for Re(k) > 0 and |y| <= 1, evaluated without forming
/// either hyperbolic function on its own.
inline complex cosh_ratio(complex k, double y)
{
    const double ay = std::abs(y);
    const complex num = std::exp(k * (ay - 1.0)) + std::exp(-k * (ay + 1.0));
    return num / (1.0 - std::exp(-2.0 * k));
}

/// sinh(k*y) / sinh(k) for Re(k) > 0 and |y| <= 1.
inline complex sinh_ratio(complex k, double y)
{
    const double ay = std::abs(y);
    const complex num = std::exp(k * (ay - 1.0)) - std::exp(-k * (ay + 1.0));
    return (y < 0.0 ? -1.0 : 1.0) * num / (1.0 - std::exp(-2.0 * k));
}

/// coth(k) for Re(k) > 0.
inline complex coth(complex k)
{
    const complex e = std::exp(-2.0 * k);
    return (1.0 + e) / (1.0 - e);
}

/// x / (1 - e^{-x}), continuous through x = 0.
inline double x_over_one_minus_exp(double x)
{
    if (std::abs(x) < 1e-8)
    {
        return 1.0 + 0.5 * x;
    }
    return x / -std::expm1(-x);
}

// ---------------------------------------------------------------------------
// Fixed-Talbot inversion (Abate & Valko contour)
// ---------------------------------------------------------------------------

struct TalbotOptions
{
    int nodes = 32;
    /// A second inversion with this many nodes provides the error estimate.
    int check_nodes = 24;
    double abs_tol = 1e-9;
    double rel_tol = 1e-7;
};

template <class Transform>
double talbot_sum(Transform&& transform, double t, int nodes)
{
    const double r = 2.0 * nodes / (5.0 * t);
    double sum = 0.5 * std::real(complex(transform(complex(r, 0.0)))) * std::exp(r * t);
    for (int k = 1; k < nodes; ++k)
    {
        const double theta = k * kPi / nodes;
        const double cot = std::cos(theta) / std::sin(theta);
        const complex s = r * theta * complex(cot, 1.0);
        const double sigma = theta + (theta * cot - 1.0) * cot;
        const complex term = std::exp(t * s) * complex(transform(s)) * complex(1.0, sigma);
        sum += term.real();
    }
    return r / nodes * sum;
}

struct TalbotValidation
{
    double ramp_max_rel_error = 0.0;  ///< 1/e^2 <-> t
    double decay_max_abs_error = 0.0; ///< 1/(e+1) <-> exp(-t)
    bool passed = false;
};

/// Checks the 32-node contour on two known transform pairs over t in [1e-3, 100].
inline TalbotValidation validate_talbot(int nodes = 32)
{
    TalbotValidation out;
    for (double t : {1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0})
    {
        const double ramp = talbot_sum([](complex e) { return 1.0 / (e * e); }, t, nodes);
        const double decay = talbot_sum([](complex e) { return 1.0 / (e + 1.0); }, t, nodes);
        out.ramp_max_rel_error = std::max(out.ramp_max_rel_error, std::abs(ramp - t) / t);
        out.decay_max_abs_error = std::max(out.decay_max_abs_error, std::abs(decay - std::exp(-t)));
    }
    out.passed = out.ramp_max_rel_error <= 1e-10 && out.decay_max_abs_error <= 1e-10;
    return out;
}

inline void ensure_talbot_validated()
{
    static const TalbotValidation check = validate_talbot();
    if (!check.passed)
    {
        throw ConvergenceFailure("Talbot contour failed validation on known transform pairs");
    }
}

/// Numerical inverse Laplace transform at t > 0. Throws ConvergenceFailure
/// when the two node counts disagree beyond tolerance.
template <class Transform>
Estimate invert_laplace(Transform&& transform, double t, const TalbotOptions& opts = {})
{
    require(t > 0.0 && std::isfinite(t), "Laplace inversion needs t > 0");
    ensure_talbot_validated();
    const double value = talbot_sum(transform, t, opts.nodes);
    const double check = talbot_sum(transform, t, opts.check_nodes);
    const double error = std::abs(value - check);
    if (!std::isfinite(value) || error > opts.abs_tol + opts.rel_tol * std::abs(value))
    {
        throw ConvergenceFailure("Laplace inversion did not converge at t = " + std::to_string(t) +
                                 " (node-count discrepancy " + std::to_string(error) + ")");
    }
    return {value, error};
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

struct QuadratureOptions
{
    double rel_tol = 1e-10;
    /// Cap on the number of subintervals in the adaptive partition.
    int max_intervals = 4000;
    /// Failure threshold as a multiple of the requested tolerance.
    double slack = 1e3;
};

/// Globally adaptive 15-point Gauss-Kronrod on [a, b]: the panel with the
/// largest error estimate is bisected until the summed estimate meets the
/// tolerance relative to the integral of |f|.
template <class F>
Estimate integrate(F&& f, double a, double b, const QuadratureOptions& opts = {})
{
    if (a == b)
    {
        return {};
    }
    using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
    struct Panel
    {
        double a, b, value, error, l1;
    };
    auto evaluate = [&](double lo, double hi) {
        Panel p{lo, hi, 0.0, 0.0, 0.0};
        p.value = Rule::integrate(f, lo, hi, 0, 0.0, &p.error, &p.l1);
        return p;
    };
    auto worse = [](const Panel& x, const Panel& y) { return x.error < y.error; };

    std::vector<Panel> heap{evaluate(a, b)};
    double value = heap[0].value;
    double error = heap[0].error;
    double l1 = heap[0].l1;
    constexpr double roundoff = 100.0 * std::numeric_limits<double>::epsilon();
    auto target = [&] { return std::max(opts.rel_tol, roundoff) * l1; };

    while (error > target() && static_cast<int>(heap.size()) < opts.max_intervals)
    {
        std::pop_heap(heap.begin(), heap.end(), worse);
        const Panel worst = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b))
        {
            heap.push_back(worst);
            std::push_heap(heap.begin(), heap.end(), worse);
            break;
        }
        for (const Panel& half : {evaluate(worst.a, mid), evaluate(mid, worst.b)})
        {
            heap.push_back(half);
            std::push_heap(heap.begin(), heap.end(), worse);
        }
        value = error = l1 = 0.0;
        for (const Panel& p : heap)
        {
            value += p.value;
            error += p.error;
            l1 += p.l1;
        }
    }
    if (!std::isfinite(value) || error > opts.slack * target() + 1e-300)
    {
        std::ostringstream msg;
        msg << "adaptive quadrature did not converge on [" << a << ", " << b << "] (error estimate " << error
            << " against integral of |f| " << l1 << ")";
        throw ConvergenceFailure(msg.str());
    }
    return {value, error};
}

struct BromwichOptions
{
    double abs_tol = 1e-10;
    /// Frequency panels (one period of e^{i w t} each) before giving up.
    int max_panels = 20000;
    /// Consecutive negligible panels required to stop.
    int quiet_panels = 4;
};

/// Inverse Laplace transform by direct quadrature along Re(eps) = 1/t:
/// f(t) = e / pi * int_0^inf Re[F(1/t + i w) e^{i w t}] dw. Slower than the
/// Talbot contour but indifferent to transforms that grow in the left
/// half-plane, such as those carrying a delay factor. Needs |F| to decay
/// along the line.
template <class Transform>
Estimate invert_laplace_bromwich(Transform&& transform, double t, const BromwichOptions& opts = {},
                                 const QuadratureOptions& quad = {})
{
    require(t > 0.0 && std::isfinite(t), "Laplace inversion needs t > 0");
    const double c = 1.0 / t;
    const double scale = std::exp(1.0) / kPi;
    auto g = [&](double w) {
        const complex eps(c, w);
        return (complex(transform(eps)) * std::exp(complex(0.0, w * t))).real();
    };
    const double width = 2.0 * kPi / t;
    Estimate sum;
    int quiet = 0;
    for (int k = 0; k < opts.max_panels; ++k)
    {
        const auto part = integrate(g, k * width, (k + 1) * width, quad);
        sum.value += part.value;
        sum.error += part.error;
        const double envelope = width * std::abs(complex(transform(complex(c, (k + 1) * width))));
        if (scale * (std::abs(part.value) + envelope) < 1e-3 * opts.abs_tol)
        {
            if (++quiet >= opts.quiet_panels)
            {
                return {scale * sum.value, scale * (sum.error + envelope)};
            }
        }
        else
        {
            quiet = 0;
        }
    }
    throw ConvergenceFailure("Bromwich inversion at t = " + std::to_string(t) + " did not settle within " +
                             std::to_string(opts.max_panels) + " periods");
}

/// Integral over [0, width] of f(u, width - u) where f may carry integrable
/// inverse-square-root singularities at both ends. The substitution
/// u = width * sin^2(theta) removes them; both distances are passed so the
/// callee never forms a difference of nearly equal numbers.
template <class F>
Estimate integrate_endpoint_singular(F&& f, double width, const QuadratureOptions& opts = {})
{
    if (width <= 0.0)
    {
        return {};
    }
    auto g = [&](double theta) {
        const double s = std::sin(theta);
        const double c = std::cos(theta);
        const double from_left = width * s * s;
        const double from_right = width * c * c;
        if (from_left <= 0.0 || from_right <= 0.0)
        {
            return 0.0;
        }
        return f(from_left, from_right) * 2.0 * width * s * c;
    };
    return integrate(g, 0.0, 0.5 * kPi, opts);
}

} // namespace numerics
} // namespace losssim
