#pragma once

// Drift-diffusion on [0, 1] with zero-flux boundaries, in reduced units:
// tau = sigma2 * t / 2 and v = a / sigma2, so that
//
//     d_tau w = -2v d_l' w + d_l'^2 w,    J_tau = 2v w - d_l' w = 0 at l' = 0, 1.
//
// Two representations of the transition density are provided. The
// eigenseries converges like exp(-n^2 pi^2 tau) and is used for large tau;
// the image series (periodized Gaussians with drift weights plus erfc
// corrections for the Robin-type boundaries) converges like exp(-m^2 / tau)
// and is used below the crossover.

#include "losssim/errors.hpp"
#include "losssim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <variant>

namespace losssim
{

// ---------------------------------------------------------------------------
// Stationary law
// ---------------------------------------------------------------------------

inline constexpr double kSmallDrift = 1e-4;

/// p(l) = 2v e^{2vl} / (e^{2v} - 1).
inline double stationary_density(double ell, double v)
{
    require(ell >= 0.0 && ell <= 1.0, "occupancy must lie in [0, 1]");
    if (std::abs(v) < kSmallDrift)
    {
        return 1.0 + 2.0 * v * (ell - 0.5) + 2.0 * v * v * (ell * ell - ell + 1.0 / 6.0);
    }
    if (v > 0.0)
    {
        return 2.0 * v * std::exp(2.0 * v * (ell - 1.0)) / -std::expm1(-2.0 * v);
    }
    return 2.0 * v * std::exp(2.0 * v * ell) / std::expm1(2.0 * v);
}

/// p(1), the stationary density at the full boundary.
inline double full_boundary_density(double v) { return numerics::x_over_one_minus_exp(2.0 * v); }

/// p(0), the stationary density at the empty boundary.
inline double empty_boundary_density(double v) { return full_boundary_density(-v); }

/// P(occupancy <= ell) under the stationary law.
inline double stationary_cdf(double ell, double v)
{
    if (ell <= 0.0)
    {
        return 0.0;
    }
    if (ell >= 1.0)
    {
        return 1.0;
    }
    if (std::abs(v) < 1e-12)
    {
        return ell;
    }
    if (v > 0.0)
    {
        // e^{2v(l-1)} (1 - e^{-2vl}) / (1 - e^{-2v})
        return std::exp(2.0 * v * (ell - 1.0)) * std::expm1(-2.0 * v * ell) / std::expm1(-2.0 * v);
    }
    return std::expm1(2.0 * v * ell) / std::expm1(2.0 * v);
}

/// Inverse of stationary_cdf for u in [0, 1].
inline double stationary_quantile(double u, double v)
{
    require(u >= 0.0 && u <= 1.0, "probability must lie in [0, 1]");
    if (std::abs(v) < 1e-12)
    {
        return u;
    }
    double ell = 0.0;
    if (v > 0.0)
    {
        ell = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * v)) / (2.0 * v);
    }
    else
    {
        ell = std::log1p(u * std::expm1(2.0 * v)) / (2.0 * v);
    }
    return std::clamp(ell, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Transition density
// ---------------------------------------------------------------------------

struct PropagatorParams
{
    double v = 0.0;
    int series_cutoff = 8;   ///< minimum number of eigenmodes
    int image_cutoff = 8;    ///< image pairs on each side
    double tau_crossover = 0.1;

    void validate() const
    {
        require(std::isfinite(v), "drift v must be finite");
        require(series_cutoff >= 1, "series_cutoff must be >= 1");
        require(image_cutoff >= 1, "image_cutoff must be >= 1");
        require(tau_crossover > 0.0 && std::isfinite(tau_crossover), "tau_crossover must be positive");
    }
};

enum class Representation
{
    automatic,
    eigenseries,
    images,
};

namespace detail
{

inline constexpr int kMaxSeriesTerms = 200000;
inline constexpr double kTailTolerance = 1e-13;

/// Number of eigenmodes bounding the neglected tail by about e^{-36} relative
/// to the O(1) density scale. `extra` adds head-room in the exponent.
inline int series_terms(const PropagatorParams& params, double tau, double d, double extra)
{
    const double v = params.v;
    const double budget = 36.0 + extra + std::max(0.0, v * d - v * v * tau);
    const double k = std::ceil(std::sqrt(budget / (kPi * kPi * tau)));
    if (!(k <= kMaxSeriesTerms))
    {
        throw ConvergenceFailure("eigenseries needs more than " + std::to_string(kMaxSeriesTerms) +
                                 " terms at tau = " + std::to_string(tau));
    }
    return std::max(params.series_cutoff, static_cast<int>(k));
}

inline double eigen_mode(int n, double v, double ell)
{
    const double k = n * kPi;
    return k * std::cos(k * ell) + v * std::sin(k * ell);
}

/// Eigenmode sum without the stationary term.
inline double series_excess(double lp, double tau, double l, const PropagatorParams& params)
{
    const double v = params.v;
    const double d = lp - l;
    const int terms = series_terms(params, tau, d, 2.0);
    double sum = 0.0;
    for (int n = 1; n <= terms; ++n)
    {
        const double lambda = n * n * kPi * kPi + v * v;
        sum += std::exp(v * d - lambda * tau) / lambda * eigen_mode(n, v, lp) * eigen_mode(n, v, l);
    }
    return 2.0 * sum;
}

inline double series_density(double lp, double tau, double l, const PropagatorParams& params)
{
    return stationary_density(lp, params.v) + series_excess(lp, tau, l, params);
}

/// 2v w - d_l' w in reduced units.
inline double series_current(double lp, double tau, double l, const PropagatorParams& params)
{
    const double v = params.v;
    const double d = lp - l;
    const int terms = series_terms(params, tau, d, 8.0);
    double sum = 0.0;
    for (int n = 1; n <= terms; ++n)
    {
        const double lambda = n * n * kPi * kPi + v * v;
        sum += std::exp(v * d - lambda * tau) * eigen_mode(n, v, l) * std::sin(n * kPi * lp);
    }
    return 2.0 * sum;
}

struct ImageTerms
{
    double density = 0.0;
    double current = 0.0;
    double tail = 0.0;
};

/// Image representation; valid for any tau > 0 but only economical when tau
/// is small compared with 1.
inline ImageTerms image_terms(double lp, double tau, double l, const PropagatorParams& params, bool want_current)
{
    const double v = params.v;
    const int cutoff = params.image_cutoff;
    const double d = lp - l;
    const double s = lp + l;
    const double drift = v * d - v * v * tau;
    const double norm = 1.0 / std::sqrt(4.0 * kPi * tau);
    const double root = 2.0 * std::sqrt(tau);
    const double inv_sqrt_pi_tau = 1.0 / std::sqrt(kPi * tau);

    ImageTerms out;
    auto gaussian = [&](double x, double& acc_w, double& acc_j) {
        const double g = norm * std::exp(drift - x * x / (4.0 * tau));
        acc_w += g;
        if (want_current)
        {
            acc_j += g * (v + x / (2.0 * tau));
        }
    };
    // Robin correction tied to the lower wall (shift m >= 0) and the upper wall (m >= 1).
    auto lower = [&](int m, double& acc_w, double& acc_j) {
        const double z = (s + 2.0 * m + 2.0 * v * tau) / root;
        const double scale = 2.0 * v * (lp + m);
        acc_w -= v * numerics::exp_erfc(scale, z);
        if (want_current)
        {
            acc_j -= v * std::exp(scale - z * z) * inv_sqrt_pi_tau;
        }
    };
    auto upper = [&](int m, double& acc_w, double& acc_j) {
        const double y = (2.0 * m - s - 2.0 * v * tau) / root;
        const double scale = 2.0 * v * (lp - m);
        acc_w += v * numerics::exp_erfc(scale, y);
        if (want_current)
        {
            acc_j -= v * std::exp(scale - y * y) * inv_sqrt_pi_tau;
        }
    };

    for (int m = -cutoff; m <= cutoff; ++m)
    {
        gaussian(d - 2.0 * m, out.density, out.current);
        gaussian(s - 2.0 * m, out.density, out.current);
    }
    if (v != 0.0)
    {
        for (int m = 0; m <= cutoff; ++m)
        {
            lower(m, out.density, out.current);
        }
        for (int m = 1; m <= cutoff; ++m)
        {
            upper(m, out.density, out.current);
        }
    }

    // First omitted shell as the truncation estimate.
    double tw = 0.0;
    double tj = 0.0;
    const int next = cutoff + 1;
    for (int m : {-next, next})
    {
        gaussian(d - 2.0 * m, tw, tj);
        gaussian(s - 2.0 * m, tw, tj);
    }
    double cw = 0.0;
    double cj = 0.0;
    if (v != 0.0)
    {
        lower(next, cw, cj);
        upper(next, cw, cj);
    }
    out.tail = std::abs(tw) + std::abs(cw) + (want_current ? std::abs(tj) + std::abs(cj) : 0.0);
    return out;
}

inline void check_tail(const ImageTerms& terms, double tau)
{
    const double scale = std::max(1.0, std::abs(terms.density));
    if (!(terms.tail <= kTailTolerance * scale))
    {
        throw ConvergenceFailure("image series not converged at tau = " + std::to_string(tau) +
                                 " (tail estimate " + std::to_string(terms.tail) + ")");
    }
}

inline bool use_images(const PropagatorParams& params, double tau, Representation rep)
{
    switch (rep)
    {
    case Representation::eigenseries: return false;
    case Representation::images: return true;
    case Representation::automatic: break;
    }
    return tau < params.tau_crossover;
}

inline void check_args(double lp, double tau, double l)
{
    require(lp >= 0.0 && lp <= 1.0 && l >= 0.0 && l <= 1.0, "occupancies must lie in [0, 1]");
    require(std::isfinite(tau), "tau must be finite");
}

} // namespace detail

/// Transition density w(l', tau; l) for tau > 0. Throws ConvergenceFailure
/// rather than truncating a series early.
inline double propagator(double ell_to, double tau, double ell_from, const PropagatorParams& params,
                         Representation rep = Representation::automatic)
{
    detail::check_args(ell_to, tau, ell_from);
    require(tau > 0.0, "propagator is a delta function at tau = 0; use transition()");
    params.validate();
    if (detail::use_images(params, tau, rep))
    {
        const auto terms = detail::image_terms(ell_to, tau, ell_from, params, false);
        detail::check_tail(terms, tau);
        return terms.density;
    }
    return detail::series_density(ell_to, tau, ell_from, params);
}

inline double propagator(double ell_to, double tau, double ell_from, double v)
{
    return propagator(ell_to, tau, ell_from, PropagatorParams{v});
}

/// w(l', tau; l) - p(l'), the part that relaxes to zero. In the eigenseries
/// regime it is summed directly, so it stays accurate when tiny.
inline double propagator_excess(double ell_to, double tau, double ell_from, const PropagatorParams& params,
                                Representation rep = Representation::automatic)
{
    detail::check_args(ell_to, tau, ell_from);
    require(tau > 0.0, "propagator is a delta function at tau = 0");
    params.validate();
    if (detail::use_images(params, tau, rep))
    {
        return propagator(ell_to, tau, ell_from, params, Representation::images) -
               stationary_density(ell_to, params.v);
    }
    return detail::series_excess(ell_to, tau, ell_from, params);
}

/// Like propagator() but defined at tau = 0, where the result is a unit atom at ell_from.
inline std::variant<double, Atom> transition(double ell_to, double tau, double ell_from,
                                             const PropagatorParams& params)
{
    detail::check_args(ell_to, tau, ell_from);
    require(tau >= 0.0, "tau must be non-negative");
    if (tau == 0.0)
    {
        return Atom{ell_from, 1.0};
    }
    return propagator(ell_to, tau, ell_from, params);
}

/// Probability current J = a w - (sigma2/2) d_l' w in physical time units.
/// Derivatives are taken term by term in whichever representation is active.
inline double probability_current(double ell_to, double tau, double ell_from, const PropagatorParams& params,
                                  double sigma2, Representation rep = Representation::automatic)
{
    detail::check_args(ell_to, tau, ell_from);
    require(tau > 0.0, "current is undefined at tau = 0");
    require(sigma2 > 0.0, "sigma2 must be positive");
    params.validate();
    double reduced = 0.0;
    if (detail::use_images(params, tau, rep))
    {
        const auto terms = detail::image_terms(ell_to, tau, ell_from, params, true);
        detail::check_tail(terms, tau);
        reduced = terms.current;
    }
    else
    {
        reduced = detail::series_current(ell_to, tau, ell_from, params);
    }
    return 0.5 * sigma2 * reduced;
}

inline double probability_current(double ell_to, double tau, double ell_from, double v, double sigma2)
{
    return probability_current(ell_to, tau, ell_from, PropagatorParams{v}, sigma2);
}

// ---------------------------------------------------------------------------
// Laplace domain
// ---------------------------------------------------------------------------

struct LaplaceQuery
{
    complex epsilon{1.0, 0.0};
    double ell_from = 0.0;
    double ell_to = 0.0;
};

namespace detail
{

/// W(l', eps; l), analytic in eps away from {0} and the eigenvalues -(n^2 pi^2 + v^2).
/// No half-plane restriction, so it can be fed to the Talbot contour.
inline complex laplace_kernel(double lp, complex eps, double l, double v)
{
    const complex kappa = std::sqrt(eps + v * v);
    const double d = lp - l;
    const double y = lp + l - 1.0;
    const complex c_sum = numerics::cosh_ratio(kappa, y);
    const complex s_sum = numerics::sinh_ratio(kappa, y);
    const complex c_diff = numerics::cosh_ratio(kappa, std::abs(d) - 1.0);
    const complex bracket = 2.0 * v * v / eps * c_sum + 2.0 * kappa * v / eps * s_sum + c_diff + c_sum;
    return 0.5 * std::exp(v * d) / kappa * bracket;
}

/// [kappa coth(kappa) + v] / eps, the transform of w(1, tau; 1).
inline complex full_return(complex eps, double v)
{
    const complex kappa = std::sqrt(eps + v * v);
    return (kappa * numerics::coth(kappa) + v) / eps;
}

} // namespace detail

/// W(l', eps; l) = Laplace transform over tau of the transition density.
inline complex propagator_laplace(const LaplaceQuery& q, double v)
{
    require(q.epsilon.real() > 0.0, "Laplace variable needs Re(eps) > 0");
    require(q.ell_from >= 0.0 && q.ell_from <= 1.0 && q.ell_to >= 0.0 && q.ell_to <= 1.0,
            "occupancies must lie in [0, 1]");
    return detail::laplace_kernel(q.ell_to, q.epsilon, q.ell_from, v);
}

enum class Boundary
{
    empty = 0,
    full = 1,
};

/// Transform of the return density to a boundary: W(1, eps; 1) or W(0, eps; 0).
inline complex boundary_return(Boundary which, complex epsilon, double v)
{
    require(epsilon.real() > 0.0, "Laplace variable needs Re(eps) > 0");
    return detail::full_return(epsilon, which == Boundary::full ? v : -v);
}

// ---------------------------------------------------------------------------
// Half-space kernel near the full boundary
// ---------------------------------------------------------------------------

/// Transition density on (-inf, 1] with a single reflecting wall at l = 1,
/// in physical units (drift a, diffusion sigma2, time t).
inline double half_space_propagator(double ell_to, double t, double ell_from, double a, double sigma2)
{
    require(ell_to <= 1.0 && ell_from <= 1.0, "half-space occupancies must not exceed 1");
    require(t > 0.0 && std::isfinite(t), "t must be positive");
    require(sigma2 > 0.0, "sigma2 must be positive");
    const double d = ell_to - ell_from;
    const double mirror = 2.0 - ell_to - ell_from;
    const double spread = 2.0 * sigma2 * t;
    const double drift = a * d / sigma2 - a * a * t / (2.0 * sigma2);
    const double gaussians = (std::exp(drift - d * d / spread) + std::exp(drift - mirror * mirror / spread)) /
                             std::sqrt(kPi * spread);
    const double v = a / sigma2;
    const double wall = v * numerics::exp_erfc(-2.0 * v * (1.0 - ell_to), (mirror - a * t) / std::sqrt(spread));
    return gaussians + wall;
}

} // namespace losssim
