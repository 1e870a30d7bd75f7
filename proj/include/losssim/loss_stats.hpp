#pragma once

// Statistics of the traffic lost at the full boundary over an observation
// window, in the stationary regime. Everything is expressed in reduced time
// tau = sigma2 t / 2, in which the loss rate density at l = 1 equals 1.
//
// The building block is the return density h_1(y) = w(1, y; 1) and its
// convolution powers h_j = h_1 * ... * h_1, with Laplace transform W^j where
// W = W(1, eps; 1).

#include "losssim/errors.hpp"
#include "losssim/fokker_planck.hpp"
#include "losssim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

namespace losssim
{

/// Tunables shared by the numerical evaluators.
struct AnalyticOptions
{
    numerics::TalbotOptions inversion{};
    numerics::BromwichOptions bromwich{};
    numerics::QuadratureOptions quadrature{};
    int series_cutoff = 8;
    int image_cutoff = 8;
    double tau_crossover = 0.1;

    PropagatorParams propagator(double v) const { return {v, series_cutoff, image_cutoff, tau_crossover}; }
};

/// Regime bounds for the closed-form short- and long-time branches.
inline constexpr double kShortTimeTau = 0.01;
inline constexpr double kLongTimeTau = 100.0;
inline constexpr int kMaxMomentOrder = 6;

// ---------------------------------------------------------------------------
// First moment and loss rate
// ---------------------------------------------------------------------------

/// Loss rate density at the full boundary per unit time, sigma2 / 2.
inline double loss_rate_density(double sigma2)
{
    require(std::isfinite(sigma2) && sigma2 > 0.0, "sigma2 must be positive");
    return 0.5 * sigma2;
}

/// Expected traffic lost in a window of reduced length tau.
inline double mean_loss(double tau, double v)
{
    require(tau >= 0.0 && std::isfinite(tau), "tau must be non-negative");
    return full_boundary_density(v) * tau;
}

/// Expected unused service in a window of reduced length tau.
inline double mean_idle(double tau, double v) { return mean_loss(tau, -v); }

// ---------------------------------------------------------------------------
// Convolution powers of the return density
// ---------------------------------------------------------------------------

namespace detail
{

/// Piecewise Chebyshev interpolant on panels of [0, s_max].
class PanelInterpolant
{
public:
    static constexpr int kNodes = 20;

    explicit PanelInterpolant(double s_max)
    {
        edges_.push_back(0.0);
        while (edges_.back() < s_max)
        {
            const double s = edges_.back();
            const double next = s + 0.1 * std::max(1.0, s);
            edges_.push_back(next >= s_max * (1.0 - 1e-12) ? s_max : next);
        }
        for (int i = 0; i < kNodes; ++i)
        {
            const double theta = (2.0 * i + 1.0) * kPi / (2.0 * kNodes);
            unit_nodes_[i] = std::cos(theta);
            weights_[i] = (i % 2 == 0 ? 1.0 : -1.0) * std::sin(theta);
        }
        values_.assign(panels() * kNodes, 0.0);
    }

    int panels() const { return static_cast<int>(edges_.size()) - 1; }
    double s_max() const { return edges_.back(); }
    const std::vector<double>& edges() const { return edges_; }

    double node(int panel, int i) const
    {
        const double a = edges_[panel];
        const double b = edges_[panel + 1];
        return 0.5 * (a + b) + 0.5 * (b - a) * unit_nodes_[i];
    }

    double& value(int panel, int i) { return values_[panel * kNodes + i]; }

    double operator()(double s) const
    {
        const auto it = std::upper_bound(edges_.begin(), edges_.end(), s);
        int panel = static_cast<int>(it - edges_.begin()) - 1;
        panel = std::clamp(panel, 0, panels() - 1);
        const double a = edges_[panel];
        const double b = edges_[panel + 1];
        const double x = (2.0 * s - a - b) / (b - a);
        const double* f = &values_[panel * kNodes];
        double num = 0.0;
        double den = 0.0;
        for (int i = 0; i < kNodes; ++i)
        {
            const double diff = x - unit_nodes_[i];
            if (diff == 0.0)
            {
                return f[i];
            }
            const double c = weights_[i] / diff;
            num += c * f[i];
            den += c;
        }
        return num / den;
    }

private:
    std::vector<double> edges_;
    std::vector<double> values_;
    double unit_nodes_[kNodes]{};
    double weights_[kNodes]{};
};

/// Tables of h_j(y) and H_j(y) = int_0^y h_j for j = 1..levels and y in (0, tau_max].
/// Both are stored as smooth functions of s = sqrt(y) after removing the
/// leading power: g_j(s) = s^{2-j} h_j(s^2), G_j(s) = s^{-j} H_j(s^2).
class ReturnPowers
{
public:
    ReturnPowers(double v, double tau_max, int levels, const AnalyticOptions& opts)
        : params_(opts.propagator(v)), opts_(opts)
    {
        require(levels >= 1, "need at least one convolution level");
        const double s_max = std::sqrt(tau_max);
        for (int j = 1; j <= levels; ++j)
        {
            g_.emplace_back(s_max);
            build_level(j);
            big_g_.emplace_back(s_max);
            build_cumulative(j);
        }
    }

    /// w(1, y; 1) evaluated directly.
    double kernel(double y) const { return propagator(1.0, y, 1.0, params_); }

    double h(int j, double y) const
    {
        if (j == 1)
        {
            return kernel(y);
        }
        const double s = std::sqrt(y);
        return g_[j - 1](s) * std::pow(s, j - 2);
    }

    double cumulative(int j, double y) const
    {
        if (j == 0)
        {
            return 1.0;
        }
        if (y <= 0.0)
        {
            return 0.0;
        }
        const double s = std::sqrt(y);
        return big_g_[j - 1](s) * std::pow(s, j);
    }

    const PanelInterpolant& table(int j) const { return g_[j - 1]; }

private:
    numerics::QuadratureOptions inner_options() const
    {
        auto q = opts_.quadrature;
        q.rel_tol = std::min(q.rel_tol, 1e-11);
        return q;
    }

    void build_level(int j)
    {
        PanelInterpolant& table = g_[j - 1];
        const auto q = inner_options();
        for (int p = 0; p < table.panels(); ++p)
        {
            for (int i = 0; i < PanelInterpolant::kNodes; ++i)
            {
                const double s = table.node(p, i);
                const double y = s * s;
                double hy = 0.0;
                if (j == 1)
                {
                    hy = kernel(y);
                }
                else
                {
                    const auto& prev = g_[j - 2];
                    auto integrand = [&](double u, double rest) {
                        const double su = std::sqrt(u);
                        return prev(su) * std::pow(su, j - 3) * kernel(rest);
                    };
                    hy = numerics::integrate_endpoint_singular(integrand, y, q).value;
                }
                table.value(p, i) = hy * std::pow(s, 2 - j);
            }
        }
    }

    void build_cumulative(int j)
    {
        const PanelInterpolant& g = g_[j - 1];
        PanelInterpolant& out = big_g_[j - 1];
        const auto q = inner_options();
        // dH/ds = 2 s h(s^2) = 2 s^{j-1} g(s)
        auto density = [&](double s) { return 2.0 * std::pow(s, j - 1) * g(s); };
        double below = 0.0;
        for (int p = 0; p < out.panels(); ++p)
        {
            const double a = out.edges()[p];
            for (int i = 0; i < PanelInterpolant::kNodes; ++i)
            {
                const double s = out.node(p, i);
                const double part = numerics::integrate(density, a, s, q).value;
                out.value(p, i) = (below + part) / std::pow(s, j);
            }
            below += numerics::integrate(density, a, out.edges()[p + 1], q).value;
        }
    }

    PropagatorParams params_;
    AnalyticOptions opts_;
    std::vector<PanelInterpolant> g_;
    std::vector<PanelInterpolant> big_g_;
};

/// Integral over [0, s_max] split at the panel edges of `grid`.
template <class F>
Estimate integrate_panels(F&& f, const PanelInterpolant& grid, const numerics::QuadratureOptions& q)
{
    Estimate total;
    for (int p = 0; p < grid.panels(); ++p)
    {
        const auto part = numerics::integrate(f, grid.edges()[p], grid.edges()[p + 1], q);
        total.value += part.value;
        total.error += part.error;
    }
    return total;
}

inline double factorial(int k) { return std::tgamma(k + 1.0); }

/// W(1, eps; 1) without the half-plane check, for use on inversion contours.
inline complex full_return_any(complex eps, double v) { return full_return(eps, v); }

} // namespace detail

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

enum class MomentMethod
{
    convolution,
    laplace_inversion,
    asymptotic,
};

struct LossMomentRequest
{
    int order = 1;
    double tau = 0.0;
    double v = 0.0;
    MomentMethod method = MomentMethod::convolution;

    void validate() const
    {
        require(order >= 1 && order <= kMaxMomentOrder, "moment order must lie in [1, 6]");
        require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
        require(std::isfinite(v), "v must be finite");
        if (method == MomentMethod::asymptotic && order > 1)
        {
            require(tau <= kShortTimeTau || tau >= kLongTimeTau,
                    "asymptotic moments need tau <= 0.01 or tau >= 100");
        }
    }
};

/// k-th raw moment of the loss in a window of reduced length tau.
inline Estimate loss_moment(const LossMomentRequest& req, const AnalyticOptions& opts = {})
{
    req.validate();
    const int k = req.order;
    const double tau = req.tau;
    const double p1 = full_boundary_density(req.v);
    if (k == 1)
    {
        return {p1 * tau, 0.0};
    }
    const double kfact = detail::factorial(k);

    switch (req.method)
    {
    case MomentMethod::asymptotic:
        if (tau <= kShortTimeTau)
        {
            return {kfact * p1 * std::pow(tau, 0.5 * (k + 1)) / std::tgamma(0.5 * (k + 3)), 0.0};
        }
        return {std::pow(p1 * tau, k), 0.0};

    case MomentMethod::laplace_inversion:
    {
        const double v = req.v;
        auto transform = [&](complex eps) {
            return kfact * p1 * std::pow(detail::full_return_any(eps, v), k - 1) / (eps * eps);
        };
        return numerics::invert_laplace(transform, tau, opts.inversion);
    }

    case MomentMethod::convolution:
        break;
    }

    // k! p1 int_0^tau (tau - y) h_{k-1}(y) dy, with y = s^2.
    const double s_max = std::sqrt(tau);
    if (k == 2)
    {
        const PropagatorParams params = opts.propagator(req.v);
        detail::PanelInterpolant grid(s_max);
        auto f = [&](double s) {
            if (s <= 0.0)
            {
                return 0.0;
            }
            return 2.0 * (tau - s * s) * s * propagator(1.0, s * s, 1.0, params);
        };
        const auto r = detail::integrate_panels(f, grid, opts.quadrature);
        return {kfact * p1 * r.value, kfact * p1 * r.error};
    }
    const detail::ReturnPowers powers(req.v, tau, k - 1, opts);
    const auto& g = powers.table(k - 1);
    auto f = [&](double s) { return 2.0 * (tau - s * s) * std::pow(s, k - 2) * g(s); };
    const auto r = detail::integrate_panels(f, g, opts.quadrature);
    return {kfact * p1 * r.value, kfact * p1 * r.error};
}

/// Moment conditioned on the occupancy ell at the start of the window.
inline Estimate conditional_loss_moment(int k, double tau, double ell_start, double v,
                                        const AnalyticOptions& opts = {})
{
    require(k >= 1 && k <= kMaxMomentOrder, "moment order must lie in [1, 6]");
    require(tau > 0.0 && std::isfinite(tau), "tau must be positive");
    require(ell_start >= 0.0 && ell_start <= 1.0, "ell must lie in [0, 1]");
    const PropagatorParams params = opts.propagator(v);

    std::optional<detail::ReturnPowers> powers;
    if (k >= 2)
    {
        powers.emplace(v, tau, k - 1, opts);
    }
    // k! int_0^tau w(1, u; ell) H_{k-1}(tau - u) du
    auto f = [&](double u, double rest) {
        const double first = propagator(1.0, u, ell_start, params);
        return first * (k == 1 ? 1.0 : powers->cumulative(k - 1, rest));
    };
    const auto r = numerics::integrate_endpoint_singular(f, tau, opts.quadrature);
    const double kfact = detail::factorial(k);
    return {kfact * r.value, kfact * r.error};
}

// ---------------------------------------------------------------------------
// Distribution of the loss amount
// ---------------------------------------------------------------------------

enum class PdfMethod
{
    inversion,
    asymptotic,
};

struct LossPdfPoint
{
    double x = 0.0;
    double tau = 0.0;
    double v = 0.0;
};

/// Density of the lost amount at x > 0. The no-loss atom at x = 0 is not
/// part of `density`; when the law has collapsed onto a single point the
/// result carries it in `atom` instead.
struct LossPdfValue
{
    double density = 0.0;
    double error = 0.0;
    std::optional<Atom> atom;
};

namespace detail
{

inline constexpr double kNegativeDensityTolerance = 1e-8;

inline void check_point(const LossPdfPoint& pt)
{
    require(pt.x >= 0.0 && std::isfinite(pt.x), "loss amount x must be non-negative");
    require(pt.tau > 0.0 && std::isfinite(pt.tau), "tau must be positive");
    require(std::isfinite(pt.v), "v must be finite");
}

inline double clamp_density(double value, const char* what)
{
    if (value < -kNegativeDensityTolerance)
    {
        throw ConvergenceFailure(std::string(what) + " came out negative (" + std::to_string(value) + ")");
    }
    return std::max(value, 0.0);
}

} // namespace detail

inline LossPdfValue loss_pdf(const LossPdfPoint& pt, PdfMethod method, const AnalyticOptions& opts = {})
{
    detail::check_point(pt);
    const double p1 = full_boundary_density(pt.v);
    if (method == PdfMethod::asymptotic)
    {
        if (pt.tau <= kShortTimeTau)
        {
            return {p1 * std::erfc(pt.x / std::sqrt(4.0 * pt.tau)), 0.0, std::nullopt};
        }
        require(pt.tau >= kLongTimeTau, "asymptotic loss density needs tau <= 0.01 or tau >= 100");
        return {0.0, 0.0, Atom{p1 * pt.tau, 1.0}};
    }
    const double v = pt.v;
    const double x = pt.x;
    auto transform = [&](complex eps) {
        const complex w = detail::full_return_any(eps, v);
        return p1 / (eps * eps * w * w) * std::exp(-x / w);
    };
    // exp(-x/W) acts like a delay of about x/p(1), which the Talbot contour
    // cannot follow once x is comparable to p(1) tau; the vertical line can.
    Estimate r;
    try
    {
        r = numerics::invert_laplace(transform, pt.tau, opts.inversion);
    }
    catch (const ConvergenceFailure&)
    {
        r = numerics::invert_laplace_bromwich(transform, pt.tau, opts.bromwich, opts.quadrature);
    }
    return {detail::clamp_density(r.value, "loss density"), r.error, std::nullopt};
}

enum class ProbabilityMethod
{
    inversion,
    asymptotic,
};

/// Probability that at least one packet is lost in a window of reduced length tau.
inline Estimate prob_any_loss(double tau, double v, ProbabilityMethod method = ProbabilityMethod::inversion,
                              const AnalyticOptions& opts = {})
{
    require(tau >= 0.0 && std::isfinite(tau), "tau must be non-negative");
    require(std::isfinite(v), "v must be finite");
    if (tau == 0.0)
    {
        return {0.0, 0.0};
    }
    const double p1 = full_boundary_density(v);
    if (method == ProbabilityMethod::asymptotic)
    {
        if (tau <= kShortTimeTau)
        {
            return {std::min(1.0, p1 * std::sqrt(4.0 * tau / kPi)), 0.0};
        }
        require(tau >= kLongTimeTau, "asymptotic loss probability needs tau <= 0.01 or tau >= 100");
        return {1.0, 0.0};
    }
    auto transform = [&](complex eps) { return p1 / (eps * eps * detail::full_return_any(eps, v)); };
    const auto r = numerics::invert_laplace(transform, tau, opts.inversion);
    return {std::clamp(r.value, 0.0, 1.0), r.error};
}

/// Density of the lost amount given that something was lost.
inline LossPdfValue conditional_loss_pdf(const LossPdfPoint& pt, PdfMethod method, const AnalyticOptions& opts = {})
{
    detail::check_point(pt);
    if (method == PdfMethod::asymptotic)
    {
        if (pt.tau <= kShortTimeTau)
        {
            const double root = std::sqrt(4.0 * pt.tau);
            return {std::sqrt(kPi) / root * std::erfc(pt.x / root), 0.0, std::nullopt};
        }
        return loss_pdf(pt, method, opts);
    }
    const auto any = prob_any_loss(pt.tau, pt.v, ProbabilityMethod::inversion, opts);
    require(any.value > 0.0, "probability of any loss is zero");
    const auto joint = loss_pdf(pt, method, opts);
    const double density = joint.density / any.value;
    const double error = joint.error / any.value + density * any.error / any.value;
    return {density, error, std::nullopt};
}

// ---------------------------------------------------------------------------
// Variance
// ---------------------------------------------------------------------------

/// coth|v|/|v| - 1/sinh^2|v|, tending to 2/3 at v = 0 and 1/|v| for large |v|.
inline double variance_bracket(double v)
{
    const double x = std::abs(v);
    if (x < 1e-2)
    {
        const double x2 = x * x;
        return 2.0 / 3.0 - 4.0 * x2 / 45.0 + 4.0 * x2 * x2 / 315.0;
    }
    if (x > 350.0)
    {
        return 1.0 / x;
    }
    const double sh = std::sinh(x);
    return 1.0 / (x * std::tanh(x)) - 1.0 / (sh * sh);
}

inline constexpr double kLongTimeVarianceTau = 10.0;

/// Loss variance for windows much longer than the buffer relaxation time.
inline double loss_variance_longtime(double tau, double v)
{
    require(tau >= kLongTimeVarianceTau && std::isfinite(tau), "long-time variance needs tau >= 10");
    require(std::isfinite(v), "v must be finite");
    return mean_loss(tau, v) * variance_bracket(v);
}

// ---------------------------------------------------------------------------
// Temporal correlations
// ---------------------------------------------------------------------------

/// Two windows of lengths t1 and t2 whose gap (end of the first to start of
/// the second) is T. Times are physical; sigma2 maps them to reduced time.
struct CorrelatorRequest
{
    double t1 = 0.0;
    double t2 = 0.0;
    double T = 0.0;
    double sigma2 = 0.0;
    double v = 0.0;

    void validate() const
    {
        require(t1 > 0.0 && t2 > 0.0 && std::isfinite(t1) && std::isfinite(t2), "window lengths must be positive");
        require(T >= 0.0 && std::isfinite(T), "separation T must be non-negative");
        require(sigma2 > 0.0 && std::isfinite(sigma2), "sigma2 must be positive");
        require(std::isfinite(v), "v must be finite");
    }
};

enum class CorrelatorRegime
{
    critical,
    intermediate,
    decayed,
};

/// Separation relative to the relaxation time 2 / sigma2.
inline constexpr double kCriticalSeparationTau = 0.1;
inline constexpr double kDecayedSeparationTau = 10.0;

inline CorrelatorRegime classify(const CorrelatorRequest& req)
{
    const double sep = 0.5 * req.sigma2 * req.T;
    if (sep <= kCriticalSeparationTau)
    {
        return CorrelatorRegime::critical;
    }
    if (sep >= kDecayedSeparationTau)
    {
        return CorrelatorRegime::decayed;
    }
    return CorrelatorRegime::intermediate;
}

enum class CorrelatorMethod
{
    quadrature,
    asymptotic,
};

struct CorrelatorValue
{
    double value = 0.0;
    double error = 0.0;
    /// Magnitude bound in the decayed regime; zero otherwise.
    double bound = 0.0;
    CorrelatorRegime regime = CorrelatorRegime::critical;
};

/// Covariance of the losses in two disjoint windows.
inline CorrelatorValue loss_correlator(const CorrelatorRequest& req, CorrelatorMethod method,
                                       const AnalyticOptions& opts = {})
{
    req.validate();
    const double tau1 = 0.5 * req.sigma2 * req.t1;
    const double tau2 = 0.5 * req.sigma2 * req.t2;
    const double gap = 0.5 * req.sigma2 * req.T;
    const double p1 = full_boundary_density(req.v);
    CorrelatorValue out;
    out.regime = classify(req);

    if (method == CorrelatorMethod::asymptotic)
    {
        switch (out.regime)
        {
        case CorrelatorRegime::critical:
            require(gap > 0.0, "critical asymptote diverges at T = 0");
            out.value = p1 * tau1 * tau2 / std::sqrt(kPi * gap);
            return out;
        case CorrelatorRegime::decayed:
            out.value = 0.0;
            out.bound = p1 * p1 * tau1 * tau2 * std::exp(-req.v * req.v * gap);
            return out;
        case CorrelatorRegime::intermediate:
            break;
        }
        throw InvalidArgument("no asymptotic correlator between the critical and decayed regimes");
    }

    // p1 int K(u) [w(1, gap + u; 1) - p1] du over u in [0, tau1 + tau2], where
    // K(u) is the length of { y1 in [0, tau1] : y1 + u - tau1 in [0, tau2] }.
    const PropagatorParams params = opts.propagator(req.v);
    const double lo = std::min(tau1, tau2);
    const double hi = std::max(tau1, tau2);
    auto weight = [&](double u) { return std::max(0.0, std::min({u, lo, tau1 + tau2 - u})); };
    // u = r^2 keeps the 1/sqrt(gap + u) behaviour of the kernel smooth when
    // the gap is small, and u is never formed as a difference.
    auto f = [&](double r) {
        const double u = r * r;
        const double d = gap + u;
        if (d <= 0.0)
        {
            return 0.0;
        }
        return 2.0 * r * weight(u) * propagator_excess(1.0, d, 1.0, params);
    };
    const double breaks[] = {0.0, lo, hi, tau1 + tau2};
    for (int i = 0; i < 3; ++i)
    {
        const double a = std::sqrt(breaks[i]);
        const double b = std::sqrt(breaks[i + 1]);
        if (b > a)
        {
            const auto r = numerics::integrate(f, a, b, opts.quadrature);
            out.value += p1 * r.value;
            out.error += p1 * r.error;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Idleness
// ---------------------------------------------------------------------------

// Unused service is the loss of the mirrored buffer l -> 1 - l, v -> -v.

inline Estimate idleness_dual(LossMomentRequest req, const AnalyticOptions& opts = {})
{
    req.v = -req.v;
    return loss_moment(req, opts);
}

inline LossPdfValue idleness_dual(LossPdfPoint pt, PdfMethod method, const AnalyticOptions& opts = {})
{
    pt.v = -pt.v;
    return loss_pdf(pt, method, opts);
}

inline CorrelatorValue idleness_dual(CorrelatorRequest req, CorrelatorMethod method, const AnalyticOptions& opts = {})
{
    req.v = -req.v;
    return loss_correlator(req, method, opts);
}

inline double idle_variance_longtime(double tau, double v) { return loss_variance_longtime(tau, -v); }

} // namespace losssim
