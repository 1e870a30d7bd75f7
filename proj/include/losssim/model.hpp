#pragma once

// Microscopic traffic model of a single drop-tail buffer and its mapping to
// the continuum drift-diffusion parameters.
//
// Lengths are fractions of the buffer capacity (L = 1). Time is in the units
// of the configured inter-arrival distribution; eta0 is the time needed to
// drain a full buffer.

#include "losssim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace losssim
{

namespace dist
{

struct Exponential
{
    double rate;
};

struct Deterministic
{
    double value;
};

struct Uniform
{
    double lo;
    double hi;
};

/// Pareto type I: support [scale, inf), tail index `shape`.
struct Pareto
{
    double shape;
    double scale;
};

/// Exponential with the given untruncated mean, conditioned on x <= cap.
struct TruncatedExponential
{
    double mean;
    double cap;
};

} // namespace dist

using GapDistribution = std::variant<dist::Exponential, dist::Deterministic, dist::Uniform, dist::Pareto>;
using SizeDistribution = std::variant<dist::Deterministic, dist::Uniform, dist::TruncatedExponential>;

/// Packet sizes above this fraction of the buffer are rejected and redrawn.
inline constexpr double kMaxPacketSize = 0.1;
inline constexpr double kMaxMeanPacketSize = 0.05;
inline constexpr double kWarnMeanPacketSize = 0.01;

struct Moments
{
    double mean;
    double variance;
};

namespace detail
{

inline double effective_cap(double cap) { return std::min(cap, kMaxPacketSize); }

} // namespace detail

inline Moments moments(const GapDistribution& d)
{
    return std::visit(
        [](const auto& g) -> Moments {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, dist::Exponential>)
            {
                return {1.0 / g.rate, 1.0 / (g.rate * g.rate)};
            }
            else if constexpr (std::is_same_v<T, dist::Deterministic>)
            {
                return {g.value, 0.0};
            }
            else if constexpr (std::is_same_v<T, dist::Uniform>)
            {
                const double w = g.hi - g.lo;
                return {0.5 * (g.lo + g.hi), w * w / 12.0};
            }
            else
            {
                const double a = g.shape;
                const double mean = a * g.scale / (a - 1.0);
                const double var = a > 2.0 ? g.scale * g.scale * a / ((a - 1.0) * (a - 1.0) * (a - 2.0))
                                           : std::numeric_limits<double>::infinity();
                return {mean, var};
            }
        },
        d);
}

/// Moments of the effective (capped) packet-size law.
inline Moments moments(const SizeDistribution& d)
{
    return std::visit(
        [](const auto& s) -> Moments {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, dist::Deterministic>)
            {
                return {s.value, 0.0};
            }
            else if constexpr (std::is_same_v<T, dist::Uniform>)
            {
                const double hi = detail::effective_cap(s.hi);
                const double w = hi - s.lo;
                return {0.5 * (s.lo + hi), w * w / 12.0};
            }
            else
            {
                const double mu = 1.0 / s.mean;
                const double c = detail::effective_cap(s.cap);
                const double q = std::exp(-mu * c) / -std::expm1(-mu * c);
                const double m1 = 1.0 / mu - c * q;
                const double m2 = 2.0 / (mu * mu) - (c * c + 2.0 * c / mu) * q;
                return {m1, m2 - m1 * m1};
            }
        },
        d);
}

inline std::string name_of(const GapDistribution& d)
{
    static const char* names[] = {"exponential", "deterministic", "uniform", "pareto"};
    return names[d.index()];
}

inline std::string name_of(const SizeDistribution& d)
{
    static const char* names[] = {"deterministic", "uniform", "exponential-truncated"};
    return names[d.index()];
}

/// Renewal traffic feeding the buffer: i.i.d. gaps and i.i.d. packet sizes,
/// deterministic service at rate 1/eta0.
struct TrafficModel
{
    GapDistribution inter_arrival = dist::Exponential{100.0};
    SizeDistribution packet_size = dist::Deterministic{0.01};
    double eta0 = 1.0;

    /// Throws InvalidArgument on violated invariants; returns advisory warnings.
    std::vector<std::string> validate() const;
};

namespace detail
{

inline bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

} // namespace detail

inline std::vector<std::string> TrafficModel::validate() const
{
    using detail::positive_finite;
    require(positive_finite(eta0), "eta0 must be positive and finite");

    std::visit(
        [](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, dist::Exponential>)
            {
                require(positive_finite(g.rate), "exponential gap rate must be positive");
            }
            else if constexpr (std::is_same_v<T, dist::Deterministic>)
            {
                require(positive_finite(g.value), "deterministic gap must be positive");
            }
            else if constexpr (std::is_same_v<T, dist::Uniform>)
            {
                require(std::isfinite(g.lo) && g.lo >= 0.0 && std::isfinite(g.hi) && g.hi > g.lo,
                        "uniform gap needs 0 <= lo < hi");
            }
            else
            {
                require(positive_finite(g.scale), "pareto scale must be positive");
                require(std::isfinite(g.shape) && g.shape > 1.0, "pareto shape must exceed 1 (finite mean)");
            }
        },
        inter_arrival);

    std::visit(
        [](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, dist::Deterministic>)
            {
                require(positive_finite(s.value) && s.value <= kMaxPacketSize,
                        "deterministic packet size must lie in (0, 0.1]");
            }
            else if constexpr (std::is_same_v<T, dist::Uniform>)
            {
                require(std::isfinite(s.lo) && s.lo > 0.0 && s.hi > s.lo && s.hi < 1.0,
                        "uniform packet size needs 0 < lo < hi < 1");
                require(s.lo < kMaxPacketSize, "uniform packet size lower bound must be below the 0.1 cap");
            }
            else
            {
                require(positive_finite(s.mean), "exponential-truncated mean must be positive");
                require(positive_finite(s.cap) && s.cap < 1.0, "exponential-truncated cap must lie in (0, 1)");
            }
        },
        packet_size);

    std::vector<std::string> warnings;
    const double mean_p = moments(packet_size).mean;
    require(mean_p <= kMaxMeanPacketSize, "mean packet size exceeds 0.05 of the buffer");
    if (mean_p > kWarnMeanPacketSize)
    {
        warnings.push_back("mean packet size " + std::to_string(mean_p) +
                           " exceeds 0.01 of the buffer; continuum corrections may be visible");
    }
    return warnings;
}

/// Continuum drift/diffusion parameters of the occupancy process.
struct FpParams
{
    double a = 0.0;      ///< drift, buffer fractions per unit time
    double sigma2 = 0.0; ///< diffusion, buffer fractions^2 per unit time
    double v = 0.0;      ///< reduced drift a / sigma2
    double criticality = 0.0; ///< r_in * eta0 - 1
};

/// Builds FpParams from (a, sigma2) directly. Criticality is unknown here and left NaN.
inline FpParams make_fp_params(double a, double sigma2)
{
    require(std::isfinite(a), "drift must be finite");
    require(std::isfinite(sigma2) && sigma2 > 0.0, "diffusion sigma2 must be positive");
    return {a, sigma2, a / sigma2, std::numeric_limits<double>::quiet_NaN()};
}

/// Renewal-reward diffusion limit of the per-cycle increment X = p - eta/eta0:
/// a = E[X]/mean_gap, sigma2 = Var(X)/mean_gap.
inline FpParams derive_fp_params(const TrafficModel& traffic)
{
    traffic.validate();
    const Moments gap = moments(traffic.inter_arrival);
    const Moments size = moments(traffic.packet_size);
    if (!std::isfinite(gap.variance))
    {
        throw InvalidArgument("inter-arrival variance is infinite; the diffusion limit does not exist");
    }
    const double var_x = size.variance + gap.variance / (traffic.eta0 * traffic.eta0);
    if (!(var_x > 0.0))
    {
        throw InvalidArgument("zero diffusion: packet sizes and gaps are both deterministic");
    }
    FpParams out;
    out.a = size.mean / gap.mean - 1.0 / traffic.eta0;
    out.sigma2 = var_x / gap.mean;
    out.v = out.a / out.sigma2;
    out.criticality = size.mean * traffic.eta0 / gap.mean - 1.0;
    return out;
}

/// Diffusion time tau = sigma2 * t / 2.
inline double tau_of_t(const FpParams& params, double t)
{
    require(t >= 0.0, "time must be non-negative");
    return 0.5 * params.sigma2 * t;
}

inline double t_of_tau(const FpParams& params, double tau)
{
    require(tau >= 0.0, "tau must be non-negative");
    return 2.0 * tau / params.sigma2;
}

struct CriticalityDiagnostic
{
    double distance = 0.0; ///< |r_in * eta0 - 1|
    bool ok = true;
};

inline constexpr double kCriticalityThreshold = 0.1;

/// Advisory check of |r_in eta0 - 1| << 1; analytics evaluate either way.
inline CriticalityDiagnostic check_critical_regime(const FpParams& params)
{
    const double d = std::abs(params.criticality);
    return {d, d <= kCriticalityThreshold};
}

} // namespace losssim
