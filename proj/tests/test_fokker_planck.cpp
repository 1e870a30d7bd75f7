#include "losssim/fokker_planck.hpp"
#include "oracles/fd_solver.hpp"
#include "oracles/quadrature.hpp"
#include "oracles/reference_values.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <vector>

using namespace losssim;
using cplx = std::complex<double>;

namespace
{

const std::vector<double> kDrifts{-5.0, -1.0, -0.3, 0.0, 0.3, 1.0, 2.0, 5.0};
const std::vector<double> kPoints{0.0, 0.2, 0.5, 0.9, 1.0};

double w(double lp, double tau, double l, double v, Representation rep = Representation::automatic)
{
    return propagator(lp, tau, l, PropagatorParams{v}, rep);
}

double mass(double tau, double l, double v, int panels)
{
    return oracle::integrate([&](double lp) { return w(lp, tau, l, v); }, 0.0, 1.0, panels);
}

cplx coth_ratio_free(cplx kappa)
{
    const cplx e = std::exp(-2.0 * kappa);
    return (1.0 + e) / (1.0 - e);
}

} // namespace

// ---------------------------------------------------------------------------
// Stationary law
// ---------------------------------------------------------------------------

TEST(StationaryDensity, UniformAtCriticality)
{
    for (double l : {0.0, 0.25, 0.5, 1.0})
    {
        EXPECT_DOUBLE_EQ(stationary_density(l, 0.0), 1.0);
    }
}

TEST(StationaryDensity, FullBoundaryValue)
{
    EXPECT_NEAR(stationary_density(1.0, 1.0), ref::kP1V1, 1e-14);
    EXPECT_NEAR(full_boundary_density(1.0), ref::kP1V1, 1e-14);
    EXPECT_NEAR(full_boundary_density(0.5), ref::kP1V05, 1e-14);
    EXPECT_NEAR(empty_boundary_density(-1.0), ref::kP1V1, 1e-14);
}

TEST(StationaryDensity, Normalized)
{
    for (double v : {-3.0, -0.1, 0.0, 0.1, 3.0, 1e-5, -5e-5, 40.0})
    {
        const double m = oracle::integrate([&](double l) { return stationary_density(l, v); }, 0.0, 1.0, 4);
        EXPECT_NEAR(m, 1.0, 1e-12) << "v=" << v;
    }
}

TEST(StationaryDensity, SmallDriftSeriesIsContinuous)
{
    for (double l : {0.0, 0.3, 1.0})
    {
        const double below = stationary_density(l, 0.999999e-4);
        const double above = stationary_density(l, 1.000001e-4);
        // The two drifts differ by 2e-10 and |dp/dv| <= 1.
        EXPECT_NEAR(below, above, 5e-10);
    }
}

TEST(StationaryDensity, CdfAndQuantile)
{
    for (double v : {-2.0, -1e-6, 0.0, 0.7, 4.0})
    {
        for (double l : {0.1, 0.5, 0.93})
        {
            const double c = oracle::integrate([&](double x) { return stationary_density(x, v); }, 0.0, l, 2);
            EXPECT_NEAR(stationary_cdf(l, v), c, 1e-12);
            EXPECT_NEAR(stationary_quantile(stationary_cdf(l, v), v), l, 1e-10);
        }
    }
    EXPECT_EQ(stationary_quantile(0.0, 1.0), 0.0);
    EXPECT_EQ(stationary_quantile(1.0, -1.0), 1.0);
}

// ---------------------------------------------------------------------------
// Propagator
// ---------------------------------------------------------------------------

TEST(Propagator, LongTimeLimitIsStationary)
{
    for (double l : {0.0, 0.4, 1.0})
    {
        for (double lp : {0.0, 0.7, 1.0})
        {
            EXPECT_NEAR(w(lp, 5.0, l, 0.0), 1.0, 1e-15);
        }
    }
}

TEST(Propagator, RepresentationsAgreeAtSmallTau)
{
    const double a = w(0.5, 0.05, 0.5, 0.0, Representation::eigenseries);
    const double b = w(0.5, 0.05, 0.5, 0.0, Representation::images);
    EXPECT_NEAR(a, b, 1e-10);
}

TEST(Propagator, RepresentationsAgreeAtCrossover)
{
    for (double tau : {0.1, 0.03})
    {
        for (double v : kDrifts)
        {
            for (double l : kPoints)
            {
                for (double lp : kPoints)
                {
                    const double a = w(lp, tau, l, v, Representation::eigenseries);
                    const double b = w(lp, tau, l, v, Representation::images);
                    EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a)))
                        << "tau=" << tau << " v=" << v << " l=" << l << " lp=" << lp;
                }
            }
        }
    }
}

TEST(Propagator, ReferenceValues)
{
    EXPECT_NEAR(w(0.8, 0.3, 0.2, 1.0), ref::kPropagatorV1Tau03, 1e-13);
    EXPECT_NEAR(w(0.1, 0.02, 0.15, -2.0), ref::kPropagatorVm2Tau002, 1e-12);
}

TEST(Propagator, NormalizedExample)
{
    EXPECT_NEAR(mass(0.3, 0.2, 1.0, 1), 1.0, 1e-8);
}

TEST(Propagator, NormalizedOnGrid)
{
    for (double tau : {0.01, 0.1, 1.0})
    {
        for (double v : kDrifts)
        {
            for (double l : {0.0, 0.3, 1.0})
            {
                EXPECT_NEAR(mass(tau, l, v, 16), 1.0, 1e-8) << "tau=" << tau << " v=" << v << " l=" << l;
            }
        }
    }
}

TEST(Propagator, Nonnegative)
{
    for (double tau : {1e-3, 0.02, 0.1, 0.5})
    {
        for (double v : kDrifts)
        {
            for (double l : kPoints)
            {
                for (double lp : kPoints)
                {
                    EXPECT_GE(w(lp, tau, l, v), -1e-12);
                }
            }
        }
    }
}

TEST(Propagator, Reversibility)
{
    for (double tau : {0.01, 0.08, 0.3, 2.0})
    {
        for (double v : kDrifts)
        {
            for (double l : kPoints)
            {
                for (double lp : kPoints)
                {
                    const double lhs = stationary_density(l, v) * w(lp, tau, l, v);
                    const double rhs = stationary_density(lp, v) * w(l, tau, lp, v);
                    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max(1.0, std::abs(lhs)));
                }
            }
        }
    }
}

TEST(Propagator, ChapmanKolmogorov)
{
    for (double t1 : {0.05, 0.5})
    {
        for (double t2 : {0.05, 0.5})
        {
            for (double v : {-2.0, 0.0, 1.5})
            {
                for (double l : {0.1, 0.5, 0.95})
                {
                    for (double lpp : {0.0, 0.4, 1.0})
                    {
                        const double lhs = oracle::integrate(
                            [&](double m) { return w(lpp, t2, m, v) * w(m, t1, l, v); }, 0.0, 1.0, 16, 32);
                        EXPECT_NEAR(lhs, w(lpp, t1 + t2, l, v), 1e-7)
                            << "t1=" << t1 << " t2=" << t2 << " v=" << v;
                    }
                }
            }
        }
    }
}

TEST(Propagator, LongTimeDecayRate)
{
    for (double v : {-2.0, 0.0, 0.5, 3.0})
    {
        const double lambda1 = kPi * kPi + v * v;
        const double bound = 2.0 * std::exp(std::abs(v)) * (kPi + std::abs(v)) * (kPi + std::abs(v)) / lambda1;
        for (double tau : {1.0, 2.0})
        {
            for (double l : {0.0, 0.5, 1.0})
            {
                double sup = 0.0;
                for (int i = 0; i <= 100; ++i)
                {
                    const double lp = i / 100.0;
                    sup = std::max(sup, std::abs(w(lp, tau, l, v) - stationary_density(lp, v)));
                }
                EXPECT_LE(sup, 1.01 * bound * std::exp(-lambda1 * tau)) << "v=" << v << " tau=" << tau;
            }
        }
    }
}

TEST(Propagator, ExcessRelaxesAtSlowestRate)
{
    const double v = 0.5;
    const double lambda1 = kPi * kPi + v * v;
    const PropagatorParams params{v};
    const double e1 = propagator_excess(1.0, 4.0, 1.0, params);
    const double e2 = propagator_excess(1.0, 5.0, 1.0, params);
    EXPECT_GT(e1, 0.0);
    EXPECT_NEAR(e2 / e1, std::exp(-lambda1), 1e-12);
}

TEST(Propagator, MatchesFiniteVolumeSolution)
{
    const double v = 0.8;
    const double tau = 0.2;
    auto u0 = [](double x) { return 1.0 + 0.6 * std::cos(kPi * x) + 0.3 * std::cos(3.0 * kPi * x); };
    oracle::DriftDiffusionFv fv(800, v);
    fv.set(u0);
    fv.advance(tau, 1600);
    for (int i : {0, 150, 400, 640, 799})
    {
        const double x = fv.center(i);
        const double exact =
            oracle::integrate([&](double l) { return w(x, tau, l, v) * u0(l); }, 0.0, 1.0, 8, 32);
        EXPECT_NEAR(fv.values()[i], exact, 2e-5) << "x=" << x;
    }
}

TEST(Propagator, TauZeroIsAnAtom)
{
    EXPECT_THROW(w(0.5, 0.0, 0.5, 0.0), InvalidArgument);
    const auto t = transition(0.5, 0.0, 0.3, PropagatorParams{1.0});
    ASSERT_TRUE(std::holds_alternative<Atom>(t));
    EXPECT_EQ(std::get<Atom>(t).location, 0.3);
    EXPECT_EQ(std::get<Atom>(t).mass, 1.0);
    const auto u = transition(0.5, 0.2, 0.3, PropagatorParams{1.0});
    EXPECT_DOUBLE_EQ(std::get<double>(u), w(0.5, 0.2, 0.3, 1.0));
}

TEST(Propagator, RejectsBadInput)
{
    EXPECT_THROW(w(1.2, 0.1, 0.5, 0.0), InvalidArgument);
    EXPECT_THROW(w(0.5, -0.1, 0.5, 0.0), InvalidArgument);
    PropagatorParams p{0.0};
    p.image_cutoff = 0;
    EXPECT_THROW(propagator(0.5, 0.1, 0.5, p), InvalidArgument);
    p = PropagatorParams{0.0};
    p.tau_crossover = 0.0;
    EXPECT_THROW(propagator(0.5, 0.1, 0.5, p), InvalidArgument);
}

TEST(Propagator, TruncationIsReportedNotHidden)
{
    PropagatorParams p{0.0};
    p.image_cutoff = 1;
    EXPECT_THROW(propagator(0.5, 3.0, 0.5, p, Representation::images), ConvergenceFailure);
    EXPECT_THROW(propagator(0.5, 1e-13, 0.5, p, Representation::eigenseries), ConvergenceFailure);
}

// ---------------------------------------------------------------------------
// Current
// ---------------------------------------------------------------------------

TEST(ProbabilityCurrent, VanishesAtWalls)
{
    for (double l : {0.0, 0.3, 0.8, 1.0})
    {
        for (double lp : {0.0, 1.0})
        {
            EXPECT_NEAR(probability_current(lp, 0.2, l, 0.7, 2.0), 0.0, 1e-8);
            EXPECT_NEAR(probability_current(lp, 0.03, l, 0.7, 2.0), 0.0, 1e-8);
        }
    }
}

TEST(ProbabilityCurrent, ZeroInStationaryState)
{
    for (double v : {-1.5, 0.0, 0.7})
    {
        for (double lp : {0.0, 0.2, 0.5, 0.77, 1.0})
        {
            EXPECT_NEAR(probability_current(lp, 30.0, 0.4, v, 0.01), 0.0, 1e-14);
        }
    }
}

TEST(ProbabilityCurrent, ContinuityEquation)
{
    const double v = 0.7;
    const double h = 1e-4;
    for (double tau : {0.05, 0.2})
    {
        for (double l : {0.2, 0.6})
        {
            auto inner = [&](double t) {
                return oracle::integrate([&](double lp) { return w(lp, t, l, v); }, 0.0, 0.5, 4);
            };
            const double dmass = (inner(tau + h) - inner(tau - h)) / (2.0 * h);
            const double flux = -probability_current(0.5, tau, l, v, 2.0) + probability_current(0.0, tau, l, v, 2.0);
            EXPECT_NEAR(dmass, flux, 1e-5) << "tau=" << tau << " l=" << l;
        }
    }
}

TEST(ProbabilityCurrent, RepresentationsAgree)
{
    const PropagatorParams p{-1.2};
    for (double l : kPoints)
    {
        for (double lp : {0.1, 0.5, 0.85})
        {
            const double a = probability_current(lp, 0.1, l, p, 2.0, Representation::eigenseries);
            const double b = probability_current(lp, 0.1, l, p, 2.0, Representation::images);
            EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a)));
        }
    }
}

TEST(ProbabilityCurrent, PhysicalUnits)
{
    const double reduced = probability_current(0.4, 0.3, 0.2, 0.5, 2.0);
    EXPECT_NEAR(probability_current(0.4, 0.3, 0.2, 0.5, 0.01), 0.005 * reduced, 1e-17);
}

// ---------------------------------------------------------------------------
// Laplace domain
// ---------------------------------------------------------------------------

TEST(PropagatorLaplace, BoundaryClosedForms)
{
    for (cplx eps : {cplx(1.0, 0.0), cplx(2.0, 3.0), cplx(0.1, -4.0), cplx(5e5, 1.0)})
    {
        for (double v : {-2.0, 0.0, 0.5})
        {
            const cplx kappa = std::sqrt(eps + v * v);
            const cplx full = (kappa * coth_ratio_free(kappa) + v) / eps;
            const cplx empty = (kappa * coth_ratio_free(kappa) - v) / eps;
            const cplx a = propagator_laplace({eps, 1.0, 1.0}, v);
            const cplx b = propagator_laplace({eps, 0.0, 0.0}, v);
            EXPECT_LT(std::abs(a - full), 1e-13 * std::abs(full));
            EXPECT_LT(std::abs(b - empty), 1e-13 * std::abs(empty));
            EXPECT_LT(std::abs(boundary_return(Boundary::full, eps, v) - full), 1e-13 * std::abs(full));
            EXPECT_LT(std::abs(boundary_return(Boundary::empty, eps, v) - empty), 1e-13 * std::abs(empty));
        }
    }
}

TEST(PropagatorLaplace, LargeArgumentStaysFinite)
{
    const cplx r = propagator_laplace({cplx(1e7, 0.0), 0.3, 0.35}, 2.0);
    EXPECT_TRUE(std::isfinite(r.real()) && std::isfinite(r.imag()));
    EXPECT_GT(r.real(), 0.0);
}

TEST(PropagatorLaplace, MatchesNumericTransform)
{
    const double v = 0.5;
    // tau = s^2 removes the 1/sqrt(tau) behaviour at the origin.
    auto f = [&](double s) { return 2.0 * s * std::exp(-2.0 * s * s) * (s > 0.0 ? w(0.7, s * s, 0.7, v) : 0.0); };
    const double numeric = oracle::integrate(f, 0.0, 5.0, 50);
    const cplx closed = propagator_laplace({cplx(2.0, 0.0), 0.7, 0.7}, v);
    EXPECT_NEAR(closed.real(), numeric, 1e-6 * numeric);
    EXPECT_EQ(closed.imag(), 0.0);
}

TEST(PropagatorLaplace, MatchesNumericTransformOffDiagonal)
{
    for (double v : {-1.0, 0.0, 2.0})
    {
        for (auto [lp, l] : {std::pair{0.2, 0.9}, std::pair{1.0, 0.0}, std::pair{0.55, 0.5}})
        {
            auto f = [&](double s) {
                return 2.0 * s * std::exp(-3.0 * s * s) * (s > 0.0 ? w(lp, s * s, l, v) : 0.0);
            };
            const double numeric = oracle::integrate(f, 0.0, 5.0, 50);
            const double closed = propagator_laplace({cplx(3.0, 0.0), l, lp}, v).real();
            EXPECT_NEAR(closed, numeric, 1e-6 * numeric) << "v=" << v << " lp=" << lp << " l=" << l;
        }
    }
}

TEST(PropagatorLaplace, RejectsLeftHalfPlane)
{
    EXPECT_THROW(propagator_laplace({cplx(-1.0, 0.0), 0.5, 0.5}, 0.0), InvalidArgument);
    EXPECT_THROW(boundary_return(Boundary::full, cplx(0.0, 1.0), 0.0), InvalidArgument);
}

TEST(BoundaryReturn, CriticalValue)
{
    const cplx r = boundary_return(Boundary::full, cplx(1.0, 0.0), 0.0);
    EXPECT_NEAR(r.real(), ref::kBoundaryReturnV0Eps1, 1e-15);
    EXPECT_EQ(r.imag(), 0.0);
}

TEST(BoundaryReturn, MirrorSymmetry)
{
    for (cplx eps : {cplx(0.3, 0.0), cplx(1.0, 2.0), cplx(40.0, -7.0)})
    {
        for (double v : {-3.0, -0.5, 0.0, 0.5, 3.0})
        {
            EXPECT_EQ(boundary_return(Boundary::empty, eps, v), boundary_return(Boundary::full, eps, -v));
        }
    }
}

TEST(BoundaryReturn, SmallEpsilonLimit)
{
    const double v = 0.5;
    const cplx eps(1e-7, 0.0);
    const cplx r = eps * boundary_return(Boundary::full, eps, v);
    EXPECT_NEAR(r.real(), ref::kP1V05, 1e-6);
}

// ---------------------------------------------------------------------------
// Half-space kernel
// ---------------------------------------------------------------------------

TEST(HalfSpace, NoDriftIsGaussianPlusMirror)
{
    const double sigma2 = 0.01;
    const double t = 2.0;
    for (double l : {0.6, 0.95})
    {
        for (double lp : {0.5, 0.9, 1.0})
        {
            const double s = 2.0 * sigma2 * t;
            const double g = (std::exp(-(lp - l) * (lp - l) / s) + std::exp(-(2.0 - lp - l) * (2.0 - lp - l) / s)) /
                             std::sqrt(kPi * s);
            EXPECT_NEAR(half_space_propagator(lp, t, l, 0.0, sigma2), g, 1e-14 * g);
        }
    }
}

TEST(HalfSpace, Normalized)
{
    for (double a : {-0.1, 0.0, 0.05})
    {
        auto f = [&](double lp) { return half_space_propagator(lp, 1.0, 0.9, a, 0.01); };
        EXPECT_NEAR(oracle::integrate(f, -2.0, 1.0, 30), 1.0, 1e-6) << "a=" << a;
    }
}

TEST(HalfSpace, ZeroFluxAtWall)
{
    const double a = 0.02;
    const double sigma2 = 0.01;
    const double h = 1e-6;
    const double wall = half_space_propagator(1.0, 1.5, 0.85, a, sigma2);
    const double slope = (wall - half_space_propagator(1.0 - h, 1.5, 0.85, a, sigma2)) / h;
    EXPECT_NEAR(a * wall - 0.5 * sigma2 * slope, 0.0, 1e-6);
}

TEST(HalfSpace, AgreesWithTwoWallsNearFullBoundary)
{
    const double sigma2 = 0.01;
    const double tau = 0.001;
    const double t = 2.0 * tau / sigma2;
    for (double v : {-1.5, 0.0, 0.5})
    {
        const double a = v * sigma2;
        for (double l : {0.9, 0.96, 1.0})
        {
            for (double lp : {0.9, 0.93, 0.99, 1.0})
            {
                EXPECT_NEAR(half_space_propagator(lp, t, l, a, sigma2), w(lp, tau, l, v), 1e-8)
                    << "v=" << v << " l=" << l << " lp=" << lp;
            }
        }
    }
}
