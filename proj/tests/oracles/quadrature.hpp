#pragma once

// Fixed Gauss-Legendre rules for test oracles. Deliberately separate from the
// adaptive quadrature in the library.

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace oracle
{

struct Rule
{
    std::vector<double> x;
    std::vector<double> w;
};

/// n-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_n.
inline Rule gauss_legendre(int n)
{
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i)
    {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it)
        {
            double p0 = 1.0;
            double p1 = z;
            for (int k = 2; k <= n; ++k)
            {
                const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16)
            {
                break;
            }
        }
        r.x[i] = z;
        r.w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return r;
}

/// Composite rule: `panels` equal panels of an n-point rule on [a, b].
template <class F>
double integrate(F&& f, double a, double b, int panels = 1, int n = 64)
{
    static thread_local std::vector<std::pair<int, Rule>> cache;
    const Rule* rule = nullptr;
    for (const auto& [m, r] : cache)
    {
        if (m == n)
        {
            rule = &r;
        }
    }
    if (!rule)
    {
        cache.emplace_back(n, gauss_legendre(n));
        rule = &cache.back().second;
    }
    const double h = (b - a) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p)
    {
        const double lo = a + p * h;
        const double mid = lo + 0.5 * h;
        for (int i = 0; i < n; ++i)
        {
            sum += rule->w[i] * f(mid + 0.5 * h * rule->x[i]);
        }
    }
    return 0.5 * h * sum;
}

} // namespace oracle
