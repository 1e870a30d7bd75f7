"""Reference values for the unit tests, computed in 30-digit arithmetic.

Run with `python3 reference_values.py`; the output is pasted into
reference_values.hpp.
"""
import mpmath as mp

mp.mp.dps = 30


def p1(v):
    v = mp.mpf(v)
    return 1 if v == 0 else 2 * v / (1 - mp.e ** (-2 * v))


def W11(eps, v):
    k = mp.sqrt(eps + v * v)
    return (k * mp.coth(k) + v) / eps


def invert(F, t):
    return mp.invertlaplace(F, t, method="dehoog")


def eigen_w(lp, tau, l, v, terms=400):
    v = mp.mpf(v)
    if v == 0:
        p = mp.mpf(1)
    else:
        p = 2 * v * mp.e ** (2 * v * lp) / (mp.e ** (2 * v) - 1)
    s = 0
    for n in range(1, terms):
        lam = (n * mp.pi) ** 2 + v * v
        phi = lambda x: n * mp.pi * mp.cos(n * mp.pi * x) + v * mp.sin(n * mp.pi * x)
        s += mp.e ** (v * (lp - l) - lam * tau) / lam * phi(lp) * phi(l)
    return p + 2 * s


rows = []
rows.append(("kBoundaryReturnV0Eps1", mp.coth(1)))
rows.append(("kP1V1", p1(1)))
rows.append(("kP1V05", p1(0.5)))
rows.append(("kBracketV1", mp.coth(1) - 1 / mp.sinh(1) ** 2))
rows.append(("kPropagatorV1Tau03", eigen_w(mp.mpf("0.8"), mp.mpf("0.3"), mp.mpf("0.2"), 1)))
rows.append(("kPropagatorVm2Tau002", eigen_w(mp.mpf("0.1"), mp.mpf("0.02"), mp.mpf("0.15"), -2, terms=1500)))
rows.append(("kM2V0Tau03", invert(lambda e: 2 * p1(0) * W11(e, 0) / e**2, mp.mpf("0.3"))))
rows.append(("kM3V05Tau2", invert(lambda e: 6 * p1(0.5) * W11(e, mp.mpf("0.5")) ** 2 / e**2, mp.mpf(2))))
rows.append(("kProbAnyV0Tau005", invert(lambda e: p1(0) / (e**2 * W11(e, 0)), mp.mpf("0.05"))))
rows.append(("kProbAnyV1Tau1", invert(lambda e: p1(1) / (e**2 * W11(e, 1)), mp.mpf(1))))
rows.append(("kLossPdfV0Tau005X01",
             invert(lambda e: p1(0) / (e**2 * W11(e, 0) ** 2) * mp.e ** (-mp.mpf("0.1") / W11(e, 0)), mp.mpf("0.05"))))
for name, val in rows:
    print(f"inline constexpr double {name} = {mp.nstr(val, 20)};")
