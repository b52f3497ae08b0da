"""High-precision reference values frozen into tests/oracle_values.hpp.

Run: python3 tests/oracles/freeze_values.py > tests/oracle_values.hpp
Every value is computed from first principles with mpmath at 40 digits,
independently of the C++ implementation.
"""
import mpmath as mp

mp.mp.dps = 40


def series_dilog(z, terms=10**6):
    # direct power series; used only for |z| <= 0.5 where it converges fast
    z = mp.mpf(z)
    return mp.nsum(lambda k: z**k / k**2, [1, mp.inf])


def master_curve(lam):
    lam = mp.mpf(lam)
    s = mp.nsum(lambda m: lam**m / mp.factorial(m) * mp.log(m + 1), [0, mp.inf])
    return mp.e**(-lam) * s - mp.log(lam)


def fixed_bias(p, M):
    p = mp.mpf(p)
    s = mp.fsum(mp.binomial(M, m) * p**m * (1 - p)**(M - m) * mp.log(mp.mpf(m + 1) / (M + 1))
                for m in range(M + 1))
    return s - mp.log(p)


def vm_diff_abs_pdf(delta, kappa, delta_s=0):
    # |circular difference| of two von Mises draws, by direct quadrature of the convolution
    kappa = mp.mpf(kappa)
    def f(d):
        g = lambda x: mp.e**(kappa * mp.cos(x) + kappa * mp.cos(x + d - delta_s))
        return mp.quad(g, [-mp.pi, mp.pi]) / (2 * mp.pi * mp.besseli(0, kappa))**2
    return f(delta) + f(-delta)


def p_correct(delta_s, kappa, gamma):
    # nested quadrature is too slow at 40 digits; scipy double precision suffices here
    import numpy as np
    from scipy import integrate

    def conv(d, ds):
        g = lambda x: np.exp(kappa * np.cos(x) + kappa * np.cos(x + d - ds) - 2 * kappa)
        return integrate.quad(g, -np.pi, np.pi, epsabs=1e-14, epsrel=1e-13)[0]

    norm = (2 * np.pi * float(mp.besseli(0, kappa) * mp.e**-kappa))**2
    pdf = lambda t, ds: (conv(t, ds) + conv(-t, ds)) / norm
    cdf = lambda t: integrate.quad(lambda u: pdf(u, 0.0), 0, t, epsabs=1e-13, epsrel=1e-12)[0]
    inner = integrate.quad(lambda t: pdf(t, delta_s) * cdf(t)**5, 0, np.pi,
                           epsabs=1e-12, epsrel=1e-11, limit=200)[0]
    return mp.mpf(gamma) / 6 + (1 - mp.mpf(gamma)) * inner


values = {
    "kEulerGamma": mp.euler,
    "kDigamma1": mp.digamma(1),
    "kDigamma2": mp.digamma(2),
    "kDigamma0_5": mp.digamma(0.5),
    "kDigamma7_3": mp.digamma(7.3),
    "kDigamma1e6": mp.digamma(10**6),
    "kTrigamma1": mp.psi(1, 1),
    "kTrigamma0_25": mp.psi(1, 0.25),
    "kTrigamma7_3": mp.psi(1, 7.3),
    "kDilogHalf": series_dilog(0.5),
    "kDilog0_1": series_dilog(0.1),
    "kDilog0_9": mp.polylog(2, 0.9),
    "kDilog0_99": mp.polylog(2, 0.99),
    "kNormalCdf1": mp.ncdf(1),
    "kNormalCdfMinus3": mp.ncdf(-3),
    "kMasterCurve1": master_curve(1),
    "kMasterCurve0_1": master_curve(0.1),
    "kMasterCurve10": master_curve(10),
    "kFixedBias_p0_01_M10": fixed_bias(0.01, 10),
    "kFixedBias_p0_3_M20": fixed_bias(0.3, 20),
    "kBesselI0_1": mp.besseli(0, 1),
    "kBesselI0e_30": mp.besseli(0, 30) * mp.e**-30,
    "kVmAbsPdf_0_5_k1": vm_diff_abs_pdf(0.5, 1),
    "kVmAbsPdf_2_k4_ds1": vm_diff_abs_pdf(2, 4, 1),
    "kPCorrect_pi2_eta_log03_g01": p_correct(float(mp.pi / 2), 1 / 0.3**2, 0.1),
}

print("// Generated by tests/oracles/freeze_values.py; do not edit by hand.")
print("#pragma once\n")
print("namespace ibs::oracle {\n")
for k, v in values.items():
    print(f"inline constexpr double {k} = {mp.nstr(v, 20)};")
print("\n}  // namespace ibs::oracle")
