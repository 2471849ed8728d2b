"""Independent reference computations used by the tests."""
import math

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn


def green_fourier_1d(d, kmax=400):
    """G at displacement d from the row-summed Fourier series.

    Summing the k1 series in closed form leaves
        G = (x^2 - x + 1/6)/2 + sum_k 2 cos(2 pi k y) cosh(pi k (1-2x)) / (4 pi k sinh(pi k))
    for x in [0, 1].  The coordinate farther from the lattice plays x.
    """
    x, y = (float(v) % 1.0 for v in d)
    if min(x, 1 - x) < min(y, 1 - y):
        x, y = y, x
    a = abs(1 - 2 * x)
    k = np.arange(1, kmax + 1)
    # cosh(pi k a)/sinh(pi k) written to avoid overflow
    ratio = np.exp(math.pi * k * (a - 1)) * (1 + np.exp(-2 * math.pi * k * a)) / (1 - np.exp(-2 * math.pi * k))
    series = np.sum(2 * np.cos(2 * math.pi * k * y) * ratio / (4 * math.pi * k))
    return (x * x - x + 1.0 / 6.0) / 2 + series


def robin_square_torus():
    """R(0) = -(1/2pi) log(2 pi eta(i)^2), eta(i) = Gamma(1/4) / (2 pi^(3/4))."""
    eta_i = gamma_fn(0.25) / (2 * math.pi**0.75)
    return -math.log(2 * math.pi * eta_i**2) / (2 * math.pi)


def log_sup_bounds(a1, a2, sup_r):
    """Log/sup|R| sandwich for the double integral of G over two sets of areas a1 >= a2."""
    lo = -a1 * a2 * sup_r
    hi = ((1 - math.log(a1) + math.log(math.pi)) / (4 * math.pi) + sup_r) * a1 * a2
    return lo, hi


def lens_profile_ode(L, x):
    """Upper lens profile from integrating f' with f'/sqrt(1+f'^2) = (sqrt3/2)(1-2x/L), f(0)=0."""
    def slope(t):
        s = (math.sqrt(3) / 2) * (1 - 2 * t / L)
        return s / math.sqrt(1 - s * s)
    return integrate.quad(slope, 0.0, x, epsabs=1e-13, epsrel=1e-13)[0]


def split_energy_direct(masses, c1, c2, c3=0.0):
    return float(sum(c1 * math.sqrt(m) + c2 * m * m + c3 * m for m in masses))
