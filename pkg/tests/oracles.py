"""Closed-form references for N(0, 1), derived independently of the package.

With c = 2 / z^2 and D = 1 + c t, the log-MGF of -(X/z - 1)^2 is
    h(t)   = -log(D) / 2 - t / D
    h'(t)  = -c / (2 D) - 1 / D^2
    h''(t) = c^2 / (2 D^2) + 2 c / D^3
and h'(t) = -sigma2 is the quadratic y^2 + (c/2) y - sigma2 = 0 in y = 1 / D.
"""

import math

import numpy as np
from scipy import integrate, stats


def gauss_h(z, t):
    c = 2.0 / z**2
    d = 1.0 + c * t
    return -0.5 * math.log(d) - t / d


def gauss_h1(z, t):
    c = 2.0 / z**2
    d = 1.0 + c * t
    return -c / (2 * d) - 1 / d**2


def gauss_h2(z, t):
    c = 2.0 / z**2
    d = 1.0 + c * t
    return c * c / (2 * d * d) + 2 * c / d**3


def gauss_tn(z, sigma2):
    c = 2.0 / z**2
    y = (-c / 2 + math.sqrt(c * c / 4 + 4 * sigma2)) / 2
    return (1 / y - 1) / c


def gauss_log_tail(z, sigma2, n):
    t = gauss_tn(z, sigma2)
    return n * (sigma2 * t + gauss_h(z, t)) - 0.5 * math.log(math.pi * n)


Z_GRID = (0.5, 0.8, 1.0, 1.5, 2.5)
S2_GRID = (0.3, 0.1, 1e-2, 1e-3)
# Keep only levels below |h'(0)| = 2/z^2 + 1, where the saddlepoint exists.
CLOSED_FORM_GRID = [(z, s2) for z in Z_GRID for s2 in S2_GRID if s2 < -gauss_h1(z, 0.0)]


def gaussian_t_tail(n, a):
    """P(mean >= a V) for N(0, 1): the Student t tail with n - 1 df."""
    return stats.t.sf(math.sqrt(n - 1) * a, n - 1)


def gaussian_shifted_tail(n, a, delta):
    """P(mean + delta >= a V) for N(0, 1): mean ~ N(0, 1/n) is independent
    of n V^2 ~ chi2(n - 1), so integrate the normal tail over the chi2 law."""
    def integrand(q):
        v = math.sqrt(q / n)
        return stats.chi2.pdf(q, n - 1) * stats.norm.sf(math.sqrt(n) * (a * v - delta))

    mode = max(n - 3.0, 1.0)
    lower = integrate.quad(integrand, 0, mode, epsrel=1e-11, limit=400)[0]
    return lower + integrate.quad(integrand, mode, np.inf, epsrel=1e-11, limit=400)[0]
