"""Self-normalized statistics and the exact event algebra behind them.

The t-statistic event {T_n >= sqrt(n) a} coincides with the dispersion event
{sigma^2 >= inf_{z>0} (1/n) sum (X_i/z - 1)^2}, sigma^2 = 1/(1 + a^2). The
infimum is a quadratic in 1/z and is solved in closed form here, so the two
sides can be compared as exact booleans.

Functions accept a 1-D sample or a 2-D batch with samples along the last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .density import DensityModel

__all__ = [
    "DegenerateSampleError",
    "DispersionMin",
    "ShaoEvent",
    "as_sample",
    "t_statistic",
    "biased_sd",
    "min_dispersion",
    "min_dispersion_batch",
    "shao_event",
    "shao_event_batch",
    "sample_sphere",
    "log_sphere_area",
    "joint_density_mc",
]


class DegenerateSampleError(ValueError):
    """All values equal, so V = 0 and T_n is undefined."""


def as_sample(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim not in (1, 2):
        raise ValueError("sample must be 1-D, or 2-D with samples along the last axis")
    if x.shape[-1] < 2:
        raise ValueError("a sample needs n >= 2 values")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def biased_sd(x: np.ndarray) -> np.ndarray:
    """V = sqrt((1/n) sum (x_i - mean)^2)."""
    return np.sqrt(np.mean((x - x.mean(axis=-1, keepdims=True)) ** 2, axis=-1))


def t_statistic(values, unbiased: bool = False):
    """sqrt(n) * mean / V with the 1/n variance; ``unbiased`` gives the
    standard sqrt(n-1) * mean / V form instead."""
    x = as_sample(values)
    n = x.shape[-1]
    v = biased_sd(x)
    if np.any(v == 0):
        raise DegenerateSampleError("sample has zero spread (V = 0)")
    scale = math.sqrt(n - 1) if unbiased else math.sqrt(n)
    out = scale * x.mean(axis=-1) / v
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DispersionMin:
    """inf over z > 0 of (1/n) sum (x_i/z - 1)^2 = m2/z^2 - 2 m1/z + 1."""

    inf_value: float
    argmin_z: float | None
    mean: float
    mean_square: float


def min_dispersion_batch(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized closed form: (inf_value, argmin_z or nan, m1, m2).

    The infimum depends only on m1^2 / m2, which is scale free, so it is
    computed on rows rescaled by their largest magnitude to avoid underflow.
    """
    m1 = x.mean(axis=-1)
    m2 = np.mean(x * x, axis=-1)
    big = np.max(np.abs(x), axis=-1)
    unit = np.where(big > 0, big, 1.0)
    y = x / unit[..., None]
    k1 = y.mean(axis=-1)
    k2 = np.mean(y * y, axis=-1)
    pos = m1 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inf_value = np.where(pos, 1.0 - k1 * k1 / np.where(pos, k2, 1.0), 1.0)
        argmin = np.where(pos, unit * k2 / np.where(pos, k1, 1.0), np.nan)
    return inf_value, argmin, m1, m2


def min_dispersion(values) -> DispersionMin:
    x = as_sample(values)
    if x.ndim != 1:
        raise ValueError("min_dispersion takes a single sample; use min_dispersion_batch")
    inf_value, argmin, m1, m2 = min_dispersion_batch(x)
    return DispersionMin(
        inf_value=float(inf_value),
        argmin_z=None if np.isnan(argmin) else float(argmin),
        mean=float(m1),
        mean_square=float(m2),
    )


@dataclass(frozen=True)
class ShaoEvent:
    via_t: bool
    via_dispersion: bool


def shao_event_batch(x: np.ndarray, a) -> tuple[np.ndarray, np.ndarray]:
    """Both evaluations of {T_n >= sqrt(n) a} for each row of ``x``; ``a`` is
    a scalar or one cutoff per row.

    V = 0 follows the convention T_n = +inf when the mean is positive and
    -inf otherwise, so the event holds exactly when the mean is positive;
    the dispersion side gives the same through its m1 > 0 gate.
    """
    a = np.asarray(a, dtype=float)
    if not np.all(a > 0):
        raise ValueError("cutoff a must be positive")
    n = x.shape[-1]
    # Both sides are scale free; rescaling keeps tiny or huge rows finite.
    big = np.max(np.abs(x), axis=-1)
    x = x / np.where(big > 0, big, 1.0)[..., None]
    mean = x.mean(axis=-1)
    v = biased_sd(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(v > 0, math.sqrt(n) * mean / v, np.where(mean > 0, np.inf, -np.inf))
    via_t = (mean > 0) & (t >= math.sqrt(n) * a)
    inf_value, _, m1, _ = min_dispersion_batch(x)
    via_disp = (m1 > 0) & (1.0 / (1.0 + a * a) >= inf_value)
    return via_t, via_disp


def shao_event(values, a: float) -> ShaoEvent:
    x = as_sample(values)
    via_t, via_disp = shao_event_batch(x[None, :] if x.ndim == 1 else x, a)
    if x.ndim == 1:
        return ShaoEvent(bool(via_t[0]), bool(via_disp[0]))
    return ShaoEvent(via_t, via_disp)


def sample_sphere(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draws on {w : sum w_i = 0, sum w_i^2 = 1} in R^n.

    Centred iid normals are isotropic on the hyperplane, so normalizing
    gives the uniform law on its unit sphere.
    """
    if n < 3:
        raise ValueError("the sphere U_n needs n >= 3")
    rows = 1 if size is None else size
    out = np.empty((rows, n))
    filled = 0
    while filled < rows:
        g = rng.standard_normal((rows - filled, n))
        g -= g.mean(axis=1, keepdims=True)
        norm = np.sqrt(np.sum(g * g, axis=1))
        ok = norm > 0
        k = int(ok.sum())
        out[filled:filled + k] = g[ok] / norm[ok, None]
        filled += k
    return out[0] if size is None else out


def log_sphere_area(n: int) -> float:
    """log surface area of the unit sphere S^{n-2} (dimension n - 2)."""
    k = n - 1
    return math.log(2.0) + 0.5 * k * math.log(math.pi) - float(gammaln(0.5 * k))


def joint_density_mc(
    model: DensityModel,
    n: int,
    t: float,
    s: float,
    num_mc: int,
    rng: np.random.Generator | None = None,
    omega: np.ndarray | None = None,
) -> tuple[float, float]:
    """Monte Carlo value of the joint density of (mean, V) at (t, s).

        p(t, s) = |S^{n-2}| n^{n/2} s^{n-2} E[ prod_i f(t + sqrt(n) s w_i) ],

    w uniform on U_n. |S^{n-2}| converts the uniform probability measure to
    surface measure. Pass ``omega`` to reuse sphere draws across (t, s).
    Returns (estimate, standard error).
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    if not s > 0:
        raise ValueError("s must be positive")
    if omega is None:
        if rng is None:
            raise ValueError("need rng or omega")
        omega = sample_sphere(n, rng, num_mc)
    log_prod = np.sum(model.log_pdf(t + math.sqrt(n) * s * omega), axis=1)
    log_const = log_sphere_area(n) + 0.5 * n * math.log(n) + (n - 2) * math.log(s)
    vals = np.exp(log_prod + log_const)
    m = vals.shape[0]
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    return est, se
