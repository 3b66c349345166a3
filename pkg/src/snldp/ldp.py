"""Localization point, tilted log-MGF, saddlepoint and exact tail asymptotics.

For a density f and a point z > 0 the tilt function is

    h(t) = log( z * integral exp(-t u^2) f(z + u z) du ),   t >= 0,

the log-MGF of -(X/z - 1)^2. Its derivatives are ratios of the moment
integrals m_p(t) = integral u^p exp(-t u^2) f(z + u z) du, p in {0, 2, 4}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import gamma as gamma_fn

from .density import DensityModel
from .numerics import (
    Interval,
    QuadratureError,
    find_root,
    integrate_vector,
    maximize_unimodal,
)

__all__ = [
    "Z0Error",
    "NoInteriorMaximumError",
    "AmbiguousMaximumError",
    "SaddlepointAtZeroError",
    "TiltError",
    "TiltSolution",
    "TiltDerivatives",
    "AsymptoticTail",
    "CutoffRule",
    "DEFAULT_Z0_BRACKET",
    "find_z0",
    "stationarity_residual",
    "sigma_from_cutoff",
    "cutoff_r",
    "regime_score",
    "tilt_moments",
    "tilt_logmgf",
    "tilt_derivatives",
    "solve_tn",
    "exact_tail_asymptotic",
    "ratio_limit",
    "moment_asymptotic_check",
]

DEFAULT_Z0_BRACKET = Interval(1e-6, 1e3)
_SCAN_POINTS = 2000
_T_FLOOR = 1e-12


class Z0Error(ValueError):
    pass


class NoInteriorMaximumError(Z0Error):
    pass


class AmbiguousMaximumError(Z0Error):
    def __init__(self, message: str, candidates: tuple[float, ...]):
        super().__init__(message)
        self.candidates = candidates


class SaddlepointAtZeroError(ValueError):
    """The dispersion level is not below |h'(0)|: the event is not rare."""


class TiltError(ArithmeticError):
    pass


# --------------------------------------------------------------------------
# z0


def _log_zf(model: DensityModel, z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(z) + model.log_pdf(z)


def find_z0(model: DensityModel, bracket: Interval = DEFAULT_Z0_BRACKET) -> float:
    """Unique maximizer of z f(z) over ``bracket`` (a subset of (0, inf)).

    A log-spaced scan isolates the maximum, golden-section search refines
    it, and the root of 1/z + h'(z) = 0 polishes it; the two must agree.
    """
    if bracket.lo <= 0:
        raise ValueError("z0 bracket must lie in (0, inf)")
    grid = np.geomspace(bracket.lo, bracket.hi, _SCAN_POINTS)
    vals = _log_zf(model, grid)
    finite = np.isfinite(vals)
    inner = np.nonzero(
        finite[1:-1] & (vals[1:-1] > vals[:-2]) & (vals[1:-1] >= vals[2:])
    )[0] + 1
    if inner.size == 0:
        raise NoInteriorMaximumError(
            f"z*f(z) has no interior maximum on [{bracket.lo:g}, {bracket.hi:g}] ({model.label})"
        )
    if inner.size > 1:
        cands = tuple(float(grid[i]) for i in inner)
        raise AmbiguousMaximumError(
            f"z*f(z) has {inner.size} local maxima on the scan grid: {cands}", cands
        )
    i = int(inner[0])
    lo, hi = float(grid[i - 1]), float(grid[i + 1])
    golden = maximize_unimodal(lambda z: float(_log_zf(model, z)), Interval(lo, hi), tol=1e-12 * hi)

    def stationarity(z):
        return 1.0 / z + float(model.dlog_pdf(z))

    try:
        polished = find_root(stationarity, Interval(lo, hi), tol=1e-15 * hi)
    except ValueError:
        return golden.argmax
    # Golden section resolves a flat maximum only to ~sqrt(eps) relative.
    if abs(polished - golden.argmax) > 1e-6 * max(1.0, polished):
        return golden.argmax
    return polished


def stationarity_residual(model: DensityModel, z0: float) -> float:
    """|h'(z0) + 1/z0|; zero at an interior maximizer of z f(z)."""
    return abs(float(model.dlog_pdf(z0)) + 1.0 / z0)


# --------------------------------------------------------------------------
# cutoff algebra


def cutoff_r(a: float) -> float:
    """r = 1 - (1 + a^-2)^(-1/2), evaluated without cancellation."""
    if not a > 0:
        raise ValueError("cutoff a must be positive")
    return -math.expm1(-0.5 * math.log1p(a ** -2))


def sigma_from_cutoff(a: float) -> float:
    """Dispersion level sigma^2 = r(2 - r), which simplifies to 1/(1 + a^2)."""
    if not a > 0:
        raise ValueError("cutoff a must be positive")
    return 1.0 / (1.0 + a * a)


def regime_score(n: int, sigma2: float) -> float:
    """n sigma^4 / log n; the exact asymptotic needs this to be large."""
    if n < 2:
        return math.inf
    return n * sigma2 * sigma2 / math.log(n)


@dataclass(frozen=True)
class CutoffRule:
    """Threshold a_n on the scale of X-bar / V (so x_n = a_n sqrt(n)).

    ``power``: a_n = n**exponent, which meets a_n^4 = o(n / log n) exactly
    when 0 < exponent < 1/4. ``explicit``: a lookup table {n: a_n}.
    """

    form: str = "power"
    exponent: float = 0.125
    table: dict = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if self.form == "power":
            if not 0 < self.exponent < 0.25:
                raise ValueError(
                    f"power cutoff exponent {self.exponent} outside (0, 1/4): "
                    "a_n^4 log n / n would not vanish"
                )
        elif self.form == "explicit":
            if not self.table or any(v <= 0 for v in self.table.values()):
                raise ValueError("explicit cutoff needs a non-empty table of positive a_n")
        else:
            raise ValueError(f"unknown cutoff form {self.form!r}")

    def a(self, n: int) -> float:
        if self.form == "power":
            return float(n) ** self.exponent
        try:
            return float(self.table[n])
        except KeyError:
            raise KeyError(f"explicit cutoff table has no entry for n={n}") from None

    def spec(self) -> str:
        if self.form == "power":
            return f"power:{self.exponent!r}"
        return "explicit:" + ";".join(f"{k}={v!r}" for k, v in sorted(self.table.items()))

    @classmethod
    def parse(cls, text: str) -> "CutoffRule":
        """``power:<exponent>`` or ``explicit:<n>=<a>;<n>=<a>...``"""
        form, _, rest = text.partition(":")
        if form == "power":
            try:
                return cls("power", float(rest))
            except ValueError:
                raise ValueError(f"bad power exponent {rest!r}") from None
        if form == "explicit":
            table = {}
            for item in filter(None, rest.split(";")):
                k, eq, v = item.partition("=")
                if not eq:
                    raise ValueError(f"bad explicit cutoff entry {item!r}")
                table[int(k)] = float(v)
            return cls("explicit", table=table)
        raise ValueError(f"unknown cutoff form {form!r}")


# --------------------------------------------------------------------------
# tilt function


def _u_domain(model: DensityModel, z: float) -> Interval:
    lo = (model.support.lo - z) / z
    hi = (model.support.hi - z) / z
    return Interval(lo, hi)


def tilt_moments(
    model: DensityModel,
    z: float,
    t: float,
    powers: tuple[float, ...] = (0, 2, 4),
    rel_tol: float = 1e-11,
    absolute: bool = False,
) -> np.ndarray:
    """Integrals of u^p exp(-t u^2) f(z + u z) du over the support image,
    one adaptive subdivision shared by all powers (|u|^p if ``absolute``)."""
    if not z > 0:
        raise ValueError("z must be positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    pw = np.asarray(powers, dtype=float)[:, None]

    def integrand(u):
        base = np.exp(-t * u * u) * model.pdf(z + u * z)
        uu = np.abs(u) if absolute else u
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(pw == 0, 1.0, uu ** pw) * base

    # Kernel width in u is ~1/sqrt(t); the density varies on scale/z.
    width = min(model.scale / z, 1.0 / math.sqrt(t)) if t > 0 else model.scale / z
    points = [0.0, -8 * width, 8 * width, -width, width]
    points.append((model.location - z) / z)
    try:
        vals, _, _ = integrate_vector(
            integrand, _u_domain(model, z), rel_tol=rel_tol, abs_tol=1e-300,
            points=points, scale=max(width, 1e-300), ncomp=len(powers), max_evals=200_000,
        )
    except (QuadratureError, FloatingPointError) as exc:
        raise TiltError(f"tilt quadrature failed at z={z}, t={t}: {exc}") from exc
    return vals


def tilt_logmgf(model: DensityModel, z: float, t: float) -> float:
    """h(t) = log(z * m_0(t))."""
    if model.pdf(z) <= 0:
        raise ValueError(f"f must be positive at z={z}")
    (m0,) = tilt_moments(model, z, t, powers=(0,))
    return math.log(z * m0)


class TiltDerivatives(NamedTuple):
    h1: float
    h2: float


def tilt_derivatives(model: DensityModel, z: float, t: float) -> TiltDerivatives:
    """h'(t) = -m2/m0 < 0 and h''(t) = m4/m0 - (m2/m0)^2 > 0."""
    m0, m2, m4 = tilt_moments(model, z, t)
    e2 = m2 / m0
    return TiltDerivatives(float(-e2), float(m4 / m0 - e2 * e2))


# --------------------------------------------------------------------------
# saddlepoint


class AsymptoticTail(NamedTuple):
    log_prob: float
    regime_score: float


@dataclass(frozen=True)
class TiltSolution:
    """Saddlepoint bundle at localization point z and dispersion level sigma2."""

    z: float
    sigma2: float
    t_n: float
    h_val: float
    h1: float
    h2: float
    n: int
    log_tail: float

    @property
    def regime_score(self) -> float:
        return regime_score(self.n, self.sigma2)

    def asdict(self) -> dict:
        return {
            "z": self.z,
            "sigma2": self.sigma2,
            "t_n": self.t_n,
            "h": self.h_val,
            "h1": self.h1,
            "h2": self.h2,
            "n": self.n,
            "log_tail": self.log_tail,
            "regime_score": self.regime_score,
        }


def solve_tn(model: DensityModel, z: float, sigma2: float, n: int = 1) -> TiltSolution:
    """Unique t_n > 0 with h'(t_n) = -sigma2, plus h, h', h'' there."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if n < 1:
        raise ValueError("n must be >= 1")

    def g(t):
        return tilt_derivatives(model, z, t).h1 + sigma2

    # h'(t) ~ -1/(2t) for large t, so t_n ~ 1/(2 sigma2); bracket around it.
    # h' increases from h'(0) (possibly -inf for heavy tails, so t = 0 itself
    # is never evaluated) towards 0.
    lo, hi = 1.0 / (8.0 * sigma2), 8.0 / (2.0 * sigma2)
    while g(lo) > 0:
        lo *= 0.125
        if lo < _T_FLOOR:
            raise SaddlepointAtZeroError(
                f"sigma2={sigma2:g} >= |h'(0)| at z={z:g}: the dispersion event is not rare"
            )
    while g(hi) < 0:
        hi *= 4.0
        if hi > 1e300:
            raise TiltError("could not bracket the saddlepoint")
    t_n = find_root(g, Interval(lo, hi), tol=1e-14 * hi)
    m0, m2, m4 = tilt_moments(model, z, t_n)
    e2 = float(m2 / m0)
    h_val = math.log(z * m0)
    sol_log_tail = _log_tail(n, sigma2, t_n, h_val)
    return TiltSolution(
        z=z, sigma2=sigma2, t_n=t_n, h_val=h_val, h1=-e2, h2=float(m4 / m0) - e2 * e2,
        n=n, log_tail=sol_log_tail,
    )


def _log_tail(n: int, sigma2: float, t_n: float, h_val: float) -> float:
    return n * (sigma2 * t_n + h_val) - 0.5 * math.log(math.pi * n)


def exact_tail_asymptotic(sol: TiltSolution, n: int | None = None) -> AsymptoticTail:
    """log of exp{n(sigma2 t_n + h(t_n))} / sqrt(pi n), with the regime score."""
    n = sol.n if n is None else n
    return AsymptoticTail(_log_tail(n, sol.sigma2, sol.t_n, sol.h_val), regime_score(n, sol.sigma2))


def ratio_limit(model: DensityModel, d: float, bracket: Interval = DEFAULT_Z0_BRACKET) -> float:
    """Limit exp(d / z0) of the shifted-to-unshifted tail ratio."""
    if not d > 0:
        raise ValueError("d must be positive")
    return math.exp(d / find_z0(model, bracket))


def moment_asymptotic_check(model: DensityModel, z: float, p: float, t: float) -> tuple[float, float]:
    """(integral |u|^p e^{-t u^2} f(z + u z) du, f(z) Gamma(p') t^{-p'}), p' = (p+1)/2."""
    if not p > -1:
        raise ValueError("p must exceed -1")
    if not t > 0:
        raise ValueError("t must be positive")
    (numeric,) = tilt_moments(model, z, t, powers=(p,), absolute=True)
    pp = 0.5 * (p + 1.0)
    asymptotic = float(model.pdf(z)) * float(gamma_fn(pp)) * t ** (-pp)
    return float(numeric), asymptotic
