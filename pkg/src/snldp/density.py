"""Density models with log-density derivatives, and grid diagnostics of the
regularity conditions the tail asymptotics rely on."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .numerics import Interval, integrate

__all__ = [
    "DensityModel",
    "ConditionReport",
    "DensitySpecError",
    "make_gaussian",
    "make_cauchy",
    "from_log_pdf",
    "shift",
    "check_conditions",
    "normalization",
    "parse_density",
]

REAL_LINE = Interval(-math.inf, math.inf)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

Fn = Callable[[np.ndarray], np.ndarray]


class DensitySpecError(ValueError):
    pass


@dataclass(frozen=True)
class DensityModel:
    """A univariate density f together with h = log f and h', h'', h'''.

    All callables are vectorized over numpy arrays. ``sample(rng, size)``
    draws from f; it is required by the Monte Carlo estimators only.
    """

    pdf: Fn
    log_pdf: Fn
    dlog_pdf: Fn
    d2log_pdf: Fn
    d3log_pdf: Fn
    tail_exponent: float
    support: Interval = REAL_LINE
    label: str = "custom"
    sample: Callable[[np.random.Generator, object], np.ndarray] | None = field(
        default=None, compare=False
    )
    # Mode and characteristic width, used to place quadrature breakpoints.
    location: float = 0.0
    scale: float = 1.0
    # An upper bound on the pdf, when known; lets samplers use a Gaussian proposal.
    pdf_max: float | None = None

    def __post_init__(self):
        if not self.tail_exponent > 0:
            raise ValueError("tail_exponent must be positive")


def _check_params(sigma: float) -> None:
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValueError(f"scale parameter must be positive, got {sigma}")


def make_gaussian(mu: float = 0.0, sigma: float = 1.0, tail_exponent: float = 1.0) -> DensityModel:
    """N(mu, sigma^2). Its tails beat every power, so any gamma > 0 works."""
    _check_params(sigma)
    s2 = sigma * sigma
    norm = _LOG_SQRT_2PI + math.log(sigma)

    def log_pdf(x):
        y = np.asarray(x, dtype=float) - mu
        return -0.5 * y * y / s2 - norm

    return DensityModel(
        pdf=lambda x: np.exp(log_pdf(x)),
        log_pdf=log_pdf,
        dlog_pdf=lambda x: -(np.asarray(x, dtype=float) - mu) / s2,
        d2log_pdf=lambda x: np.full(np.shape(x), -1.0 / s2),
        d3log_pdf=lambda x: np.zeros(np.shape(x)),
        tail_exponent=tail_exponent,
        label=f"gaussian:{mu:g},{sigma:g}",
        sample=lambda rng, size=None: rng.normal(mu, sigma, size),
        location=mu,
        scale=sigma,
        pdf_max=1.0 / (sigma * math.sqrt(2.0 * math.pi)),
    )


def make_cauchy(mu: float = 0.0, sigma: float = 1.0) -> DensityModel:
    """Cauchy(mu, sigma); x^2 f(x) -> sigma/pi, so gamma = 1."""
    _check_params(sigma)
    s2 = sigma * sigma
    lognorm = math.log(sigma / math.pi)

    def q(x):
        y = np.asarray(x, dtype=float) - mu
        return y, s2 + y * y

    def pdf(x):
        y, d = q(x)
        return sigma / (math.pi * d)

    def log_pdf(x):
        y, d = q(x)
        return lognorm - np.log(d)

    def d1(x):
        y, d = q(x)
        return -2.0 * y / d

    def d2(x):
        y, d = q(x)
        return -2.0 * (s2 - y * y) / (d * d)

    def d3(x):
        y, d = q(x)
        return 4.0 * y * (3.0 * s2 - y * y) / (d * d * d)

    return DensityModel(
        pdf=pdf,
        log_pdf=log_pdf,
        dlog_pdf=d1,
        d2log_pdf=d2,
        d3log_pdf=d3,
        tail_exponent=1.0,
        label=f"cauchy:{mu:g},{sigma:g}",
        sample=lambda rng, size=None: mu + sigma * rng.standard_cauchy(size),
        location=mu,
        scale=sigma,
        pdf_max=1.0 / (math.pi * sigma),
    )


def _central(fn: Fn, rel_step: float) -> Fn:
    def deriv(x):
        x = np.asarray(x, dtype=float)
        h = rel_step * np.maximum(1.0, np.abs(x))
        return (fn(x + h) - fn(x - h)) / (2.0 * h)

    return deriv


def from_log_pdf(
    log_pdf: Fn,
    tail_exponent: float,
    dlog_pdf: Fn | None = None,
    d2log_pdf: Fn | None = None,
    d3log_pdf: Fn | None = None,
    support: Interval = REAL_LINE,
    label: str = "custom",
    sample=None,
    location: float = 0.0,
    scale: float = 1.0,
    pdf_max: float | None = None,
) -> DensityModel:
    """Build a model from h = log f, differencing any missing derivative.

    First derivatives use step 1e-5 * max(1, |x|); each further order
    differences the previous one with a larger step (1e-4, 1e-3) to keep
    rounding error bounded.
    """
    d1 = dlog_pdf or _central(log_pdf, 1e-5)
    d2 = d2log_pdf or _central(d1, 1e-4)
    d3 = d3log_pdf or _central(d2, 1e-3)
    return DensityModel(
        pdf=lambda x: np.exp(log_pdf(x)),
        log_pdf=log_pdf,
        dlog_pdf=d1,
        d2log_pdf=d2,
        d3log_pdf=d3,
        tail_exponent=tail_exponent,
        support=support,
        label=label,
        sample=sample,
        location=location,
        scale=scale,
        pdf_max=pdf_max,
    )


def shift(model: DensityModel, d: float) -> DensityModel:
    """The law of X + d: x -> f(x - d), derivatives shifted alike."""
    if d == 0:
        return model

    def moved(fn):
        return lambda x: fn(np.asarray(x, dtype=float) - d)

    sampler = None
    if model.sample is not None:
        base = model.sample
        sampler = lambda rng, size=None: base(rng, size) + d  # noqa: E731
    return replace(
        model,
        pdf=moved(model.pdf),
        log_pdf=moved(model.log_pdf),
        dlog_pdf=moved(model.dlog_pdf),
        d2log_pdf=moved(model.d2log_pdf),
        d3log_pdf=moved(model.d3log_pdf),
        support=Interval(model.support.lo + d, model.support.hi + d),
        label=f"{model.label}+shift({d:.17g})",
        sample=sampler,
        location=model.location + d,
    )


def normalization(model: DensityModel, rel_tol: float = 1e-12) -> float:
    """Numerical integral of the pdf over its support."""
    pts = [model.location] if model.support.lo < model.location < model.support.hi else []
    return integrate(
        model.pdf, model.support, rel_tol=rel_tol, abs_tol=1e-15, points=pts, scale=model.scale
    ).value


def parse_density(spec: str) -> DensityModel:
    """Parse ``gaussian:<mu>,<sigma>`` or ``cauchy:<mu>,<sigma>``."""
    family, sep, rest = spec.strip().partition(":")
    builders = {"gaussian": make_gaussian, "cauchy": make_cauchy}
    if family not in builders:
        raise DensitySpecError(f"unknown density family {family!r} (expected gaussian or cauchy)")
    if not sep:
        raise DensitySpecError(f"missing ':' after {family!r}; expected {family}:<mu>,<sigma>")
    tokens = rest.split(",")
    if len(tokens) != 2:
        raise DensitySpecError(f"expected two parameters '<mu>,<sigma>', got {rest!r}")
    values = []
    for tok in tokens:
        try:
            values.append(float(tok))
        except ValueError:
            raise DensitySpecError(f"parameter {tok!r} is not a number") from None
    if not values[1] > 0:
        raise DensitySpecError(f"scale parameter {tokens[1]!r} must be positive")
    return builders[family](values[0], values[1])


@dataclass(frozen=True)
class ConditionReport:
    """Grid spot-checks of boundedness, tail decay, a unique maximizer of
    z f(z), and bounded h'', h'''. Verdicts are "pass" or "indeterminate"."""

    sup_pdf: float
    max_tail_product: float
    sup_abs_h2: float
    sup_abs_h3: float
    zf_local_maxima: tuple[float, ...]
    grid: str
    verdicts: dict
    flagged_points: tuple[float, ...] = ()

    @property
    def all_pass(self) -> bool:
        return all(v == "pass" for v in self.verdicts.values())


def _grid_sup(values: np.ndarray, saturation: float = 1e-6) -> tuple[float, bool]:
    """Max over a grid and whether it can be trusted.

    The max is untrusted when the values are still growing at either grid
    end by more than ``saturation`` (relative), since then the supremum
    may lie beyond the grid.
    """
    vmax = float(np.max(values))
    growing = False
    with np.errstate(invalid="ignore"):
        for end, nxt in ((values[0], values[1]), (values[-1], values[-2])):
            if end >= vmax and end - nxt > saturation * max(abs(end), 1e-300):
                growing = True
    return vmax, not growing


def check_conditions(
    model: DensityModel,
    x_max: float = 50.0,
    num_linear: int = 4001,
    tail_max: float = 1e8,
    num_tail: int = 400,
) -> ConditionReport:
    """Evaluate the regularity diagnostics on a linear grid over
    [-x_max, x_max] plus a log-spaced positive tail up to ``tail_max``.

    These are one-sided spot checks; they never certify a violation.
    """
    lin = np.linspace(-x_max, x_max, num_linear)
    tail = np.geomspace(1.0, tail_max, num_tail)
    lo, hi = model.support.lo, model.support.hi
    lin = lin[(lin >= lo) & (lin <= hi)]
    tail = tail[(tail >= lo) & (tail <= hi)]
    with np.errstate(all="ignore"):
        f_lin = model.pdf(lin)
        h2 = model.d2log_pdf(lin)
        h3 = model.d3log_pdf(lin)
        tail_prod = tail ** (1.0 + model.tail_exponent) * model.pdf(tail)
        zgrid = np.geomspace(1e-6, tail_max, 4000)
        zgrid = zgrid[(zgrid >= lo) & (zgrid <= hi)]
        log_zf = np.log(zgrid) + model.log_pdf(zgrid)

    bad = ~(np.isfinite(f_lin) & np.isfinite(h2) & np.isfinite(h3))
    flagged = tuple(float(x) for x in lin[bad])
    verdicts = {}

    sup_pdf, ok_pdf = _grid_sup(np.where(np.isfinite(f_lin), f_lin, -np.inf))
    ok_pdf = ok_pdf and np.all(np.isfinite(f_lin))
    if tail.size > 1:
        max_tail, ok_tail = _grid_sup(tail_prod)
    else:
        max_tail, ok_tail = 0.0, True
    verdicts["bounded_with_tail_decay"] = "pass" if ok_pdf and ok_tail and np.isfinite(max_tail) else "indeterminate"

    finite = np.isfinite(log_zf)
    lz = log_zf[finite]
    zz = zgrid[finite]
    interior = np.nonzero((lz[1:-1] > lz[:-2]) & (lz[1:-1] >= lz[2:]))[0] + 1
    maxima = tuple(float(zz[i]) for i in interior)
    verdicts["unique_maximizer"] = "pass" if len(maxima) == 1 else "indeterminate"

    abs_h2 = np.abs(h2)
    abs_h3 = np.abs(h3)
    sup_h2, ok_h2 = _grid_sup(np.where(bad, np.inf, abs_h2))
    sup_h3, ok_h3 = _grid_sup(np.where(bad, np.inf, abs_h3))
    smooth = ok_h2 and ok_h3 and not flagged and math.isfinite(sup_h2) and math.isfinite(sup_h3)
    verdicts["bounded_h2_h3"] = "pass" if smooth else "indeterminate"

    grid = (
        f"linear [{-x_max:g}, {x_max:g}] x {num_linear}; "
        f"log tail [1, {tail_max:g}] x {num_tail}; z-scan [1e-06, {tail_max:g}] x 4000"
    )
    return ConditionReport(
        sup_pdf=sup_pdf,
        max_tail_product=max_tail,
        sup_abs_h2=sup_h2,
        sup_abs_h3=sup_h3,
        zf_local_maxima=maxima,
        grid=grid,
        verdicts=verdicts,
        flagged_points=flagged,
    )
