"""Scalar numerical kernels: adaptive quadrature, bracketed roots, unimodal maximization."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

__all__ = [
    "Interval",
    "QuadratureResult",
    "QuadratureError",
    "BracketError",
    "MaxResult",
    "integrate",
    "integrate_vector",
    "find_root",
    "maximize_unimodal",
]

DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-14
DEFAULT_MAX_EVALS = 10**6
_INITIAL_SPLIT = 4
_S_MAX = float(np.nextafter(1.0, 0.0))
_S_MIN = -_S_MAX

# 15-point Kronrod rule with embedded 7-point Gauss rule on [-1, 1].
_XK = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.zeros(15)
_WG[1::2] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]


@dataclass(frozen=True)
class Interval:
    """Closed or half-open real interval; either endpoint may be infinite."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or not self.lo < self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


class QuadratureError(ArithmeticError):
    """Adaptive refinement exhausted its budget; ``result`` holds the best estimate."""

    def __init__(self, message: str, result):
        super().__init__(message)
        self.result = result


class BracketError(ValueError):
    pass


@dataclass(frozen=True)
class MaxResult:
    argmax: float
    value: float
    warning: str | None = None

    @property
    def degenerate(self) -> bool:
        return self.warning is not None and self.warning.startswith("degenerate")


# Each piece maps a finite parameter interval onto a piece of the x-domain.
# kind: 0 finite (x = s), 1 right tail x = a + c s/(1-s^2), 2 left tail
# x = b - c s/(1-s^2), 3 full line x = c s/(1-s^2).
def _pieces(lo: float, hi: float, points: Sequence[float], scale: float):
    cuts = sorted({p for p in points if lo < p < hi})
    edges = [lo, *cuts, hi]
    out = []
    for a, b in zip(edges[:-1], edges[1:]):
        if math.isinf(a) and math.isinf(b):
            out.append((3, 0.0, scale, -1.0, 1.0))
        elif math.isinf(b):
            out.append((1, a, scale, 0.0, 1.0))
        elif math.isinf(a):
            out.append((2, b, scale, 0.0, 1.0))
        else:
            out.append((0, 0.0, 1.0, a, b))
    return out


def _transform(kind: int, anchor: float, c: float, s: np.ndarray):
    if kind == 0:
        return s, np.ones_like(s)
    s = np.clip(s, _S_MIN, _S_MAX)
    q = 1.0 - s * s
    jac = c * (1.0 + s * s) / (q * q)
    y = c * s / q
    if kind == 1:
        return anchor + y, jac
    if kind == 2:
        return anchor - y, jac
    return y, jac


def _gk(f, kind, anchor, c, a, b, m):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    s = mid + half * _XK
    x, jac = _transform(kind, anchor, c, s)
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        vals = np.asarray(f(x), dtype=float)
    vals = np.broadcast_to(vals, (m, 15)) if vals.ndim == 2 else np.broadcast_to(vals, (15,))[None, :]
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError(f"non-finite integrand value on [{a}, {b}]")
    g = vals * jac
    kron = half * (g @ _WK)
    gauss = half * (g @ _WG)
    return kron, np.abs(kron - gauss)


def integrate_vector(
    f: Callable[[np.ndarray], np.ndarray],
    domain: Interval,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_evals: int = DEFAULT_MAX_EVALS,
    points: Sequence[float] = (),
    scale: float = 1.0,
    ncomp: int = 1,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Integrate ``ncomp`` integrands sharing one adaptive subdivision.

    ``f`` maps an array ``x`` of shape (k,) to an array of shape (ncomp, k)
    (or (k,) when ``ncomp == 1``). Every component must meet
    ``err <= max(abs_tol, rel_tol * |value|)``. Returns
    ``(values, errors, evaluations)``.
    """
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    heap = []
    total = np.zeros(ncomp)
    err_total = np.zeros(ncomp)
    evals = 0
    counter = 0
    for kind, anchor, c, a0, b0 in _pieces(domain.lo, domain.hi, points, scale):
        edges = np.linspace(a0, b0, _INITIAL_SPLIT + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            val, err = _gk(f, kind, anchor, c, a, b, ncomp)
            evals += 15
            total += val
            err_total += err
            heap.append((counter, kind, anchor, c, a, b, val, err))
            counter += 1

    def converged():
        return np.all(err_total <= np.maximum(abs_tol, rel_tol * np.abs(total)))

    def priority(err):
        # Components live on different scales; rank by error relative to each target.
        return -float(np.max(err / np.maximum(abs_tol, rel_tol * np.abs(total))))

    heap = [(priority(item[-1]), *item) for item in heap]
    heapq.heapify(heap)

    while not converged():
        if evals + 30 > max_evals:
            res = QuadratureResult(float(total[0]), float(err_total[0]), evals) if ncomp == 1 else (total, err_total, evals)
            raise QuadratureError(
                f"no convergence after {evals} evaluations (error {err_total.max():.3g})", res
            )
        _, _, kind, anchor, c, a, b, val, err = heapq.heappop(heap)
        m = 0.5 * (a + b)
        if not a < m < b:
            # Interval collapsed to machine resolution; accept its estimate.
            err_total -= err
            heapq.heappush(heap, (0.0, counter, kind, anchor, c, a, b, val, np.zeros_like(err)))
            counter += 1
            continue
        v1, e1 = _gk(f, kind, anchor, c, a, m, ncomp)
        v2, e2 = _gk(f, kind, anchor, c, m, b, ncomp)
        evals += 30
        total += v1 + v2 - val
        err_total += e1 + e2 - err
        heapq.heappush(heap, (priority(e1), counter, kind, anchor, c, a, m, v1, e1))
        heapq.heappush(heap, (priority(e2), counter + 1, kind, anchor, c, m, b, v2, e2))
        counter += 2
    # Re-sum the leaves to shed accumulated cancellation from the running total.
    total = np.sum([item[7] for item in heap], axis=0)
    err_total = np.sum([item[8] for item in heap], axis=0)
    return total, err_total, evals


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    domain: Interval,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_evals: int = DEFAULT_MAX_EVALS,
    points: Sequence[float] = (),
    scale: float = 1.0,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature of a vectorized scalar integrand.

    Infinite endpoints are mapped through ``x = scale * s / (1 - s**2)``.
    ``points`` are interior breakpoints (known peaks or kinks).
    Raises :class:`QuadratureError` when ``max_evals`` is exhausted.
    """
    val, err, evals = integrate_vector(
        f, domain, rel_tol=rel_tol, abs_tol=abs_tol, max_evals=max_evals,
        points=points, scale=scale, ncomp=1,
    )
    return QuadratureResult(float(val[0]), float(err[0]), evals)


def find_root(g: Callable[[float], float], bracket: Interval, tol: float = 1e-12) -> float:
    """Brent's method on a sign-changing bracket."""
    lo, hi = bracket.lo, bracket.hi
    if math.isinf(lo) or math.isinf(hi):
        raise BracketError("root bracket must be finite")
    glo, ghi = float(g(lo)), float(g(hi))
    if math.isnan(glo) or math.isnan(ghi):
        raise BracketError(f"g is NaN at a bracket endpoint ({lo}, {hi})")
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        raise BracketError(f"g({lo})={glo:.3g} and g({hi})={ghi:.3g} have the same sign")

    def checked(x):
        v = float(g(x))
        if math.isnan(v):
            raise BracketError(f"g is NaN at x={x}")
        return v

    return optimize.brentq(checked, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def maximize_unimodal(
    g: Callable[[float], float], bracket: Interval, tol: float = 1e-10, probe: int = 9
) -> MaxResult:
    """Golden-section search for the maximum of ``g`` on ``bracket``.

    A coarse probe grid is evaluated first. A strict interior valley on it
    flags the result as non-unimodal; an exactly flat probe flags it as
    degenerate. Both still return the best point found.
    """
    lo, hi = bracket.lo, bracket.hi
    if math.isinf(lo) or math.isinf(hi):
        raise ValueError("maximization bracket must be finite")
    xs = np.linspace(lo, hi, probe)
    ys = np.array([float(g(x)) for x in xs])
    warning = None
    if np.all(ys == ys[0]):
        warning = "degenerate: g is constant on the probe grid"
    else:
        inner = ys[1:-1]
        if np.any((inner < ys[:-2]) & (inner < ys[2:])):
            warning = "non-unimodal: interior probe lies below both neighbours"

    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    gc, gd = float(g(c)), float(g(d))
    while b - a > tol:
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - _INVPHI * (b - a)
            gc = float(g(c))
        else:
            a, c, gc = c, d, gd
            d = a + _INVPHI * (b - a)
            gd = float(g(d))
    x = 0.5 * (a + b)
    best_x, best_y = x, float(g(x))
    # Endpoint maxima are legitimate for monotone g.
    for xe, ye in ((lo, ys[0]), (hi, ys[-1])):
        if ye > best_y:
            best_x, best_y = xe, ye
    return MaxResult(best_x, best_y, warning)
