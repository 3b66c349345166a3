"""Rare-event estimators for self-normalized tail events.

Two estimators of P(mean + d/n >= a V) for n iid draws from a density f:

* naive: plain simulation and a binomial standard error;
* tilted: draws from f_n(x) = exp(-t_n (x/z0 - 1)^2 - h(t_n)) f(x), the
  exponential tilt of f at the localization point z0, each sample weighted by
  exp(t_n sum (X_i/z0 - 1)^2 + n h(t_n)). The indicator is evaluated on the
  full statistic, so the estimate is unbiased whatever the tilt quality.

Weights span hundreds of orders of magnitude, so every reduction is kept in
log scale. Sample budgets are split into chunks whose layout depends only on
(num_samples, n); chunk c of stream s uses the generator seeded by
SeedSequence(seed, spawn_key=(s, c)), and chunk results are merged in chunk
order. The worker count therefore never changes a result.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .density import DensityModel, shift
from .ldp import (
    SaddlepointAtZeroError,
    TiltError,
    find_z0,
    ratio_limit,
    regime_score,
    sigma_from_cutoff,
    solve_tn,
    tilt_logmgf,
)
from .numerics import BracketError

__all__ = [
    "TailEstimate",
    "RatioResult",
    "TiltedSample",
    "AdvisoryWarning",
    "AcceptanceRateError",
    "UndefinedRatioError",
    "DEFAULT_SEED",
    "chunk_layout",
    "chunk_rng",
    "map_chunks",
    "naive_tail",
    "naive_tail_curve",
    "tilted_sampler",
    "tilted_tail",
    "tilted_tail_curve",
    "mean_importance_weight",
    "ratio_estimate",
]

DEFAULT_SEED = 20240607
DEFAULT_CHUNK = 8192
_ELEMENTS_PER_CHUNK = 1 << 21
ESS_FLOOR = 100.0
ACCEPTANCE_FLOOR = 1e-4
_Z95 = 1.959963984540054

EVENTS = ("tstat", "fixed_z", "always")


class AdvisoryWarning(UserWarning):
    """An estimate was returned but should be read with care."""


class AcceptanceRateError(RuntimeError):
    pass


class UndefinedRatioError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class TailEstimate:
    p_hat: float
    std_error: float
    num_samples: int
    method: str
    regime_score: float
    seed: int
    log_p_hat: float
    rel_error: float
    hits: int
    ess: float
    upper_bound: float | None = None
    advisories: tuple[str, ...] = ()
    details: dict = field(default_factory=dict)

    def asdict(self) -> dict:
        return {
            "method": self.method,
            "p_hat": self.p_hat,
            "log_p_hat": self.log_p_hat,
            "std_error": self.std_error,
            "rel_error": self.rel_error,
            "num_samples": self.num_samples,
            "hits": self.hits,
            "ess": self.ess,
            "regime_score": self.regime_score,
            "seed": self.seed,
            "upper_bound": self.upper_bound,
            "advisories": list(self.advisories),
            **self.details,
        }


@dataclass(frozen=True)
class RatioResult:
    numerator: TailEstimate
    denominator: TailEstimate
    r_hat: float
    ci_low: float
    ci_high: float
    theory_limit: float
    log_r_hat: float
    common_random_numbers: bool = False

    def asdict(self) -> dict:
        return {
            "r_hat": self.r_hat,
            "log_r_hat": self.log_r_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "theory_limit": self.theory_limit,
            "common_random_numbers": self.common_random_numbers,
            "numerator": self.numerator.asdict(),
            "denominator": self.denominator.asdict(),
        }


# --------------------------------------------------------------------------
# chunking and log-scale reduction


def chunk_layout(num_samples: int, n: int, chunk: int = DEFAULT_CHUNK) -> list[int]:
    """Chunk sizes for a budget; a function of (num_samples, n) only."""
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    size = max(1, min(chunk, _ELEMENTS_PER_CHUNK // max(n, 1)))
    full, rem = divmod(num_samples, size)
    return [size] * full + ([rem] if rem else [])


def chunk_rng(seed: int, stream: int, c: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, c)))


class _LogSums:
    """Sums of w_i 1_k(i) and their pairwise products, stored as exp(-ref) multiples."""

    __slots__ = ("count", "ref", "s1", "s2", "hits")

    def __init__(self, k: int):
        self.count = 0
        self.ref = -math.inf
        self.s1 = np.zeros(k)
        self.s2 = np.zeros((k, k))
        self.hits = np.zeros(k, dtype=np.int64)

    @classmethod
    def from_chunk(cls, logw: np.ndarray, ind: np.ndarray) -> "_LogSums":
        acc = cls(ind.shape[0])
        acc.count = ind.shape[1]
        acc.hits = ind.sum(axis=1)
        any_hit = ind.any(axis=0)
        if any_hit.any():
            acc.ref = float(logw[any_hit].max())
            v = np.where(ind, np.exp(logw - acc.ref)[None, :], 0.0)
            acc.s1 = v.sum(axis=1)
            acc.s2 = v @ v.T
        return acc

    def merge(self, other: "_LogSums") -> "_LogSums":
        out = _LogSums(len(self.s1))
        out.count = self.count + other.count
        out.hits = self.hits + other.hits
        out.ref = max(self.ref, other.ref)
        if out.ref > -math.inf:
            for part in (self, other):
                if part.ref > -math.inf:
                    f = math.exp(part.ref - out.ref)
                    out.s1 = out.s1 + part.s1 * f
                    out.s2 = out.s2 + part.s2 * (f * f)
        return out

    def log_mean(self, k: int) -> float:
        if self.s1[k] <= 0:
            return -math.inf
        return self.ref + math.log(self.s1[k] / self.count)

    def rel_var_of_mean(self, k: int, l: int | None = None) -> float:
        """Var (or covariance) of the sample means, relative to mean_k * mean_l."""
        l = k if l is None else l
        n = self.count
        if n < 2 or self.s1[k] <= 0 or self.s1[l] <= 0:
            return math.inf
        mk, ml = self.s1[k] / n, self.s1[l] / n
        cov = (self.s2[k, l] / n - mk * ml) * n / (n - 1)
        return max(cov, 0.0 if k == l else cov) / (n * mk * ml)

    def ess(self, k: int) -> float:
        if self.s2[k, k] <= 0:
            return 0.0
        return float(self.s1[k] ** 2 / self.s2[k, k])


def map_chunks(work: Callable[[int, int], object], sizes: Sequence[int], workers: int = 1) -> list:
    """[work(c, sizes[c]) for each chunk c], in chunk order, on a thread pool."""
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(work, range(len(sizes)), sizes))
    return [work(c, m) for c, m in enumerate(sizes)]


def _run_chunks(work: Callable[[int, int], _LogSums], sizes: Sequence[int], workers: int) -> _LogSums:
    parts = map_chunks(work, sizes, workers)
    total = parts[0]
    for p in parts[1:]:
        total = total.merge(p)
    return total


def _indicators(x: np.ndarray, a: float, shifts: Sequence[float], event: str, z: float | None) -> np.ndarray:
    """(K, m) booleans for each per-observation shift in ``shifts``."""
    m = x.shape[0]
    if event == "always":
        return np.ones((len(shifts), m), dtype=bool)
    if event == "tstat":
        mean = x.mean(axis=1)
        v = np.sqrt(np.mean((x - mean[:, None]) ** 2, axis=1))
        return np.stack([mean + s >= a * v for s in shifts])
    if event == "fixed_z":
        if z is None:
            raise ValueError("fixed_z event needs z")
        s2 = sigma_from_cutoff(a)
        return np.stack([np.mean(((x + s) / z - 1.0) ** 2, axis=1) <= s2 for s in shifts])
    raise ValueError(f"unknown event {event!r}; expected one of {EVENTS}")


def _estimate(
    acc: _LogSums, k: int, *, method: str, n: int, a: float, seed: int, details: dict,
) -> TailEstimate:
    log_p = acc.log_mean(k)
    rel_var = acc.rel_var_of_mean(k)
    rel = math.sqrt(rel_var) if math.isfinite(rel_var) else math.inf
    p = math.exp(log_p) if log_p > -math.inf else 0.0
    ess = acc.ess(k)
    hits = int(acc.hits[k])
    advisories = []
    upper = None
    if hits == 0:
        # One-sided 95% Clopper-Pearson bound for zero successes.
        upper = -math.expm1(math.log(0.05) / acc.count)
        advisories.append(f"no hits in {acc.count} samples; p < {upper:.3g} at 95%")
        se = 0.0
    else:
        se = p * rel if method == "tilted" else math.sqrt(max(p * (1 - p), 0.0) / acc.count)
        if method == "naive":
            rel = se / p
    if method == "tilted" and hits and ess < ESS_FLOOR:
        advisories.append(f"effective sample size {ess:.1f} below {ESS_FLOOR:g}")
    for msg in advisories:
        warnings.warn(msg, AdvisoryWarning, stacklevel=3)
    return TailEstimate(
        p_hat=p,
        std_error=se,
        num_samples=acc.count,
        method=method,
        regime_score=regime_score(n, sigma_from_cutoff(a)),
        seed=seed,
        log_p_hat=log_p,
        rel_error=rel,
        hits=hits,
        ess=ess if method == "tilted" else float(hits),
        upper_bound=upper,
        advisories=tuple(advisories),
        details=details,
    )


def _check_common(n: int, a: float, num_samples: int):
    if n < 2:
        raise ValueError("n must be >= 2")
    if not a > 0:
        raise ValueError("cutoff a must be positive")
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")


# --------------------------------------------------------------------------
# naive


def _naive_curve(model, n, a, shifts, num_samples, seed, workers, event="tstat", z=None, stream=0):
    _check_common(n, a, num_samples)
    if model.sample is None:
        raise ValueError(f"model {model.label} has no sampler")
    shifts = list(shifts)

    def work(c, m):
        x = model.sample(chunk_rng(seed, stream, c), (m, n))
        return _LogSums.from_chunk(np.zeros(m), _indicators(x, a, shifts, event, z))

    acc = _run_chunks(work, chunk_layout(num_samples, n), workers)
    estimates = [
        _estimate(acc, k, method="naive", n=n, a=a, seed=seed, details={"shift": s, "event": event})
        for k, s in enumerate(shifts)
    ]
    return estimates, acc


def naive_tail_curve(
    model: DensityModel,
    n: int,
    a: float,
    shifts: Sequence[float],
    num_samples: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    event: str = "tstat",
    z: float | None = None,
    stream: int = 0,
) -> list[TailEstimate]:
    """Plain simulation of P(mean + s >= a V) for each s in ``shifts``,
    all from the same draws."""
    return _naive_curve(model, n, a, shifts, num_samples, seed, workers, event, z, stream)[0]


def naive_tail(
    model: DensityModel,
    n: int,
    a: float,
    d: float = 0.0,
    num_samples: int = 100_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    event: str = "tstat",
    z: float | None = None,
) -> TailEstimate:
    """Fraction of simulated samples with mean + d/n >= a V."""
    if d < 0:
        raise ValueError("d must be >= 0")
    return naive_tail_curve(model, n, a, [d / n], num_samples, seed, workers, event, z)[0]


# --------------------------------------------------------------------------
# tilted sampling


class TiltedSample(NamedTuple):
    draws: np.ndarray
    acceptance_rate: float
    expected_rate: float


def _proposal(model: DensityModel, z: float, t: float, h: float) -> tuple[str, float]:
    """Pick the rejection scheme with the higher acceptance rate.

    "base": propose from f, accept w.p. exp(-t (x/z - 1)^2); rate exp(h).
    "gauss": propose from the normal law proportional to exp(-t (x/z - 1)^2),
    accept w.p. f(x) / pdf_max; rate exp(h) sqrt(t/pi) / (z pdf_max).
    """
    base = math.exp(h)
    if model.pdf_max is None or t <= 0:
        return "base", base
    gauss = base * math.sqrt(t / math.pi) / (z * model.pdf_max)
    return ("gauss", gauss) if gauss > base else ("base", base)


def _tilted_draws(
    model: DensityModel, z: float, t: float, count: int, rate: float, rng, proposal: str = "base",
) -> tuple[np.ndarray, int, int]:
    """``count`` draws from f_n; also returns (accepted, proposed) totals."""
    out = np.empty(count)
    filled = accepted = proposed = 0
    sd = z / math.sqrt(2.0 * t) if proposal == "gauss" else 0.0
    while filled < count:
        k = int(math.ceil((count - filled) / max(rate, ACCEPTANCE_FLOOR) * 1.05)) + 16
        if proposal == "gauss":
            x = z + sd * rng.standard_normal(k)
            keep = x[rng.random(k) * model.pdf_max < model.pdf(x)]
        else:
            x = model.sample(rng, k)
            u = x / z - 1.0
            keep = x[rng.random(k) < np.exp(-t * u * u)]
        proposed += k
        accepted += keep.size
        take = min(keep.size, count - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out, accepted, proposed


def tilted_sampler(
    model: DensityModel,
    z: float,
    t_n: float,
    rng: np.random.Generator,
    size: int | None = None,
    acceptance_floor: float = ACCEPTANCE_FLOOR,
    proposal: str = "base",
) -> TiltedSample:
    """Draws from f_n by rejection: propose x ~ f, accept with probability
    exp(-t_n (x/z - 1)^2). The expected acceptance rate is exp(h(t_n)).

    ``proposal="auto"`` switches to a normal proposal when the model's
    pdf_max makes that more efficient; the reported rates follow the choice.
    """
    if model.sample is None:
        raise ValueError(f"model {model.label} has no sampler")
    if t_n < 0:
        raise ValueError("t_n must be >= 0")
    if proposal not in ("base", "auto"):
        raise ValueError(f"unknown proposal {proposal!r}")
    h = tilt_logmgf(model, z, t_n) if t_n > 0 else 0.0
    kind, expected = _proposal(model, z, t_n, h) if proposal == "auto" else ("base", math.exp(h))
    if expected < acceptance_floor:
        raise AcceptanceRateError(
            f"expected acceptance rate {expected:.3g} below floor {acceptance_floor:g}; "
            "use a smaller t_n or a different proposal"
        )
    count = 1 if size is None else int(size)
    draws, accepted, proposed = _tilted_draws(model, z, t_n, count, expected, rng, kind)
    return TiltedSample(draws[0] if size is None else draws, accepted / proposed, expected)


@dataclass(frozen=True)
class _Tilt:
    """A mixture of tilted laws f_n at scales z_j with weights pi_j.

    A single component is the plain tilt with weight exp(t Q + n h),
    Q = sum (X_i/z - 1)^2. With several, each sample gets the balance
    weight 1 / sum_j pi_j exp(-t_j Q_j - n h_j).
    """

    model: DensityModel
    z: np.ndarray
    t: np.ndarray
    h: np.ndarray
    log_pi: np.ndarray
    sigma2: float
    z0: float

    def details(self) -> dict:
        j = int(np.argmin(np.abs(self.z - self.z0)))
        return {
            "z": self.z0,
            "t_n": float(self.t[j]),
            "h": float(self.h[j]),
            "sigma2": self.sigma2,
            "acceptance_rate": float(np.exp(self.h[j])),
            "num_scales": int(self.z.size),
            "z_range": [float(self.z[0]), float(self.z[-1])],
        }

    def log_weights(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[1]
        m1 = x.mean(axis=1)[:, None]
        m2 = np.mean(x * x, axis=1)[:, None]
        z = self.z[None, :]
        q = n * (m2 / (z * z) - 2.0 * m1 / z + 1.0)
        terms = self.log_pi - self.t * q - n * self.h
        top = terms.max(axis=1)
        return -(top + np.log(np.sum(np.exp(terms - top[:, None]), axis=1)))

    def draw(self, n: int, m: int, rng: np.random.Generator) -> np.ndarray:
        if self.z.size == 1:
            comp = np.zeros(m, dtype=np.int64)
        else:
            comp = rng.choice(self.z.size, size=m, p=np.exp(self.log_pi))
        x = np.empty((m, n))
        for j in np.unique(comp):
            rows = np.nonzero(comp == j)[0]
            kind, rate = _proposal(self.model, self.z[j], self.t[j], self.h[j])
            flat, _, _ = _tilted_draws(self.model, self.z[j], self.t[j], rows.size * n, rate, rng, kind)
            x[rows] = flat.reshape(rows.size, n)
        return x


_SCALE_WINDOW = 25.0
_MAX_SCALES = 400
_LOG_Z_LIMIT = 6.0


def _slice(model: DensityModel, z: float, s2: float):
    """(t, h, log-rate sigma^2 t + h) of the dispersion slice at scale z, or None."""
    try:
        sol = solve_tn(model, z, s2)
    except (SaddlepointAtZeroError, TiltError, BracketError):
        return None
    if math.exp(sol.h_val) < ACCEPTANCE_FLOOR:
        return None
    return sol.t_n, sol.h_val, s2 * sol.t_n + sol.h_val


def _make_tilt(model: DensityModel, a: float, n: int, z: float | None = None, mixture: bool = True) -> _Tilt:
    """Tilt at z (default z0) alone, or a mixture over a log-scale grid.

    The grid steps by 1/sqrt(n t) in log z, the scale change over which a
    slice sample stays inside a neighbouring slice up to a weight factor of
    about e^(1/4), and extends both ways until the slice log-probability
    n (sigma^2 t + h) falls 25 below its value at z0. Component weights are
    proportional to exp(n (sigma^2 t + h)), which keeps the importance weights
    bounded on the event.
    """
    z0 = find_z0(model) if z is None else z
    s2 = sigma_from_cutoff(a)
    centre = _slice(model, z0, s2)
    if centre is None:
        sol = solve_tn(model, z0, s2)
        raise AcceptanceRateError(f"tilted acceptance rate {math.exp(sol.h_val):.3g} below floor")
    rows = [(z0, *centre)]
    if mixture and z is None:
        step = 1.0 / math.sqrt(n * centre[0])
        for direction in (-1.0, 1.0):
            k = 1
            while len(rows) < _MAX_SCALES and k * step <= _LOG_Z_LIMIT:
                zk = z0 * math.exp(direction * k * step)
                sl = _slice(model, zk, s2)
                if sl is None or n * (sl[2] - centre[2]) < -_SCALE_WINDOW:
                    break
                rows.append((zk, *sl))
                k += 1
    rows.sort()
    zs, ts, hs, rates = (np.array(col) for col in zip(*rows))
    log_pi = n * rates
    log_pi -= log_pi.max()
    log_pi -= math.log(np.sum(np.exp(log_pi)))
    return _Tilt(model, zs, ts, hs, log_pi, s2, z0)


def _tilted_acc(
    tilt: _Tilt, n: int, a: float, shifts: Sequence[float], num_samples: int, seed: int,
    workers: int, event: str, stream: int,
) -> _LogSums:
    if tilt.model.sample is None:
        raise ValueError(f"model {tilt.model.label} has no sampler")

    def work(c, m):
        x = tilt.draw(n, m, chunk_rng(seed, stream, c))
        return _LogSums.from_chunk(tilt.log_weights(x), _indicators(x, a, shifts, event, tilt.z0))

    return _run_chunks(work, chunk_layout(num_samples, n), workers)


def _tilted_curve(model, n, a, shifts, num_samples, seed, workers, event="tstat", z=None, stream=0, mixture=True):
    _check_common(n, a, num_samples)
    tilt = _make_tilt(model, a, n, z, mixture=mixture and event == "tstat")
    shifts = list(shifts)
    acc = _tilted_acc(tilt, n, a, shifts, num_samples, seed, workers, event, stream)
    estimates = [
        _estimate(acc, k, method="tilted", n=n, a=a, seed=seed,
                  details={**tilt.details(), "shift": s, "event": event})
        for k, s in enumerate(shifts)
    ]
    return estimates, acc


def tilted_tail_curve(
    model: DensityModel,
    n: int,
    a: float,
    shifts: Sequence[float],
    num_samples: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    event: str = "tstat",
    z: float | None = None,
    stream: int = 0,
    mixture: bool = True,
) -> list[TailEstimate]:
    """Importance-sampling estimates of P(mean + s >= a V) for every s in
    ``shifts`` from one set of tilted draws of ``model`` (common random
    numbers; the events are nested in s).

    The t-statistic event is the union over z of the slices
    {(1/n) sum (X_i/z - 1)^2 <= sigma^2}, so by default the draws come from a
    mixture of tilts over scales around z0 (see ``_make_tilt``).
    ``mixture=False``, a given ``z``, or a non-"tstat" event uses the single
    tilt at that point.
    """
    return _tilted_curve(model, n, a, shifts, num_samples, seed, workers, event, z, stream, mixture)[0]


def tilted_tail(
    model: DensityModel,
    n: int,
    a: float,
    d: float = 0.0,
    num_samples: int = 100_000,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    event: str = "tstat",
    z: float | None = None,
    stream: int = 0,
    mixture: bool = True,
) -> TailEstimate:
    """Importance-sampling estimate of P(mean + d/n >= a V).

    Draws come from the shifted law f(x - d/n) tilted at its own z0 (or at
    ``z``). ``event="fixed_z"`` instead estimates the single-point dispersion
    event {sigma^2 >= (1/n) sum (X_i/z - 1)^2} at the tilt point.
    """
    if d < 0:
        raise ValueError("d must be >= 0")
    target = shift(model, d / n) if d else model
    return tilted_tail_curve(target, n, a, [0.0], num_samples, seed, workers, event, z, stream, mixture)[0]


def mean_importance_weight(
    model: DensityModel,
    n: int,
    a: float,
    num_samples: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    per_draw: bool = False,
) -> tuple[float, float]:
    """Mean and standard error of the importance weight with no indicator.

    Unbiased tilting makes the mean 1. Uses the single tilt at z0 with the
    saddlepoint of ``a``. ``per_draw`` uses single-observation weights f/f_n
    instead of the n-fold product.
    """
    tilt = _make_tilt(model, a, n, mixture=False)
    size = 1 if per_draw else n
    acc = _tilted_acc(tilt, size, a, [0.0], num_samples, seed, workers, "always", 0)
    mean = math.exp(acc.log_mean(0))
    return mean, mean * math.sqrt(acc.rel_var_of_mean(0))


# --------------------------------------------------------------------------
# ratio


def ratio_estimate(
    model: DensityModel,
    n: int,
    a: float,
    d: float,
    num_samples: int,
    seed: int = DEFAULT_SEED,
    workers: int = 1,
    common_random_numbers: bool = False,
    method: str = "tilted",
) -> RatioResult:
    """R_n = P(mean + d/n >= a V) / P(mean >= a V) with a 95% delta-method
    interval on the log scale.

    Independent mode draws the numerator from the shifted law on stream 1 and
    the denominator on stream 0. Common-random-numbers mode evaluates both
    events on the same draws, which makes them nested.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    if method not in ("tilted", "naive"):
        raise ValueError(f"unknown method {method!r}")
    cov = 0.0
    if common_random_numbers:
        curve = _tilted_curve if method == "tilted" else _naive_curve
        (den, num), acc = curve(model, n, a, [0.0, d / n], num_samples, seed, workers)
        cov = acc.rel_var_of_mean(0, 1)
        cov = cov if math.isfinite(cov) else 0.0
    elif method == "tilted":
        den = tilted_tail(model, n, a, 0.0, num_samples, seed, workers)
        num = tilted_tail(model, n, a, d, num_samples, seed, workers, stream=1)
    else:
        den = naive_tail_curve(model, n, a, [0.0], num_samples, seed, workers)[0]
        num = naive_tail_curve(model, n, a, [d / n], num_samples, seed, workers, stream=1)[0]
    if den.hits == 0 or den.log_p_hat == -math.inf:
        raise UndefinedRatioError("denominator estimate is zero; ratio undefined")
    log_r = num.log_p_hat - den.log_p_hat
    var = num.rel_error ** 2 + den.rel_error ** 2 - 2.0 * cov
    sd = math.sqrt(max(var, 0.0))
    r = math.exp(log_r)
    return RatioResult(
        numerator=num,
        denominator=den,
        r_hat=r,
        ci_low=math.exp(log_r - _Z95 * sd),
        ci_high=math.exp(log_r + _Z95 * sd),
        theory_limit=ratio_limit(model, d),
        log_r_hat=log_r,
        common_random_numbers=common_random_numbers,
    )

