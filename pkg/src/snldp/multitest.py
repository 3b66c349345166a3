"""pFDR bounds, sample-size rules and a multiple-testing simulator.

Each of m hypotheses is false with probability p; a false one shifts the
data by u. A test rejects when mean >= a_n V. With R_n(u) the ratio of
rejection probabilities under false and true nulls, the positive false
discovery rate of this rule is (1 - p) / (1 - p + p R_n(u)).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .density import DensityModel
from .ldp import CutoffRule, find_z0
from .montecarlo import (
    DEFAULT_SEED,
    AdvisoryWarning,
    RatioResult,
    chunk_layout,
    chunk_rng,
    map_chunks,
    ratio_estimate,
)

__all__ = [
    "StudyPlan",
    "SampleSizeResult",
    "MultitestReport",
    "pfdr_min",
    "required_ratio",
    "sample_size_asymptotic",
    "sample_size_search",
    "simulate_multitest",
]

_SIM_STREAM = 2


def _unit(name: str, v: float) -> None:
    if not 0.0 < v < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {v}")


def pfdr_min(p: float, r_n: float) -> float:
    """(1 - p) / (1 - p + p r_n)."""
    _unit("p", p)
    if r_n < 0:
        raise ValueError("r_n must be >= 0")
    if math.isinf(r_n):
        return 0.0
    return (1.0 - p) / (1.0 - p + p * r_n)


def required_ratio(p: float, alpha: float) -> float:
    """Smallest R_n with pfdr_min(p, R_n) <= alpha: (1/p - 1)(1/alpha - 1)."""
    _unit("p", p)
    _unit("alpha", alpha)
    return (1.0 / p - 1.0) * (1.0 / alpha - 1.0)


@dataclass(frozen=True)
class StudyPlan:
    p: float
    alpha: float
    u: float
    model: DensityModel
    cutoff: CutoffRule = field(default_factory=CutoffRule)

    def __post_init__(self):
        _unit("p", self.p)
        _unit("alpha", self.alpha)
        if not self.u > 0:
            raise ValueError("shift u must be positive")

    @property
    def threshold(self) -> float:
        return required_ratio(self.p, self.alpha)


@dataclass(frozen=True)
class SampleSizeResult:
    k_asymptotic: int
    k_search: Optional[int]
    threshold: float
    search_trace: tuple = ()
    advisories: tuple = ()

    def asdict(self) -> dict:
        return {
            "k_asymptotic": self.k_asymptotic,
            "k_search": self.k_search,
            "threshold": self.threshold,
            "search_trace": [dict(zip(("n", "a", "r_hat", "ci_low", "ci_high"), row)) for row in self.search_trace],
            "advisories": list(self.advisories),
        }


def _trivial_threshold(thr: float) -> str:
    return f"threshold {thr:.6g} <= 1: any n >= 1 meets it because R_n(u) >= 1"


def sample_size_asymptotic(plan: StudyPlan, z0: float | None = None) -> int:
    """ceil((z0 / u) ln threshold); 1 when the threshold is at most 1."""
    thr = plan.threshold
    if thr <= 1.0:
        warnings.warn(_trivial_threshold(thr), AdvisoryWarning, stacklevel=2)
        return 1
    z0 = find_z0(plan.model) if z0 is None else z0
    return max(1, math.ceil(z0 / plan.u * math.log(thr)))


def sample_size_search(
    plan: StudyPlan,
    num_samples: int,
    seed: int = DEFAULT_SEED,
    n_max: int = 4096,
    workers: int = 1,
    method: str = "tilted",
) -> SampleSizeResult:
    """Smallest n whose 95% lower bound on R_n(u) clears the threshold.

    Probes a doubling grid from max(2, k_asymptotic // 4), then bisects
    between the last failing and first passing grid point. R_n(u) need not
    be monotone in n, so every probe is kept in ``search_trace`` as
    (n, a_n, r_hat, ci_low, ci_high).
    """
    thr = plan.threshold
    if thr <= 1.0:
        msg = _trivial_threshold(thr)
        warnings.warn(msg, AdvisoryWarning, stacklevel=2)
        return SampleSizeResult(1, 1, thr, (), (msg,))
    k_asym = sample_size_asymptotic(plan)
    trace = []
    cache: dict[int, bool] = {}

    def passes(n: int) -> bool:
        if n not in cache:
            a = plan.cutoff.a(n)
            r: RatioResult = ratio_estimate(
                plan.model, n, a, plan.u * n, num_samples, seed, workers, method=method
            )
            trace.append((n, a, r.r_hat, r.ci_low, r.ci_high))
            cache[n] = r.ci_low >= thr
        return cache[n]

    lo, hi = 1, None
    n = max(2, k_asym // 4)
    while n <= n_max:
        if passes(n):
            hi = n
            break
        lo = n
        n *= 2
    if hi is None:
        return SampleSizeResult(k_asym, None, thr, tuple(trace), (f"threshold not cleared up to n = {n_max}",))
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid < 2:
            break
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return SampleSizeResult(k_asym, hi, thr, tuple(trace))


@dataclass(frozen=True)
class MultitestReport:
    m: int
    n: int
    a: float
    u: float
    p: float
    false_nulls: int
    rejections: int
    false_discoveries: int
    fdp: Optional[float]
    fdp_std_error: Optional[float]
    r_hat: float
    r_ci: tuple[float, float]
    pfdr_theory: float
    pfdr_theory_ci: tuple[float, float]
    theory_std_error: Optional[float]
    seed: int
    advisories: tuple = ()

    def z_score(self) -> Optional[float]:
        """(fdp - pfdr_theory) over the combined standard error."""
        if self.fdp is None:
            return None
        half = (self.pfdr_theory_ci[1] - self.pfdr_theory_ci[0]) / (2 * 1.959963984540054)
        se = math.hypot(self.theory_std_error or 0.0, half)
        if se == 0:
            return 0.0 if self.fdp == self.pfdr_theory else math.inf
        return (self.fdp - self.pfdr_theory) / se

    def asdict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "a": self.a,
            "u": self.u,
            "p": self.p,
            "false_nulls": self.false_nulls,
            "rejections": self.rejections,
            "false_discoveries": self.false_discoveries,
            "fdp": self.fdp,
            "fdp_std_error": self.fdp_std_error,
            "r_hat": self.r_hat,
            "r_ci": list(self.r_ci),
            "pfdr_theory": self.pfdr_theory,
            "pfdr_theory_ci": list(self.pfdr_theory_ci),
            "theory_std_error": self.theory_std_error,
            "z_score": self.z_score(),
            "seed": self.seed,
            "advisories": list(self.advisories),
        }


def simulate_multitest(
    plan: StudyPlan,
    m: int,
    n: int,
    seed: int = DEFAULT_SEED,
    a: float | None = None,
    ratio_samples: int = 100_000,
    workers: int = 1,
    ratio_method: str = "tilted",
) -> MultitestReport:
    """Simulate m independent one-sided tests and compare the realized false
    discovery proportion with pfdr_min(p, R_hat_n(u)).

    ``fdp_std_error`` is the binomial error of the realized proportion;
    ``theory_std_error`` is sqrt(pi (1 - pi) / R) with pi the predicted
    proportion, the spread of the FDP if the prediction holds.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if n < 2:
        raise ValueError("n must be >= 2")
    model = plan.model
    if model.sample is None:
        raise ValueError(f"model {model.label} has no sampler")
    a = plan.cutoff.a(n) if a is None else a
    u = plan.u

    def work(c, size):
        rng = chunk_rng(seed, _SIM_STREAM, c)
        false = rng.random(size) < plan.p
        x = model.sample(rng, (size, n)) + np.where(false, u, 0.0)[:, None]
        mean = x.mean(axis=1)
        v = np.sqrt(np.mean((x - mean[:, None]) ** 2, axis=1))
        reject = mean >= a * v
        return np.array([false.sum(), reject.sum(), (reject & ~false).sum()], dtype=np.int64)

    counts = sum(map_chunks(work, chunk_layout(m, n), workers))
    false_nulls, rejections, false_disc = (int(v) for v in counts)

    ratio = ratio_estimate(model, n, a, u * n, ratio_samples, seed, workers, method=ratio_method)
    theory = pfdr_min(plan.p, ratio.r_hat)
    # pfdr_min is decreasing in R, so the ratio interval maps to a reversed one.
    theory_ci = (pfdr_min(plan.p, ratio.ci_high), pfdr_min(plan.p, ratio.ci_low))

    advisories = []
    if rejections == 0:
        fdp = fdp_se = theory_se = None
        advisories.append("no rejections: the false discovery proportion is undefined")
    else:
        fdp = false_disc / rejections
        fdp_se = math.sqrt(fdp * (1.0 - fdp) / rejections)
        theory_se = math.sqrt(theory * (1.0 - theory) / rejections)
    for msg in advisories:
        warnings.warn(msg, AdvisoryWarning, stacklevel=2)
    return MultitestReport(
        m=m,
        n=n,
        a=a,
        u=u,
        p=plan.p,
        false_nulls=false_nulls,
        rejections=rejections,
        false_discoveries=false_disc,
        fdp=fdp,
        fdp_std_error=fdp_se,
        r_hat=ratio.r_hat,
        r_ci=(ratio.ci_low, ratio.ci_high),
        pfdr_theory=theory,
        pfdr_theory_ci=theory_ci,
        theory_std_error=theory_se,
        seed=seed,
        advisories=tuple(advisories),
    )

