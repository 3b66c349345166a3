"""Self-checks run by ``snldp verify``.

Each suite returns a list of Check records; a suite passes when all of its
checks do. Every suite is deterministic given its seed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .density import DensityModel, make_cauchy, make_gaussian
from .ldp import find_z0, sigma_from_cutoff, solve_tn, tilt_logmgf
from .montecarlo import (
    AdvisoryWarning,
    chunk_rng,
    mean_importance_weight,
    naive_tail,
    tilted_sampler,
    tilted_tail,
)
from .numerics import Interval, integrate
from .selfnorm import biased_sd, joint_density_mc, sample_sphere, shao_event_batch

__all__ = [
    "Check",
    "SUITES",
    "run_suite",
    "shao_corpus",
    "tilt_normalization",
    "saddlepoint_asymptotics",
    "is_cross_check",
    "truncated_weight_check",
    "joint_density_probe",
    "JOINT_PROBES",
]


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def asdict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), **self.detail}


def _builtins() -> list[DensityModel]:
    return [make_gaussian(), make_cauchy()]


def shao_corpus(num_samples: int, seed: int, n_range=(2, 50), a_range=(0.5, 5.0)) -> dict:
    """Both sides of the t-statistic / dispersion identity on random samples;
    n, a, the family (Gaussian or Cauchy) and a location offset are drawn per
    sample so that both outcomes of the event occur."""
    rng = chunk_rng(seed, 10, 0)
    ns = rng.integers(n_range[0], n_range[1] + 1, size=num_samples)
    a_vals = rng.uniform(*a_range, size=num_samples)
    cauchy = rng.random(num_samples) < 0.5
    offsets = rng.uniform(-1.0, 3.0, size=num_samples)
    mismatches = events = 0
    for n in np.unique(ns):
        rows = np.nonzero(ns == n)[0]
        x = rng.standard_normal((rows.size, n))
        c = cauchy[rows]
        x[c] = rng.standard_cauchy((int(c.sum()), n))
        x += offsets[rows, None]
        via_t, via_d = shao_event_batch(x, a_vals[rows])
        mismatches += int(np.sum(via_t != via_d))
        events += int(np.sum(via_t))
    return {"samples": int(num_samples), "mismatches": mismatches, "events": events}


def _shao(samples: int, seed: int, model: DensityModel) -> list[Check]:
    r = shao_corpus(samples, seed)
    return [Check("shao_equivalence", r["mismatches"] == 0, r)]


def tilt_normalization(z_values=(0.5, 1.0, 2.0), tol: float = 1e-9) -> list[Check]:
    out = []
    for model in _builtins():
        for z in z_values:
            h0 = tilt_logmgf(model, z, 0.0)
            out.append(Check(f"h0:{model.label}:z={z:g}", abs(h0) <= tol, {"h0": h0, "tol": tol}))
    return out


def _tilt0(samples: int, seed: int, model: DensityModel) -> list[Check]:
    return tilt_normalization()


def saddlepoint_asymptotics(sigma2_grid=(1e-2, 1e-3, 1e-4), z: float = 1.0, tol: float = 0.05) -> list[Check]:
    """|2 sigma^2 t_n - 1| and |h(t_n) - log sigma - log(sqrt(2 pi) z f(z))|
    must shrink along the grid and end below ``tol``."""
    out = []
    for model in _builtins():
        lead = math.log(math.sqrt(2.0 * math.pi) * z * float(model.pdf(z)))
        gaps_t, gaps_h = [], []
        for s2 in sigma2_grid:
            sol = solve_tn(model, z, s2)
            gaps_t.append(abs(2.0 * s2 * sol.t_n - 1.0))
            gaps_h.append(abs(sol.h_val - 0.5 * math.log(s2) - lead))
        for name, gaps in (("t_n", gaps_t), ("h", gaps_h)):
            ok = all(b < a for a, b in zip(gaps, gaps[1:])) and gaps[-1] < tol
            out.append(Check(f"saddlepoint_{name}:{model.label}", ok,
                             {"sigma2": list(sigma2_grid), "gaps": gaps, "tol": tol}))
    return out


def _saddlepoint(samples: int, seed: int, model: DensityModel) -> list[Check]:
    return saddlepoint_asymptotics()


def is_cross_check(
    model: DensityModel, n: int, a: float, naive_samples: int, tilted_samples: int, seed: int, workers: int = 1,
) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AdvisoryWarning)
        nv = naive_tail(model, n, a, 0.0, naive_samples, seed, workers)
        tv = tilted_tail(model, n, a, 0.0, tilted_samples, seed, workers)
    se = math.hypot(nv.std_error, tv.std_error)
    return {
        "naive": nv.p_hat,
        "naive_se": nv.std_error,
        "naive_hits": nv.hits,
        "tilted": tv.p_hat,
        "tilted_se": tv.std_error,
        "z_score": (tv.p_hat - nv.p_hat) / se if se > 0 else math.inf,
    }


# Cutoffs for the unbiasedness check of the single-draw weight f / f_n on
# the Gaussian. The n-fold weight is the product of independent copies, so
# its mean is 1 exactly when this one's is; its variance (E w^2)^n - 1 is far
# too large to check directly. The single-draw variance is finite only for
# t_n < 1/2, which holds on this grid.
WEIGHT_GRID = (0.3, 0.5)
# Cutoff and window for the truncated-weight identity; there t_n > 1/2.
TRUNCATED_A = 1.0
TRUNCATED_WINDOW = 3.0


def truncated_weight_check(
    model: DensityModel, a: float, num_samples: int, seed: int, window: float = TRUNCATED_WINDOW,
) -> dict:
    """E_{f_n}[w 1{|u| <= c}] = P_f(|u| <= c) with u = X/z0 - 1, w = f / f_n.

    The indicator bounds the weight, so the estimate has finite variance even
    when the untruncated weight does not.
    """
    z0 = find_z0(model)
    sol = solve_tn(model, z0, sigma_from_cutoff(a))
    rng = chunk_rng(seed, 13, 0)
    x = tilted_sampler(model, z0, sol.t_n, rng, size=num_samples, proposal="auto").draws
    u = x / z0 - 1.0
    w = np.where(np.abs(u) <= window, np.exp(sol.t_n * u * u + sol.h_val), 0.0)
    target = integrate(model.pdf, Interval(z0 * (1.0 - window), z0 * (1.0 + window)), points=[z0]).value
    mean = float(w.mean())
    se = float(w.std(ddof=1) / math.sqrt(num_samples))
    return {"mean": mean, "se": se, "target": target, "t_n": sol.t_n, "window": window}


def _is(samples: int, seed: int, model: DensityModel) -> list[Check]:
    r = is_cross_check(model, 20, 1.0, 10 * samples, samples, seed)
    out = [Check("is_vs_naive:n=20:a=1", abs(r["z_score"]) <= 3.0 and r["naive_hits"] >= 100, r)]
    gauss = make_gaussian()
    for a in WEIGHT_GRID:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdvisoryWarning)
            mean, se = mean_importance_weight(gauss, 20, a, samples, seed, per_draw=True)
        t_n = solve_tn(gauss, 1.0, sigma_from_cutoff(a)).t_n
        out.append(Check(f"mean_weight:a={a:g}", abs(mean - 1.0) <= 3.0 * se,
                         {"mean": mean, "se": se, "t_n": t_n}))
    tr = truncated_weight_check(gauss, TRUNCATED_A, samples, seed)
    out.append(Check(f"truncated_weight:a={TRUNCATED_A:g}", abs(tr["mean"] - tr["target"]) <= 3.0 * tr["se"], tr))
    return out


JOINT_PROBES = ((0.0, 0.8), (0.3, 0.6), (-0.4, 1.0), (0.2, 1.3), (0.6, 0.5))
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)


def joint_density_probe(
    model: DensityModel,
    n: int = 5,
    direct_samples: int = 4_000_000,
    num_mc: int = 200_000,
    seed: int = 0,
    probes=JOINT_PROBES,
    width: float = 0.06,
    small_s=(1e-3, 1e-2),
) -> dict:
    """Sphere-integral density of (mean, V) against a 2-D histogram of
    direct simulation, bin by bin.

    The integral is averaged over each bin with a 3x3 Gauss-Legendre rule so
    both sides estimate the same bin mass. Also returns the log-log slope of
    the density in s between the two ``small_s`` values at t = location.
    """
    rng = chunk_rng(seed, 11, 0)
    omega = sample_sphere(n, rng, num_mc)
    counts = np.zeros(len(probes), dtype=np.int64)
    done = 0
    c = 0
    while done < direct_samples:
        m = min(500_000, direct_samples - done)
        x = model.sample(chunk_rng(seed, 12, c), (m, n))
        tb = x.mean(axis=1)
        vb = biased_sd(x)
        for k, (t0, s0) in enumerate(probes):
            counts[k] += int(np.sum((np.abs(tb - t0) < width / 2) & (np.abs(vb - s0) < width / 2)))
        done += m
        c += 1
    area = width * width
    rows = []
    for k, (t0, s0) in enumerate(probes):
        # The nodes share sphere draws, so their errors add linearly.
        est = mc_se = 0.0
        for wi, xi in zip(_GL_WEIGHTS, _GL_NODES):
            for wj, xj in zip(_GL_WEIGHTS, _GL_NODES):
                p, se = joint_density_mc(model, n, t0 + xi * width / 2, s0 + xj * width / 2, num_mc, omega=omega)
                est += float(wi * wj) * p / 4.0
                mc_se += float(wi * wj) * se / 4.0
        hist = float(counts[k]) / (direct_samples * area)
        hist_se = math.sqrt(counts[k]) / (direct_samples * area)
        se = math.hypot(mc_se, hist_se)
        rows.append({"t": t0, "s": s0, "mc": est, "mc_se": mc_se, "hist": hist,
                     "hist_se": hist_se, "z_score": (est - hist) / se if se > 0 else math.inf})
    s1, s2 = small_s
    p1, _ = joint_density_mc(model, n, model.location, s1, num_mc, omega=omega)
    p2, _ = joint_density_mc(model, n, model.location, s2, num_mc, omega=omega)
    slope = math.log(p2 / p1) / math.log(s2 / s1)
    return {"n": n, "probes": rows, "slope": slope, "slope_target": n - 2}


def _joint(samples: int, seed: int, model: DensityModel) -> list[Check]:
    r = joint_density_probe(model, direct_samples=max(samples, 100_000) * 40, seed=seed)
    out = [Check(f"joint_probe:t={p['t']:g}:s={p['s']:g}", abs(p["z_score"]) <= 3.0, p) for p in r["probes"]]
    target = r["slope_target"]
    out.append(Check("joint_small_s_slope", abs(r["slope"] - target) <= 0.1 * target,
                     {"slope": r["slope"], "target": target}))
    return out


SUITES = {
    "shao": _shao,
    "tilt0": _tilt0,
    "saddlepoint": _saddlepoint,
    "is": _is,
    "joint": _joint,
}


def run_suite(name: str, samples: int, seed: int, model: DensityModel | None = None) -> list[Check]:
    model = make_gaussian() if model is None else model
    if name == "all":
        return [c for key in SUITES for c in SUITES[key](samples, seed, model)]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    return SUITES[name](samples, seed, model)
