"""Command-line front end.

    snldp z0 --density gaussian:0,1
    snldp tilt --sigma2 1e-2,1e-3
    snldp tail --n 20 --a 1 --samples 100000 --method both
    snldp ratio --n 400 --d 1 --samples 100000
    snldp samplesize --p 0.5 --alpha 0.05 --u 0.1
    snldp pfdr --p 0.5 --alpha 0.05
    snldp simulate --p 0.5 --u 0.8 --m 200000 --n 50 --a 1
    snldp verify --suite all

Output is JSON (sorted keys, one document) or, with --format csv, a table
with a header row. Usage errors exit 2; numeric failures print an error
object and exit 1, as does a failed verification. The default worker count
comes from SNLDP_WORKERS; it never changes any output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

from .density import DensitySpecError, parse_density
from .ldp import (
    CutoffRule,
    exact_tail_asymptotic,
    find_z0,
    sigma_from_cutoff,
    solve_tn,
    stationarity_residual,
)
from .montecarlo import DEFAULT_SEED, AdvisoryWarning, naive_tail, ratio_estimate, tilted_tail
from .multitest import (
    StudyPlan,
    pfdr_min,
    required_ratio,
    sample_size_asymptotic,
    sample_size_search,
    simulate_multitest,
)
from .verify import SUITES, run_suite

__all__ = ["RunConfig", "build_parser", "run", "main", "WORKERS_ENV"]

WORKERS_ENV = "SNLDP_WORKERS"
DEFAULT_DENSITY = "gaussian:0,1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _density(text: str) -> str:
    try:
        parse_density(text)
    except DensitySpecError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _cutoff(text: str) -> str:
    try:
        CutoffRule.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    return values


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--density", type=_density, default=DEFAULT_DENSITY,
                        help="gaussian:<mu>,<sigma> or cauchy:<mu>,<sigma>")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--workers", type=_positive_int, default=None,
                        help=f"threads for Monte Carlo chunks (default ${WORKERS_ENV} or 1)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = _Parser(prog="snldp", description="Self-normalized tail probabilities and pFDR tools.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("z0", parents=[common], help="maximizer of z f(z)")

    p = sub.add_parser("tilt", parents=[common], help="saddlepoint table over a sigma^2 grid")
    p.add_argument("--z", type=float, default=None, help="tilt point (default z0)")
    p.add_argument("--sigma2", type=_float_list, default=(1e-1, 1e-2, 1e-3, 1e-4))
    p.add_argument("--n", type=_positive_int, default=1)

    p = sub.add_parser("tail", parents=[common], help="tail probability estimate")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--d", type=float, default=0.0)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--method", choices=("naive", "tilted", "both"), default="tilted")
    p.add_argument("--event", choices=("tstat", "fixed_z"), default="tstat")

    p = sub.add_parser("ratio", parents=[common], help="R_n with confidence interval")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--a", type=float, default=None, help="cutoff (default from --cutoff)")
    p.add_argument("--cutoff", type=_cutoff, default="power:0.125")
    p.add_argument("--d", type=float, default=1.0)
    p.add_argument("--samples", type=_positive_int, default=100_000)
    p.add_argument("--method", choices=("naive", "tilted"), default="tilted")
    p.add_argument("--crn", action="store_true", help="common random numbers")

    p = sub.add_parser("samplesize", parents=[common], help="minimum per-test sample size")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--cutoff", type=_cutoff, default="power:0.125")
    p.add_argument("--samples", type=int, default=0, help="Monte Carlo budget per probe; 0 skips the search")
    p.add_argument("--n-max", type=_positive_int, default=4096)

    p = sub.add_parser("pfdr", parents=[common], help="pFDR bound and required ratio")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--r", type=float, default=None)

    p = sub.add_parser("simulate", parents=[common], help="multiple-testing simulation")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--cutoff", type=_cutoff, default="power:0.125")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--ratio-samples", type=_positive_int, default=100_000)

    p = sub.add_parser("verify", parents=[common], help="run self-checks")
    p.add_argument("--suite", choices=tuple(SUITES) + ("all",), default="all")
    p.add_argument("--samples", type=_positive_int, default=100_000)
    return parser


@dataclass(frozen=True)
class RunConfig:
    """A parsed invocation. ``to_argv`` and ``parse`` are inverses."""

    command: str
    density_spec: str = DEFAULT_DENSITY
    seed: int = DEFAULT_SEED
    workers: int = 1
    output_format: str = "json"
    params: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, argv) -> "RunConfig":
        ns = vars(build_parser().parse_args(list(argv)))
        command = ns.pop("command")
        workers = ns.pop("workers")
        return cls(
            command=command,
            density_spec=ns.pop("density"),
            seed=ns.pop("seed"),
            workers=_default_workers() if workers is None else workers,
            output_format=ns.pop("format"),
            params=ns,
        )

    def to_argv(self) -> list[str]:
        argv = [self.command, "--density", self.density_spec, "--seed", str(self.seed),
                "--workers", str(self.workers), "--format", self.output_format]
        for key in sorted(self.params):
            value = self.params[key]
            flag = "--" + key.replace("_", "-")
            if value is None or value is False:
                continue
            if value is True:
                argv.append(flag)
            elif isinstance(value, tuple):
                argv += [flag, ",".join(repr(v) for v in value)]
            else:
                argv += [flag, repr(value) if isinstance(value, float) else str(value)]
        return argv


# --------------------------------------------------------------------------
# commands; each returns (payload, csv_rows, ok)


def _cmd_z0(cfg, model):
    z0 = find_z0(model)
    out = {"z0": z0, "residual": stationarity_residual(model, z0)}
    return out, [out], True


def _cmd_tilt(cfg, model):
    p = cfg.params
    z = find_z0(model) if p["z"] is None else p["z"]
    lead = math.log(math.sqrt(2.0 * math.pi) * z * float(model.pdf(z)))
    rows = []
    for s2 in p["sigma2"]:
        sol = solve_tn(model, z, s2, p["n"])
        row = sol.asdict()
        row["two_sigma2_t_minus_1"] = 2.0 * s2 * sol.t_n - 1.0
        row["h_minus_leading"] = sol.h_val - 0.5 * math.log(s2) - lead
        rows.append(row)
    return {"z": z, "rows": rows}, rows, True


def _cmd_tail(cfg, model):
    p = cfg.params
    methods = ("naive", "tilted") if p["method"] == "both" else (p["method"],)
    rows = []
    for m in methods:
        fn = naive_tail if m == "naive" else tilted_tail
        kwargs = {}
        if p["event"] == "fixed_z":
            kwargs["z"] = find_z0(model)
        est = fn(model, p["n"], p["a"], p["d"], p["samples"], cfg.seed, cfg.workers, event=p["event"], **kwargs)
        rows.append(est.asdict())
    s2 = sigma_from_cutoff(p["a"])
    asym = exact_tail_asymptotic(solve_tn(model, find_z0(model), s2, p["n"]))
    out = {"n": p["n"], "a": p["a"], "d": p["d"], "sigma2": s2, "event": p["event"],
           "estimates": rows, "asymptotic_log_tail": asym.log_prob, "regime_score": asym.regime_score}
    return out, rows, True


def _cmd_ratio(cfg, model):
    p = cfg.params
    a = CutoffRule.parse(p["cutoff"]).a(p["n"]) if p["a"] is None else p["a"]
    r = ratio_estimate(model, p["n"], a, p["d"], p["samples"], cfg.seed, cfg.workers,
                       common_random_numbers=p["crn"], method=p["method"])
    out = {"n": p["n"], "a": a, "d": p["d"], **r.asdict()}
    row = {k: v for k, v in out.items() if k not in ("numerator", "denominator")}
    row["numerator_p_hat"] = r.numerator.p_hat
    row["denominator_p_hat"] = r.denominator.p_hat
    return out, [row], True


def _cmd_samplesize(cfg, model):
    p = cfg.params
    plan = StudyPlan(p["p"], p["alpha"], p["u"], model, CutoffRule.parse(p["cutoff"]))
    if p["samples"] > 0:
        res = sample_size_search(plan, p["samples"], cfg.seed, p["n_max"], cfg.workers)
        out = res.asdict()
    else:
        out = {"k_asymptotic": sample_size_asymptotic(plan), "k_search": None,
               "threshold": plan.threshold, "search_trace": [], "advisories": []}
    out["z0"] = find_z0(model)
    rows = out["search_trace"] or [{k: v for k, v in out.items() if k != "search_trace"}]
    return out, rows, True


def _cmd_pfdr(cfg, model):
    p = cfg.params
    if p["alpha"] is None and p["r"] is None:
        raise UsageError("pfdr: give --alpha, --r, or both")
    out = {"p": p["p"]}
    if p["alpha"] is not None:
        out["alpha"] = p["alpha"]
        out["required_ratio"] = required_ratio(p["p"], p["alpha"])
    if p["r"] is not None:
        out["r"] = p["r"]
        out["pfdr_min"] = pfdr_min(p["p"], p["r"])
    return out, [out], True


def _cmd_simulate(cfg, model):
    p = cfg.params
    plan = StudyPlan(p["p"], p["alpha"], p["u"], model, CutoffRule.parse(p["cutoff"]))
    rep = simulate_multitest(plan, p["m"], p["n"], cfg.seed, p["a"], p["ratio_samples"], cfg.workers)
    out = rep.asdict()
    return out, [out], True


def _cmd_verify(cfg, model):
    p = cfg.params
    checks = [c.asdict() for c in run_suite(p["suite"], p["samples"], cfg.seed, model)]
    ok = all(c["passed"] for c in checks)
    rows = [{"name": c["name"], "passed": c["passed"]} for c in checks]
    return {"suite": p["suite"], "passed": ok, "checks": checks}, rows, ok


COMMANDS = {
    "z0": _cmd_z0,
    "tilt": _cmd_tilt,
    "tail": _cmd_tail,
    "ratio": _cmd_ratio,
    "samplesize": _cmd_samplesize,
    "pfdr": _cmd_pfdr,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
}


# --------------------------------------------------------------------------
# output


def _clean(value):
    """JSON-safe copy: non-finite floats become null, tuples become lists."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    try:
        f = float(value)
    except (TypeError, ValueError):
        return str(value)
    return f if math.isfinite(f) else None


def _flatten(row: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in row.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            flat[key] = ";".join("" if x is None else str(x) for x in v)
        else:
            flat[key] = v
    return flat


def _to_csv(rows: list[dict]) -> str:
    flat = [_flatten(_clean(r)) for r in rows]
    header = sorted({k for r in flat for k in r})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for r in flat:
        writer.writerow({k: "" if r.get(k) is None else r.get(k) for k in header})
    return buf.getvalue()


def _to_json(payload: dict) -> str:
    return json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def run(argv) -> tuple[int, str]:
    """Execute one invocation; returns (exit code, text for stdout).

    Usage errors come back as exit code 2 with the usage text.
    """
    try:
        cfg = RunConfig.parse(argv)
    except UsageError as exc:
        return 2, str(exc) + "\n"
    base = {"command": cfg.command, "density": cfg.density_spec, "seed": cfg.seed}
    try:
        model = parse_density(cfg.density_spec)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AdvisoryWarning)
            payload, rows, ok = COMMANDS[cfg.command](cfg, model)
    except UsageError as exc:
        return 2, str(exc) + "\n"
    except (ValueError, ArithmeticError, RuntimeError, KeyError) as exc:
        err = {**base, "error": {"type": type(exc).__name__, "message": str(exc)}}
        if cfg.output_format == "csv":
            return 1, _to_csv([err])
        return 1, _to_json(err)
    code = 0 if ok else 1
    if cfg.output_format == "csv":
        return code, _to_csv([{**base, **r} for r in rows])
    return code, _to_json({**base, **payload})


def main(argv=None) -> int:
    code, text = run(sys.argv[1:] if argv is None else argv)
    (sys.stdout if code != 2 else sys.stderr).write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
