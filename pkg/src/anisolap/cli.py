"""Batch front end.

    anisolap <command> [--config run.yaml] [--seed N] [--out report.json] [--format json|csv|both]

Commands: validate, theory, solve, cascade, multistart, example, sweep.
Without --config an instance can be given inline with --family/--T/--lam.
Exit status: 0 success, 1 invalid input, 2 solver did not converge.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import platform
import sys
from pathlib import Path

import mpmath
import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, InstanceSpec, RunConfig, load_config, parse_config
from .gallery import PrecisionExhausted, UnknownFamily, make_instance, minimal_nu, quotient_tables
from .problem import StateVector, validate
from .solver import (
    DeflationSingular,
    NoConvergence,
    cascade,
    multistart,
    newton_solve,
    num,
    probe_negativity,
)
from .theory import (
    EstimateUnavailable,
    cit_constant,
    embedding_bound_cit,
    embedding_bound_jz,
    estimate_A0,
    estimate_B0,
    interval_const_p,
    interval_even_T,
    interval_thm_main,
    kappa,
    theta_min,
)

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_INVALID, EXIT_NO_CONVERGENCE = 0, 1, 2


class _Outcome:
    """What a pipeline hands back: a result mapping, CSV tables and an exit code."""

    def __init__(self, result: dict, tables: dict | None = None, code: int = EXIT_OK, errors=None):
        self.result = result
        self.tables = tables or {}
        self.code = code
        self.errors = errors or []


def _f(x):
    """Float for JSON; infinities as strings so the output stays strict JSON."""
    if isinstance(x, mpmath.mpf):
        x = num(x)
        if isinstance(x, str):
            return x
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, str)) or obj is None:
        return obj
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating, mpmath.mpf)):
        return _f(obj)
    return str(obj)


def _log2(x) -> float:
    x = abs(mpmath.mpf(x))
    return float(mpmath.log(x, 2)) if x > 0 else -math.inf


# pipelines ---------------------------------------------------------------------------


def run_validate(cfg: RunConfig, instance) -> _Outcome:
    rep = validate(instance)
    return _Outcome(
        {"valid": rep.valid, "violations": rep.violations, "notes": rep.notes},
        code=EXIT_OK if rep.valid else EXIT_INVALID,
        errors=list(rep.violations),
    )


def _example_probes(instance, cfg: RunConfig):
    ex = instance.meta.get("example")
    if ex is None:
        pts = cfg.theory.probe_points()
        return pts, pts
    lo, hi = cfg.example.m_range or (ex.nu, ex.nu + 3)
    ms = range(lo, hi + 1)
    return ex.a0_probes(ms), ex.b0_probes(ms)


def run_theory(cfg: RunConfig, instance) -> _Outcome:
    T, ex = instance.T, instance.exponents
    pm, pp = ex.p_minus, ex.p_plus
    a_pts, b_pts = _example_probes(instance, cfg)
    A0 = estimate_A0(instance, a_pts, cfg.theory.tail)
    B0 = estimate_B0(instance, b_pts, cfg.theory.tail)
    result = {
        "kappa": kappa(ex, T),
        "p_minus": pm,
        "p_plus": pp,
        "embedding_bounds": {
            "jz": {"p_minus": embedding_bound_jz(T, pm), "p_plus": embedding_bound_jz(T, pp)},
            "cit": (
                {"p_minus": embedding_bound_cit(T, pm), "p_plus": embedding_bound_cit(T, pp), "c1": cit_constant(T, pm)}
                if T % 2 == 0
                else None
            ),
        },
        "theta_min": theta_min(T, pm),
        "A0": A0.as_dict(),
        "B0": B0.as_dict(),
    }
    errors = []
    try:
        iv = interval_thm_main(A0, B0, ex, T)
        result["interval_thm_main"] = iv.as_dict()
        result["diagnosis"] = _diagnose(iv)
    except EstimateUnavailable as exc:
        errors.append(str(exc))
        result["interval_thm_main"] = None
    if ex.is_constant:
        p = ex.values[0]
        try:
            result["interval_const_p"] = interval_const_p(A0, B0, p, T).as_dict()
            if T % 2 == 0:
                result["interval_even_T"] = interval_even_T(A0, B0, p, T).as_dict()
        except EstimateUnavailable as exc:
            errors.append(str(exc))
    tables = {
        "quotients": (
            ["kind", "t_log2", "q_log2"],
            [["A0", _log2(t), q] for t, q in zip(A0.ts, A0.log2_quotients)]
            + [["B0", _log2(t), q] for t, q in zip(B0.ts, B0.log2_quotients)],
        )
    }
    return _Outcome(result, tables, EXIT_OK if not errors else EXIT_INVALID, errors)


def _diagnose(iv) -> str:
    if iv.nonempty:
        return "nonempty"
    if iv.notes.get("h0") is False:
        return "empty: (h0) fails, A0 is not below kappa * B0"
    return "empty: lower endpoint not below upper endpoint"


def run_solve(cfg: RunConfig, instance) -> _Outcome:
    sc = cfg.solver.solver_config()
    u0 = StateVector.zeros(instance.T)
    try:
        rec = newton_solve(instance, u0, sc.tol, sc.max_iter, sc.rel_tol, (), sc)
    except (NoConvergence, DeflationSingular) as exc:
        return _Outcome({"converged": False}, code=EXIT_NO_CONVERGENCE, errors=[f"{type(exc).__name__}: {exc}"])
    return _Outcome({"converged": True, "solution": rec.as_dict()}, _solution_table([rec]))


def _solution_table(records) -> dict:
    rows = []
    for i, r in enumerate(records):
        d = r.as_dict()
        rows.append([i, d["level"], d["log2_sup_norm"], d["phi"], d["j_lambda"], d["residual_norm"], d["scaled_residual"]])
    return {"solutions": (["index", "level", "log2_sup_norm", "phi", "j_lambda", "residual", "scaled_residual"], rows)}


def run_multistart(cfg: RunConfig, instance) -> _Outcome:
    sc = cfg.solver.solver_config()
    res = multistart(instance, cfg.solver.n_starts, cfg.solver.radius, sc.tol, cfg.seed, sc.max_iter, sc)
    result = {
        "n_solutions": len(res.records),
        "dropped_starts": res.dropped,
        "seed": res.seed,
        "solutions": [r.as_dict() for r in res.records],
    }
    code = EXIT_OK if res.records else EXIT_NO_CONVERGENCE
    return _Outcome(result, _solution_table(res.records), code)


def run_cascade(cfg: RunConfig, instance) -> _Outcome:
    cs = cfg.cascade
    radii = cs.radii(instance)
    rep = cascade(instance, radii, tol=cs.tol, rel_tol=cs.rel_tol, config=cfg.solver.solver_config())
    result = rep.as_dict()
    # discovery order is by level; the table follows it so sup-norm vs index plots directly
    by_level = sorted(rep.solutions, key=lambda s: s.level)
    tables = _solution_table(by_level)
    tables["levels"] = (
        ["level", "log2_c", "status", "log2_probe_b"],
        [[lv["level"], lv["log2_c"], lv["status"], lv["probe"]["log2_b"] if lv["probe"] else None] for lv in result["levels"]],
    )
    code = EXIT_OK if rep.converged else EXIT_NO_CONVERGENCE
    return _Outcome(result, tables, code)


def run_example(cfg: RunConfig, instance) -> _Outcome:
    if "example" not in instance.meta:
        instance = make_instance("example_esempio", instance.T, lam=instance.lam)
    ex = instance.meta["example"]
    lo, hi = cfg.example.m_range or (ex.nu, ex.nu + 3)
    try:
        qt = quotient_tables(ex, range(lo, hi + 1))
    except PrecisionExhausted as exc:
        return _Outcome({}, code=EXIT_INVALID, errors=[str(exc)])
    d = qt.as_dict()
    # probe certificate at the smallest plateau reached by the window
    with mpmath.workprec(256):
        b = ex.s(hi + 1) * 2
        pr = probe_negativity(instance, b) if b < 1 else None
    d["nu"] = ex.nu
    d["minimal_nu"] = minimal_nu(max(hi, 8))
    d["gamma"] = str(ex.gamma)
    d["probe"] = None if pr is None else {"log2_b": _log2(pr.b), "negative": pr.negative, "bound_holds": pr.bound_holds}
    ok = d["upper_decreasing"] and d["lower_increasing"] and all(d["upper_bound_holds"]) and all(d["lower_bound_holds"])
    tables = {"quotients": (["m", "upper_log2", "lower_log2"], [list(r) for r in zip(d["ms"], d["upper_log2"], d["lower_log2"])])}
    return _Outcome(d, tables, EXIT_OK if ok else EXIT_INVALID, [] if ok else ["quotient monotonicity or bounds failed"])


def sweep_grid(lower: float, upper: float, n: int, clamp: float, fallback) -> tuple:
    """n log-spaced lambdas inside ]lower, upper[, kept a relative ``clamp`` away from both ends."""
    used_fallback = False
    lo, hi = lower, upper
    if not (lo > 0 and math.isfinite(lo)):
        lo, used_fallback = fallback[0], True
    else:
        lo = lo * (1 + clamp)
    if not math.isfinite(hi):
        hi, used_fallback = fallback[1], True
    else:
        hi = hi * (1 - clamp)
    if not lo < hi:
        return [], used_fallback
    return [float(x) for x in np.geomspace(lo, hi, n)], used_fallback


def run_sweep(cfg: RunConfig, instance) -> _Outcome:
    T, ex = instance.T, instance.exponents
    a_pts, b_pts = _example_probes(instance, cfg)
    A0 = estimate_A0(instance, a_pts, cfg.theory.tail)
    B0 = estimate_B0(instance, b_pts, cfg.theory.tail)
    iv = interval_thm_main(A0, B0, ex, T)
    sw = cfg.sweep
    lams, fb = sweep_grid(iv.lower, iv.upper, sw.n_points, sw.clamp, sw.fallback)
    rows, points = [], []
    any_found = False
    for lam in lams:
        inst = instance.with_lambda(lam)
        if "example" in instance.meta:
            rep = cascade(inst, cfg.cascade.radii(inst), tol=cfg.cascade.tol, rel_tol=cfg.cascade.rel_tol)
            n, method = len(rep.solutions), "cascade"
            sup = [_log2(s.sup_norm) for s in sorted(rep.solutions, key=lambda s: s.level)]
        else:
            sc = cfg.solver.solver_config()
            res = multistart(inst, cfg.solver.n_starts, cfg.solver.radius, sc.tol, cfg.seed, sc.max_iter, sc)
            nonzero = [r for r in res.records if r.sup_norm > 0]
            n, method = len(nonzero), "multistart"
            sup = [_log2(r.sup_norm) for r in nonzero]
        any_found |= n > 0
        points.append({"lambda": lam, "n_solutions": n, "method": method, "log2_sup_norms": sup})
        rows.append([lam, n, method])
    result = {"interval": iv.as_dict(), "used_fallback_range": fb, "points": points}
    code = EXIT_OK if lams and any_found else EXIT_NO_CONVERGENCE
    return _Outcome(result, {"sweep": (["lambda", "n_solutions", "method"], rows)}, code)


PIPELINES = {
    "validate": run_validate,
    "theory": run_theory,
    "solve": run_solve,
    "cascade": run_cascade,
    "multistart": run_multistart,
    "example": run_example,
    "sweep": run_sweep,
}


# report assembly ------------------------------------------------------------------------


def build_report(command: str, cfg: RunConfig) -> tuple:
    """(report dict, tables, exit code). The payload is deterministic; timing lives in metadata."""
    started = _dt.datetime.now(_dt.timezone.utc)
    errors: list = []
    try:
        instance = cfg.instance.build()
    except (UnknownFamily, ConfigError, TypeError, ValueError) as exc:
        out = _Outcome({}, code=EXIT_INVALID, errors=[f"instance: {exc}"])
    else:
        rep = validate(instance)
        if not rep.valid and command != "validate":
            out = _Outcome({"valid": False, "violations": rep.violations}, code=EXIT_INVALID, errors=rep.violations)
        else:
            np.random.seed(cfg.seed)
            out = PIPELINES[command](cfg, instance)
    errors.extend(out.errors)
    payload = {
        "command": command,
        "config": cfg.as_dict() | {"command": command},
        "instance": cfg.instance.as_dict(),
        "status": {EXIT_OK: "ok", EXIT_INVALID: "invalid", EXIT_NO_CONVERGENCE: "no_convergence"}[out.code],
        "exit_code": out.code,
        "errors": errors,
        "result": out.result,
    }
    metadata = {
        "timestamp": started.isoformat(),
        "elapsed_s": (_dt.datetime.now(_dt.timezone.utc) - started).total_seconds(),
        "version": __version__,
        "python": platform.python_version(),
        "config_source": cfg.source,
    }
    return {"schema_version": SCHEMA_VERSION, "payload": _clean(payload), "metadata": metadata}, out.tables, out.code


def payload_bytes(report: dict) -> bytes:
    return json.dumps(report["payload"], sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_clean(v) for v in row])
    path.write_text(buf.getvalue())


def emit(report: dict, tables: dict, out: str | None, fmt: str) -> list:
    """Write the report and tables; returns the paths written (stdout gets the JSON when out is None)."""
    text = json.dumps(report, sort_keys=True, indent=2, allow_nan=False)
    written = []
    if out is None:
        if fmt in ("json", "both"):
            sys.stdout.write(text + "\n")
        if fmt in ("csv", "both"):
            for name, (header, rows) in tables.items():
                sys.stdout.write(f"# {name}\n")
                w = csv.writer(sys.stdout, lineterminator="\n")
                w.writerow(header)
                w.writerows([[_clean(v) for v in r] for r in rows])
        return written
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt in ("json", "both"):
        path.write_text(text + "\n")
        written.append(path)
    if fmt in ("csv", "both"):
        for name, (header, rows) in tables.items():
            p = path.with_name(f"{path.stem}_{name}.csv")
            _write_csv(p, header, rows)
            written.append(p)
    return written


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anisolap", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="YAML run configuration (schema in anisolap.config)")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None, help="report path; CSV tables go next to it")
    ap.add_argument("--format", choices=("json", "csv", "both"), default=None)
    ap.add_argument("--family", help="inline instance, e.g. 'example_esempio(3)' (ignored with --config)")
    ap.add_argument("--T", type=int, default=2)
    ap.add_argument("--lam", type=float, default=1.0)
    return ap


def resolve_config(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    elif args.family:
        cfg = parse_config({"instance": {"family": args.family, "T": args.T, "lambda": args.lam}})
    else:
        raise ConfigError("give --config or --family")
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.format is not None:
        cfg.format = args.format
    return cfg


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        fallback = InstanceSpec(args.family or "?", args.T, args.lam)
        report = {
            "schema_version": SCHEMA_VERSION,
            "payload": {"command": args.command, "instance": fallback.as_dict(), "status": "invalid",
                        "exit_code": EXIT_INVALID, "errors": [f"config: {exc}"], "result": {}},
            "metadata": {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__},
        }
        emit(report, {}, args.out, args.format or "json")
        return EXIT_INVALID
    report, tables, code = build_report(args.command, cfg)
    emit(report, tables, cfg.out, cfg.format)
    return code


if __name__ == "__main__":
    sys.exit(main())
