"""Command line front end: ``graphnls {spectrum,reduced,instability,compare,sweep}``."""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, expectation_range, load_config
from .errors import EscapeTimeout, GraphNLSError
from .experiments import fit_rows, instability, pde_escape, reduced_sweep, shadowing
from .reduced import ReducedState, ReducedSystem, escape_time, integrate_reduced
from .spectral import find_point_spectrum


def worker_count(jobs: int) -> int:
    cap = os.environ.get("GRAPHNLS_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, min(n, jobs))


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text)


def check_expectations(expect: dict[str, str], metrics: dict) -> tuple[bool, list[dict]]:
    results = []
    ok = True
    for key, rule in sorted(expect.items()):
        if key not in metrics:
            results.append({"name": key, "expected": rule, "actual": None, "passed": False,
                            "note": "metric not produced by this command"})
            ok = False
            continue
        val = metrics[key]
        if isinstance(val, bool):
            passed = val == (rule.strip().lower() in ("1", "true", "yes"))
        elif val is None or (isinstance(val, float) and math.isnan(val)):
            passed = False
        else:
            lo, hi = expectation_range(rule)
            passed = lo <= val <= hi
        results.append({"name": key, "expected": rule, "actual": val, "passed": bool(passed)})
        ok = ok and passed
    return ok, results


# -- commands -----------------------------------------------------------------

def cmd_spectrum(cfg: ExperimentConfig, out: Path) -> dict:
    spectrum = find_point_spectrum(cfg.p, cfg.N)
    _write(out, "spectrum.csv", spectrum.to_csv())
    lines = [f"point spectrum of L+ at the half-soliton, p = {cfg.p:g}, N = {cfg.N}"]
    for ev in spectrum.eigenvalues:
        lines.append(f"  lambda = {ev.lam:+.10f}  {ev.kind.value:<4}  multiplicity {ev.multiplicity}")
    negatives = sum(ev.multiplicity for ev in spectrum.eigenvalues if ev.lam < -1e-6)
    lines.append(f"negative eigenvalues (with multiplicity): {negatives}")
    _write(out, "summary.txt", "\n".join(lines) + "\n")
    zero = [ev.multiplicity for ev in spectrum.eigenvalues if abs(ev.lam) < 1e-6]
    return {
        "n_eigenvalues": len(spectrum.eigenvalues),
        "zero_multiplicity": zero[0] if zero else 0,
        "negative_count": negatives,
        "lowest_eigenvalue": min(ev.lam for ev in spectrum.eigenvalues),
    }


def cmd_reduced(cfg: ExperimentConfig, out: Path) -> dict:
    system = ReducedSystem.build(cfg.p, cfg.N)
    _write(out, "tensor.csv", system.tensor.to_csv())
    dim = cfg.N - 1
    if cfg.gamma0:
        gamma0 = np.asarray(cfg.gamma0, dtype=float)
    else:
        gamma0 = np.zeros(dim)
        gamma0[-1] = math.copysign(cfg.delta_scale * cfg.epsilon, system.tensor.entries[-1, -1, -1])
    beta0 = np.asarray(cfg.beta0, dtype=float) if cfg.beta0 else np.zeros(dim)
    traj = integrate_reduced(ReducedState(gamma0, beta0), system, cfg.reduced_dt, cfg.t_end, cfg.stride)
    _write(out, "reduced_trajectory.csv", traj.to_csv())
    metrics = {"diverged": traj.diverged, "h0_drift": traj.h0_drift(max_norm=0.2)}
    try:
        t0, drift = escape_time(system, cfg.epsilon, cfg.delta_scale, cfg.reduced_dt, return_h0_drift=True)
        metrics.update(escape_time=t0, t0_sqrt_eps=t0 * math.sqrt(cfg.epsilon), escape_h0_drift=drift)
    except EscapeTimeout:
        metrics.update(escape_time=math.nan, t0_sqrt_eps=math.nan)
    return metrics


def _instability_outputs(res, out: Path) -> dict:
    cfg = res.cfg
    _write(out, "observables.csv", res.trajectory.observables_csv())
    _write(out, "series.csv", res.series.to_csv())
    _write(out, "snapshot_initial.csv", res.trajectory.snapshot_csv(0))
    _write(out, "snapshot_final.csv", res.trajectory.snapshot_csv(-1))
    t0 = res.escape_time
    report = [f"p = {cfg.p:g}, N = {cfg.N}, epsilon = {cfg.epsilon:g}, delta = {res.delta:.6g}, mode = {cfg.mode}"]
    report.append(f"orbit distance crosses epsilon at t0 = {t0:.6g}" if t0 is not None
                  else f"no escape by t_end = {res.trajectory.times[-1]:g}")
    report.append(f"modulation frame lost at t = {res.series.exit_time:.6g}" if res.series.exit_time is not None
                  else "modulation frame held over the whole run")
    if res.failure:
        report.append(res.failure)
    _write(out, "report.txt", "\n".join(report) + "\n")
    return {
        "escaped": t0 is not None,
        "escape_time": t0 if t0 is not None else math.nan,
        "t0_sqrt_eps": t0 * math.sqrt(cfg.epsilon) if t0 is not None else math.nan,
        "exit_time": res.series.exit_time if res.series.exit_time is not None else math.nan,
        "max_distance": res.max_distance,
        "budget_mismatch": res.budget.mismatch if res.budget else math.nan,
        "max_remainder_ratio": res.budget.max_ratio if res.budget else math.nan,
        "step_failure": bool(res.failure),
    }


def cmd_instability(cfg: ExperimentConfig, out: Path) -> dict:
    return _instability_outputs(instability(cfg), out)


def cmd_compare(cfg: ExperimentConfig, out: Path) -> dict:
    res = instability(cfg)
    metrics = _instability_outputs(res, out)
    sh = shadowing(res, dt=cfg.reduced_dt)
    _write(out, "paired.csv", sh.to_csv())
    metrics.update(sup_c_gamma=sh.sup_c_gamma, sup_b_beta=sh.sup_b_beta,
                   sup_c_gamma_over_eps=sh.sup_c_gamma / cfg.epsilon, window_end=sh.window_end)
    return metrics


def cmd_sweep(cfg: ExperimentConfig, out: Path) -> dict:
    eps_list = sorted(cfg.eps_list)
    if len(eps_list) < 3:
        raise GraphNLSError(f"sweep needs at least 3 epsilon values, got {len(eps_list)}")
    red = reduced_sweep(cfg, eps_list)
    cfgs = [cfg.with_values(epsilon=e) for e in eps_list]
    workers = worker_count(len(cfgs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pde = list(pool.map(pde_escape, cfgs))
    else:
        pde = [pde_escape(c) for c in cfgs]
    lines = ["kind,epsilon,t0,censored"]
    for r in red + pde:
        lines.append(f"{r.kind},{r.epsilon:.15g},{r.t0:.15g},{int(r.censored)}")
    _write(out, "sweep.csv", "\n".join(lines) + "\n")
    slopes = {"reduced": fit_rows(red), "pde": fit_rows(pde)}
    fit = ["kind,slope,points"] + [f"{k},{v:.15g},{sum(not r.censored for r in rows)}"
                                   for (k, v), rows in zip(slopes.items(), (red, pde))]
    _write(out, "fit.csv", "\n".join(fit) + "\n")
    return {"reduced_slope": slopes["reduced"], "pde_slope": slopes["pde"],
            "censored": sum(r.censored for r in red + pde)}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "reduced": cmd_reduced,
    "instability": cmd_instability,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="graphnls", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="key = value config file")
        sp.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
        sp.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; repeatable")
    return ap


def _clean(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args.config, args.override)
    except (GraphNLSError, ValueError, OSError) as exc:
        print(f"graphnls {args.command}: invalid configuration: {exc}", file=sys.stderr)
        return 2
    out = args.out or Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        metrics = COMMANDS[args.command](cfg, out)
        error = ""
    except GraphNLSError as exc:
        metrics, error = {}, f"{type(exc).__name__}: {exc}"
        print(f"graphnls {args.command}: {error}", file=sys.stderr)
    ok, checks = check_expectations(cfg.expectations, metrics)
    manifest = {
        "command": args.command,
        "config": cfg.echo(),
        "versions": {"graphnls": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "elapsed_seconds": round(time.perf_counter() - start, 3),
        "metrics": {k: _clean(v) for k, v in metrics.items()},
        "assertions": [{k: _clean(v) for k, v in c.items()} for c in checks],
        "error": error,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: expected {c['expected']}, got {c['actual']}")
    if error or metrics.get("step_failure"):
        return 1
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
