"""Command-line entry point: simulate, sweep, tip, optimize, check-gradient.

Exit codes: 0 success, 1 gradient check above tolerance, 2 scenario or usage
error, 3 solver non-convergence, 4 non-monotonic tipping bracket,
5 numerical blow-up.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BlowUpError, NoConvergence, NonMonotonicBracket, ScenarioError
from .integrator import integrate
from .optimal_control import (
    directional_derivative_check,
    forward_backward_sweep,
    objective,
    smooth_random_schedule,
)
from .scenario import (
    default_scenario_text,
    export_controls_csv,
    export_csv,
    parse_scenario,
)
from .tipping import critical_rate, sweep_rate

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NOCONV, EXIT_BRACKET, EXIT_BLOWUP = 0, 1, 2, 3, 4, 5


def log(msg):
    print(msg, file=sys.stderr)


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return str(path)


def parse_alphas(spec, log_spaced=False):
    """``LO:HI:N`` -> N rates from LO to HI (log-spaced with ``log_spaced``)."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ValueError(f"--alphas must look like LO:HI:N, got {spec!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ValueError("--alphas: N must be ≥ 1")
    if n > 1 and not hi > lo:
        raise ValueError("--alphas: HI must exceed LO")
    if log_spaced:
        if lo <= 0:
            raise ValueError("--alphas: LO must be > 0 with --log")
        return np.logspace(np.log10(lo), np.log10(hi), n).tolist() if n > 1 else [lo]
    return np.linspace(lo, hi, n).tolist() if n > 1 else [lo]


def load(args):
    if args.scenario is None:
        text, name = default_scenario_text(), "<default>"
    else:
        with open(args.scenario, encoding="utf-8") as fh:
            text, name = fh.read(), args.scenario
    try:
        sc = parse_scenario(text)
    except ScenarioError as exc:
        raise ScenarioError(f"{name}: {exc}") from None
    return sc, text, name


def write_manifest(args, text, name, options, outputs, runtime, summary=None, path=None):
    manifest = {
        "subcommand": args.command,
        "version": __version__,
        "scenario": name,
        "scenario_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
        "options": options,
        "outputs": outputs,
        "runtime_s": round(runtime, 3),
        "summary": summary or {},
    }
    if path is None:
        path = Path(outputs[0]).with_suffix(".manifest.json") if outputs else Path(f"{args.command}.manifest.json")
    _write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def cmd_simulate(args):
    sc, text, name = load(args)
    if args.alpha is not None:
        sc = replace(sc, forcing=sc.forcing.with_alpha(args.alpha))
    t0 = time.perf_counter()
    traj = integrate(sc)
    out = _write(args.out, export_csv(traj))
    log(f"simulate: {traj.grid.n_nodes} nodes written to {out}")
    write_manifest(args, text, name, {"alpha": sc.forcing.alpha}, [out],
                   time.perf_counter() - t0, path=args.manifest)
    return EXIT_OK


def cmd_sweep(args):
    sc, text, name = load(args)
    if args.alphas is None:
        lo, hi = sc.tipping.alpha_lo, sc.tipping.alpha_hi
        alphas = parse_alphas(f"{lo}:{hi}:50", log_spaced=lo > 0)
    else:
        alphas = parse_alphas(args.alphas, args.log)
    t0 = time.perf_counter()
    entries = sweep_rate(sc, alphas, workers=args.workers)
    rows = ["alpha,outcome,distance,peak_C,peak_I,error"]
    fmt = lambda x: format(float(x) + 0.0, ".12g")  # noqa: E731
    failed = 0
    for e in entries:
        if e.verdict is None:
            failed += 1
            rows.append(f"{fmt(e.alpha)},Failed,nan,nan,nan,{e.error.replace(',', ';')}")
        else:
            rows.append(
                f"{fmt(e.alpha)},{e.verdict.outcome},{fmt(e.verdict.distance)},"
                f"{fmt(e.peak_C)},{fmt(e.peak_I)},"
            )
    out = _write(args.out, "\n".join(rows) + "\n")
    n_tip = sum(1 for e in entries if e.verdict is not None and e.verdict.tipped)
    log(f"sweep: {len(entries)} rates, {n_tip} tip, {failed} failed -> {out}")
    write_manifest(args, text, name, {"alphas": alphas, "workers": args.workers}, [out],
                   time.perf_counter() - t0, {"tip": n_tip, "failed": failed}, path=args.manifest)
    return EXIT_OK


def cmd_tip(args):
    sc, text, name = load(args)
    lo = sc.tipping.alpha_lo if args.alpha_lo is None else args.alpha_lo
    hi = sc.tipping.alpha_hi if args.alpha_hi is None else args.alpha_hi
    tol = sc.tipping.tol if args.tol is None else args.tol
    t0 = time.perf_counter()
    res = critical_rate(sc, lo, hi, tol)
    record = {
        "alpha_c": res.alpha_c,
        "bracket": list(res.bracket),
        "iterations": res.iterations,
        "tol": tol,
        "delta_tip": sc.tipping.delta_tip,
        "verdicts": [
            {"alpha": a, "outcome": v.outcome, "distance": v.distance}
            for a, v in zip(res.bracket, res.verdicts)
        ],
    }
    out = _write(args.out, json.dumps(record, indent=2, sort_keys=True) + "\n")
    log(f"tip: alpha_c = {res.alpha_c:.6g} after {res.iterations} bisections -> {out}")
    write_manifest(args, text, name, {"alpha_lo": lo, "alpha_hi": hi, "tol": tol}, [out],
                   time.perf_counter() - t0, {"alpha_c": res.alpha_c}, path=args.manifest)
    return EXIT_OK


def cmd_optimize(args):
    sc, text, name = load(args)
    ctl = sc.control
    sc = replace(sc, control=replace(
        ctl,
        omega=ctl.omega if args.omega is None else args.omega,
        tol=ctl.tol if args.tol is None else args.tol,
        max_iter=ctl.max_iter if args.max_iter is None else args.max_iter,
        sign_convention=ctl.sign_convention if args.convention is None else args.convention,
    ))
    t0 = time.perf_counter()
    res = forward_backward_sweep(sc)
    J0 = objective(integrate(sc), None, sc.weights)
    traj = res.state_traj
    outs = [
        _write(args.out_states, export_csv(traj, include_controls=True)),
        _write(args.out_controls, export_controls_csv(traj.times, res.controls)),
    ]
    summary = {
        "J": res.J,
        "J_uncontrolled": J0,
        "iterations": res.iterations,
        "stationarity_residual": res.stationarity_residual(sc),
    }
    log(f"optimize: converged in {res.iterations} sweeps, J = {res.J:.6g} (uncontrolled {J0:.6g})")
    opts = {"omega": sc.control.omega, "tol": sc.control.tol, "max_iter": sc.control.max_iter,
            "sign_convention": sc.control.sign_convention}
    write_manifest(args, text, name, opts, outs, time.perf_counter() - t0, summary, path=args.manifest)
    return EXIT_OK


def cmd_check_gradient(args):
    sc, text, name = load(args)
    rng = np.random.default_rng(args.seed)
    t = sc.grid.times
    t0 = time.perf_counter()
    rows = ["trial,adjoint,finite_difference,relative_error"]
    worst = 0.0
    for k in range(args.trials):
        u = smooth_random_schedule(rng, t, 0.2, 0.8)
        du = smooth_random_schedule(rng, t, -1.0, 1.0)
        adj, fd = directional_derivative_check(sc, u, du)
        rel = abs(adj - fd) / max(abs(fd), 1e-300)
        worst = max(worst, rel)
        rows.append(f"{k},{adj:.12g},{fd:.12g},{rel:.6g}")
    text_out = "\n".join(rows) + "\n"
    outputs = []
    if args.out:
        outputs.append(_write(args.out, text_out))
    else:
        sys.stdout.write(text_out)
    ok = worst < args.threshold
    log(f"check-gradient: worst relative disagreement {worst:.3g} "
        f"({'ok' if ok else 'above'} threshold {args.threshold:g})")
    write_manifest(args, text, name, {"trials": args.trials, "seed": args.seed,
                                      "threshold": args.threshold}, outputs,
                   time.perf_counter() - t0, {"worst_relative_error": worst}, path=args.manifest)
    return EXIT_OK if ok else EXIT_CHECK


def build_parser():
    ap = argparse.ArgumentParser(prog="disinfo", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def common(p):
        p.add_argument("--scenario", help="scenario TOML file (default: the shipped scenario)")
        p.add_argument("--manifest", help="run manifest path (default: beside the first output)")

    p = sub.add_parser("simulate", help="integrate the scenario and write a CSV")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, help="override the forcing rate")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="track/tip verdicts over a range of rates")
    common(p)
    p.add_argument("--alphas", help="LO:HI:N (default: the tipping bracket, 50 log-spaced)")
    p.add_argument("--log", action="store_true", help="log-space the rates")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tip", help="bisect for the critical rate, JSON record")
    common(p)
    p.add_argument("--alpha-lo", type=float)
    p.add_argument("--alpha-hi", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tip)

    p = sub.add_parser("optimize", help="forward-backward sweep for the optimal controls")
    common(p)
    p.add_argument("--out-states", required=True)
    p.add_argument("--out-controls", required=True)
    p.add_argument("--omega", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--convention", choices=["literal", "remedial"])
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("check-gradient", help="adjoint vs finite-difference directional derivatives")
    common(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--out", help="CSV of results (default: standard output)")
    p.set_defaults(func=cmd_check_gradient)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except NonMonotonicBracket as exc:
        log(f"error: {exc}")
        return EXIT_BRACKET
    except NoConvergence as exc:
        log(f"error: {exc}")
        if exc.history:
            log(f"objective history (last 5): {[round(v, 6) for v in exc.history[-5:]]}")
        return EXIT_NOCONV
    except BlowUpError as exc:
        log(f"error: {exc}")
        return EXIT_BLOWUP
    except (ScenarioError, ValueError, OSError) as exc:
        log(f"error: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
