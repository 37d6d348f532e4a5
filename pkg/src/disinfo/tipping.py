"""Quasi-static equilibria, track/tip classification and critical-rate
search for ramped forcing."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import BlowUpError, NoConvergence, NonMonotonicBracket
from .integrator import Trajectory, integrate, rk4_step
from .model import REGULARIZED, StateVec, rhs

TRACK, TIP = "Track", "Tip"


@dataclass(frozen=True)
class TipVerdict:
    outcome: str
    distance: float
    reference: Optional[StateVec] = None

    @property
    def tipped(self):
        return self.outcome == TIP


@dataclass(frozen=True)
class TippingResult:
    alpha_c: float
    bracket: Tuple[float, float]
    iterations: int
    verdicts: Tuple[TipVerdict, TipVerdict]


@dataclass(frozen=True)
class SweepEntry:
    alpha: float
    verdict: Optional[TipVerdict]
    peak_C: float
    peak_I: float
    error: Optional[str] = None


def _residual(x, params, F, transfer):
    return np.array(rhs(x.tolist(), params, F, transfer=transfer))


def _jacobian(x, params, F, transfer):
    J = np.empty((5, 5))
    for i in range(5):
        step = 1e-6 * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        J[:, i] = (_residual(xp, params, F, transfer) - _residual(xm, params, F, transfer)) / (2 * step)
    return J


def _newton(x, params, F, transfer, tol, max_iter):
    """Damped Newton; returns (x, residual_norm, converged)."""
    g = _residual(x, params, F, transfer)
    norm = np.max(np.abs(g))
    polish = 0
    for _ in range(max_iter):
        if norm < tol:
            # a few extra steps push the residual toward round-off
            polish += 1
            if polish > 3 or norm == 0.0:
                break
        try:
            dx = np.linalg.solve(_jacobian(x, params, F, transfer), -g)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        for _ in range(21):
            x_new = x + step * dx
            g_new = _residual(x_new, params, F, transfer)
            n_new = np.max(np.abs(g_new))
            if np.isfinite(n_new) and n_new < norm:
                break
            step *= 0.5
        else:
            break
        x, g, norm = x_new, g_new, n_new
    return x, norm, norm < tol


def find_equilibrium(params, F_frozen, guess, *, transfer=REGULARIZED, tol=1e-10,
                     max_iter=100, fallback_time=1000.0, fallback_h=0.01) -> StateVec:
    """Zero of the uncontrolled right-hand side with forcing frozen at
    ``F_frozen``.

    If Newton stalls from ``guess``, the system is integrated forward for
    ``fallback_time`` and Newton restarts from the endpoint.
    """
    x0 = np.asarray(guess, dtype=float)
    x, norm, ok = _newton(x0.copy(), params, F_frozen, transfer, tol, max_iter)
    if ok:
        return StateVec(*x.tolist())

    def f(t, y):
        return rhs(y.tolist(), params, F_frozen, transfer=transfer)

    y, h = x0.copy(), fallback_h
    try:
        for k in range(int(math.ceil(fallback_time / h))):
            y = rk4_step(f, y, k * h, h)
    except BlowUpError as exc:
        raise NoConvergence(f"equilibrium search diverged during fallback: {exc}") from None
    x, norm, ok = _newton(y, params, F_frozen, transfer, tol, max_iter)
    if not ok:
        raise NoConvergence(
            f"no equilibrium found at F={F_frozen:.6g} (residual {norm:.3g})"
        )
    return StateVec(*x.tolist())


def continue_equilibrium(params, F_from, F_to, start, *, transfer=REGULARIZED,
                         steps=20, **kw) -> StateVec:
    """Follow the equilibrium branch through ``steps`` forcing increments."""
    x = find_equilibrium(params, F_from, start, transfer=transfer, **kw)
    for F in np.linspace(F_from, F_to, steps + 1)[1:]:
        x = find_equilibrium(params, float(F), x, transfer=transfer, **kw)
    return x


def classify_endstate(traj: Trajectory, reference, delta_tip) -> TipVerdict:
    if not delta_tip > 0:
        raise ValueError("delta_tip must be > 0")
    ref = StateVec(*(float(v) for v in reference))
    d = float(np.linalg.norm(traj.states[-1] - np.asarray(ref)))
    return TipVerdict(TIP if d > delta_tip else TRACK, d, ref)


@dataclass(frozen=True)
class RampSetup:
    """Equilibria at the start and end forcing levels of a scenario."""

    start: StateVec
    end: StateVec

    @classmethod
    def from_scenario(cls, scenario):
        p, prof = scenario.params, scenario.forcing
        kw = dict(transfer=scenario.transfer, fallback_time=10.0 * (scenario.grid.T - scenario.grid.t0))
        start = find_equilibrium(p, prof.start_level, scenario.initial, **kw)
        end = continue_equilibrium(p, prof.start_level, prof.end_level, start, **kw)
        return cls(start, end)


def run_ramp(scenario, alpha, setup: RampSetup):
    sc = replace(scenario, forcing=scenario.forcing.with_alpha(alpha), initial=setup.start)
    traj = integrate(sc)
    return traj, classify_endstate(traj, setup.end, scenario.tipping.delta_tip)


def _sweep_entry(args):
    scenario, alpha, setup = args
    try:
        traj, verdict = run_ramp(scenario, alpha, setup)
    except (BlowUpError, NoConvergence) as exc:
        return SweepEntry(alpha, None, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
    return SweepEntry(
        alpha, verdict, float(traj.states[:, 2].max()), float(traj.states[:, 3].max())
    )


def _check_alphas(alphas):
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("alphas must be non-empty")
    if any(a < 0 or not math.isfinite(a) for a in alphas):
        raise ValueError("alphas must be finite and ≥ 0")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly increasing")
    return alphas


def sweep_rate(scenario, alphas, workers=None) -> List[SweepEntry]:
    """Integrate one ramp per rate and classify each end state.

    Every ramp starts at the start-level equilibrium and is compared to the
    end-level equilibrium. Failed entries carry ``error`` instead of a
    verdict. ``workers`` > 1 evaluates entries in a process pool; the
    result order always follows ``alphas``.
    """
    alphas = _check_alphas(alphas)
    setup = RampSetup.from_scenario(scenario)
    jobs = [(scenario, a, setup) for a in alphas]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_entry, jobs))
    return [_sweep_entry(j) for j in jobs]


def _as_verdict(v):
    if isinstance(v, TipVerdict):
        return v
    return TipVerdict(TIP if v else TRACK, math.nan, None)


def critical_rate(scenario, alpha_lo, alpha_hi, tol, verdict: Optional[Callable] = None) -> TippingResult:
    """Bisect on the track/tip verdict between two rates.

    ``verdict`` maps a rate to a TipVerdict or a bool (True = tip); by
    default it integrates the scenario's ramp at that rate.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    if not alpha_lo < alpha_hi:
        raise ValueError("alpha_lo must be below alpha_hi")
    if verdict is None:
        setup = RampSetup.from_scenario(scenario)

        def verdict(a):
            return run_ramp(scenario, a, setup)[1]

    lo, hi = float(alpha_lo), float(alpha_hi)
    v_lo, v_hi = _as_verdict(verdict(lo)), _as_verdict(verdict(hi))
    if v_lo.tipped or not v_hi.tipped:
        raise NonMonotonicBracket(
            f"endpoint verdicts {v_lo.outcome} at {lo:.6g} and {v_hi.outcome} at {hi:.6g} "
            "do not straddle a Track -> Tip switch"
        )
    it = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v = _as_verdict(verdict(mid))
        if v.tipped:
            hi, v_hi = mid, v
        else:
            lo, v_lo = mid, v
        it += 1
    return TippingResult(0.5 * (lo + hi), (lo, hi), it, (v_lo, v_hi))
