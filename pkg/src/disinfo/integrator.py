"""Fixed-step classical RK4, forward for states and backward for adjoints."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BlowUpError, ScenarioError
from .model import StateVec, ControlVec, forcing_value, rhs

BLOWUP_LIMIT = 1e12


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    n_steps: int

    def __post_init__(self):
        if isinstance(self.n_steps, bool) or not isinstance(self.n_steps, (int, np.integer)):
            raise ScenarioError("must be an integer", "integration.n_steps")
        if self.n_steps < 1:
            raise ScenarioError("must be ≥ 1", "integration.n_steps")
        if not (np.isfinite(self.t0) and np.isfinite(self.T)):
            raise ScenarioError("must be finite", "integration.T")
        if not self.T > self.t0:
            raise ScenarioError("must be greater than t0", "integration.T")
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def h(self):
        return (self.T - self.t0) / self.n_steps

    @property
    def n_nodes(self):
        return self.n_steps + 1

    @property
    def times(self):
        t = self.t0 + self.h * np.arange(self.n_nodes)
        t[-1] = self.T
        return t


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States (and optionally controls) at every grid node.

    ``states`` has shape (n_nodes, 5), ``controls`` (n_nodes, 4) or None,
    ``forcing`` (n_nodes,).
    """

    grid: TimeGrid
    states: np.ndarray
    forcing: np.ndarray
    controls: Optional[np.ndarray] = None

    @property
    def times(self):
        return self.grid.times

    def state(self, k) -> StateVec:
        return StateVec(*self.states[k].tolist())

    @property
    def final(self) -> StateVec:
        return self.state(-1)


def _check(values, t):
    if not np.all(np.isfinite(values)):
        raise BlowUpError(t)


def rk4_step(f, y, t, h):
    """One classical Runge-Kutta step of ``y' = f(t, y)``.

    Raises BlowUpError if any stage derivative is non-finite.
    """
    k1 = np.asarray(f(t, y), dtype=float)
    _check(k1, t)
    k2 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k1), dtype=float)
    _check(k2, t + 0.5 * h)
    k3 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k2), dtype=float)
    _check(k3, t + 0.5 * h)
    k4 = np.asarray(f(t + h, y + h * k3), dtype=float)
    _check(k4, t + h)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _guard(y, t):
    if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP_LIMIT:
        raise BlowUpError(t)


def integrate(scenario, control_schedule=None) -> Trajectory:
    """Forward RK4 of the controlled model over ``scenario.grid``.

    ``control_schedule`` holds one control per node (shape (n_nodes, 4));
    half-step controls are the mean of the neighbouring nodes.
    """
    grid = scenario.grid
    params, profile = scenario.params, scenario.forcing
    opts = dict(transfer=scenario.transfer, convention=scenario.control.sign_convention)
    n, h, times = grid.n_steps, grid.h, grid.times

    controls = None
    if control_schedule is not None:
        controls = np.asarray(control_schedule, dtype=float)
        if controls.shape != (grid.n_nodes, 4):
            raise ValueError(
                f"control schedule must have shape ({grid.n_nodes}, 4), got {controls.shape}"
            )

    states = np.empty((n + 1, 5))
    states[0] = scenario.initial
    forcing = np.array([forcing_value(profile, t) for t in times])
    y = states[0].copy()
    _guard(y, times[0])

    zero = ControlVec()
    for k in range(n):
        t = times[k]
        if controls is None:
            def u_at(s):
                return zero
        else:
            c0, dc = controls[k], controls[k + 1] - controls[k]

            def u_at(s, _t=t, _c0=c0, _dc=dc):
                return ControlVec(*(_c0 + ((s - _t) / h) * _dc).tolist())

        def f(s, x, _u=u_at):
            try:
                return rhs(x.tolist(), params, forcing_value(profile, s), _u(s), **opts)
            except FloatingPointError:
                raise BlowUpError(s) from None

        y = rk4_step(f, y, t, h)
        _guard(y, times[k + 1])
        states[k + 1] = y

    return Trajectory(grid, states, forcing, controls)


def integrate_backward(f, terminal, grid: TimeGrid, frozen: Trajectory) -> np.ndarray:
    """RK4 from node n down to node 0 of ``lam' = f(t, lam, x, u, F)``.

    ``x``, ``u`` and ``F`` come from ``frozen``; at half steps they are the
    mean of the neighbouring nodes. ``u`` is None if ``frozen`` has no
    controls. Row k of the result is the solution at ``grid.times[k]``.
    """
    n, h, times = grid.n_steps, grid.h, grid.times
    if frozen.states.shape[0] != grid.n_nodes:
        raise ValueError("frozen trajectory is not on the given grid")
    X, Fv, U = frozen.states, frozen.forcing, frozen.controls

    lam = np.asarray(terminal, dtype=float).copy()
    _guard(lam, times[n])
    out = np.empty((n + 1,) + lam.shape)
    out[n] = lam

    for k in range(n, 0, -1):
        t1, t0 = times[k], times[k - 1]
        tm = 0.5 * (t1 + t0)
        x1, x0 = X[k], X[k - 1]
        xm = 0.5 * (x1 + x0)
        F1, F0 = Fv[k], Fv[k - 1]
        Fm = 0.5 * (F1 + F0)
        if U is None:
            u1 = um = u0 = None
        else:
            u1, u0 = U[k], U[k - 1]
            um = 0.5 * (u1 + u0)

        k1 = np.asarray(f(t1, lam, x1, u1, F1), dtype=float)
        _check(k1, t1)
        k2 = np.asarray(f(tm, lam - 0.5 * h * k1, xm, um, Fm), dtype=float)
        _check(k2, tm)
        k3 = np.asarray(f(tm, lam - 0.5 * h * k2, xm, um, Fm), dtype=float)
        _check(k3, tm)
        k4 = np.asarray(f(t0, lam - h * k3, x0, u0, F0), dtype=float)
        _check(k4, t0)
        lam = lam - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _guard(lam, t0)
        out[k - 1] = lam
    return out
