"""Objective, Hamiltonian, costate system and the forward-backward sweep.

The running cost is ``w_E E + w_C C + w_I I - w_Z Z + w_u |u|^2``; with
unit weights the optimal controls are the clamped stationary points

    u1 = C l3 / 2
    u2 = I (l4 - l2) / 2
    u3 = C I (l4 - l3) / 2
    u4 = b S Z (l5 - l2) / 2

each projected onto [0, 1] (u3/u4 signs flip under the remedial
convention).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import List

import numpy as np

from .errors import NoConvergence, ScenarioError
from .integrator import Trajectory, integrate, integrate_backward
from .model import (
    REGULARIZED,
    AdjointVec,
    ControlVec,
    coupling_signs,
    forcing_value,
    rhs,
)


@dataclass(frozen=True)
class CostWeights:
    w_E: float = 1.0
    w_C: float = 1.0
    w_I: float = 1.0
    w_Z: float = 1.0
    w_u: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ScenarioError("must be a number", f"weights.{f.name}")
            if not math.isfinite(v) or v < 0:
                raise ScenarioError("must be finite and ≥ 0", f"weights.{f.name}")
            object.__setattr__(self, f.name, float(v))


UNIT_WEIGHTS = CostWeights()


def running_cost(state, u, w: CostWeights = UNIT_WEIGHTS) -> float:
    S, E, C, I, Z = state
    u1, u2, u3, u4 = u
    return (
        w.w_C * C + w.w_I * I + w.w_E * E - w.w_Z * Z
        + w.w_u * (u1 * u1 + u2 * u2 + u3 * u3 + u4 * u4)
    )


def hamiltonian(state, u, lam, params, F, w: CostWeights = UNIT_WEIGHTS, *,
                transfer=REGULARIZED, convention="literal") -> float:
    dx = rhs(state, params, F, u, transfer=transfer, convention=convention)
    return running_cost(state, u, w) + sum(l * d for l, d in zip(lam, dx))


def adjoint_rhs(state, u, lam, params, F, w: CostWeights = UNIT_WEIGHTS, *,
                transfer=REGULARIZED, convention="literal") -> AdjointVec:
    """Costate derivative ``-dH/dx`` for x = (S, E, C, I, Z)."""
    S, E, C, I, Z = state
    u1, u2, u3, u4 = u
    l1, l2, l3, l4, l5 = lam
    s3, s4 = coupling_signs(convention)
    p = params
    D = 1.0 + p.phi * Z if transfer.kind == "regularized" else p.phi * Z + transfer.kappa
    dT_dE = p.epsilon / D
    dT_dZ = -p.epsilon * E * p.phi / (D * D)
    gC, gS = p.gamma * C, p.gamma * S
    bI, bS, bZ = p.beta * I, p.beta * S, p.b * Z
    u4b = s4 * u4 * p.b
    u3s = s3 * u3

    dS = (
        l1 * (-gC - bI - bZ)
        + l2 * ((1 - p.p) * bI + (1 - p.l) * bZ + u4b * Z)
        + l3 * (1 - p.eta) * gC
        + l4 * (p.eta * gC + p.p * bI)
        - l5 * u4b * Z
    )
    dE = w.w_E + (l4 - l2) * dT_dE
    dC = (
        w.w_C
        - l1 * gS
        + l3 * (F * I - p.mu + (1 - p.eta) * gS - u1 + u3s * I)
        + l4 * (-F * I + p.eta * gS - u3s * I)
    )
    dI = (
        w.w_I
        - l1 * bS
        + l2 * ((1 - p.p) * bS + u2)
        + l3 * (F * C + u3s * C)
        + l4 * (-F * C + p.p * bS - u2 - u3s * C)
        + l5 * p.b * Z
    )
    dZ = (
        -w.w_Z
        - l1 * p.b * S
        + l2 * (-dT_dZ + (1 - p.l) * p.b * S + u4b * S)
        + l4 * dT_dZ
        + l5 * (p.b * I - p.xi - u4b * S)
    )
    return AdjointVec(-dS, -dE, -dC, -dI, -dZ)


def switching(states, lam, b, convention="literal"):
    """State-adjoint part of dH/du at every node, shape (n, 4).

    ``states`` is (n, 5) and ``lam`` (n, 5); dH/du_i = 2 w_u u_i + result_i.
    """
    states = np.atleast_2d(states)
    lam = np.atleast_2d(lam)
    S, E, C, I, Z = states.T
    l1, l2, l3, l4, l5 = lam.T
    s3, s4 = coupling_signs(convention)
    return np.stack(
        [
            -l3 * C,
            I * (l2 - l4),
            s3 * C * I * (l3 - l4),
            s4 * b * S * Z * (l2 - l5),
        ],
        axis=-1,
    )


def optimal_control_update(state, lam, params, convention="literal", w_u=1.0):
    """Projected stationary control for one node, as a ControlVec."""
    sw = switching(np.asarray(state, float), np.asarray(lam, float), params.b, convention)[0]
    return ControlVec(*np.clip(-sw / (2.0 * w_u), 0.0, 1.0).tolist())


def _update_all(states, lam, params, convention, w_u):
    return np.clip(-switching(states, lam, params.b, convention) / (2.0 * w_u), 0.0, 1.0)


def quadrature_weights(n_nodes, h):
    """Composite Simpson weights; trapezoid on the last interval when the
    number of intervals is odd."""
    n = n_nodes - 1
    if n < 1:
        raise ValueError("need at least two nodes")
    wq = np.zeros(n_nodes)
    m = n if n % 2 == 0 else n - 1
    if m:
        wq[0:m + 1:2] = 2.0
        wq[1:m:2] = 4.0
        wq[0] = wq[m] = 1.0
        wq[: m + 1] *= h / 3.0
    if m != n:
        wq[n - 1] += 0.5 * h
        wq[n] += 0.5 * h
    return wq


def cost_series(traj: Trajectory, controls, w: CostWeights = UNIT_WEIGHTS):
    X = traj.states
    U = np.zeros((X.shape[0], 4)) if controls is None else np.asarray(controls, float)
    if U.shape != (X.shape[0], 4):
        raise ValueError(f"controls must have shape ({X.shape[0]}, 4), got {U.shape}")
    S, E, C, I, Z = X.T
    return w.w_C * C + w.w_I * I + w.w_E * E - w.w_Z * Z + w.w_u * np.sum(U * U, axis=1)


def objective(traj: Trajectory, controls, w: CostWeights = UNIT_WEIGHTS) -> float:
    values = cost_series(traj, controls, w)
    return float(quadrature_weights(len(values), traj.grid.h) @ values)


@dataclass
class FbsmResult:
    controls: np.ndarray
    adjoints: np.ndarray
    state_traj: Trajectory
    J_history: List[float]
    converged: bool
    iterations: int

    @property
    def J(self):
        return self.J_history[-1]

    def stationarity_residual(self, scenario):
        target = _update_all(
            self.state_traj.states, self.adjoints, scenario.params,
            scenario.control.sign_convention, scenario.weights.w_u,
        )
        return float(np.max(np.abs(self.controls - target)))


def solve_adjoint(scenario, traj: Trajectory) -> np.ndarray:
    """Costates at every node for the given controlled trajectory, with
    zero terminal condition."""
    params, w = scenario.params, scenario.weights
    opts = dict(transfer=scenario.transfer, convention=scenario.control.sign_convention)
    zero = ControlVec()

    def f(t, lam, x, u, F):
        return adjoint_rhs(
            x.tolist(), zero if u is None else u.tolist(), lam.tolist(), params, F, w, **opts
        )

    return integrate_backward(f, np.zeros(5), traj.grid, traj)


def forward_backward_sweep(scenario, omega=None, tol=None, max_iter=None) -> FbsmResult:
    """Relaxed fixed-point iteration on the controls.

    Converged when the projected update differs from the current controls
    by less than ``tol`` at every node; the returned controls, states and
    costates are mutually consistent. Raises NoConvergence (with ``.result``
    holding the last iterate) after ``max_iter`` sweeps.
    """
    opts = scenario.control
    omega = opts.omega if omega is None else omega
    tol = opts.tol if tol is None else tol
    max_iter = opts.max_iter if max_iter is None else max_iter
    if not 0.0 < omega <= 1.0:
        raise ValueError("omega must lie in (0, 1]")
    if not tol > 0:
        raise ValueError("tol must be > 0")
    w = scenario.weights
    if w.w_u <= 0:
        raise ScenarioError("must be > 0 for the control update", "weights.w_u")

    u = np.zeros((scenario.grid.n_nodes, 4))
    history = []
    for it in range(1, max_iter + 1):
        traj = integrate(scenario, u)
        history.append(objective(traj, u, w))
        lam = solve_adjoint(scenario, traj)
        u_new = _update_all(traj.states, lam, scenario.params, opts.sign_convention, w.w_u)
        change = float(np.max(np.abs(u_new - u)))
        if change < tol:
            return FbsmResult(u, lam, traj, history, True, it)
        u = (1.0 - omega) * u + omega * u_new

    err = NoConvergence(
        f"forward-backward sweep did not converge in {max_iter} iterations "
        f"(last control change {change:.3g})",
        history,
    )
    err.result = FbsmResult(u, lam, traj, history, False, max_iter)
    raise err


def discrete_gradient(scenario, u) -> np.ndarray:
    """Exact gradient of the discrete objective with respect to the node
    controls, shape (n_nodes, 4).

    Reverse pass through every RK4 step and the Simpson sum. Transposed
    Jacobian products come from ``adjoint_rhs`` (zero weights gives
    ``-J^T v``) and ``switching`` (``B^T v``), so the result checks those
    formulas without the O(h^2) gap between continuous and discrete adjoints.
    """
    grid, params, profile = scenario.grid, scenario.params, scenario.forcing
    conv = scenario.control.sign_convention
    opts = dict(transfer=scenario.transfer, convention=conv)
    w = scenario.weights
    u = np.asarray(u, float)
    n, h, times = grid.n_steps, grid.h, grid.times
    X = integrate(scenario, u).states
    wq = quadrature_weights(grid.n_nodes, h)
    none = CostWeights(0, 0, 0, 0, 0)
    zero = [0.0] * 5

    def cost_grad(k):
        return -np.array(adjoint_rhs(X[k].tolist(), u[k].tolist(), zero, params, 0.0, w, **opts))

    def jac_t(x, uu, F, v):
        return -np.array(adjoint_rhs(x.tolist(), uu.tolist(), v.tolist(), params, F, none, **opts))

    def ctl_t(x, v):
        return switching(x, v, params.b, conv)[0]

    grad = 2.0 * w.w_u * u * wq[:, None]
    lam = wq[n] * cost_grad(n)
    for k in range(n - 1, -1, -1):
        t = times[k]
        stage_t = (t, t + 0.5 * h, t + 0.5 * h, t + h)
        a = [(s - t) / h for s in stage_t]
        us = [u[k] + ai * (u[k + 1] - u[k]) for ai in a]
        Fs = [forcing_value(profile, s) for s in stage_t]

        def f(i, x):
            return np.array(rhs(x.tolist(), params, Fs[i], ControlVec(*us[i].tolist()), **opts))

        Y1 = X[k]
        Y2 = Y1 + 0.5 * h * f(0, Y1)
        Y3 = Y1 + 0.5 * h * f(1, Y2)
        Y4 = Y1 + h * f(2, Y3)

        kb = [h / 6.0 * lam, h / 3.0 * lam, h / 3.0 * lam, h / 6.0 * lam]
        yb = lam.copy()
        ub = [None] * 4
        for i, Y, coef in ((3, Y4, h), (2, Y3, 0.5 * h), (1, Y2, 0.5 * h), (0, Y1, 0.0)):
            Yb = jac_t(Y, us[i], Fs[i], kb[i])
            yb += Yb
            if i:
                kb[i - 1] = kb[i - 1] + coef * Yb
            ub[i] = ctl_t(Y, kb[i])
        for i in range(4):
            grad[k] += (1.0 - a[i]) * ub[i]
            grad[k + 1] += a[i] * ub[i]
        lam = yb + wq[k] * cost_grad(k)
    return grad


def directional_derivative_check(scenario, u, du, eps=1e-5, discrete=True):
    """Adjoint and central-difference estimates of dJ(u)[du].

    Returns ``(adjoint_value, fd_value)``. With ``discrete`` (default) the
    adjoint side is the exact discrete gradient; otherwise it is the
    continuous costate estimate used by the sweep, which differs from the
    finite difference by O(h^2).
    """
    u = np.asarray(u, float)
    du = np.asarray(du, float)
    shape = (scenario.grid.n_nodes, 4)
    if u.shape != shape or du.shape != shape:
        raise ValueError(f"schedules must have shape {shape}")
    lo, hi = u - eps * du, u + eps * du
    if min(lo.min(), hi.min()) < 0.0 or max(lo.max(), hi.max()) > 1.0:
        raise ValueError("perturbed schedule leaves [0, 1]")

    w = scenario.weights
    if discrete:
        adjoint_value = float(np.sum(discrete_gradient(scenario, u) * du))
    else:
        traj = integrate(scenario, u)
        lam = solve_adjoint(scenario, traj)
        sw = switching(traj.states, lam, scenario.params.b, scenario.control.sign_convention)
        h = scenario.grid.h
        # node controls enter the objective through the Simpson weights and the
        # RK4 stages (linear interpolation) with trapezoid weights
        simpson = quadrature_weights(shape[0], h)
        stages = np.full(shape[0], h)
        stages[[0, -1]] = 0.5 * h
        adjoint_value = float(
            simpson @ np.sum(2.0 * w.w_u * u * du, axis=1) + stages @ np.sum(sw * du, axis=1)
        )

    J_plus = objective(integrate(scenario, hi), hi, w)
    J_minus = objective(integrate(scenario, lo), lo, w)
    return adjoint_value, (J_plus - J_minus) / (2.0 * eps)

def smooth_random_schedule(rng, times, lo, hi, modes=3):
    """Random (n_nodes, 4) schedule from a few sine modes, spanning [lo, hi].

    Smooth directions keep the finite-difference check well conditioned;
    white-noise perturbations make the objective change cancel to round-off.
    """
    times = np.asarray(times, float)
    s = (times - times[0]) / (times[-1] - times[0])
    out = np.zeros((len(times), 4))
    for _ in range(modes):
        k = rng.integers(1, 4, size=4)
        phase = rng.uniform(0, 2 * np.pi, size=4)
        out += rng.uniform(-1, 1, size=4) * np.sin(np.pi * k * s[:, None] + phase)
    out /= max(np.abs(out).max(), 1e-12)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * out
