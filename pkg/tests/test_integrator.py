import math
from dataclasses import replace

import numpy as np
import pytest

from disinfo.errors import BlowUpError, ScenarioError
from disinfo.integrator import (
    TimeGrid,
    Trajectory,
    integrate,
    integrate_backward,
    rk4_step,
)
from disinfo.model import ForcingProfile, StateVec
from disinfo.scenario import Scenario

from .oracles import WORKED_PARAMS


def rk4_amplification(z):
    return 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24


def make_scenario(params=WORKED_PARAMS, initial=(10, 5, 2, 3, 1), T=10.0, n=1000, **forcing):
    prof = ForcingProfile(**({"kind": "sigmoid_ramp", "f_min": 0.1, "f_max": 0.3,
                              "alpha": 1.0, "t_mid": 5.0} | forcing))
    return Scenario(params, StateVec(*initial), prof, TimeGrid(0.0, T, n))


def test_rk4_constant_field():
    assert rk4_step(lambda t, y: 3.0, 1.0, 0.0, 0.5) == pytest.approx(2.5, abs=1e-15)


def test_rk4_decay_amplification():
    y = rk4_step(lambda t, y: -y, 1.0, 0.0, 0.1)
    assert y == pytest.approx(0.9048375, abs=1e-15)
    assert y == pytest.approx(rk4_amplification(-0.1), abs=1e-15)


def test_rk4_exact_on_cubic_quadrature():
    assert rk4_step(lambda t, y: t**2, 0.0, 0.0, 0.3) == pytest.approx(0.009, abs=1e-15)
    # any cubic in t is integrated exactly
    f = lambda t, y: 1 - 2 * t + 3 * t**2 - 4 * t**3  # noqa: E731
    exact = lambda t: t - t**2 + t**3 - t**4  # noqa: E731
    assert rk4_step(f, exact(0.4), 0.4, 0.7) == pytest.approx(exact(1.1), abs=1e-13)


def test_rk4_non_finite_stage_raises_with_time():
    def f(t, y):
        return math.inf if t > 0.2 else 0.0

    with pytest.raises(BlowUpError) as info:
        rk4_step(f, 0.0, 0.0, 0.5)
    assert info.value.t == pytest.approx(0.25)


def _decay_error(h):
    n = round(1 / h)
    y = 1.0
    for k in range(n):
        y = rk4_step(lambda t, v: -v, y, k * h, h)
    return abs(y - math.exp(-1))


def test_order_four_convergence():
    errs = [_decay_error(h) for h in (0.1, 0.05, 0.025)]
    for a, b in zip(errs, errs[1:]):
        assert 14 <= a / b <= 18


def test_reversal_consistency():
    h = 0.01
    y1 = rk4_step(lambda t, y: -y, 1.0, 0.0, h)
    back = integrate_backward(
        lambda t, lam, x, u, F: -lam, [y1], TimeGrid(0.0, h, 1),
        Trajectory(TimeGrid(0.0, h, 1), np.zeros((2, 5)), np.zeros(2)),
    )
    assert back[0, 0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [0, -3])
def test_grid_rejects_empty(n):
    with pytest.raises(ScenarioError):
        TimeGrid(0.0, 1.0, n)


def test_grid_rejects_reversed_horizon():
    with pytest.raises(ScenarioError):
        TimeGrid(2.0, 1.0, 10)


def test_single_step_grid():
    sc = make_scenario(T=0.25, n=1)
    traj = integrate(sc)
    assert traj.states.shape == (2, 5)
    assert traj.state(0) == sc.initial
    assert traj.times.tolist() == [0.0, 0.25]


def test_zero_inflow_zero_state_stays_zero():
    p = replace(WORKED_PARAMS, r=0.0)
    traj = integrate(make_scenario(params=p, initial=(0, 0, 0, 0, 0), n=200))
    assert np.all(traj.states == 0.0)


def test_forcing_column_matches_profile():
    sc = make_scenario(n=50)
    traj = integrate(sc)
    from disinfo.model import forcing_value

    assert traj.forcing.tolist() == [forcing_value(sc.forcing, t) for t in traj.times]


def test_deterministic():
    sc = make_scenario(n=300)
    u = np.random.default_rng(0).uniform(0, 1, (301, 4))
    a, b = integrate(sc, u), integrate(sc, u)
    assert a.states.tobytes() == b.states.tobytes()


@pytest.mark.parametrize("column", [2, 4])
def test_manifold_preserved_bit_exact(column):
    initial = [10.0, 5.0, 2.0, 3.0, 1.0]
    initial[column] = 0.0
    sc = make_scenario(initial=initial, T=100.0, n=10_000)
    u = np.full((10_001, 4), 0.3)
    traj = integrate(sc, u)
    assert np.all(traj.states[:, column] == 0.0)


def test_control_schedule_shape_checked():
    sc = make_scenario(n=10)
    with pytest.raises(ValueError):
        integrate(sc, np.zeros((10, 4)))


def test_controls_affect_states():
    sc = make_scenario(n=100)
    free = integrate(sc)
    removed = integrate(sc, np.tile([1.0, 0, 0, 0], (101, 1)))
    assert removed.final.C < free.final.C


def test_blowup_guard():
    p = replace(WORKED_PARAMS, beta=50.0, p=1.0, r=0.0, gamma=0.0)
    sc = make_scenario(params=p, initial=(1e6, 0, 0, 1e6, 0), n=100, T=10.0)
    with pytest.raises(BlowUpError):
        integrate(sc)


def test_backward_constant_field():
    grid = TimeGrid(0.0, 1.0, 10)
    frozen = Trajectory(grid, np.zeros((11, 5)), np.zeros(11))
    out = integrate_backward(lambda t, lam, x, u, F: np.zeros(2), [2.0, -1.0], grid, frozen)
    assert np.all(out == [2.0, -1.0])


def test_backward_decay_one_step():
    grid = TimeGrid(0.0, 0.1, 1)
    frozen = Trajectory(grid, np.zeros((2, 5)), np.zeros(2))
    out = integrate_backward(lambda t, lam, x, u, F: -lam, [1.0], grid, frozen)
    assert out[1, 0] == 1.0
    assert out[0, 0] == pytest.approx(1.1051708333333333, abs=1e-15)
    assert out[0, 0] == pytest.approx(rk4_amplification(0.1), abs=1e-15)


def test_backward_zero_terminal_linear_field():
    grid = TimeGrid(0.0, 2.0, 40)
    frozen = Trajectory(grid, np.ones((41, 5)), np.ones(41))
    A = np.array([[0.3, -1.0], [2.0, 0.1]])
    out = integrate_backward(lambda t, lam, x, u, F: A @ lam, [0.0, 0.0], grid, frozen)
    assert np.all(out == 0.0)


def test_backward_sees_interpolated_frozen_values():
    # lam' = x_0(t) with x_0 linear in t: interpolation is exact, so RK4 is too
    grid = TimeGrid(0.0, 1.0, 4)
    t = grid.times
    X = np.zeros((5, 5))
    X[:, 0] = 2 * t
    frozen = Trajectory(grid, X, np.zeros(5))
    out = integrate_backward(lambda s, lam, x, u, F: np.array([x[0]]), [0.0], grid, frozen)
    # lam(t) = -(1 - t^2)
    np.testing.assert_allclose(out[:, 0], -(1 - t**2), atol=1e-14)
