"""Compartment types and the controlled right-hand side of the
Susceptible/Exposed/Source/Medium/Skeptic system.

Compartments::

    S  susceptible          E  exposed
    C  source (intended)    I  medium (spreader)
    Z  skeptic (protester)

Controls ``u1..u4`` act on source removal, medium demotion, the
source-medium coupling and the susceptible-skeptic channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import NamedTuple

from .errors import ScenarioError

CONVENTIONS = ("literal", "remedial")


class StateVec(NamedTuple):
    S: float
    E: float
    C: float
    I: float  # noqa: E741
    Z: float


class ControlVec(NamedTuple):
    u1: float = 0.0
    u2: float = 0.0
    u3: float = 0.0
    u4: float = 0.0


class AdjointVec(NamedTuple):
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda3: float = 0.0
    lambda4: float = 0.0
    lambda5: float = 0.0


ZERO_CONTROL = ControlVec()

_FRACTIONS = ("p", "l", "eta")


@dataclass(frozen=True)
class Params:
    r: float
    beta: float
    b: float
    p: float
    l: float  # noqa: E741
    epsilon: float
    phi: float
    gamma: float
    eta: float
    mu: float
    xi: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            path = f"params.{f.name}"
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ScenarioError("must be a number", path)
            if not math.isfinite(v):
                raise ScenarioError("must be finite", path)
            if f.name in _FRACTIONS:
                if not 0.0 <= v <= 1.0:
                    raise ScenarioError("must lie in [0,1]", path)
            elif v < 0:
                raise ScenarioError("must be ≥ 0", path)
            object.__setattr__(self, f.name, float(v))


@dataclass(frozen=True)
class TransferForm:
    """Shape of the exposed -> medium flow.

    ``regularized``: eps*E / (1 + phi*Z)
    ``literal``:     eps*E / (phi*Z + kappa), kappa > 0
    """

    kind: str = "regularized"
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in ("regularized", "literal"):
            raise ScenarioError(
                "must be 'regularized' or 'literal'", "model.transfer_form"
            )
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise ScenarioError("must be finite and ≥ 0", "model.kappa")
        if self.kind == "literal" and self.kappa <= 0:
            raise ScenarioError(
                "must be > 0 for the literal transfer form", "model.kappa"
            )


REGULARIZED = TransferForm()

PROFILE_KINDS = ("constant", "linear_ramp", "sigmoid_ramp")


@dataclass(frozen=True)
class ForcingProfile:
    """External influence level as a function of time.

    ``alpha`` is the rate of the ramp; ``f_min``/``f_max`` are the levels
    before and after it. ``f0`` is used only by the constant profile.
    """

    kind: str = "sigmoid_ramp"
    f0: float = 0.0
    f_min: float = 0.0
    f_max: float = 0.0
    alpha: float = 0.0
    t_mid: float = 0.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ScenarioError(f"must be one of {PROFILE_KINDS}", "forcing.kind")
        for name in ("f0", "f_min", "f_max", "alpha", "t_mid"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ScenarioError("must be a number", f"forcing.{name}")
            if not math.isfinite(v):
                raise ScenarioError("must be finite", f"forcing.{name}")
            object.__setattr__(self, name, float(v))
        if self.alpha < 0:
            raise ScenarioError("must be ≥ 0", "forcing.alpha")
        if self.f_min > self.f_max:
            raise ScenarioError("f_min must not exceed f_max", "forcing.f_min")

    def with_alpha(self, alpha):
        return replace(self, alpha=alpha)

    @property
    def start_level(self):
        return self.f0 if self.kind == "constant" else self.f_min

    @property
    def end_level(self):
        return self.f0 if self.kind == "constant" else self.f_max


def _logistic(z):
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def forcing_value(profile: ForcingProfile, t: float) -> float:
    kind = profile.kind
    if kind == "constant":
        return profile.f0
    if kind == "linear_ramp":
        return min(profile.f_min + profile.alpha * t, profile.f_max)
    span = profile.f_max - profile.f_min
    return profile.f_min + span * _logistic(profile.alpha * (t - profile.t_mid))


def transfer_exposed_to_medium(E, Z, params: Params, transfer=REGULARIZED):
    if transfer.kind == "literal":
        return params.epsilon * E / (params.phi * Z + transfer.kappa)
    return params.epsilon * E / (1.0 + params.phi * Z)


def recruitment_term(C, S, params: Params):
    """Source recruitment flow, mass-action ``gamma*C*S``.

    ``optimal_control.adjoint_rhs`` differentiates this form analytically;
    change both together when trying another recruitment law.
    """
    return params.gamma * C * S


def coupling_signs(convention):
    """Signs of the u3 and u4 couplings in the source and exposed equations."""
    if convention == "literal":
        return 1.0, 1.0
    if convention == "remedial":
        return -1.0, -1.0
    raise ValueError(f"unknown sign convention {convention!r}")


def rhs(
    state,
    params: Params,
    F: float,
    u=ZERO_CONTROL,
    *,
    transfer: TransferForm = REGULARIZED,
    convention: str = "literal",
) -> StateVec:
    """Time derivative ``(S', E', C', I', Z')``.

    With ``u = 0`` this is the uncontrolled system. The u2/u3/u4 terms move
    mass between compartment pairs; u1 removes sources.

    Raises FloatingPointError on non-finite input.
    """
    S, E, C, I, Z = state
    u1, u2, u3, u4 = u
    if not math.isfinite(S + E + C + I + Z + F + u1 + u2 + u3 + u4):
        raise FloatingPointError("non-finite input to rhs")
    s3, s4 = coupling_signs(convention)
    p = params
    T = transfer_exposed_to_medium(E, Z, p, transfer)
    R = p.gamma * C * S
    bIS = p.beta * I * S
    bSZ = p.b * S * Z
    FCI = F * C * I
    c3 = s3 * u3 * C * I
    c4 = s4 * u4 * bSZ
    return StateVec(
        p.r - R - bIS - bSZ,
        -T + (1.0 - p.p) * bIS + (1.0 - p.l) * bSZ + u2 * I + c4,
        FCI - p.mu * C + (1.0 - p.eta) * R - u1 * C + c3,
        T - FCI + p.eta * R + p.p * bIS - u2 * I - c3,
        p.b * I * Z - p.xi * Z - c4,
    )
