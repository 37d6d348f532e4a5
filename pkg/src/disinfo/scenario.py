"""Scenario documents (TOML) and deterministic CSV export."""

from __future__ import annotations

import io
import math
import sys
from dataclasses import asdict, dataclass, field, fields
from importlib import resources

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ScenarioError
from .integrator import TimeGrid, Trajectory
from .model import CONVENTIONS, ForcingProfile, Params, StateVec, TransferForm
from .optimal_control import CostWeights


@dataclass(frozen=True)
class TippingOptions:
    delta_tip: float = 1.0
    alpha_lo: float = 0.01
    alpha_hi: float = 1.0
    tol: float = 1e-3

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ScenarioError("must be finite", f"tipping.{f.name}")
        if self.delta_tip <= 0:
            raise ScenarioError("must be > 0", "tipping.delta_tip")
        if self.tol <= 0:
            raise ScenarioError("must be > 0", "tipping.tol")
        if self.alpha_lo < 0:
            raise ScenarioError("must be ≥ 0", "tipping.alpha_lo")
        if self.alpha_hi <= self.alpha_lo:
            raise ScenarioError("must be greater than alpha_lo", "tipping.alpha_hi")


@dataclass(frozen=True)
class FbsmOptions:
    omega: float = 0.5
    tol: float = 1e-6
    max_iter: int = 500
    sign_convention: str = "literal"

    def __post_init__(self):
        if not (math.isfinite(self.omega) and 0.0 < self.omega <= 1.0):
            raise ScenarioError("must lie in (0,1]", "control.omega")
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise ScenarioError("must be > 0", "control.tol")
        if self.max_iter < 1:
            raise ScenarioError("must be ≥ 1", "control.max_iter")
        if self.sign_convention not in CONVENTIONS:
            raise ScenarioError(f"must be one of {CONVENTIONS}", "control.sign_convention")


@dataclass(frozen=True)
class Scenario:
    params: Params
    initial: StateVec
    forcing: ForcingProfile
    grid: TimeGrid
    weights: CostWeights = field(default_factory=CostWeights)
    tipping: TippingOptions = field(default_factory=TippingOptions)
    control: FbsmOptions = field(default_factory=FbsmOptions)
    transfer: TransferForm = field(default_factory=TransferForm)


# section -> (key -> (type, default)); REQUIRED marks keys without a default
REQUIRED = object()
NUM, INT, STR = "number", "integer", "string"

SCHEMA = {
    "model": {"transfer_form": (STR, "regularized"), "kappa": (NUM, 0.0)},
    "params": {name: (NUM, REQUIRED) for name in (f.name for f in fields(Params))},
    "initial": {name: (NUM, REQUIRED) for name in StateVec._fields},
    "forcing": {
        "kind": (STR, REQUIRED),
        "f0": (NUM, 0.0),
        "f_min": (NUM, 0.0),
        "f_max": (NUM, 0.0),
        "alpha": (NUM, 0.0),
        "t_mid": (NUM, 0.0),
    },
    "integration": {"t0": (NUM, 0.0), "T": (NUM, REQUIRED), "n_steps": (INT, REQUIRED)},
    "tipping": {
        "delta_tip": (NUM, 1.0),
        "alpha_lo": (NUM, 0.01),
        "alpha_hi": (NUM, 1.0),
        "tol": (NUM, 1e-3),
    },
    "weights": {f.name: (NUM, 1.0) for f in fields(CostWeights)},
    "control": {
        "omega": (NUM, 0.5),
        "tol": (NUM, 1e-6),
        "max_iter": (INT, 500),
        "sign_convention": (STR, "literal"),
    },
}
OPTIONAL_SECTIONS = {"model", "tipping", "weights", "control"}


def _coerce(value, kind, path):
    if kind == STR:
        if not isinstance(value, str):
            raise ScenarioError("must be a string", path)
        return value
    if isinstance(value, bool):
        raise ScenarioError(f"must be a {kind}", path)
    if kind == INT:
        if not isinstance(value, int):
            raise ScenarioError("must be an integer", path)
        return value
    if not isinstance(value, (int, float)):
        raise ScenarioError("must be a number", path)
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError("must be finite", path)
    return value


def _resolve(doc):
    """Fill defaults and type-check every key; returns section -> dict."""
    unknown = sorted(set(doc) - set(SCHEMA))
    if unknown:
        raise ScenarioError("unknown section", unknown[0])
    out = {}
    for section, keys in SCHEMA.items():
        if section not in doc:
            if section not in OPTIONAL_SECTIONS:
                raise ScenarioError("missing required section", section)
            raw = {}
        else:
            raw = doc[section]
            if not isinstance(raw, dict):
                raise ScenarioError("must be a table", section)
        extra = sorted(set(raw) - set(keys))
        if extra:
            raise ScenarioError("unknown key", f"{section}.{extra[0]}")
        vals = {}
        for key, (kind, default) in keys.items():
            path = f"{section}.{key}"
            if key in raw:
                vals[key] = _coerce(raw[key], kind, path)
            elif default is REQUIRED:
                raise ScenarioError("missing required key", path)
            else:
                vals[key] = default
        out[section] = vals
    return out


def from_dict(doc) -> Scenario:
    r = _resolve(doc)
    initial = r["initial"]
    for k, v in initial.items():
        if v < 0:
            raise ScenarioError("must be ≥ 0", f"initial.{k}")
    return Scenario(
        params=Params(**r["params"]),
        initial=StateVec(**initial),
        forcing=ForcingProfile(**r["forcing"]),
        grid=TimeGrid(**r["integration"]),
        weights=CostWeights(**r["weights"]),
        tipping=TippingOptions(**r["tipping"]),
        control=FbsmOptions(**r["control"]),
        transfer=TransferForm(r["model"]["transfer_form"], r["model"]["kappa"]),
    )


def parse_scenario(text: str) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"syntax error: {exc}") from None
    return from_dict(doc)


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def default_scenario_text() -> str:
    return resources.files("disinfo").joinpath("data/default.toml").read_text("utf-8")


def default_scenario() -> Scenario:
    return parse_scenario(default_scenario_text())


def to_dict(sc: Scenario) -> dict:
    return {
        "model": {"transfer_form": sc.transfer.kind, "kappa": sc.transfer.kappa},
        "params": asdict(sc.params),
        "initial": sc.initial._asdict(),
        "forcing": asdict(sc.forcing),
        "integration": {"t0": sc.grid.t0, "T": sc.grid.T, "n_steps": sc.grid.n_steps},
        "tipping": asdict(sc.tipping),
        "weights": asdict(sc.weights),
        "control": asdict(sc.control),
    }


def serialize_scenario(sc: Scenario) -> str:
    return tomli_w.dumps(to_dict(sc))


def _fmt(x):
    # + 0.0 folds -0.0 into 0.0 so the text never depends on the sign of zero
    return format(float(x) + 0.0, ".12g")


def export_csv(traj: Trajectory, include_controls=False) -> str:
    cols = ["t", "S", "E", "C", "I", "Z", "F"]
    blocks = [traj.times[:, None], traj.states, traj.forcing[:, None]]
    if include_controls:
        cols += ["u1", "u2", "u3", "u4"]
        U = traj.controls if traj.controls is not None else np.zeros((traj.grid.n_nodes, 4))
        blocks.append(U)
    table = np.hstack(blocks)
    buf = io.StringIO(newline="")
    buf.write(",".join(cols) + "\n")
    for row in table:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def export_controls_csv(times, controls) -> str:
    buf = io.StringIO(newline="")
    buf.write("t,u1,u2,u3,u4\n")
    for t, row in zip(times, controls):
        buf.write(",".join(_fmt(v) for v in (t, *row)) + "\n")
    return buf.getvalue()


def read_csv(text: str):
    """Header and float table of a document written by ``export_csv``."""
    lines = text.rstrip("\n").split("\n")
    header = lines[0].split(",")
    return header, np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
