"""Rate-induced tipping and optimal control for a five-compartment
disinformation-spread model."""

from .errors import (
    BlowUpError,
    NoConvergence,
    NonMonotonicBracket,
    ScenarioError,
)
from .model import (
    AdjointVec,
    ControlVec,
    ForcingProfile,
    Params,
    StateVec,
    TransferForm,
    forcing_value,
    recruitment_term,
    rhs,
    transfer_exposed_to_medium,
)

__version__ = "0.1.0"

__all__ = [
    "AdjointVec",
    "BlowUpError",
    "ControlVec",
    "ForcingProfile",
    "NoConvergence",
    "NonMonotonicBracket",
    "Params",
    "ScenarioError",
    "StateVec",
    "TransferForm",
    "forcing_value",
    "recruitment_term",
    "rhs",
    "transfer_exposed_to_medium",
]
