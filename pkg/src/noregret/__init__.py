"""No-regret learning dynamics in normal-form games.

Hedge and optimistic Hedge, Blum-Mansour swap-regret reduction, meta-expert
swap learners, stationary-distribution solvers, and tooling to run repeated
games and audit their regret.
"""

from .errors import (
    CapacityError,
    CertificateError,
    ConfigError,
    ContractError,
    FitError,
    NoRegretError,
    NumericalError,
    ParameterError,
    StructuralError,
)

__version__ = "0.1.0"
