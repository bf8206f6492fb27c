"""Model parameters, validation, and the Turing-condition gate.

A run is only meaningful when the exponents satisfy the diffusion-driven
instability condition r/(p-1) < N/2 together with gamma*r != p-1; the
sign of 1 - r*gamma/(p-1) splits the admissible range into a subcritical
and a supercritical branch, the equality case being excluded.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum


class ParameterError(ValueError):
    """A model parameter is non-finite or out of range."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"parameter '{field}': {message}")


class CriticalityError(ValueError):
    """Operation undefined on the excluded critical branch gamma*r == p-1."""


class Criticality(Enum):
    SUBCRITICAL = "subcritical"
    SUPERCRITICAL = "supercritical"
    EXCLUDED_CRITICAL = "excluded-critical"


_POSITIVE_FIELDS = ("r", "gamma", "radius", "K0", "A", "delta0", "C0",
                    "eta0", "eps0", "alpha0", "M0")
_FLOAT_FIELDS = ("p", "r", "gamma", "radius", "T", "K0", "A", "delta0",
                 "C0", "eta0", "eps0", "alpha0", "M0")


@dataclass(frozen=True)
class ModelParams:
    """Exponents, ball geometry, and construction constants for one setup.

    p, r, gamma are the reaction exponents, dim the spatial dimension and
    radius the ball radius.  T is the target blowup time of constructed
    initial data.  K0, A, delta0, C0, eta0, eps0, alpha0, M0 are the
    constants entering the three-region trapping bounds; they only rescale
    thresholds, never the dynamics.
    """

    p: float = 2.0
    r: float = 1.0
    gamma: float = 0.5
    dim: int = 3
    radius: float = 1.0
    T: float = 1.0e-3
    K0: float = 10.0
    A: float = 12.0
    delta0: float = 0.75
    C0: float = 5.0
    eta0: float = 1.0e6
    eps0: float = 0.25
    alpha0: float = 0.2
    M0: float = 2.0

    def __post_init__(self):
        for name in _FLOAT_FIELDS:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ParameterError(name, "must be a number")
            if not math.isfinite(value):
                raise ParameterError(name, "must be finite")
            object.__setattr__(self, name, float(value))
        if isinstance(self.dim, bool) or not isinstance(self.dim, int):
            raise ParameterError("dim", "must be an integer")
        if self.dim < 1:
            raise ParameterError("dim", "must be at least 1")
        if self.p <= 1.0:
            raise ParameterError("p", "must exceed 1")
        for name in _POSITIVE_FIELDS:
            if getattr(self, name) <= 0.0:
                raise ParameterError(name, "must be positive")
        if not 0.0 < self.T < 1.0:
            raise ParameterError("T", "must lie in (0, 1)")
        # unique entry-time branch: eps0 <= (K0/4) sqrt(1/e) / 2
        if self.eps0 > self.K0 * math.exp(-0.5) / 8.0:
            raise ParameterError("eps0", "too large for a unique entry-time branch")

    # -- derived quantities ------------------------------------------------

    @property
    def kappa(self) -> float:
        """Flat-state amplitude (p-1)^(-1/(p-1))."""
        return (self.p - 1.0) ** (-1.0 / (self.p - 1.0))

    @property
    def sigma(self) -> float:
        """Criticality gap 1 - r*gamma/(p-1)."""
        return 1.0 - self.r * self.gamma / (self.p - 1.0)

    @property
    def theta_exponent_u(self) -> float:
        """Exponent of the mean of u^r in the non-local factor."""
        return -self.gamma

    @property
    def theta_exponent_U(self) -> float:
        """Exponent of the mean of U^r in the rescaled non-local factor."""
        if self.sigma == 0.0:
            raise CriticalityError(
                "gamma*r == p-1: the rescaled non-local factor is undefined")
        return -self.gamma / self.sigma

    @property
    def s0(self) -> float:
        """Initial similarity time -ln(T)."""
        return -math.log(self.T)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(**data)


@dataclass(frozen=True)
class TuringCheck:
    valid: bool
    criticality: Criticality
    reasons: tuple


def check_turing(params: ModelParams) -> TuringCheck:
    """Gate a parameter set on the instability condition.

    Valid iff r/(p-1) < dim/2 and gamma*r != p-1.  The criticality class
    follows the sign of 1 - r*gamma/(p-1).
    """
    reasons = []
    if params.r / (params.p - 1.0) >= params.dim / 2.0:
        reasons.append("r/(p-1) must be below dim/2")
    gap = params.sigma
    if gap == 0.0:
        reasons.append("gamma*r must differ from p-1")
        crit = Criticality.EXCLUDED_CRITICAL
    elif gap > 0.0:
        crit = Criticality.SUBCRITICAL
    else:
        crit = Criticality.SUPERCRITICAL
    return TuringCheck(valid=not reasons, criticality=crit, reasons=tuple(reasons))
