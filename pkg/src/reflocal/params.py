"""Model parameters shared by the closed-form and simulation layers."""

import math
from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class ReflectionParams:
    """Barrier width ``b`` and start point ``x`` of the reflected motion on ``[0, b]``."""

    b: float
    x: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.b) and self.b > 0):
            raise DomainError(f"barrier width b must be positive and finite, got {self.b!r}")
        if not (0.0 <= self.x <= self.b):
            raise DomainError(f"start point x={self.x!r} outside [0, {self.b!r}]")

    @property
    def lambda_floor(self) -> float:
        """Left end ``-pi^2/(8 b^2)`` of the domain of the pole locus."""
        return -math.pi**2 / (8.0 * self.b**2)

    @property
    def lln_point(self) -> float:
        """Almost-sure limit of ``L_t/t``, the zero of the rate function."""
        return 1.0 / (2.0 * self.b)
