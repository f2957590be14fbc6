"""Static model parameters, derived exponents and admissibility windows.

Everything downstream (solver, functionals, multiplier audits) consumes the
quantities defined here: the spatial dimension d, the nonlinearity power p,
the weight exponent gamma0 of the weighted energy space, and the small
exponent epsilon entering the interior decay weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "ModelParams",
    "Interval",
    "critical_exponent",
    "scattering_threshold",
    "admissible_gamma0_window",
    "unit_sphere_area",
]


def unit_sphere_area(d: int) -> float:
    """Area of the unit sphere S^{d-1} in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi); empty when the bounds cross."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not (self.lo < self.hi)

    def contains(self, x: float) -> bool:
        return self.lo < x < self.hi

    def __iter__(self):
        return iter((self.lo, self.hi))


@dataclass(frozen=True)
class ModelParams:
    """Model parameters (d, p, gamma0, epsilon).

    d: spatial dimension, integer >= 3.
    p: nonlinearity power, 1 < p <= (d+2)/(d-2) (energy subcritical/critical).
    gamma0: weight exponent of the weighted energy space, in [0, 2].
    epsilon: small positive constant in the interior weights, 0 < epsilon < 1/2,
        and epsilon < gamma0 - 1 whenever gamma0 > 1.
    """

    d: int = 3
    p: float = 3.0
    gamma0: float = 1.5
    epsilon: float = 0.1

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 3):
            raise ValueError(f"spatial dimension must be an integer >= 3, got {self.d}")
        if not self.p > 1.0:
            raise ValueError(f"nonlinearity power must exceed 1, got {self.p}")
        p_max = (self.d + 2.0) / (self.d - 2.0)
        if self.p > p_max + 1e-12:
            raise ValueError(
                f"supercritical power p={self.p} rejected: requires p <= (d+2)/(d-2) = {p_max:.6g}"
            )
        if not (0.0 <= self.gamma0 <= 2.0):
            raise ValueError(f"gamma0 must lie in [0, 2], got {self.gamma0}")
        if not (0.0 < self.epsilon < 0.5):
            raise ValueError(f"epsilon must lie in (0, 1/2), got {self.epsilon}")
        if self.gamma0 > 1.0 and not self.epsilon < self.gamma0 - 1.0:
            raise ValueError(
                f"epsilon={self.epsilon} too large: needs epsilon < gamma0 - 1 = {self.gamma0 - 1.0:.6g}"
            )

    # -- derived constants ------------------------------------------------

    @property
    def gamma_ceiling(self) -> float:
        """(p-1)(d-1)/2, the upper limit the potential sign condition puts on gamma."""
        return 0.5 * (self.p - 1.0) * (self.d - 1.0)

    @property
    def reduction_potential(self) -> float:
        """(d-1)(d-3)/4, coefficient of r^{-2}|psi|^2 after the radial reduction."""
        return 0.25 * (self.d - 1.0) * (self.d - 3.0)

    @property
    def sphere_area(self) -> float:
        return unit_sphere_area(self.d)

    def require_window(self, mode: str) -> None:
        """Raise unless gamma0 sits inside the admissible open window for `mode`."""
        window = admissible_gamma0_window(self, mode)
        if window.empty or not window.contains(self.gamma0):
            raise ValueError(
                f"gamma0={self.gamma0} outside the admissible {mode} window "
                f"({window.lo:.6g}, {window.hi:.6g}) for d={self.d}, p={self.p}"
            )


def critical_exponent(params: ModelParams) -> float:
    """Scaling-critical Sobolev index d/2 - 2/(p-1)."""
    if not params.p > 1.0:
        raise ValueError("critical exponent undefined for p <= 1")
    return params.d / 2.0 - 2.0 / (params.p - 1.0)


def scattering_threshold(d: int) -> float:
    """Lower power threshold (1 + sqrt(d^2+4d-4))/(d-1) for the scattering window."""
    if d < 3:
        raise ValueError(f"threshold defined for d >= 3, got {d}")
    return (1.0 + math.sqrt(d * d + 4.0 * d - 4.0)) / (d - 1.0)


def admissible_gamma0_window(params: ModelParams, mode: str) -> Interval:
    """Open admissibility interval for gamma0.

    mode "flux_decay":  (1, min{2, (p-1)(d-1)/2})
    mode "scattering":  (max{4/(p-1) - d + 2, 1}, min{(p-1)(d-1)/2, 2})

    An empty interval is a valid return (bounds crossed).
    """
    hi = min(2.0, params.gamma_ceiling)
    if mode == "flux_decay":
        return Interval(1.0, hi)
    if mode == "scattering":
        lo = max(4.0 / (params.p - 1.0) - params.d + 2.0, 1.0)
        return Interval(lo, hi)
    raise ValueError(f"unknown admissibility mode {mode!r}")
