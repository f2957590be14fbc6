"""Rate fitting, plateau verdicts and convergence-order estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .functionals import FunctionalSeries

__all__ = [
    "PowerLawFit",
    "PlateauVerdict",
    "ConvergenceOrder",
    "fit_power_law",
    "plateau_check",
    "convergence_order",
    "refinement_slope",
]


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares line through (log u_plus, log value); exponent is the slope."""

    exponent: float
    intercept: float
    r_squared: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_points": self.n_points,
        }


@dataclass(frozen=True)
class PlateauVerdict:
    passed: bool
    sup: float
    last_increment: float
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "sup": self.sup,
            "last_increment": self.last_increment,
            "tolerance": self.tolerance,
        }


@dataclass(frozen=True)
class ConvergenceOrder:
    order: Optional[float]
    noise_floor: bool

    def to_dict(self) -> dict:
        return {"order": self.order, "noise_floor": self.noise_floor}


def fit_power_law(
    series: FunctionalSeries, window: Optional[tuple] = None
) -> PowerLawFit:
    """Fit value ~ C * u_plus^exponent over the window, u_plus = 1 + |parameter|.

    Needs at least 4 positive values in the window.  The fit quality is the
    coefficient of determination of the log-log regression; a constant series
    fits exactly with exponent 0.
    """
    u = series.parameters
    v = series.values
    if window is not None:
        mask = (u >= window[0]) & (u <= window[1])
        u, v = u[mask], v[mask]
    if len(u) < 4:
        raise ValueError(f"power-law fit needs >= 4 points in the window, got {len(u)}")
    if np.any(v <= 0.0):
        raise ValueError("power-law fit needs strictly positive values")
    x = np.log(1.0 + np.abs(u))
    if np.ptp(x) <= 0.0:
        raise ValueError("degenerate window: parameters collapse to one abscissa")
    y = np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(float(slope), float(intercept), float(r2), len(u))


def plateau_check(series: FunctionalSeries, tolerance: float) -> PlateauVerdict:
    """Uniform-bound surrogate on a doubling parameter ladder.

    Passes iff the last doubling increment is at most tolerance * current
    value; reports the empirical sup.  At least 3 doubling levels required.
    """
    t = series.parameters
    v = series.values
    if len(t) < 3:
        raise ValueError(f"plateau check needs >= 3 doubling levels, got {len(t)}")
    ratios = t[1:] / t[:-1]
    if np.any(ratios < 1.8) or np.any(ratios > 2.2):
        raise ValueError(f"series parameters must double between levels, got ratios {ratios}")
    last_inc = abs(float(v[-1] - v[-2]))
    current = abs(float(v[-1]))
    passed = last_inc <= tolerance * current if current > 0.0 else last_inc == 0.0
    return PlateauVerdict(bool(passed), float(np.max(v)), last_inc, tolerance)


def convergence_order(v_coarse: float, v_mid: float, v_fine: float) -> ConvergenceOrder:
    """Observed order from values at spacings (h, h/2, h/4): log2 of difference ratio."""
    d1 = v_coarse - v_mid
    d2 = v_mid - v_fine
    scale = max(abs(v_coarse), abs(v_mid), abs(v_fine), 1e-300)
    if abs(d2) <= 1e-14 * scale:
        return ConvergenceOrder(None, True)
    if d1 * d2 < 0.0:
        raise ValueError(f"differences change sign ({d1:.3g}, {d2:.3g}); no monotone refinement")
    return ConvergenceOrder(float(math.log2(abs(d1) / abs(d2))), False)


def refinement_slope(spacings: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares order of error ~ C h^q across a refinement ladder."""
    h = np.asarray(spacings, dtype=float)
    e = np.asarray(errors, dtype=float)
    if len(h) < 2 or np.any(e <= 0.0):
        raise ValueError("refinement slope needs >= 2 levels of positive errors")
    return float(np.polyfit(np.log(h), np.log(e), 1)[0])
