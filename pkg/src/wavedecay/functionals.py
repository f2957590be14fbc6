"""Energies, fluxes, weighted bulks and spacetime norms on a record.

All quantities are nonnegative integrals of squares plus |phi|^{p+1} terms and
vanish exactly on the zero field.  Notation fixed here once: r_plus = 1 + r,
u_plus = 1 + |u|, v_plus = 1 + v with u, v the null coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field
from typing import Optional, Sequence

import numpy as np

from .model import ModelParams, unit_sphere_area
from .geometry import (
    RegionSpec,
    SliceSamples,
    SliceSpec,
    integrate_region,
    integrate_slice,
    safe_inverse_r,
)
from .solver import SolverState, SpacetimeRecord, first_radial_derivative

__all__ = [
    "FunctionalSeries",
    "energy_flux",
    "energy_partition_residual",
    "iled_bulk",
    "iled_bulk_region",
    "rweighted_bulk_and_flux",
    "spacetime_norm",
    "weighted_initial_energy",
    "exterior_flux_series",
    "hardy_check",
    "radiation_l_derivative",
]


@dataclass
class FunctionalSeries:
    """Tagged (parameter, value) sequence feeding the rate fitter and reports."""

    label: str
    param_name: str
    parameters: np.ndarray
    values: np.ndarray
    params: ModelParams
    provenance: str = ""
    meta: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        self.parameters = np.asarray(self.parameters, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.parameters.shape != self.values.shape:
            raise ValueError("parameters and values must have matching shapes")
        if len(self.parameters) >= 2 and not np.all(np.diff(self.parameters) > 0):
            raise ValueError("series parameters must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series values must be finite")

    def to_csv(self, path) -> None:
        header = {
            "label": self.label,
            "param": self.param_name,
            "d": self.params.d,
            "p": self.params.p,
            "gamma0": self.params.gamma0,
            "epsilon": self.params.epsilon,
            "record": self.provenance,
            **self.meta,
        }
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("# " + json.dumps(header, sort_keys=True) + "\n")
            f.write(f"{self.param_name},value\n")
            for x, y in zip(self.parameters, self.values):
                f.write(f"{x:.17g},{y:.17g}\n")

    @staticmethod
    def from_csv(path) -> "FunctionalSeries":
        with open(path, "r", encoding="utf-8") as f:
            first = f.readline()
            meta = json.loads(first[1:]) if first.startswith("#") else {}
            rows = np.loadtxt(f, delimiter=",", skiprows=1, ndmin=2)
        params = ModelParams(
            d=int(meta.get("d", 3)),
            p=float(meta.get("p", 3.0)),
            gamma0=float(meta.get("gamma0", 1.5)),
            epsilon=float(meta.get("epsilon", 0.1)),
        )
        known = {"label", "param", "d", "p", "gamma0", "epsilon", "record"}
        return FunctionalSeries(
            label=meta.get("label", "series"),
            param_name=meta.get("param", "x"),
            parameters=rows[:, 0],
            values=rows[:, 1],
            params=params,
            provenance=meta.get("record", ""),
            meta={k: v for k, v in meta.items() if k not in known},
        )


# -- pointwise densities -------------------------------------------------------


def _potential(phi: np.ndarray, p: float) -> np.ndarray:
    return (2.0 / (p + 1.0)) * np.abs(phi) ** (p + 1.0)


def _energy_density(seg: SliceSamples, p: float) -> np.ndarray:
    """Kind-appropriate energy-flux integrand (angular gradient is zero)."""
    pot = _potential(seg.phi, p)
    if seg.kind == "time_slice":
        return seg.dphi_dt**2 + seg.dphi_dr**2 + pot
    if seg.kind == "outgoing_null":
        return seg.lphi**2 + pot
    if seg.kind == "incoming_null":
        return seg.lbar_phi**2 + pot
    raise ValueError(f"no energy density for slice kind {seg.kind!r}")


def radiation_l_derivative(seg: SliceSamples, d: int) -> np.ndarray:
    """L psi with psi = r^{(d-1)/2} phi, the outgoing derivative of the radiation field."""
    half = 0.5 * (d - 1.0)
    return seg.r**half * seg.lphi + half * seg.r ** (half - 1.0) * seg.phi


def _safe_power(r: np.ndarray, a: float) -> np.ndarray:
    """r^a with the origin node mapped to 0 (negative powers never evaluated at 0)."""
    if a >= 0.0:
        return r**a
    base = np.where(r > 0.0, r, 1.0)
    return np.where(r > 0.0, base**a, 0.0)


# -- operations -----------------------------------------------------------------


def energy_flux(record: SpacetimeRecord, slc: SliceSpec) -> float:
    """E[phi] through the slice: time slices carry |d phi|^2 + 2/(p+1)|phi|^{p+1},
    outgoing cones |L phi|^2 + ..., incoming cones |Lbar phi|^2 + ..., hybrid
    leaves the sum of their ball and cone parts."""
    p = record.params.p
    return integrate_slice(record, slc, lambda seg: _energy_density(seg, p))


def energy_partition_residual(record: SpacetimeRecord, u1: float, u2: float, v0: float) -> dict:
    """Discrete residual of E(Sigma_{u1}^v) = E(Sigma_{u2}^v) + E(Hbar_v^{u1,u2})."""
    e1 = energy_flux(record, SliceSpec.hybrid(u1, hi=v0))
    e2 = energy_flux(record, SliceSpec.hybrid(u2, hi=v0))
    eh = energy_flux(record, SliceSpec.incoming(v0, u1, u2))
    return {"in": e1, "out": e2 + eh, "residual": e1 - e2 - eh}


def _iled_density(seg: SliceSamples, params: ModelParams) -> np.ndarray:
    rp = 1.0 + seg.r
    grad2 = seg.dphi_dt**2 + seg.dphi_dr**2
    low = (seg.phi / rp) ** 2
    pot = np.abs(seg.phi) ** (params.p + 1.0)
    return (grad2 + low) / rp ** (1.0 + params.epsilon) + pot * safe_inverse_r(seg.r)


def iled_bulk(record: SpacetimeRecord, T: float, params: Optional[ModelParams] = None) -> float:
    """Integrated local energy: slab [0, T] integral of
    (|d phi|^2 + |(1+r)^{-1} phi|^2)/(1+r)^{1+eps} + |phi|^{p+1}/r."""
    params = params or record.params
    return integrate_region(record, RegionSpec.slab(0.0, T), lambda seg: _iled_density(seg, params))


def future_region(record: SpacetimeRecord, u: float) -> RegionSpec:
    """Future region enclosed by Sigma_u, truncated at the record coverage."""
    u2 = 0.5 * (record.t_max - 2.0)
    if u >= u2:
        raise ValueError(f"Sigma_{u} leaf starts at t={2*u+2}, beyond record end {record.t_max}")
    return RegionSpec.foliation(u, u2, v0=None)


def iled_bulk_region(record: SpacetimeRecord, u: float, params: Optional[ModelParams] = None) -> float:
    """Same integrand over the future region of Sigma_u (coverage-truncated)."""
    params = params or record.params
    return integrate_region(record, future_region(record, u), lambda seg: _iled_density(seg, params))


def rweighted_bulk_and_flux(
    record: SpacetimeRecord,
    u_values: Sequence[float],
    gamma: float,
    params: Optional[ModelParams] = None,
    T: Optional[float] = None,
):
    """Radiation-field bulk and flux of the r-weighted multiplier hierarchy.

    bulk  = iint r^{gamma-d} |L psi|^2 + v_plus^{gamma-eps-1} |phi|^{p+1} dx dt
            over the slab [0, T] (angular term drops in radial symmetry),
    flux(u) = int_{H_u} r^gamma |L psi|^2 dv dOmega.

    Requires 1 <= gamma <= gamma0.
    """
    params = params or record.params
    if not (1.0 <= gamma <= params.gamma0 + 1e-12):
        raise ValueError(f"gamma={gamma} outside [1, gamma0={params.gamma0}]")
    d = params.d
    T = record.t_max if T is None else T

    def radiation_part(seg: SliceSamples) -> np.ndarray:
        lpsi = radiation_l_derivative(seg, d)
        return _safe_power(seg.r, gamma - d) * lpsi**2

    def potential_part(seg: SliceSamples) -> np.ndarray:
        vplus = 1.0 + 0.5 * (seg.t + seg.r)
        return vplus ** (gamma - params.epsilon - 1.0) * np.abs(seg.phi) ** (params.p + 1.0)

    slab = RegionSpec.slab(0.0, T)
    # radiation integrand ~ r^{gamma+d-4}|phi|^2 at the origin (fractional power)
    bulk = integrate_region(record, slab, radiation_part, origin_exponent=gamma + d - 4.0)
    bulk += integrate_region(record, slab, potential_part)

    u_values = np.asarray(sorted(u_values), dtype=float)
    flux = np.empty_like(u_values)
    for k, u in enumerate(u_values):
        flux[k] = integrate_slice(
            record,
            SliceSpec.outgoing(u),
            lambda seg: radiation_l_derivative(seg, d) ** 2,
            weight_exponent=gamma,
        )
    series = FunctionalSeries(
        label="rweighted_flux",
        param_name="u",
        parameters=u_values,
        values=flux,
        params=params,
        provenance=record.record_id,
        meta={"gamma": gamma},
    )
    return bulk, series


def spacetime_norm(
    record: SpacetimeRecord,
    q: float,
    weight_exponent: float,
    T: float,
    params: Optional[ModelParams] = None,
) -> float:
    """(iint_{[0,T]} v_plus^w |phi|^q dx dt)^{1/q}; w = 0 gives the plain norm."""
    if q < 1.0:
        raise ValueError(f"norm exponent q={q} must be >= 1")
    if weight_exponent < 0.0:
        raise ValueError(f"weight exponent must be >= 0, got {weight_exponent}")

    def density(seg: SliceSamples) -> np.ndarray:
        w = np.ones_like(seg.r) if weight_exponent == 0.0 else (
            1.0 + 0.5 * (seg.t + seg.r)
        ) ** weight_exponent
        return w * np.abs(seg.phi) ** q

    raw = integrate_region(record, RegionSpec.slab(0.0, T), density)
    return raw ** (1.0 / q)


def weighted_initial_energy(state: SolverState, gamma: float, params: ModelParams) -> float:
    """Grid trapezoid of (1+r)^gamma (|grad phi|^2 + |phi_t|^2 + 2/(p+1)|phi|^{p+1})."""
    if not (0.0 <= gamma <= 2.0):
        raise ValueError(f"gamma={gamma} outside [0, 2]")
    r = state.grid.r
    dphi = first_radial_derivative(state.phi, state.grid.dr)
    dens = dphi**2 + state.pi**2 + _potential(state.phi, params.p)
    weighted = (1.0 + r) ** gamma * dens * r ** (params.d - 1)
    return unit_sphere_area(params.d) * float(np.trapezoid(weighted, r))


def exterior_flux_series(
    record: SpacetimeRecord,
    u_values: Sequence[float],
    gamma: float,
    params: Optional[ModelParams] = None,
) -> FunctionalSeries:
    """u -> E[phi](H_u) on exterior cones u <= -1, for fitting against u_plus^{-gamma}."""
    params = params or record.params
    u_values = np.asarray(sorted(u_values), dtype=float)
    if np.any(u_values > -1.0):
        raise ValueError("exterior flux series needs u <= -1")
    vals = np.array([energy_flux(record, SliceSpec.outgoing(u)) for u in u_values])
    return FunctionalSeries(
        label="exterior_energy_flux",
        param_name="u",
        parameters=u_values,
        values=vals,
        params=params,
        provenance=record.record_id,
        meta={"gamma": gamma},
    )


def hardy_check(record: SpacetimeRecord, t: float) -> dict:
    """Classical Hardy control on a time slice:
    int r^{-2} |phi|^2 dx <= (2/(d-2))^2 int |phi_r|^2 dx."""
    d = record.params.d
    lhs = integrate_slice(
        record, SliceSpec.time(t), lambda seg: seg.phi**2, weight_exponent=float(d - 3)
    )
    rhs = integrate_slice(record, SliceSpec.time(t), lambda seg: seg.dphi_dr**2)
    c = (2.0 / (d - 2.0)) ** 2
    return {"lhs": lhs, "rhs": rhs, "bound": c * rhs, "constant": c}
