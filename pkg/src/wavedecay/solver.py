"""Radial evolution of the defocusing semilinear wave equation.

Evolves phi_tt = phi_rr + ((d-1)/r) phi_r - |phi|^{p-1} phi on a uniform
radial grid with second-order centered differences (conservative flux form of
the radial Laplacian) and the classical 4-stage Runge-Kutta integrator, and
accumulates a coarsened (t, r) record of (phi, phi_t, phi_r) for diagnostics.

Outer boundary: pure domain-of-dependence truncation.  The outermost node is
frozen, so boundary influence travels inward at unit speed from the moment
the data's support first touches r_max; the record tracks that taint front
and the geometry layer refuses samples behind it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .model import ModelParams, unit_sphere_area

__all__ = [
    "Grid",
    "SolverState",
    "SpacetimeRecord",
    "InitialDataSpec",
    "BlowUpError",
    "rhs",
    "evolve",
    "make_initial_data",
    "save_checkpoint",
    "load_checkpoint",
    "export_record_csv",
    "save_record",
    "load_record",
]

CHECKPOINT_VERSION = 1
RECORD_SCHEMA_VERSION = 1
SUPPORT_ATOL = 1e-13


class BlowUpError(RuntimeError):
    """Non-finite field values encountered; defocusing runs should never trigger this."""


@dataclass(frozen=True)
class Grid:
    """Uniform radial grid r_i = i*dr, i = 0..n-1, with r_{n-1} = r_max."""

    dr: float
    r_max: float

    def __post_init__(self):
        if self.dr <= 0 or self.r_max <= 0:
            raise ValueError("grid spacing and extent must be positive")
        n = round(self.r_max / self.dr)
        if abs(n * self.dr - self.r_max) > 1e-9 * self.r_max:
            raise ValueError(f"r_max={self.r_max} is not an integer multiple of dr={self.dr}")

    @property
    def n(self) -> int:
        return round(self.r_max / self.dr) + 1

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.n) * self.dr


@dataclass
class SolverState:
    """Field samples (phi, dphi/dt) on the grid nodes at one time."""

    t: float
    grid: Grid
    phi: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.pi = np.asarray(self.pi, dtype=float)
        if self.phi.shape != (self.grid.n,) or self.pi.shape != (self.grid.n,):
            raise ValueError(
                f"state arrays must have shape ({self.grid.n},), got {self.phi.shape}, {self.pi.shape}"
            )

    def copy(self) -> "SolverState":
        return SolverState(self.t, self.grid, self.phi.copy(), self.pi.copy())

    def support_radius(self) -> float:
        """Largest node radius where the data exceeds the support tolerance."""
        scale = max(1.0, float(np.max(np.abs(self.phi))), float(np.max(np.abs(self.pi))))
        mask = (np.abs(self.phi) > SUPPORT_ATOL * scale) | (np.abs(self.pi) > SUPPORT_ATOL * scale)
        if not mask.any():
            return 0.0
        return float(self.grid.r[np.nonzero(mask)[0][-1]])


@dataclass
class SpacetimeRecord:
    """Coarsened (t, r) history of phi and its first derivatives.

    The substrate for every foliation and bulk integral.  `taint_start` is the
    time the data's support first reaches the outer boundary; points with
    r > r_max - (t - taint_start) are causally contaminated by the boundary
    truncation and must not be sampled.
    """

    times: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    dphi_dt: np.ndarray
    dphi_dr: np.ndarray
    params: ModelParams
    dr: float
    r_max: float
    taint_start: float
    support_radius: float
    nonlinearity_on: bool = True

    def __post_init__(self):
        nt, nr = len(self.times), len(self.r)
        for name in ("phi", "dphi_dt", "dphi_dr"):
            arr = getattr(self, name)
            if arr.shape != (nt, nr):
                raise ValueError(f"record slab {name} has shape {arr.shape}, expected {(nt, nr)}")
        if nt >= 2 and not np.all(np.diff(self.times) > 0):
            raise ValueError("record times must be strictly increasing")

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @property
    def record_id(self) -> str:
        h = hashlib.sha256()
        h.update(self.times.tobytes())
        h.update(self.phi.tobytes())
        return h.hexdigest()[:16]

    def untainted_radius(self, t) -> np.ndarray:
        """Outer radius of the causally clean region at time(s) t."""
        t = np.asarray(t, dtype=float)
        return self.r_max - np.maximum(0.0, t - self.taint_start)

    def state_at(self, t: float, rtol: float = 1e-9) -> SolverState:
        """Reconstruct a full-resolution SolverState at a recorded time."""
        if len(self.r) >= 2 and abs((self.r[1] - self.r[0]) - self.dr) > 1e-12:
            raise ValueError("state reconstruction requires a record with node_stride=1")
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > rtol * max(1.0, abs(t)):
            raise ValueError(f"t={t} is not a recorded time (nearest: {self.times[k]})")
        grid = Grid(self.dr, self.r_max)
        return SolverState(float(self.times[k]), grid, self.phi[k].copy(), self.dphi_dt[k].copy())


# -- initial data -----------------------------------------------------------

FAMILIES = ("gaussian", "compact_bump", "polynomial_tail")


@dataclass(frozen=True)
class InitialDataSpec:
    """Closed-form radial data family; phi_1 = 0 throughout.

    gaussian:        amplitude * exp(-((r-center)/width)^2), even-symmetrized
                     with the mirror bump when center != 0.
    compact_bump:    amplitude * exp(1 - 1/(1-(r/width)^2)) inside r < width.
    polynomial_tail: amplitude * (1+r^2)^{-k/2}, the smooth even representative
                     of the (1+r)^{-k} tail class (plain (1+r)^{-k} is not even
                     at the origin).
    """

    family: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    center: float = 0.0
    tail_exponent: float = 3.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown data family {self.family!r}; choose from {FAMILIES}")
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.family == "polynomial_tail" and self.tail_exponent <= 0:
            raise ValueError("tail exponent must be positive")

    # value / first / second radial derivative of phi_0, vectorized over r
    def phi0(self, r):
        r = np.asarray(r, dtype=float)
        a, w, c = self.amplitude, self.width, self.center
        if self.family == "gaussian":
            out = a * np.exp(-(((r - c) / w) ** 2))
            if c != 0.0:
                out = out + a * np.exp(-(((r + c) / w) ** 2))
            return out
        if self.family == "compact_bump":
            s2 = np.clip((r / w) ** 2, 0.0, 1.0)
            inside = s2 < 1.0
            val = np.zeros_like(r)
            val[inside] = a * np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
            return val
        k = self.tail_exponent
        return a * (1.0 + r * r) ** (-k / 2.0)

    def dphi0(self, r):
        r = np.asarray(r, dtype=float)
        a, w, c = self.amplitude, self.width, self.center
        if self.family == "gaussian":
            out = a * np.exp(-(((r - c) / w) ** 2)) * (-2.0 * (r - c) / w**2)
            if c != 0.0:
                out = out + a * np.exp(-(((r + c) / w) ** 2)) * (-2.0 * (r + c) / w**2)
            return out
        if self.family == "compact_bump":
            s = r / w
            inside = s**2 < 1.0
            out = np.zeros_like(r)
            si = s[inside]
            g = 1.0 - si**2
            out[inside] = a * np.exp(1.0 - 1.0 / g) * (-2.0 * si / g**2) / w
            return out
        k = self.tail_exponent
        return -a * k * r * (1.0 + r * r) ** (-k / 2.0 - 1.0)

    def d2phi0(self, r):
        r = np.asarray(r, dtype=float)
        a, w, c = self.amplitude, self.width, self.center
        if self.family == "gaussian":
            x = (r - c) / w
            out = a * np.exp(-(x**2)) * (4.0 * x**2 - 2.0) / w**2
            if c != 0.0:
                y = (r + c) / w
                out = out + a * np.exp(-(y**2)) * (4.0 * y**2 - 2.0) / w**2
            return out
        if self.family == "compact_bump":
            s = r / w
            inside = s**2 < 1.0
            out = np.zeros_like(r)
            si = s[inside]
            g = 1.0 - si**2
            gp = -2.0 * si / g**2
            gpp = -2.0 / g**2 - 8.0 * si**2 / g**3
            out[inside] = a * np.exp(1.0 - 1.0 / g) * (gp**2 + gpp) / w**2
            return out
        k = self.tail_exponent
        q = (1.0 + r * r)
        return a * k * ((k + 2.0) * r * r * q ** (-k / 2.0 - 2.0) - q ** (-k / 2.0 - 1.0))


def _weighted_energy_quad(spec: InitialDataSpec, params: ModelParams, gamma: float, r_max: float):
    """Weighted energy of the analytic data by adaptive quadrature.

    Integrates over [0, r_max] plus doubling tail segments; rejects data whose
    weighted energy fails to converge under segment doubling (divergent tail).
    """
    area = unit_sphere_area(params.d)

    def integrand(r):
        grad2 = spec.dphi0(r) ** 2
        pot = 2.0 / (params.p + 1.0) * np.abs(spec.phi0(r)) ** (params.p + 1.0)
        return (1.0 + r) ** gamma * (grad2 + pot) * r ** (params.d - 1)

    total, _ = integrate.quad(integrand, 0.0, r_max, limit=400)
    if spec.family != "polynomial_tail":
        seg, _ = integrate.quad(integrand, r_max, 2.0 * r_max, limit=200)
        return total + seg
    segments = []
    lo = r_max
    for _ in range(3):
        seg, _ = integrate.quad(integrand, lo, 2.0 * lo, limit=200)
        segments.append(seg)
        lo *= 2.0
    if segments[-2] > 0.0:
        ratio = segments[-1] / segments[-2]
        if ratio >= 0.9:
            raise ValueError(
                f"weighted energy (gamma={gamma}) does not converge for tail exponent "
                f"k={spec.tail_exponent}: segment ratio {ratio:.3f} under doubling"
            )
        tail = segments[-1] * ratio / (1.0 - ratio)
    else:
        tail = 0.0
    return total + sum(segments) + tail


def make_initial_data(spec: InitialDataSpec, grid: Grid, params: ModelParams):
    """Populate the grid from the data family; report E_0 and E_{gamma0}.

    Returns (state, energies) with energies = {"E0": ..., "E_gamma0": ...},
    both computed by adaptive quadrature of the closed-form integrand
    (independent of the grid trapezoid used by the functionals module).
    """
    r = grid.r
    state = SolverState(0.0, grid, spec.phi0(r), np.zeros_like(r))
    if spec.amplitude == 0.0:
        return state, {"E0": 0.0, "E_gamma0": 0.0}
    area = unit_sphere_area(params.d)
    e0 = area * _weighted_energy_quad(spec, params, 0.0, grid.r_max)
    eg = area * _weighted_energy_quad(spec, params, params.gamma0, grid.r_max)
    return state, {"E0": e0, "E_gamma0": eg}


# -- spatial operator --------------------------------------------------------


LAPLACIAN_SWITCH_RADIUS = 1.0


class _Stencil:
    """Second-order centered radial Laplacian, hybrid near the origin.

    For r >= 1 the conservative flux form
        [r_{j+1/2}^{d-1}(phi_{j+1}-phi_j) - r_{j-1/2}^{d-1}(phi_j-phi_{j-1})] / (dr^2 r_j^{d-1})
    keeps the semi-discrete energy drift at the 1e-5 level; for 0 < r < 1 the
    pointwise form phi_rr + ((d-1)/r) phi_r is used instead (the flux form's
    truncation error at fixed node index j is O(1/j^2), which fails pointwise
    consistency in a dr-neighborhood of the origin).  The origin node carries
    the regular limit d * phi_rr(0) with even extension.
    """

    def __init__(self, grid: Grid, d: int):
        dr, r = grid.dr, grid.r
        self.j_sw = max(1, min(round(LAPLACIAN_SWITCH_RADIUS / dr), grid.n - 2))
        self.wp = np.zeros_like(r)
        self.wm = np.zeros_like(r)
        self.wp[1:-1] = (r[1:-1] + 0.5 * dr) ** (d - 1) / (dr * dr * r[1:-1] ** (d - 1))
        self.wm[1:-1] = (r[1:-1] - 0.5 * dr) ** (d - 1) / (dr * dr * r[1:-1] ** (d - 1))
        self.inv2 = 1.0 / (dr * dr)
        self.cr = np.zeros_like(r)
        self.cr[1:-1] = (d - 1.0) / (r[1:-1] * 2.0 * dr)
        self.origin = d * 2.0 / (dr * dr)

    def apply(self, phi: np.ndarray, out: np.ndarray) -> np.ndarray:
        j = self.j_sw
        out[j:-1] = self.wp[j:-1] * (phi[j + 1 :] - phi[j:-1]) - self.wm[j:-1] * (
            phi[j:-1] - phi[j - 1 : -2]
        )
        out[1:j] = (phi[2 : j + 1] - 2.0 * phi[1:j] + phi[: j - 1]) * self.inv2 + self.cr[1:j] * (
            phi[2 : j + 1] - phi[: j - 1]
        )
        out[0] = self.origin * (phi[1] - phi[0])
        out[-1] = 0.0
        return out


def _laplacian(phi: np.ndarray, grid: Grid, d: int, work: Optional[np.ndarray] = None) -> np.ndarray:
    out = np.zeros_like(phi) if work is None else work
    return _Stencil(grid, d).apply(phi, out)


def _nonlinearity(phi: np.ndarray, p: float) -> np.ndarray:
    """sign(phi)|phi|^p; exact zero at phi = 0."""
    return np.sign(phi) * np.abs(phi) ** p


def rhs(state: SolverState, params: ModelParams, nonlinearity_on: bool = True):
    """Time derivative of (phi, pi); nonlinearity_on=False gives the linear wave."""
    if not (np.isfinite(state.phi).all() and np.isfinite(state.pi).all()):
        raise BlowUpError(
            f"non-finite field at t={state.t}: max|phi|={np.nanmax(np.abs(state.phi))}"
        )
    lap = _laplacian(state.phi, state.grid, params.d)
    if nonlinearity_on:
        lap[:-1] -= _nonlinearity(state.phi[:-1], params.p)
    dphi = state.pi.copy()
    dphi[-1] = 0.0
    return dphi, lap


def first_radial_derivative(phi: np.ndarray, dr: float) -> np.ndarray:
    """Measurement-grade centered d/dr for the record (zero at r=0 by evenness).

    Fourth-order interior stencil with even extension across the origin; the
    probe must be more accurate than the evolution scheme so that energy-drift
    diagnostics see the scheme error, not the derivative reconstruction.
    """
    out = np.empty_like(phi)
    if len(phi) < 5:
        out[1:-1] = (phi[2:] - phi[:-2]) / (2.0 * dr)
        out[0] = 0.0
        out[-1] = (phi[-1] - phi[-2]) / dr
        return out
    out[2:-2] = (-phi[4:] + 8.0 * phi[3:-1] - 8.0 * phi[1:-3] + phi[:-4]) / (12.0 * dr)
    out[0] = 0.0
    out[1] = (-phi[3] + 8.0 * phi[2] - 8.0 * phi[0] + phi[1]) / (12.0 * dr)
    out[-2] = (phi[-1] - phi[-3]) / (2.0 * dr)
    out[-1] = (3.0 * phi[-1] - 4.0 * phi[-2] + phi[-3]) / (2.0 * dr)
    return out


def evolve(
    state: SolverState,
    params: ModelParams,
    dt: float,
    n_steps: int,
    record_every: int = 4,
    node_stride: int = 2,
    nonlinearity_on: bool = True,
    check_every: int = 16,
) -> tuple[SolverState, SpacetimeRecord]:
    """Advance n_steps of classical RK4; return the final state and the record.

    dt may be negative (the linear flow is time-reversible); |dt| <= 0.5*dr is
    enforced.  The record keeps every record_every-th step (plus the initial
    and final one) at every node_stride-th node.
    """
    grid = state.grid
    if abs(dt) > 0.5 * grid.dr * (1.0 + 1e-12):
        raise ValueError(f"CFL violation: |dt|={abs(dt)} exceeds 0.5*dr={0.5 * grid.dr}")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")

    stencil = _Stencil(grid, params.d)
    p = params.p
    phi = state.phi.copy()
    pi = state.pi.copy()
    lap = np.empty_like(phi)

    support = SolverState(state.t, grid, phi, pi).support_radius()
    taint_start = max(0.0, grid.r_max - support)

    n_rec = n_steps // record_every + 1 + (1 if n_steps % record_every else 0)
    r_rec = grid.r[::node_stride]
    times = np.empty(n_rec)
    phi_rec = np.empty((n_rec, len(r_rec)))
    pi_rec = np.empty((n_rec, len(r_rec)))
    dphi_rec = np.empty((n_rec, len(r_rec)))

    def snapshot(k, t):
        times[k] = t
        phi_rec[k] = phi[::node_stride]
        pi_rec[k] = pi[::node_stride]
        dphi_rec[k] = first_radial_derivative(phi, grid.dr)[::node_stride]

    def accel(f):
        stencil.apply(f, lap)
        if nonlinearity_on:
            lap[:-1] -= _nonlinearity(f[:-1], p)
        return lap

    snapshot(0, state.t)
    k = 1
    t = state.t
    for step in range(1, n_steps + 1):
        # classical RK4 on (phi, pi); outer node frozen
        a1 = accel(phi).copy()
        v1 = pi

        phi2 = phi + (0.5 * dt) * v1
        pi2 = pi + (0.5 * dt) * a1
        phi2[-1] = phi[-1]
        a2 = accel(phi2).copy()
        v2 = pi2

        phi3 = phi + (0.5 * dt) * v2
        pi3 = pi + (0.5 * dt) * a2
        phi3[-1] = phi[-1]
        a3 = accel(phi3).copy()
        v3 = pi3

        phi4 = phi + dt * v3
        pi4 = pi + dt * a3
        phi4[-1] = phi[-1]
        a4 = accel(phi4).copy()
        v4 = pi4

        new_phi = phi + (dt / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
        new_pi = pi + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        new_phi[-1] = phi[-1]
        new_pi[-1] = pi[-1]
        phi, pi = new_phi, new_pi
        t = state.t + step * dt

        if step % check_every == 0 or step == n_steps:
            m = np.abs(phi[::7]).max() if len(phi) > 7 else np.abs(phi).max()
            if not np.isfinite(m):
                raise BlowUpError(f"non-finite field at t={t} (step {step})")

        if step % record_every == 0 or step == n_steps:
            snapshot(k, t)
            k += 1

    if not (np.isfinite(phi).all() and np.isfinite(pi).all()):
        raise BlowUpError(f"non-finite field at t={t}")

    final = SolverState(t, grid, phi, pi)
    order = np.argsort(times[:k])
    record = SpacetimeRecord(
        times=times[:k][order],
        r=r_rec,
        phi=phi_rec[:k][order],
        dphi_dt=pi_rec[:k][order],
        dphi_dr=dphi_rec[:k][order],
        params=params,
        dr=grid.dr,
        r_max=grid.r_max,
        taint_start=taint_start,
        support_radius=support,
        nonlinearity_on=nonlinearity_on,
    )
    return final, record


# -- persistence -------------------------------------------------------------


def save_checkpoint(state: SolverState, params: ModelParams, path) -> None:
    """Versioned textual dump: header (d, p, gamma0, epsilon, t, dr, r_max), then node rows."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"wavedecay-checkpoint {CHECKPOINT_VERSION}\n")
        f.write(
            f"d={params.d} p={params.p!r} gamma0={params.gamma0!r} epsilon={params.epsilon!r}\n"
        )
        f.write(f"t={state.t!r} dr={state.grid.dr!r} r_max={state.grid.r_max!r} n={state.grid.n}\n")
        f.write("r phi pi\n")
        for r, ph, pp in zip(state.grid.r, state.phi, state.pi):
            f.write(f"{r:.17g} {ph:.17g} {pp:.17g}\n")


def load_checkpoint(path) -> tuple[SolverState, ModelParams]:
    with open(path, "r", encoding="utf-8") as f:
        magic = f.readline().split()
        if magic[:1] != ["wavedecay-checkpoint"] or int(magic[1]) != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint header: {' '.join(magic)}")
        hdr1 = dict(kv.split("=") for kv in f.readline().split())
        hdr2 = dict(kv.split("=") for kv in f.readline().split())
        f.readline()
        data = np.loadtxt(f)
    params = ModelParams(
        d=int(hdr1["d"]),
        p=float(hdr1["p"]),
        gamma0=float(hdr1["gamma0"]),
        epsilon=float(hdr1["epsilon"]),
    )
    grid = Grid(float(hdr2["dr"]), float(hdr2["r_max"]))
    data = np.atleast_2d(data)
    state = SolverState(float(hdr2["t"]), grid, data[:, 1].copy(), data[:, 2].copy())
    return state, params


def export_record_csv(record: SpacetimeRecord, path, time_stride: int = 1, node_stride: int = 1) -> None:
    """CSV dump with columns t, r, phi, dphi_dt, dphi_dr (row-major over t then r)."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("t,r,phi,dphi_dt,dphi_dr\n")
        for k in range(0, len(record.times), time_stride):
            t = record.times[k]
            for j in range(0, len(record.r), node_stride):
                f.write(
                    f"{t:.17g},{record.r[j]:.17g},{record.phi[k, j]:.17g},"
                    f"{record.dphi_dt[k, j]:.17g},{record.dphi_dr[k, j]:.17g}\n"
                )


def save_record(record: SpacetimeRecord, path) -> None:
    np.savez_compressed(
        path,
        schema_version=RECORD_SCHEMA_VERSION,
        times=record.times,
        r=record.r,
        phi=record.phi,
        dphi_dt=record.dphi_dt,
        dphi_dr=record.dphi_dr,
        d=record.params.d,
        p=record.params.p,
        gamma0=record.params.gamma0,
        epsilon=record.params.epsilon,
        dr=record.dr,
        r_max=record.r_max,
        taint_start=record.taint_start,
        support_radius=record.support_radius,
        nonlinearity_on=record.nonlinearity_on,
    )


def load_record(path) -> SpacetimeRecord:
    with np.load(path) as z:
        if int(z["schema_version"]) != RECORD_SCHEMA_VERSION:
            raise ValueError(f"unsupported record schema version {z['schema_version']}")
        params = ModelParams(
            d=int(z["d"]), p=float(z["p"]), gamma0=float(z["gamma0"]), epsilon=float(z["epsilon"])
        )
        return SpacetimeRecord(
            times=z["times"],
            r=z["r"],
            phi=z["phi"],
            dphi_dt=z["dphi_dt"],
            dphi_dr=z["dphi_dr"],
            params=params,
            dr=float(z["dr"]),
            r_max=float(z["r_max"]),
            taint_start=float(z["taint_start"]),
            support_radius=float(z["support_radius"]),
            nonlinearity_on=bool(z["nonlinearity_on"]),
        )
