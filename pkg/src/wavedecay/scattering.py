"""Scattering diagnostics: linear propagation, d'Alembert oracle, Cauchy test.

The scattering claim is verified as a Cauchy criterion: pulling the nonlinear
solution back through the linear propagator, successive pullbacks must
converge in the energy norm.  The limit object itself is never constructed.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np
from scipy import integrate as _si

from .model import ModelParams, unit_sphere_area
from .solver import (
    Grid,
    InitialDataSpec,
    SolverState,
    SpacetimeRecord,
    evolve,
    first_radial_derivative,
)

__all__ = [
    "linear_propagate",
    "dalembert_oracle_d3",
    "scatter_cauchy",
    "energy_norm_difference",
    "sobolev_norm_radial_d3",
]

DEFAULT_CFL = 0.4


def linear_propagate(
    state: SolverState, t_target: float, params: ModelParams, cfl: float = DEFAULT_CFL
) -> SolverState:
    """Evolve (forward or backward) under the linear flow to t_target.

    The linear wave equation is time reversible, so backward propagation just
    runs the same scheme with a negative step.  Rejected when the support
    would reach the outer boundary during the flight.
    """
    span = t_target - state.t
    if span == 0.0:
        return state.copy()
    reach = state.support_radius() + abs(span)
    if reach > state.grid.r_max:
        raise ValueError(
            f"linear propagation over |dt|={abs(span):.6g} needs r_max >= {reach:.6g}, "
            f"grid has {state.grid.r_max:.6g}"
        )
    n_steps = max(1, math.ceil(abs(span) / (cfl * state.grid.dr)))
    dt = span / n_steps
    final, _ = evolve(
        state, params, dt, n_steps, record_every=10**9, node_stride=1, nonlinearity_on=False
    )
    return final


def _odd_antiderivative(phi1: Callable, s_max: float, ds: float):
    """K(s) = int_0^s x*phi1(x) dx on a dense grid; K is even since x*phi1(|x|) is odd."""
    s = np.arange(0.0, s_max + ds, ds)
    h = s * phi1(s)
    k = _si.cumulative_simpson(h, x=s, initial=0.0)
    return s, k


def dalembert_oracle_d3(
    data: InitialDataSpec,
    t: float,
    grid: Grid,
    phi1: Optional[Callable] = None,
    dphi1: Optional[Callable] = None,
):
    """Exact linear solution in d = 3 via the d'Alembert formula for r*phi.

    (r phi)(t, r) = [G(r+t) + G(r-t)]/2 + (1/2) int_{r-t}^{r+t} s phi1(|s|) ds
    with G(s) = s phi0(|s|) the odd extension.  Returns (phi, dphi_dt) sampled
    on the grid; the origin value is the limit G'(t) + t phi1(t).
    """
    r = grid.r
    s_plus = r + t
    s_minus = r - t

    def G(s):
        return s * data.phi0(np.abs(s))

    def Gp(s):
        a = np.abs(s)
        return data.phi0(a) + a * data.dphi0(a)

    def Gpp(s):
        a = np.abs(s)
        return np.sign(s) * (2.0 * data.dphi0(a) + a * data.d2phi0(a))

    rphi = 0.5 * (G(s_plus) + G(s_minus))
    rpi = 0.5 * (Gp(s_plus) - Gp(s_minus))

    if phi1 is not None:
        s_grid, K = _odd_antiderivative(phi1, float(np.max(np.abs(s_plus))) + 1.0, grid.dr / 16.0)
        k_plus = np.interp(np.abs(s_plus), s_grid, K)
        k_minus = np.interp(np.abs(s_minus), s_grid, K)
        rphi = rphi + 0.5 * (k_plus - k_minus)
        H = lambda s: s * phi1(np.abs(s))
        rpi = rpi + 0.5 * (H(s_plus) + H(s_minus))

    phi = np.empty_like(r)
    pi = np.empty_like(r)
    phi[1:] = rphi[1:] / r[1:]
    pi[1:] = rpi[1:] / r[1:]
    phi[0] = Gp(np.array([t]))[0] + (t * phi1(np.array([t]))[0] if phi1 is not None else 0.0)
    pi[0] = Gpp(np.array([t]))[0]
    if phi1 is not None:
        pi[0] += phi1(np.array([t]))[0] + t * (
            dphi1(np.array([t]))[0] if dphi1 is not None else 0.0
        )
    return phi, pi


def energy_norm_difference(a: SolverState, b: SolverState, params: ModelParams) -> float:
    """Hdot^1 x L^2 distance between two states on the same grid."""
    if a.grid != b.grid:
        raise ValueError("states live on different grids")
    r = a.grid.r
    dphi = first_radial_derivative(a.phi - b.phi, a.grid.dr)
    dens = dphi**2 + (a.pi - b.pi) ** 2
    return math.sqrt(
        unit_sphere_area(params.d) * float(np.trapezoid(dens * r ** (params.d - 1), r))
    )


def scatter_cauchy(
    record: SpacetimeRecord, t1: float, t2: float, params: Optional[ModelParams] = None
) -> float:
    """Energy-norm gap between the linear pullbacks to t = 0 of the states at t1, t2.

    Decay of this gap along t -> (t, 2t) pairs is the checkable content of the
    scattering claim.
    """
    params = params or record.params
    if t2 < t1:
        t1, t2 = t2, t1
    s1 = record.state_at(t1)
    if t1 == t2:
        return 0.0
    s2 = record.state_at(t2)
    for s in (s1, s2):
        reach = s.support_radius() + s.t
        if reach > record.r_max:
            raise ValueError(
                f"backward linear evolution from t={s.t:.6g} needs r_max >= {reach:.6g} "
                f"(grid has {record.r_max:.6g})"
            )
    w1 = linear_propagate(s1, 0.0, params)
    w2 = linear_propagate(s2, 0.0, params)
    return energy_norm_difference(w2, w1, params)


def sobolev_norm_radial_d3(
    state: SolverState,
    s: float,
    component: str = "phi",
    n_rho: Optional[int] = None,
) -> float:
    """Homogeneous Sobolev norm |field|_{Hdot^s} for radial data in d = 3.

    Computed through the radial Fourier (sine) transform
        fhat(rho) = (4 pi / rho) int_0^inf r f(r) sin(r rho) dr,
        |f|_{Hdot^s}^2 = (2 pi)^{-3} * 4 pi * int_0^inf |fhat|^2 rho^{2s+2} drho,
    by trapezoid quadrature on the grid and a Nyquist-truncated rho grid.
    Valid for -1 < s <= 1 (the pair norm's second component runs at s-1 on
    dphi/dt); data must have decayed at the outer boundary.
    """
    if state.grid.n < 8:
        raise ValueError("grid too small for the transform")
    if not (-1.0 < s <= 1.0):
        raise ValueError(f"transform valid for -1 < s <= 1, got s={s}")
    f = state.phi if component == "phi" else state.pi
    scale = float(np.max(np.abs(f)))
    if scale > 0.0:
        tail = float(np.max(np.abs(f[int(0.95 * len(f)) :])))
        if tail > 1e-8 * scale:
            raise ValueError(
                f"data has not decayed at r_max ({tail:.3g} vs max {scale:.3g}); "
                "transform truncation invalid"
            )
    r = state.grid.r
    dr = state.grid.dr
    rho_max = math.pi / dr
    n_rho = n_rho or 4 * state.grid.n
    rho = np.linspace(0.0, rho_max, n_rho)

    # g(rho) = rho * fhat(rho) = 4 pi int r f sin(r rho) dr, regular at rho = 0;
    # |f|^2 integrand becomes g^2 rho^{2s}, which vanishes at rho = 0 for s > -1.
    weights = r * f * dr
    weights[-1] *= 0.5  # trapezoid end (the origin term carries weight 0 anyway)
    g = np.empty_like(rho)
    chunk = max(1, 2**22 // state.grid.n)
    for k in range(0, n_rho, chunk):
        g[k : k + chunk] = np.sin(np.outer(rho[k : k + chunk], r)) @ weights
    g *= 4.0 * math.pi

    integrand = g**2 * np.where(rho > 0.0, rho, 1.0) ** (2.0 * s)
    integrand[0] = 0.0
    norm2 = (2.0 * math.pi) ** (-3) * 4.0 * math.pi * float(np.trapezoid(integrand, rho))
    return math.sqrt(norm2)
