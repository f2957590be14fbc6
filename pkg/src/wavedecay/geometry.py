"""Null coordinates, foliation slices, and quadrature over a spacetime record.

Conventions (fixed once here, used everywhere):
  u = (t - r)/2, v = (t + r)/2, so t = u + v and r = v - u.
  L = d_t + d_r (outgoing), Lbar = d_t - d_r (incoming).
  Slice measures: area(S^{d-1}) * r^w * (dr | dv | du) with w = d-1 unless a
  caller overrides the radial weight exponent; region measure dx dt.
  Outgoing cones H_u and incoming cones Hbar_v carry |x| >= 2; the hybrid leaf
  Sigma_u glues the ball {r <= 2, t = 2u+2} to H_u for u >= -1 and equals H_u
  for u < -1.

Every sampled point must lie in the causally untainted part of the record:
r <= r_max - max(0, t - taint_start).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import unit_sphere_area
from .solver import SpacetimeRecord

__all__ = [
    "CoverageError",
    "SliceSpec",
    "RegionSpec",
    "SliceSamples",
    "tr_to_uv",
    "uv_to_tr",
    "safe_inverse_r",
    "sample_slice",
    "slice_segments",
    "integrate_slice",
    "integrate_region",
]

BALL_RADIUS = 2.0  # |x| bound of the hybrid leaf's spatial ball / inner cone cutoff


class CoverageError(ValueError):
    """Requested coordinates fall outside the record's causally clean coverage."""


def tr_to_uv(t, r):
    return 0.5 * (np.asarray(t) - np.asarray(r)), 0.5 * (np.asarray(t) + np.asarray(r))


def uv_to_tr(u, v):
    return np.asarray(u) + np.asarray(v), np.asarray(v) - np.asarray(u)


def safe_inverse_r(r):
    """1/r with the origin node mapped to 0 (the r^{d-1} measure kills it for d >= 3)."""
    r = np.asarray(r, dtype=float)
    return np.where(r > 0.0, 1.0 / np.where(r > 0.0, r, 1.0), 0.0)


@dataclass(frozen=True)
class SliceSpec:
    """One hypersurface: kind in {time_slice, outgoing_null, incoming_null, hybrid_sigma}.

    `value` is t, u, v, u respectively; lo/hi truncate the complementary
    coordinate (r on time slices, v on H_u, u on Hbar_v, v on hybrid leaves).
    Unspecified bounds default to the slice's natural extent clipped to the
    record's untainted coverage; explicit bounds beyond coverage are errors.
    """

    kind: str
    value: float
    lo: Optional[float] = None
    hi: Optional[float] = None

    KINDS = ("time_slice", "outgoing_null", "incoming_null", "hybrid_sigma")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown slice kind {self.kind!r}; choose from {self.KINDS}")

    @staticmethod
    def time(t, lo=None, hi=None):
        return SliceSpec("time_slice", t, lo, hi)

    @staticmethod
    def outgoing(u, lo=None, hi=None):
        return SliceSpec("outgoing_null", u, lo, hi)

    @staticmethod
    def incoming(v, lo=None, hi=None):
        return SliceSpec("incoming_null", v, lo, hi)

    @staticmethod
    def hybrid(u, hi=None):
        return SliceSpec("hybrid_sigma", u, None, hi)


@dataclass(frozen=True)
class RegionSpec:
    """Spacetime region: slab(t1, t2) (optionally capped at r <= r_cap) or the
    foliation region D_{u1,u2}^{v0} swept by the leaves Sigma_u, u in [u1, u2].

    Exterior regions are foliation regions with u2 <= -1; mixed u-ranges that
    straddle u = -1 are rejected (the leaves change shape there).
    """

    kind: str
    t1: float = 0.0
    t2: float = 0.0
    u1: float = 0.0
    u2: float = 0.0
    v0: Optional[float] = None
    r_cap: Optional[float] = None

    @staticmethod
    def slab(t1: float, t2: float, r_cap: Optional[float] = None) -> "RegionSpec":
        if not t1 < t2:
            raise ValueError(f"empty slab [{t1}, {t2}]")
        return RegionSpec("slab", t1=t1, t2=t2, r_cap=r_cap)

    @staticmethod
    def foliation(u1: float, u2: float, v0: Optional[float] = None) -> "RegionSpec":
        if not u1 < u2:
            raise ValueError(f"empty foliation region: u1={u1} >= u2={u2}")
        if not (u2 <= -1.0 or u1 >= -1.0):
            raise ValueError("foliation region must lie in the interior (u >= -1) or exterior (u <= -1)")
        if v0 is not None and v0 < u2 + BALL_RADIUS and u1 >= -1.0:
            raise ValueError(f"v0={v0} must be >= u2 + {BALL_RADIUS} so the cap clears the ball part")
        return RegionSpec("foliation", u1=u1, u2=u2, v0=v0)


@dataclass
class SliceSamples:
    """Field samples along one homogeneous slice segment.

    `param` is the integration coordinate (r, v, or u per kind); Lphi and
    Lbar_phi are the outgoing/incoming null derivatives; the angular gradient
    vanishes identically in radial symmetry.
    """

    kind: str
    param: np.ndarray
    t: np.ndarray
    r: np.ndarray
    phi: np.ndarray
    dphi_dt: np.ndarray
    dphi_dr: np.ndarray

    @property
    def lphi(self) -> np.ndarray:
        return self.dphi_dt + self.dphi_dr

    @property
    def lbar_phi(self) -> np.ndarray:
        return self.dphi_dt - self.dphi_dr


# -- record interpolation -----------------------------------------------------


class _Interp:
    """Bilinear (t, r) interpolation over the record lattice with taint checks."""

    def __init__(self, record: SpacetimeRecord):
        self.rec = record
        self.times = record.times
        self.r = record.r
        self.dr_rec = float(record.r[1] - record.r[0]) if len(record.r) > 1 else record.dr
        diffs = np.diff(record.times)
        self.dt_rec = float(np.median(diffs)) if len(diffs) else record.dr

    def coverage_violations(self, t, r):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        tol = 1e-9 * max(1.0, self.rec.t_max)
        bad = (t < -tol) | (t > self.rec.t_max + tol) | (r < -tol) | (r > self.r[-1] + tol)
        bad |= r > self.rec.untainted_radius(t) + tol
        return bad

    def require_coverage(self, t, r, what: str):
        bad = self.coverage_violations(t, r)
        if np.any(bad):
            tb = np.asarray(t, dtype=float)[bad]
            rb = np.asarray(r, dtype=float)[bad]
            raise CoverageError(
                f"{what} leaves the untainted record coverage: offending t in "
                f"[{tb.min():.6g}, {tb.max():.6g}], r in [{rb.min():.6g}, {rb.max():.6g}] "
                f"(record: t <= {self.rec.t_max:.6g}, r <= {self.r[-1]:.6g}, "
                f"taint front from t = {self.rec.taint_start:.6g})"
            )

    @staticmethod
    def _cubic_weights(s: np.ndarray) -> tuple:
        """Lagrange cubic weights on stencil offsets (-1, 0, 1, 2) at fraction s."""
        w_m1 = -s * (s - 1.0) * (s - 2.0) / 6.0
        w_0 = (s * s - 1.0) * (s - 2.0) / 2.0
        w_1 = -s * (s + 1.0) * (s - 2.0) / 2.0
        w_2 = s * (s * s - 1.0) / 6.0
        return w_m1, w_0, w_1, w_2

    def __call__(self, t, r):
        """Bicubic (tensor Lagrange) interpolation, bilinear at lattice edges."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        r = np.atleast_1d(np.asarray(r, dtype=float))
        nt, nr = len(self.times), len(self.r)
        it = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, nt - 2)
        wt = np.clip((t - self.times[it]) / (self.times[it + 1] - self.times[it]), 0.0, 1.0)
        ir = np.clip(np.searchsorted(self.r, r, side="right") - 1, 0, nr - 2)
        wr = np.clip((r - self.r[ir]) / (self.r[ir + 1] - self.r[ir]), 0.0, 1.0)

        cubic = None
        if nt >= 4 and nr >= 4:
            # exact lattice points need no correction; stay clear of lattice edges
            cubic = ((wt > 0.0) | (wr > 0.0)) & (it >= 1) & (it <= nt - 3) & (ir >= 1) & (ir <= nr - 3)

        out = []
        for slab in (self.rec.phi, self.rec.dphi_dt, self.rec.dphi_dr):
            f00 = slab[it, ir]
            f01 = slab[it, ir + 1]
            f10 = slab[it + 1, ir]
            f11 = slab[it + 1, ir + 1]
            val = (1 - wt) * ((1 - wr) * f00 + wr * f01) + wt * ((1 - wr) * f10 + wr * f11)
            if cubic is not None and np.any(cubic):
                itc, irc = it[cubic], ir[cubic]
                tw = self._cubic_weights(wt[cubic])
                rw = self._cubic_weights(wr[cubic])
                acc = np.zeros_like(val[cubic])
                for a, twa in zip((-1, 0, 1, 2), tw):
                    row = np.zeros_like(acc)
                    for b, rwb in zip((-1, 0, 1, 2), rw):
                        row += rwb * slab[itc + a, irc + b]
                    acc += twa * row
                val = val.copy()
                val[cubic] = acc
            out.append(val)
        return out


def _grid_points(lo: float, hi: float, anchor: np.ndarray) -> np.ndarray:
    """Anchor-aligned sample points covering [lo, hi] with exact endpoints."""
    inside = anchor[(anchor > lo) & (anchor < hi)]
    return np.concatenate(([lo], inside, [hi]))


def _uniform_points(lo: float, hi: float, h: float) -> np.ndarray:
    n = max(2, int(np.ceil((hi - lo) / h)) + 1)
    return np.linspace(lo, hi, n)


# -- slice sampling -----------------------------------------------------------


def _resolve_bounds(kind, value, lo, hi, interp: _Interp):
    """Natural (auto-truncated) parameter bounds; validate explicit ones."""
    rec = interp.rec
    t_max, r_cov, t_b, r_max = rec.t_max, float(rec.r[-1]), rec.taint_start, rec.r_max

    if kind == "time_slice":
        t = value
        if not (0.0 <= t <= t_max + 1e-12):
            raise CoverageError(f"time slice t={t} outside record [0, {t_max:.6g}]")
        auto_lo, auto_hi = 0.0, min(r_cov, float(rec.untainted_radius(t)))
    elif kind == "outgoing_null":
        u = value
        auto_lo = max(u + BALL_RADIUS, -u)
        cand = min(t_max - u, r_cov + u)
        if u + cand > t_b:
            cand = min(cand, 0.5 * (r_max + t_b))
        auto_hi = cand
    elif kind == "incoming_null":
        v = value
        auto_lo = max(-v, v - r_cov)
        auto_hi = min(v - BALL_RADIUS, t_max - v)
        if 2.0 * v > r_max + t_b:
            auto_hi = min(auto_hi, t_b - v)
    else:
        raise ValueError(kind)

    out_lo = auto_lo if lo is None else float(lo)
    out_hi = auto_hi if hi is None else float(hi)
    tol = 1e-9 * max(1.0, abs(auto_hi), abs(auto_lo))
    if out_lo < auto_lo - tol or out_hi > auto_hi + tol:
        raise CoverageError(
            f"{kind}({value}) bounds [{out_lo:.6g}, {out_hi:.6g}] exceed the covered "
            f"range [{auto_lo:.6g}, {auto_hi:.6g}]"
        )
    if not out_lo < out_hi:
        raise CoverageError(
            f"{kind}({value}) is empty within coverage: [{out_lo:.6g}, {out_hi:.6g}]"
        )
    return out_lo, out_hi


def slice_segments(record: SpacetimeRecord, slc: SliceSpec) -> list[SliceSamples]:
    """Sample a slice into homogeneous segments (hybrid leaves yield two)."""
    interp = _Interp(record)

    def build(kind, value, lo, hi) -> SliceSamples:
        lo, hi = _resolve_bounds(kind, value, lo, hi, interp)
        if kind == "time_slice":
            param = _grid_points(lo, hi, interp.r)
            t = np.full_like(param, value)
            r = param
        elif kind == "outgoing_null":
            h = min(interp.dr_rec, interp.dt_rec)
            param = _uniform_points(lo, hi, h)
            t = value + param
            r = param - value
        else:  # incoming_null
            h = min(interp.dr_rec, interp.dt_rec)
            param = _uniform_points(lo, hi, h)
            t = param + value
            r = value - param
        interp.require_coverage(t, r, f"{kind}({value})")
        phi, dpt, dpr = interp(t, r)
        return SliceSamples(kind, param, t, r, phi, dpt, dpr)

    if slc.kind == "hybrid_sigma":
        u = slc.value
        if u < -1.0:
            return [build("outgoing_null", u, None, slc.hi)]
        t_ball = 2.0 * u + BALL_RADIUS
        ball = build("time_slice", t_ball, 0.0, BALL_RADIUS)
        cone = build("outgoing_null", u, None, slc.hi)
        return [ball, cone]
    return [build(slc.kind, slc.value, slc.lo, slc.hi)]


def sample_slice(record: SpacetimeRecord, slc: SliceSpec) -> SliceSamples:
    """Single-segment sampling (hybrid leaves: use slice_segments)."""
    segs = slice_segments(record, slc)
    if len(segs) != 1:
        raise ValueError("hybrid_sigma slices have two segments; use slice_segments")
    return segs[0]


ORIGIN_PRODUCT_RADIUS = 1.0


def _trapezoid_origin_aware(y: np.ndarray, x: np.ndarray, alpha: Optional[float]) -> float:
    """Trapezoid, upgraded to product integration near r = 0 for y ~ r^alpha.

    A fractional power law r^alpha at the origin makes the composite trapezoid
    rule O(h^{1+alpha}) through all early cells (the second derivative of
    r^alpha is non-integrable).  Writing y = r^alpha g(r) and integrating the
    exact moments of r^alpha against piecewise-linear g out to a fixed radius
    restores order >= 2.
    """
    if alpha is None or len(x) < 2 or x[0] > 1e-14:
        return float(np.trapezoid(y, x))
    cut = min(ORIGIN_PRODUCT_RADIUS, x[-1])
    last = max(1, min(int(np.searchsorted(x, cut)), len(x) - 1))  # last product node
    total = float(np.trapezoid(y[last:], x[last:])) if last < len(x) - 1 else 0.0
    # cells [x_k, x_{k+1}], k < last, via exact moments of r^alpha against linear g
    xa, xb = x[:last], x[1 : last + 1]
    ya, yb = y[:last], y[1 : last + 1]
    gb = yb / xb**alpha
    ga = np.where(xa > 0.0, ya / np.where(xa > 0.0, xa, 1.0) ** alpha, gb)
    m0 = (xb ** (alpha + 1.0) - xa ** (alpha + 1.0)) / (alpha + 1.0)
    m1 = (xb ** (alpha + 2.0) - xa ** (alpha + 2.0)) / (alpha + 2.0)
    slope = (gb - ga) / (xb - xa)
    total += float(np.sum(ga * m0 + slope * (m1 - xa * m0)))
    return total


def integrate_slice(
    record: SpacetimeRecord,
    slc: SliceSpec,
    density: Callable[[SliceSamples], np.ndarray],
    weight_exponent: Optional[float] = None,
    origin_exponent: Optional[float] = None,
) -> float:
    """Trapezoid of density * area(S^{d-1}) * r^w over the slice parameter.

    w defaults to d-1 (the geometric measure); callers may override, e.g. with
    a null-flux weight r^gamma for radiation-field fluxes.  `origin_exponent`
    declares a fractional power law of the weighted integrand at r = 0 (time
    slices only) so the first cell is integrated exactly.
    """
    d = record.params.d
    w = float(d - 1) if weight_exponent is None else float(weight_exponent)
    area = unit_sphere_area(d)
    total = 0.0
    for seg in slice_segments(record, slc):
        f = np.asarray(density(seg), dtype=float)
        rw = seg.r**w if w != 0.0 else np.ones_like(seg.r)
        alpha = origin_exponent if seg.kind == "time_slice" else None
        total += area * _trapezoid_origin_aware(f * rw, seg.param, alpha)
    return total


# -- region integration --------------------------------------------------------


def _region_sections(record: SpacetimeRecord, region: RegionSpec, interp: _Interp):
    """Time breakpoints and per-time radial interval of the region."""
    rec = record
    r_cov = float(rec.r[-1])

    if region.kind == "slab":
        t1, t2 = region.t1, region.t2
        if t1 < -1e-12 or t2 > rec.t_max + 1e-9 * max(1.0, rec.t_max):
            raise CoverageError(f"slab [{t1}, {t2}] outside record t-range [0, {rec.t_max:.6g}]")

        def r_interval(t):
            hi = min(r_cov, float(rec.untainted_radius(t)))
            if region.r_cap is not None:
                hi = min(hi, region.r_cap)
            return 0.0, hi

        breakpoints = {t1, t2, rec.taint_start}
        return t1, t2, r_interval, breakpoints

    u1, u2, v0 = region.u1, region.u2, region.v0
    if u1 >= -1.0:
        t_start = 2.0 * u1 + BALL_RADIUS
        t_stop = u2 + v0 if v0 is not None else rec.t_max

        def r_interval(t):
            lo = 0.0 if t <= 2.0 * u2 + BALL_RADIUS else t - 2.0 * u2
            hi = t - 2.0 * u1
            if v0 is not None:
                hi = min(hi, 2.0 * v0 - t)
            hi = min(hi, r_cov, float(rec.untainted_radius(t)))
            return lo, hi

        breakpoints = {t_start, t_stop, 2.0 * u2 + BALL_RADIUS, rec.taint_start}
    else:
        v0_eff = v0 if v0 is not None else -u1
        t_start = 0.0
        t_stop = u2 + v0_eff

        def r_interval(t):
            lo = t - 2.0 * u2
            hi = min(t - 2.0 * u1, 2.0 * v0_eff - t, r_cov, float(rec.untainted_radius(t)))
            return lo, hi

        breakpoints = {t_start, t_stop, rec.taint_start}

    t_stop = min(t_stop, rec.t_max)
    if v0 is not None and region.kind == "foliation":
        explicit_stop = (u2 + v0) if u1 >= -1.0 else (u2 + v0)
        if explicit_stop > rec.t_max + 1e-9 * max(1.0, rec.t_max):
            raise CoverageError(
                f"foliation region needs t up to {explicit_stop:.6g}, record ends at {rec.t_max:.6g}"
            )
    if not t_start < t_stop:
        raise CoverageError(f"region starts at t={t_start:.6g}, beyond record end {rec.t_max:.6g}")
    return t_start, t_stop, r_interval, breakpoints


def integrate_region(
    record: SpacetimeRecord,
    region: RegionSpec,
    density: Callable[[SliceSamples], np.ndarray],
    origin_exponent: Optional[float] = None,
) -> float:
    """Iterated trapezoid of density over the region with measure dx dt.

    Radial sections are taken at every record time inside the region plus the
    exact region boundaries and limit breakpoints; section endpoints are
    interpolated so partial cells are clipped linearly.  `origin_exponent`
    declares a fractional power law of the weighted integrand at r = 0.
    """
    interp = _Interp(record)
    d = record.params.d
    area = unit_sphere_area(d)
    t_start, t_stop, r_interval, breaks = _region_sections(record, region, interp)

    ts = record.times[(record.times > t_start) & (record.times < t_stop)]
    extra = np.array([b for b in breaks if t_start <= b <= t_stop])
    ts = np.unique(np.concatenate((ts, extra, [t_start, t_stop])))

    sections = np.zeros_like(ts)
    for k, t in enumerate(ts):
        lo, hi = r_interval(t)
        if hi - lo <= 1e-12:
            sections[k] = 0.0
            continue
        r = _grid_points(lo, hi, interp.r)
        tt = np.full_like(r, t)
        interp.require_coverage(tt, r, f"{region.kind} region section at t={t:.6g}")
        phi, dpt, dpr = interp(tt, r)
        seg = SliceSamples("time_slice", r, tt, r, phi, dpt, dpr)
        f = np.asarray(density(seg), dtype=float)
        sections[k] = area * _trapezoid_origin_aware(f * r ** (d - 1), r, origin_exponent)
    return float(np.trapezoid(sections, ts))
