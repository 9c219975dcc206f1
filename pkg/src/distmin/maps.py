"""Discrete diffeomorphisms, pullback metrics and flows of time-dependent fields.

A map between closed curves is stored as a *lift*: the target arc-length
position ``u(s)`` of each source vertex, unrolled so that ``u`` is a real
function on ``[0, L_M]`` with ``u(L_M) - u(0) = +/- L_N``.  Between knots the
lift is linear, so the map sends each source segment to an arc of the target
at constant speed ``u'``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainMismatchError,
    FlowFoldError,
    InvalidMapError,
    InvalidParameterError,
)
from .geometry import EPS_GEOM, ClosedCurve, SurfaceMesh, _frozen

EPS_MONO = 1e-9
DEFAULT_DT = 1e-3


class FlowProjectionWarning(RuntimeWarning):
    """A time-one map needed monotone re-projection of nearly crossing knots."""


def project_increments(d: np.ndarray, total: float, floor: float, rounds: int = 50) -> np.ndarray:
    """Clamp increments to ``>= floor`` and rescale the free ones to sum to ``total``.

    Alternates until no new increment needs clamping.  ``total`` and ``d`` are
    assumed positive (flip signs for orientation-reversing lifts first).
    """
    d = np.array(d, dtype=float)
    if floor * len(d) >= total:
        raise InvalidMapError("monotonicity floor leaves no room for the endpoint condition")
    clamped = np.zeros(len(d), dtype=bool)
    for _ in range(rounds):
        clamped |= d < floor
        d[clamped] = floor
        free = ~clamped
        rest = total - floor * np.count_nonzero(clamped)
        s = np.sum(d[free])
        if s <= 0.0:
            d[free] = rest / np.count_nonzero(free)
        else:
            d[free] *= rest / s
        if not np.any(d[free] < floor):
            break
    return d


def same_curve(a: ClosedCurve, b: ClosedCurve) -> bool:
    return a is b or (a.vertices.shape == b.vertices.shape and np.array_equal(a.vertices, b.vertices))


class CurveMap:
    """Circle map ``h: M -> N`` given by its lift at the source arc-length knots.

    ``monotone=False`` admits smooth maps that fold back on themselves (the
    orientation-preserving maps of non-maximal rank used by the wrapping
    construction); such maps keep the degree condition but are not
    diffeomorphisms, and cannot be inverted.
    """

    def __init__(self, source: ClosedCurve, target: ClosedCurve, lift, orientation: int | None = None,
                 *, monotone: bool = True):
        u = np.asarray(lift, dtype=float)
        if u.shape != (len(source) + 1,):
            raise InvalidMapError(f"lift needs {len(source) + 1} samples (one per source knot), got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise InvalidMapError("lift values must be finite")
        L_N = target.length
        span = u[-1] - u[0]
        if orientation is None:
            orientation = 1 if span > 0 else -1
        if orientation not in (1, -1):
            raise InvalidMapError(f"orientation must be +1 or -1, got {orientation}")
        scale = max(L_N, float(np.max(np.abs(u))))
        if abs(span - orientation * L_N) > 1e-10 * scale:
            raise InvalidMapError(
                f"lift endpoint condition violated: u(L_M) - u(0) = {span!r}, expected {orientation * L_N!r}"
            )
        if monotone:
            inc = orientation * np.diff(u)
            bad = np.flatnonzero(inc <= EPS_MONO * L_N)
            if len(bad):
                raise InvalidMapError(f"lift not strictly monotone at segment {int(bad[0])}")
        self.source = source
        self.target = target
        self.lift = _frozen(u)
        self.orientation = int(orientation)
        self.monotone = monotone

    def __repr__(self) -> str:
        return (f"CurveMap(n={len(self.source)}, L_M={self.source.length:.6g}, "
                f"L_N={self.target.length:.6g}, orientation={self.orientation:+d})")

    @property
    def slopes(self) -> np.ndarray:
        """Per-segment lift slope ``u'`` (signed)."""
        return np.diff(self.lift) / np.diff(self.source.arc_table)

    def lift_at(self, s) -> np.ndarray:
        """Evaluate the lift at arbitrary real source positions (periodic extension)."""
        s = np.asarray(s, dtype=float)
        L_M = self.source.length
        k = np.floor(s / L_M)
        s0 = s - k * L_M
        return np.interp(s0, self.source.arc_table, self.lift) + k * (self.lift[-1] - self.lift[0])

    def image_points(self) -> np.ndarray:
        """Images of the source vertices on the target curve."""
        return self.target.point_at(self.lift[:-1])

    def with_lift(self, lift, **kw) -> CurveMap:
        kw.setdefault("monotone", self.monotone)
        return CurveMap(self.source, self.target, lift, self.orientation, **kw)


def identity_map(c: ClosedCurve) -> CurveMap:
    return CurveMap(c, c, c.arc_table, 1)


class MeshMap:
    """Simplicial map: vertex ``i`` of the source goes to vertex ``i`` of the target."""

    def __init__(self, source: SurfaceMesh, target: SurfaceMesh):
        if source.triangles.shape != target.triangles.shape or not np.array_equal(
            source.triangles, target.triangles
        ):
            raise DomainMismatchError("mesh map requires identical connectivity")
        if len(source.vertices) != len(target.vertices):
            raise DomainMismatchError("mesh map requires equal vertex counts")
        self.source = source
        self.target = target

    @classmethod
    def from_vertices(cls, source: SurfaceMesh, vertices) -> MeshMap:
        v = np.asarray(vertices, dtype=float)
        p = v[source.triangles]
        area = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
        span = v.max(axis=0) - v.min(axis=0)
        bad = np.flatnonzero(area <= EPS_GEOM * float(np.dot(span, span)))
        if len(bad):
            raise InvalidMapError(f"target triangle {int(bad[0])} is degenerate")
        return cls(source, SurfaceMesh(v, source.triangles, closed=False))

    def __repr__(self) -> str:
        return f"MeshMap(nt={len(self.source.triangles)})"


@dataclass(frozen=True)
class StrainField:
    """``h*g_N - g_M`` per element: scalars for curves, 2x2 matrices in the source frame for meshes."""

    values: np.ndarray


def jacobian_curve(h: CurveMap) -> np.ndarray:
    """Image arc length over source length per segment, signed by orientation."""
    return h.slopes


def jacobian_mesh(h: MeshMap) -> np.ndarray:
    return h.target.triangle_areas / h.source.triangle_areas


def strain_curve(h: CurveMap) -> StrainField:
    j = h.slopes
    return StrainField(j * j - 1.0)


def affine_parts(h: MeshMap) -> np.ndarray:
    """Linear part of each triangle's affine map, shape (m, 3, 2), in the source frame."""
    src, tgt = h.source, h.target
    p = src.vertices[src.triangles]
    q = tgt.vertices[tgt.triangles]
    es = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)      # (m, 3, 2)
    local = np.einsum("mij,mjk->mik", src.frames, es)                  # (m, 2, 2)
    et = np.stack([q[:, 1] - q[:, 0], q[:, 2] - q[:, 0]], axis=2)      # (m, 3, 2)
    return np.einsum("mij,mjk->mik", et, np.linalg.inv(local))


def pullback_metric_mesh(h: MeshMap) -> np.ndarray:
    f = affine_parts(h)
    g = np.einsum("mki,mkj->mij", f, f)
    return 0.5 * (g + np.swapaxes(g, 1, 2))


def strain_mesh(h: MeshMap) -> StrainField:
    return StrainField(pullback_metric_mesh(h) - np.eye(2))


def compose_curve_maps(a: CurveMap, b: CurveMap) -> CurveMap:
    """``a o b``; the lift is ``lift(a) o lift(b)`` sampled at the knots of ``b.source``."""
    if not same_curve(b.target, a.source):
        raise DomainMismatchError("cannot compose: target of the inner map is not the source of the outer")
    u = a.lift_at(b.lift)
    sign = a.orientation * b.orientation
    u[-1] = u[0] + sign * a.target.length
    return CurveMap(b.source, a.target, u, sign, monotone=a.monotone and b.monotone)


def invert_curve_map(h: CurveMap) -> CurveMap:
    """Monotone inverse of the lift, resampled at the target's arc-length knots."""
    if not h.monotone:
        raise InvalidMapError("only monotone lifts (diffeomorphisms) can be inverted")
    M, N = h.source, h.target
    L_M, L_N = M.length, N.length
    span = h.lift[-1] - h.lift[0]
    s_ext = np.concatenate([M.arc_table - L_M, M.arc_table[1:], M.arc_table[1:] + L_M])
    u_ext = np.concatenate([h.lift - span, h.lift[1:], h.lift[1:] + span])
    u0 = h.lift[0]
    if h.orientation > 0:
        k = math.ceil(u0 / L_N)
        y = N.arc_table + k * L_N
        w = np.interp(y, u_ext, s_ext)
    else:
        k = math.floor(u0 / L_N)
        y = N.arc_table + k * L_N
        w = np.interp(y, u_ext[::-1], s_ext[::-1])
    w[-1] = w[0] + h.orientation * L_M
    return CurveMap(N, M, w, h.orientation)


class TimeVectorField:
    """Tangent field ``v(q, t)`` on a closed curve, sampled at its knots on a uniform time grid.

    ``values[j, i]`` is the signed speed (along the curve direction) at knot ``i``
    and time ``j / (grid_t - 1)``.  Evaluation is linear in space (periodic) and
    in time.
    """

    def __init__(self, curve: ClosedCurve, values):
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals[None, :]
        if vals.ndim != 2 or vals.shape[1] != len(curve):
            raise DomainMismatchError(
                f"field needs one value per knot ({len(curve)}), got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("field values must be finite")
        self.curve = curve
        self.values = _frozen(vals)
        self._rows = np.concatenate([vals, vals[:, :1]], axis=1)

    @property
    def grid_t(self) -> int:
        return self.values.shape[0]

    @classmethod
    def constant_in_time(cls, curve: ClosedCurve, per_knot) -> TimeVectorField:
        return cls(curve, np.asarray(per_knot, dtype=float)[None, :])

    def row(self, t: float) -> np.ndarray:
        if self.grid_t == 1:
            return self._rows[0]
        x = min(max(t, 0.0), 1.0) * (self.grid_t - 1)
        j = min(int(math.floor(x)), self.grid_t - 2)
        w = x - j
        return (1.0 - w) * self._rows[j] + w * self._rows[j + 1]

    def __call__(self, q, t: float) -> np.ndarray:
        L = self.curve.length
        return np.interp(np.mod(q, L), self.curve.arc_table, self.row(t))


def evolve(v: TimeVectorField, s: float, t: float, ids, dt: float = DEFAULT_DT) -> np.ndarray:
    """Evolution operator ``eta(t; s, p)`` of ``dq/dt = v(q, t)`` by classic RK4.

    Positions are unrolled arc lengths (not reduced modulo ``L``).  The step is
    the largest uniform step not exceeding ``dt`` that lands exactly on ``t``;
    ``t < s`` integrates backward.
    """
    if not dt > 0.0:
        raise InvalidParameterError(f"step size must be positive, got {dt}")
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise InvalidParameterError(f"times must lie in [0, 1], got s={s}, t={t}")
    q = np.array(ids, dtype=float)
    if s == t:
        return q
    n = max(1, math.ceil(round(abs(t - s) / dt, 9)))
    h = (t - s) / n
    for i in range(n):
        ti = s + i * h
        k1 = v(q, ti)
        k2 = v(q + 0.5 * h * k1, ti + 0.5 * h)
        k3 = v(q + 0.5 * h * k2, ti + 0.5 * h)
        k4 = v(q + h * k3, ti + h)
        q = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return q


def flow_map(v: TimeVectorField, s: float, t: float, dt: float = DEFAULT_DT,
             fold_tolerance: float = 1e-6) -> CurveMap:
    """``p -> eta(t; s, p)`` as a circle map of ``v.curve`` onto itself."""
    c = v.curve
    L = c.length
    pos = evolve(v, s, t, c.arc_table, dt)
    if abs(pos[-1] - pos[0] - L) > 1e-9 * L:
        raise FlowFoldError(f"flow changed the degree: endpoint displacement {pos[-1] - pos[0]!r} != {L!r}")
    pos[-1] = pos[0] + L
    inc = np.diff(pos)
    floor = EPS_MONO * L
    if np.any(inc <= floor):
        floor *= 2.0
        if np.min(inc) < -fold_tolerance * L:
            i = int(np.argmin(inc))
            raise FlowFoldError(f"flow folded segment {i} (increment {inc[i]:.3e})")
        warnings.warn("time-one map re-projected to restore monotonicity", FlowProjectionWarning, stacklevel=2)
        inc = project_increments(inc, L, floor)
        pos = pos[0] + np.concatenate([[0.0], np.cumsum(inc)])
        pos[-1] = pos[0] + L
    return CurveMap(c, c, pos, 1)


def time_one_map(v: TimeVectorField, dt: float = DEFAULT_DT) -> CurveMap:
    return flow_map(v, 0.0, 1.0, dt)
