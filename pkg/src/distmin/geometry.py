"""Discrete curves and surfaces: lengths, areas, volume weights, curvature.

A closed curve is a piecewise-linear loop; its metric is the induced arc-length
metric on each segment.  A surface is an oriented, closed triangle mesh in
3-space with one orthonormal tangent frame per triangle.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import InvalidGeometryError

EPS_GEOM = 1e-12


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


class ClosedCurve:
    """Planar closed polygon; the cyclic vertex order fixes the orientation."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InvalidGeometryError(f"curve vertices must have shape (n, 2), got {v.shape}")
        if len(v) < 3:
            raise InvalidGeometryError(f"closed curve needs at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise InvalidGeometryError("curve vertices must be finite")
        self.vertices = _frozen(v)

        diam = self.diameter
        seg = self.segment_lengths
        bad = np.flatnonzero(seg <= EPS_GEOM * diam)
        if diam == 0.0 or len(bad):
            i = int(bad[0]) if len(bad) else 0
            raise InvalidGeometryError(f"degenerate segment {i} -> {(i + 1) % len(v)}")
        if abs(self.signed_area) <= EPS_GEOM * diam**2:
            raise InvalidGeometryError("curve encloses zero signed area")

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        return f"ClosedCurve(n={len(self)}, length={self.length:.6g})"

    @cached_property
    def diameter(self) -> float:
        """Bounding-box diagonal; the scale for degeneracy tolerances."""
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.hypot(*span))

    @cached_property
    def edges(self) -> np.ndarray:
        return _frozen(np.roll(self.vertices, -1, axis=0) - self.vertices)

    @cached_property
    def segment_lengths(self) -> np.ndarray:
        return _frozen(np.hypot(self.edges[:, 0], self.edges[:, 1]))

    @cached_property
    def arc_table(self) -> np.ndarray:
        """Cumulative arc length at each vertex, with the closing value ``L`` appended."""
        return _frozen(np.concatenate([[0.0], np.cumsum(self.segment_lengths)]))

    @property
    def length(self) -> float:
        return float(self.arc_table[-1])

    @cached_property
    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def orientation(self) -> int:
        """+1 for counterclockwise, -1 for clockwise."""
        return 1 if self.signed_area > 0 else -1

    def point_at(self, arc) -> np.ndarray:
        """Arc-length parametrization, periodic with period ``length``."""
        s = np.mod(np.asarray(arc, dtype=float), self.length)
        closed = np.vstack([self.vertices, self.vertices[:1]])
        x = np.interp(s, self.arc_table, closed[:, 0])
        y = np.interp(s, self.arc_table, closed[:, 1])
        return np.stack([x, y], axis=-1)

    def transformed(self, scale: float = 1.0, rotation: float = 0.0, shift=(0.0, 0.0)) -> ClosedCurve:
        c, s = np.cos(rotation), np.sin(rotation)
        rot = np.array([[c, -s], [s, c]])
        return ClosedCurve(scale * self.vertices @ rot.T + np.asarray(shift, dtype=float))

    def reversed(self) -> ClosedCurve:
        """Same image, opposite orientation; vertex 0 stays first."""
        return ClosedCurve(np.vstack([self.vertices[:1], self.vertices[:0:-1]]))


class SurfaceMesh:
    """Oriented triangle mesh in 3-space.

    With ``closed=True`` (the default) every edge must be shared by exactly two
    triangles with opposite directions and the enclosed volume must be positive,
    i.e. normals point outward.  ``closed=False`` keeps the per-triangle checks
    only, which is what flat test patches need.
    """

    def __init__(self, vertices, triangles, closed: bool = True):
        v = np.asarray(vertices, dtype=float)
        t = np.asarray(triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidGeometryError(f"mesh vertices must have shape (n, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
            raise InvalidGeometryError(f"triangles must have shape (m, 3), got {t.shape}")
        if t.min() < 0 or t.max() >= len(v):
            raise InvalidGeometryError("triangle index out of range")
        self.vertices = _frozen(v)
        self.triangles = _frozen(t, dtype=np.int64)
        self.closed = closed

        diam = self.diameter
        bad = np.flatnonzero(self.triangle_areas <= EPS_GEOM * diam**2)
        if len(bad):
            raise InvalidGeometryError(f"degenerate triangle {int(bad[0])}")
        self._check_edges()
        if closed and self.enclosed_volume <= 0.0:
            raise InvalidGeometryError("mesh normals point inward (non-positive enclosed volume)")

    def _check_edges(self) -> None:
        t = self.triangles
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        n = len(self.vertices)
        dkeys = directed[:, 0] * n + directed[:, 1]
        uniq, counts = np.unique(dkeys, return_counts=True)
        if np.any(counts > 1):
            k = int(uniq[counts > 1][0])
            raise InvalidGeometryError(
                f"edge {k // n}->{k % n} used twice in the same direction (inconsistent orientation "
                "or non-manifold edge)"
            )
        if self.closed:
            rkeys = directed[:, 1] * n + directed[:, 0]
            missing = ~np.isin(rkeys, uniq)
            if np.any(missing):
                a, b = directed[np.flatnonzero(missing)[0]]
                raise InvalidGeometryError(f"boundary edge {int(a)}-{int(b)}: mesh is not closed")

    def __repr__(self) -> str:
        return f"SurfaceMesh(nv={len(self.vertices)}, nt={len(self.triangles)})"

    @cached_property
    def diameter(self) -> float:
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(np.linalg.norm(span))

    @cached_property
    def _corners(self):
        p = self.vertices[self.triangles]
        return p[:, 0], p[:, 1], p[:, 2]

    @cached_property
    def _cross(self) -> np.ndarray:
        p0, p1, p2 = self._corners
        return np.cross(p1 - p0, p2 - p0)

    @cached_property
    def triangle_areas(self) -> np.ndarray:
        return _frozen(0.5 * np.linalg.norm(self._cross, axis=1))

    @cached_property
    def normals(self) -> np.ndarray:
        return _frozen(self._cross / (2.0 * self.triangle_areas[:, None]))

    @cached_property
    def frames(self) -> np.ndarray:
        """Per-triangle orthonormal tangent frame, shape (m, 2, 3).

        The first axis follows the edge from corner 0 to corner 1; the second is
        ``normal x first``, so (e1, e2, normal) is right-handed.
        """
        p0, p1, _ = self._corners
        e1 = p1 - p0
        e1 /= np.linalg.norm(e1, axis=1)[:, None]
        e2 = np.cross(self.normals, e1)
        return _frozen(np.stack([e1, e2], axis=1))

    @cached_property
    def enclosed_volume(self) -> float:
        p0, p1, p2 = self._corners
        return float(np.sum(np.einsum("ij,ij->i", p0, np.cross(p1, p2)))) / 6.0

    @property
    def area(self) -> float:
        return float(np.sum(self.triangle_areas))

    def with_vertices(self, vertices) -> SurfaceMesh:
        return SurfaceMesh(vertices, self.triangles, closed=self.closed)


@dataclass(frozen=True)
class VolumeFormWeights:
    """Per-element measure: segment lengths (curves) or triangle areas (meshes)."""

    weights: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True)
class CurvatureField:
    """Signed per-vertex curvature of a closed curve; positive turns left."""

    kappa: np.ndarray
    turning: np.ndarray
    dual_lengths: np.ndarray


def curve_length(c: ClosedCurve) -> float:
    return c.length


def mesh_area(m: SurfaceMesh) -> float:
    return m.area


def volume_weights(g: ClosedCurve | SurfaceMesh) -> VolumeFormWeights:
    if isinstance(g, ClosedCurve):
        return VolumeFormWeights(g.segment_lengths)
    if isinstance(g, SurfaceMesh):
        return VolumeFormWeights(g.triangle_areas)
    raise TypeError(f"expected ClosedCurve or SurfaceMesh, got {type(g).__name__}")


def curvature(c: ClosedCurve) -> CurvatureField:
    """Turning angle at each vertex divided by the mean adjacent segment length."""
    e_out = c.edges
    e_in = np.roll(e_out, 1, axis=0)
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    dot = np.einsum("ij,ij->i", e_in, e_out)
    turning = np.arctan2(cross, dot)
    dual = 0.5 * (c.segment_lengths + np.roll(c.segment_lengths, 1))
    return CurvatureField(_frozen(turning / dual), _frozen(turning), _frozen(dual))
