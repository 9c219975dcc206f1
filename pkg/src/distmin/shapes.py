"""Builders for the test shapes: regular polygons, ellipses, icospheres."""

from __future__ import annotations

import numpy as np

from .geometry import ClosedCurve, SurfaceMesh


def regular_polygon(n: int, radius: float = 1.0, *, clockwise: bool = False,
                    center=(0.0, 0.0), phase: float = 0.0) -> ClosedCurve:
    theta = phase + 2.0 * np.pi * np.arange(n) / n
    if clockwise:
        theta = phase - 2.0 * np.pi * np.arange(n) / n
    pts = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1) + np.asarray(center, dtype=float)
    return ClosedCurve(pts)


def circle_of_length(length: float, n: int) -> ClosedCurve:
    """Regular n-gon whose perimeter is exactly ``length`` (up to rounding)."""
    radius = length / (2.0 * n * np.sin(np.pi / n))
    return regular_polygon(n, radius)


def ellipse(n: int, a: float, b: float) -> ClosedCurve:
    theta = 2.0 * np.pi * np.arange(n) / n
    return ClosedCurve(np.stack([a * np.cos(theta), b * np.sin(theta)], axis=1))


def _icosahedron():
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return v / np.linalg.norm(v, axis=1)[:, None], f


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> SurfaceMesh:
    """Loop-style midpoint subdivision of the icosahedron, projected to the sphere."""
    verts, faces = _icosahedron()
    verts = [tuple(p) for p in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = (np.asarray(verts[i]) + np.asarray(verts[j])) / 2.0
                verts.append(tuple(m / np.linalg.norm(m)))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(new_faces)
    return SurfaceMesh(radius * np.array(verts), faces)
