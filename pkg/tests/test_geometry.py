import math

import numpy as np
import pytest

from distmin import (
    ClosedCurve,
    SurfaceMesh,
    curvature,
    curve_length,
    mesh_area,
    volume_weights,
)
from distmin.errors import InvalidGeometryError
from distmin.shapes import ellipse, icosphere, regular_polygon

SQUARE = [[0, 0], [1, 0], [1, 1], [0, 1]]
TETRA_V = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
TETRA_F = [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]]


def test_unit_square_perimeter_and_weights():
    c = ClosedCurve(SQUARE)
    assert curve_length(c) == 4.0
    assert c.arc_table[-1] == 4.0
    np.testing.assert_array_equal(volume_weights(c).weights, [1, 1, 1, 1])
    assert volume_weights(c).total == 4.0


def test_polygon_perimeter_matches_chord_formula():
    c = regular_polygon(2048, 1.0)
    expected = 2 * 2048 * math.sin(math.pi / 2048)
    assert curve_length(c) == pytest.approx(expected, rel=1e-13)
    assert curve_length(c) == pytest.approx(6.2831828, abs=1e-7)


def test_arc_table_strictly_increasing():
    c = ellipse(100, 3.0, 1.0)
    assert np.all(np.diff(c.arc_table) > 0)
    assert c.arc_table[0] == 0.0


def test_coincident_vertices_rejected():
    with pytest.raises(InvalidGeometryError):
        ClosedCurve([[0, 0], [0, 0], [1, 1]])


def test_other_invalid_curves():
    with pytest.raises(InvalidGeometryError):
        ClosedCurve([[0, 0], [1, 0]])
    with pytest.raises(InvalidGeometryError):
        ClosedCurve([[0, 0], [1, 0], [2, 0]])
    with pytest.raises(InvalidGeometryError):
        ClosedCurve([[0, 0], [1, 0], [np.nan, 1]])


def test_orientation_follows_signed_area():
    assert ClosedCurve(SQUARE).orientation == 1
    assert ClosedCurve(SQUARE[::-1]).orientation == -1
    assert ClosedCurve(SQUARE).reversed().orientation == -1


def test_tetrahedron_face_area():
    m = SurfaceMesh(TETRA_V, TETRA_F)
    assert m.triangle_areas[0] == 0.5
    assert mesh_area(m) == pytest.approx(1.5 + math.sqrt(3) / 2, rel=1e-15)
    assert m.enclosed_volume == pytest.approx(1 / 6)


def test_icosphere_area_close_to_sphere():
    m = icosphere(3)
    assert len(m.triangles) == 1280
    assert abs(mesh_area(m) - 4 * math.pi) < 0.01 * 4 * math.pi
    w = volume_weights(m)
    assert np.all(w.weights > 0)
    assert w.total == pytest.approx(mesh_area(m), rel=1e-15)


def test_non_manifold_edge_rejected():
    v = TETRA_V + [[1, 1, -1]]
    f = TETRA_F + [[0, 1, 4]]
    with pytest.raises(InvalidGeometryError):
        SurfaceMesh(v, f)


def test_open_and_inward_meshes_rejected():
    with pytest.raises(InvalidGeometryError):
        SurfaceMesh(TETRA_V, TETRA_F[:3])
    with pytest.raises(InvalidGeometryError):
        SurfaceMesh(TETRA_V, [t[::-1] for t in TETRA_F])
    with pytest.raises(InvalidGeometryError):
        SurfaceMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 0, 1]], TETRA_F)


def test_frames_are_orthonormal_and_tangent():
    m = icosphere(1)
    e = m.frames
    gram = np.einsum("mik,mjk->mij", e, e)
    np.testing.assert_allclose(gram, np.broadcast_to(np.eye(2), gram.shape), atol=1e-14)
    np.testing.assert_allclose(np.einsum("mik,mk->mi", e, m.normals), 0.0, atol=1e-14)


def test_curvature_of_circle():
    k = curvature(regular_polygon(1024, 2.0)).kappa
    np.testing.assert_allclose(k, 0.5, atol=1e-4)


def test_curvature_sign_and_square_corners():
    assert np.all(curvature(regular_polygon(50, clockwise=True)).kappa < 0)
    # put midpoints on the square's edges: zero turning there, pi/2 at the corners
    pts = [[0, 0], [0.5, 0], [1, 0], [1, 0.5], [1, 1], [0.5, 1], [0, 1], [0, 0.5]]
    turn = curvature(ClosedCurve(pts)).turning
    np.testing.assert_allclose(turn[0::2], math.pi / 2, atol=1e-15)
    np.testing.assert_allclose(turn[1::2], 0.0, atol=1e-15)


def test_equal_weights_on_regular_polygon():
    w = volume_weights(regular_polygon(2048)).weights
    assert np.ptp(w) <= 1e-12 * w.mean()


def test_refinement_is_second_order():
    errs = [abs(curve_length(regular_polygon(n)) - 2 * math.pi) for n in (64, 128, 256)]
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5
    area_errs = [abs(mesh_area(icosphere(s)) - 4 * math.pi) for s in (2, 3, 4)]
    assert area_errs[0] / area_errs[1] >= 3.5 and area_errs[1] / area_errs[2] >= 3.5
