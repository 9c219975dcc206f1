"""Scalar energies of bendings and morphs, with variations of the curve deformation energy.

Spatial integrals are sums of piecewise-constant densities times element
measures; time integrals use the trapezoid rule on the morph's uniform grid.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    DomainMismatchError,
    InsufficientResolutionError,
    InvalidScheduleError,
)
from .geometry import ClosedCurve, curvature
from .maps import (
    DEFAULT_DT,
    CurveMap,
    MeshMap,
    TimeVectorField,
    compose_curve_maps,
    flow_map,
    jacobian_mesh,
    same_curve,
    strain_mesh,
    time_one_map,
)

if TYPE_CHECKING:
    from .morphing import Morph


class PairwiseWarning(RuntimeWarning):
    """The volume-path formula was applied to a morph that is not pairwise minimal."""


@dataclass(frozen=True)
class EnergyReport:
    value: float
    densities: np.ndarray
    weights: np.ndarray
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "densities": self.densities.tolist(),
            "weights": self.weights.tolist(),
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def densities_csv(self) -> str:
        lines = ["element,density,weight"]
        lines += [f"{i},{d!r},{w!r}" for i, (d, w) in enumerate(zip(self.densities, self.weights))]
        return "\n".join(lines) + "\n"


def _report(densities, weights, **metadata) -> EnergyReport:
    d = np.asarray(densities, dtype=float)
    w = np.asarray(weights, dtype=float)
    return EnergyReport(float(np.sum(d * w)), d, w, metadata)


def _map_parts(h: CurveMap | MeshMap):
    if isinstance(h, CurveMap):
        return h.slopes, h.source.segment_lengths, h.source.length, h.target.length
    if isinstance(h, MeshMap):
        return jacobian_mesh(h), h.source.triangle_areas, h.source.area, h.target.area
    raise TypeError(f"expected CurveMap or MeshMap, got {type(h).__name__}")


# -- stretching ---------------------------------------------------------------

def phi1(h: CurveMap | MeshMap) -> EnergyReport:
    """Integral of ``(|J| - 1)^2`` over the source."""
    j, w, vol_m, vol_n = _map_parts(h)
    return _report((np.abs(j) - 1.0) ** 2, w, vol_source=vol_m, vol_target=vol_n)


def phi1_minimum(vol_m: float, vol_n: float) -> float:
    return (vol_m - vol_n) ** 2 / vol_m


def phi1_critical_residual(h: CurveMap | MeshMap) -> float:
    """Largest deviation of ``|J|`` from the volume ratio; zero exactly at critical maps."""
    j, _, vol_m, vol_n = _map_parts(h)
    return float(np.max(np.abs(np.abs(j) - vol_n / vol_m)))


# -- deformation energy -------------------------------------------------------

def phi2_curve(h: CurveMap) -> EnergyReport:
    s = h.slopes
    return _report((s * s - 1.0) ** 2, h.source.segment_lengths,
                   length_source=h.source.length, length_target=h.target.length)


def phi2_mesh(h: MeshMap) -> EnergyReport:
    """Fiber norm ``trace((g^-1 S)^2)``; the frames are orthonormal so ``g`` is the identity."""
    s = strain_mesh(h).values
    return _report(np.einsum("mij,mji->m", s, s), h.source.triangle_areas,
                   area_source=h.source.area, area_target=h.target.area)


def phi2_closed_form(length_m: float, length_n: float) -> float:
    return (length_n**2 - length_m**2) ** 2 / length_m**3


def phi2_slope_gradient(slopes: np.ndarray) -> np.ndarray:
    """Derivative of the density ``(s^2 - 1)^2`` with respect to the slope."""
    return 4.0 * slopes * (slopes * slopes - 1.0)


def phi2_knot_gradient(h: CurveMap) -> np.ndarray:
    """Partial derivatives of the discrete energy with respect to the lift values at knots 0..n-1."""
    p = phi2_slope_gradient(h.slopes)
    return np.roll(p, 1) - p


def knot_speeds(h: CurveMap) -> np.ndarray:
    """Lift slope at each knot: mean of the two adjacent segment slopes."""
    s = h.slopes
    return 0.5 * (np.roll(s, 1) + s)


def _check_knots(h: CurveMap, Y) -> np.ndarray:
    y = np.asarray(Y, dtype=float)
    if y.shape != (len(h.source),):
        raise DomainMismatchError(f"variation field needs {len(h.source)} knot values, got {y.shape}")
    return y


def phi2_first_variation_curve(h: CurveMap, Y) -> float:
    """Derivative of ``t -> Phi2(h o phi_t)`` at ``t = 0`` for the flow ``phi_t`` of ``Y``.

    A knot moving along ``Y`` drags its image at the mean of the two adjacent
    lift slopes, the symmetric derivative of the piecewise-linear lift.  In the
    smooth limit this equals ``-4 * sum(d * u'^2 * R * Y)`` with ``R`` the
    Euler-Lagrange residual of :func:`el_residual_curve` and ``d`` the dual
    lengths.
    """
    y = _check_knots(h, Y)
    return float(np.sum(phi2_knot_gradient(h) * knot_speeds(h) * y))


def compose_with_flow(h: CurveMap, Y, t: float, dt: float = DEFAULT_DT) -> CurveMap:
    """``h o phi_t`` where ``phi_t`` is the flow of the autonomous knot field ``Y``."""
    y = _check_knots(h, Y)
    if t == 0.0:
        return h
    field = TimeVectorField.constant_in_time(h.source, y if t > 0 else -y)
    return compose_curve_maps(h, flow_map(field, 0.0, abs(t), dt))


def el_residual_curve(h: CurveMap) -> np.ndarray:
    """``div B + A:B`` at every knot, with central differences on the closed curve.

    In arc-length coordinates the source connection vanishes and the pulled-back
    one has the single symbol ``u''/u'``, so the residual reads
    ``(u'^2 - 1)' + (u''/u') (u'^2 - 1)``.
    """
    n = len(h.source)
    if n < 4:
        raise InsufficientResolutionError(f"residual needs at least 4 knots, got {n}")
    s = h.slopes
    s_prev = np.roll(s, 1)
    ell = h.source.segment_lengths
    dual = 0.5 * (ell + np.roll(ell, 1))
    ubar = 0.5 * (s + s_prev)
    upp = (s - s_prev) / dual
    return (s * s - s_prev * s_prev) / dual + upp / ubar * (ubar * ubar - 1.0)


def phi2_second_variation_curve(h: CurveMap, Y, eps: float = 1e-3, dt: float = DEFAULT_DT) -> float:
    """Second derivative of ``t -> Phi2(h o phi_t)`` at 0.

    Five-point central differences at ``eps`` and ``eps/2`` combined by one
    Richardson step.
    """
    y = _check_knots(h, Y)
    if not np.any(y):
        return 0.0

    def f(t):
        return phi2_curve(compose_with_flow(h, y, t, dt)).value

    def d2(e):
        return (-f(2 * e) + 16 * f(e) - 30 * f(0.0) + 16 * f(-e) - f(-2 * e)) / (12 * e * e)

    return (16.0 * d2(eps / 2) - d2(eps)) / 15.0


# -- distortion energy of a flow ---------------------------------------------

def field_norm_squared(v: TimeVectorField) -> float:
    """Discrete first-order norm: time integral of the segment sums of ``v^2 + (dv/ds)^2``."""
    ell = v.curve.segment_lengths
    rows = np.concatenate([v.values, v.values[:, :1]], axis=1)
    mid = 0.5 * (rows[:, 1:] + rows[:, :-1])
    grad = np.diff(rows, axis=1) / ell
    per_t = np.sum((mid * mid + grad * grad) * ell, axis=1)
    if len(per_t) == 1:
        return float(per_t[0])
    return float(np.sum(0.5 * (per_t[1:] + per_t[:-1])) / (len(per_t) - 1))


def energy_E_curve(v: TimeVectorField, g1: ClosedCurve, g2: ClosedCurve, dt: float = DEFAULT_DT) -> EnergyReport:
    """Field norm plus strain and bending of the time-one map as a map ``(M, g1) -> (M, g2)``.

    ``g2`` is carried to ``M`` by the vertex correspondence ``i -> i``, so the
    strain term is the deformation energy of ``corr o phi`` and the bending term
    compares the pulled-back curvature form ``kappa_2(h) u'^2 ds^2`` with
    ``kappa_1 ds^2``.
    """
    if not same_curve(v.curve, g1):
        raise DomainMismatchError("vector field must live on the knots of g1")
    if len(g1) != len(g2):
        raise DomainMismatchError(f"g1 and g2 need the same knot count ({len(g1)} != {len(g2)})")
    norm_term = field_norm_squared(v)
    phi = time_one_map(v, dt)
    corr = CurveMap(g1, g2, g2.arc_table, 1)
    h = compose_curve_maps(corr, phi)

    strain = phi2_curve(h)
    k1 = curvature(g1).kappa
    k2 = curvature(g2).kappa
    k1_seg = 0.5 * (k1 + np.roll(k1, -1))
    mids = 0.5 * (g1.arc_table[1:] + g1.arc_table[:-1])
    images = np.mod(h.lift_at(mids), g2.length)
    k2_img = np.interp(images, g2.arc_table, np.concatenate([k2, k2[:1]]))
    bend_density = (k2_img * h.slopes**2 - k1_seg) ** 2
    bending = float(np.sum(bend_density * g1.segment_lengths))

    total = norm_term + strain.value + bending
    return EnergyReport(
        total,
        strain.densities + bend_density,
        g1.segment_lengths.copy(),
        {"norm": norm_term, "strain": strain.value, "bending": bending, "grid_t": v.grid_t, "dt": dt},
    )


# -- morph distortion ---------------------------------------------------------

def _time_derivative(y: np.ndarray, dt: float) -> np.ndarray:
    """Second-order finite differences along axis 0, written in differences so constants give exact zeros."""
    if len(y) == 2:
        d = (y[1] - y[0]) / dt
        return np.stack([d, d])
    out = np.empty_like(y)
    out[1:-1] = (y[2:] - y[:-2]) / (2.0 * dt)
    out[0] = (4.0 * (y[1] - y[0]) - (y[2] - y[0])) / (2.0 * dt)
    out[-1] = (4.0 * (y[-1] - y[-2]) - (y[-1] - y[-3])) / (2.0 * dt)
    return out


def _jacobian_path(F: Morph):
    meas = F.measures()
    if len(meas) < 2:
        raise InsufficientResolutionError("morph needs at least two frames")
    J = meas / meas[0]
    Jdot = _time_derivative(J, 1.0 / F.K)
    return meas, J, Jdot


def _trapezoid(y, t) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def epsilon_path(F: Morph) -> np.ndarray:
    """Infinitesimal distortion at every frame time."""
    meas, J, Jdot = _jacobian_path(F)
    return np.sum(Jdot * Jdot / J * meas[0], axis=1)


def epsilon_F(F: Morph, j: int) -> float:
    return float(epsilon_path(F)[j])


def psi_total(F: Morph) -> float:
    return _trapezoid(epsilon_path(F), F.times)


def pairwise_deviation(F: Morph) -> np.ndarray:
    """``|J(f^t) Vol(M) / Vol(M^t) - 1|`` for every frame (rows) and element (columns)."""
    meas = F.measures()
    vol = meas.sum(axis=1)
    dev = np.abs(meas / meas[0] * (vol[0] / vol)[:, None] - 1.0)
    return dev


def volume_path(F: Morph) -> np.ndarray:
    return F.measures().sum(axis=1)


def psi_pairwise(F: Morph, tol: float = 1e-6) -> float:
    """Total distortion through the volume path alone; exact only for pairwise minimal morphs."""
    if len(F) < 2:
        raise InsufficientResolutionError("morph needs at least two frames")
    worst = float(pairwise_deviation(F).max())
    if worst >= tol:
        warnings.warn(f"morph is not pairwise minimal (deviation {worst:.3e}); "
                      "value returned for diagnostics", PairwiseWarning, stacklevel=2)
    V = volume_path(F)
    Vdot = _time_derivative(V, 1.0 / F.K)
    return _trapezoid(Vdot * Vdot / V, F.times)


# -- volume schedules ---------------------------------------------------------

class VolumeSchedule:
    """Positive samples of a volume path on the uniform grid ``t_j = j / (n - 1)``."""

    def __init__(self, samples):
        phi = np.asarray(samples, dtype=float)
        if phi.ndim != 1 or len(phi) < 2:
            raise InvalidScheduleError("schedule needs at least two samples")
        bad = np.flatnonzero(~(phi > 0.0))
        if len(bad):
            raise InvalidScheduleError(f"schedule sample {int(bad[0])} is not positive ({phi[bad[0]]!r})")
        phi.setflags(write=False)
        self.samples = phi

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self.samples))


def xi_cells(phi: np.ndarray) -> np.ndarray:
    """Per-cell contribution ``(dphi/dt)^2 / phi_mid * dt`` with the geometric-mean midpoint value."""
    dt = 1.0 / (len(phi) - 1)
    d = np.diff(phi)
    return d * d / (dt * np.sqrt(phi[1:] * phi[:-1]))


def xi(phi: VolumeSchedule) -> float:
    """Midpoint-rule ``integral of phi'^2 / phi`` with forward differences per cell.

    The cell midpoint value is the geometric mean of the endpoint samples, which
    keeps the discrete value above ``4 (sqrt(phi(1)) - sqrt(phi(0)))^2`` exactly.
    """
    return float(np.sum(xi_cells(phi.samples)))


def xi_minimum(a: float, b: float) -> float:
    return 4.0 * (np.sqrt(b) - np.sqrt(a)) ** 2
