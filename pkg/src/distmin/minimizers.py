"""Closed-form minimizers and descent methods for the bending and morphing energies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from .errors import HypothesisViolationError, InvalidParameterError
from .functionals import (
    VolumeSchedule,
    phi1,
    phi2_closed_form,
    phi2_curve,
    phi2_mesh,
    phi2_second_variation_curve,
    phi2_slope_gradient,
    xi_cells,
)
from .geometry import ClosedCurve
from .maps import EPS_MONO, CurveMap, MeshMap, project_increments
from .shapes import icosphere


@dataclass
class OptimizerConfig:
    max_iters: int = 5000
    step: float = 0.25
    backtrack: float = 0.5
    armijo: float = 1e-4
    tol: float = 1e-10
    eps_mono: float = EPS_MONO
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise InvalidParameterError("max_iters must be non-negative")
        for name in ("step", "backtrack", "armijo", "tol", "eps_mono"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if not (self.backtrack < 1 and self.tol < 1 and self.armijo < 1):
            raise InvalidParameterError("backtrack, armijo and tol must be below 1")


@dataclass
class MinimizationTrace:
    energies: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    result: object = None
    converged: bool = False

    @property
    def iterations(self) -> int:
        return max(len(self.energies) - 1, 0)

    @property
    def final_energy(self) -> float:
        return self.energies[-1]

    def to_csv(self) -> str:
        rows = ["iter,energy,grad_norm"]
        rows += [f"{i},{e!r},{g!r}" for i, (e, g) in enumerate(zip(self.energies, self.grad_norms))]
        return "\n".join(rows) + "\n"


# -- closed forms -------------------------------------------------------------

def linear_lift(M: ClosedCurve, N: ClosedCurve, p_idx: int = 0, q_idx: int = 0, orientation: int = 1) -> CurveMap:
    """Constant-speed lift sending vertex ``p_idx`` of M to vertex ``q_idx`` of N."""
    r = N.length / M.length
    s, q = M.arc_table, N.arc_table[q_idx]
    u = q + orientation * r * (s - s[p_idx])
    u[-1] = u[0] + orientation * N.length
    return CurveMap(M, N, u, orientation)


def closed_form_phi2_minimizers(M: ClosedCurve, N: ClosedCurve, p_idx: int = 0, q_idx: int = 0):
    """The orientation preserving and reversing constant-speed minimizers, for ``L(N) >= L(M)``."""
    if N.length < M.length:
        raise HypothesisViolationError(
            f"L(N) = {N.length:.6g} < L(M) = {M.length:.6g}: no minimizer is guaranteed; "
            "below the length ratio 1 the energy has no minimum among orientation-preserving maps"
        )
    return linear_lift(M, N, p_idx, q_idx, 1), linear_lift(M, N, p_idx, q_idx, -1)


def wrap_transition_width(M: ClosedCurve, N: ClosedCurve, k: int) -> float:
    return min(M.length / (4.0 * k), 0.5 * (M.length - N.length))


def wrapping_sequence(M: ClosedCurve, N: ClosedCurve, k: int, q_idx: int = 0) -> CurveMap:
    """k-th map of a minimizing sequence for ``L(N) < L(M)``.

    M is laid along N at unit speed, runs back over the excess at unit speed,
    then forward again.  The two turns are smoothed by a cubic (smoothstep)
    blend of the speed over width ``L_M / (4k)``, so all the stretching is
    confined to the turns and the energy is proportional to ``1/k``.  The map
    folds over itself at the turns: it lies in the orientation-preserving smooth
    maps, not in the diffeomorphisms.
    """
    if k < 1:
        raise InvalidParameterError(f"sequence index must be >= 1, got {k}")
    L_M, L_N = M.length, N.length
    if L_N >= L_M:
        raise HypothesisViolationError("wrapping needs L(N) < L(M); otherwise a minimizer exists")
    d = wrap_transition_width(M, N, k)
    x1 = 0.25 * (L_M + L_N) - 0.5 * d
    x2 = x1 + 0.5 * (L_M - L_N)
    y2 = 2.0 * x1 - x2 + d

    def smooth_int(z):                      # integral of 3z^2 - 2z^3 from 0 to z
        return z**3 - 0.5 * z**4

    s = M.arc_table
    u = np.empty_like(s)
    a = s <= x1
    u[a] = s[a]
    b = (s > x1) & (s < x1 + d)
    z = (s[b] - x1) / d
    u[b] = x1 + (s[b] - x1) - 2.0 * d * smooth_int(z)
    c = (s >= x1 + d) & (s <= x2)
    u[c] = x1 - (s[c] - x1 - d)
    e = (s > x2) & (s < x2 + d)
    z = (s[e] - x2) / d
    u[e] = y2 - (s[e] - x2) + 2.0 * d * smooth_int(z)
    f = s >= x2 + d
    u[f] = y2 + (s[f] - x2 - d)
    u += N.arc_table[q_idx]
    u[-1] = u[0] + L_N
    return CurveMap(M, N, u, 1, monotone=False)


def optimal_schedule(a: float, b: float, n: int) -> VolumeSchedule:
    """Samples of ``((1 - t) sqrt(a) + t sqrt(b))^2`` on ``n`` uniform times."""
    if not (a > 0 and b > 0):
        raise InvalidParameterError(f"volumes must be positive, got a={a}, b={b}")
    if n < 2:
        raise InvalidParameterError("schedule needs at least two samples")
    t = np.linspace(0.0, 1.0, n)
    phi = ((1.0 - t) * np.sqrt(a) + t * np.sqrt(b)) ** 2
    phi[0], phi[-1] = a, b
    return VolumeSchedule(phi)


# -- descent over lifts -------------------------------------------------------

def random_monotone_lift(M: ClosedCurve, N: ClosedCurve, seed: int = 0, spread: float = 0.6) -> CurveMap:
    """Monotone lift with random per-segment speeds in ``r * [1 - spread, 1 + spread]`` (renormalized)."""
    rng = np.random.default_rng(seed)
    inc = M.segment_lengths * (1.0 + spread * rng.uniform(-1.0, 1.0, len(M)))
    inc *= N.length / np.sum(inc)
    u = np.concatenate([[0.0], np.cumsum(inc)])
    u[-1] = N.length
    return CurveMap(M, N, u, 1)


def _tangent_direction(g: np.ndarray, ell: np.ndarray, at_floor: np.ndarray | None) -> np.ndarray:
    """Gradient minus its weighted mean over the free segments.

    Segments sitting on the monotonicity floor whose gradient would push them
    further down are frozen (active set), so a zero direction means a KKT point.
    """
    free = np.ones(len(g), dtype=bool)
    for _ in range(len(g)):
        mean = np.sum(g[free] * ell[free]) / np.sum(ell[free])
        pg = np.where(free, g - mean, 0.0)
        if at_floor is None:
            return pg
        push = free & at_floor & (pg > 0.0)
        if not np.any(push):
            return pg
        free &= ~push
    return np.zeros_like(g)


def _descend_slopes(init: CurveMap, energy, density_grad, cfg: OptimizerConfig, monotone: bool) -> MinimizationTrace:
    """Projected steepest descent on the lift slopes in the L2 metric of the source.

    The endpoint condition is the linear constraint ``sum(slope * ell) = L_N``;
    the descent direction is the density gradient minus its weighted mean, which
    keeps the constraint.  With ``monotone`` segments on the floor
    ``2 * eps_mono * L_N`` are held there when the gradient pushes them down,
    and a trial step that undershoots the floor is clamped and rescaled.  A step in slopes is the
    Sobolev (H1-type) gradient step on the lift itself.
    """
    M, N = init.source, init.target
    sign = init.orientation
    ell = M.segment_lengths
    L_M, L_N = M.length, N.length
    u0 = init.lift[0]
    floor = 2.0 * cfg.eps_mono * L_N          # margin over the map invariant for cumsum rounding

    def to_map(sig):
        u = u0 + sign * np.concatenate([[0.0], np.cumsum(sig * ell)])
        u[-1] = u0 + sign * L_N
        return CurveMap(M, N, u, sign, monotone=monotone)

    sigma = sign * init.slopes
    h = init
    E = energy(h)
    trace = MinimizationTrace()
    alpha = cfg.step
    for it in range(cfg.max_iters + 1):
        g = density_grad(sigma)
        pg = _tangent_direction(g, ell, sigma * ell <= floor * (1.0 + 1e-6) if monotone else None)
        gnorm = float(np.sqrt(np.sum(pg * pg * ell) / L_M))
        trace.energies.append(E)
        trace.grad_norms.append(gnorm)
        if gnorm < cfg.tol:
            trace.converged = True
            break
        if it == cfg.max_iters:
            break
        alpha = min(2.0 * alpha, cfg.step)
        while True:
            trial = sigma - alpha * pg
            if monotone and np.any(trial * ell <= floor):
                trial = project_increments(trial * ell, L_N, floor) / ell
            h_trial = to_map(trial)
            E_trial = energy(h_trial)
            decrease = float(np.sum(g * (trial - sigma) * ell))
            if E_trial <= E + cfg.armijo * decrease:
                break
            alpha *= cfg.backtrack
            if alpha < 1e-18:
                break
        if E_trial >= E:                      # no strict decrease: stationary to working precision
            trace.converged = bool(gnorm < np.sqrt(cfg.tol))
            break
        sigma, h, E = trial, h_trial, E_trial
    trace.result = h
    return trace


def minimize_phi1(M: ClosedCurve, N: ClosedCurve, init: CurveMap | None = None,
                  cfg: OptimizerConfig | None = None) -> MinimizationTrace:
    """Descend the stretching energy over monotone lifts; the limit has constant speed ``L_N / L_M``."""
    cfg = cfg or OptimizerConfig()
    init = init if init is not None else random_monotone_lift(M, N, cfg.seed)
    return _descend_slopes(init, lambda h: phi1(h).value, lambda s: 2.0 * (s - 1.0), cfg, monotone=True)


def minimize_phi2_curve(M: ClosedCurve, N: ClosedCurve, init: CurveMap | None = None,
                        cfg: OptimizerConfig | None = None, *, monotone: bool = True) -> MinimizationTrace:
    """Descend the deformation energy over lifts.

    ``monotone=True`` searches the diffeomorphisms; ``monotone=False`` admits
    orientation-preserving maps that fold, where for ``L(N) < L(M)`` the energy
    has no minimum and the iterates keep decreasing toward zero.
    """
    cfg = cfg or OptimizerConfig()
    init = init if init is not None else random_monotone_lift(M, N, cfg.seed)
    if not monotone:
        init = init.with_lift(init.lift, monotone=False)
    return _descend_slopes(init, lambda h: phi2_curve(h).value, phi2_slope_gradient, cfg, monotone)


# -- schedule optimization ----------------------------------------------------

def _xi_derivatives(phi: np.ndarray):
    """Gradient and tridiagonal Hessian (diag, offdiag) of the discrete Xi in all samples."""
    dt = 1.0 / (len(phi) - 1)
    x, y = phi[:-1], phi[1:]
    rx, ry = np.sqrt(x), np.sqrt(y)
    qx = (x - y) * (3 * x + y) / (2 * x * rx * ry) / dt
    qy = -(x - y) * (x + 3 * y) / (2 * rx * y * ry) / dt
    Q = (3 * x * x + 2 * x * y + 3 * y * y) / (4 * rx * ry) / dt
    hxx, hyy, hxy = Q / (x * x), Q / (y * y), -Q / (x * y)
    grad = np.zeros_like(phi)
    grad[:-1] += qx
    grad[1:] += qy
    diag = np.zeros_like(phi)
    diag[:-1] += hxx
    diag[1:] += hyy
    return grad, diag, hxy


def minimize_xi_numeric(a: float, b: float, n: int = 200, cfg: OptimizerConfig | None = None) -> MinimizationTrace:
    """Damped Newton on the interior samples of the schedule, endpoints pinned to ``a`` and ``b``."""
    cfg = cfg or OptimizerConfig(max_iters=200, tol=1e-12)
    if not (a > 0 and b > 0):
        raise InvalidParameterError(f"volumes must be positive, got a={a}, b={b}")
    if n < 8:
        raise InvalidParameterError(f"need at least 8 samples, got {n}")
    phi = np.linspace(a, b, n)

    def energy(p):
        return float(np.sum(xi_cells(p)))

    E = energy(phi)
    trace = MinimizationTrace()
    for it in range(cfg.max_iters + 1):
        grad, diag, off = _xi_derivatives(phi)
        g = grad[1:-1]
        ab = np.zeros((2, n - 2))
        ab[0, 1:] = off[1:-1]
        ab[1] = diag[1:-1]
        damping = 0.0
        while True:
            try:
                step = -solveh_banded(ab + np.array([[0.0], [damping]]), g)
                break
            except LinAlgError:
                damping = max(1e-12 * float(np.max(ab[1])), 10.0 * damping)
        slope = float(g @ step)
        decrement = float(np.sqrt(max(-slope, 0.0)))    # Newton decrement
        trace.energies.append(E)
        trace.grad_norms.append(decrement)
        if 0.5 * decrement**2 < cfg.tol * max(E, 1.0):
            trace.converged = True
            break
        if it == cfg.max_iters:
            break
        alpha = 1.0
        accepted = False
        while alpha >= 1e-18:
            trial = phi.copy()
            trial[1:-1] += alpha * step
            if np.all(trial > 0):
                E_trial = energy(trial)
                if E_trial <= E + cfg.armijo * alpha * slope:
                    accepted = True
                    break
            alpha *= cfg.backtrack
        if not accepted:
            trace.converged = True          # no descent left at working precision
            break
        phi, E = trial, E_trial
    trace.result = VolumeSchedule(phi)
    return trace


# -- second variation and the sphere family ----------------------------------

def fourier_directions(M: ClosedCurve, modes: int = 4) -> list[tuple[str, np.ndarray]]:
    """``sin`` and ``cos`` of ``2 pi m s / L_M`` at the knots, ``m = 1..modes``."""
    s = M.arc_table[:-1]
    w = 2.0 * np.pi * s / M.length
    out = []
    for m in range(1, modes + 1):
        out.append((f"sin{m}", np.sin(m * w)))
        out.append((f"cos{m}", np.cos(m * w)))
    return out


def second_variation_scan(h: CurveMap, modes: int = 4) -> dict[str, float]:
    return {name: phi2_second_variation_curve(h, y) for name, y in fourier_directions(h.source, modes)}


def stereographic_dilation(points: np.ndarray, s: float) -> np.ndarray:
    """Conformal map of the unit sphere: stereographic projection from the north pole, scale by ``e^s``, back."""
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    k = np.exp(2.0 * s)
    den = k * (1.0 + z) + (1.0 - z)
    xy_scale = 2.0 * np.exp(s) / den
    return np.stack([x * xy_scale, y * xy_scale, (k * (1.0 + z) - (1.0 - z)) / den], axis=1)


@dataclass
class SphereFamilyResult:
    s_values: np.ndarray
    energies: np.ndarray
    radius: float
    area: float

    @property
    def argmin(self) -> float:
        return float(self.s_values[int(np.argmin(self.energies))])

    @property
    def reference(self) -> float:
        """Energy of pure radial scaling, ``2 (R^2 - 1)^2 Area(M)``."""
        return 2.0 * (self.radius**2 - 1.0) ** 2 * self.area

    def to_csv(self) -> str:
        rows = ["s,phi2"] + [f"{s!r},{e!r}" for s, e in zip(self.s_values, self.energies)]
        return "\n".join(rows) + "\n"


def sphere_family_phi2(R: float = 2.0, s_grid=None, subdivisions: int = 3) -> SphereFamilyResult:
    """Deformation energy of ``h_R o C_s`` on an icosphere for each dilation parameter ``s``."""
    if not R > 0:
        raise InvalidParameterError(f"radius must be positive, got {R}")
    s_grid = np.linspace(-0.5, 0.5, 11) if s_grid is None else np.asarray(s_grid, dtype=float)
    M = icosphere(subdivisions)
    energies = [phi2_mesh(MeshMap.from_vertices(M, R * stereographic_dilation(M.vertices, s))).value
                for s in s_grid]
    return SphereFamilyResult(s_grid, np.array(energies), R, M.area)


__all__ = [
    "OptimizerConfig", "MinimizationTrace", "SphereFamilyResult",
    "closed_form_phi2_minimizers", "linear_lift", "wrapping_sequence", "wrap_transition_width",
    "optimal_schedule", "random_monotone_lift", "minimize_phi1", "minimize_phi2_curve",
    "minimize_xi_numeric", "fourier_directions", "second_variation_scan", "stereographic_dilation",
    "sphere_family_phi2", "phi2_closed_form",
]
