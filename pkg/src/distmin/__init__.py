"""Distortion energies for bending and morphing closed curves and surfaces."""

import os as _os

# Thread caps must be in place before numpy loads its BLAS.
_threads = _os.environ.get("DISTMIN_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .errors import *  # noqa: E402,F401,F403
from .geometry import (  # noqa: E402
    ClosedCurve,
    CurvatureField,
    SurfaceMesh,
    VolumeFormWeights,
    curvature,
    curve_length,
    mesh_area,
    volume_weights,
)
from .maps import (  # noqa: E402
    CurveMap,
    MeshMap,
    StrainField,
    TimeVectorField,
    compose_curve_maps,
    evolve,
    flow_map,
    identity_map,
    invert_curve_map,
    jacobian_curve,
    jacobian_mesh,
    pullback_metric_mesh,
    strain_curve,
    strain_mesh,
    time_one_map,
)
from .functionals import (  # noqa: E402
    EnergyReport,
    VolumeSchedule,
    el_residual_curve,
    energy_E_curve,
    epsilon_F,
    phi1,
    phi2_curve,
    phi2_first_variation_curve,
    phi2_mesh,
    phi2_second_variation_curve,
    psi_pairwise,
    psi_total,
    xi,
)
from .minimizers import (  # noqa: E402
    MinimizationTrace,
    OptimizerConfig,
    closed_form_phi2_minimizers,
    minimize_phi1,
    minimize_phi2_curve,
    minimize_xi_numeric,
    optimal_schedule,
    sphere_family_phi2,
    wrapping_sequence,
)
from .morphing import (  # noqa: E402
    Morph,
    PairwiseReport,
    is_pairwise_minimal,
    make_linear_morph,
    optimal_morph_curve,
    pairwise_minimalize_curve,
    psi_gap,
)

__version__ = "0.1.0"
