"""Matrix functions of sparse symmetric matrices via contour integrals."""

from .contour import (
    ContourQuadrature,
    SpectralBounds,
    SpectralFunction,
    build_contour,
    power,
    power_difference,
    resolvent_of_power,
)
from .deflation import DeflationBasis, DeflationError, compute_deflation_basis, estimate_spectral_bounds
from .elliptic import complete_elliptic_K, jacobi_elliptic
from .engine import AccuracyWarning, MatrixFunctionEngine, has_neumann_nullspace, matfunc_apply
from .lanczos import LanczosError, SolverStats, shifted_lanczos_solve
from .polyprec import PolyPreconditioner

__all__ = [
    "AccuracyWarning",
    "ContourQuadrature",
    "DeflationBasis",
    "DeflationError",
    "LanczosError",
    "MatrixFunctionEngine",
    "PolyPreconditioner",
    "SolverStats",
    "SpectralBounds",
    "SpectralFunction",
    "build_contour",
    "complete_elliptic_K",
    "compute_deflation_basis",
    "estimate_spectral_bounds",
    "has_neumann_nullspace",
    "jacobi_elliptic",
    "matfunc_apply",
    "power",
    "power_difference",
    "resolvent_of_power",
    "shifted_lanczos_solve",
]
