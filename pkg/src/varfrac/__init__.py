"""Variable-order fractional diffusion on sparse Laplacians.

Matrix functions ``f(A) b`` of sparse symmetric Laplacians are evaluated by
contour quadrature with a single shifted Lanczos basis, and drive a fully
implicit time stepper for Fisher and Beeler-Reuter reaction models.
"""

from .discretize import (
    Mesh1D,
    RegionPartition,
    TetMesh,
    build_fvm_tet,
    build_laplacian_1d,
    partition_regions,
    symmetrize,
)
from .matfunc import MatrixFunctionEngine, matfunc_apply, power, power_difference, resolvent_of_power
from .stepper import PicardSettings, TimeGrid, backward_euler_step, integrate
from .vofl import EngineSettings, VoflOperator

__version__ = "0.1.0"

__all__ = [
    "EngineSettings",
    "MatrixFunctionEngine",
    "Mesh1D",
    "PicardSettings",
    "RegionPartition",
    "TetMesh",
    "TimeGrid",
    "VoflOperator",
    "backward_euler_step",
    "build_fvm_tet",
    "build_laplacian_1d",
    "integrate",
    "matfunc_apply",
    "partition_regions",
    "power",
    "power_difference",
    "resolvent_of_power",
    "symmetrize",
]
