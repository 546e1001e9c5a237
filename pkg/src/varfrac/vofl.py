"""Variable-order fractional Laplacian on a two-region partition.

With ``A`` the (symmetric) discrete Laplacian and region selector ``E_2``,

    L u = A^{a1/2} u + E_2 (A^{a2/2} - A^{a1/2}) u,

and the implicit step needs the two matrix functions

    f_a(z) = D (z^{a1/2} - z^{a2/2}),      f_b(z) = 1 / (1 + D dt z^{a1/2}).

The roles of the regions may be exchanged: the split is algebraically the
same with either region as the base, only the fixed-point iteration of the
time stepper changes.  By default the larger order is the base.  This keeps
the explicit correction dominated by the implicit part (the Picard map is a
contraction on the linear terms) and, when one order equals 2, turns ``f_b``
into a sparse linear solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .discretize import RegionPartition, SymmetrizedOperator
from .matfunc import (
    DeflationBasis,
    MatrixFunctionEngine,
    SpectralBounds,
    power,
    power_difference,
    resolvent_of_power,
)
from .matfunc.engine import DEFAULT_P, DEFAULT_POLY_DEGREE, DEFAULT_TOL

logger = logging.getLogger(__name__)


class LinearSolveError(RuntimeError):
    pass


def _check_alpha(name, a):
    if not 1.0 < a <= 2.0:
        raise ValueError(f"{name} must lie in (1, 2], got {a}")


@dataclass(frozen=True)
class FractionalOrderField:
    alpha1: float
    alpha2: float
    partition: RegionPartition

    def __post_init__(self):
        _check_alpha("alpha1", self.alpha1)
        _check_alpha("alpha2", self.alpha2)
        labels = np.unique(self.partition.region_of)
        if labels.size and not set(labels.tolist()) <= {1, 2}:
            raise ValueError(f"exactly two regions are supported, got labels {labels.tolist()}")

    @property
    def n(self) -> int:
        return self.partition.region_of.size

    @property
    def is_fixed(self) -> bool:
        r = self.partition.region_of
        return self.alpha1 == self.alpha2 or not np.any(r == 2) or not np.any(r == 1)

    def alpha_of_nodes(self) -> np.ndarray:
        return np.where(self.partition.region_of == 2, self.alpha2, self.alpha1)


@dataclass(frozen=True)
class EngineSettings:
    P: int = DEFAULT_P
    tol: float = DEFAULT_TOL
    ell: int | None = None
    poly_degree: int = DEFAULT_POLY_DEGREE
    store_basis: bool = True

    def __post_init__(self):
        if self.P < 1:
            raise ValueError("P must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.ell is not None and self.ell < 0:
            raise ValueError("ell must be non-negative")
        if self.poly_degree < 0:
            raise ValueError("poly_degree must be non-negative")


class VoflOperator:
    """The split variable-order operator with effective diffusivity ``D``.

    ``A`` is either a symmetric sparse matrix or a :class:`SymmetrizedOperator`
    (mass-lumped finite volumes), in which case every function is applied to
    ``M^{-1} K`` through ``M^{-1/2} f(A_tilde) M^{1/2}``.  Region selectors are
    diagonal and commute with the mass scaling.
    """

    def __init__(self, A, alpha1: float, alpha2: float | None = None,
                 partition: RegionPartition | None = None, D: float = 1.0,
                 settings: EngineSettings | None = None,
                 defl: DeflationBasis | None = None, bounds: SpectralBounds | None = None,
                 base_region: str | int = "auto"):
        if isinstance(A, SymmetrizedOperator):
            self.scaling = A
            self.A = sp.csr_matrix(A.A)
        else:
            self.scaling = None
            self.A = sp.csr_matrix(A)
        n = self.A.shape[0]
        if partition is None:
            partition = RegionPartition.uniform(n)
        if partition.region_of.size != n:
            raise ValueError(f"partition has {partition.region_of.size} nodes, operator has {n}")
        alpha2 = alpha1 if alpha2 is None else alpha2
        self.orders = FractionalOrderField(float(alpha1), float(alpha2), partition)
        if D < 0:
            raise ValueError("D must be non-negative")
        self.D = float(D)
        self.settings = settings or EngineSettings()
        self._defl = defl
        self._bounds = bounds
        self._engine: MatrixFunctionEngine | None = None
        self._factors: dict[float, object] = {}

        # Base order applies everywhere, the correction only on one region.
        a1, a2 = self.orders.alpha1, self.orders.alpha2
        if base_region == "auto":
            self.swapped = a2 > a1
        elif base_region in (1, 2):
            self.swapped = base_region == 2
        else:
            raise ValueError(f"base_region must be 'auto', 1 or 2, got {base_region!r}")
        r = partition.region_of
        if not np.any(r == 2):
            self.swapped = False
        elif not np.any(r == 1):
            self.swapped = True
        if self.swapped:
            self.base_alpha, self.corr_alpha, self.corr_region = a2, a1, 1
        else:
            self.base_alpha, self.corr_alpha, self.corr_region = a1, a2, 2
        self.corr_mask = partition.region_of == self.corr_region

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def engine(self) -> MatrixFunctionEngine:
        if self._engine is None:
            s = self.settings
            self._engine = MatrixFunctionEngine(
                self.A, ell=s.ell, P=s.P, tol=s.tol, poly_degree=s.poly_degree,
                store_basis=s.store_basis, defl=self._defl, bounds=self._bounds,
                null_vector=None if self.scaling is None else self.scaling.sqrt_mass)
        return self._engine

    # frame changes for the mass-scaled case
    def _in(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise ValueError(f"expected a vector of length {self.n}, got shape {u.shape}")
        return u if self.scaling is None else self.scaling.to_symmetric(u)

    def _out(self, y):
        return y if self.scaling is None else self.scaling.from_symmetric(y)

    def _power(self, alpha, y):
        if alpha == 2.0:
            return self.A @ y
        return self.engine.apply(power(alpha / 2.0), y)

    def _difference(self, p_alpha, q_alpha, y):
        """``D (A^{p/2} - A^{q/2}) y`` in the symmetric frame."""
        if p_alpha == q_alpha or self.D == 0.0:
            return np.zeros_like(y)
        if p_alpha == 2.0:
            return self.D * (self.A @ y - self._power(q_alpha, y))
        if q_alpha == 2.0:
            return self.D * (self._power(p_alpha, y) - self.A @ y)
        return self.engine.apply(power_difference(self.D, p_alpha / 2.0, q_alpha / 2.0), y)

    def apply_fixed(self, alpha, u):
        """``(M^{-1}K)^{alpha/2} u`` or ``A^{alpha/2} u``."""
        _check_alpha("alpha", alpha)
        return self._out(self._power(alpha, self._in(u)))

    def apply_vofl(self, u):
        """The variable-order operator applied to ``u`` (without ``D``)."""
        y = self._in(u)
        base = self._power(self.base_alpha, y)
        if self.orders.is_fixed:
            return self._out(base)
        corr = self._power(self.corr_alpha, y) - base
        return self._out(base + np.where(self.corr_mask, corr, 0.0))

    def apply_fa(self, u):
        """``D (A^{a1/2} - A^{a2/2}) u`` as one combined matrix function."""
        a1, a2 = self.orders.alpha1, self.orders.alpha2
        return self._out(self._difference(a1, a2, self._in(u)))

    def correction(self, u):
        """``E_c D (A^{base/2} - A^{corr/2}) u``, the explicit part of the step.

        Zero for a fixed-order operator.  With the default labelling this is
        ``E_2 f_a(A) u``; after a role exchange it is the same term written
        from the other region.
        """
        if self.orders.is_fixed:
            return np.zeros(self.n)
        y = self._difference(self.base_alpha, self.corr_alpha, self._in(u))
        return np.where(self.corr_mask, self._out(y), 0.0)

    def _factor(self, dt):
        key = float(dt)
        if key not in self._factors:
            mat = sp.identity(self.n, format="csc") + (self.D * dt) * sp.csc_matrix(self.A)
            try:
                self._factors[key] = splu(mat)
            except RuntimeError as exc:
                raise LinearSolveError(f"factorisation of I + D dt A failed: {exc}") from exc
        return self._factors[key]

    def solve_fb(self, rhs, dt):
        """``(I + D dt A^{base/2})^{-1} rhs``."""
        if not dt > 0:
            raise ValueError("dt must be positive")
        y = self._in(rhs)
        if self.D == 0.0:
            return np.array(rhs, dtype=float)
        if self.base_alpha == 2.0:
            x = self._factor(dt).solve(y)
            if not np.all(np.isfinite(x)):
                raise LinearSolveError("sparse solve produced non-finite values")
        else:
            x = self.engine.apply(resolvent_of_power(self.D, dt, self.base_alpha / 2.0), y)
        return self._out(x)

    def apply_fb_inverse(self, x, dt):
        """``(I + D dt A^{base/2}) x``; the inverse of :meth:`solve_fb`."""
        y = self._in(x)
        return self._out(y + (self.D * dt) * self._power(self.base_alpha, y))
