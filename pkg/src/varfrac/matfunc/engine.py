"""f(A)b for sparse symmetric positive semi-definite A.

The smallest eigenpairs ``(Lambda, Q)`` are treated exactly and the rest by
contour quadrature on ``b_hat = (I - Q Q^T) b``:

    f(A) b = Q f(Lambda) Q^T b + f(A_hat) b_hat.
"""

from __future__ import annotations

import logging
import warnings

import numpy as np
import scipy.sparse as sp

from .contour import ContourQuadrature, SpectralBounds, SpectralFunction, build_contour
from .deflation import (
    LOWER_SAFETY,
    UPPER_SAFETY,
    DeflationBasis,
    compute_deflation_basis,
    estimate_spectral_bounds,
)
from .lanczos import LanczosRun, SolverStats, _check
from .polyprec import PolyPreconditioner

logger = logging.getLogger(__name__)

DEFAULT_P = 32
DEFAULT_TOL = 1e-9
DEFAULT_POLY_DEGREE = 8
POLY_MIN_KAPPA = 100.0


class AccuracyWarning(RuntimeWarning):
    pass


def fast_matvec(M):
    """A plain ``x -> M @ x`` closure for a CSR matrix or dense array.

    Calls the compiled CSR kernel directly when available; the generic
    ``@`` dispatch costs more than the product itself for small operators.
    """
    if not sp.issparse(M):
        return lambda x: M @ x
    M = sp.csr_matrix(M)
    try:
        from scipy.sparse._sparsetools import csr_matvec
    except ImportError:  # pragma: no cover - depends on scipy internals
        return lambda x: M @ x
    n, m = M.shape
    indptr, indices, data = M.indptr, M.indices, M.data

    def mv(x):
        y = np.zeros(n, dtype=np.result_type(data, x))
        csr_matvec(n, m, indptr, indices, data, np.ascontiguousarray(x), y)
        return y

    return mv


def has_neumann_nullspace(A, atol=1e-12, null_vector=None) -> bool:
    """True when ``A w = 0`` for ``w`` the constant vector (or ``null_vector``)."""
    w = np.ones(A.shape[0]) if null_vector is None else np.asarray(null_vector, dtype=float)
    rows = np.abs(A @ w)
    scale = float(abs(A).max()) if sp.issparse(A) else float(np.abs(A).max())
    return bool(np.all(rows <= atol * max(scale, 1.0) * float(np.max(np.abs(w)))))


class MatrixFunctionEngine:
    """Reusable state for repeated ``f(A) b`` evaluations with a fixed ``A``.

    Deflation basis, spectral bounds, preconditioner and contours are computed
    once.  ``stats`` accumulates over all calls; ``last_stats`` describes the
    most recent one.
    """

    def __init__(self, A, ell=None, P=DEFAULT_P, tol=DEFAULT_TOL, poly_degree=DEFAULT_POLY_DEGREE,
                 store_basis=True, defl: DeflationBasis | None = None,
                 bounds: SpectralBounds | None = None, max_iter=None, null_vector=None):
        self.A = sp.csr_matrix(A) if sp.issparse(A) else np.asarray(A, dtype=float)
        n = self.A.shape[0]
        self.n = n
        if defl is None:
            if ell is None:
                ell = 1 if has_neumann_nullspace(self.A, null_vector=null_vector) else 0
            defl = compute_deflation_basis(self.A, ell)
        self.defl = defl
        if bounds is None and defl.ell < n:
            bounds = estimate_spectral_bounds(self.A, defl)
        self.bounds = bounds
        self.contour_bounds = None if bounds is None else bounds.widened(LOWER_SAFETY, UPPER_SAFETY)
        self.P = P
        self.tol = tol
        self.store_basis = store_basis
        self.max_iter = max_iter
        self.precond = None
        self._raw_matvec = fast_matvec(self.A)
        if bounds is not None and poly_degree and bounds.kappa >= POLY_MIN_KAPPA:
            cb = self.contour_bounds
            self.precond = PolyPreconditioner.least_squares(cb.lambda_min, cb.lambda_max, poly_degree)
            self._tmatvec = fast_matvec(self.precond.scaled_operator(self.A))
        self._contours: dict = {}
        self.stats = SolverStats()
        self.last_stats = SolverStats()
        logger.debug("engine: n=%d ell=%d bounds=%s precond=%s", n, defl.ell, bounds,
                     None if self.precond is None else self.precond.degree)

    def matvec(self, v):
        """Action of the deflated operator ``(I - QQ^T) A (I - QQ^T)``."""
        w = self._raw_matvec(self.defl.project_out(v))
        return self.defl.project_out(w)

    def _precond_op(self, v):
        # q(A_hat) v; the projection commutes with A up to eigenvector accuracy
        d = self.defl
        return d.project_out(self.precond.apply_q_scaled(self._tmatvec, d.project_out(v)))

    def contour(self, f: SpectralFunction, P=None) -> ContourQuadrature:
        P = self.P if P is None else P
        key = (f, P)
        if key not in self._contours:
            self._contours[key] = build_contour(f, self.contour_bounds, P)
        return self._contours[key]

    def deflated_part(self, f: SpectralFunction, b):
        if self.defl.ell == 0:
            return np.zeros_like(b)
        Q = self.defl.vectors
        return Q @ (f.on_spectrum(self.defl.values) * (Q.T @ b))

    def apply(self, f: SpectralFunction, b, P=None, check_refinement=False) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        stats = SolverStats()
        self.last_stats = stats
        out = self.deflated_part(f, b)
        if f.is_zero:
            return np.zeros_like(b)
        b_hat = self.defl.project_out(b)
        if self.bounds is None or not np.any(b_hat) or np.linalg.norm(b_hat) <= 1e-15 * np.linalg.norm(b):
            return out
        n_products, g = f.factored()
        for _ in range(n_products):
            b_hat = self.matvec(b_hat)
            stats.matvecs += 1
        if g.is_identity:
            return out + b_hat
        quads = [self.contour(g, P)]
        if check_refinement:
            quads.append(self.contour(g, 2 * quads[0].P))
        poles = np.concatenate([q.poles for q in quads])

        if self.precond is None:
            run = LanczosRun(self.matvec, b_hat, poles, tol=self.tol, max_iter=self.max_iter,
                             store_basis=self.store_basis)
        else:
            pc = self.precond
            run = LanczosRun(self._precond_op, b_hat, pc.q(poles), tol=self.tol,
                             max_iter=self.max_iter, store_basis=self.store_basis,
                             matvecs_per_op=pc.q_coeffs.size - 1)
        _check(run, raise_on_failure=True)
        Y = run.coefficients()
        results = []
        start = 0
        for quad in quads:
            Yq = Y[:, start:start + quad.P]
            start += quad.P
            if self.precond is None:
                results.append(run.expand(np.imag(Yq @ quad.weights)))
            else:
                R = self.precond.shift_polynomials(quad.poles)
                U = Yq @ (quad.weights[:, None] * R)
                blocks = run.expand(np.imag(U))
                combined = self.precond.combine(self._tmatvec, [blocks[:, i] for i in range(blocks.shape[1])],
                                                scaled=True)
                results.append(combined)
                run.stats.matvecs += R.shape[1] - 1
        stats.merge(run.stats)
        self.stats.merge(stats)
        if check_refinement:
            diff = np.linalg.norm(results[0] - results[1])
            ref = max(np.linalg.norm(results[1]), 1e-300)
            if diff > max(10 * self.tol, 1e-8) * ref:
                warnings.warn(f"contour quadrature not converged: P={quads[0].P} and P={quads[1].P} "
                              f"differ by {diff / ref:.2e} (relative)", AccuracyWarning, stacklevel=2)
        return out + self.defl.project_out(results[0])


def matfunc_apply(f: SpectralFunction, A, b, defl: DeflationBasis | None = None, P=DEFAULT_P,
                  tol=DEFAULT_TOL, poly_degree=DEFAULT_POLY_DEGREE, full_output=False, **kwargs):
    """One-shot ``f(A) b``.  With ``full_output`` returns ``(x, stats)``."""
    engine = MatrixFunctionEngine(A, defl=defl, P=P, tol=tol, poly_degree=poly_degree, **kwargs)
    x = engine.apply(f, b)
    return (x, engine.last_stats) if full_output else x
