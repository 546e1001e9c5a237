"""Spectral data for deflation and for placing the contour."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, eigsh, splu

from .contour import SpectralBounds

DENSE_LIMIT = 64  # below this size dense eigensolvers are used throughout
UPPER_SAFETY = 1.01
LOWER_SAFETY = 0.99
NULL_TOL = 1e-13  # relative to ||A||, eigenvalues below count as zero


class DeflationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DeflationBasis:
    values: np.ndarray  # ascending, shape (ell,)
    vectors: np.ndarray  # orthonormal columns, shape (N, ell)

    @property
    def ell(self) -> int:
        return self.values.size

    def project_out(self, x):
        """``(I - Q Q^T) x``."""
        if self.ell == 0:
            return x
        return x - self.vectors @ (self.vectors.T @ x)

    @classmethod
    def empty(cls, n: int) -> "DeflationBasis":
        return cls(np.zeros(0), np.zeros((n, 0)))


def _norm_estimate(A) -> float:
    return float(abs(A).sum(axis=1).max()) if sp.issparse(A) else float(np.abs(A).sum(axis=1).max())


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _shift(A) -> float:
    return 1e-6 * max(_norm_estimate(A), 1e-300)


def _factor(A, shift):
    return splu(sp.csc_matrix(A + shift * sp.identity(A.shape[0], format="csc")))


def compute_deflation_basis(A, ell: int, rtol: float = 1e-8) -> DeflationBasis:
    """The ``ell`` smallest eigenpairs of the symmetric PSD matrix ``A``."""
    n = A.shape[0]
    if not 0 <= ell <= n:
        raise ValueError(f"deflation count must lie in [0, {n}], got {ell}")
    if ell == 0:
        return DeflationBasis.empty(n)
    if n <= DENSE_LIMIT or ell >= n // 2:
        lam, vec = np.linalg.eigh(_dense(A))
        lam, vec = lam[:ell], vec[:, :ell]
    else:
        sigma = -_shift(A)
        lam, vec = eigsh(sp.csc_matrix(A), k=ell, sigma=sigma, which="LM", tol=1e-13)
        order = np.argsort(lam)
        lam, vec = lam[order], vec[:, order]
        # restore exact orthonormality within any degenerate cluster
        vec, _ = np.linalg.qr(vec)
    vec = _fix_signs(vec)
    anorm = _norm_estimate(A)
    res = np.linalg.norm(A @ vec - vec * lam, axis=0)
    if np.any(res > rtol * max(anorm, 1e-300)):
        raise DeflationError(
            f"eigenpairs for deflation did not converge; residuals {np.array2string(res, precision=2)}")
    # A is PSD: eigenvalues at round-off level are null modes, and a fractional
    # power of their noise (1e-15 ** 0.6 ~ 1e-9) would leak into f(A) b
    lam = np.where(np.abs(lam) <= NULL_TOL * max(anorm, 1e-300), 0.0, lam)
    return DeflationBasis(lam, vec)


def estimate_spectral_bounds(A, defl: DeflationBasis) -> SpectralBounds:
    """Extremal eigenvalues of ``A`` restricted to the complement of ``defl``.

    The returned bounds are the raw estimates; use ``widened()`` before
    building a contour from them.
    """
    n = A.shape[0]
    if defl.ell >= n:
        raise DeflationError("nothing left to bound: the deflation basis spans the space")
    if n <= DENSE_LIMIT:
        dense = _dense(A)
        Q = defl.vectors
        if defl.ell:
            basis = np.linalg.svd(np.eye(n) - Q @ Q.T)[0][:, : n - defl.ell]
            lam = np.linalg.eigvalsh(basis.T @ dense @ basis)
        else:
            lam = np.linalg.eigvalsh(dense)
        lmin, lmax = float(lam[0]), float(lam[-1])
    else:
        Asp = sp.csr_matrix(A)
        theta, vec = eigsh(Asp, k=1, which="LA", tol=1e-10)
        resid = float(np.linalg.norm(Asp @ vec[:, 0] - theta[0] * vec[:, 0]))
        lmax = float(theta[0]) + resid
        shift = _shift(A)
        lu = _factor(Asp, shift)

        def inv(x):
            return defl.project_out(lu.solve(defl.project_out(x)))

        op = LinearOperator((n, n), matvec=inv, dtype=float)
        v0 = defl.project_out(np.ones(n) + np.linspace(0.0, 1.0, n))
        mu, _ = eigsh(op, k=1, which="LA", tol=1e-12, v0=v0)
        lmin = 1.0 / float(mu[0]) - shift
    if lmin <= 1e-13 * lmax:
        raise DeflationError(
            f"deflated operator is numerically singular (lambda_min={lmin:.3e}, "
            f"lambda_max={lmax:.3e}); increase the deflation count")
    return SpectralBounds(lmin, lmax)
