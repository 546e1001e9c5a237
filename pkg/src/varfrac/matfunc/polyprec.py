"""Least-squares polynomial preconditioning that survives shifting.

With ``q(lam) = lam p(lam)`` and ``p`` the least-squares approximation to
``1/lam`` on the spectral interval, each shifted system ``(s I - A) x = b``
becomes ``(q(s) I - q(A)) y = b`` with ``x = p_s(A) y`` and
``p_s(lam) = (q(lam) - q(s)) / (lam - s)``.  All shifted systems therefore
share one Krylov space, that of ``q(A)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import chebyshev, polynomial
from scipy.special import roots_jacobi

# Jacobi weight (1 - t)^mu (1 + t)^nu on [-1, 1]; t = -1 is the lower spectral end.
JACOBI_MU = 0.5
JACOBI_NU = -0.5


@dataclass(frozen=True)
class PolyPreconditioner:
    degree: int
    center: float
    half_width: float
    q_coeffs: np.ndarray  # monomial coefficients of q in t = (lam - center) / half_width

    @classmethod
    def least_squares(cls, lambda_min: float, lambda_max: float, degree: int = 8):
        if degree < 0:
            raise ValueError("polynomial degree must be non-negative")
        c = 0.5 * (lambda_max + lambda_min)
        h = 0.5 * (lambda_max - lambda_min)
        if h <= 0.0:
            h = abs(c) * 1e-3 or 1.0
        nodes, weights = roots_jacobi(degree + 6, JACOBI_MU, JACOBI_NU)
        lam = c + h * nodes
        basis = chebyshev.chebvander(nodes, degree) * lam[:, None]
        sw = np.sqrt(weights)
        coef, *_ = np.linalg.lstsq(basis * sw[:, None], sw, rcond=None)
        p_t = chebyshev.cheb2poly(coef)
        q_t = polynomial.polymul([c, h], p_t)
        return cls(degree, c, h, np.asarray(q_t, dtype=float))

    def q(self, lam):
        """The preconditioned spectrum map ``q(lam) = lam p(lam)``."""
        t = (np.asarray(lam) - self.center) / self.half_width
        return polynomial.polyval(t, self.q_coeffs)

    def apply_q(self, matvec, v):
        """``q(A) v`` by Horner's rule in ``(A - c I) / h``."""
        return self.apply_q_scaled(self.scaled_matvec(matvec), v)

    def apply_q_scaled(self, tmatvec, v):
        """``q(A) v`` given ``tmatvec`` applying ``T = (A - c I) / h`` directly."""
        qc = self.q_coeffs
        acc = qc[-1] * v
        for i in range(qc.size - 2, -1, -1):
            acc = tmatvec(acc)
            acc += qc[i] * v
        return acc

    def scaled_matvec(self, matvec):
        c, h = self.center, self.half_width
        return lambda x: (matvec(x) - c * x) / h

    def scaled_operator(self, A):
        """``T = (A - c I) / h`` as a sparse matrix."""
        n = A.shape[0]
        return sp.csr_matrix((sp.csr_matrix(A) - self.center * sp.identity(n, format="csr")) / self.half_width)

    def _horner(self, tmatvec, terms):
        acc = np.array(terms[-1], copy=True)
        for term in reversed(terms[:-1]):
            acc = tmatvec(acc)
            acc += term
        return acc

    def shift_polynomials(self, shifts) -> np.ndarray:
        """Coefficients (rows per shift, columns per power of t) of ``p_s``.

        ``p_s(lam) = sum_i R[s, i] t^i`` with ``t = (lam - c) / h``.
        """
        shifts = np.atleast_1d(np.asarray(shifts, dtype=complex))
        ts = (shifts - self.center) / self.half_width
        qc = self.q_coeffs
        n = qc.size - 1
        out = np.zeros((shifts.size, n), dtype=complex)
        # synthetic division of Q(t) - Q(ts) by (t - ts)
        carry = np.full(shifts.size, qc[n], dtype=complex)
        out[:, n - 1] = carry
        for i in range(n - 1, 0, -1):
            carry = qc[i] + ts * carry
            out[:, i - 1] = carry
        return out / self.half_width

    def combine(self, matvec, blocks, scaled=False):
        """``sum_i T^i blocks[i]`` with ``T = (A - c I) / h`` (real blocks).

        ``matvec`` applies ``A``, or ``T`` itself when ``scaled`` is true.
        """
        tmatvec = matvec if scaled else self.scaled_matvec(matvec)
        return self._horner(tmatvec, list(blocks))
