"""Single-basis Lanczos solver for families of shifted symmetric systems.

One Lanczos recurrence on the real symmetric operator serves every shift
``s_j``: with ``A V_m = V_m T_m + beta_m v_{m+1} e_m^T`` the Galerkin solution
of ``(s_j I - A) x = b`` is ``V_m y_j``, ``(s_j I - T_m) y_j = |b| e_1``, and its
residual norm is ``beta_m |e_m^T y_j|``.  That identity holds in floating
point regardless of lost orthogonality, so no reorthogonalisation is done.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded


class LanczosError(RuntimeError):
    pass


@dataclass
class SolverStats:
    """Counters accumulated by a Lanczos run."""

    iterations: int = 0
    matvecs: int = 0
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = True
    breakdown: bool = False

    def merge(self, other: "SolverStats") -> None:
        self.iterations += other.iterations
        self.matvecs += other.matvecs
        self.residuals = other.residuals
        self.converged = self.converged and other.converged
        self.breakdown = self.breakdown or other.breakdown


class LanczosRun:
    """Lanczos tridiagonalisation of ``op`` driven until all shifts converge.

    ``op`` is a callable on real vectors.  With ``store_basis=False`` only the
    recurrence coefficients are kept and the basis is regenerated on demand.
    """

    def __init__(self, op, b, shifts, tol=1e-9, max_iter=None, store_basis=True,
                 matvecs_per_op=1):
        b = np.asarray(b, dtype=float)
        self.op = op
        self.b = b
        self.shifts = np.atleast_1d(np.asarray(shifts, dtype=complex))
        self.tol = tol
        self.store_basis = store_basis
        self.stats = SolverStats()
        self.alpha: list[float] = []
        self.beta: list[float] = []  # beta[i] couples v_i and v_{i+1}
        self.basis: list[np.ndarray] | None = [] if store_basis else None
        self.bnorm = float(np.linalg.norm(b))
        n = b.size
        if max_iter is None:
            max_iter = max(3 * n, 300)
        self.max_iter = max_iter
        self._matvecs_per_op = matvecs_per_op
        if self.bnorm == 0.0:
            self.stats.residuals = np.zeros(self.shifts.size)
            return
        self._run()

    def _run(self):
        shifts = self.shifts
        v = self.b / self.bnorm
        v_prev = np.zeros_like(v)
        beta_prev = 0.0
        # continuant recurrences: r = det_m / det_{m-1}, rho = prod(beta) / det_m
        r = np.ones_like(shifts)
        rho = np.ones_like(shifts)
        scale = 0.0
        res = np.full(shifts.size, np.inf)
        for m in range(1, self.max_iter + 1):
            if self.basis is not None:
                self.basis.append(v)
            w = self.op(v)
            self.stats.matvecs += self._matvecs_per_op
            a = float(np.dot(w, v))
            w = w - a * v - beta_prev * v_prev
            beta = float(np.linalg.norm(w))
            self.alpha.append(a)
            scale = max(scale, abs(a) + beta + beta_prev)
            if m == 1:
                r = shifts - a
                rho = 1.0 / r
            else:
                r = (shifts - a) - beta_prev**2 / r
                rho = rho * beta_prev / r
            res = beta * np.abs(rho)
            self.stats.iterations = m
            if beta <= 1e-14 * scale:
                self.stats.breakdown = True
                res = np.zeros_like(res)
                break
            self.beta.append(beta)
            if np.all(res <= self.tol):
                break
            v_prev, v = v, w / beta
            beta_prev = beta
        self.stats.residuals = res * self.bnorm
        self.stats.converged = bool(np.all(res <= self.tol))
        if len(self.beta) > len(self.alpha) - 1:
            # keep the coupling to v_{m+1} separately; T_m uses beta[:m-1]
            self.last_beta = self.beta.pop()
        else:
            self.last_beta = 0.0

    @property
    def size(self) -> int:
        return len(self.alpha)

    def coefficients(self, shifts=None) -> np.ndarray:
        """Columns ``y_j`` with ``(s_j I - T_m) y_j = |b| e_1``."""
        shifts = self.shifts if shifts is None else np.atleast_1d(np.asarray(shifts, complex))
        m = self.size
        if m == 0:
            return np.zeros((0, shifts.size), dtype=complex)
        alpha = np.asarray(self.alpha)
        beta = np.asarray(self.beta)
        rhs = np.zeros(m, dtype=complex)
        rhs[0] = self.bnorm
        out = np.empty((m, shifts.size), dtype=complex)
        ab = np.zeros((3, m), dtype=complex)
        for j, s in enumerate(shifts):
            ab[0, 1:] = -beta
            ab[1, :] = s - alpha
            ab[2, :-1] = -beta
            out[:, j] = solve_banded((1, 1), ab, rhs, check_finite=False)
        return out

    def expand(self, coeffs) -> np.ndarray:
        """``V_m @ coeffs`` for real ``coeffs`` of shape (m,) or (m, k)."""
        coeffs = np.asarray(coeffs)
        if self.size == 0:
            shape = (self.b.size,) + coeffs.shape[1:]
            return np.zeros(shape, dtype=coeffs.dtype)
        if self.basis is not None:
            return np.stack(self.basis, axis=1) @ coeffs
        # replay the recurrence; identical arithmetic reproduces the basis exactly
        out = np.zeros((self.b.size,) + coeffs.shape[1:], dtype=np.result_type(coeffs, float))
        v = self.b / self.bnorm
        v_prev = np.zeros_like(v)
        beta_prev = 0.0
        m = self.size
        for i in range(m):
            out += np.multiply.outer(v, coeffs[i])
            if i == m - 1:
                break
            w = self.op(v)
            self.stats.matvecs += self._matvecs_per_op
            w = w - self.alpha[i] * v - beta_prev * v_prev
            v_prev, v = v, w / self.beta[i]
            beta_prev = self.beta[i]
        return out


def shifted_lanczos_solve(matvec, b, shifts, tol=1e-9, precond=None, max_iter=None,
                          store_basis=True, raise_on_failure=True):
    """Solve ``(s_j I - A) x_j = b`` for every shift from one Krylov basis.

    ``matvec`` applies the real symmetric ``A``.  With a
    :class:`~varfrac.matfunc.polyprec.PolyPreconditioner` the basis is built
    for ``q(A)`` instead and each solution is recovered as ``p_s(A) y``.
    Returns ``(X, stats)`` with ``X[:, j]`` the solution for ``shifts[j]``.
    """
    shifts = np.atleast_1d(np.asarray(shifts, dtype=complex))
    b = np.asarray(b, dtype=float)
    if precond is None:
        run = LanczosRun(matvec, b, shifts, tol=tol, max_iter=max_iter, store_basis=store_basis)
    else:
        run = LanczosRun(lambda v: precond.apply_q(matvec, v), b, precond.q(shifts), tol=tol,
                         max_iter=max_iter, store_basis=store_basis,
                         matvecs_per_op=precond.q_coeffs.size - 1)
    _check(run, raise_on_failure)
    Y = run.coefficients()
    X = np.empty((b.size, shifts.size), dtype=complex)
    if precond is None:
        X[:] = run.expand(Y.real) + 1j * run.expand(Y.imag)
    else:
        R = precond.shift_polynomials(shifts)
        for j in range(shifts.size):
            y = run.expand(Y[:, j].real) + 1j * run.expand(Y[:, j].imag)
            blocks_re = [R[j, i].real * y.real - R[j, i].imag * y.imag for i in range(R.shape[1])]
            blocks_im = [R[j, i].real * y.imag + R[j, i].imag * y.real for i in range(R.shape[1])]
            X[:, j] = precond.combine(matvec, blocks_re) + 1j * precond.combine(matvec, blocks_im)
            run.stats.matvecs += 2 * (R.shape[1] - 1)
    return X, run.stats


def _check(run: LanczosRun, raise_on_failure: bool) -> None:
    if run.stats.converged or not raise_on_failure:
        return
    worst = float(np.max(run.stats.residuals)) / (run.bnorm or 1.0)
    raise LanczosError(
        f"shifted Lanczos did not converge in {run.stats.iterations} iterations; "
        f"worst relative residual {worst:.3e} (tol {run.tol:.1e})")
