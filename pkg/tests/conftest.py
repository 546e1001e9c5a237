import numpy as np
import pytest

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def dense_eig(A):
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A, dtype=float)
    lam, V = np.linalg.eigh(A)
    return np.clip(lam, 0.0, None), V


def dense_apply(A, fun, b):
    """``f(A) b`` by eigendecomposition; ``fun`` acts on the eigenvalues."""
    lam, V = dense_eig(A)
    return V @ (fun(lam) * (V.T @ b))


def dense_power(A, p, b):
    def fun(lam):
        out = np.zeros_like(lam)
        pos = lam > 1e-12 * max(lam.max(), 1.0)
        out[pos] = lam[pos] ** p
        return out

    return dense_apply(A, fun, b)


def dense_variable_order(A, alpha1, alpha2, region_of, u):
    """Row ``i`` of ``V diag(lam^(alpha_i/2)) V^T u`` with ``alpha_i`` by region."""
    y1 = dense_power(A, alpha1 / 2.0, u)
    y2 = dense_power(A, alpha2 / 2.0, u)
    return np.where(np.asarray(region_of) == 2, y2, y1)


def dense_power_matrix(A, p):
    """``A^p`` as a dense matrix; ``p = 1`` returns ``A`` itself, untouched by round-off."""
    if p == 1.0:
        return A.toarray() if hasattr(A, "toarray") else np.array(A, dtype=float)
    lam, V = dense_eig(A)
    vals = np.where(lam > 1e-12 * max(lam.max(), 1.0), lam, 0.0) ** p
    return (V * vals) @ V.T


def dense_vofl_matrix(A, alpha1, alpha2, region_of):
    """Rows of ``A^(alpha_i/2)`` chosen by region."""
    L1 = dense_power_matrix(A, alpha1 / 2.0)
    L2 = dense_power_matrix(A, alpha2 / 2.0)
    return np.where((np.asarray(region_of) == 2)[:, None], L2, L1)


def dense_implicit_euler(L, D, dt, u0, n_steps, g=None, dg=None, tol=1e-14):
    """Backward Euler for ``u' = -D L u + g(u)`` by Newton on every step."""
    n = u0.size
    J0 = np.eye(n) + dt * D * L
    u = np.array(u0, dtype=float)
    for _ in range(n_steps):
        u_n = u.copy()
        for _ in range(50):
            res = J0 @ u - u_n - (dt * g(u) if g is not None else 0.0)
            J = J0 - (dt * np.diag(dg(u)) if dg is not None else 0.0)
            du = np.linalg.solve(J, res)
            u -= du
            if np.max(np.abs(du)) <= tol * (1.0 + np.max(np.abs(u))):
                break
    return u


def rel_err(x, ref):
    return float(np.linalg.norm(x - ref) / max(np.linalg.norm(ref), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
