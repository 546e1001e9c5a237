"""Complete elliptic integral K and Jacobi elliptic functions.

Only real moduli ``0 <= k < 1`` are needed.  Complex arguments are handled by
the addition theorem on top of real-argument evaluations with moduli ``k``
and ``k' = sqrt(1 - k^2)`` (Jacobi's imaginary transformation).
"""

import math
import warnings

import numpy as np

_AGM_TOL = 1e-16


def _agm(a, b):
    for _ in range(64):
        if abs(a - b) <= _AGM_TOL * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def complete_elliptic_K(k: float) -> float:
    """K(k) = int_0^{pi/2} (1 - k^2 sin^2 t)^{-1/2} dt via the AGM."""
    k = float(k)
    if not 0.0 <= k < 1.0:
        raise ValueError(f"modulus must satisfy 0 <= k < 1, got {k!r}")
    return math.pi / (2.0 * _agm(1.0, math.sqrt((1.0 - k) * (1.0 + k))))


def complementary_modulus(k: float) -> float:
    return math.sqrt((1.0 - k) * (1.0 + k))


def _landen_real(x, k):
    """sn, cn, dn for real ``x`` and modulus ``0 <= k <= 1``."""
    x = np.asarray(x, dtype=float)
    if k == 0.0:
        return np.sin(x), np.cos(x), np.ones_like(x)
    if k == 1.0:
        sech = 1.0 / np.cosh(x)
        return np.tanh(x), sech, sech.copy()

    a = [1.0]
    c = [k]
    b = complementary_modulus(k)
    while abs(c[-1]) > 1e-17 * a[-1] and len(a) < 64:
        an = 0.5 * (a[-1] + b)
        c.append(0.5 * (a[-1] - b))
        b = math.sqrt(a[-1] * b)
        a.append(an)
    n = len(a) - 1
    phi = (2.0**n) * a[n] * x
    prev = phi
    for i in range(n, 0, -1):
        prev = phi
        phi = 0.5 * (phi + np.arcsin(c[i] / a[i] * np.sin(phi)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    direct = np.sqrt((1.0 - k * sn) * (1.0 + k * sn))
    if n == 0:
        return sn, cn, direct
    # cos-ratio form is 0/0 near odd multiples of K
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = cn / np.cos(prev - phi)
    dn = np.where(np.abs(cn) > 1e-3, ratio, direct)
    return sn, cn, dn


def jacobi_elliptic(tau, k: float):
    """Jacobi sn, cn, dn of (possibly complex) argument ``tau``, modulus ``k``.

    Returns complex arrays.  A ``RuntimeWarning`` is issued when an argument
    lies so close to a pole that the values are unreliable.
    """
    if not 0.0 <= k < 1.0:
        raise ValueError(f"modulus must satisfy 0 <= k < 1, got {k!r}")
    tau = np.asarray(tau, dtype=complex)
    s, c, d = _landen_real(tau.real, k)
    s1, c1, d1 = _landen_real(tau.imag, complementary_modulus(k))
    den = c1 * c1 + (k * s * s1) ** 2
    if np.any(np.abs(den) < 1e-12):
        warnings.warn("argument close to a pole of the elliptic functions; "
                      "results may be inaccurate", RuntimeWarning, stacklevel=2)
    sn = (s * d1 + 1j * c * d * s1 * c1) / den
    cn = (c * c1 - 1j * s * d * s1 * d1) / den
    dn = (d * c1 * d1 - 1j * k * k * s * c * s1) / den
    return sn, cn, dn
