"""Conformally mapped contour quadrature for f(A)b with A SPD.

The contour is the image of the segment ``Im tau = K'/2, -K < Re tau < K``
under ``z(tau) = sqrt(lmin lmax) (1/k + sn tau) / (1/k - sn tau)``; it encloses
``[lmin, lmax]`` and stays inside the right half plane, so any ``f`` analytic
off the negative real axis is admissible.  Midpoint sampling converges
geometrically in the number of poles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .elliptic import complementary_modulus, complete_elliptic_K, jacobi_elliptic


@dataclass(frozen=True)
class SpectralFunction:
    """A scalar function applied to the spectrum of a matrix.

    ``kind`` is one of

    * ``"power"``: ``z**p``
    * ``"resolvent"``: ``1 / (1 + D dt z**p)``
    * ``"difference"``: ``D (z**p - z**q)``

    with the principal branch for non-integer powers.
    """

    kind: str
    p: float
    q: float = 0.0
    D: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "resolvent", "difference"):
            raise ValueError(f"unknown spectral function kind {self.kind!r}")

    def __call__(self, z):
        z = np.asarray(z)
        if self.kind == "power":
            return z**self.p
        if self.kind == "resolvent":
            return 1.0 / (1.0 + self.D * self.dt * z**self.p)
        return self.D * (z**self.p - z**self.q)

    def on_spectrum(self, lam):
        """Evaluate at real non-negative eigenvalues; ``f(0)`` by continuity."""
        lam = np.clip(np.asarray(lam, dtype=float), 0.0, None)
        with np.errstate(divide="ignore"):
            return np.real(self(lam))

    @property
    def is_zero(self) -> bool:
        return self.kind == "difference" and (self.D == 0.0 or self.p == self.q)

    @property
    def is_identity(self) -> bool:
        return self.kind == "power" and self.p == 0.0

    def factored(self) -> tuple[int, "SpectralFunction"]:
        """Split ``f(z) = z**n g(z)`` with ``g`` bounded on the spectrum.

        Power-type functions grow like ``z**p`` and the quadrature error
        scales with the largest value on the contour; applying one exact
        sparse product first leaves a function of moderate size.
        """
        if self.kind == "power" and self.p > 0.0:
            return 1, SpectralFunction("power", self.p - 1.0)
        if self.kind == "difference" and min(self.p, self.q) > 0.0:
            return 1, SpectralFunction("difference", self.p - 1.0, q=self.q - 1.0, D=self.D)
        return 0, self


def power(p: float) -> SpectralFunction:
    return SpectralFunction("power", p)


def resolvent_of_power(D: float, dt: float, p: float) -> SpectralFunction:
    return SpectralFunction("resolvent", p, D=D, dt=dt)


def power_difference(D: float, p: float, q: float) -> SpectralFunction:
    return SpectralFunction("difference", p, q=q, D=D)


@dataclass(frozen=True)
class SpectralBounds:
    lambda_min: float
    lambda_max: float

    def __post_init__(self):
        if not 0.0 < self.lambda_min <= self.lambda_max:
            raise ValueError(
                f"need 0 < lambda_min <= lambda_max, got {self.lambda_min}, {self.lambda_max}")

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min

    @property
    def k(self) -> float:
        s = math.sqrt(self.kappa)
        return (s - 1.0) / (s + 1.0)

    def widened(self, lower=0.99, upper=1.01) -> "SpectralBounds":
        """Bounds padded so the contour strictly encloses the estimated spectrum."""
        return SpectralBounds(self.lambda_min * lower, self.lambda_max * upper)


@dataclass(frozen=True)
class ContourQuadrature:
    """Poles ``z_j`` and weights ``w_j`` with ``f(A)b ~ Im sum_j w_j (z_j - A)^{-1} b``.

    The midpoint spacing ``2K/P`` is folded into the weights.
    """

    P: int
    tau: np.ndarray
    poles: np.ndarray
    weights: np.ndarray
    K: float
    Kp: float
    k: float

    def scalar(self, lam):
        lam = np.asarray(lam, dtype=float)
        terms = self.weights[:, None] / (self.poles[:, None] - lam.ravel()[None, :])
        return np.imag(terms.sum(axis=0)).reshape(lam.shape)


def build_contour(f: SpectralFunction, bounds: SpectralBounds, P: int) -> ContourQuadrature:
    if P < 1:
        raise ValueError("need at least one quadrature point")
    k = bounds.k
    if k <= 1e-14:
        raise ValueError("degenerate spectral interval; widen the bounds before building a contour")
    K = complete_elliptic_K(k)
    Kp = complete_elliptic_K(complementary_modulus(k))
    j = np.arange(1, P + 1)
    tau = -K + K * (2 * j - 1) / P + 0.5j * Kp
    sn, cn, dn = jacobi_elliptic(tau, k)
    scale = math.sqrt(bounds.lambda_min * bounds.lambda_max)
    kinv = 1.0 / k
    z = scale * (kinv + sn) / (kinv - sn)
    fz = f(z)
    if not np.all(np.isfinite(fz)):
        raise ValueError("spectral function is not finite at a quadrature pole")
    w = -2.0 * scale * fz * cn * dn / (math.pi * k * (kinv - sn) ** 2)
    w = w * (2.0 * K / P)
    return ContourQuadrature(P=P, tau=tau, poles=z, weights=w, K=K, Kp=Kp, k=k)
