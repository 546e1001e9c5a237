"""Reaction terms: the Fisher source and the Beeler-Reuter ionic model.

Beeler-Reuter quantities follow the usual units: voltage in mV, currents in
uA/cm^2, time in ms.  Calcium is carried in the scaled form ``c = 1e7 [Ca]_i``
so that the resting value is 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GATES = ("m", "h", "j", "d", "f", "x")
STATE_NAMES = ("v",) + GATES + ("c",)

# C1..C7 of  (C1 exp(C2 (v + C3)) + C4 (v + C5)) / (exp(C6 (v + C3)) + C7)
RATE_COEFFICIENTS: dict[str, tuple[float, ...]] = {
    "alpha_m": (0.0, 0.0, 47.0, -1.0, 47.0, -0.1, -1.0),
    "beta_m": (40.0, -0.056, 72.0, 0.0, 0.0, 0.0, 0.0),
    "alpha_h": (0.126, -0.25, 77.0, 0.0, 0.0, 0.0, 0.0),
    "beta_h": (1.7, 0.0, 22.5, 0.0, 0.0, -0.082, 1.0),
    "alpha_j": (0.055, -0.25, 78.0, 0.0, 0.0, -0.2, 1.0),
    "beta_j": (0.3, 0.0, 32.0, 0.0, 0.0, -0.1, 1.0),
    "alpha_d": (0.095, -0.01, -5.0, 0.0, 0.0, -0.072, 1.0),
    "beta_d": (0.07, -0.017, 44.0, 0.0, 0.0, 0.05, 1.0),
    "alpha_f": (0.012, -0.008, 28.0, 0.0, 0.0, 0.15, 1.0),
    "beta_f": (0.0065, -0.02, 30.0, 0.0, 0.0, -0.2, 1.0),
    "alpha_x": (0.0005, 0.083, 50.0, 0.0, 0.0, 0.057, 1.0),
    "beta_x": (0.0013, -0.06, 20.0, 0.0, 0.0, -0.04, 1.0),
}

RESTING_VOLTAGE = -85.0
RESTING_GATES = {"m": 0.0, "h": 1.0, "j": 1.0, "d": 0.0, "f": 1.0, "x": 0.0}
RESTING_CALCIUM = 1.0

# below this the exp(C6 (v + C3)) - 1 denominator is replaced by its limit
_SINGULAR_EPS = 1e-9


class IonicDomainError(ValueError):
    """State outside the domain of the ionic model (non-positive calcium)."""


def fisher_source(u):
    """Logistic growth term ``u (1 - u)``."""
    u = np.asarray(u, dtype=float)
    return u * (1.0 - u)


def _rate(coeffs, v):
    c1, c2, c3, c4, c5, c6, c7 = coeffs
    s = v + c3
    num = c1 * np.exp(c2 * s) + c4 * (v + c5)
    if c7 == -1.0:
        # removable singularity when v + C3 -> 0 (only a genuine 0/0 if C1 == 0 and C5 == C3)
        den = np.expm1(c6 * s)
        small = np.abs(den) < _SINGULAR_EPS
        with np.errstate(divide="ignore", invalid="ignore"):
            out = num / np.where(small, 1.0, den)
        if np.any(small):
            out = np.where(small, c4 / c6, out)
        return out
    return num / (np.exp(c6 * s) + c7)


def br_rates(v) -> dict[str, np.ndarray]:
    """All twelve opening/closing rates (1/ms) at voltage ``v`` (mV)."""
    v = np.asarray(v, dtype=float)
    return {name: _rate(coeffs, v) for name, coeffs in RATE_COEFFICIENTS.items()}


class RateTable:
    """Tabulated rates on a uniform voltage grid with linear interpolation.

    Voltages outside the table range fall back to direct evaluation.
    """

    def __init__(self, v_min=-120.0, v_max=80.0, step=0.01):
        n = int(round((v_max - v_min) / step)) + 1
        self.v_min = v_min
        self.step = step
        self.grid = v_min + step * np.arange(n)
        self.v_max = self.grid[-1]
        self.values = br_rates(self.grid)

    def __call__(self, v) -> dict[str, np.ndarray]:
        v = np.asarray(v, dtype=float)
        inside = (v >= self.v_min) & (v <= self.v_max)
        if not np.all(inside):
            direct = br_rates(v)
        pos = (np.clip(v, self.v_min, self.v_max) - self.v_min) / self.step
        i = np.minimum(pos.astype(np.int64), self.grid.size - 2)
        w = pos - i
        out = {}
        for name, tab in self.values.items():
            r = (1.0 - w) * tab[i] + w * tab[i + 1]
            out[name] = r if np.all(inside) else np.where(inside, r, direct[name])
        return out


def _ik1(v):
    # 0.07 (v + 23) / (1 - exp(-0.04 (v + 23))), limit 0.07 / 0.04 at v = -23
    s = v + 23.0
    den = -np.expm1(-0.04 * s)
    small = np.abs(den) < _SINGULAR_EPS
    with np.errstate(divide="ignore", invalid="ignore"):
        q = s / np.where(small, 1.0, den)
    q = np.where(small, 25.0, q)
    return 0.07 * q


def calcium_current(v, d, f, c):
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0.0):
        node = int(np.flatnonzero(np.atleast_1d(c) <= 0.0)[0])
        raise IonicDomainError(f"calcium must be positive (log of non-positive concentration) at node {node}")
    return 0.09 * d * f * (v + 82.3 + 13.0287 * np.log(1e-7 * c))


def br_currents(v, m, h, j, d, f, x, c) -> dict[str, np.ndarray]:
    """Membrane currents in uA/cm^2 and their sum ``I_ion``."""
    v = np.asarray(v, dtype=float)
    i_na = (4.0 * m**3 * h * j + 0.003) * (v - 50.0)
    i_k = (
        1.4 * np.expm1(0.04 * (v + 85.0)) / (np.exp(0.08 * (v + 53.0)) + np.exp(0.04 * (v + 53.0)))
        + _ik1(v)
    )
    i_x = 0.8 * x * np.expm1(0.04 * (v + 77.0)) / np.exp(0.04 * (v + 35.0))
    i_s = calcium_current(v, d, f, c)
    return {"I_Na": i_na, "I_K": i_k, "I_x": i_x, "I_s": i_s, "I_ion": i_na + i_k + i_x + i_s}


@dataclass
class IonicStateField:
    """Per-node Beeler-Reuter state.  ``gates`` rows are ordered m, h, j, d, f, x."""

    v: np.ndarray
    gates: np.ndarray
    c: np.ndarray

    def gate(self, name: str) -> np.ndarray:
        return self.gates[GATES.index(name)]

    def copy(self) -> "IonicStateField":
        return IonicStateField(self.v.copy(), self.gates.copy(), self.c.copy())


def resting_state(n: int) -> IonicStateField:
    gates = np.empty((len(GATES), n))
    for row, name in enumerate(GATES):
        gates[row] = RESTING_GATES[name]
    return IonicStateField(np.full(n, RESTING_VOLTAGE), gates, np.full(n, RESTING_CALCIUM))


def br_advance_gates(gates, c, v, dt, rates=br_rates):
    """Advance gates exponentially and calcium by linearised backward Euler.

    Voltage is frozen at ``v`` over the step.  Returns new ``(gates, c)``;
    the inputs are not modified.
    """
    r = rates(v)
    new = np.empty_like(gates)
    for row, name in enumerate(GATES):
        a = r["alpha_" + name]
        b = r["beta_" + name]
        s = a + b
        with np.errstate(divide="ignore", invalid="ignore"):
            g_inf = np.where(s > 0.0, a / np.where(s > 0.0, s, 1.0), gates[row])
        new[row] = g_inf + (gates[row] - g_inf) * np.exp(-dt * s)
    np.clip(new, 0.0, 1.0, out=new)
    i_s = calcium_current(v, gates[3], gates[4], c)
    c_new = (c + dt * (0.07 - i_s)) / (1.0 + 0.07 * dt)
    return new, c_new


@dataclass(frozen=True)
class BrParameters:
    C_m: float = 1.0  # uF / cm^2
    chi: float = 2000.0  # 1 / cm
    D: float = 1.0  # mS / cm

    def __post_init__(self):
        for name in ("C_m", "chi", "D"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def D_eff(self) -> float:
        """Diffusivity of the voltage equation, ``D / (chi C_m)``."""
        return self.D / (self.chi * self.C_m)


# Reaction models used by the time stepper.  ``aux`` is whatever the model
# needs besides the primary unknown; ``advance`` must not mutate its inputs.


class FisherReaction:
    name = "fisher"

    def initial_aux(self, n):
        return None

    def advance(self, aux, u, dt):
        return None

    def rate(self, u, aux):
        return fisher_source(u)


@dataclass
class BeelerReuterReaction:
    """Beeler-Reuter currents as a source for ``dv/dt``, in mV/ms.

    ``aux`` is a tuple ``(gates, c)``.  Applied stimulus enters separately as
    a current density per unit volume and is divided by ``chi C_m`` here.
    """

    params: BrParameters = field(default_factory=BrParameters)
    use_table: bool = False
    name = "beeler-reuter"

    def __post_init__(self):
        self._rates = RateTable() if self.use_table else br_rates

    def initial_aux(self, n):
        s = resting_state(n)
        return (s.gates, s.c)

    def advance(self, aux, u, dt):
        gates, c = aux
        return br_advance_gates(gates, c, u, dt, rates=self._rates)

    def rate(self, u, aux):
        gates, c = aux
        cur = br_currents(u, *gates, c)
        return -cur["I_ion"] / self.params.C_m

    def stimulus_scale(self) -> float:
        """Factor converting a volumetric stimulus (uA/cm^3) into mV/ms."""
        return 1.0 / (self.params.chi * self.params.C_m)
