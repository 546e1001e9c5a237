"""Applied stimulus current: repeated rectangular pulses on a node subset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StimulusProtocol:
    """Pulses ``[T_k, T_k + duration)`` of ``amplitude`` on ``nodes``.

    ``amplitude`` is a current density per unit volume (uA/cm^3); ``scale``
    converts it into the units of ``du/dt``.
    """

    times: tuple[float, ...]
    duration: float
    amplitude: float
    nodes: np.ndarray  # boolean mask
    scale: float = 1.0

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("stimulus times must be strictly ascending")
        if times and not self.duration > 0:
            raise ValueError("stimulus duration must be positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=bool))

    def active_fraction(self, t0: float, t1: float) -> float:
        """Fraction of ``[t0, t1)`` covered by stimulus windows."""
        if t1 <= t0:
            return 0.0
        covered = 0.0
        for start in self.times:
            lo = max(t0, start)
            hi = min(t1, start + self.duration)
            if hi > lo:
                covered += hi - lo
        return min(covered / (t1 - t0), 1.0)

    def __call__(self, t0: float, t1: float):
        """Source over ``[t0, t1)`` averaged over the step, or ``None``."""
        frac = self.active_fraction(t0, t1)
        if frac == 0.0 or self.amplitude == 0.0:
            return None
        return np.where(self.nodes, frac * self.amplitude * self.scale, 0.0)

    def with_amplitude(self, amplitude: float) -> "StimulusProtocol":
        return StimulusProtocol(self.times, self.duration, amplitude, self.nodes, self.scale)
