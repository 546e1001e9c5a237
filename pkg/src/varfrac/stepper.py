"""Fully implicit backward Euler with Picard iteration.

One step solves

    u = f_b(A) [u_n + dt E f_a(A) u + dt g(u, aux(u))]

by fixed-point iteration started at ``u_n``.  Auxiliary variables (gates,
calcium) are re-advanced from ``aux_n`` with the current voltage iterate on
every sweep, so the converged pair is consistent.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class PicardError(RuntimeError):
    def __init__(self, message, update_norm=math.nan):
        super().__init__(message)
        self.update_norm = update_norm


class DivergenceError(RuntimeError):
    def __init__(self, message, node=-1):
        super().__init__(message)
        self.node = node


class ReactionModel(Protocol):
    def initial_aux(self, n: int) -> Any: ...

    def advance(self, aux, u, dt) -> Any: ...

    def rate(self, u, aux) -> np.ndarray: ...


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    t_end: float
    t_start: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError(f"t_end={self.t_end} gives no steps with dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    def time(self, step: int) -> float:
        return self.t_start + step * self.dt


@dataclass(frozen=True)
class PicardSettings:
    tol: float = 1e-6
    max_iter: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("Picard tol must be positive")
        if self.max_iter < 1:
            raise ValueError("Picard max_iter must be at least 1")


def _check_finite(u, what):
    bad = ~np.isfinite(u)
    if np.any(bad):
        node = int(np.flatnonzero(bad)[0])
        raise DivergenceError(f"non-finite {what} at node {node}", node=node)


def backward_euler_step(op, u_n, aux_n, model: ReactionModel, dt: float,
                        picard: PicardSettings = PicardSettings(), source=None, t: float = 0.0):
    """Advance one step.  Returns ``(u_next, aux_next, iterations)``.

    ``source`` is an optional extra term added to ``g``: an array, or a
    callable of time evaluated at the new time level ``t + dt``.
    """
    u_n = np.asarray(u_n, dtype=float)
    extra = source(t + dt) if callable(source) else source
    u = u_n
    for it in range(1, picard.max_iter + 1):
        aux = model.advance(aux_n, u, dt)
        g = model.rate(u, aux)
        if extra is not None:
            g = g + extra
        rhs = u_n + dt * (op.correction(u) + g)
        _check_finite(rhs, "right-hand side")
        u_new = op.solve_fb(rhs, dt)
        _check_finite(u_new, "solution")
        update = float(np.max(np.abs(u_new - u)))
        u = u_new
        if update <= picard.tol * (1.0 + float(np.max(np.abs(u)))):
            return u, model.advance(aux_n, u, dt), it
    raise PicardError(f"Picard iteration did not converge in {picard.max_iter} iterations "
                      f"(last update {update:.3e})", update_norm=update)


@dataclass
class Trajectory:
    u: np.ndarray
    aux: Any
    t: float
    steps: int
    picard_counts: list[int] = field(default_factory=list)

    @property
    def average_picard(self) -> float:
        return float(np.mean(self.picard_counts)) if self.picard_counts else 0.0


Observer = Callable[[int, float, Any], None]


@dataclass(frozen=True)
class StateView:
    """Read-only view handed to observers."""

    u: np.ndarray
    aux: Any


def _readonly(x):
    if isinstance(x, np.ndarray):
        y = x.view()
        y.flags.writeable = False
        return y
    if isinstance(x, tuple):
        return tuple(_readonly(v) for v in x)
    return x


def integrate(op, u0, aux0, model: ReactionModel, grid: TimeGrid,
              stimulus: Callable[[float, float], np.ndarray | None] | None = None,
              observers: Sequence[Observer] = (), picard: PicardSettings = PicardSettings(),
              steps: int | None = None, counts: list[int] | None = None):
    """Run ``grid.n_steps`` steps from ``u0``.

    ``stimulus(t0, t1)`` returns the source (in units of ``du/dt``) to add over
    the step ``[t0, t1)``, or ``None``.  Observers are called as
    ``obs(step, t, view)`` at step 0 and after every step.  ``steps``
    overrides the number of steps taken (``0`` returns the initial state).
    Picard counts are appended to ``counts`` when given, so they survive an
    observer aborting the run.
    """
    n_steps = grid.n_steps if steps is None else int(steps)
    if n_steps < 0:
        raise ValueError("steps must be non-negative")
    u = np.array(u0, dtype=float)
    aux = aux0
    counts = [] if counts is None else counts
    t = grid.t_start
    for obs in observers:
        obs(0, t, StateView(_readonly(u), _readonly(aux)))
    for step in range(1, n_steps + 1):
        t0 = grid.time(step - 1)
        t = grid.time(step)
        src = None if stimulus is None else stimulus(t0, t)
        u, aux, its = backward_euler_step(op, u, aux, model, grid.dt, picard, source=src, t=t0)
        counts.append(its)
        for obs in observers:
            obs(step, t, StateView(_readonly(u), _readonly(aux)))
    if counts:
        logger.info("integrated %d steps, average Picard iterations %.2f", len(counts), np.mean(counts))
    return Trajectory(u=u, aux=aux, t=t, steps=len(counts), picard_counts=counts)
