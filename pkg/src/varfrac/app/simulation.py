"""Turn a :class:`SimulationConfig` into operators and run it."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..discretize import (
    Box,
    Mesh1D,
    RegionPartition,
    TetMesh,
    build_fvm_tet,
    build_laplacian_1d,
    mesh_paths,
    partition_regions,
    read_tet_mesh,
    right_of,
    sphere,
    sphere_excluding_box,
    symmetrize,
)
from ..ionic import BeelerReuterReaction, BrParameters, FisherReaction, resting_state
from ..stepper import PicardSettings, TimeGrid, integrate
from ..vofl import EngineSettings, VoflOperator
from .config import ConfigError, SimulationConfig
from .output import write_snapshot_1d, write_snapshot_3d
from .stimulus import StimulusProtocol

logger = logging.getLogger(__name__)

ACTIVATION_THRESHOLD = 0.0  # mV


class StopSimulation(Exception):
    """Raised by an observer to end a run early."""


@dataclass
class Problem:
    config: SimulationConfig
    coords: np.ndarray  # (N,) in 1D, (N, 3) in 3D
    mesh: Mesh1D | TetMesh
    op: VoflOperator
    model: object
    u0: np.ndarray
    aux0: object
    stimulus: StimulusProtocol | None
    grid: TimeGrid
    picard: PicardSettings

    @property
    def n(self) -> int:
        return self.u0.size

    @property
    def dimension(self) -> int:
        return 1 if self.coords.ndim == 1 else 3


def _load_mesh(cfg: SimulationConfig) -> TetMesh:
    node_path, ele_path = mesh_paths(cfg.geometry.mesh)
    for p in (node_path, ele_path):
        if not p.is_file():
            raise ConfigError(f"mesh file {p} not found", field_name="geometry.mesh")
    return read_tet_mesh(node_path, ele_path, scale=cfg.geometry.mesh_scale)


def _partition(cfg: SimulationConfig, coords) -> RegionPartition:
    r = cfg.regions
    if r.kind == "none":
        return RegionPartition.uniform(coords.shape[0])
    if r.kind == "split":
        return partition_regions(coords, right_of(r.split))
    box = None
    if r.exclusion_lower is not None or r.exclusion_upper is not None:
        d = len(r.center)
        box = Box(lower=r.exclusion_lower or (-math.inf,) * d, upper=r.exclusion_upper or (math.inf,) * d)
    return partition_regions(coords, sphere_excluding_box(r.center, r.radius, box))


def _stimulus_nodes(cfg: SimulationConfig, coords) -> np.ndarray:
    s = cfg.stimulus
    if s.region == "interval":
        x = coords if coords.ndim == 1 else coords[:, 0]
        return (x >= s.interval[0]) & (x <= s.interval[1])
    return sphere(s.center, s.radius)(coords if coords.ndim > 1 else coords[:, None])


def _initial(cfg: SimulationConfig, coords, n):
    i = cfg.initial
    if i.kind == "rest":
        return resting_state(n).v
    if i.kind == "constant":
        return np.full(n, i.value)
    x = coords if coords.ndim == 1 else coords[:, 0]
    with np.errstate(over="ignore"):
        return np.where(x <= i.step_edge, 1.0, np.exp(-i.decay * (x - i.step_edge)))


def build_problem(cfg: SimulationConfig, mesh: TetMesh | None = None) -> Problem:
    """Assemble everything needed to integrate ``cfg``.

    A 3D ``mesh`` may be passed directly instead of through ``geometry.mesh``.
    """
    g = cfg.geometry
    if g.dimension == 1:
        mesh1 = Mesh1D.interval(g.length, g.spacing, g.origin)
        coords = mesh1.coords
        A = build_laplacian_1d(mesh1)
        mesh_obj = mesh1
    else:
        mesh_obj = mesh if mesh is not None else _load_mesh(cfg)
        coords = np.asarray(mesh_obj.nodes, float)
        A = symmetrize(build_fvm_tet(mesh_obj))
    n = coords.shape[0]
    e = cfg.engine
    settings = EngineSettings(P=e.P, tol=e.tol, ell=e.ell, poly_degree=e.poly_degree)
    base = cfg.orders.base_region
    op = VoflOperator(A, cfg.orders.alpha1, cfg.orders.alpha2, _partition(cfg, coords),
                      D=cfg.diffusivity, settings=settings,
                      base_region=base if base == "auto" else int(base))
    if cfg.kind == "fisher":
        model = FisherReaction()
        scale = 1.0
    else:
        p = cfg.physics
        model = BeelerReuterReaction(BrParameters(C_m=p.C_m, chi=p.chi, D=p.D), use_table=p.rate_table)
        scale = model.stimulus_scale()
    stim = None
    s = cfg.stimulus
    if s.times and s.amplitude > 0:
        nodes = _stimulus_nodes(cfg, coords)
        if not np.any(nodes):
            raise ConfigError("stimulus region contains no nodes", field_name="stimulus.region")
        stim = StimulusProtocol(s.schedule(), s.duration, s.amplitude, nodes, scale)
    return Problem(cfg, coords, mesh_obj, op, model, _initial(cfg, coords, n), model.initial_aux(n), stim,
                   TimeGrid(cfg.time.dt, cfg.time.t_end),
                   PicardSettings(cfg.picard.tol, cfg.picard.max_iter))


class ActivationRecorder:
    """First upward crossing of ``threshold`` per node, linearly interpolated."""

    def __init__(self, n: int, threshold: float = ACTIVATION_THRESHOLD):
        self.threshold = threshold
        self.times = np.full(n, np.nan)
        self._prev_u = None
        self._prev_t = None

    def __call__(self, step, t, view):
        u = view.u
        if self._prev_u is not None:
            new = np.isnan(self.times) & (self._prev_u < self.threshold) & (u >= self.threshold)
            if np.any(new):
                u0, u1 = self._prev_u[new], u[new]
                frac = (self.threshold - u0) / (u1 - u0)
                self.times[new] = self._prev_t + frac * (t - self._prev_t)
        elif step == 0:
            self.times[u >= self.threshold] = t
        self._prev_u = np.array(u, copy=True)
        self._prev_t = t


def snapshot_steps(cfg: SimulationConfig, grid: TimeGrid, every: float | None = None) -> set[int]:
    every = cfg.output.snapshot_every if every is None else every
    steps = set()
    if every:
        k = 0
        while k * every <= grid.t_end + 1e-9:
            steps.add(int(round(k * every / grid.dt)))
            k += 1
    for t in cfg.output.snapshot_times:
        steps.add(int(round(t / grid.dt)))
    return {s for s in steps if 0 <= s <= grid.n_steps}


class SnapshotWriter:
    def __init__(self, problem: Problem, directory, steps: set[int], prefix: str = "snapshot"):
        self.problem = problem
        self.directory = Path(directory)
        self.steps = steps
        self.prefix = prefix
        self.paths: list[Path] = []

    def __call__(self, step, t, view):
        if step not in self.steps:
            return
        p = self.problem
        if p.dimension == 1:
            path = self.directory / f"{self.prefix}_{step:07d}.txt"
            gates = c = None
            if p.config.output.write_gates and isinstance(view.aux, tuple):
                gates, c = view.aux
            write_snapshot_1d(path, p.coords, view.u, gates=gates, c=c, t=t)
        else:
            path = self.directory / f"{self.prefix}_{step:07d}.vtk"
            write_snapshot_3d(path, p.mesh, view.u, t=t)
        self.paths.append(path)


@dataclass
class RunResult:
    u: np.ndarray
    aux: object
    t: float
    steps: int
    picard_counts: list[int]
    activation: np.ndarray
    snapshots: list[Path] = field(default_factory=list)
    elapsed: float = 0.0
    stopped: bool = False

    @property
    def average_picard(self) -> float:
        return float(np.mean(self.picard_counts)) if self.picard_counts else 0.0


class _Tracker:
    """Keeps the latest state so an early stop can still report it."""

    def __init__(self):
        self.step, self.t, self.u, self.aux = 0, 0.0, None, None
        self.counts: list[int] = []

    def __call__(self, step, t, view):
        self.step, self.t, self.u, self.aux = step, t, np.array(view.u), view.aux


def run_problem(problem: Problem, out_dir=None, observers=(), snapshot_every: float | None = None,
                t_end: float | None = None) -> RunResult:
    grid = problem.grid if t_end is None else TimeGrid(problem.grid.dt, t_end)
    rec = ActivationRecorder(problem.n)
    tracker = _Tracker()
    obs = [rec, tracker]
    writer = None
    if out_dir is not None:
        writer = SnapshotWriter(problem, out_dir, snapshot_steps(problem.config, grid, snapshot_every))
        obs.append(writer)
    obs.extend(observers)
    start = time.perf_counter()
    counts: list[int] = []
    stopped = False
    try:
        traj = integrate(problem.op, problem.u0, problem.aux0, problem.model, grid, stimulus=problem.stimulus,
                         observers=obs, picard=problem.picard, counts=counts)
        u, aux, t, steps = traj.u, traj.aux, traj.t, traj.steps
    except StopSimulation:
        stopped = True
        u, aux, t, steps = tracker.u, tracker.aux, tracker.t, tracker.step
    elapsed = time.perf_counter() - start
    return RunResult(u, aux, t, steps, counts, rec.times, writer.paths if writer else [], elapsed, stopped)


def run_simulation(cfg: SimulationConfig, out_dir=None, mesh: TetMesh | None = None, **kwargs) -> RunResult:
    return run_problem(build_problem(cfg, mesh=mesh), out_dir=out_dir, **kwargs)


# --- diastolic threshold ----------------------------------------------------


class ThresholdError(RuntimeError):
    pass


@dataclass
class ThresholdResult:
    threshold: float  # smallest amplitude seen to propagate
    lower: float  # largest amplitude seen to fail
    runs: int


def probe_nodes(problem: Problem, fraction: float = 0.75) -> np.ndarray:
    """Nodes at least ``fraction`` of the maximal distance away from the stimulus."""
    if problem.stimulus is None:
        raise ConfigError("threshold search needs a stimulus region", field_name="stimulus")
    coords = problem.coords if problem.coords.ndim > 1 else problem.coords[:, None]
    centre = coords[problem.stimulus.nodes].mean(axis=0)
    dist = np.linalg.norm(coords - centre, axis=1)
    return dist >= fraction * dist.max()


class _PropagationMonitor:
    """Stops once a probe node activates, or once all activity has died out."""

    def __init__(self, probes, quiet_after: float, threshold=ACTIVATION_THRESHOLD, quiet_level=-40.0):
        self.probes = probes
        self.quiet_after = quiet_after
        self.threshold = threshold
        self.quiet_level = quiet_level
        self.reached = False

    def __call__(self, step, t, view):
        if np.any(view.u[self.probes] >= self.threshold):
            self.reached = True
            raise StopSimulation
        if t >= self.quiet_after and np.max(view.u) < self.quiet_level:
            raise StopSimulation


def propagates(problem: Problem, amplitude: float, probe_fraction: float = 0.75,
               t_end: float | None = None) -> bool:
    p = Problem(**{**problem.__dict__, "stimulus": problem.stimulus.with_amplitude(amplitude)})
    s = p.stimulus
    quiet_after = (s.times[-1] + s.duration + 20.0) if s.times else 0.0
    mon = _PropagationMonitor(probe_nodes(p, probe_fraction), quiet_after)
    run_problem(p, observers=[mon], t_end=t_end)
    return mon.reached


def find_diastolic_threshold(cfg: SimulationConfig, upper: float | None = None, rel_tol: float = 0.01,
                             probe_fraction: float = 0.75, t_end: float | None = None,
                             mesh: TetMesh | None = None) -> ThresholdResult:
    """Bisect the stimulus amplitude between 0 and ``upper``.

    Propagation means ``v`` crossing 0 mV at a node at least
    ``probe_fraction`` of the way across the domain from the stimulus before
    the end of the run.
    """
    if cfg.kind != "beeler-reuter":
        raise ConfigError("threshold search needs problem.kind = beeler-reuter", field_name="problem.kind")
    if not cfg.stimulus.times:
        raise ConfigError("threshold search needs at least one stimulus time", field_name="stimulus.times")
    problem = build_problem(cfg.replace(**{"stimulus.amplitude": str(max(cfg.stimulus.amplitude, 1.0))}),
                            mesh=mesh)
    hi = float(upper if upper is not None else max(cfg.stimulus.amplitude, 1.0))
    lo = 0.0
    runs = 1
    if not propagates(problem, hi, probe_fraction, t_end):
        raise ThresholdError(f"amplitude {hi:g} does not propagate; try a larger upper bracket")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        runs += 1
        if propagates(problem, mid, probe_fraction, t_end):
            hi = mid
        else:
            lo = mid
        logger.info("threshold bracket [%g, %g]", lo, hi)
    return ThresholdResult(threshold=hi, lower=lo, runs=runs)
