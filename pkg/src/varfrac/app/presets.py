"""Ready-made experiments.

``fisher-1d``
    Fisher-KPP on [0, 100] with a step-like start, order ``alpha1`` on
    [0, 50] and ``alpha2`` on (50, 100].
``br-cable-1d``
    Beeler-Reuter cable of length 10 cm stimulated on [0, 0.25] cm.
``br-heart-3d``
    Beeler-Reuter on a user-supplied ventricular tetrahedral mesh with a
    spherical damaged region of order 1.7 and repeated stimuli.
"""

from __future__ import annotations

from ..discretize import (
    HEART_DAMAGE_CENTER,
    HEART_DAMAGE_EXCLUSION,
    HEART_DAMAGE_RADIUS,
    HEART_STIMULUS_CENTER,
    HEART_STIMULUS_RADIUS,
)
from .config import (
    ConfigError,
    EngineConfig,
    GeometryConfig,
    InitialConfig,
    OrdersConfig,
    OutputConfig,
    PhysicsConfig,
    PicardConfig,
    RegionConfig,
    SimulationConfig,
    StimulusConfig,
    TimeConfig,
    apply_override,
    validate,
)

CHI = 2000.0
# Upstroke steps at dt = 0.25 ms can need hundreds of Picard sweeps: the
# sodium activation gate follows v almost instantly, so near threshold the
# fixed-point map is barely contractive.
BR_PICARD_MAX_ITER = 1000


def fisher_1d() -> SimulationConfig:
    # The tight Picard tolerance and the larger deflation count keep the run
    # within 1e-6 of a dense reference; both are overridable.
    return SimulationConfig(
        kind="fisher",
        geometry=GeometryConfig(dimension=1, length=100.0, spacing=0.1),
        regions=RegionConfig(kind="split", split=50.0),
        orders=OrdersConfig(alpha1=1.5, alpha2=2.0),
        physics=PhysicsConfig(D=1.0),
        time=TimeConfig(dt=0.005, t_end=15.0),
        picard=PicardConfig(tol=1e-10, max_iter=100),
        engine=EngineConfig(ell=32),
        initial=InitialConfig(kind="fisher-step", step_edge=5.0, decay=10.0),
        output=OutputConfig(snapshot_every=5.0),
    )


def br_cable_1d() -> SimulationConfig:
    return SimulationConfig(
        kind="beeler-reuter",
        geometry=GeometryConfig(dimension=1, length=10.0, spacing=0.01),
        regions=RegionConfig(kind="split", split=5.0),
        orders=OrdersConfig(alpha1=2.0, alpha2=2.0),
        physics=PhysicsConfig(D=1.0, C_m=1.0, chi=CHI),
        time=TimeConfig(dt=0.25, t_end=1200.0),
        picard=PicardConfig(max_iter=BR_PICARD_MAX_ITER),
        stimulus=StimulusConfig(times=(10.0,), duration=5.0, amplitude=12.0 * CHI, region="interval",
                                interval=(0.0, 0.25)),
        initial=InitialConfig(kind="rest"),
        output=OutputConfig(snapshot_every=100.0, probes=(2.5, 7.5, 9.0)),
    )


def br_heart_3d() -> SimulationConfig:
    return SimulationConfig(
        kind="beeler-reuter",
        geometry=GeometryConfig(dimension=3, mesh=None, mesh_scale=1.0),
        regions=RegionConfig(kind="sphere", center=HEART_DAMAGE_CENTER, radius=HEART_DAMAGE_RADIUS,
                             exclusion_lower=tuple(HEART_DAMAGE_EXCLUSION.lower),
                             exclusion_upper=tuple(HEART_DAMAGE_EXCLUSION.upper)),
        orders=OrdersConfig(alpha1=2.0, alpha2=1.7),
        physics=PhysicsConfig(D=2.0, C_m=1.0, chi=CHI),
        time=TimeConfig(dt=0.25, t_end=1500.0),
        picard=PicardConfig(max_iter=BR_PICARD_MAX_ITER),
        stimulus=StimulusConfig(times=(10.0,), period=325.0, repeats=5, duration=5.0, amplitude=14.0 * CHI,
                                region="sphere", center=HEART_STIMULUS_CENTER, radius=HEART_STIMULUS_RADIUS),
        initial=InitialConfig(kind="rest"),
        output=OutputConfig(snapshot_times=(20.0, 50.0, 80.0, 110.0, 200.0, 300.0, 340.0, 400.0, 475.0,
                                            530.0, 650.0, 680.0)),
    )


PRESETS = {"fisher-1d": fisher_1d, "br-cable-1d": br_cable_1d, "br-heart-3d": br_heart_3d}


def get_preset(name: str, overrides: dict[str, str] | None = None, validate_result: bool = True) -> SimulationConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}", field_name="preset")
    cfg = PRESETS[name]()
    for key, value in (overrides or {}).items():
        apply_override(cfg, key, value)
    if validate_result:
        validate(cfg)
    return cfg

