"""Simulation configuration stored as INI text.

Each top-level field of :class:`SimulationConfig` other than ``kind`` is a
section; ``kind`` lives in ``[problem]``.  Sequences are comma separated.
Unknown sections or keys are rejected with the offending line number.

Example::

    [problem]
    kind = beeler-reuter

    [geometry]
    dimension = 1
    length = 10
    spacing = 0.05

    [orders]
    alpha1 = 2
    alpha2 = 1.5
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
import typing
from dataclasses import dataclass, field

PROBLEM_KINDS = ("fisher", "beeler-reuter")
REGION_KINDS = ("none", "split", "sphere")
STIM_REGIONS = ("interval", "sphere")
INITIAL_KINDS = ("rest", "fisher-step", "constant")


class ConfigError(ValueError):
    """Invalid configuration text or values.  ``line`` is 1-based if known."""

    def __init__(self, message, line: int | None = None, field_name: str | None = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field_name


@dataclass
class GeometryConfig:
    dimension: int = 1
    length: float = 10.0
    spacing: float = 0.01
    origin: float = 0.0
    mesh: str | None = None  # stem of <stem>.node / <stem>.ele
    mesh_scale: float = 1.0


@dataclass
class RegionConfig:
    """Where the second fractional order applies.

    ``split``: nodes with ``x > split`` form region 2 (first coordinate in 3D).
    ``sphere``: nodes inside the sphere and outside the optional box.
    """

    kind: str = "none"
    split: float | None = None
    center: tuple[float, ...] | None = None
    radius: float | None = None
    exclusion_lower: tuple[float, ...] | None = None
    exclusion_upper: tuple[float, ...] | None = None


@dataclass
class OrdersConfig:
    alpha1: float = 2.0
    alpha2: float = 2.0
    base_region: str = "auto"


@dataclass
class PhysicsConfig:
    D: float = 1.0  # mS/cm for Beeler-Reuter, plain diffusivity for Fisher
    C_m: float = 1.0
    chi: float = 2000.0
    D_eff: float | None = None  # overrides D / (chi C_m) when set
    rate_table: bool = False


@dataclass
class TimeConfig:
    dt: float = 0.25
    t_end: float = 100.0


@dataclass
class PicardConfig:
    tol: float = 1e-6
    max_iter: int = 50


@dataclass
class EngineConfig:
    P: int = 32
    tol: float = 1e-9
    ell: int | None = None
    poly_degree: int = 8


@dataclass
class StimulusConfig:
    """Pulse schedule.  With ``period`` set, ``repeats`` pulses start at
    ``times[0] + k * period``; otherwise ``times`` is used as given."""

    times: tuple[float, ...] = ()
    duration: float = 5.0
    amplitude: float = 0.0  # uA/cm^3
    region: str = "interval"
    interval: tuple[float, ...] = (0.0, 0.25)
    center: tuple[float, ...] | None = None
    radius: float | None = None
    period: float | None = None
    repeats: int = 1

    def schedule(self) -> tuple[float, ...]:
        if self.period is None or not self.times:
            return tuple(self.times)
        return tuple(self.times[0] + k * self.period for k in range(self.repeats))


@dataclass
class InitialConfig:
    kind: str = "rest"
    value: float = 0.0
    step_edge: float = 5.0
    decay: float = 10.0


@dataclass
class OutputConfig:
    directory: str | None = None
    snapshot_every: float | None = None
    snapshot_times: tuple[float, ...] = ()
    write_gates: bool = False
    probes: tuple[float, ...] = ()


@dataclass
class SimulationConfig:
    kind: str = "beeler-reuter"
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    regions: RegionConfig = field(default_factory=RegionConfig)
    orders: OrdersConfig = field(default_factory=OrdersConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    picard: PicardConfig = field(default_factory=PicardConfig)
    engine: EngineConfig = field(default_factory=EngineConfig)
    stimulus: StimulusConfig = field(default_factory=StimulusConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def diffusivity(self) -> float:
        """Coefficient multiplying the fractional operator in the PDE."""
        p = self.physics
        if p.D_eff is not None:
            return p.D_eff
        if self.kind == "fisher":
            return p.D
        return p.D / (p.chi * p.C_m)

    def validate(self) -> "SimulationConfig":
        validate(self)
        return self

    def to_text(self) -> str:
        return dump_config(self)

    def replace(self, **overrides) -> "SimulationConfig":
        """Copy with ``section.key`` style overrides applied and validated."""
        text = self.to_text()
        cfg = parse_config(text, validate_result=False)
        for key, value in overrides.items():
            apply_override(cfg, key, value)
        return cfg.validate()


SECTIONS = [f.name for f in dataclasses.fields(SimulationConfig) if f.name != "kind"]


def _section_type(name):
    return typing.get_type_hints(SimulationConfig)[name]


def _convert(raw: str, hint, what: str):
    raw = raw.strip()
    args = typing.get_args(hint)
    origin = typing.get_origin(hint)
    if origin is typing.Union or type(hint).__name__ == "UnionType":
        if raw.lower() in ("", "none"):
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _convert(raw, inner, what)
    try:
        if hint is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        if hint is str:
            return raw
        if origin is tuple:
            if raw == "":
                return ()
            return tuple(float(tok) for tok in re.split(r"[,\s]+", raw) if tok)
    except ValueError:
        raise ConfigError(f"cannot parse {what} = {raw!r} as {getattr(hint, '__name__', hint)}",
                          field_name=what) from None
    raise TypeError(f"unsupported field type {hint!r}")  # pragma: no cover


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    return str(value)


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` and ``(section, None)`` to 1-based line numbers."""
    out = {}
    section = None
    for i, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out.setdefault((section, None), i)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            out.setdefault((section, m.group(1).strip().lower()), i)
    return out


def parse_config(text: str, validate_result: bool = True) -> SimulationConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line=line) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(str(exc).split(":", 1)[-1].strip(), line=exc.lineno) from None
    lines = _line_index(text)
    cfg = SimulationConfig()
    for section in parser.sections():
        line = lines.get((section, None))
        if section == "problem":
            for key, raw in parser.items(section):
                if key != "kind":
                    raise ConfigError(f"unknown key {key!r} in [problem]", line=lines.get((section, key)),
                                      field_name=f"problem.{key}")
                cfg.kind = raw.strip()
            continue
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", line=line, field_name=section)
        obj = getattr(cfg, section)
        hints = typing.get_type_hints(type(obj))
        # field names are case sensitive (D, C_m, P); keys are matched case-insensitively
        names = {f.name.lower(): f.name for f in dataclasses.fields(obj)}
        for key, raw in parser.items(section):
            if key not in names:
                raise ConfigError(f"unknown key {key!r} in [{section}]", line=lines.get((section, key)),
                                  field_name=f"{section}.{key}")
            name = names[key]
            try:
                value = _convert(raw, hints[name], f"{section}.{name}")
            except ConfigError as exc:
                raise ConfigError(str(exc), line=lines.get((section, key)), field_name=exc.field) from None
            setattr(obj, name, value)
    if validate_result:
        validate(cfg)
    return cfg


def dump_config(cfg: SimulationConfig) -> str:
    out = ["[problem]", f"kind = {cfg.kind}", ""]
    for section in SECTIONS:
        obj = getattr(cfg, section)
        out.append(f"[{section}]")
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if value is None:
                continue
            out.append(f"{f.name} = {_format(value)}")
        out.append("")
    return "\n".join(out)


def apply_override(cfg: SimulationConfig, key: str, value: str) -> None:
    """Set ``section.key`` from a string, e.g. ``orders.alpha2=1.5``."""
    if key in ("kind", "problem.kind"):
        cfg.kind = value.strip()
        return
    if "." not in key:
        raise ConfigError(f"override key {key!r} must look like section.key", field_name=key)
    section, name = key.split(".", 1)
    if section not in SECTIONS:
        raise ConfigError(f"unknown section {section!r} in override", field_name=key)
    obj = getattr(cfg, section)
    names = {f.name.lower(): f.name for f in dataclasses.fields(obj)}
    if name.lower() not in names:
        raise ConfigError(f"unknown key {name!r} in [{section}]", field_name=key)
    name = names[name.lower()]
    hint = typing.get_type_hints(type(obj))[name]
    setattr(obj, name, _convert(value, hint, key))


def _require(cond, message, name):
    if not cond:
        raise ConfigError(message, field_name=name)


def _positive(value, name):
    _require(value is not None and math.isfinite(value) and value > 0, f"{name} must be positive, got {value}", name)


def validate(cfg: SimulationConfig) -> None:
    _require(cfg.kind in PROBLEM_KINDS, f"problem.kind must be one of {PROBLEM_KINDS}, got {cfg.kind!r}",
             "problem.kind")
    g = cfg.geometry
    _require(g.dimension in (1, 3), f"geometry.dimension must be 1 or 3, got {g.dimension}", "geometry.dimension")
    if g.dimension == 1:
        _positive(g.length, "geometry.length")
        _positive(g.spacing, "geometry.spacing")
        _require(g.length / g.spacing >= 1 - 1e-9, "geometry.length must be at least one spacing",
                 "geometry.length")
    else:
        _require(bool(g.mesh), "geometry.mesh is required for a 3D problem", "geometry.mesh")
    _positive(g.mesh_scale, "geometry.mesh_scale")

    r = cfg.regions
    _require(r.kind in REGION_KINDS, f"regions.kind must be one of {REGION_KINDS}", "regions.kind")
    if r.kind == "split":
        _require(r.split is not None, "regions.split is required for kind = split", "regions.split")
    if r.kind == "sphere":
        _require(r.center is not None and len(r.center) == g.dimension,
                 f"regions.center needs {g.dimension} coordinates", "regions.center")
        _positive(r.radius, "regions.radius")
        for name in ("exclusion_lower", "exclusion_upper"):
            val = getattr(r, name)
            _require(val is None or len(val) == g.dimension,
                     f"regions.{name} needs {g.dimension} coordinates", f"regions.{name}")

    o = cfg.orders
    for name in ("alpha1", "alpha2"):
        a = getattr(o, name)
        _require(1.0 < a <= 2.0, f"orders.{name} must lie in (1, 2], got {a}", f"orders.{name}")
    _require(o.base_region in ("auto", "1", "2"), "orders.base_region must be auto, 1 or 2",
             "orders.base_region")

    p = cfg.physics
    for name in ("D", "C_m", "chi"):
        _positive(getattr(p, name), f"physics.{name}")
    if p.D_eff is not None:
        _positive(p.D_eff, "physics.D_eff")

    _positive(cfg.time.dt, "time.dt")
    _positive(cfg.time.t_end, "time.t_end")
    _require(round(cfg.time.t_end / cfg.time.dt) >= 1, "time.t_end must cover at least one step", "time.t_end")
    _positive(cfg.picard.tol, "picard.tol")
    _require(cfg.picard.max_iter >= 1, "picard.max_iter must be at least 1", "picard.max_iter")

    e = cfg.engine
    _require(e.P >= 1, "engine.P must be at least 1", "engine.P")
    _positive(e.tol, "engine.tol")
    _require(e.ell is None or e.ell >= 0, "engine.ell must be non-negative", "engine.ell")
    _require(e.poly_degree >= 0, "engine.poly_degree must be non-negative", "engine.poly_degree")

    s = cfg.stimulus
    _require(all(b > a for a, b in zip(s.times, s.times[1:])), "stimulus.times must be strictly ascending",
             "stimulus.times")
    if s.period is not None:
        _positive(s.period, "stimulus.period")
        _require(s.repeats >= 1, "stimulus.repeats must be at least 1", "stimulus.repeats")
        _require(len(s.times) == 1, "stimulus.period needs exactly one start time", "stimulus.times")
    if s.times:
        _positive(s.duration, "stimulus.duration")
        _require(s.amplitude >= 0, "stimulus.amplitude must be non-negative", "stimulus.amplitude")
    _require(s.region in STIM_REGIONS, f"stimulus.region must be one of {STIM_REGIONS}", "stimulus.region")
    if s.region == "interval":
        _require(len(s.interval) == 2 and s.interval[0] <= s.interval[1],
                 "stimulus.interval must be 'lo, hi' with lo <= hi", "stimulus.interval")
    else:
        _require(s.center is not None and len(s.center) == g.dimension,
                 f"stimulus.center needs {g.dimension} coordinates", "stimulus.center")
        _positive(s.radius, "stimulus.radius")

    i = cfg.initial
    _require(i.kind in INITIAL_KINDS, f"initial.kind must be one of {INITIAL_KINDS}", "initial.kind")
    _require(not (cfg.kind == "fisher" and i.kind == "rest"),
             "initial.kind = rest is only meaningful for beeler-reuter", "initial.kind")

    out = cfg.output
    if out.snapshot_every is not None:
        _positive(out.snapshot_every, "output.snapshot_every")
