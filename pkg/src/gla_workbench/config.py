"""Benchmark configuration files.

INI text with one section per concern.  ``[meta] schema`` must match
:data:`SCHEMA`; unknown sections or keys are rejected so that a typo can
never silently fall back to a default.  Every key is optional except the
schema, and omitted keys take the dataclass defaults.
"""

import configparser
from dataclasses import dataclass, field, fields, replace
from importlib import resources

import numpy as np

from .bench import FlowConfig, RigidBodyConfig, WingConfig
from .errors import ConfigError
from .gusts import DiscreteGust, TurbulenceConfig

SCHEMA = "gla-benchmark/1"


@dataclass(frozen=True)
class ReductionConfig:
    modes: int = 8
    criterion: str = "gust_participation"
    output: str = "tip_displacement"
    band_low: float = 0.0
    band_high: float = 1.0e3


@dataclass(frozen=True)
class SynthesisConfig:
    """``scaling = reduced`` designs in semichords and reduced-time flap acceleration."""

    K_c: float = 1.0
    eps_n: float = 1.0e-3
    eps_a: float = 1.0e-4
    backoff: float = 0.05
    gamma_tolerance: float = 1.0e-3
    scaling: str = "reduced"
    measurement: str = "tip_displacement"
    performance: str = "tip_displacement"


@dataclass(frozen=True)
class GustConfig:
    """Discrete gust; ``w0_fraction`` is the peak velocity over ``U_inf``."""

    w0_fraction: float = 0.14
    H_g: float = 20.0
    start_time: float = 0.5


@dataclass(frozen=True)
class TurbulenceSettings:
    sigma_fraction: float = 0.08
    L_w: float = 750.0
    duration: float = 30.0
    sample_rate: float = 100.0
    seeds: tuple = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class SimulationSettings:
    """``t_final = 0`` means gust end plus ``settle_time``."""

    dt: float = 2.0e-4
    t_final: float = 0.0
    settle_time: float = 5.0
    controller_rate: float = 0.0
    record_stride: int = 1


@dataclass(frozen=True)
class StudySettings:
    meshes: tuple = (10, 20, 40, 80)
    kc_sweep: tuple = (0.3, 1.0, 3.0, 10.0)


@dataclass(frozen=True)
class Benchmark:
    wing: WingConfig = field(default_factory=WingConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    rigid_body: RigidBodyConfig = None
    reduction: ReductionConfig = field(default_factory=ReductionConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    gust: GustConfig = field(default_factory=GustConfig)
    turbulence: TurbulenceSettings = field(default_factory=TurbulenceSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    study: StudySettings = field(default_factory=StudySettings)
    source: str = "<defaults>"

    def discrete_gust(self):
        U = self.flow.U_inf
        return DiscreteGust(w0=self.gust.w0_fraction * U, H_g=self.gust.H_g, U_inf=U,
                            start_time=self.gust.start_time)

    def turbulence_config(self, seed, duration=None):
        t = self.turbulence
        return TurbulenceConfig(
            sigma_w=t.sigma_fraction * self.flow.U_inf,
            L_w=t.L_w,
            U_inf=self.flow.U_inf,
            seed=int(seed),
            duration=t.duration if duration is None else duration,
            sample_rate=t.sample_rate,
        )


# section name -> (attribute on Benchmark, dataclass)
_SECTIONS = {
    "wing": ("wing", WingConfig),
    "flow": ("flow", FlowConfig),
    "rigid_body": ("rigid_body", RigidBodyConfig),
    "reduction": ("reduction", ReductionConfig),
    "synthesis": ("synthesis", SynthesisConfig),
    "discrete_gust": ("gust", GustConfig),
    "turbulence": ("turbulence", TurbulenceSettings),
    "simulation": ("simulation", SimulationSettings),
    "study": ("study", StudySettings),
}

# keys written in degrees in the file, stored in radians
_DEGREES = {("flow", "alpha0_deg"): "alpha0"}


def _convert(text, default, where):
    try:
        if isinstance(default, bool):
            low = text.strip().lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(text)
            return low in ("true", "yes", "1")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, tuple):
            items = [s for s in text.replace(",", " ").split() if s]
            kind = int if all(isinstance(v, int) for v in default) and default else float
            return tuple(kind(s) for s in items)
        if isinstance(default, str):
            return text.strip()
        return float(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r}") from None


def _build(section, cls, items):
    defaults = {f.name: (f.default if f.default is not None else 0.0) for f in fields(cls)}
    kwargs = {}
    for key, text in items:
        where = f"[{section}] {key}"
        if (section, key) in _DEGREES:
            kwargs[_DEGREES[(section, key)]] = float(np.deg2rad(_convert(text, 0.0, where)))
            continue
        if key not in defaults:
            raise ConfigError(f"{where}: unknown key (known: {', '.join(sorted(defaults))})")
        kwargs[key] = _convert(text, defaults[key], where)
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def parse_config(text, source="<string>"):
    """Parse configuration text into a :class:`Benchmark`."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not cp.has_section("meta") or cp.get("meta", "schema", fallback=None) != SCHEMA:
        raise ConfigError(f"{source}: [meta] schema must be {SCHEMA!r}")
    extra_meta = set(cp["meta"]) - {"schema", "description"}
    if extra_meta:
        raise ConfigError(f"{source}: [meta]: unknown keys {sorted(extra_meta)}")
    kwargs = {"source": source}
    for section in cp.sections():
        if section == "meta":
            continue
        if section not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        attr, cls = _SECTIONS[section]
        items = list(cp[section].items())
        if section == "rigid_body":
            enabled = dict(items).get("enabled", "false").strip().lower() in ("true", "yes", "1")
            items = [kv for kv in items if kv[0] != "enabled"]
            if not enabled:
                continue
        kwargs[attr] = _build(section, cls, items)
    bench = Benchmark(**kwargs)
    _validate(bench)
    return bench


def _validate(b):
    if b.reduction.modes < 1:
        raise ConfigError("[reduction] modes: at least 1")
    if b.synthesis.scaling not in ("reduced", "si"):
        raise ConfigError("[synthesis] scaling: 'reduced' or 'si'")
    if not b.synthesis.K_c > 0:
        raise ConfigError("[synthesis] K_c: must be > 0")
    if b.synthesis.backoff < 0:
        raise ConfigError("[synthesis] backoff: must be >= 0")
    if not b.turbulence.seeds:
        raise ConfigError("[turbulence] seeds: at least one seed")
    if not b.study.meshes or min(b.study.meshes) < 2:
        raise ConfigError("[study] meshes: element counts >= 2")
    if not b.study.kc_sweep or min(b.study.kc_sweep) <= 0:
        raise ConfigError("[study] kc_sweep: positive weights")
    s = b.simulation
    if not s.dt > 0 or s.t_final < 0 or s.settle_time < 0 or s.controller_rate < 0:
        raise ConfigError("[simulation]: dt > 0 and non-negative times required")
    b.discrete_gust()
    b.turbulence_config(b.turbulence.seeds[0])


def load_config(path=None):
    """Read a configuration file; ``None`` loads the shipped benchmark."""
    if path is None:
        text = resources.files(__package__).joinpath("benchmark.cfg").read_text()
        return parse_config(text, source="benchmark.cfg")
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def with_overrides(bench, **changes):
    """Copy of ``bench`` with sub-config fields replaced, e.g. ``synthesis={"K_c": 3}``."""
    out = {}
    for attr, values in changes.items():
        out[attr] = replace(getattr(bench, attr), **values)
    return replace(bench, **out)
