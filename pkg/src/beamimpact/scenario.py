"""Impact scenario configuration.

Config files are line oriented::

    # comment
    beam.bc = free_free
    impact.velocity_m_s = 1.100

Keys carry their SI unit in the name. Unknown keys are rejected in
strict mode and logged in lenient mode.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class BeamConfig:
    bc: str = "free_free"
    length_m: float = 0.210
    width_m: float = 0.015
    height_m: float = 0.010
    elastic_modulus_pa: float = 210e9
    poisson_ratio: float = 0.3
    density_kg_m3: float = 7800.0
    n_elem: int = 60
    mass_style: str = "consistent"


@dataclass(frozen=True)
class SphereConfig:
    mass_kg: float = 5.58e-3
    radius_m: float = 5.55e-3
    elastic_modulus_pa: float = 210e9
    poisson_ratio: float = 0.3
    # hertz_secant | hertz_tangent | hertz_duration | fixed
    compliance_rule: str = "hertz_secant"
    compliance_m_per_n: float = 0.0


@dataclass(frozen=True)
class PointsConfig:
    # axial positions as fractions of the beam length (assumed; the
    # drawing gives no coordinates). P4 is the beam center.
    p1_frac: float = 0.10
    p2_frac: float = 0.25
    p3_frac: float = 0.375
    p4_frac: float = 0.50


@dataclass(frozen=True)
class ImpactConfig:
    point: str = "P4"
    velocity_m_s: float = 1.100


@dataclass(frozen=True)
class RomConfig:
    f_cut_hz: float = 69.7e3
    # extra beam nodes on each side of the impact node kept as boundary dofs
    nominal_area_nodes: int = 0


@dataclass(frozen=True)
class IntegrationConfig:
    dt_s: float = 1e-7
    t_end_s: float = 5e-4


@dataclass(frozen=True)
class ContactConfig:
    penalty_scale: float = 1.0
    complementarity_tol: float = 1e-10
    max_iterations: int = 500
    gap_tol_m: float = 1e-12


@dataclass(frozen=True)
class ProbesConfig:
    points: tuple[str, ...] = ("P1", "P2", "P3", "P4")


@dataclass(frozen=True)
class PostConfig:
    fit_window_s: float = 5e-4
    coalescence_s: float = 5e-6
    energy_threshold: float = 0.02
    oracle_rtol: float = 1e-10


@dataclass(frozen=True)
class OutputsConfig:
    directory: str = "out"
    downsample: bool = False


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    beam: BeamConfig = field(default_factory=BeamConfig)
    sphere: SphereConfig = field(default_factory=SphereConfig)
    points: PointsConfig = field(default_factory=PointsConfig)
    impact: ImpactConfig = field(default_factory=ImpactConfig)
    rom: RomConfig = field(default_factory=RomConfig)
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)
    contact: ContactConfig = field(default_factory=ContactConfig)
    probes: ProbesConfig = field(default_factory=ProbesConfig)
    post: PostConfig = field(default_factory=PostConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)

    @property
    def n_steps(self) -> int:
        return int(round(self.integration.t_end_s / self.integration.dt_s))

    def point_coordinate(self, point: str) -> float:
        """Axial coordinate (m) of a point label ``P1``..``P4`` or a number."""
        label = point.strip()
        if label.upper().startswith("P") and label[1:].isdigit():
            key = f"p{label[1:]}_frac"
            if not hasattr(self.points, key):
                raise ConfigError(f"unknown point label {point!r}")
            return getattr(self.points, key) * self.beam.length_m
        try:
            return float(label)
        except ValueError:
            raise ConfigError(f"unknown point {point!r}") from None

    def replace(self, **sections) -> "Scenario":
        """Copy with updated section fields, e.g. ``replace(integration={"dt_s": 2e-7})``."""
        changes = {}
        for sec, values in sections.items():
            if sec == "name":
                changes[sec] = values
            else:
                changes[sec] = dataclasses.replace(getattr(self, sec), **values)
        out = dataclasses.replace(self, **changes)
        validate(out)
        return out


_SECTIONS = [f.name for f in dataclasses.fields(Scenario) if f.name != "name"]


def _convert(value: str, ftype, key: str, lineno: int):
    t = ftype if isinstance(ftype, str) else getattr(ftype, "__name__", str(ftype))
    try:
        if t == "float":
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
            return out
        if t == "int":
            return int(value)
        if t == "bool":
            low = value.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError
        if t.startswith("tuple"):
            return tuple(v.strip() for v in value.split(",") if v.strip())
        return value
    except ValueError:
        raise ConfigError(f"line {lineno}: cannot parse {key} = {value!r} as {t}") from None


def parse_scenario_text(text: str, strict: bool = True, name: str = "scenario") -> Scenario:
    values: dict[str, dict] = {s: {} for s in _SECTIONS}
    types = {s: {f.name: f.type for f in dataclasses.fields(
        type(getattr(Scenario(), s)))} for s in _SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, _, value = (p.strip() for p in line.partition("="))
        if key == "name":
            name = value
            continue
        sec, _, fld = key.partition(".")
        if sec not in types or fld not in types[sec]:
            msg = f"line {lineno}: unknown key {key!r}"
            if strict:
                raise ConfigError(msg)
            logger.warning(msg)
            continue
        if fld in values[sec]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[sec][fld] = _convert(value, types[sec][fld], key, lineno)
    base = Scenario()
    scen = dataclasses.replace(
        base, name=name,
        **{s: dataclasses.replace(getattr(base, s), **values[s]) for s in _SECTIONS})
    validate(scen)
    return scen


def parse_scenario(path, strict: bool = True) -> Scenario:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_scenario_text(path.read_text(), strict=strict, name=path.stem)


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package (e.g. ``freefree_central.cfg``)."""
    ref = resources.files("beamimpact") / "configs" / name
    return Path(str(ref))


def load_bundled(name: str, strict: bool = True) -> Scenario:
    return parse_scenario(bundled_config(name), strict=strict)


def _positive(key, value):
    if not value > 0:
        raise ConfigError(f"{key} must be > 0")


def validate(s: Scenario) -> None:
    b = s.beam
    for k in ("length_m", "width_m", "height_m", "elastic_modulus_pa", "density_kg_m3"):
        _positive(f"beam.{k}", getattr(b, k))
    if b.bc not in ("free_free", "clamped_clamped"):
        raise ConfigError("beam.bc must be free_free or clamped_clamped")
    if b.mass_style not in ("consistent", "lumped"):
        raise ConfigError("beam.mass_style must be consistent or lumped")
    if b.n_elem < 2:
        raise ConfigError("beam.n_elem must be >= 2")
    if not 0 <= b.poisson_ratio < 0.5:
        raise ConfigError("beam.poisson_ratio must be in [0, 0.5)")
    sp = s.sphere
    for k in ("mass_kg", "radius_m", "elastic_modulus_pa"):
        _positive(f"sphere.{k}", getattr(sp, k))
    rules = ("hertz_secant", "hertz_tangent", "hertz_duration", "fixed")
    if sp.compliance_rule not in rules:
        raise ConfigError(f"sphere.compliance_rule must be one of {rules}")
    if sp.compliance_rule == "fixed":
        _positive("sphere.compliance_m_per_n", sp.compliance_m_per_n)
    _positive("impact.velocity_m_s", s.impact.velocity_m_s)
    _positive("integration.dt_s", s.integration.dt_s)
    if s.integration.t_end_s < s.integration.dt_s:
        raise ConfigError("integration.t_end_s must be >= integration.dt_s")
    _positive("rom.f_cut_hz", s.rom.f_cut_hz)
    if s.rom.nominal_area_nodes < 0:
        raise ConfigError("rom.nominal_area_nodes must be >= 0")
    for k, v in dataclasses.asdict(s.points).items():
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"points.{k} must be in [0, 1]")
    L = b.length_m
    for label in (s.impact.point, *s.probes.points):
        x = s.point_coordinate(label)
        if not 0.0 <= x <= L:
            raise ConfigError(f"point {label!r} at x={x} m outside the beam span")
    _positive("contact.penalty_scale", s.contact.penalty_scale)
    _positive("contact.complementarity_tol", s.contact.complementarity_tol)
    if s.contact.max_iterations < 1:
        raise ConfigError("contact.max_iterations must be >= 1")
    _positive("post.fit_window_s", s.post.fit_window_s)


def format_scenario(s: Scenario) -> str:
    """Config text reproducing ``s`` (used for ``--print-defaults`` and manifests)."""
    lines = [f"name = {s.name}"]
    for sec in _SECTIONS:
        obj = getattr(s, sec)
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, tuple):
                v = ", ".join(v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{sec}.{f.name} = {v}")
    return "\n".join(lines) + "\n"
