"""Plain-text machine configuration (INI layout).

Sections: ``[geometry]`` with the fixed and design dimensions, ``[materials]``
with the B-H file and loss coefficients, ``[drive]`` with the controller
settings and ``[study]`` with resolution and sweep grids.  Every key is
optional except ``geometry.variant``; missing keys take the variant defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .drive import ChcConfig
from .fem import MaterialSet
from .geometry import DESIGN_FIELDS, VARIANTS, GeometryError, MotorGeometry, check_geometry
from .maps import DEFAULT_ANGLES, DEFAULT_CURRENTS, HEADROOM_CURRENT
from .materials import BHCurve, LossModel

GEOMETRY_KEYS = (
    "stator_outer_diameter_mm", "stator_inner_diameter_mm", "rotor_outer_diameter_mm",
    "shaft_diameter_mm", "airgap_mm", "stack_length_mm", "turns_per_pole", "coil_clearance_mm",
) + DESIGN_FIELDS

# copper loss / (2 I_rms^2) from the published loss table, per machine
DEFAULT_RESISTANCE = {"proposed_8_14": 0.406, "conventional_8_12": 0.255}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class StudyOptions:
    resolution: str = "reference"
    currents: tuple = DEFAULT_CURRENTS + (HEADROOM_CURRENT,)
    n_angles: int = DEFAULT_ANGLES
    seed: int = 2024
    workers: int = 1


@dataclass(frozen=True)
class MachineConfig:
    geometry: MotorGeometry
    loss: LossModel = field(default_factory=LossModel)
    drive: ChcConfig = field(default_factory=ChcConfig)
    study: StudyOptions = field(default_factory=StudyOptions)
    bh_curve: str = "m19"
    source: str = ""

    @classmethod
    def default(cls, variant: str) -> "MachineConfig":
        if variant not in VARIANTS:
            raise ConfigError(f"unknown variant {variant!r}")
        return cls(MotorGeometry.for_variant(variant),
                   LossModel(copper_resistance_per_phase_ohm=DEFAULT_RESISTANCE[variant]))

    @property
    def variant(self) -> str:
        return self.geometry.variant

    def materials(self) -> MaterialSet:
        if self.bh_curve == "m19":
            return MaterialSet.steel()
        path = Path(self.bh_curve)
        if not path.is_absolute() and self.source:
            path = Path(self.source).parent / path
        return MaterialSet.steel(BHCurve.from_file(path))

    def with_design(self, design) -> "MachineConfig":
        return dataclasses.replace(self, geometry=self.geometry.with_design(design))


def _num(text: str, key: str):
    try:
        return int(text) if key in ("turns_per_pole", "periods", "n_angles", "seed", "workers") \
            else float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as a number") from None


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


def load(path) -> MachineConfig:
    """Read a configuration file; geometry invariants are checked on load."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not cp.read(path):
        raise ConfigError(f"cannot read config {path}")
    return _from_parser(cp, str(path))


def loads(text: str) -> MachineConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text)
    return _from_parser(cp, "")


def _from_parser(cp: configparser.ConfigParser, source: str) -> MachineConfig:
    if not cp.has_option("geometry", "variant"):
        raise ConfigError("[geometry] variant is required")
    variant = cp.get("geometry", "variant").strip()
    base = MachineConfig.default(variant)
    g = {}
    for key, text in cp.items("geometry"):
        if key == "variant":
            continue
        if key not in GEOMETRY_KEYS:
            raise ConfigError(f"[geometry] unknown key {key!r}")
        g[key] = _num(text, key)
    geom = MotorGeometry.for_variant(variant, **g)
    try:
        check_geometry(geom)
    except GeometryError as exc:
        raise ConfigError(f"[geometry] {exc}") from None

    loss_kw, bh = {}, base.bh_curve
    if cp.has_section("materials"):
        names = {f.name for f in dataclasses.fields(LossModel)}
        for key, text in cp.items("materials"):
            if key == "bh_curve":
                bh = text.strip()
            elif key in names:
                loss_kw[key] = _num(text, key)
            else:
                raise ConfigError(f"[materials] unknown key {key!r}")
    loss = dataclasses.replace(base.loss, **loss_kw)

    drive_kw = {}
    if cp.has_section("drive"):
        names = {f.name for f in dataclasses.fields(ChcConfig)}
        for key, text in cp.items("drive"):
            if key not in names:
                raise ConfigError(f"[drive] unknown key {key!r}")
            drive_kw[key] = _num(text, key)
    drive = ChcConfig(**drive_kw)

    study_kw = {}
    if cp.has_section("study"):
        for key, text in cp.items("study"):
            if key == "resolution":
                study_kw[key] = text.strip()
            elif key == "currents":
                study_kw[key] = _floats(text)
            elif key in ("n_angles", "seed", "workers"):
                study_kw[key] = _num(text, key)
            else:
                raise ConfigError(f"[study] unknown key {key!r}")
    return MachineConfig(geom, loss, drive, StudyOptions(**study_kw), bh, source)


def dumps(cfg: MachineConfig) -> str:
    g = cfg.geometry
    lines = ["[geometry]", f"variant = {g.variant}"]
    lines += [f"{k} = {getattr(g, k)!r}" for k in GEOMETRY_KEYS]
    lines += ["", "[materials]", f"bh_curve = {cfg.bh_curve}"]
    lines += [f"{f.name} = {getattr(cfg.loss, f.name)!r}" for f in dataclasses.fields(LossModel)]
    lines += ["", "[drive]"]
    lines += [f"{f.name} = {getattr(cfg.drive, f.name)!r}" for f in dataclasses.fields(ChcConfig)]
    s = cfg.study
    lines += ["", "[study]", f"resolution = {s.resolution}",
              "currents = " + " ".join(repr(float(c)) for c in s.currents),
              f"n_angles = {s.n_angles}", f"seed = {s.seed}", f"workers = {s.workers}"]
    return "\n".join(lines) + "\n"


def save(cfg: MachineConfig, path) -> None:
    Path(path).write_text(dumps(cfg))


def packaged(variant: str) -> MachineConfig:
    """Default configuration shipped with the package."""
    with resources.as_file(resources.files("tpsrm") / "data" / f"{variant}.ini") as p:
        return load(p)
