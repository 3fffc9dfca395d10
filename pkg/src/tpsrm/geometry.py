"""Tooth layout and parametric 2D cross-section of two-phase SRMs.

All lengths are millimetres and all angles mechanical degrees unless a name
says otherwise.  The rotor angle origin is the phase-A aligned position.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

VARIANTS = ("proposed_8_14", "conventional_8_12")

# b_sv, h_s, beta_s, beta_r, beta_ir, h_r
DESIGN_FIELDS = (
    "stator_yoke_thickness_mm",
    "stator_pole_length_mm",
    "stator_pole_arc_deg",
    "rotor_pole_arc_deg",
    "inner_rotor_pole_arc_deg",
    "rotor_pole_length_mm",
)

DESIGN_BOUNDS = {
    "proposed_8_14": {
        "stator_yoke_thickness_mm": (3.48, 6.96),
        "stator_pole_length_mm": (9.44, 13.21),
        "stator_pole_arc_deg": (7.71, 18.00),
        "rotor_pole_arc_deg": (7.71, 18.00),
        "inner_rotor_pole_arc_deg": (9.00, 21.00),
        "rotor_pole_length_mm": (4.45, 8.91),
    },
    "conventional_8_12": {
        "stator_yoke_thickness_mm": (4.22, 8.44),
        "stator_pole_length_mm": (9.58, 13.41),
        "stator_pole_arc_deg": (9.00, 21.00),
        "rotor_pole_arc_deg": (9.00, 21.00),
        "inner_rotor_pole_arc_deg": (9.00, 21.00),
        "rotor_pole_length_mm": (4.45, 8.91),
    },
}

PUBLISHED_OPTIMUM = {
    "proposed_8_14": (5.18, 11.8, 12.85, 9.07, 16.64, 5.79),
    "conventional_8_12": (5.00, 11.98, 13.3, 15.30, 15.84, 8.89),
}

_TOL_MM = 1e-6
_ENVELOPE_TOL_MM = 0.05


class GeometryError(ValueError):
    """Raised for an infeasible or inconsistent machine geometry."""


# ---------------------------------------------------------------------------
# angular layout


@dataclass(frozen=True)
class Tooth:
    index: int
    angle_deg: float
    phase: str
    polarity: int
    core: int


@dataclass(frozen=True)
class ToothLayout:
    n_rotor_teeth: int
    n_stator_teeth: int
    rotor_pole_pitch_deg: float
    ccore_tooth_span_deg: float
    inter_core_span_deg: float
    n_ccores: int = 4
    topology: str = "ccore"

    def _turns(self) -> tuple[Fraction, Fraction, Fraction]:
        # exact (pitch, alpha, gamma) as fractions of a full turn
        pitch = Fraction(1, self.n_rotor_teeth)
        if self.topology == "ccore":
            return pitch, 2 * pitch, Fraction(3, 2) * pitch
        step = Fraction(1, self.n_stator_teeth)
        return pitch, step, step

    @property
    def closure_deg(self) -> float:
        return self.n_ccores * (self.ccore_tooth_span_deg + self.inter_core_span_deg)

    def closes(self) -> bool:
        _, alpha, gamma = self._turns()
        return self.n_ccores * (alpha + gamma) == 1

    def core_centers_turns(self) -> list[Fraction]:
        _, alpha, gamma = self._turns()
        first = Fraction(0) if self.topology == "ccore" else alpha / 2
        return [first + k * (alpha + gamma) for k in range(self.n_ccores)]

    def tooth_turns(self) -> list[Fraction]:
        _, alpha, _ = self._turns()
        out = []
        for c in self.core_centers_turns():
            out += [c - alpha / 2, c + alpha / 2]
        return out

    def teeth(self) -> tuple[Tooth, ...]:
        """Stator teeth with phase and winding polarity.

        Polarity +1 means positive current drives flux radially outward
        through the tooth.  C-core teeth pair up within a core so the main
        flux loop closes through the two teeth of the same core.
        """
        teeth = []
        for m, turn in enumerate(self.tooth_turns()):
            core = m // 2
            if self.topology == "ccore":
                phase = "A" if core % 2 == 0 else "B"
                polarity = 1 if m % 2 == 0 else -1
            else:
                phase = "A" if m % 2 == 0 else "B"
                polarity = 1 if (m // 2) % 2 == 0 else -1
            teeth.append(Tooth(m, float(turn * 360), phase, polarity, core))
        return tuple(teeth)

    def phase_offset_deg(self, phase: str) -> float:
        """Rotor angle at which ``phase`` is aligned."""
        return 0.0 if phase == "A" else self.rotor_pole_pitch_deg / 2


def layout_from_rotor_teeth(
    n_rotor_teeth: int, n_ccores: int = 4, check_closure: bool = False
) -> ToothLayout:
    """C-core layout for ``n_rotor_teeth``: pitch, tooth span and core gap."""
    if int(n_rotor_teeth) != n_rotor_teeth or n_rotor_teeth < 2:
        raise GeometryError(f"n_rotor_teeth must be an integer >= 2, got {n_rotor_teeth}")
    n = int(n_rotor_teeth)
    layout = ToothLayout(
        n_rotor_teeth=n,
        n_stator_teeth=2 * n_ccores,
        rotor_pole_pitch_deg=360.0 / n,
        ccore_tooth_span_deg=720.0 / n,
        inter_core_span_deg=540.0 / n,
        n_ccores=n_ccores,
        topology="ccore",
    )
    if check_closure and not layout.closes():
        raise GeometryError(
            f"C-core closure fails for N_r={n}: "
            f"{n_ccores}*(alpha+gamma) = {layout.closure_deg:.6f} deg != 360 deg"
        )
    return layout


def conventional_layout(n_rotor_teeth: int = 12, n_stator_teeth: int = 8) -> ToothLayout:
    """Uniformly spaced stator teeth with alternating phases (8/12 style)."""
    step = 360.0 / n_stator_teeth
    return ToothLayout(
        n_rotor_teeth=n_rotor_teeth,
        n_stator_teeth=n_stator_teeth,
        rotor_pole_pitch_deg=360.0 / n_rotor_teeth,
        ccore_tooth_span_deg=step,
        inter_core_span_deg=step,
        n_ccores=n_stator_teeth // 2,
        topology="uniform",
    )


def solve_rotor_tooth_count(n_ccores: int = 4) -> int:
    # n_ccores * (720/N + 540/N) = 360  =>  N = n_ccores * 1260 / 360
    n = Fraction(n_ccores * (720 + 540), 360)
    if n.denominator != 1:
        raise GeometryError(f"no integer rotor tooth count for {n_ccores} C-cores")
    return int(n)


def mech_to_elec(angle_mech_deg, n_rotor_teeth: int):
    """Electrical angle in [0, 360)."""
    e = np.mod(np.asarray(angle_mech_deg, dtype=float) * n_rotor_teeth, 360.0)
    e = np.where(np.isclose(e, 360.0, rtol=0, atol=1e-9), 0.0, e)
    return float(e) if e.ndim == 0 else e


def elec_to_mech(angle_elec_deg, n_rotor_teeth: int):
    """Inverse of :func:`mech_to_elec` within one rotor pitch (no wrapping)."""
    m = np.asarray(angle_elec_deg, dtype=float) / n_rotor_teeth
    return float(m) if m.ndim == 0 else m


# ---------------------------------------------------------------------------
# machine dimensions


@dataclass(frozen=True)
class MotorGeometry:
    layout: ToothLayout
    stator_yoke_thickness_mm: float
    stator_pole_length_mm: float
    stator_pole_arc_deg: float
    rotor_pole_arc_deg: float
    inner_rotor_pole_arc_deg: float
    rotor_pole_length_mm: float
    variant: str = "proposed_8_14"
    stator_outer_diameter_mm: float = 114.0
    stator_inner_diameter_mm: float = 80.04
    rotor_outer_diameter_mm: float = 79.44
    shaft_diameter_mm: float = 29.0
    airgap_mm: float = 0.3
    stack_length_mm: float = 40.0
    turns_per_pole: int = 94
    coil_clearance_mm: float = 1.0

    @classmethod
    def proposed_8_14(cls, **overrides) -> "MotorGeometry":
        base = dict(zip(DESIGN_FIELDS, PUBLISHED_OPTIMUM["proposed_8_14"]))
        base.update(overrides)
        return cls(layout=layout_from_rotor_teeth(14, check_closure=True),
                   variant="proposed_8_14", **base)

    @classmethod
    def conventional_8_12(cls, **overrides) -> "MotorGeometry":
        base = dict(zip(DESIGN_FIELDS, PUBLISHED_OPTIMUM["conventional_8_12"]))
        base.update(overrides)
        return cls(layout=conventional_layout(12, 8), variant="conventional_8_12", **base)

    @classmethod
    def for_variant(cls, variant: str, **overrides) -> "MotorGeometry":
        if variant == "proposed_8_14":
            return cls.proposed_8_14(**overrides)
        if variant == "conventional_8_12":
            return cls.conventional_8_12(**overrides)
        raise GeometryError(f"unknown variant {variant!r}")

    def with_design(self, design: Sequence[float]) -> "MotorGeometry":
        return dataclasses.replace(self, **dict(zip(DESIGN_FIELDS, map(float, design))))

    def design_vector(self) -> tuple[float, ...]:
        return tuple(getattr(self, f) for f in DESIGN_FIELDS)

    # radii ---------------------------------------------------------------
    @property
    def shaft_radius(self) -> float:
        return self.shaft_diameter_mm / 2

    @property
    def rotor_radius(self) -> float:
        return self.rotor_outer_diameter_mm / 2

    @property
    def rotor_root_radius(self) -> float:
        return self.rotor_radius - self.rotor_pole_length_mm

    @property
    def bore_radius(self) -> float:
        return self.stator_inner_diameter_mm / 2

    @property
    def slot_bottom_radius(self) -> float:
        return self.bore_radius + self.stator_pole_length_mm

    @property
    def stator_iron_radius(self) -> float:
        return self.slot_bottom_radius + self.stator_yoke_thickness_mm

    @property
    def outer_radius(self) -> float:
        return self.stator_outer_diameter_mm / 2

    @property
    def band_radii(self) -> tuple[float, float]:
        """Inner and outer radius of the moving band (middle third of the gap)."""
        return (self.rotor_radius + self.airgap_mm / 3, self.bore_radius - self.airgap_mm / 3)

    @property
    def stroke_mech_deg(self) -> float:
        return self.layout.rotor_pole_pitch_deg / 2

    def motor_volume_l(self) -> float:
        # (D_o/2)^2 * L, the envelope convention behind the published 129.96 mL
        return (self.outer_radius ** 2) * self.stack_length_mm * 1e-6

    def config_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("layout")
        d["n_rotor_teeth"] = self.layout.n_rotor_teeth
        d["n_stator_teeth"] = self.layout.n_stator_teeth
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.config_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def geometry_violations(geom: MotorGeometry, check_bounds: bool = False) -> list[str]:
    """Every violated constraint, as readable strings (empty when feasible)."""
    out = []
    lay = geom.layout
    if abs(geom.rotor_outer_diameter_mm + 2 * geom.airgap_mm - geom.stator_inner_diameter_mm) > _TOL_MM:
        out.append(
            f"air gap: d + 2*l_g = {geom.rotor_outer_diameter_mm + 2 * geom.airgap_mm:.4f} "
            f"!= D = {geom.stator_inner_diameter_mm:.4f}"
        )
    envelope = geom.stator_inner_diameter_mm + 2 * (
        geom.stator_pole_length_mm + geom.stator_yoke_thickness_mm)
    if envelope > geom.stator_outer_diameter_mm + _ENVELOPE_TOL_MM:
        out.append(f"stator envelope: D + 2*(h_s + b_sv) = {envelope:.3f} > D_o = "
                   f"{geom.stator_outer_diameter_mm:.3f}")
    if geom.stator_yoke_thickness_mm <= 0:
        out.append("negative yoke: b_sv <= 0")
    if geom.rotor_pole_arc_deg > geom.inner_rotor_pole_arc_deg:
        out.append(f"rotor pole taper: beta_r = {geom.rotor_pole_arc_deg} > beta_ir = "
                   f"{geom.inner_rotor_pole_arc_deg}")
    if geom.rotor_root_radius <= geom.shaft_radius:
        out.append("negative yoke: rotor pole length leaves no rotor yoke above the shaft")
    if geom.inner_rotor_pole_arc_deg >= lay.rotor_pole_pitch_deg:
        out.append(f"rotor teeth overlap at the root: beta_ir = {geom.inner_rotor_pole_arc_deg} "
                   f">= pitch {lay.rotor_pole_pitch_deg:.4f}")
    window = min(lay.ccore_tooth_span_deg, lay.inter_core_span_deg)
    if geom.stator_pole_arc_deg >= window:
        out.append(f"stator teeth overlap: beta_s = {geom.stator_pole_arc_deg} >= "
                   f"tooth spacing {window:.4f}")
    arc_sum = geom.stator_pole_arc_deg + geom.rotor_pole_arc_deg
    if arc_sum > lay.rotor_pole_pitch_deg:
        out.append(
            f"adjacent-tooth overlap: beta_s + beta_r = {arc_sum:.4f} exceeds the rotor "
            f"pole pitch {lay.rotor_pole_pitch_deg:.4f} (no unaligned position)"
        )
    if not 0 < geom.coil_clearance_mm < geom.stator_pole_length_mm:
        out.append("coil clearance must lie inside the slot depth")
    if min(geom.design_vector()) <= 0:
        out.append("design parameters must be positive")
    if check_bounds:
        for name, (lo, hi) in DESIGN_BOUNDS[geom.variant].items():
            v = getattr(geom, name)
            if not lo - 1e-12 <= v <= hi + 1e-12:
                out.append(f"{name} = {v} outside [{lo}, {hi}]")
    return out


def check_geometry(geom: MotorGeometry, check_bounds: bool = False) -> None:
    bad = geometry_violations(geom, check_bounds)
    if bad:
        raise GeometryError("; ".join(bad))


# ---------------------------------------------------------------------------
# cross-section


@dataclass(frozen=True, eq=False)
class Region:
    tag: str                 # stator_iron | rotor_iron | shaft | coil | air
    side: str                # rotor | stator | band
    polygon: np.ndarray      # (n, 2) CCW, mm
    seed: tuple[float, float]
    phase: str | None = None
    polarity: int = 0        # +1 coil_plus, -1 coil_minus
    tooth: int | None = None
    holes: tuple = ()

    @property
    def label(self) -> str:
        if self.tag == "coil":
            kind = "coil_plus" if self.polarity > 0 else "coil_minus"
            return f"{kind}({self.phase},{self.tooth})"
        return self.tag

    @property
    def area(self) -> float:
        return abs(polygon_area(self.polygon)) - sum(abs(polygon_area(h)) for h in self.holes)

    @property
    def material(self) -> str:
        return "iron" if self.tag in ("stator_iron", "rotor_iron") else "air"


@dataclass(frozen=True)
class CrossSection:
    """Tagged regions of the full 360 degree model.

    ``rotor_sector`` / ``stator_sector`` hold the region polygons of one
    symmetry sector in the body frame; the full ``regions`` list is ordered
    stator copies, rotor copies, band, each copy in sector order.  The
    mesher triangulates one sector and replicates it.
    """

    regions: tuple[Region, ...]
    rotor_sector: tuple[Region, ...]
    stator_sector: tuple[Region, ...]
    rotor_symmetry: int
    stator_symmetry: int
    rotor_sector_start_deg: float
    stator_sector_start_deg: float
    band_inner_radius: float
    band_outer_radius: float
    outer_radius: float
    band_divisions: int
    rotor_angle_deg: float = 0.0
    granularity: int = 1

    def count(self, tag: str) -> int:
        return sum(1 for r in self.regions if r.tag == tag)

    def area(self, tag: str | None = None) -> float:
        return sum(r.area for r in self.regions if tag is None or r.tag == tag)

    def iron_area(self) -> float:
        return sum(r.area for r in self.regions if r.material == "iron")


def polygon_area(p: np.ndarray) -> float:
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _rot(points: np.ndarray, deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return points @ np.array([[c, s], [-s, c]])


@dataclass(frozen=True)
class Discretization:
    """How finely region boundaries are polygonised.

    ``fine_mm`` applies at the air gap and the step grows by ``grading`` per
    mm of distance from it, capped at ``coarse_mm``.
    """

    band_divisions: int
    fine_mm: float = 0.25
    coarse_mm: float = 2.0
    grading: float = 0.3

    def step(self, r: float, r_gap: float) -> float:
        return min(self.coarse_mm, self.fine_mm + self.grading * abs(r - r_gap))


class _Arcs:
    """Polygonise arcs and segments so that shared edges get identical vertices."""

    def __init__(self, disc: Discretization, r_gap: float, grid_radii: Iterable[float]):
        self.disc = disc
        self.r_gap = r_gap
        self.grid = {round(r, 9) for r in grid_radii}
        self.breaks: dict[float, set[float]] = {}

    def register(self, edges):
        for e in edges:
            if e[0] == "arc":
                key = round(e[1], 9)
                self.breaks.setdefault(key, set()).update((e[2], e[3]))

    def arc(self, r: float, a0: float, a1: float) -> np.ndarray:
        lo, hi = min(a0, a1), max(a0, a1)
        key = round(r, 9)
        if key in self.grid:
            pitch = 360.0 / self.disc.band_divisions
            k0, k1 = round(lo / pitch), round(hi / pitch)
            if abs(k0 * pitch - lo) > 1e-7 or abs(k1 * pitch - hi) > 1e-7:
                raise GeometryError(f"arc endpoint off the band grid at r={r}")
            ang = np.arange(k0, k1 + 1) * pitch
        else:
            bks = sorted(b for b in self.breaks.get(key, ()) if lo - 1e-12 <= b <= hi + 1e-12)
            dstep = math.degrees(self.disc.step(r, self.r_gap) / r)
            ang = [bks[0]]
            for b0, b1 in zip(bks[:-1], bks[1:]):
                n = max(1, math.ceil((b1 - b0) / dstep - 1e-9))
                ang += [b0 + (b1 - b0) * k / n for k in range(1, n + 1)]
            ang = np.array(ang)
        pts = np.c_[r * np.cos(np.radians(ang)), r * np.sin(np.radians(ang))]
        return pts if a0 <= a1 else pts[::-1]

    def line(self, p0, p1) -> np.ndarray:
        p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
        flip = tuple(p0) > tuple(p1)
        a, b = (p1, p0) if flip else (p0, p1)
        # graded spacing: equal increments of the integral of ds / step(r)
        length = float(np.hypot(*(b - a)))
        u = np.linspace(0.0, 1.0, 257)
        r = np.hypot(*(a + (b - a) * u[:, None]).T)
        inv = length / np.array([self.disc.step(x, self.r_gap) for x in r])
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (inv[1:] + inv[:-1]) * np.diff(u))])
        n = max(1, math.ceil(cum[-1] - 1e-9))
        t = np.interp(np.linspace(0.0, cum[-1], n + 1), cum, u)[:, None]
        pts = a + (b - a) * t
        pts[-1] = b
        return pts[::-1] if flip else pts

    def polygon(self, edges) -> np.ndarray:
        chunks = []
        for e in edges:
            if e[0] == "arc":
                pts = self.arc(e[1], e[2], e[3])
            else:
                pts = self.line(_xy(e[1]), _xy(e[2]))
            chunks.append(pts[:-1])
        poly = np.vstack(chunks)
        if polygon_area(poly) < 0:
            poly = poly[::-1]
        return poly


def _xy(polar) -> tuple[float, float]:
    r, a = polar
    return (r * math.cos(math.radians(a)), r * math.sin(math.radians(a)))


def _polar_rect(r0, r1, a0, a1):
    return [("arc", r0, a0, a1), ("line", (r0, a1), (r1, a1)),
            ("arc", r1, a1, a0), ("line", (r1, a0), (r0, a0))]


def _rotor_sector_defs(geom: MotorGeometry):
    h = geom.layout.rotor_pole_pitch_deg / 2
    rs, rb, rr = geom.shaft_radius, geom.rotor_root_radius, geom.rotor_radius
    rbi = geom.band_radii[0]
    bi, bt = geom.inner_rotor_pole_arc_deg / 2, geom.rotor_pole_arc_deg / 2
    origin = (0.0, 0.0)
    defs = [
        dict(tag="shaft", seed=(rs / 2, 0.0),
             edges=[("line", origin, (rs, -h)), ("arc", rs, -h, h), ("line", (rs, h), origin)]),
        dict(tag="rotor_iron", seed=((rs + rb) / 2, 0.0), edges=_polar_rect(rs, rb, -h, h)),
        dict(tag="rotor_iron", seed=((rb + rr) / 2, 0.0),
             edges=[("arc", rb, -bi, bi), ("line", (rb, bi), (rr, bt)),
                    ("arc", rr, bt, -bt), ("line", (rr, -bt), (rb, -bi))]),
        dict(tag="air", seed=((rr + rbi) / 2, 0.0),
             edges=[("arc", rb, -h, -bi), ("line", (rb, -bi), (rr, -bt)),
                    ("arc", rr, -bt, bt), ("line", (rr, bt), (rb, bi)),
                    ("arc", rb, bi, h), ("line", (rb, h), (rbi, h)),
                    ("arc", rbi, h, -h), ("line", (rbi, -h), (rb, -h))]),
    ]
    return defs, -h


def _stator_sector_defs(geom: MotorGeometry):
    lay = geom.layout
    teeth = lay.teeth()
    half = 180.0 / lay.n_ccores
    c = float(lay.core_centers_turns()[0] * 360)
    s0, s1 = c - half, c + half
    t1, t2 = teeth[0].angle_deg, teeth[1].angle_deg
    b = geom.stator_pole_arc_deg / 2
    rbo = geom.band_radii[1]
    rsb, rw = geom.bore_radius, geom.bore_radius + geom.coil_clearance_mm
    ry, ryo, ro = geom.slot_bottom_radius, geom.stator_iron_radius, geom.outer_radius
    yo = min(ryo, ro)

    def flank(a, down):
        pts = [(ry, a), (rw, a), (rsb, a)]
        if not down:
            pts = pts[::-1]
        return [("line", pts[0], pts[1]), ("line", pts[1], pts[2])]

    core = [("arc", yo, s0, s1), ("line", (yo, s1), (ry, s1)), ("arc", ry, s1, t2 + b)]
    core += flank(t2 + b, True) + [("arc", rsb, t2 + b, t2 - b)] + flank(t2 - b, False)
    core += [("arc", ry, t2 - b, t1 + b)]
    core += flank(t1 + b, True) + [("arc", rsb, t1 + b, t1 - b)] + flank(t1 - b, False)
    core += [("arc", ry, t1 - b, s0), ("line", (ry, s0), (yo, s0))]
    defs = [dict(tag="stator_iron", seed=((ry + yo) / 2, c), edges=core)]
    mids = {0: (s0, c), 1: (c, s1)}
    for k, t in enumerate((t1, t2)):
        ml, mr = mids[k]
        # coil sides: clockwise side carries -polarity, counter-clockwise +polarity
        defs.append(dict(tag="coil", tooth_local=k, sign=-1, seed=((rw + ry) / 2, (ml + t - b) / 2),
                         edges=_polar_rect(rw, ry, ml, t - b)))
        defs.append(dict(tag="coil", tooth_local=k, sign=1, seed=((rw + ry) / 2, (t + b + mr) / 2),
                         edges=_polar_rect(rw, ry, t + b, mr)))
        defs.append(dict(tag="air", seed=((rbo + rsb) / 2, (ml + t) / 2),
                         edges=[("arc", rbo, ml, t), ("line", (rbo, t), (rsb, t)),
                                ("arc", rsb, t, t - b), ("line", (rsb, t - b), (rw, t - b)),
                                ("arc", rw, t - b, ml), ("line", (rw, ml), (rbo, ml))]))
        defs.append(dict(tag="air", seed=((rbo + rsb) / 2, (t + mr) / 2),
                         edges=[("arc", rbo, t, mr), ("line", (rbo, mr), (rw, mr)),
                                ("arc", rw, mr, t + b), ("line", (rw, t + b), (rsb, t + b)),
                                ("arc", rsb, t + b, t), ("line", (rsb, t), (rbo, t))]))
    if ro - ryo > 1e-6:
        defs.append(dict(tag="air", seed=((ryo + ro) / 2, c), edges=_polar_rect(ryo, ro, s0, s1)))
    return defs, s0


def band_granularity(layout: ToothLayout) -> int:
    """Smallest band division count putting all sector breakpoints on the band grid."""
    pitch, _, _ = layout._turns()
    pts = [pitch / 2]
    for c in layout.core_centers_turns():
        pts.append(c)
        pts.append(c + Fraction(1, 2 * layout.n_ccores))
    pts += layout.tooth_turns()
    return math.lcm(*(p.denominator for p in pts))


def default_band_divisions(layout: ToothLayout, target_pitch_deg: float = 0.1,
                           angles_per_stroke: int = 31) -> int:
    """Division count nearest ``target_pitch_deg`` that also puts a uniform
    ``angles_per_stroke`` grid over the stroke on band nodes."""
    stroke_steps = 2 * layout.n_rotor_teeth * (angles_per_stroke - 1)
    g = math.lcm(band_granularity(layout), stroke_steps)
    target = 360.0 / target_pitch_deg
    return max(g, g * round(target / g))


def build_cross_section(geom: MotorGeometry, rotor_angle_deg: float = 0.0,
                        disc: Discretization | None = None,
                        check_bounds: bool = False) -> CrossSection:
    """Tagged region polygons of the full machine with the rotor at ``rotor_angle_deg``."""
    check_geometry(geom, check_bounds)
    lay = geom.layout
    if disc is None:
        disc = Discretization(default_band_divisions(lay))
    gran = band_granularity(lay)
    if disc.band_divisions % gran:
        raise GeometryError(f"band_divisions={disc.band_divisions} is not a multiple of {gran}")
    rbi, rbo = geom.band_radii
    r_gap = (rbi + rbo) / 2
    rdefs, r_start = _rotor_sector_defs(geom)
    sdefs, s_start = _stator_sector_defs(geom)

    arcs = _Arcs(disc, r_gap, (rbi, rbo))
    for d in rdefs:
        arcs.register(d["edges"])
    rotor_sector = tuple(
        Region(d["tag"], "rotor", arcs.polygon(d["edges"]), _xy(d["seed"])) for d in rdefs)

    arcs = _Arcs(disc, r_gap, (rbi, rbo))
    for d in sdefs:
        arcs.register(d["edges"])
    teeth = lay.teeth()
    stator_sector = tuple(
        Region(d["tag"], "stator", arcs.polygon(d["edges"]), _xy(d["seed"])) for d in sdefs)

    regions: list[Region] = []
    core_step = 360.0 / lay.n_ccores
    for k in range(lay.n_ccores):
        for d, reg in zip(sdefs, stator_sector):
            kw = {}
            if reg.tag == "coil":
                tooth = teeth[2 * k + d["tooth_local"]]
                kw = dict(phase=tooth.phase, polarity=d["sign"] * tooth.polarity, tooth=tooth.index)
            regions.append(_rotated(reg, k * core_step, **kw))
    pitch = lay.rotor_pole_pitch_deg
    for j in range(lay.n_rotor_teeth):
        for reg in rotor_sector:
            regions.append(_rotated(reg, j * pitch + rotor_angle_deg))
    n_band = 720
    ang = np.linspace(0, 2 * np.pi, n_band, endpoint=False)
    outer = np.c_[rbo * np.cos(ang), rbo * np.sin(ang)]
    inner = np.c_[rbi * np.cos(ang), rbi * np.sin(ang)][::-1]
    regions.append(Region("air", "band", outer, (r_gap, 0.0), holes=(inner,)))

    return CrossSection(
        regions=tuple(regions), rotor_sector=rotor_sector, stator_sector=stator_sector,
        rotor_symmetry=lay.n_rotor_teeth, stator_symmetry=lay.n_ccores,
        rotor_sector_start_deg=r_start, stator_sector_start_deg=s_start,
        band_inner_radius=rbi, band_outer_radius=rbo, outer_radius=geom.outer_radius,
        band_divisions=disc.band_divisions, rotor_angle_deg=rotor_angle_deg, granularity=gran,
    )


def _rotated(reg: Region, deg: float, **kw) -> Region:
    seed = tuple(_rot(np.array([reg.seed]), deg)[0])
    return dataclasses.replace(reg, polygon=_rot(reg.polygon, deg), seed=seed,
                               holes=tuple(_rot(h, deg) for h in reg.holes), **kw)


# ---------------------------------------------------------------------------
# export

_SVG_COLORS = {
    "stator_iron": "#8c96a0", "rotor_iron": "#5f6b78", "shaft": "#d9d9d9",
    "air": "#ffffff", "coil_plus": "#d9534f", "coil_minus": "#337ab7",
}


def cross_section_svg(cs: CrossSection, size_px: int = 800) -> str:
    r = cs.outer_radius
    scale = size_px / (2.2 * r)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size_px}" height="{size_px}" '
           f'viewBox="{-1.1 * r:.4f} {-1.1 * r:.4f} {2.2 * r:.4f} {2.2 * r:.4f}">',
           f'<g transform="scale(1,-1)" stroke="#222" stroke-width="{0.6 / scale:.4f}">']
    order = sorted(cs.regions, key=lambda g: g.tag == "air" and g.side == "band", reverse=True)
    for reg in order:
        key = reg.label.split("(")[0]
        d = " ".join(_svg_loop(p) for p in (reg.polygon, *reg.holes))
        out.append(f'<path d="{d}" fill="{_SVG_COLORS.get(key, "#fff")}" fill-rule="evenodd">'
                   f'<title>{reg.label}</title></path>')
    out.append("</g></svg>")
    return "\n".join(out)


def _svg_loop(p: np.ndarray) -> str:
    pts = " L ".join(f"{x:.4f},{y:.4f}" for x, y in p)
    return f"M {pts} Z"
