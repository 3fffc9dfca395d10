"""Triangular meshing of the cross-section with a structured moving band.

One rotor pitch and one stator core sector are triangulated with Triangle
(constrained Delaunay, quality refinement) and replicated around the
machine.  The sector hulls carry no Steiner points, so copies join
conformally and the band circles carry exactly ``band_divisions`` nodes.
The band is a single layer of ``2 * band_divisions`` triangles joining the
rotor and stator rings; rotating the rotor by whole band pitches only
re-indexes that layer.

Mesh coordinates are metres.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import triangle
from scipy.spatial import cKDTree

from .geometry import CrossSection, Discretization, GeometryError, MotorGeometry, Region
from .geometry import build_cross_section, default_band_divisions

MATERIAL_AIR, MATERIAL_STATOR_IRON, MATERIAL_ROTOR_IRON = 0, 1, 2
_MERGE_TOL_MM = 1e-7


class MeshError(GeometryError):
    """Mesh generation failed or a mesh violates its invariants."""


@dataclass(frozen=True)
class MeshResolution:
    """Mesh density controls.

    ``band_divisions`` of ``None`` picks the division count closest to
    ``band_pitch_deg`` that keeps the stroke grid on band nodes.
    ``edge_mm`` is the target triangle edge per region tag; boundaries are
    polygonised at ``fine_mm`` next to the gap, coarsening by ``grading``
    per mm of distance up to ``coarse_mm``.
    """

    band_divisions: int | None = None
    band_pitch_deg: float = 0.1
    edge_mm: dict = field(default_factory=lambda: {
        "shaft": 4.0, "rotor_iron": 1.5, "stator_iron": 1.5, "coil": 2.0, "air": 1.0})
    fine_mm: float = 0.25
    coarse_mm: float = 2.0
    grading: float = 0.3
    min_angle_deg: float = 20.0
    angles_per_stroke: int = 31

    def divisions_for(self, geom: MotorGeometry) -> int:
        if self.band_divisions is not None:
            return int(self.band_divisions)
        return default_band_divisions(geom.layout, self.band_pitch_deg, self.angles_per_stroke)

    def discretization(self, geom: MotorGeometry) -> Discretization:
        return Discretization(self.divisions_for(geom), self.fine_mm, self.coarse_mm, self.grading)


RESOLUTIONS = {
    "reference": MeshResolution(),
    "coarse": MeshResolution(
        band_pitch_deg=0.4,
        edge_mm={"shaft": 6.0, "rotor_iron": 3.0, "stator_iron": 3.0, "coil": 3.5, "air": 2.0},
        fine_mm=0.6, coarse_mm=3.5, grading=0.4, angles_per_stroke=16),
    "fine": MeshResolution(
        band_pitch_deg=0.05,
        edge_mm={"shaft": 3.0, "rotor_iron": 1.0, "stator_iron": 1.0, "coil": 1.5, "air": 0.7},
        fine_mm=0.15, coarse_mm=1.5, grading=0.25),
}


def resolution(name_or_obj) -> MeshResolution:
    if isinstance(name_or_obj, MeshResolution):
        return name_or_obj
    if isinstance(name_or_obj, int) or str(name_or_obj).isdigit():
        return MeshResolution(band_divisions=int(name_or_obj))
    try:
        return RESOLUTIONS[name_or_obj]
    except KeyError:
        raise ValueError(f"unknown mesh resolution {name_or_obj!r}; "
                         f"choose from {sorted(RESOLUTIONS)} or a band division count") from None


@dataclass(frozen=True)
class RegionInfo:
    tag: str
    phase: str | None = None
    polarity: int = 0
    tooth: int | None = None

    @property
    def material(self) -> int:
        return {"stator_iron": MATERIAL_STATOR_IRON,
                "rotor_iron": MATERIAL_ROTOR_IRON}.get(self.tag, MATERIAL_AIR)


@dataclass(frozen=True, eq=False)
class Band:
    divisions: int
    rotor_ring: np.ndarray      # rotor node ids, ring[j] at body angle j*pitch
    stator_ring: np.ndarray     # stator node ids, ring[k] at angle k*pitch
    inner_radius: float
    outer_radius: float
    region: int
    first_triangle: int
    steps: int = 0

    @property
    def pitch_deg(self) -> float:
        return 360.0 / self.divisions

    def triangles(self, steps: int | None = None) -> np.ndarray:
        s = self.steps if steps is None else steps
        n = self.divisions
        j = np.arange(n)
        r0, r1 = self.rotor_ring[j], self.rotor_ring[(j + 1) % n]
        s0 = self.stator_ring[(j + s) % n]
        s1 = self.stator_ring[(j + s + 1) % n]
        tri = np.empty((2 * n, 3), dtype=np.int64)
        tri[0::2] = np.c_[r0, s1, r1]
        tri[1::2] = np.c_[r0, s0, s1]
        return tri


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray            # (n, 2) metres, current rotor position
    triangles: np.ndarray        # (m, 3) CCW
    regions: np.ndarray          # (m,) index into region_info
    region_info: tuple
    boundary_nodes: np.ndarray   # homogeneous Dirichlet (outer stator surface)
    rotor_nodes: np.ndarray
    base_rotor_xy: np.ndarray    # rotor node coordinates at band step 0
    band: Band | None = None

    @property
    def materials(self) -> np.ndarray:
        lut = np.array([r.material for r in self.region_info], dtype=np.int64)
        return lut[self.regions]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def rotor_angle_deg(self) -> float:
        return 0.0 if self.band is None else self.band.steps * self.band.pitch_deg

    def areas(self) -> np.ndarray:
        return triangle_areas(self.nodes, self.triangles)

    def region_area(self, predicate) -> float:
        a = self.areas()
        mask = np.array([bool(predicate(r)) for r in self.region_info])[self.regions]
        return float(a[mask].sum())

    def iron_area(self) -> float:
        return self.region_area(lambda r: r.material != MATERIAL_AIR)

    def band_elements(self) -> np.ndarray:
        if self.band is None:
            return np.zeros(0, dtype=np.int64)
        return np.arange(self.band.first_triangle, self.band.first_triangle + 2 * self.band.divisions)


def triangle_areas(nodes, tri) -> np.ndarray:
    p = nodes[tri]
    return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def min_angles_deg(nodes, tri) -> np.ndarray:
    p = nodes[tri]
    out = np.full(len(tri), 180.0)
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cosang = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        out = np.minimum(out, np.degrees(np.arccos(np.clip(cosang, -1, 1))))
    return out


def _rot(xy: np.ndarray, deg: float) -> np.ndarray:
    c, s = math.cos(math.radians(deg)), math.sin(math.radians(deg))
    return xy @ np.array([[c, s], [-s, c]])


# ---------------------------------------------------------------------------
# sector triangulation


def _pslg(regions: tuple[Region, ...]):
    pts = np.vstack([r.polygon for r in regions])
    tree = cKDTree(pts)
    parent = np.arange(len(pts))
    for i, j in sorted(tree.query_pairs(_MERGE_TOL_MM)):
        ri, rj = parent[i], parent[j]
        while parent[ri] != ri:
            ri = parent[ri]
        while parent[rj] != rj:
            rj = parent[rj]
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    for i in range(len(pts)):
        r = i
        while parent[r] != r:
            r = parent[r]
        parent[i] = r
    uniq, inverse = np.unique(parent, return_inverse=True)
    verts = pts[uniq]
    segs = set()
    offset = 0
    for reg in regions:
        n = len(reg.polygon)
        ids = inverse[offset:offset + n]
        offset += n
        for a, b in zip(ids, np.roll(ids, -1)):
            if a != b:
                segs.add((min(a, b), max(a, b)))
    return verts, np.array(sorted(segs), dtype=np.int64)


def _triangulate_sector(regions, res: MeshResolution):
    verts, segs = _pslg(regions)
    seeds = []
    for k, reg in enumerate(regions):
        edge = res.edge_mm.get(reg.tag, res.edge_mm.get("air", 1.0))
        seeds.append([reg.seed[0], reg.seed[1], k + 1, math.sqrt(3) / 4 * edge ** 2])
    out = triangle.triangulate(
        dict(vertices=verts, segments=segs, regions=np.array(seeds)),
        f"pq{res.min_angle_deg:g}AaYQ",
    )
    v = out["vertices"]
    t = out["triangles"].astype(np.int64)
    attr = out["triangle_attributes"].ravel().astype(np.int64) - 1
    if np.any(attr < 0):
        raise MeshError("triangles outside every tagged region (open region boundary?)")
    if not np.allclose(v[: len(verts)], verts):
        raise MeshError("triangulator reordered the input vertices")
    return v, t, attr, len(verts)


def _edge_nodes(v, angle_deg, tol=1e-6):
    """Vertex ids on the ray at ``angle_deg`` (plus the origin), sorted by radius."""
    r = np.hypot(v[:, 0], v[:, 1])
    u = np.array([math.cos(math.radians(angle_deg)), math.sin(math.radians(angle_deg))])
    cross = v[:, 0] * u[1] - v[:, 1] * u[0]
    along = v @ u
    on = (np.abs(cross) < tol) & (along > -tol)
    ids = np.nonzero(on)[0]
    return ids[np.argsort(r[ids])]


def _arc_nodes(v, radius, tol=1e-6):
    r = np.hypot(v[:, 0], v[:, 1])
    return np.nonzero(np.abs(r - radius) < tol)[0]


def _replicate(v, t, attr, n_input, start_deg, copies, first_id):
    """Rotate a sector mesh ``copies`` times, merging shared hull nodes."""
    span = 360.0 / copies
    left = _edge_nodes(v, start_deg)
    right = _edge_nodes(v, start_deg + span)
    if len(left) != len(right):
        raise MeshError(f"sector hulls do not match ({len(left)} vs {len(right)} nodes)")
    if np.any(left >= n_input) or np.any(right >= n_input):
        raise MeshError("Steiner points were inserted on a sector hull")
    rl = np.hypot(*v[left].T)
    rr = np.hypot(*v[right].T)
    if not np.allclose(rl, rr, atol=1e-6):
        raise MeshError("sector hull nodes are not rotationally matched")
    left_to_right = dict(zip(left.tolist(), right.tolist()))
    right_to_left = dict(zip(right.tolist(), left.tolist()))

    nv = len(v)
    gid = np.full((copies, nv), -1, dtype=np.int64)
    coords = []
    nxt = first_id
    for j in range(copies):
        for i in range(nv):
            if j > 0 and i in left_to_right:
                gid[j, i] = gid[j - 1, left_to_right[i]]
            elif j == copies - 1 and j > 0 and i in right_to_left:
                gid[j, i] = gid[0, right_to_left[i]]
            else:
                gid[j, i] = nxt
                nxt += 1
                coords.append((j, i))
    xy = np.empty((len(coords), 2))
    for c in range(copies):
        sel = [k for k, (j, i) in enumerate(coords) if j == c]
        idx = [coords[k][1] for k in sel]
        xy[sel] = _rot(v[idx], c * span)
    tris = np.vstack([gid[j][t] for j in range(copies)])
    n_local = int(attr.max()) + 1 if len(attr) else 0
    return xy, tris, attr, gid, n_local


def generate(cs: CrossSection, res: MeshResolution | str | None = None) -> Mesh:
    """Conforming triangulation of ``cs``; the rotor is placed at ``cs.rotor_angle_deg``."""
    res = resolution(res or "reference")
    n_band = cs.band_divisions
    if n_band % cs.granularity:
        raise MeshError(f"band_divisions={n_band} is not a multiple of the layout "
                        f"step granularity {cs.granularity}")
    if n_band % cs.rotor_symmetry or n_band % cs.stator_symmetry:
        raise MeshError("band_divisions must be divisible by both sector counts")
    pitch = 360.0 / n_band

    sv, st, sa, s_in = _triangulate_sector(cs.stator_sector, res)
    rv, rt, ra, r_in = _triangulate_sector(cs.rotor_sector, res)
    _check_sector_quality(sv, st, sa, cs.stator_sector, res)
    _check_sector_quality(rv, rt, ra, cs.rotor_sector, res)

    s_xy, s_tri, _, s_gid, _ = _replicate(sv, st, sa, s_in, cs.stator_sector_start_deg,
                                          cs.stator_symmetry, 0)
    n_stator = len(s_xy)
    r_xy, r_tri, _, r_gid, _ = _replicate(rv, rt, ra, r_in, cs.rotor_sector_start_deg,
                                          cs.rotor_symmetry, n_stator)
    n_ss, n_rs = len(cs.stator_sector), len(cs.rotor_sector)
    s_reg = np.concatenate([k * n_ss + sa for k in range(cs.stator_symmetry)])
    r_off = cs.stator_symmetry * n_ss
    r_reg = np.concatenate([r_off + j * n_rs + ra for j in range(cs.rotor_symmetry)])
    band_region = r_off + cs.rotor_symmetry * n_rs

    def ring_ids(local_v, gid, radius):
        return np.unique(gid[:, _arc_nodes(local_v, radius)].ravel())

    s_ring = ring_ids(sv, s_gid, cs.band_outer_radius)
    r_ring = ring_ids(rv, r_gid, cs.band_inner_radius)
    if len(s_ring) != n_band or len(r_ring) != n_band:
        raise MeshError(f"band rings have {len(r_ring)}/{len(s_ring)} nodes, expected {n_band}")

    nodes_mm = np.vstack([s_xy, r_xy])
    s_ring = _order_ring(nodes_mm, s_ring, pitch)
    r_ring = _order_ring(nodes_mm, r_ring, pitch)

    tris = np.vstack([s_tri, r_tri])
    regs = np.concatenate([s_reg, r_reg])
    first_band = len(tris)
    band = Band(n_band, r_ring, s_ring, cs.band_inner_radius * 1e-3,
                cs.band_outer_radius * 1e-3, band_region, first_band, 0)
    tris = np.vstack([tris, band.triangles(0)])
    regs = np.concatenate([regs, np.full(2 * n_band, band_region)])

    r_out = np.hypot(*nodes_mm[:n_stator].T)
    boundary = np.nonzero(np.abs(r_out - cs.outer_radius) < 1e-6)[0]
    rotor_nodes = np.arange(n_stator, len(nodes_mm))
    nodes = nodes_mm * 1e-3
    info = tuple(RegionInfo(r.tag, r.phase, r.polarity, r.tooth) for r in cs.regions)
    mesh = Mesh(nodes=nodes, triangles=tris, regions=regs, region_info=info,
                boundary_nodes=boundary, rotor_nodes=rotor_nodes,
                base_rotor_xy=nodes[rotor_nodes].copy(), band=band)
    _freeze(mesh)
    steps = cs.rotor_angle_deg / pitch
    if abs(steps - round(steps)) > 1e-6:
        raise MeshError(f"rotor angle {cs.rotor_angle_deg} deg is not a multiple of the "
                        f"band pitch {pitch} deg")
    if round(steps):
        mesh = rotate_band(mesh, int(round(steps)))
    return mesh


def _order_ring(nodes_mm, ids, pitch):
    ang = np.degrees(np.arctan2(nodes_mm[ids, 1], nodes_mm[ids, 0]))
    k = np.mod(np.round(ang / pitch).astype(np.int64), len(ids))
    if len(np.unique(k)) != len(ids):
        raise MeshError("band ring nodes are not on the band grid")
    out = np.empty_like(ids)
    out[k] = ids
    return out


def _check_sector_quality(v, t, attr, regions, res):
    ang = min_angles_deg(v, t)
    worst = int(np.argmin(ang))
    if ang[worst] < 15.0:
        raise MeshError(
            f"minimum angle {ang[worst]:.2f} deg below 15 deg in region "
            f"{regions[attr[worst]].label} (target {res.min_angle_deg} deg)")
    if np.any(triangle_areas(v, t) <= 0):
        raise MeshError("inverted triangle in sector mesh")


def _freeze(mesh: Mesh) -> None:
    for f in ("nodes", "triangles", "regions", "boundary_nodes", "rotor_nodes", "base_rotor_xy"):
        getattr(mesh, f).flags.writeable = False


def generate_for(geom: MotorGeometry, res: MeshResolution | str = "reference",
                 rotor_angle_deg: float = 0.0) -> Mesh:
    res = resolution(res)
    cs = build_cross_section(geom, rotor_angle_deg, res.discretization(geom))
    return generate(cs, res)


def rotate_band(mesh: Mesh, steps: int) -> Mesh:
    """Rotate the rotor by ``steps`` band pitches (counter-clockwise positive)."""
    if mesh.band is None:
        raise MeshError("mesh has no moving band")
    total = mesh.band.steps + int(steps)
    band = dataclasses.replace(mesh.band, steps=total)
    nodes = np.array(mesh.nodes)
    nodes[mesh.rotor_nodes] = _rot(mesh.base_rotor_xy, (total % band.divisions) * band.pitch_deg)
    tris = np.array(mesh.triangles)
    f = band.first_triangle
    tris[f:f + 2 * band.divisions] = band.triangles(total % band.divisions)
    out = dataclasses.replace(mesh, nodes=nodes, triangles=tris, band=band)
    _freeze(out)
    return out


def rotate_to(mesh: Mesh, rotor_angle_deg: float) -> Mesh:
    """Snap ``rotor_angle_deg`` to the band grid and rotate there."""
    target = int(round(rotor_angle_deg / mesh.band.pitch_deg))
    return rotate_band(mesh, target - mesh.band.steps)


def check_mesh(mesh: Mesh, min_angle_deg: float = 15.0) -> None:
    """Positive orientation, conformity and angle quality; raises MeshError."""
    areas = mesh.areas()
    if np.any(areas <= 0):
        raise MeshError(f"{int(np.sum(areas <= 0))} triangles with non-positive area")
    edges = np.sort(np.vstack([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                               mesh.triangles[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshError("non-conforming mesh: an edge is shared by more than two triangles")
    ang = min_angles_deg(mesh.nodes, mesh.triangles)
    if ang.min() < min_angle_deg:
        raise MeshError(f"minimum angle {ang.min():.2f} deg < {min_angle_deg} deg")


def boundary_edges(mesh: Mesh) -> np.ndarray:
    edges = np.sort(np.vstack([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]],
                               mesh.triangles[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq[counts == 1]


# ---------------------------------------------------------------------------
# plain-text format
#
#   tpsrm-mesh 1
#   nodes <n>                      then n lines: x y   (metres, rotor at band step 0)
#   regions <k>                    then k lines: tag phase polarity tooth  ('-' for none)
#   triangles <m>                  then m lines: i j k region material
#   boundary <b>                   then one line of node ids
#   rotor_nodes <r>                then one line of node ids
#   band <N> <steps> <r_in> <r_out> <region> <first_triangle>
#   rotor_ring                     one line of N node ids
#   stator_ring                    one line of N node ids
#
# Floats are written with repr(), so a write/read cycle is bit-exact.


def write_mesh(mesh: Mesh, path) -> None:
    base = np.array(mesh.nodes)
    base[mesh.rotor_nodes] = mesh.base_rotor_xy
    tris = np.array(mesh.triangles)
    if mesh.band is not None:
        f = mesh.band.first_triangle
        tris[f:f + 2 * mesh.band.divisions] = mesh.band.triangles(0)
    mats = mesh.materials
    lines = ["tpsrm-mesh 1", f"nodes {len(base)}"]
    lines += [f"{x!r} {y!r}" for x, y in base.tolist()]
    lines.append(f"regions {len(mesh.region_info)}")
    for r in mesh.region_info:
        lines.append(f"{r.tag} {r.phase or '-'} {r.polarity} {'-' if r.tooth is None else r.tooth}")
    lines.append(f"triangles {len(tris)}")
    lines += [f"{a} {b} {c} {g} {m}" for (a, b, c), g, m in zip(tris.tolist(), mesh.regions.tolist(),
                                                                mats.tolist())]
    lines.append(f"boundary {len(mesh.boundary_nodes)}")
    lines.append(" ".join(map(str, mesh.boundary_nodes.tolist())))
    lines.append(f"rotor_nodes {len(mesh.rotor_nodes)}")
    lines.append(" ".join(map(str, mesh.rotor_nodes.tolist())))
    if mesh.band is not None:
        b = mesh.band
        lines.append(f"band {b.divisions} {b.steps} {b.inner_radius!r} {b.outer_radius!r} "
                     f"{b.region} {b.first_triangle}")
        lines.append(" ".join(map(str, b.rotor_ring.tolist())))
        lines.append(" ".join(map(str, b.stator_ring.tolist())))
    else:
        lines.append("band none")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    it = iter(Path(path).read_text().splitlines())
    header = next(it)
    if header.split() != ["tpsrm-mesh", "1"]:
        raise MeshError(f"not a tpsrm mesh file: {header!r}")

    def count(word):
        key, n = next(it).split()
        if key != word:
            raise MeshError(f"expected {word!r}, found {key!r}")
        return int(n)

    n = count("nodes")
    nodes = np.array([[float(v) for v in next(it).split()] for _ in range(n)]).reshape(n, 2)
    k = count("regions")
    info = []
    for _ in range(k):
        tag, ph, pol, tooth = next(it).split()
        info.append(RegionInfo(tag, None if ph == "-" else ph, int(pol),
                               None if tooth == "-" else int(tooth)))
    m = count("triangles")
    rows = np.array([[int(v) for v in next(it).split()] for _ in range(m)], dtype=np.int64)
    rows = rows.reshape(m, 5)
    count("boundary")
    boundary = np.array(next(it).split(), dtype=np.int64)
    count("rotor_nodes")
    rotor = np.array(next(it).split(), dtype=np.int64)
    band_line = next(it).split()
    band = None
    if band_line[1] != "none":
        nb, steps = int(band_line[1]), int(band_line[2])
        r_in, r_out = float(band_line[3]), float(band_line[4])
        region, first = int(band_line[5]), int(band_line[6])
        rr = np.array(next(it).split(), dtype=np.int64)
        sr = np.array(next(it).split(), dtype=np.int64)
        band = Band(nb, rr, sr, r_in, r_out, region, first, 0)
    mesh = Mesh(nodes=nodes, triangles=rows[:, :3].copy(), regions=rows[:, 3].copy(),
                region_info=tuple(info), boundary_nodes=boundary, rotor_nodes=rotor,
                base_rotor_xy=nodes[rotor].copy(), band=band)
    _freeze(mesh)
    if band is not None and steps:
        mesh = rotate_band(mesh, steps)
    return mesh
