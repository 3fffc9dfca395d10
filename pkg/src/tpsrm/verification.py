"""Closed-form test problems for the field solver.

* ``manufactured_disc``: linear disc with a smooth source whose exact
  potential is known; returns the error on a sequence of uniformly refined
  meshes.
* ``air_cored_pair``: two round conductors with opposite currents inside a
  circular ``A = 0`` boundary; the exact field follows from line currents and
  their images in the boundary circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import triangle

from .fem import ExcitationState, FemModel, MaterialSet, shape_gradients
from .materials import MU0, NU0
from .mesh import Mesh, RegionInfo

# degree-5 seven-point rule on the reference triangle (barycentric, weights sum to 1)
_S15 = math.sqrt(15.0)
_A1, _B1 = (6 - _S15) / 21, (9 + 2 * _S15) / 21
_A2, _B2 = (6 + _S15) / 21, (9 - 2 * _S15) / 21
_BARY = np.array([[1 / 3, 1 / 3, 1 / 3],
                  [_A1, _A1, _B1], [_A1, _B1, _A1], [_B1, _A1, _A1],
                  [_A2, _A2, _B2], [_A2, _B2, _A2], [_B2, _A2, _A2]])
_W = np.array([9 / 40] + [(155 - _S15) / 1200] * 3 + [(155 + _S15) / 1200] * 3)


def _circle(r, n, x0=0.0, y0=0.0):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return np.c_[x0 + r * np.cos(t), y0 + r * np.sin(t)]


def _plain_mesh(nodes, tri, regions, info, outer_radius):
    r = np.hypot(nodes[:, 0], nodes[:, 1])
    boundary = np.nonzero(np.abs(r - outer_radius) < 1e-9 * outer_radius)[0]
    return Mesh(nodes=nodes, triangles=tri.astype(np.int64), regions=regions.astype(np.int64),
                region_info=tuple(info), boundary_nodes=boundary,
                rotor_nodes=np.zeros(0, dtype=np.int64), base_rotor_xy=np.zeros((0, 2)))


def disc_mesh(radius: float, n_boundary: int = 24, max_area: float | None = None):
    pts = _circle(radius, n_boundary)
    segs = np.c_[np.arange(n_boundary), (np.arange(n_boundary) + 1) % n_boundary]
    if max_area is None:
        h = 2 * np.pi * radius / n_boundary
        max_area = 0.5 * h * h
    out = triangle.triangulate(dict(vertices=pts, segments=segs), f"pq30a{max_area:.12g}YQ")
    return out["vertices"], out["triangles"].astype(np.int64)


def refine_red(nodes, tri, radius=None):
    """Split each triangle into four; new boundary midpoints are pushed onto the circle."""
    edges = np.sort(np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]]), axis=1)
    uniq, inv, counts = np.unique(edges, axis=0, return_inverse=True, return_counts=True)
    mids = 0.5 * (nodes[uniq[:, 0]] + nodes[uniq[:, 1]])
    if radius is not None:
        on_bnd = counts == 1
        mids[on_bnd] *= radius / np.hypot(*mids[on_bnd].T)[:, None]
    m = len(tri)
    ids = len(nodes) + inv.reshape(3, m).T  # midpoints of edges 01, 12, 20
    a, b, c = tri.T
    ab, bc, ca = ids.T
    new = np.vstack([np.c_[a, ab, ca], np.c_[ab, b, bc], np.c_[ca, bc, c], np.c_[ab, bc, ca]])
    return np.vstack([nodes, mids]), new


@dataclass(frozen=True)
class ConvergenceStudy:
    h: np.ndarray                 # max edge length per level
    energy_error: np.ndarray      # squared energy norm of the error, per metre
    energy_norm_error: np.ndarray

    def order(self, which: str = "energy_error") -> float:
        """Least-squares slope of log(error) against log(h)."""
        e = getattr(self, which)
        return float(np.polyfit(np.log(self.h), np.log(e), 1)[0])

    def final_order(self, which: str = "energy_error") -> float:
        e = getattr(self, which)
        return float(np.log(e[-2] / e[-1]) / np.log(self.h[-2] / self.h[-1]))


def manufactured_disc(levels: int = 4, radius: float = 0.05) -> ConvergenceStudy:
    """Exact potential ``u = cos(pi r / 2R)`` on a disc of radius ``R`` in air.

    The source is ``J = -nu0 * laplacian(u)``; the error is measured with a
    degree-5 quadrature of the exact gradient against the discrete one.
    """
    k = math.pi / (2 * radius)

    def u_grad(x, y):
        r = np.hypot(x, y)
        g = -k * np.sin(k * r) / np.where(r == 0, 1.0, r)
        return g * x, g * y

    def source(x, y):
        r = np.hypot(x, y)
        sinc = np.where(r == 0, k, np.sin(k * r) / np.where(r == 0, 1.0, r))
        return NU0 * (k * k * np.cos(k * r) + k * sinc)

    nodes, tri = disc_mesh(radius)
    hs, errs, norms = [], [], []
    for level in range(levels):
        if level:
            nodes, tri = refine_red(nodes, tri, radius)
        mesh = _plain_mesh(nodes, tri, np.zeros(len(tri)), [RegionInfo("air")], radius)
        model = FemModel(mesh, MaterialSet.air(), stack_length_m=1.0)
        grad, area = shape_gradients(nodes, tri)
        p = nodes[tri]
        qx = np.einsum("qk,mk->mq", _BARY, p[..., 0])
        qy = np.einsum("qk,mk->mq", _BARY, p[..., 1])
        js = source(qx, qy)
        load = np.zeros(len(nodes))
        np.add.at(load, tri, area[:, None] * np.einsum("q,mq,qk->mk", _W, js, _BARY))
        sol = model.solve(ExcitationState(), extra_load=load).require_converged()
        gh = np.einsum("mij,mi->mj", grad, sol.a_z[tri])
        gx, gy = u_grad(qx, qy)
        e2 = NU0 * np.sum(area * np.einsum("q,mq->m", _W, (gx - gh[:, :1]) ** 2 + (gy - gh[:, 1:]) ** 2))
        edge = np.linalg.norm(p - np.roll(p, 1, axis=1), axis=2).max()
        hs.append(edge)
        errs.append(e2)
        norms.append(math.sqrt(e2))
    return ConvergenceStudy(np.array(hs), np.array(errs), np.array(norms))


@dataclass(frozen=True)
class AirCoreResult:
    b_fem: np.ndarray
    b_exact: np.ndarray

    @property
    def relative_error(self) -> float:
        return float(np.linalg.norm(self.b_fem - self.b_exact) / np.linalg.norm(self.b_exact))


def line_current_field(x, y, sources):
    """Flux density of 2D line currents ``[(x0, y0, I), ...]`` at ``(x, y)``."""
    bx = by = 0.0
    for x0, y0, i in sources:
        dx, dy = x - x0, y - y0
        r2 = dx * dx + dy * dy
        c = MU0 * i / (2 * np.pi * r2)
        bx += -c * dy
        by += c * dx
    return np.array([bx, by])


def air_cored_pair(current: float = 100.0, boundary_radius: float = 0.05, offset: float = 0.015,
                   conductor_radius: float = 0.005, edge: float = 0.0008,
                   probe_radius: float = 0.002) -> AirCoreResult:
    """Mean B over a small disc at the centre, FEM against line currents plus images."""
    outer = _circle(boundary_radius, 256)
    left = _circle(conductor_radius, 64, -offset)
    right = _circle(conductor_radius, 64, offset)
    pts = np.vstack([outer, right, left])
    segs = []
    base = 0
    for loop in (outer, right, left):
        n = len(loop)
        segs.append(np.c_[base + np.arange(n), base + (np.arange(n) + 1) % n])
        base += n
    max_area = math.sqrt(3) / 4 * edge ** 2
    regions = [[0.0, 0.5 * boundary_radius, 1, max_area],
               [offset, 0.0, 2, max_area], [-offset, 0.0, 3, max_area]]
    out = triangle.triangulate(dict(vertices=pts, segments=np.vstack(segs), regions=regions),
                               "pq30AaYQ")
    nodes, tri = out["vertices"], out["triangles"]
    reg = out["triangle_attributes"].ravel().astype(np.int64) - 1
    info = [RegionInfo("air"), RegionInfo("coil", "A", +1, 0), RegionInfo("coil", "A", -1, 0)]
    mesh = _plain_mesh(nodes, tri, reg, info, boundary_radius)
    model = FemModel(mesh, MaterialSet.air(), stack_length_m=1.0, turns_per_pole=1)
    sol = model.solve(ExcitationState.single("A", current, 1)).require_converged()
    b = sol.element_B
    _, area = shape_gradients(nodes, tri)
    c = nodes[tri].mean(axis=1)
    near = np.hypot(c[:, 0], c[:, 1]) < probe_radius
    b_fem = (area[near, None] * b[near]).sum(axis=0) / area[near].sum()
    img = boundary_radius ** 2 / offset
    srcs = [(offset, 0.0, current), (-offset, 0.0, -current),
            (img, 0.0, -current), (-img, 0.0, current)]
    return AirCoreResult(b_fem, line_current_field(0.0, 0.0, srcs))
