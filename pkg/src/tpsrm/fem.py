"""Nonlinear 2D magnetostatics with first-order triangles.

Unknown: the out-of-plane vector potential ``A_z`` at mesh nodes, with
``A_z = 0`` on the outer stator surface.  The discrete problem minimises

    sum_e area_e * w_e(|B_e|^2) - sum_i f_i a_i,     B = curl(A_z e_z),

where ``w`` is the magnetic energy density of the element material.  Newton
steps use the exact Jacobian and a halving line search on that functional.
All quantities are per metre of stack unless stated otherwise.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels
from .materials import MU0, NU0, BHCurve, LinearMaterial
from .mesh import MATERIAL_AIR, MATERIAL_ROTOR_IRON, MATERIAL_STATOR_IRON, Mesh


class FemError(RuntimeError):
    """Solver failure (singular system, unconverged solution used, bad input)."""


@dataclass(frozen=True)
class ExcitationState:
    """Phase currents in amperes and turns per stator pole."""

    phase_currents: tuple = ()
    turns_per_pole: int = 94

    @classmethod
    def single(cls, phase: str, current: float, turns_per_pole: int = 94) -> "ExcitationState":
        return cls(((phase, float(current)),), turns_per_pole)

    @classmethod
    def of(cls, currents: dict, turns_per_pole: int = 94) -> "ExcitationState":
        return cls(tuple(sorted((k, float(v)) for k, v in currents.items())), turns_per_pole)

    def current(self, phase: str) -> float:
        return dict(self.phase_currents).get(phase, 0.0)

    @property
    def is_zero(self) -> bool:
        return all(v == 0.0 for _, v in self.phase_currents)


@dataclass(frozen=True)
class MaterialSet:
    """Material model per mesh material id (air is always ``1/mu0``)."""

    stator: object = None
    rotor: object = None

    @classmethod
    def steel(cls, curve=None) -> "MaterialSet":
        curve = BHCurve.m19() if curve is None else curve
        return cls(curve, curve)

    @classmethod
    def linear(cls, mu_r: float) -> "MaterialSet":
        m = LinearMaterial(mu_r)
        return cls(m, m)

    @classmethod
    def air(cls) -> "MaterialSet":
        return cls(LinearMaterial(1.0), LinearMaterial(1.0))

    def model(self, material_id: int):
        if material_id == MATERIAL_STATOR_IRON:
            return self.stator
        if material_id == MATERIAL_ROTOR_IRON:
            return self.rotor
        return None


def shape_gradients(nodes, tri):
    """Constant P1 gradients ``(m, 3, 2)`` and signed areas ``(m,)``."""
    p = nodes[tri]
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    grad = np.stack([b, c], axis=2) / (2.0 * area)[:, None, None]
    return np.ascontiguousarray(grad), area


class _Pattern:
    """CSR sparsity of the free-node stiffness and the scatter map into it."""

    def __init__(self, tri, free_index, n_free):
        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        fr, fc = free_index[rows], free_index[cols]
        self.keep = (fr >= 0) & (fc >= 0)
        key = fr[self.keep].astype(np.int64) * n_free + fc[self.keep]
        uniq, self.scatter = np.unique(key, return_inverse=True)
        self.indptr = np.searchsorted(uniq // n_free, np.arange(n_free + 1)).astype(np.int64)
        self.indices = (uniq % n_free).astype(np.int64)
        self.n = n_free
        self.nnz = len(uniq)

    def matrix(self, blocks):
        data = np.bincount(self.scatter, weights=blocks.ravel()[self.keep], minlength=self.nnz)
        return sp.csc_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))


class FemModel:
    """Discrete operator for one mesh position, materials and machine data.

    ``stack_length_m`` scales per-length quantities; ``turns_per_pole`` sets
    the coil MMF.
    """

    def __init__(self, mesh: Mesh, materials: MaterialSet | None = None,
                 stack_length_m: float = 0.04, turns_per_pole: int = 94):
        self.mesh = mesh
        self.materials = materials or MaterialSet.steel()
        self.stack_length = float(stack_length_m)
        self.turns = int(turns_per_pole)
        self.grad, self.area = shape_gradients(mesh.nodes, mesh.triangles)
        if np.any(self.area <= 0):
            raise FemError("mesh has inverted or degenerate triangles")
        n = mesh.n_nodes
        if len(mesh.boundary_nodes) == 0:
            raise FemError("singular stiffness: no Dirichlet nodes (A = 0 boundary is empty)")
        fixed = np.zeros(n, dtype=bool)
        fixed[mesh.boundary_nodes] = True
        self.free = np.nonzero(~fixed)[0]
        self.free_index = np.full(n, -1, dtype=np.int64)
        self.free_index[self.free] = np.arange(len(self.free))
        self.pattern = _Pattern(mesh.triangles, self.free_index, len(self.free))

        mats = mesh.materials
        self.groups = []
        for mid in (MATERIAL_STATOR_IRON, MATERIAL_ROTOR_IRON):
            model = self.materials.model(mid)
            idx = np.nonzero(mats == mid)[0]
            if model is None:
                mats = np.where(mats == mid, MATERIAL_AIR, mats)
            elif len(idx):
                self.groups.append((model, idx))
        self.air = np.nonzero(np.isin(mats, [MATERIAL_AIR]))[0]

        # coil sides: element ids, area, phase, polarity
        reg_area = np.bincount(mesh.regions, weights=self.area, minlength=len(mesh.region_info))
        self.coils = []
        for rid, info in enumerate(mesh.region_info):
            if info.tag == "coil" and info.phase is not None:
                elems = np.nonzero(mesh.regions == rid)[0]
                self.coils.append((info.phase, info.polarity, elems, reg_area[rid]))

    @classmethod
    def for_geometry(cls, mesh: Mesh, geom, materials: MaterialSet | None = None) -> "FemModel":
        return cls(mesh, materials, geom.stack_length_mm * 1e-3, geom.turns_per_pole)

    @property
    def phases(self) -> list[str]:
        return sorted({c[0] for c in self.coils})

    # -- loads and element fields ------------------------------------------
    def current_density(self, exc: ExcitationState) -> np.ndarray:
        j = np.zeros(self.mesh.n_triangles)
        for phase, pol, elems, s in self.coils:
            j[elems] = pol * exc.turns_per_pole * exc.current(phase) / s
        return j

    def load_vector(self, exc: ExcitationState) -> np.ndarray:
        j = self.current_density(exc)
        f = np.zeros(self.mesh.n_nodes)
        np.add.at(f, self.mesh.triangles, (j * self.area / 3.0)[:, None])
        return f

    def element_b(self, a) -> np.ndarray:
        ga = np.einsum("mij,mi->mj", self.grad, a[self.mesh.triangles])
        return np.c_[ga[:, 1], -ga[:, 0]]

    def reluctivity(self, b2):
        nu = np.full(len(b2), NU0)
        dnu = np.zeros(len(b2))
        for model, idx in self.groups:
            nu[idx], dnu[idx] = model.reluctivity(b2[idx])
        return nu, dnu

    def energy_density(self, b2):
        w = 0.5 * NU0 * b2
        for model, idx in self.groups:
            w[idx] = model.energy_density(b2[idx])
        return w

    def coenergy_density(self, b2):
        w = 0.5 * NU0 * b2
        for model, idx in self.groups:
            w[idx] = model.coenergy_density(b2[idx])
        return w

    def functional(self, a, f) -> float:
        b = self.element_b(a)
        return float(np.dot(self.area, self.energy_density(np.einsum("ij,ij->i", b, b))) - f @ a)

    # -- solve ----------------------------------------------------------------
    def solve(self, exc: ExcitationState, a0=None, rtol: float = 1e-8, etol: float = 1e-10,
              max_iter: int = 50, extra_load=None) -> "FemSolution":
        """Newton solve; ``a0`` warm-starts, ``extra_load`` adds nodal sources (A/m)."""
        n = self.mesh.n_nodes
        if not all(np.isfinite(v) for _, v in exc.phase_currents):
            raise FemError("non-finite phase current")
        if exc.turns_per_pole != self.turns:
            exc = ExcitationState(exc.phase_currents, self.turns)
        f = self.load_vector(exc)
        if extra_load is not None:
            f = f + np.asarray(extra_load, dtype=float)
        ff = f[self.free]
        fnorm = float(np.linalg.norm(ff))
        if fnorm == 0.0:
            return FemSolution(self, exc, np.zeros(n), True, 0, 0.0, [])
        a = np.zeros(n) if a0 is None else np.array(a0, dtype=float)
        a[self.mesh.boundary_nodes] = 0.0
        tri = self.mesh.triangles
        history = []
        energy = self.functional(a, f)
        converged = False
        it = 0
        rel = np.inf
        for it in range(1, max_iter + 1):
            b = self.element_b(a)
            nu, dnu = self.reluctivity(np.einsum("ij,ij->i", b, b))
            jac, res_e = _kernels.newton_element_terms(self.grad, self.area,
                                                       np.ascontiguousarray(a[tri]), nu, dnu)
            r = np.zeros(n)
            np.add.at(r, tri, res_e)
            r = r[self.free] - ff
            rel = float(np.linalg.norm(r)) / fnorm
            history.append(rel)
            if rel <= rtol:
                converged = True
                it -= 1
                break
            try:
                lu = splu(self.pattern.matrix(jac), permc_spec="MMD_AT_PLUS_A",
                          diag_pivot_thresh=0.0, options={"SymmetricMode": True})
            except RuntimeError as exc_:
                raise FemError(f"singular stiffness matrix: {exc_}") from None
            step = np.zeros(n)
            step[self.free] = -lu.solve(r)
            alpha = 1.0
            while True:
                trial = a + alpha * step
                e_new = self.functional(trial, f)
                if e_new <= energy + 1e-14 * abs(energy) or alpha < 1e-6:
                    break
                alpha *= 0.5
            a = trial
            d_energy = abs(energy - e_new)
            energy = e_new
            if d_energy <= etol * abs(energy) and alpha == 1.0 and it > 1:
                converged = True
                break
        if converged and (not history or history[-1] > rtol):
            # the energy test ended the loop; report the final residual
            b = self.element_b(a)
            nu, dnu = self.reluctivity(np.einsum("ij,ij->i", b, b))
            _, res_e = _kernels.newton_element_terms(self.grad, self.area,
                                                     np.ascontiguousarray(a[tri]), nu, dnu)
            r = np.zeros(n)
            np.add.at(r, tri, res_e)
            rel = float(np.linalg.norm(r[self.free] - ff)) / fnorm
            history.append(rel)
        return FemSolution(self, exc, a, converged, it, history[-1], history)


@dataclass(frozen=True, eq=False)
class FemSolution:
    model: FemModel
    excitation: ExcitationState
    a_z: np.ndarray
    converged: bool
    newton_iterations: int
    residual_norm: float
    residual_history: list = field(default_factory=list)

    @property
    def mesh(self) -> Mesh:
        return self.model.mesh

    @property
    def element_B(self) -> np.ndarray:
        return self.model.element_b(self.a_z)

    def require_converged(self) -> "FemSolution":
        if not self.converged:
            raise FemError(f"solution did not converge after {self.newton_iterations} Newton "
                           f"iterations (relative residual {self.residual_norm:.3e})")
        return self


def solve(mesh: Mesh, materials: MaterialSet | None, excitation: ExcitationState,
          stack_length_m: float = 0.04, **kw) -> FemSolution:
    model = FemModel(mesh, materials, stack_length_m, excitation.turns_per_pole)
    return model.solve(excitation, **kw)


def flux_linkage(sol: FemSolution, phase: str) -> float:
    """Phase flux linkage in Wb-turns (all coil sides of the phase in series)."""
    sol.require_converged()
    m = sol.model
    a_mean = sol.a_z[m.mesh.triangles].mean(axis=1)
    psi = 0.0
    for ph, pol, elems, s in m.coils:
        if ph == phase:
            psi += pol * float(np.dot(m.area[elems], a_mean[elems])) / s
    return m.stack_length * sol.excitation.turns_per_pole * psi


def torque_arkkio(sol: FemSolution) -> float:
    """Electromagnetic torque on the rotor (N m, counter-clockwise positive)."""
    sol.require_converged()
    mesh = sol.mesh
    band = mesh.band
    if band is None:
        raise FemError("torque needs a mesh with a moving band")
    elems = mesh.band_elements()
    if np.any(mesh.materials[elems] != MATERIAL_AIR):
        raise FemError("moving band is not in an air region")
    b = sol.model.element_b(sol.a_z)[elems]
    c = mesh.nodes[mesh.triangles[elems]].mean(axis=1)
    r = np.hypot(c[:, 0], c[:, 1])
    br = (b[:, 0] * c[:, 0] + b[:, 1] * c[:, 1]) / r
    bt = (-b[:, 0] * c[:, 1] + b[:, 1] * c[:, 0]) / r
    integral = float(np.sum(sol.model.area[elems] * r * br * bt))
    return sol.model.stack_length * integral / (MU0 * (band.outer_radius - band.inner_radius))


def coenergy(sol: FemSolution) -> float:
    """Magnetic co-energy of the stack in joules."""
    m = sol.model
    b = m.element_b(sol.a_z)
    return m.stack_length * float(np.dot(m.area, m.coenergy_density(np.einsum("ij,ij->i", b, b))))


def energy(sol: FemSolution) -> float:
    m = sol.model
    b = m.element_b(sol.a_z)
    return m.stack_length * float(np.dot(m.area, m.energy_density(np.einsum("ij,ij->i", b, b))))


def iron_volumes(model: FemModel) -> tuple[np.ndarray, np.ndarray]:
    """Element ids and volumes (m^3) of all iron elements."""
    idx = np.nonzero(model.mesh.materials != MATERIAL_AIR)[0]
    return idx, model.area[idx] * model.stack_length


# ---------------------------------------------------------------------------
# export


def field_table(sol: FemSolution) -> np.ndarray:
    """Per element: centroid x, y (m), |B|, B_r, B_theta (T)."""
    mesh = sol.mesh
    b = sol.element_B
    c = mesh.nodes[mesh.triangles].mean(axis=1)
    r = np.hypot(c[:, 0], c[:, 1])
    r = np.where(r == 0, 1.0, r)
    br = (b[:, 0] * c[:, 0] + b[:, 1] * c[:, 1]) / r
    bt = (-b[:, 0] * c[:, 1] + b[:, 1] * c[:, 0]) / r
    return np.c_[c, np.hypot(b[:, 0], b[:, 1]), br, bt]


def write_field_csv(sol: FemSolution, path) -> None:
    tab = field_table(sol)
    tags = [sol.mesh.region_info[k].tag for k in sol.mesh.regions]
    buf = io.StringIO()
    buf.write("element,x_m,y_m,B_abs_T,B_r_T,B_theta_T,region\n")
    for k, (row, tag) in enumerate(zip(tab.tolist(), tags)):
        buf.write(f"{k},{row[0]:.9e},{row[1]:.9e},{row[2]:.6e},{row[3]:.6e},{row[4]:.6e},{tag}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def field_svg(sol: FemSolution, path, title: str = "", vmax: float | None = 2.2,
              arrows: int = 0) -> None:
    """|B| heat map with region outlines, optionally with B direction arrows."""
    from .plotting import plt, save_svg

    mesh = sol.mesh
    tab = field_table(sol)
    xy = mesh.nodes * 1e3
    fig, ax = plt.subplots(figsize=(6.4, 6.0))
    tpc = ax.tripcolor(xy[:, 0], xy[:, 1], mesh.triangles, facecolors=tab[:, 2],
                       cmap="jet", vmin=0.0, vmax=vmax, shading="flat", rasterized=True)
    fig.colorbar(tpc, ax=ax, label="|B| (T)")
    if arrows:
        b = sol.element_B
        iron = np.nonzero(mesh.materials != MATERIAL_AIR)[0]
        pick = iron[:: max(1, len(iron) // arrows)]
        ax.quiver(tab[pick, 0] * 1e3, tab[pick, 1] * 1e3, b[pick, 0], b[pick, 1],
                  color="k", scale=60, width=0.002)
    ax.set_aspect("equal")
    ax.set_xlabel("x (mm)")
    ax.set_ylabel("y (mm)")
    if title:
        ax.set_title(title)
    save_svg(fig, path)
