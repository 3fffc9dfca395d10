"""Static flux-linkage and torque maps over one stroke.

Angles are electrical degrees of the excited phase: 0 is unaligned and 180
aligned.  The rotor mechanical angle (0 = phase A aligned) is
``(theta_elec - 180) / N_r``.  Beyond the stroke the maps are continued by
mirror symmetry about the aligned position: ``psi(i, 360 - t) = psi(i, t)``
and ``T(i, 360 - t) = -T(i, t)``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem as F
from . import mesh as M
from .geometry import MotorGeometry

DEFAULT_CURRENTS = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0)
HEADROOM_CURRENT = 16.5   # extra row so the drive stays inside the map above 15.2 A
DEFAULT_ANGLES = 31


class MapError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CharMaps:
    currents: np.ndarray      # A, ascending, starts at 0
    angles: np.ndarray        # electrical degrees, uniform 0..180
    psi: np.ndarray           # Wb-turn, (n_currents, n_angles)
    torque: np.ndarray        # N m
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        c, a = np.asarray(self.currents, float), np.asarray(self.angles, float)
        if c[0] != 0.0 or np.any(np.diff(c) <= 0):
            raise MapError("current grid must start at 0 A and increase strictly")
        if a[0] != 0.0 or a[-1] != 180.0 or not np.allclose(np.diff(a), a[1] - a[0], atol=1e-9):
            raise MapError("angle grid must cover 0..180 electrical degrees uniformly")
        if self.psi.shape != (len(c), len(a)) or self.torque.shape != self.psi.shape:
            raise MapError("map tables do not match the grids")

    @property
    def angle_step(self) -> float:
        return float(self.angles[1] - self.angles[0])

    @property
    def i_max(self) -> float:
        return float(self.currents[-1])

    def row(self, current: float) -> int:
        hit = np.nonzero(np.isclose(self.currents, current, rtol=0, atol=1e-9))[0]
        if not len(hit):
            raise MapError(f"current {current} A is not on the map grid {self.currents.tolist()}")
        return int(hit[0])

    def mean_torque(self, current: float) -> float:
        """Stroke average of the static torque (trapezoid rule over 0..180 elec)."""
        t = self.torque[self.row(current)]
        return float(np.trapezoid(t, self.angles) / 180.0)

    def peak_torque(self, current: float) -> float:
        return float(self.torque[self.row(current)].max())

    def mean_torque_interp(self, current: float) -> float:
        rows = np.array([np.trapezoid(t, self.angles) / 180.0 for t in self.torque])
        return float(np.interp(current, self.currents, rows))

    def interpolate(self, i: float, theta_elec: float) -> dict:
        """Bilinear ``psi``, ``torque`` and the partial derivatives of the patch.

        ``dpsi_dtheta`` is per electrical degree.  At an interior grid line the
        derivative across it is the central difference of the neighbouring
        grid values.
        """
        if not (0.0 <= i <= self.i_max) or not math.isfinite(theta_elec):
            raise MapError(f"query (i={i}, theta={theta_elec}) is outside the map hull")
        t = theta_elec % 360.0
        sgn = 1.0
        if t > 180.0:
            t, sgn = 360.0 - t, -1.0
        c, a = self.currents, self.angles
        r = int(np.clip(np.searchsorted(c, i, side="right") - 1, 0, len(c) - 2))
        k = int(np.clip(math.floor(t / self.angle_step), 0, len(a) - 2))
        u = (i - c[r]) / (c[r + 1] - c[r])
        w = (t - a[k]) / self.angle_step

        def patch(tab):
            t0 = (1 - w) * tab[r, k] + w * tab[r, k + 1]
            t1 = (1 - w) * tab[r + 1, k] + w * tab[r + 1, k + 1]
            return (1 - u) * t0 + u * t1

        psi = patch(self.psi)
        on_i = np.isclose(c, i, rtol=0, atol=1e-12)
        ri = int(np.argmax(on_i)) if on_i.any() else -1
        if 0 < ri < len(c) - 1:
            q = (1 - w) * self.psi[:, k] + w * self.psi[:, k + 1]
            dpsi_di = (q[ri + 1] - q[ri - 1]) / (c[ri + 1] - c[ri - 1])
        else:
            p0 = (1 - w) * self.psi[r, k] + w * self.psi[r, k + 1]
            p1 = (1 - w) * self.psi[r + 1, k] + w * self.psi[r + 1, k + 1]
            dpsi_di = (p1 - p0) / (c[r + 1] - c[r])
        on_t = np.isclose(a, t, rtol=0, atol=1e-9)
        kt = int(np.argmax(on_t)) if on_t.any() else -1
        col = (1 - u) * self.psi[r] + u * self.psi[r + 1]
        if 0 < kt < len(a) - 1:
            dpsi_dt = (col[kt + 1] - col[kt - 1]) / (2 * self.angle_step)
        else:
            dpsi_dt = (col[k + 1] - col[k]) / self.angle_step
        return dict(psi=float(psi), dpsi_di=float(dpsi_di), dpsi_dtheta=float(sgn * dpsi_dt),
                    torque=float(sgn * patch(self.torque)))

    # -- property checks ---------------------------------------------------
    def loop_consistency(self, current: float | None = None) -> tuple[float, float]:
        """Co-energy change over the stroke from the flux map and from the torque map.

        Returns ``(from_psi, from_torque)`` in joules: the first integrates
        ``psi(i, aligned) - psi(i, unaligned)`` over current (monotone cubic
        in i), the second integrates torque over mechanical angle.
        """
        from scipy.interpolate import PchipInterpolator

        row = self.row(self.i_max if current is None else current)
        c = self.currents[: row + 1]
        dpsi = self.psi[: row + 1, -1] - self.psi[: row + 1, 0]
        from_psi = float(PchipInterpolator(c, dpsi).integrate(0.0, c[-1]))
        n_r = int(self.metadata.get("n_rotor_teeth", 14))
        theta_mech = np.radians(self.angles / n_r)
        from_torque = float(np.trapezoid(self.torque[row], theta_mech))
        return from_psi, from_torque

    # -- persistence -------------------------------------------------------
    def to_csv(self, path) -> None:
        path = Path(path)
        lines = ["current_A,theta_elec_deg,psi_Wb,torque_Nm"]
        for r, i in enumerate(self.currents.tolist()):
            for k, t in enumerate(self.angles.tolist()):
                lines.append(f"{i!r},{t!r},{float(self.psi[r, k])!r},{float(self.torque[r, k])!r}")
        path.write_text("\n".join(lines) + "\n")
        meta_path(path).write_text(json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path, geom: MotorGeometry | None = None) -> "CharMaps":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        currents = np.unique(data[:, 0])
        angles = np.unique(data[:, 1])
        shape = (len(currents), len(angles))
        order = np.lexsort((data[:, 1], data[:, 0]))
        psi = data[order, 2].reshape(shape)
        torque = data[order, 3].reshape(shape)
        meta = json.loads(meta_path(path).read_text()) if meta_path(path).exists() else {}
        maps = cls(currents, angles, psi, torque, meta)
        if geom is not None:
            check_hash(maps, geom)
        return maps


def meta_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def check_hash(maps: CharMaps, geom: MotorGeometry) -> None:
    want = geom.config_hash()
    got = maps.metadata.get("geometry_hash")
    if got != want:
        raise MapError(f"maps were built for geometry {got!r}, not {want!r}")


def torque_density(mean_torque_nm: float, motor_volume_l: float) -> float:
    if motor_volume_l <= 0:
        raise ValueError("motor volume must be positive")
    return float(mean_torque_nm) / float(motor_volume_l)


def stroke_angles(n_angles: int) -> np.ndarray:
    return np.linspace(0.0, 180.0, n_angles)


def mech_angle_for(theta_elec: float, n_rotor_teeth: int) -> float:
    """Rotor mechanical angle (0 = phase A aligned) putting phase A at ``theta_elec``."""
    return (theta_elec - 180.0) / n_rotor_teeth


def _sweep_angle(args):
    geom, base, steps, currents, phase, materials = args
    mesh = M.rotate_band(base, steps)
    model = F.FemModel.for_geometry(mesh, geom, materials)
    psi, tq, iters = [], [], []
    a_prev, i_prev = None, 0.0
    for i in currents:
        a0 = None if a_prev is None or i_prev == 0 else a_prev * (i / i_prev)
        sol = model.solve(F.ExcitationState.single(phase, i, geom.turns_per_pole), a0=a0)
        if not sol.converged:
            raise MapError(f"no convergence at i={i} A, band step {steps} "
                           f"(residual {sol.residual_norm:.2e})")
        psi.append(F.flux_linkage(sol, phase))
        tq.append(F.torque_arkkio(sol))
        iters.append(sol.newton_iterations)
        if i > 0:
            a_prev, i_prev = sol.a_z, i
    return psi, tq, iters


def build_maps(geom: MotorGeometry, resolution="reference", currents=DEFAULT_CURRENTS,
               n_angles: int = DEFAULT_ANGLES, materials: F.MaterialSet | None = None,
               phase: str = "A", workers: int = 1, log=None) -> CharMaps:
    """Single-phase static sweep: one nonlinear solve per (current, angle)."""
    res = M.resolution(resolution)
    if res.band_divisions is None and res.angles_per_stroke != n_angles:
        from dataclasses import replace
        res = replace(res, angles_per_stroke=n_angles)
    currents = np.array(sorted({0.0, *map(float, currents)}))
    base = M.generate_for(geom, res)
    n_r = geom.layout.n_rotor_teeth
    pitch = base.band.pitch_deg
    angles = stroke_angles(n_angles)
    steps = [int(round(mech_angle_for(t, n_r) / pitch)) for t in angles]
    snapped = np.array([s * pitch * n_r + 180.0 for s in steps])
    if not np.allclose(snapped, angles, atol=1e-9):
        raise MapError(f"the {n_angles}-point stroke grid does not land on the band grid "
                       f"({base.band.divisions} divisions)")
    jobs = [(geom, base, s, currents, phase, materials) for s in steps]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_sweep_angle, jobs))
    else:
        results = []
        for k, job in enumerate(jobs):
            results.append(_sweep_angle(job))
            if log:
                log(f"angle {k + 1}/{len(jobs)}: {angles[k]:.1f} deg elec")
    psi = np.array([r[0] for r in results]).T
    tq = np.array([r[1] for r in results]).T
    iters = np.array([r[2] for r in results]).T
    meta = dict(geometry_hash=geom.config_hash(), variant=geom.variant, n_rotor_teeth=n_r,
                band_divisions=base.band.divisions, n_nodes=base.n_nodes,
                n_triangles=base.n_triangles, phase=phase,
                solves=int(np.count_nonzero(currents) * len(angles)),
                max_newton_iterations=int(iters.max()),
                resolution=resolution if isinstance(resolution, str) else "custom")
    return CharMaps(currents, angles, psi, tq, meta)


def profile_svg(maps_by_name: dict, path, currents=None, title: str = "") -> None:
    """Static torque profiles (one panel per machine)."""
    from .plotting import plt, save_svg

    names = list(maps_by_name)
    fig, axes = plt.subplots(1, len(names), figsize=(5.5 * len(names), 4.0), squeeze=False)
    for ax, name in zip(axes[0], names):
        mp = maps_by_name[name]
        for i in (currents or mp.currents[1:]):
            ax.plot(mp.angles, mp.torque[mp.row(i)], label=f"{i:g} A")
        ax.set_xlabel("rotor position (elec deg)")
        ax.set_ylabel("torque (N m)")
        ax.set_title(name)
        ax.grid(True, lw=0.3)
        ax.legend(fontsize=7)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    save_svg(fig, path)


def mean_peak_svg(maps_by_name: dict, path, currents=(3, 6, 9, 12, 15)) -> None:
    """Mean and peak torque against current."""
    from .plotting import plt, save_svg

    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for name, mp in maps_by_name.items():
        axes[0].plot(currents, [mp.mean_torque(i) for i in currents], "o-", label=name)
        axes[1].plot(currents, [mp.peak_torque(i) for i in currents], "s-", label=name)
    for ax, lab in zip(axes, ("mean torque (N m)", "peak torque (N m)")):
        ax.set_xlabel("current (A)")
        ax.set_ylabel(lab)
        ax.grid(True, lw=0.3)
        ax.legend()
    fig.tight_layout()
    save_svg(fig, path)
