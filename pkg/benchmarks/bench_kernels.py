"""Time the compiled kernels against the pure Python reference.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends are run on the same inputs; the script also reports the
largest difference between their outputs.
"""

import argparse
import time

import numpy as np

from tpsrm import _kernels
from tpsrm import fem as F
from tpsrm import mesh as M
from tpsrm.geometry import MotorGeometry
from tpsrm.maps import CharMaps


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def newton_inputs():
    geom = MotorGeometry.proposed_8_14()
    mesh = M.generate_for(geom, "reference")
    model = F.FemModel.for_geometry(mesh, geom)
    sol = model.solve(F.ExcitationState.single("A", 15.0))
    b = model.element_b(sol.a_z)
    nu, dnu = model.reluctivity(np.einsum("ij,ij->i", b, b))
    a_loc = np.ascontiguousarray(sol.a_z[mesh.triangles])
    return (model.grad, model.area, a_loc, nu, dnu), mesh.n_triangles


def synthetic_maps():
    # smooth saturating flux map so the benchmark needs no field solves
    cur = np.array([0.0, 3, 6, 9, 12, 15, 16.5])
    ang = np.linspace(0.0, 180.0, 31)
    lu, la, isat = 0.008, 0.06, 6.0
    l_th = lu + (la - lu) * 0.5 * (1 - np.cos(np.radians(ang)))
    psi = np.array([l_th * isat * np.tanh(i / isat) + lu * 0.2 * i for i in cur])
    dpsi = np.gradient(psi, np.radians(ang), axis=1)
    torque = np.array([np.trapezoid(dpsi[: k + 1], cur[: k + 1], axis=0) for k in range(len(cur))])
    return CharMaps(cur, ang, psi, torque * 14)


def drive_args(maps, periods=1):
    n_r, rpm, dt = 14, 600.0, 1e-6
    period = 60.0 / (rpm * n_r)
    return (maps.currents, maps.angle_step, maps.psi, maps.torque, 0.406, 150.0, 14.8, 15.2,
            0.0, 180.0, 0.0, 360.0 * rpm * n_r / 60.0, dt, int(round(periods * period / dt)),
            np.array([0.0, -180.0]), maps.i_max)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = _kernels.backends()
    if "cython" not in impls:
        print("compiled backend not available; only the Python reference will be timed")
    nargs, n_tri = newton_inputs()
    dargs = drive_args(synthetic_maps())
    results = {}
    print(f"{'kernel':<28}{'backend':<10}{'time (ms)':>12}")
    for name, mod in impls.items():
        t_n, out_n = best_of(lambda: mod.newton_element_terms(*nargs), args.repeat)
        t_d, out_d = best_of(lambda: mod.chc_simulate(*dargs), args.repeat)
        results[name] = (t_n, out_n, t_d, out_d)
        print(f"{f'element terms ({n_tri} tri)':<28}{name:<10}{t_n * 1e3:12.2f}")
        print(f"{f'drive ({dargs[13]} steps)':<28}{name:<10}{t_d * 1e3:12.2f}")
    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        d_jac = max(float(np.abs(a - b).max()) for a, b in zip(py[1], cy[1]))
        d_drv = max(float(np.abs(np.asarray(a, float) - np.asarray(b, float)).max())
                    for a, b in zip(py[3], cy[3]))
        print(f"speed-up: element terms {py[0] / cy[0]:.1f}x, drive {py[2] / cy[2]:.1f}x")
        print(f"max |difference|: element terms {d_jac:.3e}, drive {d_drv:.3e}")


if __name__ == "__main__":
    main()
