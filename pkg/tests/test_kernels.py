import os
import subprocess
import sys

import numpy as np
import pytest

from tpsrm import _kernels
from tpsrm import fem as F
from tpsrm import mesh as M


def test_backend_is_named():
    assert _kernels.BACKEND in _kernels.backends()


def test_pure_python_can_be_forced():
    env = dict(os.environ, TPSRM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import tpsrm._kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_element_terms_agree(geom_8_14, rng):
    impls = _kernels.backends()
    if "cython" not in impls:
        pytest.skip("compiled backend not built")
    mesh = M.generate_for(geom_8_14, "coarse")
    model = F.FemModel.for_geometry(mesh, geom_8_14)
    a = rng.normal(scale=1e-3, size=mesh.n_nodes)
    b = model.element_b(a)
    nu, dnu = model.reluctivity(np.einsum("ij,ij->i", b, b))
    args = (model.grad, model.area, np.ascontiguousarray(a[mesh.triangles]), nu, dnu)
    jac_p, res_p = impls["python"].newton_element_terms(*args)
    jac_c, res_c = impls["cython"].newton_element_terms(*args)
    scale = np.abs(jac_p).max()
    assert np.allclose(jac_c, jac_p, rtol=0, atol=1e-13 * scale)
    assert np.allclose(res_c, res_p, rtol=0, atol=1e-13 * np.abs(res_p).max())


def test_element_jacobian_is_symmetric(geom_8_14, rng):
    mesh = M.generate_for(geom_8_14, "coarse")
    model = F.FemModel.for_geometry(mesh, geom_8_14)
    a = rng.normal(scale=1e-3, size=mesh.n_nodes)
    b = model.element_b(a)
    nu, dnu = model.reluctivity(np.einsum("ij,ij->i", b, b))
    jac, _ = _kernels.newton_element_terms(model.grad, model.area,
                                           np.ascontiguousarray(a[mesh.triangles]), nu, dnu)
    jac = np.asarray(jac).reshape(len(nu), 3, 3)
    assert np.allclose(jac, np.transpose(jac, (0, 2, 1)), rtol=0, atol=1e-12 * np.abs(jac).max())
