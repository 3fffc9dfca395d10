import numpy as np
import pytest

from tpsrm import drive as D
from tpsrm import maps as MP
from tpsrm.config import MachineConfig
from tpsrm.geometry import MotorGeometry

VARIANTS = ("proposed_8_14", "conventional_8_12")
MAP_CURRENTS = MP.DEFAULT_CURRENTS + (MP.HEADROOM_CURRENT,)

_CRITERIA: list = []


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key, ok, detail in sorted(_CRITERIA, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def criterion():
    def record(key: str, ok: bool, detail: str = "") -> bool:
        _CRITERIA.append((key, bool(ok), detail))
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
        return bool(ok)

    return record


@pytest.fixture(scope="session")
def geom_8_14():
    return MotorGeometry.proposed_8_14()


@pytest.fixture(scope="session")
def geom_8_12():
    return MotorGeometry.conventional_8_12()


@pytest.fixture(scope="session")
def coarse_maps(geom_8_14):
    return MP.build_maps(geom_8_14, "coarse", MAP_CURRENTS, n_angles=16)


@pytest.fixture(scope="session")
def reference_maps():
    """Default-resolution maps of both machines, built once per session."""
    return {v: MP.build_maps(MotorGeometry.for_variant(v), "reference", MAP_CURRENTS,
                             MP.DEFAULT_ANGLES)
            for v in VARIANTS}


@pytest.fixture(scope="session")
def dynamic_runs(reference_maps):
    """Drive simulation plus snapshot core loss for both machines."""
    out = {}
    for v in VARIANTS:
        cfg = MachineConfig.default(v)
        trace = D.simulate(reference_maps[v], cfg.loss, cfg.drive, geom=cfg.geometry)
        cl = D.core_loss(cfg.geometry, trace, cfg.loss, "reference")
        out[v] = dict(trace=trace, core=cl,
                      metrics=D.metrics(trace, cfg.loss, cl["core_loss_w"]), cfg=cfg)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
