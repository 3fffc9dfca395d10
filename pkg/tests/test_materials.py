import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpsrm.materials import MU0, NU0, BHCurve, LossModel, require_full_period


@pytest.fixture(scope="module")
def steel():
    return BHCurve.m19()


def _scalar_nu(curve, s):
    """Direct cubic Hermite evaluation of one interval, written independently."""
    k = np.searchsorted(curve.knots, s, side="right") - 1
    x0, x1 = curve.knots[k], curve.knots[k + 1]
    y0, y1 = curve.values[k], curve.values[k + 1]
    m0, m1 = curve.slopes[k], curve.slopes[k + 1]
    h = x1 - x0
    t = (s - x0) / h
    h00 = 2 * t ** 3 - 3 * t ** 2 + 1
    h10 = t ** 3 - 2 * t ** 2 + t
    h01 = -2 * t ** 3 + 3 * t ** 2
    h11 = t ** 3 - t ** 2
    return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1


def test_origin_and_saturation_limits(steel):
    nu0, _ = steel.reluctivity(np.array([0.0]))
    assert nu0[0] == pytest.approx(steel.h[1] / steel.b[1])
    b = np.array([4.0, 8.0, 16.0])
    h = steel.h_of_b(b)
    slope = np.diff(h) / np.diff(b)
    assert slope[-1] == pytest.approx(NU0, rel=2e-3)


def test_interval_midpoints_match_scalar_oracle(steel):
    mids = 0.5 * (steel.knots[1:] + steel.knots[:-1])
    nu, _ = steel.reluctivity(mids)
    oracle = np.array([_scalar_nu(steel, s) for s in mids])
    assert np.allclose(nu, oracle, rtol=1e-12, atol=0)


def test_derivative_matches_finite_difference(steel):
    s = 0.5 * (steel.knots[1:-1] + steel.knots[2:])
    eps = 1e-7 * np.maximum(s, 1e-3)
    nu_p, _ = steel.reluctivity(s + eps)
    nu_m, _ = steel.reluctivity(s - eps)
    nu, dnu = steel.reluctivity(s)
    assert np.all(np.abs(dnu - (nu_p - nu_m) / (2 * eps)) <= 1e-6 * np.abs(nu))


def test_energy_density_is_integral_of_h(steel):
    from scipy.integrate import quad

    for b in (0.3, 1.2, 1.9, 2.4):
        ref, _ = quad(lambda x: float(steel.h_of_b(np.array([x]))[0]), 0.0, b, limit=200)
        assert steel.energy_density(np.array([b * b]))[0] == pytest.approx(ref, rel=1e-7)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=1e-3, max_value=3.0), st.floats(min_value=1e-3, max_value=3.0))
def test_h_of_b_is_monotone(b1, b2):
    curve = BHCurve.m19()
    lo, hi = sorted((b1, b2))
    h = curve.h_of_b(np.array([lo, hi]))
    assert h[1] >= h[0]


def test_coenergy_convex_in_flux(steel):
    b = np.linspace(0.01, 2.5, 400)
    w = steel.energy_density(b * b)
    assert np.all(np.diff(w, 2) > 0)


def test_bad_tables_rejected(tmp_path, steel):
    with pytest.raises(ValueError):
        BHCurve([0, 10, 5], [0, 1, 2])
    with pytest.raises(ValueError):
        BHCurve([1, 10, 20], [0, 1, 2])
    p = tmp_path / "bh.txt"
    rows = [f"{h}, {b}  # row {k}" if k % 2 else f"{h} {b}"
            for k, (h, b) in enumerate(zip(steel.h.tolist(), steel.b.tolist()))]
    p.write_text("# H B\n" + "\n\n".join(rows) + "\n")
    c = BHCurve.from_file(p)
    assert c.name == "bh" and np.array_equal(c.b, steel.b) and np.array_equal(c.h, steel.h)


def test_linear_limit():
    lin = BHCurve.linear(1000.0)
    nu, dnu = lin.reluctivity(np.array([0.0, 4.0]))
    assert np.allclose(nu, 1 / (1000.0 * MU0)) and np.all(dnu == 0)


def test_core_loss_hand_value():
    loss = LossModel(steinmetz_kh=136.0, steinmetz_beta=1.9, eddy_ke=0.94)
    # 1 T peak at 140 Hz in 1 cm^3 of steel
    expected = 1e-6 * (136.0 * 140.0 * 1.0 + 0.94 * 140.0 ** 2 * 1.0)
    assert loss.core_loss([1.0], 140.0, [1e-6]) == pytest.approx(expected, rel=1e-14)
    assert loss.core_loss(np.zeros(5), 140.0, np.ones(5)) == 0.0


def test_copper_loss_values():
    loss = LossModel(copper_resistance_per_phase_ohm=0.406)
    assert loss.copper_loss(0.0) == 0.0
    assert loss.copper_loss(9.36) == pytest.approx(71.1, abs=0.05)
    assert loss.copper_loss(9.98) == pytest.approx(80.9, abs=0.05)
    # resistance recovered from the published copper losses
    assert 71.19 / (2 * 9.36 ** 2) == pytest.approx(0.406, abs=5e-4)
    assert 50.80 / (2 * 9.98 ** 2) == pytest.approx(0.255, abs=5e-4)


def test_partial_period_refused():
    loss = LossModel()
    b = np.ones((5, 3))
    with pytest.raises(ValueError):
        loss.core_loss_from_snapshots(b, np.linspace(0, 180, 5), 140.0, np.ones(3))
    full = np.arange(5) * 72.0
    assert loss.core_loss_from_snapshots(b, full, 140.0, np.ones(3)) > 0
    require_full_period(full)


def test_negative_coefficients_rejected():
    with pytest.raises(ValueError):
        LossModel(eddy_ke=-1.0)
