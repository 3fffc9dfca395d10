import json
import math

import pytest

from tpsrm import report as R
from tpsrm.config import MachineConfig


def test_percent_increase_examples():
    assert R.percent_increase(7.388, 3.993) == pytest.approx(85.02, abs=0.005)
    assert R.percent_increase(5.86, 3.76) == pytest.approx(55.85, abs=0.005)
    assert R.percent_increase(1.0, 1.0) == 0.0


def test_formula_reproduces_published_increase_columns():
    # the published columns are truncated, not rounded, to two decimals
    for i, (mean_inc, peak_inc) in R.PUBLISHED_STATIC_INCREASE.items():
        m14, m12, p14, p12 = R.PUBLISHED_STATIC[i]
        assert math.floor(100 * R.percent_increase(m14, m12)) / 100 == mean_inc
        assert math.floor(100 * R.percent_increase(p14, p12)) / 100 == peak_inc


def test_published_increases_are_all_positive():
    for m14, m12, p14, p12 in R.PUBLISHED_STATIC.values():
        assert m14 > m12 and p14 > p12


def test_equal_volume(geom_8_14, geom_8_12):
    assert geom_8_14.motor_volume_l() * 1e3 == pytest.approx(129.96, abs=0.005)
    assert geom_8_12.motor_volume_l() == geom_8_14.motor_volume_l()
    R.check_equal_volume(geom_8_14, geom_8_12)
    longer = geom_8_12.__class__.for_variant("conventional_8_12", stack_length_mm=45.0)
    with pytest.raises(R.StageError, match="stack_length_mm"):
        R.check_equal_volume(geom_8_14, longer)
    R.check_equal_volume(geom_8_14, longer, allow_mismatch=True)


def test_iron_weight_near_published(geom_8_14, geom_8_12):
    assert R.iron_weight_kg(geom_8_14) == pytest.approx(1.905, rel=0.03)
    assert R.iron_weight_kg(geom_8_12) == pytest.approx(1.820, rel=0.03)
    assert R.iron_weight_kg(geom_8_14) > R.iron_weight_kg(geom_8_12)


def test_compare_refuses_swapped_configs():
    a = MachineConfig.default("proposed_8_14")
    b = MachineConfig.default("conventional_8_12")
    with pytest.raises(R.StageError) as err:
        R.compare(b, a)
    assert err.value.stage == "config"


def _fake_report():
    def rows(scale):
        return [R.StaticRow(0.0, 0.0, 0.0, 0.0)] + [
            R.StaticRow(i, scale * i, 1.4 * scale * i, scale * i / 0.12996) for i in R.TABLE_CURRENTS]

    dyn = {k: 2.0 for k in R.DYNAMIC_ROWS}
    dyn_b = {k: 1.0 for k in R.DYNAMIC_ROWS}
    dyn["energy_balance_error"] = 0.01
    res = {R.PROPOSED: R.VariantResult(R.PROPOSED, "h1", rows(0.5), dyn),
           R.CONVENTIONAL: R.VariantResult(R.CONVENTIONAL, "h2", rows(0.25), dyn_b)}
    return R.ComparisonReport(res, {"note": "synthetic"})


def test_report_rows_use_the_formula(tmp_path):
    rep = _fake_report()
    static = rep.static_rows()
    assert [r["current_a"] for r in static] == list(R.TABLE_CURRENTS)
    for r in static:
        assert r["mean_increase_pct"] == pytest.approx(100.0)
        assert r["published_mean_increase_pct"] == R.percent_increase(r["published_mean_8_14"],
                                                                  r["published_mean_8_12"])
    dyn = {r["quantity"]: r for r in rep.dynamic_rows()}
    assert set(dyn) == set(R.DYNAMIC_ROWS)
    assert dyn["mean_torque_nm"]["published_increase_pct"] == pytest.approx(55.85, abs=0.005)
    written = rep.write(tmp_path)
    names = {p.name for p in written}
    assert {"static_torque.csv", "dynamic_performance.csv", "summary.json"} <= names
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["extra"][R.PROPOSED] == {"energy_balance_error": 0.01}
    header = (tmp_path / "static_torque.csv").read_text().splitlines()[0]
    assert "published_mean_8_14" in header and "mean_increase_pct" in header
