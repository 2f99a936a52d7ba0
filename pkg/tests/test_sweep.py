import json
import math

import numpy as np
import pytest

from skinrelax import sweep as sw
from skinrelax.liouvillian import model_gap
from skinrelax.model import ModelParams, build_model
from skinrelax.relaxation import mode_overlap_metric, model_localization, relaxation_time


def test_power_law_exact():
    x = np.array([2.0, 5.0, 11.0, 30.0])
    fit = sw.fit_power_law_xy(x, 3 * x ** 1.7)
    assert fit.slope == pytest.approx(1.7, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_power_law_errors():
    with pytest.raises(ValueError):
        sw.fit_power_law_xy([1, 2], [1, 2])
    with pytest.raises(ValueError):
        sw.fit_power_law_xy([1, 2, 3], [1, 0, 2])


@pytest.mark.parametrize("kwargs", [
    {"sizes": (10, 5)},
    {"sizes": (5, 5)},
    {"sizes": (1, 5)},
    {"sizes": (5, 10), "ratios": (1.2,)},
    {"sizes": (5, 10), "ratios": (0.0,)},
    {"sizes": (5, 10), "gradients": ("time",)},
    {"sizes": (5, 10), "observables": ("entropy",)},
])
def test_config_invariants(kwargs):
    with pytest.raises(ValueError):
        sw.SweepConfig(**kwargs)


def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="unknown"):
        sw.SweepConfig.from_dict({"sizes": [5, 10], "colour": "red"})


def test_single_point_equals_direct_calls():
    cfg = sw.SweepConfig(sizes=(30,), ratios=(0.8,), gradients=("hops",), hop_left_base=2.0)
    (rec,) = sw.run_sweep(cfg)
    m = build_model(ModelParams.from_ratio(30, 0.8, hop_left_base=2.0, hop_gradient=True))
    assert rec.gap == model_gap(m)
    assert rec.tau == relaxation_time(m).tau
    assert rec.xi == model_localization(m).xi
    assert rec.overlap == mode_overlap_metric(m)
    assert rec.flags == "hops"


def test_plain_ratio_kind():
    a = sw.run_point(sw.SweepConfig(sizes=(8,), ratios=(0.64,), ratio_kind="plain",
                                    observables=("gap",)), 8, 0.64)
    b = sw.run_point(sw.SweepConfig(sizes=(8,), ratios=(0.8,), observables=("gap",)), 8, 0.8)
    assert a.gap == pytest.approx(b.gap, rel=1e-14)


def test_failures_are_labelled():
    # reciprocal chain has a flat profile (xi = inf) and the literal reading times out
    cfg = sw.SweepConfig(sizes=(5, 6, 7), ratios=(0.8,), reading="literal",
                         observables=("gap", "tau"))
    recs = sw.run_sweep(cfg)
    assert all(r.errors == {"tau": "RelaxationTimeout"} for r in recs)
    assert all(np.isfinite(r.gap) for r in recs)
    with pytest.raises(ValueError):
        sw.fit_power_law(recs, y="tau")
    assert sw.fit_power_law(recs, y="gap").n_points == 3


def test_deterministic_and_parallel_equal(tmp_path):
    cfg = sw.SweepConfig(sizes=(10, 14, 20, 28), ratios=(1.0, 0.8),
                         gradients=("hops", "energies"), energy_base=5.0)
    serial = sw.run_sweep(cfg)
    parallel = sw.run_sweep(cfg, workers=3)
    a = sw.write_outputs(cfg, serial, tmp_path / "a")
    b = sw.write_outputs(cfg, parallel, tmp_path / "b")
    assert a[0].read_bytes() == b[0].read_bytes()
    assert a[1].read_bytes() == b[1].read_bytes()
    again = sw.write_outputs(cfg, sw.run_sweep(cfg), tmp_path / "c")
    assert again[0].read_bytes() == a[0].read_bytes()
    assert [r.key for r in serial] == sorted(r.key for r in serial)


def test_csv_roundtrip_and_summary(tmp_path):
    cfg = sw.SweepConfig(sizes=(6, 9, 12), ratios=(1.0,), observables=("gap", "tau", "xi"))
    recs = sw.run_sweep(cfg)
    csv_path, json_path = sw.write_outputs(cfg, recs, tmp_path)
    assert cfg.config_hash() in csv_path.name
    back = sw.read_records_csv(csv_path)
    for r, s in zip(recs, back):
        assert (r.N, r.ratio, r.gap, r.tau) == (s.N, s.ratio, s.gap, s.tau)
        assert s.xi == math.inf
    summary = json.loads(json_path.read_text())
    assert summary["schema_version"] == sw.SCHEMA_VERSION
    assert summary["config_hash"] == cfg.config_hash()
    assert summary["fits"]["gap@1.0"]["slope"] == pytest.approx(-2, abs=0.3)
    assert "error" in summary["fits"]["xi@1.0"]


def test_hash_ignores_output_dir():
    a = sw.SweepConfig(sizes=(5, 6), output_dir="x")
    b = sw.SweepConfig(sizes=(5, 6), output_dir="y")
    c = sw.SweepConfig(sizes=(5, 7))
    assert a.config_hash() == b.config_hash() != c.config_hash()


def test_linear_fit():
    slope, intercept, r2 = sw.linear_fit([1, 2, 3], [3, 5, 7])
    assert (slope, intercept, r2) == pytest.approx((2, 1, 1))
