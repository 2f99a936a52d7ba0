import math

import numpy as np
import pytest
import scipy.linalg as sla

from skinrelax import relaxation as rx
from skinrelax.errors import RelaxationTimeout
from skinrelax.liouvillian import build_population_generator
from skinrelax.model import ModelParams, build_model, model_from_arrays


@pytest.mark.parametrize("a, b", [(1.0, 1.0), (2.0, 0.5), (3.0, 0.01)])
def test_two_site_closed_form(a, b):
    # p_1(t) - p_s = (1 - p_s) exp(-(a+b) t) with p_s = b / (a+b)
    m = model_from_arrays([0.0, 0.0], [a], [b])
    res = rx.relaxation_time(m)
    expected = (1.0 + math.log(a / b)) / (a + b)
    assert res.tau == pytest.approx(expected, rel=1e-10)
    assert res.delta_used == pytest.approx(min(a + b, (a + b) / 2))
    assert res.peak_undershoot == 0.0
    assert res.n_crossings == 1


@pytest.mark.parametrize("gradient", [False, True])
@pytest.mark.parametrize("ratio", [0.8, 1.0])
def test_eigen_matches_integrator(gradient, ratio):
    m = build_model(ModelParams.from_ratio(20, ratio, hop_gradient=gradient))
    a = rx.relaxation_time(m)
    b = rx.relaxation_time_integrated(m)
    assert a.tau == pytest.approx(b.tau, rel=1e-8)
    assert b.route == "integrate"


def test_long_chain_boundary_population_underflows():
    m = build_model(ModelParams.from_ratio(1000, 0.8, hop_gradient=True))
    res = rx.relaxation_time(m)
    assert np.isfinite(res.tau) and res.tau > 0
    assert 5 < res.tau_delta < 50


def test_reciprocal_homogeneous_is_diffusive():
    taus = [rx.relaxation_time(build_model(ModelParams(n_sites=N, hop_left_base=1.0,
                                                       hop_right_base=1.0))).tau
            for N in (40, 80)]
    assert math.log(taus[1] / taus[0]) / math.log(2) == pytest.approx(2.0, abs=0.1)


def test_literal_reading_needs_undershoot():
    # a reversible chain approaches p_s from above, so p_s - p never reaches p_s/e
    m = build_model(ModelParams.from_ratio(6, 0.8))
    with pytest.raises(RelaxationTimeout):
        rx.relaxation_time(m, reading="literal", t_max_factor=50)


def test_zero_boundary_steady_state_times_out():
    m = build_model(ModelParams(n_sites=4, hop_left_base=1.0, hop_right_base=0.0))
    with pytest.raises(RelaxationTimeout):
        rx.relaxation_time(m)


def test_bad_policy():
    m = build_model(ModelParams.from_ratio(4, 0.8))
    with pytest.raises(ValueError):
        rx.relaxation_time(m, policy="middle")
    with pytest.raises(ValueError):
        rx.relaxation_time(m, reading="sideways")


def test_first_and_last_agree_when_monotone():
    m = build_model(ModelParams.from_ratio(30, 0.9, hop_gradient=True))
    assert rx.relaxation_time(m, policy="first").tau == rx.relaxation_time(m).tau


@pytest.mark.parametrize("ratio_sqrt", [0.6, 0.8, 0.9])
def test_localization_matches_analytic(ratio_sqrt):
    m = build_model(ModelParams.from_ratio(100, ratio_sqrt))
    fit = rx.model_localization(m)
    assert fit.xi == pytest.approx(1.0 / math.log(1.0 / ratio_sqrt ** 2), rel=1e-8)
    assert fit.analytic_xi == pytest.approx(fit.xi, rel=1e-8)
    assert fit.localized and fit.exponential
    assert fit.r_squared == pytest.approx(1.0)


def test_flat_profile_not_localized():
    fit = rx.localization_length(np.full(10, 0.1), hop_ratio=1.0)
    assert fit.xi == math.inf and not fit.localized
    assert fit.analytic_xi == math.inf


def test_non_exponential_profile_warns():
    p = np.array([0.3, 0.05, 0.3, 0.05, 0.3])
    with pytest.warns(UserWarning):
        fit = rx.localization_length(p / p.sum(), window=(0, 4))
    assert not fit.exponential


def test_window_validation():
    with pytest.raises(ValueError):
        rx.localization_length(np.full(5, 0.2), window=(3, 2))


def test_overlap_metric_against_dense():
    m = build_model(ModelParams.from_ratio(12, 0.8))
    w, vl, vr = sla.eig(build_population_generator(m), left=True, right=True)
    k = np.argsort(-w.real)[1]
    r = vr[:, k].real / np.abs(vr[:, k].real).sum()
    l = vl[:, k].real / np.abs(vl[:, k].real).sum()
    assert rx.mode_overlap_metric(m) == pytest.approx(-math.log(abs(l @ r)), rel=1e-8)


def test_overlap_metric_grows_with_size():
    vals = [rx.mode_overlap_metric(build_model(ModelParams.from_ratio(N, 0.8)))
            for N in (20, 40, 80)]
    assert vals[0] < vals[1] < vals[2]


def test_slowest_mode_coherence_case():
    m = model_from_arrays([0.0, 1.0], [1.0], [0.01])
    lam, sector, index = rx.slowest_mode(m)
    assert sector == "coherence"
    assert lam.real == pytest.approx(-0.505)
    assert rx.mode_overlap_metric(m) == 0.0


def test_result_serialization():
    res = rx.relaxation_time(build_model(ModelParams.from_ratio(5, 0.8)))
    d = res.to_dict()
    assert set(d) >= {"tau", "crossing_policy", "delta_used", "peak_undershoot", "n_crossings"}
    assert d["tau"] == res.tau
