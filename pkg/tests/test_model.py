import numpy as np
import pytest

from skinrelax.model import ModelParams, build_model, model_from_arrays


def test_gradient_arrays_n3():
    m = build_model(ModelParams(n_sites=3, hop_left_base=2.0, hop_right_base=1.0,
                                hop_gradient=True))
    np.testing.assert_array_equal(m.hop_left, [2.0, 4.0])
    np.testing.assert_array_equal(m.hop_right, [1.0, 2.0])
    # Gamma_0 = J_{1,R}, Gamma_1 = J_{1,L} + J_{2,R}, Gamma_2 = J_{2,L}
    np.testing.assert_array_equal(m.out_rate, [1.0, 4.0, 4.0])


def test_homogeneous_arrays():
    m = build_model(ModelParams(n_sites=4, energy_base=0.5, hop_left_base=1.5,
                                hop_right_base=0.5))
    np.testing.assert_array_equal(m.energies, [0.5] * 4)
    np.testing.assert_array_equal(m.hop_left, [1.5] * 3)
    np.testing.assert_array_equal(m.out_rate, [0.5, 2.0, 2.0, 1.5])


def test_energy_gradient():
    m = build_model(ModelParams(n_sites=4, energy_base=2.0, energy_gradient=True))
    np.testing.assert_array_equal(m.energies, [0.0, 2.0, 4.0, 6.0])


def test_single_site_has_no_jumps():
    m = build_model(ModelParams(n_sites=1))
    assert m.hop_left.shape == (0,)
    assert list(m.jumps()) == []
    np.testing.assert_array_equal(m.out_rate, [0.0])


def test_jumps_skip_zero_rates():
    m = build_model(ModelParams(n_sites=3, hop_left_base=1.0, hop_right_base=0.0))
    assert list(m.jumps()) == [(0, 1, 1.0), (1, 2, 1.0)]
    assert not m.is_reversible()


def test_from_ratio():
    p = ModelParams.from_ratio(10, 0.8, hop_left_base=2.0, hop_gradient=True)
    assert p.hop_right_base == pytest.approx(0.64 * 2.0)
    assert p.hop_gradient


@pytest.mark.parametrize("kwargs", [
    {"n_sites": 0},
    {"n_sites": 2.5},
    {"n_sites": True},
    {"n_sites": 3, "hop_left_base": -1.0},
    {"n_sites": 3, "hop_right_base": -0.1},
    {"n_sites": 3, "energy_base": float("nan")},
])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def test_arrays_validation():
    with pytest.raises(ValueError):
        model_from_arrays([0, 0, 0], [1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        model_from_arrays([0, 0], [-1.0], [1.0])
    m = model_from_arrays([0, 0], [1.0], [1.0])
    with pytest.raises(ValueError):
        m.hop_left[0] = 3.0


def test_build_model_type_check():
    with pytest.raises(TypeError):
        build_model({"n_sites": 3})
