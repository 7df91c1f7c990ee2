import numpy as np
import pytest

from softcc.errors import ConfigError, IdentificationError
from softcc.identification import (DEFAULT_GRID, PAPER_AMPLITUDES, PAPER_PARAMS, IdentifiedParams, StepExperiment,
                                   add_measurement_noise, filtered_step, identify, read_params_json, read_step_csv,
                                   synthesize_step_data, write_params_json, write_step_csv)

TRUE2 = IdentifiedParams(0.56, 0.1066, [0.2e-3, 0.24e-3], [0.1, 0.25])


@pytest.fixture(scope="module")
def data2():
    return synthesize_step_data(TRUE2, duration=1.5)


def test_paper_preset():
    assert PAPER_PARAMS.k == 0.56 and PAPER_PARAMS.d == 0.1066
    np.testing.assert_allclose(PAPER_PARAMS.alpha, 1e-3 * np.array([0.16, 0.24, 0.2, 0.25, 0.23]))
    np.testing.assert_array_equal(PAPER_PARAMS.gamma, [0.1, 0.25, 0.1, 0.1, 0.1])
    assert PAPER_AMPLITUDES == (300.0, 600.0, 900.0)
    assert DEFAULT_GRID == (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


def test_zero_amplitude_is_rest():
    ex, = synthesize_step_data(TRUE2, amplitudes=[0.0], duration=0.2)
    assert np.all(ex.q == 0.0)


def test_steady_state_scales_with_amplitude():
    a, b = synthesize_step_data(TRUE2, amplitudes=[100.0, 200.0], duration=4.0)
    np.testing.assert_allclose(b.q[-1], 2 * a.q[-1], rtol=1e-4)
    np.testing.assert_allclose(a.q[-1], TRUE2.alpha * 100.0 / TRUE2.k, rtol=1e-4)  # tau = K q


def test_filtered_step():
    assert filtered_step(-1.0, 0.1) == 0.0
    assert filtered_step(0.6, 0.1) == pytest.approx(1 - 7 * np.exp(-6))
    assert filtered_step(10.0, 0.25) == pytest.approx(1.0)


def test_noiseless_round_trip(data2):
    est = identify(data2)
    assert est.k == pytest.approx(TRUE2.k, rel=1e-6)
    assert est.d == pytest.approx(TRUE2.d, rel=1e-6)
    np.testing.assert_allclose(est.alpha, TRUE2.alpha, rtol=1e-6)
    np.testing.assert_array_equal(est.gamma, TRUE2.gamma)


def test_returned_point_has_minimal_residual(data2):
    for search in ("coordinate", "full"):
        est = identify(data2, search=search)
        assert est.residual == min(est.evaluated.values())
        assert est.evaluated[tuple(est.gamma)] == est.residual
    assert len(identify(data2, search="full").evaluated) == len(DEFAULT_GRID) ** 2


def test_amplitude_scaling_is_linear(data2):
    est = identify(data2)
    scaled = identify([StepExperiment(3.0 * ex.amplitude, ex.t, ex.q) for ex in data2])
    np.testing.assert_allclose(scaled.alpha, est.alpha / 3.0, rtol=1e-9)
    assert scaled.k == pytest.approx(est.k, rel=1e-9)


def test_noisy_reference_arm():
    est = identify(synthesize_step_data(noise=1e-3, seed=7))
    assert est.k == pytest.approx(PAPER_PARAMS.k, rel=0.05)
    assert est.d == pytest.approx(PAPER_PARAMS.d, rel=0.05)
    np.testing.assert_array_equal(est.gamma, PAPER_PARAMS.gamma)


def test_csv_and_json_round_trip(tmp_path, data2):
    ex = data2[1]
    write_step_csv(tmp_path / "s.csv", ex)
    back = read_step_csv(tmp_path / "s.csv")
    assert back.amplitude == ex.amplitude
    np.testing.assert_array_equal(back.q, ex.q)
    np.testing.assert_array_equal(back.t, ex.t)
    write_params_json(tmp_path / "p.json", PAPER_PARAMS)
    p = read_params_json(tmp_path / "p.json")
    np.testing.assert_array_equal(p.alpha, PAPER_PARAMS.alpha)
    assert p.to_dict() == PAPER_PARAMS.to_dict()


def test_csv_errors(tmp_path):
    (tmp_path / "a.csv").write_text("t,q1\n0,0\n0.001,0\n0.002,0\n")
    with pytest.raises(ConfigError):
        read_step_csv(tmp_path / "a.csv")
    assert read_step_csv(tmp_path / "a.csv", 300.0).amplitude == 300.0
    (tmp_path / "b.csv").write_text("x,q1\n0,0\n")
    with pytest.raises(ConfigError):
        read_step_csv(tmp_path / "b.csv", 1.0)


def test_experiment_validation():
    with pytest.raises(ConfigError):
        StepExperiment(1.0, [0.0, 0.1, 0.1], np.zeros(3))
    with pytest.raises(ConfigError):
        StepExperiment(1.0, [0.0, 0.1, 0.3], np.zeros(3))
    with pytest.raises(ConfigError):
        StepExperiment(1.0, [0.0, 0.1, 0.2], [0.0, np.nan, 0.0])


def test_non_physical_and_bad_grid(data2):
    with pytest.raises(IdentificationError):
        IdentifiedParams(-0.5, 0.1, [1e-3], [0.1])
    with pytest.raises(IdentificationError):
        identify(data2, gamma_grid=())
    with pytest.raises(IdentificationError):
        identify([])
    with pytest.raises(IdentificationError):  # a resting arm carries no information
        identify(synthesize_step_data(TRUE2, amplitudes=[0.0], duration=0.5))


def test_noise_layer_matches_synthesis():
    clean = synthesize_step_data(TRUE2, amplitudes=[300.0, 600.0], duration=0.3)
    noisy = synthesize_step_data(TRUE2, amplitudes=[300.0, 600.0], duration=0.3, noise=1e-3, seed=4)
    for a, b in zip(add_measurement_noise(clean, 1e-3, 4), noisy):
        np.testing.assert_array_equal(a.q, b.q)
    assert np.std(noisy[0].q - clean[0].q) == pytest.approx(1e-3, rel=0.1)
    with pytest.raises(ConfigError):
        add_measurement_noise(clean, -1.0)
