import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from softcc.config import build_scenarios, preset
from softcc.dynamics import SoftRobotModel
from softcc.errors import ConfigError, SingularTaskError
from softcc.simulation import run_scenario
from softcc.task_priority import (OMAV_GAINS, HierarchyController, TaskSpec, base_cycle, base_orientation_task,
                                  dyn_consistent_pinv, hierarchical_control, nullspace_projector, omav_task_set,
                                  orientation_offset, tip_orientation_task, tip_position_task)

seeds = st.integers(0, 2 ** 32 - 1)


def random_spd(rng, n):
    A = rng.normal(size=(n, n))
    return A @ A.T + n * np.eye(n)


@pytest.mark.parametrize("phi, phi_d, expected", [
    (0.3, 0.3, 0.0), (0.0, np.pi / 6, np.pi / 6), (3 * np.pi / 4, -3 * np.pi / 4, np.pi / 2),
    (-3 * np.pi / 4, 3 * np.pi / 4, -np.pi / 2),
])
def test_orientation_offset_examples(phi, phi_d, expected):
    assert orientation_offset(phi, phi_d) == pytest.approx(expected, abs=1e-15)


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_orientation_offset_range(phi, phi_d):
    d = orientation_offset(phi, phi_d)
    assert -np.pi < d <= np.pi
    assert np.cos(phi + d - phi_d) == pytest.approx(1.0, abs=1e-9)


def test_pinv_unweighted_and_square():
    rng = np.random.default_rng(0)
    J = rng.normal(size=(2, 5))
    np.testing.assert_allclose(dyn_consistent_pinv(J, np.eye(5)), J.T @ np.linalg.inv(J @ J.T), atol=1e-12)
    S = rng.normal(size=(4, 4)) + 4 * np.eye(4)
    np.testing.assert_allclose(dyn_consistent_pinv(S, random_spd(rng, 4)), np.linalg.inv(S), atol=1e-10)
    np.testing.assert_allclose(nullspace_projector(S, random_spd(rng, 4)), 0.0, atol=1e-10)


@given(seeds, st.integers(1, 4))
def test_projector_identities(seed, rows):
    rng = np.random.default_rng(seed)
    n = 6
    J, B = rng.normal(size=(rows, n)), random_spd(rng, n)
    np.testing.assert_allclose(J @ dyn_consistent_pinv(J, B), np.eye(rows), atol=1e-10)
    N = nullspace_projector(J, B)
    assert np.abs(J @ np.linalg.solve(B, N)).max() <= 1e-10
    np.testing.assert_allclose(N @ N, N, atol=1e-10)


@given(seeds)
def test_stacking_order_does_not_change_projector(seed):
    rng = np.random.default_rng(seed)
    J, B = rng.normal(size=(3, 6)), random_spd(rng, 6)
    np.testing.assert_allclose(nullspace_projector(J, B), nullspace_projector(J[[2, 0, 1]], B), atol=1e-10)


def test_rank_deficient_task_raises():
    J = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
    with pytest.raises(SingularTaskError):
        nullspace_projector(J, np.eye(3))


@pytest.fixture(scope="module")
def omav(floating2):
    model = SoftRobotModel(floating2)
    q = np.array([0.02, -0.01, 0.1, 0.2, 0.15])
    x, phi = model.tip_pose(q)
    return model, q, x, phi


def test_single_task_is_plain_pd(omav):
    model, q, x, _ = omav
    qd = np.array([0.1, 0.0, -0.2, 0.3, 0.1])
    dyn = model.evaluate(q, qd)
    x_d = x + np.array([0.01, -0.02])
    out = hierarchical_control(dyn, [tip_position_task(model, x_d, K=13.8, D=12.5, rank=1)], q, qd)
    expected = dyn.G + dyn.J.T @ (13.8 * (x_d - x) - 12.5 * dyn.J @ qd)
    np.testing.assert_allclose(out.tau, expected, atol=1e-12)


def test_zero_offsets_give_gravity_compensation(omav):
    model, q, x, phi = omav
    dyn = model.evaluate(q, np.zeros(5))
    out = hierarchical_control(dyn, omav_task_set(model, phi, x, q[2]), q, np.zeros(5))
    np.testing.assert_allclose(out.tau, dyn.G, atol=1e-12)


def test_gain_scaling_is_linear(omav):
    model, q, x, phi = omav
    qd = np.array([0.1, 0.0, -0.2, 0.3, 0.1])
    dyn = model.evaluate(q, qd)

    def task_torque(scale):
        tasks = [tip_orientation_task(model, phi + 0.1, 1.5 * scale, 0.025 * scale, rank=1),
                 tip_position_task(model, x + 0.01, 13.8 * scale, 12.5 * scale, rank=2),
                 base_orientation_task(model, 0.2, 5.0 * scale, 4.0 * scale, rank=3)]
        return hierarchical_control(dyn, tasks, q, qd).tau - dyn.G

    np.testing.assert_allclose(task_torque(2.5), 2.5 * task_torque(1.0), atol=1e-12)


def test_lower_tasks_are_annihilated(omav):
    model, q, x, phi = omav
    dyn = model.evaluate(q, np.zeros(5))
    out = hierarchical_control(dyn, omav_task_set(model, phi + 0.2, x + 0.01, 0.3), q, np.zeros(5))
    J_hp = np.vstack([np.array([[0, 0, 1, 1, 1.0]]), dyn.J])
    assert np.abs(J_hp @ np.linalg.solve(dyn.B, out.projectors[2])).max() <= 1e-8
    np.testing.assert_array_equal(out.projectors[0], np.eye(5))
    assert out.annihilation <= 1e-8


def test_task_validation(omav, arm5):
    model = omav[0]
    with pytest.raises(ConfigError):
        hierarchical_control(model.evaluate(omav[1], np.zeros(5)),
                             [tip_position_task(model, omav[2], rank=1), tip_position_task(model, omav[2], rank=1)],
                             omav[1], np.zeros(5))
    with pytest.raises(ConfigError):
        base_orientation_task(SoftRobotModel(arm5), 0.0)


def test_task_spec_accepts_matrices():
    t = TaskSpec("x", 1, lambda q, d: np.eye(2), lambda q, t, d: np.zeros(2), [1.0, 2.0], np.eye(2))
    np.testing.assert_array_equal(t.K, np.diag([1.0, 2.0]))


def test_presets():
    assert OMAV_GAINS["static"]["tip_position"] == (13.8, 12.5)
    cyc = base_cycle()
    assert cyc(2.0) == pytest.approx(np.deg2rad(15.0))
    assert cyc(6.0) == pytest.approx(-np.deg2rad(15.0))
    assert cyc(8.0) == pytest.approx(0.0, abs=1e-15)


def test_hierarchy_run_keeps_projection_exact():
    cfg = preset("hierarchy-demo")
    cfg = cfg.model_copy(update={"simulation": cfg.simulation.model_copy(update={"duration_s": 3.0}),
                                 "disturbances": []})
    (_, sc), = build_scenarios(cfg)
    ts = run_scenario(sc)
    assert isinstance(sc.controller, HierarchyController)
    assert ts.extras["annihilation"].max() <= 1e-8
    assert set(ts.extras) >= {"err_tip_orientation", "err_tip_position", "err_base_orientation"}
