import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import fd_jacobian
from softcc import augmented as aug
from softcc.errors import DomainError
from softcc.kinematics import chain_poses
from softcc.robot import FixedBase, RobotDescription, Segment, paper_arm

q5 = arrays(float, 5, elements=st.floats(-np.pi, np.pi))
L = 0.063


@pytest.mark.parametrize("q, length, expected", [
    (0.0, 1.0, [0.0, 0.5, 0.5, 0.0]),
    (np.pi, 1.0, [np.pi / 2, 1 / np.pi, 1 / np.pi, np.pi / 2]),
    (np.pi, 0.063, [np.pi / 2, 0.063 / np.pi, 0.063 / np.pi, np.pi / 2]),
])
def test_segment_map_examples(q, length, expected):
    np.testing.assert_allclose(aug.segment_map(q, length), expected, atol=1e-15)


def test_segment_map_decimals():
    assert aug.segment_map(np.pi, 1.0)[1] == pytest.approx(0.318310, abs=1e-6)
    assert aug.segment_map(np.pi, 0.063)[1] == pytest.approx(0.020054, abs=1e-6)


def test_map_m_examples(floating2):
    robot = paper_arm(2)
    np.testing.assert_allclose(aug.map_m(robot, [0, 0]), [0, L / 2, L / 2, 0] * 2)
    np.testing.assert_allclose(aug.map_m(paper_arm(1), [np.pi]), [np.pi / 2, L / np.pi, L / np.pi, np.pi / 2])
    pose = [0.3, -0.2, 0.1]
    xi = aug.map_m(floating2, pose + [0.4, -0.5])
    np.testing.assert_array_equal(xi[:3], pose)
    assert xi.shape == (3 + 8,)


def test_jacobian_m_examples():
    unit = RobotDescription((Segment(1.0, 0.034, 0.56, 0.1),))
    np.testing.assert_allclose(aug.jacobian_m(unit, [0.0])[:, 0], [0.5, 0, 0, 0.5], atol=1e-15)
    col = aug.jacobian_m(unit, [np.pi])[:, 0]
    assert col[1] == col[2] == pytest.approx(-1 / np.pi ** 2, abs=1e-15)
    assert col[1] == pytest.approx(-0.101321, abs=1e-6)
    assert aug.jacobian_m(paper_arm(2), [0.1, 0.2]).shape == (8, 2)


@given(q5)
def test_jacobian_m_matches_finite_difference(q):
    robot = paper_arm(5)
    Jm = aug.jacobian_m(robot, q)
    np.testing.assert_allclose(Jm, fd_jacobian(lambda x: aug.map_m(robot, x), q), atol=1e-6)


@given(q5, q5)
def test_jacobian_m_dot(q, qd):
    robot = paper_arm(5)
    h = 1e-6
    fd = (aug.jacobian_m(robot, q + h * qd) - aug.jacobian_m(robot, q - h * qd)) / (2 * h)
    Jmd = aug.jacobian_m_dot(robot, q, qd)
    np.testing.assert_allclose(Jmd, fd, atol=1e-5)
    revolute = np.r_[0:20:4, 3:20:4]
    assert np.all(Jmd[revolute] == 0.0)
    assert np.all(aug.jacobian_m_dot(robot, q, np.zeros(5)) == 0.0)


def test_half_sinc_series_and_closed_form_agree():
    for q in (0.05 * (1 - 1e-9), 0.05 * (1 + 1e-9)):
        h = 1e-5
        fd1 = (aug.half_sinc(q + h) - aug.half_sinc(q - h)) / (2 * h)
        assert aug.half_sinc_d1(q) == pytest.approx(fd1, abs=1e-10)
        fd2 = (aug.half_sinc_d1(q + h) - aug.half_sinc_d1(q - h)) / (2 * h)
        assert aug.half_sinc_d2(q) == pytest.approx(fd2, abs=1e-8)
    assert aug.half_sinc(0.0) == 0.5


def test_dh_rows_structure():
    rows = aug.dh_rows(np.pi / 3, L)
    assert [r[4] for r in rows] == [0.0, 1.0, 0.0, 0.0]  # mass on link 2 only
    assert rows[0][0] == rows[3][0] == pytest.approx(np.pi / 6)
    assert rows[1][1] == rows[2][1]


@given(q5)
def test_augmented_chain_reproduces_pcc_frames(q):
    robot = paper_arm(5, base=FixedBase((0.1, -0.2, 0.7)))
    chain = aug.build_chain(robot)
    xi = aug.map_m(robot, q)
    poses = chain_poses(q, robot.geometry, robot.base_transform())
    dh = aug.dh_frames(robot, xi)
    for i in range(robot.n + 1):
        np.testing.assert_allclose(aug.point_position(chain, xi, f"end:{i}"), poses[i].position, atol=1e-12)
        d = aug.point_angle(chain, xi, f"end:{i}") - poses[i].angle
        assert abs(np.angle(np.exp(1j * d))) < 1e-12
        if i:
            np.testing.assert_allclose(dh[4 * i - 1][:2, 3], poses[i].position, atol=1e-12)


@given(q5)
def test_mass_at_chord_midpoint(q):
    robot = paper_arm(5)
    chain = aug.build_chain(robot)
    xi = aug.map_m(robot, q)
    poses = chain_poses(q, robot.geometry)
    for i in range(5):
        mid = 0.5 * (poses[i].position + poses[i + 1].position)
        np.testing.assert_allclose(aug.point_position(chain, xi, f"mass:{i}"), mid, atol=1e-12)


def test_floating_chain_reproduces_frames(floating2):
    chain = aug.build_chain(floating2)
    q = np.array([0.2, -0.1, 0.4, 0.3, -0.6])
    xi = aug.map_m(floating2, q)
    poses = chain_poses(q[3:], floating2.geometry, floating2.base_transform(q[:3]))
    np.testing.assert_allclose(aug.point_position(chain, xi, "tip"), poses[-1].position, atol=1e-14)
    np.testing.assert_allclose(aug.point_position(chain, xi, "base"), q[:2], atol=1e-15)


def test_kinetic_energy_matches_point_masses():
    robot = paper_arm(3)
    chain = aug.build_chain(robot)
    rng = np.random.default_rng(0)
    for _ in range(20):
        q, qd = rng.uniform(-2, 2, 3), rng.normal(size=3)
        xi, xid = aug.map_m(robot, q), aug.jacobian_m(robot, q) @ qd
        B, _, _ = aug.augmented_dynamics(chain, xi, xid)
        T = 0.5 * xid @ B @ xid
        h = 1e-6
        T_ref = 0.0
        for i in range(3):
            def mid(x, i=i):
                p = chain_poses(x, robot.geometry)
                return 0.5 * (p[i].position + p[i + 1].position)
            v = (mid(q + h * qd) - mid(q - h * qd)) / (2 * h)
            T_ref += 0.5 * robot.masses[i] * v @ v
        assert T == pytest.approx(T_ref, rel=1e-7)


def test_gravity_single_segment():
    robot = paper_arm(1, gravity=(0.0, -9.81), base=FixedBase((0.0, 0.0, np.pi / 2)))
    chain = aug.build_chain(robot)
    xi = aug.map_m(robot, [0.0])
    assert aug.augmented_potential(chain, xi) == pytest.approx(0.034 * 9.81 * L / 2, rel=1e-14)
    G = aug.augmented_gravity(chain, xi)
    np.testing.assert_allclose(G, fd_jacobian(lambda x: np.array([aug.augmented_potential(chain, x)]), xi)[0],
                               atol=1e-9)
    flat = paper_arm(1)
    assert np.all(aug.augmented_dynamics(aug.build_chain(flat), aug.map_m(flat, [0.0]), np.zeros(4))[2] == 0)


@given(arrays(float, 12, elements=st.floats(-1.5, 1.5)), arrays(float, 12, elements=st.floats(-2, 2)))
def test_augmented_passivity(xi, xid):
    chain = aug.build_chain(paper_arm(3))
    xi = xi + np.tile([0, L / 2, L / 2, 0], 3)
    B, C, _ = aug.augmented_dynamics(chain, xi, xid)
    h = 1e-6
    Bd = (aug.augmented_inertia(chain, xi + h * xid) - aug.augmented_inertia(chain, xi - h * xid)) / (2 * h)
    assert abs(xid @ (Bd - 2 * C) @ xid) <= 1e-6


def test_augmented_inertia_is_only_semidefinite():
    robot = paper_arm(2)
    B = aug.augmented_inertia(aug.build_chain(robot), aug.map_m(robot, [0.3, -0.2]))
    w = np.linalg.eigvalsh(B)
    assert w.min() > -1e-15
    assert np.sum(w > 1e-12) < B.shape[0]  # massless links leave directions without inertia


def test_task_jacobian_examples(floating2):
    robot = paper_arm(3)
    chain = aug.build_chain(robot)
    xi = aug.map_m(robot, np.zeros(3))
    J = aug.augmented_task_jacobian(chain, xi, "tip")
    np.testing.assert_allclose(J, fd_jacobian(lambda x: aug.point_position(chain, x, "tip"), xi), atol=1e-8)
    np.testing.assert_array_equal(J @ np.zeros(12), np.zeros(2))
    fchain = aug.build_chain(floating2)
    fxi = aug.map_m(floating2, [0.1, 0.2, 0.3, 0.4, -0.2])
    Jf = aug.augmented_task_jacobian(fchain, fxi, "tip")
    np.testing.assert_allclose(Jf[:, :2], np.eye(2), atol=1e-15)
    J3 = aug.augmented_task_jacobian(chain, xi, "tip", rows=3)
    np.testing.assert_array_equal(J3[2], [1, 0, 0, 1] * 3)


def test_point_jacobian_dot():
    robot = paper_arm(3)
    chain = aug.build_chain(robot)
    rng = np.random.default_rng(4)
    xi = aug.map_m(robot, rng.uniform(-1, 1, 3))
    xid = rng.normal(size=12)
    st_ = aug.chain_state(chain, xi, xid)
    _, J, Jd = aug.point_jacobians(chain, st_, chain.mass_elements, with_dot=True)
    h = 1e-6
    Jp = aug.point_jacobians(chain, aug.chain_state(chain, xi + h * xid), chain.mass_elements)[1]
    Jm = aug.point_jacobians(chain, aug.chain_state(chain, xi - h * xid), chain.mass_elements)[1]
    np.testing.assert_allclose(Jd, (Jp - Jm) / (2 * h), atol=1e-7)


def test_bad_inputs(floating2):
    robot = paper_arm(2)
    chain = aug.build_chain(robot)
    with pytest.raises(DomainError):
        aug.map_m(robot, [0.1])
    with pytest.raises(DomainError):
        aug.map_m(robot, [0.1, np.nan])
    with pytest.raises(DomainError):
        aug.point_position(chain, aug.map_m(robot, [0, 0]), "base")
    with pytest.raises(DomainError):
        aug.point_position(chain, aug.map_m(robot, [0, 0]), "mass:7")
    with pytest.raises(DomainError):
        aug.segment_map(0.1, -1.0)
