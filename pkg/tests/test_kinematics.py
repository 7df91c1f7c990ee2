import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softcc.errors import DomainError
from softcc.kinematics import (SERIES_THRESHOLD, PlanarTransform, SegmentGeometry, chain_poses,
                               one_minus_cos_over_q, segment_transform, sin_over_q, tip_position)

angles = st.floats(-np.pi, np.pi, allow_nan=False)
lengths = st.floats(0.01, 2.0)


def brute_transform(q, L):
    """Homogeneous segment matrix written out directly (no series branch)."""
    if q == 0.0:
        return np.array([[1.0, 0.0, L], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    c, s = np.cos(q), np.sin(q)
    one_minus_c = 2.0 * np.sin(q / 2) ** 2  # 1 - cos q without cancellation at tiny q
    return np.array([[c, -s, L * s / q], [s, c, L * one_minus_c / q], [0.0, 0.0, 1.0]])


@pytest.mark.parametrize("q, L, angle, xy", [
    (0.0, 1.0, 0.0, (1.0, 0.0)),
    (np.pi / 2, 1.0, np.pi / 2, (2 / np.pi, 2 / np.pi)),
    (-np.pi / 2, 1.0, -np.pi / 2, (2 / np.pi, -2 / np.pi)),
])
def test_segment_transform_examples(q, L, angle, xy):
    T = segment_transform(q, L)
    assert T.angle == pytest.approx(angle, abs=1e-15)
    np.testing.assert_allclose(T.position, xy, atol=1e-15)
    np.testing.assert_allclose(T.position, [0.636620, 0.636620 * np.sign(q)] if q else xy, atol=1e-6)


def test_chain_examples():
    poses = chain_poses([0.0, 0.0], [1.0, 1.0])
    np.testing.assert_allclose(poses[1].position, [1, 0])
    np.testing.assert_allclose(poses[2].position, [2, 0])
    poses = chain_poses([np.pi, np.pi], [1.0, 1.0])
    assert poses[1].angle == pytest.approx(np.pi)
    assert poses[2].angle == pytest.approx(2 * np.pi)
    p = chain_poses([np.pi / 2], [1.0])[-1]
    np.testing.assert_allclose(p.position, [2 / np.pi, 2 / np.pi], atol=1e-15)
    assert p.angle == pytest.approx(np.pi / 2)


def test_tip_position_examples():
    np.testing.assert_allclose(tip_position([0, 0, 0], [1, 1, 1]), [3, 0])
    np.testing.assert_allclose(tip_position([np.pi / 2], [1]), [2 / np.pi, 2 / np.pi], atol=1e-15)
    # two half circles: cumulative product of the two homogeneous matrices
    ref = brute_transform(np.pi, 1.0) @ brute_transform(np.pi, 1.0)
    np.testing.assert_allclose(tip_position([np.pi, np.pi], [1, 1]), ref[:2, 2], atol=1e-15)
    np.testing.assert_allclose(ref[:2, 2], [0.0, 0.0], atol=1e-15)


@given(angles, lengths)
def test_segment_matches_closed_form(q, L):
    np.testing.assert_allclose(segment_transform(q, L).matrix(), brute_transform(q, L), atol=1e-12)


def test_series_branch_agrees_at_threshold():
    for q in (SERIES_THRESHOLD * (1 - 1e-12), SERIES_THRESHOLD * (1 + 1e-12)):
        assert sin_over_q(q) == pytest.approx(np.sin(q) / q, rel=1e-15, abs=1e-12)
        assert one_minus_cos_over_q(q) == pytest.approx(2 * np.sin(q / 2) ** 2 / q, rel=1e-12, abs=1e-12)
    assert sin_over_q(0.0) == 1.0
    assert one_minus_cos_over_q(0.0) == 0.0


@given(st.floats(-1e-3, 1e-3))
def test_continuity_at_zero(eps):
    d = segment_transform(eps, 1.0).position - segment_transform(0.0, 1.0).position
    assert np.linalg.norm(d) <= abs(eps)


def test_tip_derivative_continuous_across_zero():
    geom = [1.0, 1.0]

    def dtip(q1, h=1e-7):
        return (tip_position([q1 + h, 0.3], geom) - tip_position([q1 - h, 0.3], geom)) / (2 * h)

    left, mid, right = dtip(-1e-5), dtip(0.0), dtip(1e-5)
    np.testing.assert_allclose(left, mid, atol=1e-4)
    np.testing.assert_allclose(right, mid, atol=1e-4)


@given(st.lists(angles, min_size=2, max_size=6), st.integers(1, 5))
def test_chain_concatenation_is_composition(q, cut):
    cut = min(cut, len(q) - 1)
    L = np.linspace(0.5, 1.0, len(q))
    whole = chain_poses(q, L)[-1]
    first = chain_poses(q[:cut], L[:cut])[-1]
    second = chain_poses(q[cut:], L[cut:])[-1]
    np.testing.assert_allclose((first @ second).matrix(), whole.matrix(), atol=1e-12)


@given(angles, st.tuples(st.floats(-1, 1), st.floats(-1, 1)), angles, st.tuples(st.floats(-1, 1), st.floats(-1, 1)),
       angles, st.tuples(st.floats(-1, 1), st.floats(-1, 1)))
def test_transform_group(a1, t1, a2, t2, a3, t3):
    A, B, C = PlanarTransform(a1, t1), PlanarTransform(a2, t2), PlanarTransform(a3, t3)
    np.testing.assert_allclose(((A @ B) @ C).matrix(), (A @ (B @ C)).matrix(), atol=1e-12)
    np.testing.assert_allclose((A @ PlanarTransform.identity()).matrix(), A.matrix(), atol=1e-15)
    np.testing.assert_allclose((A @ A.inverse()).matrix(), np.eye(3), atol=1e-12)
    np.testing.assert_allclose(PlanarTransform.from_matrix((A @ B).matrix()).matrix(), (A @ B).matrix(), atol=1e-12)


def test_base_pose_is_applied():
    base = PlanarTransform(np.pi / 2, (1.0, 2.0))
    np.testing.assert_allclose(tip_position([0.0], [1.0], base), [1.0, 3.0], atol=1e-15)


@pytest.mark.parametrize("q, L", [(np.nan, 1.0), (0.1, 0.0), (0.1, -1.0), (np.inf, 1.0)])
def test_invalid_inputs(q, L):
    with pytest.raises(DomainError):
        segment_transform(q, L)


def test_shape_mismatch_and_geometry():
    with pytest.raises(DomainError):
        chain_poses([0.1, 0.2], [1.0])
    with pytest.raises(DomainError):
        SegmentGeometry(1.0, 0.0)
