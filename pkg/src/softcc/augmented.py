"""Augmented rigid-robot equivalent of a planar PCC arm.

Each constant-curvature segment is matched by a rigid RPPR element
(revolute q/2, two prismatic joints of length L sin(q/2)/q, revolute q/2)
carrying a point mass at the middle of the chord. The map xi = m(q) and its
Jacobian connect the two configuration spaces.

Kinematics are evaluated with a planar recursion over the augmented joints;
:func:`dh_frames` rebuilds the same chain from standard DH rows and is kept
as an independent route for cross-checking.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .robot import FloatingBase, RobotDescription

JOINTS_PER_SEGMENT = 4

# Below this |q| the derivatives of sin(q/2)/q are evaluated from their series.
# The closed forms lose ~eps/q^3 to cancellation, so the switch is placed well
# above the kinematic threshold; the truncated series error there is < 1e-20.
_DERIV_SERIES_THRESHOLD = 0.05

# sin(q/2)/q = sum_k c_k q^(2k)
_HS_COEFFS = np.array([
    1.0 / 2.0,
    -1.0 / 48.0,
    1.0 / 3840.0,
    -1.0 / 645120.0,
    1.0 / 185794560.0,
    -1.0 / 81749606400.0,
])

# element kinds of the planar recursion
REVOLUTE, PRISMATIC, SLIDE_X, SLIDE_Y, FIXED = range(5)


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError(f"non-finite input: {v!r}")


def half_sinc(q: np.ndarray | float) -> np.ndarray:
    """sin(q/2)/q, elementwise, with the limit 1/2 at q = 0."""
    q = np.asarray(q, dtype=float)
    # np.sinc(x) = sin(pi x)/(pi x) is evaluated without 0/0
    return 0.5 * np.sinc(q / (2.0 * np.pi))


def half_sinc_d1(q: np.ndarray | float) -> np.ndarray:
    """d/dq [sin(q/2)/q] = (q cos(q/2) - 2 sin(q/2)) / (2 q^2)."""
    q = np.asarray(q, dtype=float)
    small = np.abs(q) < _DERIV_SERIES_THRESHOLD
    qs = np.where(small, 1.0, q)
    exact = (qs * np.cos(qs / 2) - 2 * np.sin(qs / 2)) / (2 * qs * qs)
    k = np.arange(1, len(_HS_COEFFS))
    series = np.sum(_HS_COEFFS[1:] * 2 * k * q[..., None] ** (2 * k - 1), axis=-1)
    return np.where(small, series, exact)


def half_sinc_d2(q: np.ndarray | float) -> np.ndarray:
    """Second derivative of sin(q/2)/q."""
    q = np.asarray(q, dtype=float)
    small = np.abs(q) < _DERIV_SERIES_THRESHOLD
    qs = np.where(small, 1.0, q)
    s, c = np.sin(qs / 2), np.cos(qs / 2)
    exact = (-(qs * qs / 2) * s - 2 * qs * c + 4 * s) / (2 * qs ** 3)
    k = np.arange(1, len(_HS_COEFFS))
    series = np.sum(_HS_COEFFS[1:] * 2 * k * (2 * k - 1) * q[..., None] ** (2 * k - 2), axis=-1)
    return np.where(small, series, exact)


def segment_map(q: float, length: float) -> np.ndarray:
    """[q/2, L sin(q/2)/q, L sin(q/2)/q, q/2]."""
    _check_finite(q, length)
    if length <= 0:
        raise DomainError(f"segment length must be > 0, got {length}")
    d = length * float(half_sinc(q))
    return np.array([q / 2.0, d, d, q / 2.0])


# --------------------------------------------------------------------------
# maps between curvature space and augmented space


def _split(robot: RobotDescription, q) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != robot.dof:
        raise DomainError(f"expected {robot.dof} coordinates, got {q.shape[0]}")
    _check_finite(q)
    if robot.floating:
        return q[:3], q[3:]
    return q[:0], q


def map_m(robot: RobotDescription, q) -> np.ndarray:
    """Augmented configuration xi = m(q); base coordinates pass through unchanged."""
    base, qa = _split(robot, q)
    d = robot.lengths * half_sinc(qa)
    seg = np.stack([qa / 2, d, d, qa / 2], axis=1).reshape(-1)
    return np.concatenate([base, seg])


def jacobian_m(robot: RobotDescription, q) -> np.ndarray:
    """dm/dq, block diagonal: identity on the base block, [1/2, Lc, Lc, 1/2] per segment."""
    base, qa = _split(robot, q)
    nb, n = base.shape[0], qa.shape[0]
    Jm = np.zeros((nb + JOINTS_PER_SEGMENT * n, nb + n))
    Jm[:nb, :nb] = np.eye(nb)
    lc = robot.lengths * half_sinc_d1(qa)
    rows = nb + JOINTS_PER_SEGMENT * np.arange(n)
    cols = nb + np.arange(n)
    Jm[rows, cols] = 0.5
    Jm[rows + 1, cols] = lc
    Jm[rows + 2, cols] = lc
    Jm[rows + 3, cols] = 0.5
    return Jm


def jacobian_m_dot(robot: RobotDescription, q, qd) -> np.ndarray:
    """Time derivative of :func:`jacobian_m` along qd."""
    base, qa = _split(robot, q)
    _, qda = _split(robot, qd)
    nb, n = base.shape[0], qa.shape[0]
    Jmd = np.zeros((nb + JOINTS_PER_SEGMENT * n, nb + n))
    lcd = robot.lengths * half_sinc_d2(qa) * qda
    rows = nb + JOINTS_PER_SEGMENT * np.arange(n)
    cols = nb + np.arange(n)
    Jmd[rows + 1, cols] = lcd
    Jmd[rows + 2, cols] = lcd
    return Jmd


# --------------------------------------------------------------------------
# DH description of the RPPR element


def dh_rows(q: float, length: float) -> list[tuple[float, float, float, float, float]]:
    """(theta, d, a, alpha, mass_flag) for the four links of one segment.

    ``mass_flag`` is 1 for the link that carries the segment mass.
    """
    xi = segment_map(q, length)
    return [
        (xi[0], 0.0, 0.0, np.pi / 2, 0.0),
        (0.0, xi[1], 0.0, 0.0, 1.0),
        (0.0, xi[2], 0.0, -np.pi / 2, 0.0),
        (xi[3], 0.0, 0.0, 0.0, 0.0),
    ]


def dh_matrix(theta: float, d: float, a: float, alpha: float) -> np.ndarray:
    """Standard DH link transform Rz(theta) Tz(d) Tx(a) Rx(alpha)."""
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array([
        [ct, -st * ca, st * sa, a * ct],
        [st, ct * ca, -ct * sa, a * st],
        [0.0, sa, ca, d],
        [0.0, 0.0, 0.0, 1.0],
    ])


def _planar_to_h(angle: float, x: float, y: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0, x], [s, c, 0, y], [0, 0, 1, 0], [0, 0, 0, 1.0]])


# DH frames of the RPPR element have the backbone along -y; this rotation
# takes DH coordinates to the planar segment frame used by the PCC transforms.
_DH_ALIGN = _planar_to_h(np.pi / 2, 0.0, 0.0)
_DH_ALIGN_INV = _planar_to_h(-np.pi / 2, 0.0, 0.0)


def dh_frames(robot: RobotDescription, xi) -> list[np.ndarray]:
    """World 4x4 frames after every augmented arm joint, built from DH rows.

    Frame 4i+1 holds the mass of segment i, frame 4i+3 is {S_i+1}.
    The rows use the augmented coordinates directly (theta = xi_4i, d = xi_4i+1, ...).
    """
    xi = np.asarray(xi, dtype=float)
    nb = 3 if robot.floating else 0
    base = robot.base_transform(xi[:3] if robot.floating else None)
    W = _planar_to_h(base.angle, *base.translation) @ _DH_ALIGN
    arm = xi[nb:].reshape(-1, JOINTS_PER_SEGMENT)
    frames = []
    F = np.eye(4)
    for t1, d1, d2, t2 in arm:
        for row in ((t1, 0.0, 0.0, np.pi / 2), (0.0, d1, 0.0, 0.0), (0.0, d2, 0.0, -np.pi / 2), (t2, 0.0, 0.0, 0.0)):
            F = F @ dh_matrix(*row)
            frames.append(W @ F @ _DH_ALIGN_INV)
    return frames


# --------------------------------------------------------------------------
# augmented chain


@dataclass(frozen=True)
class AugmentedChain:
    """Immutable description of the augmented rigid chain of a robot.

    Elements are traversed from the world to the tip. Each element is a joint
    (revolute, prismatic along the current heading, or a world-axis slide for
    the floating base) or a fixed mounting transform.
    """

    robot: RobotDescription
    kinds: np.ndarray
    dofs: np.ndarray
    fixed: np.ndarray  # (n_elements, 3): local offset x, y and angle of FIXED elements
    mass_elements: np.ndarray
    mass_values: np.ndarray
    end_elements: np.ndarray  # element index after which {S_i} sits, i = 0..n (-1: world origin pose)
    base_element: int  # element after which the floating base CoM sits (-1 if fixed)

    @property
    def n_xi(self) -> int:
        return int((self.dofs >= 0).sum())

    @property
    def n_segments(self) -> int:
        return self.robot.n


def build_chain(robot: RobotDescription) -> AugmentedChain:
    kinds, dofs, fixed = [], [], []
    dof = 0
    if isinstance(robot.base, FloatingBase):
        for k in (SLIDE_X, SLIDE_Y, REVOLUTE):
            kinds.append(k)
            dofs.append(dof)
            fixed.append((0.0, 0.0, 0.0))
            dof += 1
        kinds.append(FIXED)
        dofs.append(-1)
        fixed.append(tuple(robot.base.mount))
        base_element = 1
        root = 3
    else:
        base_element = -1
        root = -1
    mass_elements, end_elements = [], [root]
    for _ in range(robot.n):
        start = len(kinds)
        for k in (REVOLUTE, PRISMATIC, PRISMATIC, REVOLUTE):
            kinds.append(k)
            dofs.append(dof)
            fixed.append((0.0, 0.0, 0.0))
            dof += 1
        mass_elements.append(start + 1)
        end_elements.append(start + 3)
    return AugmentedChain(
        robot=robot,
        kinds=np.array(kinds),
        dofs=np.array(dofs),
        fixed=np.array(fixed, dtype=float),
        mass_elements=np.array(mass_elements),
        mass_values=robot.masses,
        end_elements=np.array(end_elements),
        base_element=base_element,
    )


def _perp(v: np.ndarray) -> np.ndarray:
    """Rotate planar vectors (last axis of size 2) by +90 degrees."""
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


@dataclass
class ChainState:
    """Per-element heading/position (and rates) of the augmented chain at one state."""

    phi_before: np.ndarray
    phi_after: np.ndarray
    pos_before: np.ndarray
    pos_after: np.ndarray
    axis: np.ndarray  # unit direction of prismatic/slide elements
    phid_before: np.ndarray | None = None
    vel_before: np.ndarray | None = None
    vel_after: np.ndarray | None = None


def chain_state(chain: AugmentedChain, xi, xid=None) -> ChainState:
    xi = np.asarray(xi, dtype=float)
    kinds, dofs = chain.kinds, chain.dofs
    if xi.shape[0] != chain.n_xi:
        raise DomainError(f"expected {chain.n_xi} augmented coordinates, got {xi.shape[0]}")
    val = np.where(dofs >= 0, xi[np.maximum(dofs, 0)], 0.0)
    if chain.robot.floating:
        phi0, r0 = 0.0, np.zeros(2)
    else:
        x, y, th = chain.robot.base.pose
        phi0, r0 = th, np.array([x, y])

    is_rev = kinds == REVOLUTE
    is_fix = kinds == FIXED
    dphi = np.where(is_rev, val, 0.0) + np.where(is_fix, chain.fixed[:, 2], 0.0)
    phi_after = phi0 + np.cumsum(dphi)
    phi_before = phi_after - dphi

    axis = np.stack([np.cos(phi_before), np.sin(phi_before)], axis=1)
    axis[kinds == SLIDE_X] = (1.0, 0.0)
    axis[kinds == SLIDE_Y] = (0.0, 1.0)
    c, s = np.cos(phi_before), np.sin(phi_before)
    fx, fy = chain.fixed[:, 0], chain.fixed[:, 1]
    fixed_disp = np.stack([c * fx - s * fy, s * fx + c * fy], axis=1)

    slides = (kinds == PRISMATIC) | (kinds == SLIDE_X) | (kinds == SLIDE_Y)
    disp = np.where(slides[:, None], val[:, None] * axis, 0.0) + np.where(is_fix[:, None], fixed_disp, 0.0)
    pos_after = r0 + np.cumsum(disp, axis=0)
    pos_before = pos_after - disp
    st = ChainState(phi_before, phi_after, pos_before, pos_after, axis)
    if xid is None:
        return st

    xid = np.asarray(xid, dtype=float)
    vald = np.where(dofs >= 0, xid[np.maximum(dofs, 0)], 0.0)
    dphid = np.where(is_rev, vald, 0.0)
    phid_after = np.cumsum(dphid)
    phid_before = phid_after - dphid
    pri = kinds == PRISMATIC
    ddisp = (
        np.where(slides[:, None], vald[:, None] * axis, 0.0)
        + np.where(pri[:, None], (val * phid_before)[:, None] * _perp(axis), 0.0)
        + np.where(is_fix[:, None], phid_before[:, None] * _perp(fixed_disp), 0.0)
    )
    vel_after = np.cumsum(ddisp, axis=0)
    st.phid_before = phid_before
    st.vel_before = vel_after - ddisp
    st.vel_after = vel_after
    return st


def point_jacobians(chain: AugmentedChain, st: ChainState, elements: np.ndarray, with_dot: bool = False):
    """Positions, linear Jacobians (p, 2, n_xi) and optionally their time derivatives
    for points rigidly attached after the given element indices."""
    elements = np.asarray(elements)
    kinds, dofs = chain.kinds, chain.dofs
    joint = dofs >= 0
    jk = kinds[joint]
    P = st.pos_after[elements]  # (p, 2)
    upstream = (np.nonzero(joint)[0][None, :] <= elements[:, None])  # (p, nj)
    rev = (jk == REVOLUTE)[None, :, None]
    lever = P[:, None, :] - st.pos_before[joint][None, :, :]  # (p, nj, 2)
    cols = np.where(rev, _perp(lever), st.axis[joint][None, :, :])
    cols = cols * upstream[:, :, None]
    J = np.transpose(cols, (0, 2, 1))
    if not with_dot:
        return P, J
    V = st.vel_after[elements]
    dlever = V[:, None, :] - st.vel_before[joint][None, :, :]
    pri = (jk == PRISMATIC)[None, :, None]
    dcols = np.where(rev, _perp(dlever), 0.0) + np.where(
        pri, st.phid_before[joint][None, :, None] * _perp(st.axis[joint])[None, :, :], 0.0
    )
    dcols = dcols * upstream[:, :, None]
    Jd = np.transpose(dcols, (0, 2, 1))
    return P, J, Jd


def angular_jacobians(chain: AugmentedChain, elements: np.ndarray) -> np.ndarray:
    """Rows mapping xi_dot to the angular rate of frames after the given elements."""
    elements = np.asarray(elements)
    joint = chain.dofs >= 0
    rev = chain.kinds[joint] == REVOLUTE
    upstream = np.nonzero(joint)[0][None, :] <= elements[:, None]
    return (upstream & rev[None, :]).astype(float)


def _element_for(chain: AugmentedChain, selector: str) -> int:
    if selector == "tip":
        return int(chain.end_elements[-1])
    if selector == "base":
        if chain.base_element < 0:
            raise DomainError("fixed-base robot has no base point")
        return chain.base_element
    kind, _, idx = selector.partition(":")
    try:
        i = int(idx)
    except ValueError:
        raise DomainError(f"invalid point selector {selector!r}") from None
    if kind == "end" and 0 <= i <= chain.n_segments:
        return int(chain.end_elements[i])
    if kind == "mass" and 0 <= i < chain.n_segments:
        return int(chain.mass_elements[i])
    raise DomainError(f"invalid point selector {selector!r}")


def point_position(chain: AugmentedChain, xi, selector: str) -> np.ndarray:
    st = chain_state(chain, xi)
    e = _element_for(chain, selector)
    if e < 0:
        x, y, _ = chain.robot.base.pose
        return np.array([x, y], dtype=float)
    return st.pos_after[e].copy()


def point_angle(chain: AugmentedChain, xi, selector: str) -> float:
    st = chain_state(chain, xi)
    e = _element_for(chain, selector)
    if e < 0:
        return float(chain.robot.base.pose[2])
    return float(st.phi_after[e])


def augmented_task_jacobian(chain: AugmentedChain, xi, selector: str = "tip", rows: int = 2) -> np.ndarray:
    """Jacobian mapping xi_dot to the planar velocity (rows=2) or velocity and
    angular rate (rows=3) of the selected point.

    Selectors: ``"tip"``, ``"base"``, ``"end:i"`` (frame S_i, i = 0..n), ``"mass:i"``.
    """
    if rows not in (2, 3):
        raise DomainError("rows must be 2 or 3")
    e = _element_for(chain, selector)
    st = chain_state(chain, xi)
    if e < 0:  # fixed world frame S_0
        return np.zeros((rows, chain.n_xi))
    _, J = point_jacobians(chain, st, np.array([e]))
    J = J[0]
    if rows == 3:
        J = np.vstack([J, angular_jacobians(chain, np.array([e]))])
    return J


def augmented_dynamics(chain: AugmentedChain, xi, xid, h: float = 1e-6):
    """Inertia B_xi, Coriolis matrix C_xi and gravity vector G_xi of the augmented chain.

    C_xi is assembled from Christoffel symbols of B_xi, whose partial derivatives
    are taken by central differences with step ``h``.
    """
    xi = np.asarray(xi, dtype=float)
    xid = np.asarray(xid, dtype=float)
    nx = chain.n_xi
    if xi.shape != (nx,) or xid.shape != (nx,):
        raise DomainError(f"augmented state must have {nx} entries")
    _check_finite(xi, xid)
    B = augmented_inertia(chain, xi)
    dB = np.empty((nx, nx, nx))  # dB[k] = dB/dxi_k
    for k in range(nx):
        e = np.zeros(nx)
        e[k] = h
        dB[k] = (augmented_inertia(chain, xi + e) - augmented_inertia(chain, xi - e)) / (2 * h)
    # C_ij = sum_k 1/2 (dB_ij/dxi_k + dB_ik/dxi_j - dB_jk/dxi_i) xid_k
    t1 = np.einsum("kij,k->ij", dB, xid)
    t2 = np.einsum("jik,k->ij", dB, xid)
    t3 = np.einsum("ijk,k->ij", dB, xid)
    C = 0.5 * (t1 + t2 - t3)
    return B, C, augmented_gravity(chain, xi)


def augmented_inertia(chain: AugmentedChain, xi) -> np.ndarray:
    st = chain_state(chain, xi)
    _, J = point_jacobians(chain, st, chain.mass_elements)
    B = np.einsum("p,pai,paj->ij", chain.mass_values, J, J)
    robot = chain.robot
    if robot.floating:
        B[0, 0] += robot.base.mass
        B[1, 1] += robot.base.mass
        B[2, 2] += robot.base.inertia
    return B


def augmented_gravity(chain: AugmentedChain, xi) -> np.ndarray:
    """Gradient of the gravitational potential w.r.t. xi."""
    g = chain.robot.gravity_vector
    st = chain_state(chain, xi)
    _, J = point_jacobians(chain, st, chain.mass_elements)
    G = -np.einsum("p,pai,a->i", chain.mass_values, J, g)
    robot = chain.robot
    if robot.floating:
        G[:2] -= robot.base.mass * g
    return G


def augmented_potential(chain: AugmentedChain, xi) -> float:
    g = chain.robot.gravity_vector
    st = chain_state(chain, xi)
    U = -float(np.sum(chain.mass_values * (st.pos_after[chain.mass_elements] @ g)))
    robot = chain.robot
    if robot.floating:
        U -= robot.base.mass * float(np.asarray(xi[:2]) @ g)
    return U
