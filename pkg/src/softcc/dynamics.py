"""Curvature-space dynamics obtained by projecting the augmented chain.

    B(q) q'' + (C(q, q') + D) q' + G(q) + K q = tau + J(q)^T f_ext

with B = Jm^T B_xi Jm, C = Jm^T B_xi Jm' + Jm^T C_xi Jm, G = Jm^T G_xi and
J = J_xi Jm, all evaluated at xi = m(q).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import augmented as aug
from .errors import DomainError
from ._kernels import projected_terms
from .robot import RobotDescription


@dataclass
class DynamicsEval:
    B: np.ndarray
    C: np.ndarray
    G: np.ndarray
    K: np.ndarray
    D: np.ndarray
    J: np.ndarray  # tip linear-velocity Jacobian, 2 x dof
    tip: np.ndarray | None = None
    tip_angle: float | None = None


@dataclass
class ControlInput:
    tau: np.ndarray
    f_ext: np.ndarray | None = None

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=float)
        self.f_ext = np.zeros(2) if self.f_ext is None else np.asarray(self.f_ext, dtype=float)
        if not (np.all(np.isfinite(self.tau)) and np.all(np.isfinite(self.f_ext))):
            raise DomainError("control input must be finite")


def stiffness_matrix(robot: RobotDescription) -> np.ndarray:
    """Diagonal K; per segment either the given lumped value or (4/3) kappa Delta^3.

    The floating-base block is zero.
    """
    k = []
    for s in robot.segments:
        if s.material is not None:
            k.append(4.0 / 3.0 * s.material.kappa * s.material.delta ** 3)
        else:
            k.append(s.stiffness)
    return _arm_diagonal(robot, k)


def damping_matrix(robot: RobotDescription) -> np.ndarray:
    d = []
    for s in robot.segments:
        if s.material is not None:
            d.append(4.0 / 3.0 * s.material.beta * s.material.delta ** 3)
        else:
            d.append(s.damping)
    return _arm_diagonal(robot, d)


def _arm_diagonal(robot: RobotDescription, values) -> np.ndarray:
    M = np.zeros((robot.dof, robot.dof))
    idx = np.arange(robot.n) + (3 if robot.floating else 0)
    M[idx, idx] = values
    return M


def segment_elastic_energy(kappa: float, delta: float, q: float) -> float:
    """Energy stored by the springs distributed over the section, (2/3) kappa Delta^3 q^2."""
    return 2.0 / 3.0 * kappa * delta ** 3 * q ** 2


class SoftRobotModel:
    """Cached evaluator of the projected dynamics for one robot description."""

    def __init__(self, robot: RobotDescription):
        self.robot = robot
        self.chain = aug.build_chain(robot)
        self.K = stiffness_matrix(robot)
        self.D = damping_matrix(robot)
        tip = self.chain.end_elements[-1]
        self._elements = np.concatenate([self.chain.mass_elements, [tip]])
        if robot.floating:
            frame0, bm, bi = robot.base.mount, robot.base.mass, robot.base.inertia
        else:
            frame0, bm, bi = robot.base.pose, 0.0, 0.0
        self._kernel_args = (
            robot.lengths, robot.masses, robot.gravity_vector, robot.floating,
            float(bm), float(bi), np.asarray(frame0, dtype=float),
        )

    @property
    def dof(self) -> int:
        return self.robot.dof

    @cached_property
    def _arm_index(self) -> np.ndarray:
        return np.arange(self.robot.n) + (3 if self.robot.floating else 0)

    def evaluate(self, q, qd) -> DynamicsEval:
        """B, C, G, K, D and the tip Jacobian at (q, qd) (compiled kernel)."""
        q = np.asarray(q, dtype=float)
        qd = np.asarray(qd, dtype=float)
        if q.shape != (self.robot.dof,) or qd.shape != (self.robot.dof,):
            raise DomainError(f"state must have {self.robot.dof} coordinates")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise DomainError("non-finite state")
        B, C, G, J, tip, angle, _ = projected_terms(q, qd, *self._kernel_args)
        return DynamicsEval(B, C, G, self.K, self.D, J, tip, float(angle))

    def evaluate_vectorized(self, q, qd) -> DynamicsEval:
        """Numpy version of :meth:`evaluate`.

        The augmented masses are points, so the Christoffel factorization of
        B_xi reduces to sum_i mu_i J_i^T J_i'; it is used here in closed form.
        """
        robot = self.robot
        q = np.asarray(q, dtype=float)
        qd = np.asarray(qd, dtype=float)
        if q.shape != (robot.dof,) or qd.shape != (robot.dof,):
            raise DomainError(f"state must have {robot.dof} coordinates")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise DomainError("non-finite state")
        xi = aug.map_m(robot, q)
        Jm = aug.jacobian_m(robot, q)
        Jmd = aug.jacobian_m_dot(robot, q, qd)
        st = aug.chain_state(self.chain, xi, Jm @ qd)
        P, Jx, Jxd = aug.point_jacobians(self.chain, st, self._elements, with_dot=True)
        Jq = Jx @ Jm
        Jqd = Jxd @ Jm + Jx @ Jmd
        mu = self.chain.mass_values
        n = robot.n
        B = np.einsum("p,pai,paj->ij", mu, Jq[:n], Jq[:n])
        C = np.einsum("p,pai,paj->ij", mu, Jq[:n], Jqd[:n])
        G = -np.einsum("p,pai,a->i", mu, Jq[:n], robot.gravity_vector)
        if robot.floating:
            B[0, 0] += robot.base.mass
            B[1, 1] += robot.base.mass
            B[2, 2] += robot.base.inertia
            G[:2] -= robot.base.mass * robot.gravity_vector
        B = 0.5 * (B + B.T)
        tip_angle = float(st.phi_after[self.chain.end_elements[-1]])
        return DynamicsEval(B, C, G, self.K, self.D, Jq[n], P[n].copy(), tip_angle)

    def forward_dynamics(self, q, qd, tau, f_ext=None, dyn: DynamicsEval | None = None,
                         extra_force=None) -> np.ndarray:
        """q'' = B^-1 (tau + J^T f_ext - (C + D) q' - G - K q).

        ``extra_force`` is an additional generalized force (e.g. disturbances at other points).
        """
        dyn = dyn if dyn is not None else self.evaluate(q, qd)
        rhs = np.asarray(tau, dtype=float) - (dyn.C + dyn.D) @ qd - dyn.G - dyn.K @ q
        if f_ext is not None:
            rhs = rhs + dyn.J.T @ np.asarray(f_ext, dtype=float)
        if extra_force is not None:
            rhs = rhs + extra_force
        return cho_solve(cho_factor(dyn.B), rhs)

    def point_jacobian(self, q, selector: str) -> tuple[np.ndarray, np.ndarray]:
        """Position and 2 x dof Jacobian (curvature space) of a chain point."""
        xi = aug.map_m(self.robot, q)
        st = aug.chain_state(self.chain, xi)
        e = aug._element_for(self.chain, selector)
        if e < 0:
            return aug.point_position(self.chain, xi, selector), np.zeros((2, self.dof))
        P, Jx = aug.point_jacobians(self.chain, st, np.array([e]))
        return P[0], Jx[0] @ aug.jacobian_m(self.robot, q)

    def potential_energy(self, q) -> float:
        q = np.asarray(q, dtype=float)
        return aug.augmented_potential(self.chain, aug.map_m(self.robot, q)) + 0.5 * q @ self.K @ q

    def energy(self, q, qd, dyn: DynamicsEval | None = None) -> float:
        """Kinetic + gravitational + elastic energy."""
        qd = np.asarray(qd, dtype=float)
        dyn = dyn if dyn is not None else self.evaluate(q, qd)
        return 0.5 * qd @ dyn.B @ qd + self.potential_energy(q)

    def tip_pose(self, q) -> tuple[np.ndarray, float]:
        xi = aug.map_m(self.robot, q)
        st = aug.chain_state(self.chain, xi)
        e = self.chain.end_elements[-1]
        return st.pos_after[e].copy(), float(st.phi_after[e])


def project_dynamics(robot: RobotDescription | SoftRobotModel, q, qd) -> DynamicsEval:
    model = robot if isinstance(robot, SoftRobotModel) else SoftRobotModel(robot)
    return model.evaluate(q, qd)


def project_dynamics_reference(robot: RobotDescription, q, qd) -> DynamicsEval:
    """Literal projection of the augmented terms (Christoffel C_xi by finite differences).

    Slow; used to cross-check :meth:`SoftRobotModel.evaluate`.
    """
    chain = aug.build_chain(robot)
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    xi = aug.map_m(robot, q)
    Jm = aug.jacobian_m(robot, q)
    Jmd = aug.jacobian_m_dot(robot, q, qd)
    Bx, Cx, Gx = aug.augmented_dynamics(chain, xi, Jm @ qd)
    Jx = aug.augmented_task_jacobian(chain, xi, "tip")
    return DynamicsEval(
        B=Jm.T @ Bx @ Jm,
        C=Jm.T @ Bx @ Jmd + Jm.T @ Cx @ Jm,
        G=Jm.T @ Gx,
        K=stiffness_matrix(robot),
        D=damping_matrix(robot),
        J=Jx @ Jm,
    )


def actuation_map(robot: RobotDescription, q) -> np.ndarray:
    """A(q) = Jm^T A_xi(m(q)) for torque pairs applied at the two ends of each segment.

    Column i of A_xi is the generalized force of a unit torque on {S_i+1} and the
    opposite torque on {S_i}. Returns a dof x n matrix.
    """
    chain = aug.build_chain(robot)
    Jw = aug.angular_jacobians(chain, chain.end_elements[1:])  # (n, n_xi)
    start = chain.end_elements[0]
    Jw0 = np.zeros(chain.n_xi) if start < 0 else aug.angular_jacobians(chain, np.array([start]))[0]
    prev = np.vstack([Jw0[None, :], Jw[:-1]])
    A_xi = (Jw - prev).T
    return aug.jacobian_m(robot, q).T @ A_xi


def forward_dynamics(robot: RobotDescription | SoftRobotModel, q, qd, u: ControlInput) -> np.ndarray:
    model = robot if isinstance(robot, SoftRobotModel) else SoftRobotModel(robot)
    return model.forward_dynamics(q, qd, u.tau, u.f_ext)
