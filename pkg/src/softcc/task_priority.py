"""Prioritized task-space control of a soft arm on a floating base.

Each task contributes ``J^T (K * offset - D * J qd)``; lower-priority terms are
filtered by the successive projector built from the stacked Jacobians of all
higher-priority tasks, weighted by the inertia (dynamically consistent).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dynamics import DynamicsEval, SoftRobotModel
from .errors import ConfigError, SingularTaskError

RANK_TOL = 1e-10


def orientation_offset(phi: float, phi_d: float) -> float:
    """Shortest signed rotation from ``phi`` to ``phi_d``, in (-pi, pi]."""
    if not (np.isfinite(phi) and np.isfinite(phi_d)):
        raise ValueError("angles must be finite")
    d = float(np.mod(phi_d - phi, 2.0 * np.pi))  # [0, 2pi)
    return d - 2.0 * np.pi if d > np.pi else d


def _gram(J: np.ndarray, B) -> tuple[np.ndarray, np.ndarray]:
    """Return B^-1 J^T and J B^-1 J^T, checking the Gram matrix rank."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    fac = cho_factor(np.asarray(B, dtype=float)) if not isinstance(B, tuple) else B
    BiJt = cho_solve(fac, J.T)
    G = J @ BiJt
    G = 0.5 * (G + G.T)
    if np.linalg.svd(G, compute_uv=False)[-1] < RANK_TOL:
        raise SingularTaskError("task Jacobian is rank deficient")
    return BiJt, G


def dyn_consistent_pinv(J, B) -> np.ndarray:
    """B^-1 J^T (J B^-1 J^T)^-1, the inertia-weighted right inverse of J."""
    BiJt, G = _gram(J, B)
    return np.linalg.solve(G, BiJt.T).T


def nullspace_projector(J, B) -> np.ndarray:
    """I - J^T (J^{B+})^T; torques filtered by it give zero acceleration of J."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    Jp = dyn_consistent_pinv(J, B)
    return np.eye(J.shape[1]) - J.T @ Jp.T


@dataclass
class TaskSpec:
    """One task in the hierarchy.

    Args:
        name: label used in logs and output columns.
        rank: priority, 1 is the highest.
        jacobian: ``f(q, dyn) -> (rows, dof)``.
        offset: ``f(q, t, dyn) -> (rows,)``, the reference minus the current value.
        K, D: task stiffness and damping (diagonal entries or full matrices).
    """

    name: str
    rank: int
    jacobian: Callable
    offset: Callable
    K: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        self.K = np.atleast_2d(np.diag(self.K) if np.ndim(self.K) == 1 else np.asarray(self.K, dtype=float))
        self.D = np.atleast_2d(np.diag(self.D) if np.ndim(self.D) == 1 else np.asarray(self.D, dtype=float))


@dataclass
class HierarchyOutput:
    tau: np.ndarray
    offsets: dict = field(default_factory=dict)
    projectors: list = field(default_factory=list)  # N_k^suc, one per task
    annihilation: float = 0.0  # max |J_hp B^-1 N_k^suc| over k >= 2


def _check_ranks(tasks) -> list:
    ranks = sorted(t.rank for t in tasks)
    if ranks != list(range(1, len(tasks) + 1)):
        raise ConfigError(f"task ranks must be unique and contiguous from 1, got {ranks}", "tasks")
    return sorted(tasks, key=lambda t: t.rank)


def hierarchical_control(dyn: DynamicsEval, tasks, q, qd, t: float = 0.0,
                         gravity_compensation: bool = True) -> HierarchyOutput:
    tasks = _check_ranks(list(tasks))
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    n = q.shape[0]
    fac = cho_factor(dyn.B)
    tau = dyn.G.copy() if gravity_compensation else np.zeros(n)
    out = HierarchyOutput(tau)
    stack = np.zeros((0, n))
    for task in tasks:
        J = np.atleast_2d(task.jacobian(q, dyn))
        if stack.shape[0] == 0:
            N = np.eye(n)
        else:
            BiJt, G = _gram(stack, fac)
            N = np.eye(n) - stack.T @ np.linalg.solve(G, BiJt.T)
            res = np.abs(stack @ cho_solve(fac, N)).max()
            out.annihilation = max(out.annihilation, float(res))
        if stack.shape[0] + J.shape[0] > n:
            raise ConfigError("combined task rows exceed the degrees of freedom", "tasks")
        delta = np.atleast_1d(task.offset(q, t, dyn))
        tau = tau + N @ (J.T @ (task.K @ delta - task.D @ (J @ qd)))
        out.offsets[task.name] = delta
        out.projectors.append(N)
        stack = np.vstack([stack, J])
    out.tau = tau
    return out


# ---------------------------------------------------------------- planar presets

OMAV_GAINS = {
    "static": {"tip_orientation": (1.5, 0.025), "tip_position": (13.8, 12.5), "base_orientation": (5.0, 4.0)},
    "dynamic": {"tip_orientation": (1.5, 0.025), "tip_position": (3.8, 2.5), "base_orientation": (5.0, 4.0)},
}


def _as_fn(value):
    return value if callable(value) else (lambda t, v=value: v)


def tip_orientation_task(model: SoftRobotModel, phi_d, K=1.5, D=0.025, rank=1) -> TaskSpec:
    """Absolute tip heading; its Jacobian is constant (ones on theta_b and every curvature)."""
    row = np.ones((1, model.dof))
    if model.robot.floating:
        row[0, :2] = 0.0
    phi_d = _as_fn(phi_d)
    return TaskSpec("tip_orientation", rank, lambda q, dyn: row,
                    lambda q, t, dyn: np.array([orientation_offset(dyn.tip_angle, phi_d(t))]),
                    np.atleast_1d(K) * np.ones(1), np.atleast_1d(D) * np.ones(1))


def tip_position_task(model: SoftRobotModel, x_d, K=13.8, D=12.5, rank=2) -> TaskSpec:
    x_d = _as_fn(np.asarray(x_d, dtype=float) if not callable(x_d) else x_d)
    return TaskSpec("tip_position", rank, lambda q, dyn: dyn.J,
                    lambda q, t, dyn: np.asarray(x_d(t)) - dyn.tip,
                    np.ones(2) * K, np.ones(2) * D)


def base_orientation_task(model: SoftRobotModel, theta_d, K=5.0, D=4.0, rank=3) -> TaskSpec:
    if not model.robot.floating:
        raise ConfigError("base orientation task needs a floating base", "tasks")
    row = np.zeros((1, model.dof))
    row[0, 2] = 1.0
    theta_d = _as_fn(theta_d)
    return TaskSpec("base_orientation", rank, lambda q, dyn: row,
                    lambda q, t, dyn: np.array([orientation_offset(q[2], theta_d(t))]),
                    np.ones(1) * K, np.ones(1) * D)


def omav_task_set(model: SoftRobotModel, tip_angle_d, x_d, base_angle_d, mode: str = "static") -> list:
    """Tip orientation > tip position > base orientation, with the tabulated gains."""
    g = OMAV_GAINS[mode]
    return [
        tip_orientation_task(model, tip_angle_d, *g["tip_orientation"], rank=1),
        tip_position_task(model, x_d, *g["tip_position"], rank=2),
        base_orientation_task(model, base_angle_d, *g["base_orientation"], rank=3),
    ]


def base_cycle(amplitude: float = np.deg2rad(15.0), period: float = 8.0, center: float = 0.0):
    """Smooth +-amplitude base-orientation reference (sinusoid)."""
    return lambda t: center + amplitude * np.sin(2.0 * np.pi * t / period)


class HierarchyController:
    """Runtime wrapper around :func:`hierarchical_control`.

    ``inject_sigma`` adds a random torque (normal, per update) filtered by the
    lowest-priority projector, which must not disturb the higher tasks.
    """

    def __init__(self, model: SoftRobotModel, tasks, inject_sigma: float = 0.0):
        self.model = model
        self.tasks = _check_ranks(list(tasks))
        self.inject_sigma = inject_sigma
        self.reset()

    def reset(self):
        self.phase = None
        self.extras = {}
        self.max_annihilation = 0.0

    def __call__(self, ctx) -> np.ndarray:
        dyn = self.model.evaluate(ctx.q, ctx.qd)
        out = hierarchical_control(dyn, self.tasks, ctx.q, ctx.qd, ctx.t)
        self.max_annihilation = max(self.max_annihilation, out.annihilation)
        tau = out.tau
        if self.inject_sigma > 0:
            tau = tau + out.projectors[-1] @ ctx.rng.normal(0.0, self.inject_sigma, self.model.dof)
        self.extras = {f"err_{k}": np.linalg.norm(v) for k, v in out.offsets.items()}
        self.extras["annihilation"] = out.annihilation
        return tau
