"""Numerical invariant checks for a robot description.

Each check samples random states, measures the worst violation of one identity
and compares it with a fixed tolerance. :func:`validate` runs them all; the
``softcc validate`` subcommand prints the resulting report.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import fixed_quad

from . import augmented as aug
from .dynamics import SoftRobotModel, actuation_map, project_dynamics_reference, segment_elastic_energy
from .kinematics import chain_poses
from .robot import RobotDescription
from .task_priority import nullspace_projector


@dataclass(frozen=True)
class CheckResult:
    name: str
    measured: float
    tol: float
    passed: bool
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name:<32s} measured={self.measured:.3e}  tol={self.tol:.1e}"


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        lines = [c.line() for c in self.checks]
        n_ok = sum(c.passed for c in self.checks)
        lines.append(f"{n_ok}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def _random_q(robot: RobotDescription, rng, size=None) -> np.ndarray:
    shape = (robot.dof,) if size is None else (size, robot.dof)
    q = rng.uniform(-np.pi, np.pi, shape)
    if robot.floating:
        q[..., :2] = rng.uniform(-1.0, 1.0, q[..., :2].shape)
    return q


def _angle_diff(a, b) -> float:
    return abs(float(np.angle(np.exp(1j * (a - b)))))


def _fd(f, x, h):
    """Central-difference Jacobian of ``f`` at ``x``, stacked on the last axis."""
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------- checks
# every check returns the worst measured violation


def check_frames(robot: RobotDescription, n_samples: int = 1000, seed: int = 0) -> float:
    """PCC frame products versus the augmented chain and the DH rows at xi = m(q)."""
    rng = np.random.default_rng(seed)
    chain = aug.build_chain(robot)
    worst = 0.0
    for q in _random_q(robot, rng, n_samples):
        base = robot.base_transform(q[:3] if robot.floating else None)
        poses = chain_poses(robot.arm_q(q), robot.geometry, base)
        xi = aug.map_m(robot, q)
        st = aug.chain_state(chain, xi)
        dh = aug.dh_frames(robot, xi)
        for i, P in enumerate(poses[1:], start=1):
            e = int(chain.end_elements[i])
            worst = max(worst, np.abs(st.pos_after[e] - P.position).max(),
                        _angle_diff(st.phi_after[e], P.angle))
            F = dh[4 * i - 1]
            worst = max(worst, np.abs(F[:2, 3] - P.position).max(),
                        _angle_diff(np.arctan2(F[1, 0], F[0, 0]), P.angle))
    return worst


def check_mass_midpoint(robot: RobotDescription, n_samples: int = 200, seed: int = 1) -> float:
    rng = np.random.default_rng(seed)
    chain = aug.build_chain(robot)
    worst = 0.0
    for q in _random_q(robot, rng, n_samples):
        base = robot.base_transform(q[:3] if robot.floating else None)
        poses = chain_poses(robot.arm_q(q), robot.geometry, base)
        xi = aug.map_m(robot, q)
        for i in range(robot.n):
            mid = 0.5 * (poses[i].position + poses[i + 1].position)
            worst = max(worst, np.abs(aug.point_position(chain, xi, f"mass:{i}") - mid).max())
    return worst


def check_jacobians(robot: RobotDescription, n_samples: int = 200, seed: int = 2, h: float = 1e-6) -> float:
    """J_m, its time derivative and the tip Jacobian against central differences."""
    rng = np.random.default_rng(seed)
    model = SoftRobotModel(robot)
    chain = aug.build_chain(robot)
    worst = 0.0
    for _ in range(n_samples):
        q = _random_q(robot, rng)
        qd = rng.normal(0.0, 1.0, robot.dof)
        Jm = aug.jacobian_m(robot, q)
        worst = max(worst, np.abs(Jm - _fd(lambda x: aug.map_m(robot, x), q, h)).max())
        Jmd = aug.jacobian_m_dot(robot, q, qd)
        Jmd_fd = (aug.jacobian_m(robot, q + h * qd) - aug.jacobian_m(robot, q - h * qd)) / (2 * h)
        worst = max(worst, np.abs(Jmd - Jmd_fd).max())
        J = model.evaluate(q, qd).J

        def tip(x):
            return aug.point_position(chain, aug.map_m(robot, x), "tip")

        worst = max(worst, np.abs(J - _fd(tip, q, h)).max())
    return worst


def check_inertia_spd(robot: RobotDescription, n_samples: int = 1000, seed: int = 3) -> float:
    """Smallest eigenvalue of B over random q (a pass needs it positive)."""
    rng = np.random.default_rng(seed)
    model = SoftRobotModel(robot)
    zero = np.zeros(robot.dof)
    lo = np.inf
    for q in _random_q(robot, rng, n_samples):
        lo = min(lo, np.linalg.eigvalsh(model.evaluate(q, zero).B)[0])
    return float(lo)


def check_skew(robot: RobotDescription, n_samples: int = 200, seed: int = 4, h: float = 1e-6) -> float:
    """|qd^T (dB/dt - 2C) qd|, with dB/dt by central differences along qd."""
    rng = np.random.default_rng(seed)
    model = SoftRobotModel(robot)
    worst = 0.0
    for _ in range(n_samples):
        q = _random_q(robot, rng)
        qd = rng.normal(0.0, 1.0, robot.dof)
        dyn = model.evaluate(q, qd)
        Bd = (model.evaluate(q + h * qd, qd).B - model.evaluate(q - h * qd, qd).B) / (2 * h)
        worst = max(worst, abs(qd @ (Bd - 2 * dyn.C) @ qd))
    return worst


def check_actuation_identity(robot: RobotDescription, n_samples: int = 200, seed: int = 5) -> float:
    """||A(q) - I||_inf over the arm block for torque pairs at the segment ends."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for q in _random_q(robot, rng, n_samples):
        A = actuation_map(robot, q)[robot.arm_slice]
        worst = max(worst, np.abs(A - np.eye(robot.n)).sum(axis=1).max())
    return worst


def check_elastic_closed_form(robot: RobotDescription, seed: int = 6) -> float:
    """Closed-form stiffness and segment energy versus quadrature over the cross-section."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    materials = [(s.material.kappa, s.material.delta) for s in robot.segments if s.material is not None]
    # descriptions with lumped gains still exercise the identity on a few sample sections
    materials += [(1.0, 0.01), (250.0, 0.02), (4e3, 0.035)]
    for kappa, delta in materials:
        K = 4.0 / 3.0 * kappa * delta ** 3
        K_num = fixed_quad(lambda s: 2.0 * kappa * s * s, -delta, delta, n=8)[0]
        worst = max(worst, abs(K - K_num))
        for q in rng.uniform(-np.pi, np.pi, 5):
            E_num = fixed_quad(lambda s: kappa * (s * q) ** 2, -delta, delta, n=8)[0]
            worst = max(worst, abs(segment_elastic_energy(kappa, delta, q) - E_num))
    return worst


def check_projector(robot: RobotDescription, n_samples: int = 100, seed: int = 7) -> float:
    """|J B^-1 N| for the tip-position task (torques through N leave the tip acceleration unchanged)."""
    rng = np.random.default_rng(seed)
    model = SoftRobotModel(robot)
    worst = 0.0
    for _ in range(n_samples):
        q = _random_q(robot, rng)
        dyn = model.evaluate(q, np.zeros(robot.dof))
        if dyn.J.shape[0] >= robot.dof:  # no nullspace left for a single segment
            continue
        if np.linalg.svd(dyn.J, compute_uv=False)[-1] < 1e-6:
            continue
        N = nullspace_projector(dyn.J, dyn.B)
        worst = max(worst, np.abs(dyn.J @ np.linalg.solve(dyn.B, N)).max())
    return worst


def check_fast_vs_reference(robot: RobotDescription, n_samples: int = 10, seed: int = 8) -> float:
    """Relative mismatch of the fast dynamics against the literal projection."""
    rng = np.random.default_rng(seed)
    model = SoftRobotModel(robot)
    worst = 0.0
    for _ in range(n_samples):
        q = _random_q(robot, rng)
        qd = rng.normal(0.0, 1.0, robot.dof)
        fast = model.evaluate(q, qd)
        ref = project_dynamics_reference(robot, q, qd)
        for a, b in ((fast.B, ref.B), (fast.C, ref.C), (fast.G, ref.G), (fast.J, ref.J)):
            scale = max(np.abs(b).max(), 1e-12)
            worst = max(worst, np.abs(a - b).max() / scale)
    return worst


# name, function, tolerance, comparison ("le": measured <= tol, "gt": measured > tol)
CHECKS = (
    ("frames_vs_augmented_chain", check_frames, 1e-10, "le"),
    ("mass_at_chord_midpoint", check_mass_midpoint, 1e-10, "le"),
    ("jacobians_vs_finite_diff", check_jacobians, 1e-5, "le"),
    ("inertia_min_eigenvalue", check_inertia_spd, 0.0, "gt"),
    ("skew_symmetry", check_skew, 1e-6, "le"),
    ("actuation_map_identity", check_actuation_identity, 1e-9, "le"),
    ("elastic_closed_form", check_elastic_closed_form, 1e-10, "le"),
    ("nullspace_annihilation", check_projector, 1e-8, "le"),
    ("fast_vs_reference_dynamics", check_fast_vs_reference, 1e-5, "le"),
)


def validate(robot: RobotDescription, checks=CHECKS) -> ValidationReport:
    results = []
    for name, fn, tol, cmp in checks:
        t0 = time.perf_counter()
        measured = float(fn(robot))
        ok = measured > tol if cmp == "gt" else measured <= tol
        results.append(CheckResult(name, measured, tol, bool(ok and np.isfinite(measured)),
                                   time.perf_counter() - t0))
    return ValidationReport(results)
