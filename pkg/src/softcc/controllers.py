"""Model-based controllers for PCC soft arms and their reference generators.

All controllers take a :class:`~softcc.dynamics.DynamicsEval` computed from the
controller's own model, which may differ from the simulated plant.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DynamicsEval, SoftRobotModel
from .errors import DomainError


def _finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise DomainError("non-finite controller input")


@dataclass
class IntegralState:
    """Trapezoidal integrator with a symmetric clamp on ``gain * value``.

    The clamp (anti-windup) is expressed in output units so it does not depend
    on the gain that multiplies the accumulator.
    """

    value: np.ndarray | float = 0.0
    last: np.ndarray | float | None = None
    limit: float = 10.0

    def update(self, error, dt: float, gain=1.0):
        error = np.asarray(error, dtype=float)
        if self.last is None:  # first sample: nothing to integrate yet
            self.last = error.copy()
            return self.value
        self.value = self.value + 0.5 * dt * (self.last + error)
        self.last = error.copy()
        g = np.abs(np.asarray(gain, dtype=float))
        if np.all(g > 0):
            bound = self.limit / g
            self.value = np.clip(self.value, -bound, bound)
        return self.value

    def reset(self):
        self.value = 0.0 if np.ndim(self.value) == 0 else np.zeros_like(self.value)
        self.last = None


@dataclass(frozen=True)
class CurvatureGains:
    I_q: float = 0.0
    windup_limit: float = 10.0

    def __post_init__(self):
        if not np.all(np.asarray(self.I_q) >= 0):
            raise DomainError("integral gain must be >= 0")


@dataclass(frozen=True)
class CartesianGains:
    """Tip impedance. K_c and D_c are used as N/m and N s/m."""

    K_c: np.ndarray = field(default_factory=lambda: np.diag([13.0, 13.0]))
    D_c: np.ndarray = field(default_factory=lambda: np.diag([6.0, 6.0]))
    I_c: float = 1.9
    windup_limit: float = 10.0

    def __post_init__(self):
        K = np.atleast_2d(np.asarray(self.K_c, dtype=float))
        D = np.atleast_2d(np.asarray(self.D_c, dtype=float))
        if K.shape != (2, 2) or D.shape != (2, 2):
            raise DomainError("K_c and D_c must be 2x2")
        if not (np.all(np.diag(K) > 0) and np.all(np.diag(D) > 0)):
            raise DomainError("K_c and D_c diagonals must be > 0")
        if self.I_c < 0:
            raise DomainError("I_c must be >= 0")
        object.__setattr__(self, "K_c", K)
        object.__setattr__(self, "D_c", D)


@dataclass(frozen=True)
class PIDGains:
    kP: float = 2.0
    kI: float = 1.0
    kD: float = 10.0

    def __post_init__(self):
        if min(self.kP, self.kI, self.kD) < 0:
            raise DomainError("PID gains must be >= 0")


@dataclass(frozen=True)
class ReferenceSignal:
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray


# ---------------------------------------------------------------- references

def reference_js_tj(t: float, n: int = 5) -> ReferenceSignal:
    """Cosine sweep of every curvature between pi/120 and 0.288 rad (period 3 s)."""
    if t < 0:
        raise DomainError("t must be >= 0")
    w = 2.0 * np.pi / 3.0
    a = np.pi / 24.0
    ones = np.ones(n)
    return ReferenceSignal(
        q=(np.pi / 20.0 - a * np.cos(w * t)) * ones,
        qd=(a * w * np.sin(w * t)) * ones,
        qdd=(a * w * w * np.cos(w * t)) * ones,
    )


def reference_lissajous(t: float) -> np.ndarray:
    return np.array([0.3 * np.sin(2.0 * t) + 0.4, 0.3 * np.cos(t) - 0.4])


def reference_lissajous_rate(t: float) -> np.ndarray:
    return np.array([0.6 * np.cos(2.0 * t), -0.3 * np.sin(t)])


def constant_reference(q_bar) -> callable:
    q_bar = np.asarray(q_bar, dtype=float)
    zero = np.zeros_like(q_bar)

    def ref(t: float) -> ReferenceSignal:
        return ReferenceSignal(q_bar, zero, zero)

    return ref


# ---------------------------------------------------------------- control laws

def curvature_control(dyn: DynamicsEval, q, qd, ref: ReferenceSignal, integral: IntegralState,
                      gains: CurvatureGains) -> np.ndarray:
    """tau = K qr + D qr' + C qr' + B qr'' + G + I_q * integral(qr - q).

    Only reads the integral; the caller advances it with its own sample time.
    """
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    _finite(q, qd, ref.q, ref.qd, ref.qdd)
    if q.shape != ref.q.shape or q.shape[0] != dyn.B.shape[0]:
        raise DomainError("state, reference and model dimensions differ")
    return (dyn.K @ ref.q + dyn.D @ ref.qd + dyn.C @ ref.qd + dyn.B @ ref.qdd + dyn.G
            + np.asarray(gains.I_q) * integral.value)


def cartesian_impedance_control(dyn: DynamicsEval, q, qd, x, x_d, n_par, gains: CartesianGains,
                                integral: IntegralState) -> np.ndarray:
    """Tip spring-damper toward ``x_d`` plus cancellation of C q', G and K q.

    The integral (a scalar, accumulated along ``n_par`` by the caller) is mapped
    back as a force along ``n_par``; with ``n_par = 0`` it has no effect.
    """
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    x = np.asarray(x, dtype=float)
    x_d = np.asarray(x_d, dtype=float)
    n_par = np.asarray(n_par, dtype=float)
    _finite(q, qd, x, x_d, n_par)
    J = dyn.J
    if J.shape[0] != 2:
        raise DomainError("Cartesian impedance needs a 2-row tip Jacobian")
    f = gains.K_c @ (x_d - x) - gains.D_c @ (J @ qd) + gains.I_c * float(integral.value) * n_par
    return J.T @ f + dyn.C @ qd + dyn.G + dyn.K @ q


def pid_baseline(q, qd, q_bar, qd_bar, gains: PIDGains, integral: IntegralState) -> np.ndarray:
    q, qd, q_bar, qd_bar = (np.asarray(a, dtype=float) for a in (q, qd, q_bar, qd_bar))
    _finite(q, qd, q_bar, qd_bar)
    return gains.kP * (q_bar - q) + gains.kI * integral.value + gains.kD * (qd_bar - qd)


# ---------------------------------------------------------------- surface following

class Phase(str, enum.Enum):
    APPROACHING = "Approaching"
    EXPLORING = "Exploring"
    DONE = "Done"


@dataclass(frozen=True)
class ContactReading:
    in_contact: bool
    n_par: np.ndarray = field(default_factory=lambda: np.zeros(2))
    n_perp: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass(frozen=True)
class SurfaceFollowState:
    phase: Phase
    n_par: np.ndarray
    n_perp: np.ndarray
    x_d: np.ndarray
    integral: float = 0.0

    @classmethod
    def initial(cls, x_0) -> "SurfaceFollowState":
        return cls(Phase.APPROACHING, np.zeros(2), np.zeros(2), np.asarray(x_0, dtype=float).copy())

    def tangential_error(self, x) -> float:
        """Seminorm of x - x_d weighted by n_par n_par^T."""
        return abs(float(self.n_par @ (np.asarray(x, dtype=float) - self.x_d)))


def surface_follow_step(state: SurfaceFollowState, contact: ContactReading, x, x_0, x_t,
                        delta: float, eps: float) -> SurfaceFollowState:
    """One tick of the approach / explore supervisor.

    On the tick where contact is first seen the normals are read and the
    target set before the termination test, so the test never runs with zero
    normals. Exploring never falls back to Approaching; losing contact while
    exploring keeps the last normals.
    """
    if not (delta > 0 and eps > 0):
        raise DomainError("delta and eps must be > 0")
    x = np.asarray(x, dtype=float)
    if state.phase is Phase.DONE:
        return state
    if state.phase is Phase.APPROACHING and not contact.in_contact:
        return SurfaceFollowState(Phase.APPROACHING, np.zeros(2), np.zeros(2),
                                  np.asarray(x_0, dtype=float).copy(), 0.0)
    n_par, n_perp = state.n_par, state.n_perp
    if contact.in_contact:
        n_par = np.asarray(contact.n_par, dtype=float)
        n_perp = np.asarray(contact.n_perp, dtype=float)
        if abs(np.linalg.norm(n_par) - 1) > 1e-9 or abs(np.linalg.norm(n_perp) - 1) > 1e-9:
            raise DomainError("contact normals must be unit vectors")
        if abs(n_par @ n_perp) > 1e-9:
            raise DomainError("contact normals must be orthogonal")
    x_d = np.asarray(x_t, dtype=float) - n_perp * delta
    nxt = SurfaceFollowState(Phase.EXPLORING, n_par.copy(), n_perp.copy(), x_d, state.integral)
    if nxt.tangential_error(x) <= eps:
        return SurfaceFollowState(Phase.DONE, nxt.n_par, nxt.n_perp, x_d, state.integral)
    return nxt


# ---------------------------------------------------------------- runtime wrappers
# Stateful controllers driven by the simulator at the control period. Each one
# evaluates its own (nominal) model and exposes ``phase`` and ``extras`` for logging.

class CurvatureController:
    def __init__(self, model: SoftRobotModel, reference, gains: CurvatureGains = CurvatureGains()):
        self.model = model
        self.reference = reference
        self.gains = gains
        self.reset()

    def reset(self):
        self.integral = IntegralState(np.zeros(self.model.dof), limit=self.gains.windup_limit)
        self.phase = None
        self.extras = {}

    def __call__(self, ctx) -> np.ndarray:
        ref = self.reference(ctx.t)
        self.integral.update(ref.q - ctx.q, ctx.period, self.gains.I_q)
        dyn = self.model.evaluate(ctx.q, ctx.qd)
        self.extras = {"qref": ref.q}
        return curvature_control(dyn, ctx.q, ctx.qd, ref, self.integral, self.gains)


class PIDController:
    def __init__(self, model: SoftRobotModel, reference, gains: PIDGains = PIDGains()):
        self.model = model
        self.reference = reference
        self.gains = gains
        self.reset()

    def reset(self):
        self.integral = IntegralState(np.zeros(self.model.dof))
        self.phase = None
        self.extras = {}

    def __call__(self, ctx) -> np.ndarray:
        ref = self.reference(ctx.t)
        self.integral.update(ref.q - ctx.q, ctx.period, self.gains.kI)
        self.extras = {"qref": ref.q}
        return pid_baseline(ctx.q, ctx.qd, ref.q, ref.qd, self.gains, self.integral)


class SurfaceFollowController:
    """Cartesian impedance driven by the approach / explore supervisor."""

    def __init__(self, model: SoftRobotModel, x_0, x_t, delta: float = 0.05, eps: float = 0.01,
                 gains: CartesianGains = CartesianGains()):
        self.model = model
        self.x_0 = np.asarray(x_0, dtype=float)
        self.x_t = np.asarray(x_t, dtype=float)
        self.delta = delta
        self.eps = eps
        self.gains = gains
        self.reset()

    def reset(self):
        self.state = SurfaceFollowState.initial(self.x_0)
        self.integral = IntegralState(0.0, limit=self.gains.windup_limit)
        self.extras = {}

    @property
    def phase(self) -> Phase:
        return self.state.phase

    def __call__(self, ctx) -> np.ndarray:
        dyn = self.model.evaluate(ctx.q, ctx.qd)
        x = dyn.tip
        self.state = surface_follow_step(self.state, ctx.contact, x, self.x_0, self.x_t,
                                         self.delta, self.eps)
        if self.state.phase is Phase.APPROACHING:
            self.integral.reset()
        else:
            err = float(self.state.n_par @ (self.state.x_d - x))
            self.integral.update(err, ctx.period, self.gains.I_c)
            self.state = SurfaceFollowState(self.state.phase, self.state.n_par, self.state.n_perp,
                                            self.state.x_d, float(self.integral.value))
        self.extras = {"xd": self.state.x_d, "tangential_error": self.state.tangential_error(x)}
        return cartesian_impedance_control(dyn, ctx.q, ctx.qd, x, self.state.x_d, self.state.n_par,
                                           self.gains, self.integral)
