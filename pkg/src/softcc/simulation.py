"""Closed-loop simulation: integrators, wall contact, actuator lag, scenarios, metrics.

The controller runs at a fixed period ``T``; between updates its output is
held and the plant is advanced with fixed steps ``dt`` by one of

* ``rk4``: classical Runge-Kutta,
* ``radau``: two-stage Radau IIA (order 3, L-stable),
* ``energy``: a discrete-gradient step in (q, p) that conserves the energy of
  the undamped, unforced system exactly (no contact or actuators).

The projected dynamics of light PCC arms are stiff (the smallest inertia
eigenvalue of the five-segment arm is about 1e-8 kg m^2 at the straight
pose), so RK4 needs dt well below 1e-3 s there while Radau does not.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.signal import cont2discrete

from . import _kernels as _k
from .controllers import ContactReading
from .dynamics import SoftRobotModel
from .errors import ConfigError, DomainError, IntegrationError
from .robot import RobotDescription

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- integrators

def rk4_step(f: Callable, x, dt: float, t: float = 0.0) -> np.ndarray:
    """Classical Runge-Kutta step of ``x' = f(t, x)``."""
    if not dt > 0:
        raise DomainError("dt must be > 0")
    x = np.asarray(x, dtype=float)
    k1 = f(t, x)
    k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = f(t + dt, x + dt * k3)
    out = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite state", t=t, state=x)
    return out


# ---------------------------------------------------------------- contact

@dataclass(frozen=True)
class Wall:
    """Straight wall segment from ``a`` to ``b`` with penalty contact.

    ``normal`` points out of the wall toward free space; by default it is the
    left normal of a -> b.
    """

    a: np.ndarray
    b: np.ndarray
    normal: np.ndarray | None = None
    k_wall: float = 1e4
    c_wall: float = 50.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        length = np.linalg.norm(b - a)
        if not length > 0:
            raise ConfigError("wall endpoints coincide", "wall")
        t = (b - a) / length
        n = np.array([-t[1], t[0]]) if self.normal is None else np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9 or abs(n @ t) > 1e-9:
            raise ConfigError("wall normal must be a unit vector orthogonal to the segment", "wall.normal")
        if self.k_wall < 0 or self.c_wall < 0:
            raise ConfigError("penalty gains must be >= 0", "wall")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "normal", n)

    @property
    def n_perp(self) -> np.ndarray:
        return self.normal

    @property
    def n_par(self) -> np.ndarray:
        return (self.b - self.a) / np.linalg.norm(self.b - self.a)

    def penetration(self, x) -> float:
        d = np.asarray(x, dtype=float) - self.a
        s = self.n_par @ d
        if s < 0.0 or s > np.linalg.norm(self.b - self.a):
            return 0.0
        return max(0.0, -float(self.normal @ d))


def wall_contact(x_tip, xd_tip, wall: Wall) -> tuple[np.ndarray, bool]:
    """Penalty force ``max(0, k p - c v_n) n_perp`` and the contact flag.

    ``v_n`` is the normal velocity (positive when separating). The clamp keeps
    the force from pulling, which also makes the law passive.
    """
    p = wall.penetration(x_tip)
    if p <= 0.0:
        return np.zeros(2), False
    vn = float(wall.normal @ np.asarray(xd_tip, dtype=float))
    fn = max(0.0, wall.k_wall * p - wall.c_wall * vn)
    f = fn * wall.normal
    return f, bool(p > 0.0 or fn > 0.01)


def contact_forces(x_tip, xd_tip, walls: Sequence[Wall]) -> tuple[np.ndarray, ContactReading]:
    """Total force of all walls and the reading a contact sensor would report.

    When several faces touch (a corner) the reported normals come from the face
    whose normal opposes the approach velocity most; ties go to the lowest index.
    """
    total = np.zeros(2)
    best, best_score = None, -np.inf
    for w in walls:
        f, hit = wall_contact(x_tip, xd_tip, w)
        total += f
        if hit:
            score = float(w.normal @ (-np.asarray(xd_tip)))
            if score > best_score + 1e-12:
                best, best_score = w, score
    if best is None:
        return total, ContactReading(False)
    return total, ContactReading(True, best.n_par.copy(), best.n_perp.copy())


def contact_energy(x_tip, walls: Sequence[Wall]) -> float:
    return sum(0.5 * w.k_wall * w.penetration(x_tip) ** 2 for w in walls)


# ---------------------------------------------------------------- actuators

@dataclass
class ActuatorFilter:
    """Per-input lag ``alpha / (gamma s + 1)^2`` with state (y, y')."""

    alpha: np.ndarray
    gamma: np.ndarray
    state: np.ndarray | None = None

    def __post_init__(self):
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if self.alpha.shape != self.gamma.shape:
            raise ConfigError("alpha and gamma must have the same length", "actuators")
        if not np.all(self.gamma > 0):
            raise ConfigError("time constants must be > 0", "actuators.gamma_s")
        if self.state is None:
            self.state = np.zeros((self.alpha.size, 2))

    @property
    def n(self) -> int:
        return self.alpha.size

    def derivative(self, state, u) -> np.ndarray:
        """d/dt of the (n, 2) state for input ``u``."""
        y, yd = state[:, 0], state[:, 1]
        g = self.gamma
        ydd = (self.alpha * u - y - 2.0 * g * yd) / g ** 2
        return np.stack([yd, ydd], axis=1)

    def output(self, state=None) -> np.ndarray:
        return (self.state if state is None else state)[:, 0].copy()


def actuator_step(filt: ActuatorFilter, u, dt: float) -> np.ndarray:
    """Advance the filter by ``dt`` with ``u`` held (exact discretization)."""
    if not dt > 0:
        raise DomainError("dt must be > 0")
    u = np.broadcast_to(np.asarray(u, dtype=float), (filt.n,))
    new = np.empty_like(filt.state)
    for i in range(filt.n):
        g = filt.gamma[i]
        A = np.array([[0.0, 1.0], [-1.0 / g ** 2, -2.0 / g]])
        Bv = np.array([0.0, filt.alpha[i] / g ** 2])
        M = np.zeros((3, 3))
        M[:2, :2] = A
        M[:2, 2] = Bv
        E = expm(M * dt)
        new[i] = E[:2, :2] @ filt.state[i] + E[:2, 2] * u[i]
    filt.state = new
    return filt.output()


class InputShaper:
    """Discrete ``(1/alpha) (gamma s + 1)^2 / (5 T s + 1)^2`` run at the control period."""

    def __init__(self, alpha, gamma, period: float):
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
        self.b, self.a = [], []
        for al, g in zip(alpha, gamma):
            num = np.array([g * g, 2 * g, 1.0]) / al
            tau = 5.0 * period
            den = np.array([tau * tau, 2 * tau, 1.0])
            bd, ad, _ = cont2discrete((num, den), period, method="bilinear")
            self.b.append(np.ravel(bd))
            self.a.append(np.ravel(ad))
        self.reset()

    def reset(self):
        self.x = [np.zeros(2) for _ in self.b]  # direct form II transposed state

    def __call__(self, tau) -> np.ndarray:
        out = np.empty(len(self.b))
        for i, (b, a) in enumerate(zip(self.b, self.a)):
            b = b / a[0]
            a = a / a[0]
            z = self.x[i]
            y = b[0] * tau[i] + z[0]
            z[0] = b[1] * tau[i] - a[1] * y + z[1]
            z[1] = b[2] * tau[i] - a[2] * y
            out[i] = y
        return out


@dataclass(frozen=True)
class HardwareModel:
    """Actuator lag plus, if ``prefilter``, the inverse shaping pre-filter on the command."""

    alpha: tuple
    gamma: tuple
    prefilter: bool = True


# ---------------------------------------------------------------- disturbances

@dataclass(frozen=True)
class Disturbance:
    """Rectangular force pulse in world coordinates applied at a chain point."""

    start: float
    duration: float
    force: tuple
    point: str = "tip"

    def active(self, t: float) -> bool:
        return self.start <= t < self.start + self.duration


# ---------------------------------------------------------------- scenario

class Controller(Protocol):
    model: SoftRobotModel

    def reset(self) -> None: ...

    def __call__(self, ctx: "ControlContext") -> np.ndarray: ...


@dataclass
class ControlContext:
    t: float
    q: np.ndarray
    qd: np.ndarray
    period: float
    contact: ContactReading
    rng: np.random.Generator


@dataclass
class ZeroController:
    model: SoftRobotModel

    def reset(self):
        pass

    def __call__(self, ctx):
        return np.zeros(self.model.dof)

    phase = None
    extras: dict = field(default_factory=dict)


@dataclass
class Scenario:
    robot: RobotDescription
    controller: Controller
    duration: float
    dt: float = 1e-3
    control_period: float = 0.015
    walls: Sequence[Wall] = ()
    disturbances: Sequence[Disturbance] = ()
    plant_mismatch: float = 1.10
    hardware: HardwareModel | None = None
    integrator: str = "radau"
    q0: np.ndarray | None = None
    qd0: np.ndarray | None = None
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError("must be > 0", "duration_s")
        if not self.dt > 0:
            raise ConfigError("must be > 0", "dt_s")
        if not self.control_period > 0:
            raise ConfigError("must be > 0", "control_period_s")
        if self.dt > self.control_period * (1 + 1e-12):
            raise ConfigError("physics step must not exceed the control period", "dt_s")
        if self.integrator not in ("rk4", "radau", "energy"):
            raise ConfigError(f"unknown integrator {self.integrator!r}", "integrator")
        if not self.plant_mismatch > 0:
            raise ConfigError("must be > 0", "plant_mismatch")


@dataclass
class TimeSeries:
    """Samples taken at every control update."""

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    tau: np.ndarray
    tip: np.ndarray
    contact: np.ndarray
    phase: list
    extras: dict = field(default_factory=dict)
    events: dict = field(default_factory=dict)
    max_penetration: float = 0.0

    def __len__(self) -> int:
        return self.t.size

    @property
    def period(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def window(self, t0: float = -np.inf, t1: float = np.inf) -> np.ndarray:
        return (self.t >= t0 - 1e-12) & (self.t < t1 - 1e-12)

    def contact_durations(self) -> list[tuple[float, float]]:
        """(start, end) of every run of contact samples."""
        out, start = [], None
        for k, c in enumerate(self.contact):
            if c and start is None:
                start = self.t[k]
            if not c and start is not None:
                out.append((float(start), float(self.t[k])))
                start = None
        if start is not None:
            out.append((float(start), float(self.t[-1])))
        return out


def l2_error(series, reference=None, dt: float | None = None) -> float:
    """sqrt(sum_k |e_k|^2 dt) for a sampled error (left Riemann sum).

    Args:
        series: (M,) or (M, n) samples, or the error itself if ``reference`` is None.
        reference: samples to subtract, same shape.
        dt: sample period.
    """
    e = np.asarray(series, dtype=float)
    if reference is not None:
        e = e - np.asarray(reference, dtype=float)
    if dt is None:
        raise DomainError("dt is required")
    e = e.reshape(e.shape[0], -1)
    return float(np.sqrt(np.sum(e * e) * dt))


RADAU_A = np.array([[5.0 / 12.0, -1.0 / 12.0], [0.75, 0.25]])
RADAU_B = np.array([0.75, 0.25])


class _Plant:
    """Simulated plant (mismatched model, contact, actuators) on the compiled kernels."""

    def __init__(self, sc: Scenario):
        self.sc = sc
        robot = sc.robot.scaled(sc.plant_mismatch, sc.plant_mismatch)
        self.model = SoftRobotModel(robot)
        self.N = robot.dof
        self.nb = 3 if robot.floating else 0
        alpha = gamma = np.zeros(0)
        if sc.hardware is not None:
            if robot.floating:
                raise ConfigError("actuator model applies to fixed-base arms only", "hardware")
            alpha = np.asarray(sc.hardware.alpha, dtype=float)
            gamma = np.asarray(sc.hardware.gamma, dtype=float)
            ActuatorFilter(alpha, gamma)  # validation
            if alpha.size != robot.n:
                raise ConfigError("one actuator per segment is required", "hardware")
        self.n_act = alpha.size
        walls = np.array([[*w.a, *w.n_par, *w.n_perp, np.linalg.norm(w.b - w.a), w.k_wall, w.c_wall]
                          for w in sc.walls], dtype=float).reshape(-1, 9)
        for d in sc.disturbances:
            if d.point not in ("tip", "base"):
                raise ConfigError(f"disturbance point must be 'tip' or 'base', got {d.point!r}",
                                  "disturbances.point")
            if d.point == "base" and not robot.floating:
                raise ConfigError("base disturbance needs a floating base", "disturbances.point")
        if sc.integrator == "energy" and (sc.walls or self.n_act):
            raise ConfigError("the energy-consistent integrator supports neither contact nor actuators",
                              "integrator")
        self._static = self.model._kernel_args + (
            np.diag(self.model.K).copy(), np.diag(self.model.D).copy(), walls, alpha, gamma)
        self.size = 2 * self.N + 2 * self.n_act

    def params(self, u, t: float):
        f_tip = np.zeros(2)
        f_base = np.zeros(2)
        for d in self.sc.disturbances:
            if d.active(t):
                if d.point == "tip":
                    f_tip += d.force
                else:
                    f_base += d.force
        return self._static + (np.asarray(u, dtype=float), f_tip, f_base)

    def rhs(self, y, P) -> np.ndarray:
        return _k.plant_rhs(y, P)

    def advance(self, y, t: float, h: float, P, depth: int = 0) -> np.ndarray:
        """One physics step; implicit steps are halved if Newton fails."""
        method = self.sc.integrator
        if method == "rk4":
            try:
                out = _k.rk4(y, h, P)
            except np.linalg.LinAlgError:
                out = np.full_like(y, np.nan)
            if not np.all(np.isfinite(out)):
                raise IntegrationError("non-finite state", t=t, state=y.copy())
            return out
        if method == "radau":
            out, ok = _k.collocation(y, h, P, RADAU_A, RADAU_B, 1e-10, 10, True)
        else:
            N = self.N
            B = _k.projected_terms(y[:N], y[N:], *self.model._kernel_args)[0]
            z, ok = _k.discrete_gradient(np.concatenate([y[:N], B @ y[N:]]), h, P, 1e-13, 30)
            if ok:
                Bn = _k.projected_terms(z[:N], np.zeros(N), *self.model._kernel_args)[0]
                out = np.concatenate([z[:N], np.linalg.solve(Bn, z[N:])])
        if ok and np.all(np.isfinite(out)):
            return out
        if depth >= 10:
            raise IntegrationError("implicit step did not converge", t=t, state=y.copy())
        half = self.advance(y, t, 0.5 * h, P, depth + 1)
        return self.advance(half, t + 0.5 * h, 0.5 * h, P, depth + 1)

    def sense(self, y):
        tip, xd = _k.tip_state(y, self._static)
        if not self.sc.walls:
            return tip, ContactReading(False), 0.0
        _, reading = contact_forces(tip, xd, self.sc.walls)
        pen = max(w.penetration(tip) for w in self.sc.walls)
        return tip, reading, pen


def run_scenario(sc: Scenario) -> TimeSeries:
    """Simulate the closed loop and return control-rate samples.

    Contact is sensed after every physics step; the controller sees it at its
    next update. Identical scenarios (including the seed) give identical output.
    """
    plant = _Plant(sc)
    N = plant.N
    T = sc.control_period
    steps = int(round(sc.duration / T))
    if steps < 1:
        raise ConfigError("duration shorter than one control period", "duration_s")
    substeps = max(1, int(round(T / sc.dt)))
    h = T / substeps
    rng = np.random.default_rng(sc.seed)
    ctrl = sc.controller
    ctrl.reset()
    shaper = None
    if sc.hardware is not None and sc.hardware.prefilter:
        shaper = InputShaper(sc.hardware.alpha, sc.hardware.gamma, T)

    y = np.zeros(plant.size)
    if sc.q0 is not None:
        y[:N] = sc.q0
    if sc.qd0 is not None:
        y[N:2 * N] = sc.qd0
    if not np.all(np.isfinite(y)):
        raise DomainError("non-finite initial state")

    ts_t = np.arange(steps + 1) * T
    Q = np.zeros((steps + 1, N))
    QD = np.zeros_like(Q)
    TAU = np.zeros_like(Q)
    TIP = np.zeros((steps + 1, 2))
    CON = np.zeros(steps + 1, dtype=bool)
    PH: list = []
    extras: dict[str, list] = {}
    events: dict = {}
    max_pen = 0.0
    tip, seen, pen = plant.sense(y)

    for k in range(steps + 1):
        t = ts_t[k]
        q, qd = y[:N].copy(), y[N:2 * N].copy()
        ctx = ControlContext(t, q, qd, T, seen, rng)
        try:
            cmd = np.asarray(ctrl(ctx), dtype=float)
        except ArithmeticError as exc:
            raise IntegrationError(f"controller failed: {exc}", t=t, state=y.copy()) from exc
        if not np.all(np.isfinite(cmd)):
            raise IntegrationError("controller produced a non-finite torque", t=t, state=y.copy())
        u = shaper(cmd[plant.nb:]) if shaper is not None else cmd
        Q[k], QD[k], TIP[k], TAU[k] = q, qd, tip, cmd
        CON[k] = seen.in_contact
        phase = getattr(ctrl, "phase", None)
        PH.append("" if phase is None else str(getattr(phase, "value", phase)))
        for name, val in getattr(ctrl, "extras", {}).items():
            extras.setdefault(name, []).append(np.atleast_1d(np.asarray(val, dtype=float)).copy())
        if k == steps:
            break

        last = None
        for j in range(substeps):
            tj = t + j * h
            y = plant.advance(y, tj, h, plant.params(u, tj + 0.5 * h))
            tip, reading, pen = plant.sense(y)
            max_pen = max(max_pen, pen)
            if reading.in_contact:
                last = reading
                events.setdefault("contact_onset", float(tj + h))
        # contact seen at any substep reaches the controller at the next update
        seen = reading if reading.in_contact or last is None else last

    ts = TimeSeries(ts_t, Q, QD, TAU, TIP, CON, PH,
                    {k_: np.array(v) for k_, v in extras.items()}, events, max_pen)
    _phase_events(ts)
    return ts


def _phase_events(ts: TimeSeries) -> None:
    switches = []
    for k in range(1, len(ts.phase)):
        if ts.phase[k] != ts.phase[k - 1]:
            switches.append((float(ts.t[k]), ts.phase[k - 1], ts.phase[k]))
    ts.events["phase_switches"] = switches
