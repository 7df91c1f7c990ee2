"""Identification of stiffness, damping and actuator constants from step responses.

Every actuator receives the same step ``A`` at t = 0. The actuator output is
``alpha_i A s(t; gamma_i)`` with ``s`` the unit-step response of
``1 / (gamma s + 1)^2``, and the arm obeys

    B(q) q'' + C(q, q') q' + G(q) = -k q - d q' + tau_act

with one k and one d shared by all segments. For fixed time constants the
equation is linear in theta = [k, d, alpha_1 .. alpha_n], so theta follows from
a pseudo-inverse; the time constants are searched on a grid and the grid point
with the smallest regression residual wins.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import savgol_filter

from .dynamics import SoftRobotModel
from .errors import ConfigError, IdentificationError
from .robot import (PAPER_ALPHA, PAPER_DAMPING, PAPER_GAMMA, PAPER_LENGTH, PAPER_MASS,
                    PAPER_STIFFNESS, RobotDescription, Segment)

log = logging.getLogger(__name__)

PAPER_AMPLITUDES = (300.0, 600.0, 900.0)  # encoder tics
DEFAULT_GRID = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


@dataclass
class StepExperiment:
    """Sampled response ``q`` (samples x n) to a step of ``amplitude`` applied at ``t[0]``."""

    amplitude: float
    t: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        if self.q.shape[0] != self.t.size:
            if self.q.shape[1] == self.t.size:
                self.q = self.q.T
            else:
                raise ConfigError("q must have one row per sample", "experiment.q")
        if self.t.size < 3:
            raise ConfigError("at least three samples are required", "experiment.t")
        dt = np.diff(self.t)
        if not np.all(dt > 0):
            raise ConfigError("time stamps must be strictly increasing", "experiment.t")
        if np.ptp(dt) > 1e-6 * dt.mean():
            raise ConfigError("samples must be uniformly spaced", "experiment.t")
        if not (np.all(np.isfinite(self.q)) and np.isfinite(self.amplitude)):
            raise ConfigError("non-finite data", "experiment")

    @property
    def period(self) -> float:
        return float((self.t[-1] - self.t[0]) / (self.t.size - 1))

    @property
    def n(self) -> int:
        return self.q.shape[1]


@dataclass
class IdentifiedParams:
    k: float
    d: float
    alpha: np.ndarray
    gamma: np.ndarray
    residual: float = 0.0
    evaluated: dict = field(default_factory=dict, repr=False)  # grid point -> residual

    def __post_init__(self):
        self.alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        if self.alpha.shape != self.gamma.shape:
            raise ConfigError("alpha and gamma must have the same length", "alpha")
        if not (self.k > 0 and self.d > 0 and np.all(self.gamma > 0)):
            raise IdentificationError(f"non-physical parameters k={self.k}, d={self.d}, gamma={self.gamma}")

    @property
    def n(self) -> int:
        return self.alpha.size

    def to_dict(self) -> dict:
        return {
            "stiffness_Nm": float(self.k),
            "damping_Nms": float(self.d),
            "alpha_per_Nm": self.alpha.tolist(),
            "gamma_s": self.gamma.tolist(),
            "residual": float(self.residual),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IdentifiedParams":
        try:
            return cls(float(data["stiffness_Nm"]), float(data["damping_Nms"]),
                       data["alpha_per_Nm"], data["gamma_s"], float(data.get("residual", 0.0)))
        except KeyError as exc:
            raise ConfigError(f"missing key {exc.args[0]}", str(exc.args[0])) from exc


PAPER_PARAMS = IdentifiedParams(PAPER_STIFFNESS, PAPER_DAMPING, PAPER_ALPHA, PAPER_GAMMA)


def filtered_step(t, gamma: float) -> np.ndarray:
    """Unit-step response of ``1 / (gamma s + 1)^2``, zero for t < 0."""
    t = np.asarray(t, dtype=float)
    x = np.maximum(t, 0.0) / gamma
    return 1.0 - (1.0 + x) * np.exp(-x)


def _arm(n: int, k: float, d: float, lengths=None, masses=None) -> RobotDescription:
    lengths = np.broadcast_to(PAPER_LENGTH if lengths is None else lengths, (n,))
    masses = np.broadcast_to(PAPER_MASS if masses is None else masses, (n,))
    return RobotDescription(tuple(Segment(float(L), float(m), k, d) for L, m in zip(lengths, masses)))


class _Step:
    """Constant command on every actuator."""

    phase = None

    def __init__(self, n: int, amplitude: float):
        self.u = np.full(n, float(amplitude))
        self.extras: dict = {}

    def reset(self):
        pass

    def __call__(self, ctx):
        return self.u


def synthesize_step_data(params: IdentifiedParams = PAPER_PARAMS, amplitudes=PAPER_AMPLITUDES,
                         noise: float = 0.0, duration: float = 2.0, period: float = 1e-3,
                         substeps: int = 10, seed: int = 0, lengths=None, masses=None,
                         ) -> list[StepExperiment]:
    """Simulate the arm plus actuator lags under steps and sample ``q`` every ``period``.

    Gaussian noise of standard deviation ``noise`` (rad) is added to the samples.
    """
    from .simulation import HardwareModel, Scenario, run_scenario

    amplitudes = list(amplitudes)
    if not amplitudes:
        raise ConfigError("at least one amplitude is required", "amplitudes")
    if noise < 0:
        raise ConfigError("noise must be >= 0", "noise_rad")
    robot = _arm(params.n, params.k, params.d, lengths, masses)
    out = []
    for amp in amplitudes:
        sc = Scenario(robot, _Step(params.n, amp), duration=duration, dt=period / substeps,
                      control_period=period, plant_mismatch=1.0,
                      hardware=HardwareModel(tuple(params.alpha), tuple(params.gamma), prefilter=False))
        ts = run_scenario(sc)
        out.append(StepExperiment(float(amp), ts.t, ts.q))
    return add_measurement_noise(out, noise, seed)


def add_measurement_noise(experiments, noise: float, seed: int = 0) -> list[StepExperiment]:
    """Copies of ``experiments`` with Gaussian noise (std ``noise`` rad) on every sample."""
    if noise < 0:
        raise ConfigError("noise must be >= 0", "noise_rad")
    rng = np.random.default_rng(seed)
    return [StepExperiment(ex.amplitude, ex.t, ex.q + (rng.normal(0.0, noise, ex.q.shape) if noise > 0 else 0.0))
            for ex in experiments]


# ---------------------------------------------------------------- regression

def _derivatives(q: np.ndarray, h: float, window: int, order: int):
    qd = savgol_filter(q, window, order, deriv=1, delta=h, axis=0)
    qdd = savgol_filter(q, window, order, deriv=2, delta=h, axis=0)
    qs = savgol_filter(q, window, order, axis=0)
    return qs, qd, qdd


def _noise_level(q: np.ndarray) -> float:
    """Robust estimate of white measurement noise from sixth differences."""
    d = np.diff(q, n=6, axis=0)
    return float(np.median(np.abs(d)) / 0.6745 / np.sqrt(924.0))


@dataclass
class _Rows:
    y: np.ndarray  # measured B q'' + C q' + G, stacked
    base: np.ndarray  # columns for k and d
    seg: np.ndarray  # segment index of each row
    t: np.ndarray
    amp: np.ndarray


def _build_rows(experiments, lengths, masses, window, order) -> _Rows:
    n = experiments[0].n
    model = SoftRobotModel(_arm(n, 1.0, 1.0, lengths, masses))
    ys, base, seg, ts, amps = [], [], [], [], []
    for ex in experiments:
        if ex.n != n:
            raise ConfigError("all experiments need the same number of segments", "experiments")
        w = window
        if w > ex.t.size:
            raise IdentificationError("experiment shorter than the smoothing window")
        qs, qd, qdd = _derivatives(ex.q, ex.period, w, order)
        keep = np.arange(w // 2, ex.t.size - w // 2)
        for j in keep:
            dyn = model.evaluate(qs[j], qd[j])
            ys.append(dyn.B @ qdd[j] + dyn.C @ qd[j] + dyn.G)
            base.append(np.stack([-qs[j], -qd[j]], axis=1))
        tt = ex.t[keep] - ex.t[0]
        seg.append(np.tile(np.arange(n), keep.size))
        ts.append(np.repeat(tt, n))
        amps.append(np.full(keep.size * n, ex.amplitude))
    return _Rows(np.concatenate(ys), np.concatenate(base).reshape(-1, 2),
                 np.concatenate(seg), np.concatenate(ts), np.concatenate(amps))


def _fit(rows: _Rows, gamma, n: int):
    """Least-squares theta for fixed time constants; returns (theta, residual)."""
    phi = np.zeros((rows.y.size, 2 + n))
    phi[:, :2] = rows.base
    g = np.asarray(gamma, dtype=float)[rows.seg]
    phi[np.arange(rows.y.size), 2 + rows.seg] = rows.amp * filtered_step(rows.t, g)
    scale = np.linalg.norm(phi, axis=0)
    if np.any(scale == 0):
        raise IdentificationError("regression matrix has an empty column")
    sv = np.linalg.svd(phi / scale, compute_uv=False)
    if sv[-1] < 1e-10 * sv[0]:
        raise IdentificationError("regression matrix is rank deficient")
    theta = (np.linalg.pinv(phi / scale) @ rows.y) / scale
    return theta, float(np.linalg.norm(phi @ theta - rows.y))


def _segment_step(rows: _Rows, grid, n: int, kd=None) -> tuple:
    """Best time constant of every actuator for fixed shared ``kd = (k, d)``.

    With k and d fixed the residual is a sum of per-segment terms, each
    depending on one gamma_i and one alpha_i, so the minimization separates.
    With ``kd=None`` every segment also fits its own k_i and d_i (start value).
    """
    out = []
    for i in range(n):
        m = rows.seg == i
        best = None
        for g in grid:
            col = (rows.amp[m] * filtered_step(rows.t[m], g))[:, None]
            if kd is None:
                phi, target = np.column_stack([rows.base[m], col]), rows.y[m]
            else:
                phi, target = col, rows.y[m] - rows.base[m] @ np.asarray(kd)
            theta = np.linalg.pinv(phi) @ target
            r = float(np.linalg.norm(phi @ theta - target))
            if best is None or r < best[0]:
                best = (r, g)
        out.append(best[1])
    return tuple(out)


def identify(experiments, gamma_grid=DEFAULT_GRID, search: str = "coordinate",
             window: int | None = None, order: int | None = None, lengths=None, masses=None,
             jobs: int = 1) -> IdentifiedParams:
    """Fit k, d, alpha_i and gamma_i to step experiments.

    Args:
        experiments: one or more :class:`StepExperiment` with equal segment count.
        gamma_grid: candidate time constants (s) for every actuator.
        search: ``"coordinate"`` (alternate between the shared regression and
            per-actuator time constants from several starts, then sweep one
            actuator at a time until no change) or ``"full"`` (Cartesian product of the grid).
        window, order: Savitzky-Golay window (samples, odd) and polynomial
            order for the derivatives. By default a short order-6 stencil is used
            on clean data and a 0.3 s quintic fit when noise is detected.
        lengths, masses: segment geometry used for the inertial terms.
        jobs: threads evaluating grid points.

    Returns:
        The parameters of the best grid point; ``evaluated`` maps every tried
        grid point to its residual.
    """
    experiments = list(experiments)
    grid = sorted({float(g) for g in gamma_grid})
    if not experiments:
        raise IdentificationError("no experiments")
    if not grid or grid[0] <= 0:
        raise IdentificationError("the time-constant grid must be non-empty and positive")
    if search not in ("coordinate", "full"):
        raise ConfigError(f"unknown search {search!r}", "search")
    n = experiments[0].n
    if window is None or order is None:
        sigma = max(_noise_level(ex.q) for ex in experiments)
        noisy = sigma > 1e-7
        h = experiments[0].period
        window = window or (2 * int(round(0.15 / h)) + 1 if noisy else 9)
        order = order or (5 if noisy else 6)
        log.debug("noise estimate %.2e, Savitzky-Golay window %d order %d", sigma, window, order)
    rows = _build_rows(experiments, lengths, masses, window, order)

    cache: dict[tuple, tuple] = {}

    def evaluate(points):
        todo = [p for p in points if p not in cache]
        if jobs > 1 and len(todo) > 1:
            with ThreadPoolExecutor(jobs) as pool:
                results = list(pool.map(lambda p: _fit(rows, p, n), todo))
        else:
            results = [_fit(rows, p, n) for p in todo]
        cache.update(zip(todo, results))
        # lowest residual, ties to the lexicographically smallest point
        return min(points, key=lambda p: (cache[p][1], p))

    if search == "full":
        evaluate(list(itertools.product(grid, repeat=n)))
    else:
        # alternate: shared (k, d, alpha) for fixed gamma, then gamma per segment for fixed (k, d)
        # several starts: decoupled per-segment fits and every uniform grid point
        ends = []
        for start in [_segment_step(rows, grid, n)] + [(g,) * n for g in grid]:
            current = evaluate([start])
            for _ in range(20):
                nxt = evaluate([current, _segment_step(rows, grid, n, cache[current][0][:2])])
                if nxt == current:
                    break
                current = nxt
            ends.append(current)
        current = evaluate(ends)
        for _ in range(10):
            previous = current
            for i in range(n):
                cands = [current[:i] + (g,) + current[i + 1:] for g in grid]
                current = evaluate(cands)
            if current == previous:
                break
    best = min(cache, key=lambda p: (cache[p][1], p))
    theta, res = cache[best]
    return IdentifiedParams(theta[0], theta[1], theta[2:], np.array(best), res,
                            {p: r for p, (_, r) in cache.items()})


# ---------------------------------------------------------------- I/O

def read_step_csv(path, amplitude: float | None = None) -> StepExperiment:
    """Read ``t, q1 .. qn`` columns; the amplitude comes from a ``# amplitude=<value>`` line
    or the argument."""
    path = Path(path)
    amp = amplitude
    rows = []
    with path.open(newline="") as fh:
        for line in fh:
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                key, _, val = s[1:].partition("=")
                if key.strip() == "amplitude" and amp is None:
                    amp = float(val)
                continue
            rows.append(s)
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or header[0].strip() != "t":
        raise ConfigError(f"{path}: expected a header starting with 't'", "csv")
    data = np.array([[float(v) for v in r] for r in reader])
    if amp is None:
        raise ConfigError(f"{path}: step amplitude unknown", "amplitude")
    if data.ndim != 2 or data.shape[1] < 2:
        raise ConfigError(f"{path}: no samples", "csv")
    return StepExperiment(amp, data[:, 0], data[:, 1:])


def write_step_csv(path, experiment: StepExperiment) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# amplitude={experiment.amplitude!r}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"q{i + 1}" for i in range(experiment.n)])
        for t, q in zip(experiment.t, experiment.q):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in q])


def write_params_json(path, params: IdentifiedParams) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


def read_params_json(path) -> IdentifiedParams:
    return IdentifiedParams.from_dict(json.loads(Path(path).read_text()))
