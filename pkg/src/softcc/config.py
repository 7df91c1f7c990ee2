"""YAML scenario files: strict schema, presets and construction of runnable scenarios.

Field names carry their units. Unknown keys are rejected, so a misspelled gain
fails loudly instead of silently falling back to a default.
"""
from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .robot import (PAPER_ALPHA, PAPER_DAMPING, PAPER_GAMMA, PAPER_LENGTH, PAPER_MASS,
                    PAPER_STIFFNESS, FixedBase, FloatingBase, Material, RobotDescription, Segment)

Vec2 = tuple[float, float]
Vec3 = tuple[float, float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------------------------------------------------------------- robot

class MaterialFile(_Strict):
    kappa: float = Field(gt=0)
    beta: float = Field(gt=0)
    delta_m: float = Field(gt=0)


class SegmentFile(_Strict):
    length_m: float = Field(gt=0)
    mass_kg: float = Field(gt=0)
    stiffness_Nm: Optional[float] = Field(default=None, gt=0)
    damping_Nms: Optional[float] = Field(default=None, ge=0)
    material: Optional[MaterialFile] = None

    @model_validator(mode="after")
    def _one_source(self):
        direct = self.stiffness_Nm is not None or self.damping_Nms is not None
        if direct and self.material is not None:
            raise ValueError("give stiffness_Nm/damping_Nms or material, not both")
        if not direct and self.material is None:
            raise ValueError("stiffness_Nm and damping_Nms (or material) are required")
        if direct and (self.stiffness_Nm is None or self.damping_Nms is None):
            raise ValueError("stiffness_Nm and damping_Nms must be given together")
        return self


class FixedBaseFile(_Strict):
    pose: Vec3 = (0.0, 0.0, 0.0)


class FloatingBaseFile(_Strict):
    mass_kg: float = Field(gt=0)
    inertia_kgm2: float = Field(gt=0)
    mount: Vec3 = (0.0, 0.0, 0.0)


class BaseFile(_Strict):
    fixed: Optional[FixedBaseFile] = None
    floating: Optional[FloatingBaseFile] = None

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.fixed is None) == (self.floating is None):
            raise ValueError("base must be exactly one of 'fixed' or 'floating'")
        return self


class RobotFile(_Strict):
    segments: list[SegmentFile] = Field(min_length=1)
    gravity_mps2: Vec2 = (0.0, 0.0)
    base: BaseFile = BaseFile(fixed=FixedBaseFile())

    def build(self) -> RobotDescription:
        segs = []
        for s in self.segments:
            if s.material is not None:
                m = s.material
                segs.append(Segment(s.length_m, s.mass_kg, material=Material(m.kappa, m.beta, m.delta_m)))
            else:
                segs.append(Segment(s.length_m, s.mass_kg, s.stiffness_Nm, s.damping_Nms))
        if self.base.floating is not None:
            f = self.base.floating
            base = FloatingBase(f.mass_kg, f.inertia_kgm2, f.mount)
        else:
            base = FixedBase(self.base.fixed.pose)
        return RobotDescription(tuple(segs), self.gravity_mps2, base)


def paper_robot_file(n: int = 5, pose: Vec3 = (0.0, 0.0, float(np.pi / 2))) -> RobotFile:
    seg = SegmentFile(length_m=PAPER_LENGTH, mass_kg=PAPER_MASS,
                      stiffness_Nm=PAPER_STIFFNESS, damping_Nms=PAPER_DAMPING)
    return RobotFile(segments=[seg] * n, base=BaseFile(fixed=FixedBaseFile(pose=pose)))


# ---------------------------------------------------------------- controllers

class CurvatureFile(_Strict):
    type: Literal["curvature"] = "curvature"
    reference: Literal["js_tj"] = "js_tj"
    I_q_Nms: list[float] = Field(default=[0.0], min_length=1)
    windup_limit_Nm: float = Field(default=10.0, gt=0)


class PIDFile(_Strict):
    type: Literal["pid"] = "pid"
    reference: Literal["js_tj"] = "js_tj"
    kP_Nm: float = Field(default=2.0, ge=0)
    kI_Nms: float = Field(default=1.0, ge=0)
    kD_Nms: float = Field(default=10.0, ge=0)


class SurfaceFollowFile(_Strict):
    type: Literal["surface_follow"] = "surface_follow"
    x0_m: Vec2
    xt_m: Vec2
    delta_m: float = Field(default=0.05, gt=0)
    eps_m: float = Field(default=0.01, gt=0)
    K_c_Npm: Vec2 = (13.0, 13.0)
    D_c_Nspm: Vec2 = (6.0, 6.0)
    I_c_Nps: float = Field(default=1.9, ge=0)
    windup_limit_N: float = Field(default=10.0, gt=0)


class BaseCycleFile(_Strict):
    amplitude_deg: float = 15.0
    period_s: float = Field(default=8.0, gt=0)


class HierarchyFile(_Strict):
    type: Literal["hierarchy"] = "hierarchy"
    gains: Literal["static", "dynamic"] = "static"
    tip_position_m: Optional[Vec2] = None  # None: tip position at q0
    tip_angle_rad: Optional[float] = None  # None: tip angle at q0
    base_angle_rad: float = 0.0
    base_cycle: Optional[BaseCycleFile] = None
    inject_sigma: float = Field(default=0.0, ge=0)


class ZeroFile(_Strict):
    type: Literal["zero"] = "zero"


ControllerFile = Annotated[Union[CurvatureFile, PIDFile, SurfaceFollowFile, HierarchyFile, ZeroFile],
                           Field(discriminator="type")]


# ---------------------------------------------------------------- environment and run

class WallFile(_Strict):
    a_m: Vec2
    b_m: Vec2
    normal: Optional[Vec2] = None
    k_wall_Npm: float = Field(default=1e4, ge=0)
    c_wall_Nspm: float = Field(default=50.0, ge=0)


class DisturbanceFile(_Strict):
    start_s: float = Field(ge=0)
    duration_s: float = Field(gt=0)
    force_N: Vec2
    point: Literal["tip", "base"] = "tip"


class HardwareFile(_Strict):
    alpha_per_Nm: list[float] = Field(min_length=1)
    gamma_s: list[float] = Field(min_length=1)
    prefilter: bool = True


class SimulationFile(_Strict):
    duration_s: float = Field(gt=0)
    dt_s: float = Field(default=1e-3, gt=0)
    control_period_s: float = Field(default=0.015, gt=0)
    integrator: Literal["rk4", "radau", "energy"] = "radau"
    plant_mismatch: float = Field(default=1.10, gt=0)
    hardware: Optional[HardwareFile] = None
    q0_rad: Optional[list[float]] = None  # None: at rest, straight (or on the reference)
    qd0_radps: Optional[list[float]] = None

    @model_validator(mode="after")
    def _steps(self):
        if self.dt_s > self.control_period_s * (1 + 1e-12):
            raise ValueError("dt_s must not exceed control_period_s")
        return self


class ScenarioFile(_Strict):
    name: str = "scenario"
    robot: RobotFile
    controller: ControllerFile
    simulation: SimulationFile
    walls: list[WallFile] = []
    disturbances: list[DisturbanceFile] = []
    seed: int = 0


# ---------------------------------------------------------------- parsing

def _config_error(exc: ValidationError) -> ConfigError:
    err = exc.errors()[0]
    loc = ".".join(str(p) for p in err["loc"])
    return ConfigError(err["msg"], loc)


def parse_scenario(data: dict) -> ScenarioFile:
    try:
        return ScenarioFile.model_validate(data)
    except ValidationError as exc:
        raise _config_error(exc) from exc


def parse_robot(data: dict) -> RobotFile:
    try:
        return RobotFile.model_validate(data)
    except ValidationError as exc:
        raise _config_error(exc) from exc


def load_yaml(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "path") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})", "yaml") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping at top level", "yaml")
    return data


def to_yaml(model: BaseModel) -> str:
    return yaml.safe_dump(model.model_dump(mode="json"), sort_keys=False)


# ---------------------------------------------------------------- presets

SURFACE_WALL = WallFile(a_m=(0.22, 0.0), b_m=(0.22, 0.35), normal=(-1.0, 0.0))
OMAV_ARM = [SegmentFile(length_m=0.125, mass_kg=0.19, stiffness_Nm=PAPER_STIFFNESS, damping_Nms=PAPER_DAMPING),
            SegmentFile(length_m=0.125, mass_kg=0.16, stiffness_Nm=PAPER_STIFFNESS, damping_Nms=PAPER_DAMPING)]


def _preset_curvature() -> ScenarioFile:
    return ScenarioFile(
        name="curvature-tracking",
        robot=paper_robot_file(),
        controller=CurvatureFile(I_q_Nms=[0.0, 0.08, 0.3]),
        simulation=SimulationFile(duration_s=6.0),
    )


def _preset_surface() -> ScenarioFile:
    return ScenarioFile(
        name="surface-follow",
        robot=paper_robot_file(),
        controller=SurfaceFollowFile(x0_m=(0.283, 0.135), xt_m=(0.22, 0.16)),
        simulation=SimulationFile(duration_s=8.0,
                                  hardware=HardwareFile(alpha_per_Nm=list(PAPER_ALPHA), gamma_s=list(PAPER_GAMMA))),
        walls=[SURFACE_WALL],
    )


def _preset_hierarchy() -> ScenarioFile:
    bend = float(np.deg2rad(7.5))  # 15 deg tip bend split over two segments
    return ScenarioFile(
        name="hierarchy-demo",
        robot=RobotFile(segments=OMAV_ARM, gravity_mps2=(0.0, -9.81),
                        base=BaseFile(floating=FloatingBaseFile(mass_kg=3.67, inertia_kgm2=0.139,
                                                                mount=(0.0, -0.05, float(-np.pi / 2))))),
        controller=HierarchyFile(base_cycle=BaseCycleFile()),
        simulation=SimulationFile(duration_s=16.0, control_period_s=0.005, plant_mismatch=1.0,
                                  q0_rad=[0.0, 0.0, 0.0, bend, bend]),
        disturbances=[DisturbanceFile(start_s=10.0, duration_s=1.0, force_N=(1.0, 1.0), point="base")],
    )


PRESETS = {
    "curvature-tracking": _preset_curvature,
    "surface-follow": _preset_surface,
    "hierarchy-demo": _preset_hierarchy,
}


def preset(name: str) -> ScenarioFile:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}", "preset") from None


# ---------------------------------------------------------------- construction

def build_scenarios(cfg: ScenarioFile) -> list[tuple[str, "Scenario"]]:
    """Runnable scenarios for a file; a list of integral gains yields one run per gain."""
    from . import controllers as C
    from .dynamics import SoftRobotModel
    from .simulation import Disturbance, HardwareModel, Scenario, Wall, ZeroController
    from .task_priority import HierarchyController, base_cycle, omav_task_set

    robot = cfg.robot.build()
    model = SoftRobotModel(robot)
    sim = cfg.simulation
    for name, vec in (("simulation.q0_rad", sim.q0_rad), ("simulation.qd0_radps", sim.qd0_radps)):
        if vec is not None and len(vec) != robot.dof:
            raise ConfigError(f"expected {robot.dof} values, got {len(vec)}", name)
    q0 = None if sim.q0_rad is None else np.array(sim.q0_rad)
    hw = None
    if sim.hardware is not None:
        hw = HardwareModel(tuple(sim.hardware.alpha_per_Nm), tuple(sim.hardware.gamma_s), sim.hardware.prefilter)
    walls = tuple(Wall(w.a_m, w.b_m, w.normal, w.k_wall_Npm, w.c_wall_Nspm) for w in cfg.walls)
    dists = tuple(Disturbance(d.start_s, d.duration_s, d.force_N, d.point) for d in cfg.disturbances)
    c = cfg.controller

    def scenario(ctrl, q_start, label):
        return Scenario(robot, ctrl, sim.duration_s, sim.dt_s, sim.control_period_s, walls, dists,
                        sim.plant_mismatch, hw, sim.integrator, q_start,
                        None if sim.qd0_radps is None else np.array(sim.qd0_radps), cfg.seed,
                        f"{cfg.name}:{label}" if label else cfg.name)

    def js_tj(t):
        return C.reference_js_tj(t, robot.dof)

    if c.type in ("curvature", "pid") and robot.floating:
        raise ConfigError("curvature-space references need a fixed base", "controller.type")
    if c.type == "curvature":
        q_start = js_tj(0.0).q if q0 is None else q0
        return [(f"I_q={g:g}", scenario(C.CurvatureController(model, js_tj, C.CurvatureGains(g, c.windup_limit_Nm)),
                                        q_start, f"I_q={g:g}")) for g in c.I_q_Nms]
    if c.type == "pid":
        q_start = js_tj(0.0).q if q0 is None else q0
        return [("", scenario(C.PIDController(model, js_tj, C.PIDGains(c.kP_Nm, c.kI_Nms, c.kD_Nms)), q_start, ""))]
    if c.type == "surface_follow":
        gains = C.CartesianGains(np.diag(c.K_c_Npm), np.diag(c.D_c_Nspm), c.I_c_Nps, c.windup_limit_N)
        ctrl = C.SurfaceFollowController(model, c.x0_m, c.xt_m, c.delta_m, c.eps_m, gains)
        return [("", scenario(ctrl, q0, ""))]
    if c.type == "hierarchy":
        if not robot.floating:
            raise ConfigError("the hierarchy controller needs a floating base", "robot.base")
        q_ref = np.zeros(robot.dof) if q0 is None else q0
        x_tip, phi_tip = model.tip_pose(q_ref)
        x_d = x_tip if c.tip_position_m is None else np.array(c.tip_position_m)
        phi_d = phi_tip if c.tip_angle_rad is None else c.tip_angle_rad
        theta = c.base_angle_rad
        if c.base_cycle is not None:
            theta = base_cycle(np.deg2rad(c.base_cycle.amplitude_deg), c.base_cycle.period_s, c.base_angle_rad)
        tasks = omav_task_set(model, phi_d, x_d, theta, c.gains)
        return [("", scenario(HierarchyController(model, tasks, c.inject_sigma), q0, ""))]
    return [("", scenario(ZeroController(model), q0, ""))]
