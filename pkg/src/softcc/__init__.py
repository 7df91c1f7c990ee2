"""Planar piecewise-constant-curvature soft arms: modelling, control, simulation and identification."""
from .dynamics import DynamicsEval, SoftRobotModel, project_dynamics
from .errors import (ConfigError, DomainError, IdentificationError, IntegrationError,
                     SingularTaskError, SoftCCError)
from .robot import FixedBase, FloatingBase, Material, RobotDescription, Segment, paper_arm
from .simulation import Disturbance, HardwareModel, Scenario, TimeSeries, Wall, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "Disturbance", "DomainError", "DynamicsEval", "FixedBase", "FloatingBase",
    "HardwareModel", "IdentificationError", "IntegrationError", "Material", "RobotDescription",
    "Scenario", "Segment", "SingularTaskError", "SoftRobotModel", "SoftCCError", "TimeSeries",
    "Wall", "paper_arm", "project_dynamics", "run_scenario",
]
