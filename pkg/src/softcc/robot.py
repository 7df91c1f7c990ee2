"""Robot description: segments, material, gravity and base."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .kinematics import PlanarTransform, SegmentGeometry

# Identified lumped parameters of the five-segment planar arm.
PAPER_LENGTH = 0.063
PAPER_MASS = 0.034
PAPER_STIFFNESS = 0.56
PAPER_DAMPING = 0.1066
PAPER_ALPHA = (0.16e-3, 0.24e-3, 0.2e-3, 0.25e-3, 0.23e-3)
PAPER_GAMMA = (0.1, 0.25, 0.1, 0.1, 0.1)


@dataclass(frozen=True)
class Material:
    """Continuum material constants; lumped gains follow as (4/3) c Delta^3."""

    kappa: float
    beta: float
    delta: float


@dataclass(frozen=True)
class Segment:
    length: float
    mass: float
    stiffness: float | None = None
    damping: float | None = None
    material: Material | None = None

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigError(f"must be > 0, got {self.length}", "length_m")
        if not self.mass > 0:
            raise ConfigError(f"must be > 0, got {self.mass}", "mass_kg")
        direct = self.stiffness is not None or self.damping is not None
        if direct and self.material is not None:
            raise ConfigError("give stiffness/damping directly or via material, not both", "material")
        if not direct and self.material is None:
            raise ConfigError("stiffness/damping or material is required", "stiffness_Nm")
        if direct:
            if self.stiffness is None or not self.stiffness > 0:
                raise ConfigError(f"must be > 0, got {self.stiffness}", "stiffness_Nm")
            if self.damping is None or not self.damping >= 0:
                raise ConfigError(f"must be >= 0, got {self.damping}", "damping_Nms")
        else:
            m = self.material
            for name, v in (("kappa", m.kappa), ("beta", m.beta), ("delta_m", m.delta)):
                if not v > 0:
                    raise ConfigError(f"must be > 0, got {v}", f"material.{name}")

    @property
    def geometry(self) -> SegmentGeometry:
        radius = self.material.delta if self.material is not None else 0.01
        return SegmentGeometry(self.length, radius)


@dataclass(frozen=True)
class FixedBase:
    pose: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class FloatingBase:
    """Planar rigid body carrying the arm; the arm is mounted at ``mount`` in body coordinates."""

    mass: float
    inertia: float
    mount: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigError(f"must be > 0, got {self.mass}", "base.floating.mass_kg")
        if not self.inertia > 0:
            raise ConfigError(f"must be > 0, got {self.inertia}", "base.floating.inertia_kgm2")


@dataclass(frozen=True)
class RobotDescription:
    segments: tuple[Segment, ...]
    gravity: tuple[float, float] = (0.0, 0.0)
    base: FixedBase | FloatingBase = field(default_factory=FixedBase)

    def __post_init__(self):
        if len(self.segments) < 1:
            raise ConfigError("at least one segment is required", "segments")
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def n(self) -> int:
        """Number of CC segments."""
        return len(self.segments)

    @property
    def floating(self) -> bool:
        return isinstance(self.base, FloatingBase)

    @property
    def dof(self) -> int:
        """Generalized coordinates: base pose (if floating) followed by curvatures."""
        return self.n + (3 if self.floating else 0)

    @property
    def arm_slice(self) -> slice:
        return slice(3, None) if self.floating else slice(0, None)

    @property
    def lengths(self) -> np.ndarray:
        return np.array([s.length for s in self.segments])

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.segments])

    @property
    def geometry(self) -> list[SegmentGeometry]:
        return [s.geometry for s in self.segments]

    @property
    def gravity_vector(self) -> np.ndarray:
        return np.asarray(self.gravity, dtype=float)

    def base_transform(self, q=None) -> PlanarTransform:
        """Pose of {S_0}, the arm's root frame, in the world."""
        if not self.floating:
            x, y, th = self.base.pose
            return PlanarTransform(th, (x, y))
        if q is None:
            raise ValueError("floating base needs the generalized coordinates")
        body = PlanarTransform(float(q[2]), (float(q[0]), float(q[1])))
        mx, my, mth = self.base.mount
        return body @ PlanarTransform(mth, (mx, my))

    def arm_q(self, q) -> np.ndarray:
        return np.asarray(q, dtype=float)[self.arm_slice]

    def scaled(self, mass_factor: float = 1.0, stiffness_factor: float = 1.0) -> "RobotDescription":
        """Copy with segment masses and stiffness scaled (plant-mismatch knob)."""
        segs = []
        for s in self.segments:
            if s.material is not None:
                m = replace(s.material, kappa=s.material.kappa * stiffness_factor)
                segs.append(replace(s, mass=s.mass * mass_factor, material=m))
            else:
                segs.append(replace(s, mass=s.mass * mass_factor, stiffness=s.stiffness * stiffness_factor))
        base = self.base
        if isinstance(base, FloatingBase):
            base = replace(base, mass=base.mass * mass_factor, inertia=base.inertia * mass_factor)
        return replace(self, segments=tuple(segs), base=base)


def paper_arm(n: int = 5, gravity=(0.0, 0.0), base=None) -> RobotDescription:
    """The identified planar arm: 0.063 m, 0.034 kg segments, k = 0.56 N m, d = 0.1066 N m s."""
    seg = Segment(PAPER_LENGTH, PAPER_MASS, PAPER_STIFFNESS, PAPER_DAMPING)
    return RobotDescription((seg,) * n, tuple(gravity), base if base is not None else FixedBase())
