"""Planar constant-curvature segment transforms and PCC chain kinematics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError

# Below this |q| the 0/0 forms are replaced by their Taylor expansions.
SERIES_THRESHOLD = 1e-4


@dataclass(frozen=True)
class SegmentGeometry:
    length: float
    section_radius: float = 0.01

    def __post_init__(self):
        if not (self.length > 0 and np.isfinite(self.length)):
            raise DomainError(f"segment length must be > 0, got {self.length}")
        if not (self.section_radius > 0 and np.isfinite(self.section_radius)):
            raise DomainError(f"section radius must be > 0, got {self.section_radius}")


@dataclass(frozen=True)
class PlanarTransform:
    """Rigid planar pose: rotation angle (rad) and translation (m)."""

    angle: float = 0.0
    translation: tuple[float, float] = (0.0, 0.0)

    @classmethod
    def identity(cls) -> "PlanarTransform":
        return cls()

    @classmethod
    def from_matrix(cls, T: np.ndarray) -> "PlanarTransform":
        T = np.asarray(T, dtype=float)
        return cls(float(np.arctan2(T[1, 0], T[0, 0])), (float(T[0, 2]), float(T[1, 2])))

    @property
    def position(self) -> np.ndarray:
        return np.array(self.translation, dtype=float)

    @property
    def rotation(self) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def matrix(self) -> np.ndarray:
        T = np.eye(3)
        T[:2, :2] = self.rotation
        T[:2, 2] = self.translation
        return T

    def compose(self, other: "PlanarTransform") -> "PlanarTransform":
        """Return ``self * other`` (apply ``other`` in the frame of ``self``)."""
        p = self.position + self.rotation @ other.position
        return PlanarTransform(self.angle + other.angle, (float(p[0]), float(p[1])))

    __matmul__ = compose

    def inverse(self) -> "PlanarTransform":
        p = -(self.rotation.T @ self.position)
        return PlanarTransform(-self.angle, (float(p[0]), float(p[1])))

    def apply(self, point) -> np.ndarray:
        return self.position + self.rotation @ np.asarray(point, dtype=float)


def _check_finite(*values):
    for v in values:
        if not np.all(np.isfinite(v)):
            raise DomainError(f"non-finite input: {v!r}")


def sin_over_q(q: float) -> float:
    """sin(q)/q, continuous at 0."""
    if abs(q) < SERIES_THRESHOLD:
        q2 = q * q
        return 1.0 - q2 / 6.0 + q2 * q2 / 120.0
    return np.sin(q) / q


def one_minus_cos_over_q(q: float) -> float:
    """(1 - cos q)/q, continuous at 0 (written as 2 sin^2(q/2)/q to avoid cancellation)."""
    if abs(q) < SERIES_THRESHOLD:
        q2 = q * q
        return q / 2.0 - q * q2 / 24.0 + q * q2 * q2 / 720.0
    s = np.sin(0.5 * q)
    return 2.0 * s * s / q


def segment_transform(q: float, length: float) -> PlanarTransform:
    """Pose of the end frame of a constant-curvature segment in its base frame.

    Args:
        q: degree of curvature (rad), the rotation between the two end frames.
        length: backbone length (m).
    """
    _check_finite(q, length)
    if length <= 0:
        raise DomainError(f"segment length must be > 0, got {length}")
    q = float(q)
    return PlanarTransform(q, (length * sin_over_q(q), length * one_minus_cos_over_q(q)))


def _as_geometry(geometry) -> list[SegmentGeometry]:
    out = []
    for g in geometry:
        if isinstance(g, SegmentGeometry):
            out.append(g)
        else:
            out.append(SegmentGeometry(float(g)))
    return out


def chain_poses(q: Sequence[float], geometry, base: PlanarTransform | None = None) -> list[PlanarTransform]:
    """Frames {S_0}, ..., {S_n} of a PCC chain.

    ``geometry`` is a sequence of :class:`SegmentGeometry` or plain lengths.
    Element 0 of the result is ``base``.
    """
    q = np.asarray(q, dtype=float).reshape(-1)
    geometry = _as_geometry(geometry)
    if len(q) != len(geometry):
        raise DomainError(f"q has {len(q)} entries but {len(geometry)} segments were given")
    _check_finite(q)
    pose = base if base is not None else PlanarTransform.identity()
    poses = [pose]
    for qi, g in zip(q, geometry):
        pose = pose @ segment_transform(qi, g.length)
        poses.append(pose)
    return poses


def tip_position(q, geometry, base: PlanarTransform | None = None) -> np.ndarray:
    return chain_poses(q, geometry, base)[-1].position
