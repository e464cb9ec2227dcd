"""Size measure, rigid alignment and distances on 2-D point configurations.

A point configuration is an (n, 2) float array in mm, n >= 3.  All functions
are pure; rigid alignment is closed form (no reflections, determinant +1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def as_config(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError(f"point configuration must be (n, 2), got shape {pts.shape}")
    if pts.shape[0] < 3:
        raise ValidationError(f"point configuration needs >= 3 points, got {pts.shape[0]}")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("point configuration contains non-finite coordinates")
    return pts


@dataclass(frozen=True)
class RigidTransform:
    """Rotation (radians, in (-pi, pi]) followed by translation, no reflection."""
    rotation: float
    translation: tuple[float, float]

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        return np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.matrix().T + np.asarray(self.translation)


IDENTITY = RigidTransform(0.0, (0.0, 0.0))


def barycenter(c) -> np.ndarray:
    pts = as_config(c)
    return pts.mean(axis=0)


def spread(c) -> float:
    """Centroid size: sqrt of summed squared distances to the barycenter."""
    pts = as_config(c)
    centered = pts - pts.mean(axis=0)
    return float(np.sqrt(np.sum(centered ** 2)))


def smsd(a, b) -> float:
    """Square root of the mean of squared distances between corresponding points."""
    pa, pb = as_config(a), as_config(b)
    if pa.shape != pb.shape:
        raise ValidationError(f"point counts differ: {pa.shape[0]} vs {pb.shape[0]}")
    return float(np.sqrt(np.mean(np.sum((pa - pb) ** 2, axis=1))))


def _wrap_angle(theta: float) -> float:
    theta = math.remainder(theta, 2.0 * math.pi)
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    return theta


def rigid_align(src, dst) -> tuple[RigidTransform, float]:
    """Rotation+translation minimizing the SMSD of transformed src vs dst.

    Closed form: center both configurations, take the rotation angle
    atan2(sum of cross products, sum of dot products).  Degenerate inputs
    (both configurations concentrated in a point) resolve to rotation 0.
    """
    ps, pd = as_config(src), as_config(dst)
    if ps.shape != pd.shape:
        raise ValidationError(f"point counts differ: {ps.shape[0]} vs {pd.shape[0]}")
    cs, cd = ps.mean(axis=0), pd.mean(axis=0)
    a, b = ps - cs, pd - cd
    cross = float(np.sum(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]))
    dot = float(np.sum(a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]))
    theta = 0.0 if (cross == 0.0 and dot == 0.0) else math.atan2(cross, dot)
    theta = _wrap_angle(theta)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    translation = cd - rot @ cs
    transform = RigidTransform(theta, (float(translation[0]), float(translation[1])))
    return transform, smsd(transform.apply(ps), pd)


def apply_similarity(c, scale: float, t: RigidTransform) -> np.ndarray:
    """Map each point p -> R(rotation) @ (scale * p) + translation."""
    if scale <= 0:
        raise ValidationError(f"scale must be positive, got {scale}")
    return t.apply(scale * as_config(c))
