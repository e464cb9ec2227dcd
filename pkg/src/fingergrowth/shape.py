"""Generalized Procrustes Analysis, tangent-space PCA and the
variance-explained-by-size isotropy detector.

Full GPA removes translation, rotation and scale (tangent dimension 2m-4);
partial GPA removes only translation and rotation (tangent dimension 2m-3),
so aligned configurations retain their centroid size.
"""
from __future__ import annotations

import enum
import math
import statistics
from dataclasses import dataclass

import numpy as np

from .core_types import Dataset, ImprintKind
from .errors import DegenerateVarianceError, NumericalError, ValidationError
from .geometry import as_config, spread

MAX_GPA_ITERATIONS = 1000
GPA_TOL = 1e-10


class GpaMode(enum.Enum):
    FULL = "full"
    PARTIAL = "partial"


@dataclass(frozen=True)
class GpaResult:
    mean_shape: np.ndarray          # (m, 2), barycenter zero
    aligned: list[np.ndarray]       # per config, (m, 2)
    tangent_coords: np.ndarray      # (n_configs, 2m), columns centered
    mode: GpaMode
    sizes: np.ndarray               # centroid size of each original config


@dataclass(frozen=True)
class IsotropyRow:
    person_id: str
    finger_id: str
    n_configs: int
    pc1_fraction_full: float
    size_fraction_full: float
    pc1_fraction_partial: float
    size_fraction_partial: float


@dataclass(frozen=True)
class IsotropyReport:
    rows: list[IsotropyRow]
    median_pc1_full: float
    median_size_full: float
    median_pc1_partial: float
    median_size_partial: float


def _center(pts: np.ndarray) -> np.ndarray:
    return pts - pts.mean(axis=0)


def _rotate_to(a: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Optimal rotation (no reflection) of centered a onto centered target."""
    cross = float(np.sum(a[:, 0] * target[:, 1] - a[:, 1] * target[:, 0]))
    dot = float(np.sum(a[:, 0] * target[:, 0] + a[:, 1] * target[:, 1]))
    theta = 0.0 if (cross == 0.0 and dot == 0.0) else math.atan2(cross, dot)
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return a @ rot.T


def _tangent_basis(mean: np.ndarray, mode: GpaMode) -> np.ndarray:
    """Orthonormal basis of the transformation directions removed at the mean.

    Translation x/y, rotation, and (full mode only) the scaling direction.
    """
    m = mean.shape[0]
    t1 = np.zeros(2 * m)
    t1[0::2] = 1.0 / math.sqrt(m)
    t2 = np.zeros(2 * m)
    t2[1::2] = 1.0 / math.sqrt(m)
    mu = mean.ravel()
    rot = np.empty(2 * m)
    rot[0::2] = -mean[:, 1]
    rot[1::2] = mean[:, 0]
    basis = [t1, t2]
    nrm = np.linalg.norm(rot)
    if nrm > 0:
        basis.append(rot / nrm)
    nrm = np.linalg.norm(mu)
    if mode is GpaMode.FULL and nrm > 0:
        basis.append(mu / nrm)
    return np.array(basis)


def _canonical_rotation(mean: np.ndarray) -> np.ndarray:
    """Rotation (det +1) bringing the mean's principal axis onto x, with the
    axis direction chosen so the third moment along x is positive."""
    _, evecs = np.linalg.eigh(mean.T @ mean)
    v = evecs[:, -1]
    theta = math.atan2(v[1], v[0])
    c, s = math.cos(-theta), math.sin(-theta)
    rot = np.array([[c, -s], [s, c]])
    m = mean @ rot.T
    sx = float(np.sum(m[:, 0] ** 3))
    sy = float(np.sum(m[:, 1] ** 3))
    if sx < 0 or (sx == 0 and sy < 0):
        rot = -rot  # rotate by a further pi
    return rot


def gpa(configs, mode: GpaMode) -> GpaResult:
    """Iterative Procrustes alignment of >= 2 corresponding configurations."""
    if isinstance(mode, str):
        mode = GpaMode(mode)
    pts = [as_config(c) for c in configs]
    if len(pts) < 2:
        raise ValidationError(f"GPA needs >= 2 configurations, got {len(pts)}")
    m = pts[0].shape[0]
    for i, p in enumerate(pts):
        if p.shape[0] != m:
            raise ValidationError(f"point counts differ: config 0 has {m}, config {i} has {p.shape[0]}")
    sizes = np.array([spread(p) for p in pts])
    if np.any(sizes == 0.0):
        raise ValidationError("degenerate configuration with zero spread")

    centered = [_center(p) for p in pts]
    if mode is GpaMode.FULL:
        work = [c / s for c, s in zip(centered, sizes)]
    else:
        work = centered
    mean = work[0].copy()
    if mode is GpaMode.FULL:
        mean /= np.linalg.norm(mean)

    for _ in range(MAX_GPA_ITERATIONS):
        aligned = [_rotate_to(w, mean) for w in work]
        new_mean = _center(np.mean(aligned, axis=0))
        if mode is GpaMode.FULL:
            nrm = np.linalg.norm(new_mean)
            if nrm == 0.0:
                raise NumericalError("GPA mean collapsed to zero")
            new_mean = new_mean / nrm
        change = float(np.linalg.norm(new_mean - mean))
        mean = new_mean
        if change < GPA_TOL:
            break
    else:
        raise NumericalError(f"GPA did not converge in {MAX_GPA_ITERATIONS} iterations")

    # fix the rotation gauge: principal axis of the mean along x, sign of the
    # axes set by third moments, so results do not depend on input pose
    rot = _canonical_rotation(mean)
    mean = mean @ rot.T
    work = [w @ rot.T for w in work]

    aligned = [_rotate_to(w, mean) for w in work]
    basis = _tangent_basis(mean, mode)
    resid = np.array([(a - mean).ravel() for a in aligned])
    resid -= (resid @ basis.T) @ basis
    resid -= resid.mean(axis=0)
    return GpaResult(mean, aligned, resid, mode, sizes)


def pc_variance_fractions(g: GpaResult) -> np.ndarray:
    """Eigenvalue fractions of the tangent-coordinate covariance, descending."""
    x = g.tangent_coords
    if x.shape[0] < 2:
        raise ValidationError("need >= 2 configurations for variance fractions")
    sv = np.linalg.svd(x, compute_uv=False)
    ev = sv ** 2
    total = float(ev.sum())
    if total <= 0.0 or not np.isfinite(total):
        raise DegenerateVarianceError("zero total variance: all shapes identical")
    return ev / total


def variance_explained_by_size(g: GpaResult) -> float:
    """Fraction of total tangent variance explained by regression on size.

    Each tangent coordinate is regressed on centered size with intercept;
    the fraction is total explained sum of squares over total sum of squares.
    """
    x = g.tangent_coords
    z = g.sizes - g.sizes.mean()
    szz = float(z @ z)
    if szz == 0.0:
        raise DegenerateVarianceError("constant size across configurations")
    tss = float(np.sum(x ** 2))
    if tss == 0.0:
        raise DegenerateVarianceError("zero total variance: all shapes identical")
    ess = float(np.sum((x.T @ z) ** 2)) / szz
    return ess / tss


def isotropy_report(d: Dataset) -> IsotropyReport:
    """Per-finger full/partial GPA size analysis on rolled imprints (> 2 COs)."""
    if not d.correspondence:
        raise ValidationError("isotropy analysis requires a correspondence dataset")
    rows = []
    for person in d.persons:
        rolled = [co.templates[ImprintKind.ROLLED]
                  for co in person.checkouts if ImprintKind.ROLLED in co.templates]
        if len(rolled) <= 2:
            continue
        configs = [t.coords() for t in rolled]
        full = gpa(configs, GpaMode.FULL)
        partial = gpa(configs, GpaMode.PARTIAL)
        rows.append(IsotropyRow(
            person_id=person.person_id,
            finger_id=rolled[0].finger_id.value,
            n_configs=len(configs),
            pc1_fraction_full=float(pc_variance_fractions(full)[0]),
            size_fraction_full=variance_explained_by_size(full),
            pc1_fraction_partial=float(pc_variance_fractions(partial)[0]),
            size_fraction_partial=variance_explained_by_size(partial),
        ))
    if not rows:
        raise ValidationError("no finger with more than two check-outs")
    return IsotropyReport(
        rows=rows,
        median_pc1_full=statistics.median(r.pc1_fraction_full for r in rows),
        median_size_full=statistics.median(r.size_fraction_full for r in rows),
        median_pc1_partial=statistics.median(r.pc1_fraction_partial for r in rows),
        median_size_partial=statistics.median(r.size_fraction_partial for r in rows),
    )
