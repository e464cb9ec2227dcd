"""Minutiae matcher with score normalization and sum-rule fusion.

Scoring is deterministic: rigid alignment hypotheses are generated from
distance-consistent pairs of minutia pairs, each hypothesis is evaluated by
greedy one-to-one assignment within a tolerance radius, and the best matched
count wins.  score = matched_count^2 / (n_query * n_reference), so identical
templates score 1.  Minutia kinds must agree for a pair; unknown matches
anything.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core_types import MinutiaKind, Template
from .errors import DegenerateScoresError, ValidationError
from .geometry import RigidTransform
from .growth import ScaleFactor, rescale_template

KIND_CODES = {
    MinutiaKind.UNKNOWN: 0,
    MinutiaKind.RIDGE_ENDING: 1,
    MinutiaKind.BIFURCATION: 2,
    MinutiaKind.SINGULAR_POINT: 3,
}


@dataclass(frozen=True)
class MatchParams:
    radius_mm: float = 0.8        # assignment tolerance after alignment
    pair_tol_mm: float = 0.8      # max pair-length discrepancy for a hypothesis
    max_hypotheses: int = 200

    def __post_init__(self):
        if self.radius_mm <= 0 or self.pair_tol_mm <= 0 or self.max_hypotheses < 1:
            raise ValidationError(f"invalid matching parameters: {self}")


DEFAULT_PARAMS = MatchParams()


@dataclass(frozen=True)
class MatchScore:
    value: float
    matched_count: int
    transform: RigidTransform


@njit(cache=True)
def _count_matches(qx, qy, qk, rx, ry, rk, radius, cd, cq, cr, used_q, used_r):
    """Greedy one-to-one assignment of transformed query to reference minutiae.

    Candidate pairs within the radius are taken in order of (distance,
    query index, reference index); each side is used at most once.
    cd/cq/cr/used_q/used_r are caller-provided scratch buffers.
    """
    nq, nr = qx.shape[0], rx.shape[0]
    nc = 0
    r2 = radius * radius
    for i in range(nq):
        for j in range(nr):
            if qk[i] != 0 and rk[j] != 0 and qk[i] != rk[j]:
                continue
            dx = qx[i] - rx[j]
            dy = qy[i] - ry[j]
            d2 = dx * dx + dy * dy
            if d2 <= r2:
                cd[nc] = d2
                cq[nc] = i
                cr[nc] = j
                nc += 1
    # lexicographic selection sort on (distance, query idx, ref idx)
    for a in range(nc - 1):
        best = a
        for b in range(a + 1, nc):
            if (cd[b] < cd[best]
                    or (cd[b] == cd[best]
                        and (cq[b] < cq[best]
                             or (cq[b] == cq[best] and cr[b] < cr[best])))):
                best = b
        if best != a:
            cd[a], cd[best] = cd[best], cd[a]
            cq[a], cq[best] = cq[best], cq[a]
            cr[a], cr[best] = cr[best], cr[a]
    used_q[:nq] = 0
    used_r[:nr] = 0
    count = 0
    for a in range(nc):
        i, j = cq[a], cr[a]
        if used_q[i] == 0 and used_r[j] == 0:
            used_q[i] = 1
            used_r[j] = 1
            count += 1
    return count


@njit(cache=True)
def _match_kernel(q, qk, r, rk, radius, pair_tol, max_hyp):
    """Best matched count over alignment hypotheses; returns
    (count, theta, tx, ty)."""
    nq, nr = q.shape[0], r.shape[0]
    # reference pair table sorted by length
    n_rp = nr * (nr - 1) // 2
    rp_i = np.empty(n_rp, dtype=np.int64)
    rp_j = np.empty(n_rp, dtype=np.int64)
    rp_len = np.empty(n_rp)
    k = 0
    for i in range(nr):
        for j in range(i + 1, nr):
            rp_i[k] = i
            rp_j[k] = j
            rp_len[k] = math.hypot(r[i, 0] - r[j, 0], r[i, 1] - r[j, 1])
            k += 1
    order = np.argsort(rp_len)
    rp_i = rp_i[order]
    rp_j = rp_j[order]
    rp_len = rp_len[order]

    # candidate hypotheses: query pair (a, b) matched to oriented ref pair;
    # collect all distance-consistent combinations, keep the best max_hyp
    n_qp = nq * (nq - 1) // 2
    qp_a = np.empty(n_qp, dtype=np.int64)
    qp_b = np.empty(n_qp, dtype=np.int64)
    qp_len = np.empty(n_qp)
    qp_lo = np.empty(n_qp, dtype=np.int64)
    qp_hi = np.empty(n_qp, dtype=np.int64)
    cap = 0
    k = 0
    for a in range(nq):
        for b in range(a + 1, nq):
            qlen = math.hypot(q[a, 0] - q[b, 0], q[a, 1] - q[b, 1])
            qp_a[k] = a
            qp_b[k] = b
            qp_len[k] = qlen
            if qlen <= 1e-9:
                qp_lo[k] = 0
                qp_hi[k] = 0
            else:
                qp_lo[k] = np.searchsorted(rp_len, qlen - pair_tol)
                qp_hi[k] = np.searchsorted(rp_len, qlen + pair_tol)
            cap += 2 * (qp_hi[k] - qp_lo[k])
            k += 1

    h_diff = np.empty(cap)
    h_qa = np.empty(cap, dtype=np.int64)
    h_qb = np.empty(cap, dtype=np.int64)
    h_ra = np.empty(cap, dtype=np.int64)
    h_rb = np.empty(cap, dtype=np.int64)
    nh = 0
    for k in range(n_qp):
        a, b = qp_a[k], qp_b[k]
        qlen = qp_len[k]
        for p in range(qp_lo[k], qp_hi[k]):
            if rp_len[p] <= 1e-9:
                continue
            diff = abs(qlen - rp_len[p])
            i, j = rp_i[p], rp_j[p]
            # two orientations; kinds of anchor pairs must be compatible
            for orient in range(2):
                ra, rb = (i, j) if orient == 0 else (j, i)
                if qk[a] != 0 and rk[ra] != 0 and qk[a] != rk[ra]:
                    continue
                if qk[b] != 0 and rk[rb] != 0 and qk[b] != rk[rb]:
                    continue
                h_diff[nh] = diff
                h_qa[nh] = a
                h_qb[nh] = b
                h_ra[nh] = ra
                h_rb[nh] = rb
                nh += 1

    # top-max_hyp hypotheses by distance consistency: O(n) partition, then
    # sort only the selected prefix
    if nh > max_hyp:
        thresh = np.partition(h_diff[:nh].copy(), max_hyp - 1)[max_hyp - 1]
        sel = np.empty(nh, dtype=np.int64)
        ns = 0
        for t in range(nh):
            if h_diff[t] <= thresh:
                sel[ns] = t
                ns += 1
        sel = sel[:ns]
    else:
        sel = np.arange(nh)
    horder = sel[np.argsort(h_diff[sel])]
    n_use = min(horder.shape[0], max_hyp)

    best_count = 0
    best_theta = 0.0
    best_tx = 0.0
    best_ty = 0.0
    n_min = min(nq, nr)
    qtx = np.empty(nq)
    qty = np.empty(nq)
    rx = r[:, 0].copy()
    ry = r[:, 1].copy()
    cd = np.empty(nq * nr)
    cq = np.empty(nq * nr, dtype=np.int64)
    cr = np.empty(nq * nr, dtype=np.int64)
    used_q = np.zeros(nq, dtype=np.uint8)
    used_r = np.zeros(nr, dtype=np.uint8)
    for hh in range(n_use):
        idx = horder[hh]
        a, b = h_qa[idx], h_qb[idx]
        ra, rb = h_ra[idx], h_rb[idx]
        theta = (math.atan2(r[rb, 1] - r[ra, 1], r[rb, 0] - r[ra, 0])
                 - math.atan2(q[b, 1] - q[a, 1], q[b, 0] - q[a, 0]))
        c, s = math.cos(theta), math.sin(theta)
        # map query anchor a onto reference anchor ra
        tx = r[ra, 0] - (c * q[a, 0] - s * q[a, 1])
        ty = r[ra, 1] - (s * q[a, 0] + c * q[a, 1])
        for m in range(nq):
            qtx[m] = c * q[m, 0] - s * q[m, 1] + tx
            qty[m] = s * q[m, 0] + c * q[m, 1] + ty
        count = _count_matches(qtx, qty, qk, rx, ry, rk, radius, cd, cq, cr, used_q, used_r)
        if count > best_count:
            best_count = count
            best_theta = theta
            best_tx = tx
            best_ty = ty
            if count == n_min:
                break
    return best_count, best_theta, best_tx, best_ty


def _template_arrays(t: Template):
    xy = np.ascontiguousarray(t.coords())
    kinds = np.array([KIND_CODES[m.kind] for m in t.minutiae], dtype=np.int64)
    return xy, kinds


def match_score(query: Template, reference: Template,
                params: MatchParams = DEFAULT_PARAMS) -> MatchScore:
    if len(query.minutiae) < 3 or len(reference.minutiae) < 3:
        raise ValidationError("matching needs templates with >= 3 minutiae")
    q, qk = _template_arrays(query)
    r, rk = _template_arrays(reference)
    count, theta, tx, ty = _match_kernel(
        q, qk, r, rk, params.radius_mm, params.pair_tol_mm, params.max_hypotheses)
    theta = math.remainder(theta, 2.0 * math.pi)
    if theta <= -math.pi:
        theta += 2.0 * math.pi
    value = count * count / (len(query.minutiae) * len(reference.minutiae))
    return MatchScore(float(value), int(count), RigidTransform(theta, (tx, ty)))


def best_over_factors(query: Template, reference: Template,
                      factors: list[ScaleFactor],
                      params: MatchParams = DEFAULT_PARAMS) -> MatchScore:
    """Maximum score over rescaled variants of the reference template."""
    if not factors:
        raise ValidationError("factor list must not be empty")
    best = None
    for f in factors:
        score = match_score(query, rescale_template(reference, f), params)
        if best is None or score.value > best.value:
            best = score
    return best


def normalize_scores(scores) -> np.ndarray:
    """Median/MAD normalization: s -> (s - median) / MAD."""
    arr = np.asarray(scores, dtype=float)
    if arr.size < 2:
        raise ValidationError("need >= 2 scores to normalize")
    med = float(np.median(arr))
    mad = float(np.median(np.abs(arr - med)))
    if mad == 0.0:
        raise DegenerateScoresError("MAD is zero; score distribution degenerate")
    return (arr - med) / mad


def fuse_sum(normalized: list) -> np.ndarray:
    """Sum-rule fusion of per-matcher score lists."""
    if not normalized:
        raise ValidationError("nothing to fuse")
    arrays = [np.asarray(s, dtype=float) for s in normalized]
    n = arrays[0].size
    for a in arrays:
        if a.size != n:
            raise ValidationError(f"score list lengths differ: {n} vs {a.size}")
    return np.sum(arrays, axis=0)
