"""Verification (EER), identification (rank tables) and the alignment
improvement experiment.

Protocol: per person, the rolled print at the last check-out is the query.
The genuine attempt matches it against the same finger at the first
check-out (optionally rescaled by the growth-chart factor); impostor
attempts match it against every other person's last-check-out print.
Identification ranks the query against a gallery in which juvenile entries
are rescaled to the query's acquisition age using each entry's own age and
sex.
"""
from __future__ import annotations

import enum
import math
import statistics
from dataclasses import dataclass

import numpy as np

from .core_types import Dataset, ImprintKind, Sex
from .errors import DegenerateScoresError, ValidationError
from .geometry import rigid_align
from .growth import GrowthChart, factor_set, rescale_config, scale_factor
from .matcher import (DEFAULT_PARAMS, MatchParams, _match_kernel, _template_arrays,
                      fuse_sum, normalize_scores)
from .synth import GalleryEntry


class EvalMode(enum.Enum):
    UNSCALED = "unscaled"
    RESCALED = "rescaled"
    MULTI_FACTOR = "multi_factor"


# ---------------------------------------------------------------------------
# Equal error rate

def _weights(persons, n: int) -> np.ndarray:
    if persons is None:
        return np.full(n, 1.0 / n)
    persons = list(persons)
    if len(persons) != n:
        raise ValidationError("weights: person list length does not match scores")
    counts: dict = {}
    for p in persons:
        counts[p] = counts.get(p, 0) + 1
    n_persons = len(counts)
    return np.array([1.0 / (n_persons * counts[p]) for p in persons])


def eer(genuine, impostor, genuine_persons=None, impostor_persons=None) -> float:
    """Equal error rate with threshold sweep and linear interpolation.

    FAR(t) = weighted fraction of impostor scores >= t; FRR(t) = weighted
    fraction of genuine scores < t.  The EER is read off where FAR - FRR
    changes sign, interpolating linearly between adjacent thresholds.  With
    person labels, rates are averaged within persons first.
    """
    gen = np.asarray(genuine, dtype=float)
    imp = np.asarray(impostor, dtype=float)
    if gen.size == 0 or imp.size == 0:
        raise ValidationError("need non-empty genuine and impostor score sets")
    wg = _weights(genuine_persons, gen.size)
    wi = _weights(impostor_persons, imp.size)

    thresholds = np.unique(np.concatenate([gen, imp]))
    gi = np.argsort(gen, kind="stable")
    ii = np.argsort(imp, kind="stable")
    gen_sorted, wg_sorted = gen[gi], wg[gi]
    imp_sorted, wi_sorted = imp[ii], wi[ii]
    wg_cum = np.concatenate([[0.0], np.cumsum(wg_sorted)])
    wi_cum = np.concatenate([[0.0], np.cumsum(wi_sorted)])
    # FRR at t: weight of genuine strictly below t; FAR: impostor weight at/above t
    frr = wg_cum[np.searchsorted(gen_sorted, thresholds, side="left")]
    far = wi_cum[-1] - wi_cum[np.searchsorted(imp_sorted, thresholds, side="left")]
    # virtual endpoints: below all scores (FAR 1, FRR 0) and above all (0, 1)
    far = np.concatenate([[wi_cum[-1]], far, [0.0]])
    frr = np.concatenate([[0.0], frr, [wg_cum[-1]]])
    diff = far - frr
    k = int(np.searchsorted(-diff, 0.0, side="left"))  # first index with diff <= 0
    if k >= diff.size:
        k = diff.size - 1
    if diff[k] == 0.0:
        return float((far[k] + frr[k]) / 2.0)
    alpha = diff[k - 1] / (diff[k - 1] - diff[k])
    return float(far[k - 1] + alpha * (far[k] - far[k - 1]))


# ---------------------------------------------------------------------------
# Verification

@dataclass(frozen=True)
class VerificationReport:
    genuine: dict[str, list[float]]   # person -> genuine scores
    impostor: dict[str, list[float]]  # query person -> impostor scores
    eer: float
    mode: EvalMode
    matcher_label: str


@dataclass(frozen=True)
class _Subject:
    person_id: str
    sex: Sex
    first_age: float
    last_age: float
    first_arrays: tuple
    last_arrays: tuple


def _subjects(d: Dataset) -> list[_Subject]:
    subjects = []
    for person in d.persons:
        rolled = [(co.age, co.templates[ImprintKind.ROLLED])
                  for co in person.checkouts if ImprintKind.ROLLED in co.templates]
        if len(rolled) < 2:
            continue
        (age_first, t_first), (age_last, t_last) = rolled[0], rolled[-1]
        subjects.append(_Subject(person.person_id, person.sex, age_first, age_last,
                                 _template_arrays(t_first), _template_arrays(t_last)))
    if not subjects:
        raise ValidationError("no person with first and last check-out rolled prints")
    return subjects


def _kernel_value(q_arrays, r_arrays, params: MatchParams) -> float:
    q, qk = q_arrays
    r, rk = r_arrays
    count, _, _, _ = _match_kernel(q, qk, r, rk, params.radius_mm,
                                   params.pair_tol_mm, params.max_hypotheses)
    return count * count / (q.shape[0] * r.shape[0])


def _value_over_factors(q_arrays, r_arrays, factors, params) -> float:
    best = -math.inf
    r, rk = r_arrays
    for f in factors:
        scaled = np.ascontiguousarray(rescale_config(r, f.value))
        best = max(best, _kernel_value(q_arrays, (scaled, rk), params))
    return best


def run_verification_suite(d: Dataset, chart: GrowthChart,
                           modes=(EvalMode.UNSCALED, EvalMode.RESCALED),
                           params_list=(DEFAULT_PARAMS,),
                           factors_count: int = 3, spread_pct: float = 0.05,
                           ) -> dict[EvalMode, VerificationReport]:
    """Run the verification protocol for several modes, sharing impostor
    computations where the mode cannot change them."""
    modes = [EvalMode(m) for m in modes]
    subjects = _subjects(d)
    reports = {}
    # impostor attempts are adult-vs-adult: identical for unscaled/rescaled
    plain_modes = [m for m in modes if m is not EvalMode.MULTI_FACTOR]

    per_matcher: list[dict] = []
    for params in params_list:
        scores: dict = {"genuine": {}, "impostor_plain": None, "impostor_multi": None}
        for mode in modes:
            gen = []
            for s in subjects:
                f = scale_factor(chart, s.first_age, s.last_age, s.sex)
                if mode is EvalMode.UNSCALED:
                    gen.append(_kernel_value(s.last_arrays, s.first_arrays, params))
                elif mode is EvalMode.RESCALED:
                    ref, rk = s.first_arrays
                    scaled = np.ascontiguousarray(rescale_config(ref, f.value))
                    gen.append(_kernel_value(s.last_arrays, (scaled, rk), params))
                else:
                    factors = factor_set(f, spread_pct, factors_count)
                    gen.append(_value_over_factors(s.last_arrays, s.first_arrays,
                                                   factors, params))
            scores["genuine"][mode] = gen
        if plain_modes:
            scores["impostor_plain"] = _impostor_scores(subjects, chart, params, None)
        if EvalMode.MULTI_FACTOR in modes:
            scores["impostor_multi"] = _impostor_scores(
                subjects, chart, params, (factors_count, spread_pct))
        per_matcher.append(scores)

    label = "+".join(f"r={p.radius_mm}" for p in params_list)
    for mode in modes:
        imp_key = "impostor_multi" if mode is EvalMode.MULTI_FACTOR else "impostor_plain"
        gen_lists = [m["genuine"][mode] for m in per_matcher]
        imp_lists = [m[imp_key] for m in per_matcher]
        if len(per_matcher) > 1:
            # median/MAD normalization per matcher before sum-rule fusion
            fused_g, fused_i = [], []
            for g, ims in zip(gen_lists, imp_lists):
                pooled = np.concatenate([g, ims])
                try:
                    normed = normalize_scores(pooled)
                except DegenerateScoresError:
                    normed = pooled
                fused_g.append(normed[: len(g)])
                fused_i.append(normed[len(g):])
            gen_scores = fuse_sum(fused_g)
            imp_scores = fuse_sum(fused_i)
        else:
            gen_scores = np.asarray(gen_lists[0])
            imp_scores = np.asarray(imp_lists[0])
        gen_persons = [s.person_id for s in subjects]
        imp_persons = [s.person_id for s in subjects for q in subjects if q is not s]
        rate = eer(gen_scores, imp_scores, gen_persons, imp_persons)
        genuine = {p: [float(v)] for p, v in zip(gen_persons, gen_scores)}
        impostor: dict[str, list[float]] = {p: [] for p in gen_persons}
        for p, v in zip(imp_persons, imp_scores):
            impostor[p].append(float(v))
        reports[mode] = VerificationReport(genuine, impostor, rate, mode, label)
    return reports


def _impostor_scores(subjects, chart, params, multi) -> list[float]:
    """Each last-CO print against all other persons' last-CO prints."""
    out = []
    for s in subjects:
        for q in subjects:
            if q is s:
                continue
            if multi is None:
                out.append(_kernel_value(s.last_arrays, q.last_arrays, params))
            else:
                count, pct = multi
                f = scale_factor(chart, q.last_age, s.last_age, q.sex)
                out.append(_value_over_factors(s.last_arrays, q.last_arrays,
                                               factor_set(f, pct, count), params))
    return out


def run_verification(d: Dataset, chart: GrowthChart, mode=EvalMode.UNSCALED,
                     params_list=(DEFAULT_PARAMS,), factors_count: int = 3,
                     spread_pct: float = 0.05) -> VerificationReport:
    mode = EvalMode(mode)
    return run_verification_suite(d, chart, (mode,), params_list,
                                  factors_count, spread_pct)[mode]


# ---------------------------------------------------------------------------
# Identification

@dataclass(frozen=True)
class IdentificationReport:
    ranks: list[int]
    top1_rate: float
    top3_rate: float
    mode: EvalMode


def identification_setup(d: Dataset):
    """Juvenile identification protocol: the last-CO rolled print queries a
    gallery holding the first-CO (juvenile) rolled print.  Returns
    (queries, genuine_entries); append distractors to the latter to form the
    gallery."""
    queries, genuine = [], []
    for p in d.persons:
        cos = [co for co in p.checkouts if ImprintKind.ROLLED in co.templates]
        if len(cos) < 2:
            continue
        first, last = cos[0], cos[-1]
        queries.append(GalleryEntry(last.templates[ImprintKind.ROLLED],
                                    p.person_id, last.age, p.sex))
        genuine.append(GalleryEntry(first.templates[ImprintKind.ROLLED],
                                    p.person_id, first.age, p.sex))
    if not queries:
        raise ValidationError("no person with two rolled check-outs")
    return queries, genuine


def run_identification_suite(queries: list[GalleryEntry], gallery: list[GalleryEntry],
                             chart: GrowthChart,
                             modes=(EvalMode.UNSCALED, EvalMode.RESCALED),
                             params: MatchParams = DEFAULT_PARAMS,
                             factors_count: int = 3, spread_pct: float = 0.05,
                             ) -> dict[EvalMode, IdentificationReport]:
    """Rank every query against the gallery in each mode.

    Kernel calls are cached per (query, entry, factor), so modes that agree
    on a factor (e.g. unscaled vs rescaled on an adult entry, whose chart
    factor is exactly 1) share the computation.
    """
    modes = [EvalMode(m) for m in modes]
    if not queries or not gallery:
        raise ValidationError("queries and gallery must be non-empty")
    gallery_ids = [e.person_id for e in gallery]
    gallery_arrays = [_template_arrays(e.template) for e in gallery]
    query_arrays = [_template_arrays(q.template) for q in queries]
    all_ranks: dict[EvalMode, list[int]] = {m: [] for m in modes}
    for q, q_arr in zip(queries, query_arrays):
        genuine_idx = [i for i, pid in enumerate(gallery_ids) if pid == q.person_id]
        if len(genuine_idx) != 1:
            raise ValidationError(
                f"query {q.person_id!r} must have exactly one genuine gallery entry, "
                f"found {len(genuine_idx)}")
        g = genuine_idx[0]
        scores = {m: np.empty(len(gallery)) for m in modes}
        for i, (entry, r_arr) in enumerate(zip(gallery, gallery_arrays)):
            chart_f = scale_factor(chart, entry.age, q.age, entry.sex)
            cache: dict[float, float] = {}

            def value_at(f: float) -> float:
                if f not in cache:
                    if f == 1.0:
                        cache[f] = _kernel_value(q_arr, r_arr, params)
                    else:
                        r, rk = r_arr
                        scaled = np.ascontiguousarray(rescale_config(r, f))
                        cache[f] = _kernel_value(q_arr, (scaled, rk), params)
                return cache[f]

            for m in modes:
                if m is EvalMode.UNSCALED:
                    scores[m][i] = value_at(1.0)
                elif m is EvalMode.RESCALED:
                    scores[m][i] = value_at(chart_f.value)
                else:
                    factors = factor_set(chart_f, spread_pct, factors_count)
                    scores[m][i] = max(value_at(f.value) for f in factors)
        for m in modes:
            s = scores[m]
            gs = s[g]
            # pessimistic rank: ties with non-genuine entries count against
            all_ranks[m].append(1 + int(np.sum(s > gs)) + int(np.sum(s == gs)) - 1)
    reports = {}
    n = len(queries)
    for m in modes:
        ranks = all_ranks[m]
        top1 = sum(1 for r in ranks if r <= 1) / n
        top3 = sum(1 for r in ranks if r <= 3) / n
        reports[m] = IdentificationReport(ranks, top1, top3, m)
    return reports


def run_identification(queries: list[GalleryEntry], gallery: list[GalleryEntry],
                       chart: GrowthChart, mode=EvalMode.UNSCALED,
                       params: MatchParams = DEFAULT_PARAMS,
                       factors_count: int = 3, spread_pct: float = 0.05,
                       ) -> IdentificationReport:
    mode = EvalMode(mode)
    return run_identification_suite(queries, gallery, chart, (mode,), params,
                                    factors_count, spread_pct)[mode]


# ---------------------------------------------------------------------------
# Alignment experiment

@dataclass(frozen=True)
class AlignmentRow:
    person_id: str
    scale_factor: float
    smsd_unscaled: float
    smsd_rescaled: float
    smsd_control: float
    relative_reduction: float        # 1 - rescaled/unscaled
    excess_reduction: float          # (unscaled - rescaled) / (unscaled - control)


@dataclass(frozen=True)
class AlignmentReport:
    rows: list[AlignmentRow]
    median_unscaled: float
    median_rescaled: float
    median_control: float


def alignment_experiment(d: Dataset, chart: GrowthChart) -> AlignmentReport:
    """Per finger: SMSD of first vs last CO (rolled), repeated with the
    first-CO print rescaled by the chart factor, plus the same-time control
    (plain vs rolled at last CO)."""
    if not d.correspondence:
        raise ValidationError("alignment experiment requires a correspondence dataset")
    rows = []
    for person in d.persons:
        cos = person.checkouts
        if len(cos) < 2:
            continue
        first, last = cos[0], cos[-1]
        try:
            t_first = first.templates[ImprintKind.ROLLED]
            t_last = last.templates[ImprintKind.ROLLED]
            t_control = last.templates[ImprintKind.PLAIN]
        except KeyError as exc:
            raise ValidationError(
                f"person {person.person_id!r} is missing imprint {exc} "
                f"for the alignment experiment") from None
        f = scale_factor(chart, first.age, last.age, person.sex)
        dst = t_last.coords()
        _, smsd_unscaled = rigid_align(t_first.coords(), dst)
        _, smsd_rescaled = rigid_align(rescale_config(t_first.coords(), f.value), dst)
        _, smsd_control = rigid_align(t_control.coords(), dst)
        rel = 1.0 - smsd_rescaled / smsd_unscaled if smsd_unscaled > 0 else 0.0
        denom = smsd_unscaled - smsd_control
        excess = (smsd_unscaled - smsd_rescaled) / denom if denom > 0 else float("nan")
        rows.append(AlignmentRow(person.person_id, f.value, smsd_unscaled,
                                 smsd_rescaled, smsd_control, rel, excess))
    if not rows:
        raise ValidationError("no person with two check-outs")
    return AlignmentReport(
        rows,
        statistics.median(r.smsd_unscaled for r in rows),
        statistics.median(r.smsd_rescaled for r in rows),
        statistics.median(r.smsd_control for r in rows),
    )
