"""One-way random-intercept model for log finger size relative to the
stature growth chart.

Response per (person, check-out, imprint): log(spread) - log(median stature).
Fixed effect per imprint kind; one random intercept shared by the rolled and
plain imprints of a check-out; residual noise per imprint.  Fitted by
maximum likelihood with an ECM iteration (monotone in the log-likelihood);
random effects are empirical BLUPs at the ML estimates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .core_types import Dataset, ImprintKind
from .errors import NumericalError, ValidationError
from .geometry import spread
from .growth import GrowthChart, median_stature

MAX_ITERATIONS = 10_000
REL_TOL = 1e-10


@dataclass(frozen=True)
class SizeObservation:
    person_id: str
    co_index: int
    imprint_kind: ImprintKind
    response: float  # log(spread mm) - log(median stature cm)


@dataclass(frozen=True)
class MixedFit:
    mu: dict[ImprintKind, float]
    sigma_eta: float
    sigma_eps: float
    loglik: float
    eta_hat: dict[tuple[str, int], float]
    converged: bool
    loglik_trace: tuple[float, ...] = field(default_factory=tuple, repr=False)


def build_observations(d: Dataset, chart: GrowthChart) -> list[SizeObservation]:
    obs = []
    for person in d.persons:
        for co in person.checkouts:
            g = median_stature(chart, co.age, person.sex)
            for kind in (ImprintKind.ROLLED, ImprintKind.PLAIN):
                t = co.templates.get(kind)
                if t is None:
                    continue
                s = spread(t.coords())
                obs.append(SizeObservation(
                    person.person_id, co.co_index, kind, math.log(s) - math.log(g)))
    return obs


def _group_layout(obs: list[SizeObservation]):
    groups: dict[tuple[str, int], list[int]] = {}
    for idx, o in enumerate(obs):
        groups.setdefault((o.person_id, o.co_index), []).append(idx)
    kinds = sorted({o.imprint_kind for o in obs}, key=lambda k: k.value)
    y = np.array([o.response for o in obs])
    kind_idx = np.array([kinds.index(o.imprint_kind) for o in obs])
    return groups, kinds, y, kind_idx


def _loglik(y, kind_idx, groups, mu, s2_eta, s2_eps) -> float:
    r = y - mu[kind_idx]
    ll = 0.0
    for idx in groups.values():
        rg = r[idx]
        n = len(idx)
        d = s2_eps + n * s2_eta
        quad = (rg @ rg - (s2_eta / d) * rg.sum() ** 2) / s2_eps
        ll += -0.5 * (n * math.log(2 * math.pi * s2_eps) + math.log(d / s2_eps) + quad)
    return ll


def fit_ml(obs: list[SizeObservation]) -> MixedFit:
    if not obs:
        raise ValidationError("no observations to fit")
    groups, kinds, y, kind_idx = _group_layout(obs)
    if len(groups) < 2:
        raise ValidationError("need >= 2 (person, CO) groups to identify sigma_eta")
    if max(len(v) for v in groups.values()) < 2:
        raise ValidationError("need at least one group with 2 imprints to identify sigma_eps")
    n_total = len(y)
    n_kinds = len(kinds)
    group_lists = list(groups.values())

    # per-kind OLS means as starting fixed effects
    mu = np.array([y[kind_idx == k].mean() for k in range(n_kinds)])
    resid = y - mu[kind_idx]
    scale = max(1.0, float(np.max(np.abs(y))))
    if float(np.max(np.abs(resid))) < 1e-13 * scale:
        # degenerate: zero residual variance, likelihood unbounded at sigma -> 0
        return MixedFit(
            mu=dict(zip(kinds, (float(v) for v in mu))),
            sigma_eta=0.0, sigma_eps=0.0, loglik=math.inf,
            eta_hat={g: 0.0 for g in groups}, converged=True)

    total_var = float(resid @ resid) / n_total
    s2_eta = max(total_var / 2.0, 1e-12)
    s2_eps = max(total_var / 2.0, 1e-12)

    trace = []
    ll_old = -math.inf
    converged = False
    for _ in range(MAX_ITERATIONS):
        # E-step: posterior of group intercepts at current parameters
        r = y - mu[kind_idx]
        b = np.zeros(len(group_lists))
        v = np.zeros(len(group_lists))
        for gi, idx in enumerate(group_lists):
            n = len(idx)
            d = s2_eps + n * s2_eta
            b[gi] = s2_eta * r[idx].sum() / d
            v[gi] = s2_eta * s2_eps / d
        # CM-step 1: fixed effects on the de-intercepted responses
        y_adj = y.copy()
        for gi, idx in enumerate(group_lists):
            y_adj[idx] -= b[gi]
        mu = np.array([y_adj[kind_idx == k].mean() for k in range(n_kinds)])
        # CM-step 2: variance components from the same posterior
        r = y - mu[kind_idx]
        sse = 0.0
        for gi, idx in enumerate(group_lists):
            rg = r[idx] - b[gi]
            sse += rg @ rg + len(idx) * v[gi]
        s2_eps = max(float(sse) / n_total, 1e-300)
        s2_eta = max(float(np.mean(b ** 2 + v)), 0.0)

        ll = _loglik(y, kind_idx, groups, mu, s2_eta, s2_eps)
        trace.append(ll)
        if math.isfinite(ll_old) and abs(ll - ll_old) <= REL_TOL * max(1.0, abs(ll_old)):
            converged = True
            break
        ll_old = ll
    if not converged:
        raise NumericalError(f"mixed-model fit did not converge in {MAX_ITERATIONS} iterations")

    # BLUPs at the ML estimates
    r = y - mu[kind_idx]
    eta_hat = {}
    for g, idx in groups.items():
        n = len(idx)
        d = s2_eps + n * s2_eta
        eta_hat[g] = float(s2_eta * r[idx].sum() / d) if d > 0 else 0.0
    return MixedFit(
        mu=dict(zip(kinds, (float(v) for v in mu))),
        sigma_eta=math.sqrt(s2_eta),
        sigma_eps=math.sqrt(s2_eps),
        loglik=float(ll),
        eta_hat=eta_hat,
        converged=converged,
        loglik_trace=tuple(trace),
    )


def relative_effect(sigma: float) -> float:
    """Back-transform a log-scale std deviation to a multiplicative percentage."""
    if sigma < 0:
        raise ValidationError(f"sigma must be >= 0, got {sigma}")
    return (math.exp(sigma) - 1.0) * 100.0


@dataclass(frozen=True)
class ResidualRow:
    person_id: str
    co_index: int
    rank_transformed_age: float
    eta_hat: float


def residual_table(fit: MixedFit, d: Dataset) -> list[ResidualRow]:
    """Estimated random effects vs rank-transformed age, one row per (person, CO)."""
    keys, ages = [], []
    for person in d.persons:
        for co in person.checkouts:
            key = (person.person_id, co.co_index)
            if key in fit.eta_hat:
                keys.append(key)
                ages.append(co.age)
    if not keys:
        return []
    ranks = rankdata(ages, method="average")
    if len(keys) > 1:
        ranks = (ranks - 1.0) / (len(keys) - 1.0)
    else:
        ranks = np.zeros(1)
    return [ResidualRow(pid, co, float(rk), fit.eta_hat[(pid, co)])
            for (pid, co), rk in zip(keys, ranks)]


@dataclass(frozen=True)
class GrowthSeriesRow:
    age: float
    imprint_kind: ImprintKind
    normalized_size: float
    normalized_chart_value: float


def demeaned_growth_series(d: Dataset, chart: GrowthChart, person_id: str) -> list[GrowthSeriesRow]:
    """Per-person sizes and chart values, each divided by its geometric mean."""
    person = d.person(person_id)
    if len(person.checkouts) < 2:
        raise ValidationError(f"person {person_id!r} has fewer than 2 check-outs")
    rows = []
    for co in person.checkouts:
        g = median_stature(chart, co.age, person.sex)
        for kind in (ImprintKind.ROLLED, ImprintKind.PLAIN):
            t = co.templates.get(kind)
            if t is None:
                continue
            rows.append((co.age, kind, spread(t.coords()), g))
    sizes = np.array([r[2] for r in rows])
    charts = np.array([r[3] for r in rows])
    gm_size = float(np.exp(np.mean(np.log(sizes))))
    gm_chart = float(np.exp(np.mean(np.log(charts))))
    return [GrowthSeriesRow(age, kind, s / gm_size, g / gm_chart)
            for (age, kind, s, g) in rows]
