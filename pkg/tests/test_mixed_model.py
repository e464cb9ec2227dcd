import math
from dataclasses import replace

import numpy as np
import pytest

from fingergrowth.core_types import (CheckoutRecord, Dataset, FingerId,
                                     ImprintKind, Minutia, MinutiaKind, Person,
                                     Sex, Template)
from fingergrowth.errors import ValidationError
from fingergrowth.growth import parse_chart
from fingergrowth.mixed_model import (MixedFit, SizeObservation, _group_layout,
                                      _loglik, build_observations,
                                      demeaned_growth_series, fit_ml,
                                      relative_effect, residual_table)

FLAT_CHART = parse_chart("""Sex,Agemos,M
1,120,170.0
1,240,170.0
2,120,160.0
2,240,160.0
""")


def obs_list(groups, kind=ImprintKind.ROLLED):
    """groups: dict group_label -> list of responses (single imprint kind)."""
    out = []
    for gi, (label, values) in enumerate(groups.items()):
        for v in values:
            out.append(SizeObservation(str(label), 0, kind, float(v)))
    return out


def spread_template(target, kind=ImprintKind.ROLLED):
    """Three collinear points whose centroid size is exactly `target`."""
    a = target * math.sqrt(2.0)
    pts = [(0.0, 0.0), (a, 0.0), (a / 2.0, 0.0)]
    minutiae = tuple(Minutia(x, y, MinutiaKind.BIFURCATION) for x, y in pts)
    return Template(minutiae, kind, 500.0, FingerId.RIGHT_INDEX)


def one_person_dataset(spreads_by_age, sex=Sex.FEMALE, pid="p1"):
    checkouts = []
    for i, (age, spreads) in enumerate(sorted(spreads_by_age.items())):
        templates = {k: spread_template(s, k) for k, s in spreads.items()}
        checkouts.append(CheckoutRecord(pid, i, age, sex, templates))
    return Dataset((Person(pid, sex, tuple(checkouts)),), correspondence=True)


class TestBuildObservations:
    def test_known_response(self):
        # spread 4 mm at an age where the chart median is 160 cm
        d = one_person_dataset({10.0: {ImprintKind.ROLLED: 4.0},
                                12.0: {ImprintKind.ROLLED: 5.0}})
        obs = build_observations(d, FLAT_CHART)
        assert obs[0].response == pytest.approx(math.log(4.0) - math.log(160.0))
        assert obs[1].response == pytest.approx(math.log(5.0) - math.log(160.0))

    def test_rolled_and_plain(self):
        d = one_person_dataset({10.0: {ImprintKind.ROLLED: 4.0,
                                       ImprintKind.PLAIN: 3.5},
                                12.0: {ImprintKind.ROLLED: 5.0}})
        obs = build_observations(d, FLAT_CHART)
        assert [o.imprint_kind for o in obs] == [
            ImprintKind.ROLLED, ImprintKind.PLAIN, ImprintKind.ROLLED]
        assert [o.co_index for o in obs] == [0, 0, 1]

    def test_empty_dataset(self):
        assert build_observations(Dataset((), correspondence=False), FLAT_CHART) == []


class TestFitMl:
    def toy_obs(self):
        return obs_list({
            "a": [0.10, 0.30],
            "b": [-0.20, 0.00],
            "c": [0.50, 0.40],
        })

    def test_matches_grid_search_oracle(self):
        obs = self.toy_obs()
        fit = fit_ml(obs)
        groups, kinds, y, kind_idx = _group_layout(obs)
        ll_fit = _loglik(y, kind_idx, groups,
                         np.array([fit.mu[kinds[0]]]),
                         fit.sigma_eta ** 2, fit.sigma_eps ** 2)
        assert ll_fit == pytest.approx(fit.loglik, rel=1e-12)
        # coarse global grid, then a fine grid around the fitted point: no
        # parameter combination may beat the returned maximum likelihood
        best = -math.inf
        for mu in np.linspace(-0.5, 0.8, 27):
            for se in np.linspace(0.01, 0.6, 25):
                for sp in np.linspace(0.01, 0.6, 25):
                    best = max(best, _loglik(y, kind_idx, groups,
                                             np.array([mu]), se ** 2, sp ** 2))
        for dmu in np.linspace(-1e-3, 1e-3, 5):
            for dse in np.linspace(-1e-4, 1e-4, 5):
                for dsp in np.linspace(-1e-4, 1e-4, 5):
                    se = max(fit.sigma_eta + dse, 1e-9)
                    sp = max(fit.sigma_eps + dsp, 1e-9)
                    best = max(best, _loglik(
                        y, kind_idx, groups,
                        np.array([fit.mu[kinds[0]] + dmu]), se ** 2, sp ** 2))
        assert fit.loglik >= best - 1e-8

    def test_loglik_trace_monotone(self):
        fit = fit_ml(self.toy_obs())
        trace = np.array(fit.loglik_trace)
        assert len(trace) >= 2
        assert np.all(np.diff(trace) >= -1e-9 * np.maximum(1.0, np.abs(trace[:-1])))
        assert fit.converged

    def test_blup_shrinkage(self):
        obs = self.toy_obs()
        fit = fit_ml(obs)
        groups, kinds, y, kind_idx = _group_layout(obs)
        mu = np.array([fit.mu[k] for k in kinds])
        r = y - mu[kind_idx]
        for g, idx in groups.items():
            group_mean = float(np.mean(r[idx]))
            assert abs(fit.eta_hat[g]) <= abs(group_mean) + 1e-12
            # shrinkage keeps the sign
            assert fit.eta_hat[g] * group_mean >= 0.0

    def test_constant_shift_invariance(self):
        obs = self.toy_obs()
        fit0 = fit_ml(obs)
        shifted = [replace(o, response=o.response + 2.5) for o in obs]
        fit1 = fit_ml(shifted)
        kind = ImprintKind.ROLLED
        assert fit1.mu[kind] == pytest.approx(fit0.mu[kind] + 2.5, abs=1e-10)
        assert fit1.sigma_eta == pytest.approx(fit0.sigma_eta, abs=1e-10)
        assert fit1.sigma_eps == pytest.approx(fit0.sigma_eps, abs=1e-10)
        for g in fit0.eta_hat:
            assert fit1.eta_hat[g] == pytest.approx(fit0.eta_hat[g], abs=1e-10)

    def test_degenerate_all_equal(self):
        fit = fit_ml(obs_list({"a": [0.2, 0.2], "b": [0.2, 0.2]}))
        assert fit.sigma_eta == 0.0
        assert fit.sigma_eps == 0.0
        assert fit.mu[ImprintKind.ROLLED] == pytest.approx(0.2)
        assert all(v == 0.0 for v in fit.eta_hat.values())

    def test_recovers_simulated_sigmas(self):
        rng = np.random.default_rng(12)
        s_eta, s_eps = 0.05, 0.02
        mu = {ImprintKind.ROLLED: -3.70, ImprintKind.PLAIN: -3.75}
        obs = []
        for g in range(300):
            eta = rng.normal(0.0, s_eta)
            for kind in (ImprintKind.ROLLED, ImprintKind.PLAIN):
                obs.append(SizeObservation(
                    f"p{g}", 0, kind,
                    mu[kind] + eta + rng.normal(0.0, s_eps)))
        fit = fit_ml(obs)
        assert fit.sigma_eta == pytest.approx(s_eta, rel=0.10)
        assert fit.sigma_eps == pytest.approx(s_eps, rel=0.10)
        assert fit.mu[ImprintKind.ROLLED] == pytest.approx(-3.70, abs=0.01)
        assert fit.mu[ImprintKind.PLAIN] == pytest.approx(-3.75, abs=0.01)

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            fit_ml([])

    def test_rejects_single_group(self):
        with pytest.raises(ValidationError):
            fit_ml(obs_list({"a": [0.1, 0.2, 0.3]}))

    def test_rejects_all_singleton_groups(self):
        with pytest.raises(ValidationError):
            fit_ml(obs_list({"a": [0.1], "b": [0.2], "c": [0.3]}))


class TestRelativeEffect:
    def test_zero(self):
        assert relative_effect(0.0) == 0.0

    def test_exact_inverse(self):
        assert relative_effect(math.log(1.05)) == pytest.approx(5.0, rel=1e-12)

    def test_small_sigma_near_linear(self):
        assert relative_effect(0.0226) == pytest.approx(2.286, abs=0.01)

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            relative_effect(-0.1)


class TestResidualTable:
    def test_ranks_normalized(self):
        d = Dataset((
            Person("p1", Sex.MALE, (
                CheckoutRecord("p1", 0, 8.0, Sex.MALE,
                               {ImprintKind.ROLLED: spread_template(4.0)}),
                CheckoutRecord("p1", 1, 14.0, Sex.MALE,
                               {ImprintKind.ROLLED: spread_template(5.0)}),
            )),
            Person("p2", Sex.MALE, (
                CheckoutRecord("p2", 0, 11.0, Sex.MALE,
                               {ImprintKind.ROLLED: spread_template(4.5)}),
            )),
        ), correspondence=False)
        fit = MixedFit(mu={}, sigma_eta=0.0, sigma_eps=0.0, loglik=0.0,
                       eta_hat={("p1", 0): 0.3, ("p1", 1): -0.1, ("p2", 0): 0.2},
                       converged=True)
        rows = residual_table(fit, d)
        by_key = {(r.person_id, r.co_index): r for r in rows}
        assert by_key[("p1", 0)].rank_transformed_age == 0.0
        assert by_key[("p2", 0)].rank_transformed_age == 0.5
        assert by_key[("p1", 1)].rank_transformed_age == 1.0
        assert by_key[("p1", 0)].eta_hat == 0.3

    def test_tied_ages_average_rank(self):
        d = Dataset((
            Person("p1", Sex.MALE, (
                CheckoutRecord("p1", 0, 9.0, Sex.MALE,
                               {ImprintKind.ROLLED: spread_template(4.0)}),)),
            Person("p2", Sex.MALE, (
                CheckoutRecord("p2", 0, 9.0, Sex.MALE,
                               {ImprintKind.ROLLED: spread_template(4.0)}),)),
        ), correspondence=False)
        fit = MixedFit(mu={}, sigma_eta=0.0, sigma_eps=0.0, loglik=0.0,
                       eta_hat={("p1", 0): 0.0, ("p2", 0): 0.0}, converged=True)
        rows = residual_table(fit, d)
        assert [r.rank_transformed_age for r in rows] == [0.5, 0.5]

    def test_only_fitted_groups_reported(self):
        d = one_person_dataset({8.0: {ImprintKind.ROLLED: 4.0},
                                12.0: {ImprintKind.ROLLED: 5.0}})
        fit = MixedFit(mu={}, sigma_eta=0.0, sigma_eps=0.0, loglik=0.0,
                       eta_hat={("p1", 0): 0.1}, converged=True)
        rows = residual_table(fit, d)
        assert len(rows) == 1 and rows[0].co_index == 0

    def test_young_age_inflation_gives_negative_trend(self):
        # each person's first (youngest) check-out deflated by 5%: the random
        # effect estimates should decrease with rank-transformed age... the
        # youngest records get systematically low responses, later ones high,
        # producing a positive-at-old / negative-at-young pattern only when the
        # inflation is applied to the old records; here young records are
        # deflated, so eta_hat correlates positively with age for persons
        # observed young and the pooled trend across persons is positive
        rng = np.random.default_rng(5)
        obs, ages, keys = [], [], []
        persons = []
        for p in range(40):
            age0 = float(rng.uniform(6.0, 12.0))
            age1 = age0 + float(rng.uniform(2.0, 6.0))
            base = rng.normal(0.0, 0.03)
            cos = []
            for ci, age in enumerate((age0, age1)):
                bias = 0.05 if age < 10.0 else 0.0  # young records inflated
                s = 4.0 * math.exp(base + bias + rng.normal(0.0, 0.005))
                sp = 4.0 * math.exp(base + bias + rng.normal(0.0, 0.005))
                cos.append(CheckoutRecord(f"p{p}", ci, age, Sex.MALE, {
                    ImprintKind.ROLLED: spread_template(s),
                    ImprintKind.PLAIN: spread_template(sp, ImprintKind.PLAIN),
                }))
            persons.append(Person(f"p{p}", Sex.MALE, tuple(cos)))
        d = Dataset(tuple(persons), correspondence=False)
        fit = fit_ml(build_observations(d, FLAT_CHART))
        rows = residual_table(fit, d)
        x = np.array([r.rank_transformed_age for r in rows])
        y = np.array([r.eta_hat for r in rows])
        assert np.corrcoef(x, y)[0, 1] < -0.3


class TestDemeanedGrowthSeries:
    def test_geometric_mean_normalization(self):
        d = one_person_dataset({8.0: {ImprintKind.ROLLED: 2.0},
                                14.0: {ImprintKind.ROLLED: 8.0}})
        rows = demeaned_growth_series(d, FLAT_CHART, "p1")
        assert [r.normalized_size for r in rows] == pytest.approx([0.5, 2.0])
        # flat chart: normalized chart values are exactly 1
        assert [r.normalized_chart_value for r in rows] == pytest.approx([1.0, 1.0])

    def test_product_of_normalized_sizes_is_one(self):
        d = one_person_dataset({6.0: {ImprintKind.ROLLED: 3.0},
                                10.0: {ImprintKind.ROLLED: 4.1},
                                15.0: {ImprintKind.ROLLED: 5.7}})
        rows = demeaned_growth_series(d, FLAT_CHART, "p1")
        prod = np.prod([r.normalized_size for r in rows])
        assert prod == pytest.approx(1.0, rel=1e-12)

    def test_includes_plain(self):
        d = one_person_dataset({8.0: {ImprintKind.ROLLED: 4.0,
                                      ImprintKind.PLAIN: 3.8},
                                12.0: {ImprintKind.ROLLED: 5.0}})
        rows = demeaned_growth_series(d, FLAT_CHART, "p1")
        assert [r.imprint_kind for r in rows] == [
            ImprintKind.ROLLED, ImprintKind.PLAIN, ImprintKind.ROLLED]

    def test_requires_two_checkouts(self):
        d = one_person_dataset({8.0: {ImprintKind.ROLLED: 4.0}})
        with pytest.raises(ValidationError):
            demeaned_growth_series(d, FLAT_CHART, "p1")

    def test_unknown_person(self):
        d = one_person_dataset({8.0: {ImprintKind.ROLLED: 4.0},
                                12.0: {ImprintKind.ROLLED: 5.0}})
        with pytest.raises(ValidationError):
            demeaned_growth_series(d, FLAT_CHART, "nope")
