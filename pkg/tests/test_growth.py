import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fingergrowth.core_types import (FingerId, ImprintKind, Minutia, MinutiaKind,
                                     Sex, Template, px_to_mm)
from fingergrowth.errors import ParseError, ValidationError
from fingergrowth.geometry import RigidTransform, rigid_align, spread
from fingergrowth.growth import (ScaleFactor, factor_set, median_stature,
                                 parse_chart, rescale_dpi, rescale_template,
                                 scale_factor)

TWO_KNOT_CHART = """Sex,Agemos,L,M,S
1,144.5,1,170.0,0.04
1,156.5,1,175.0,0.04
2,144.5,1,160.0,0.04
2,156.5,1,165.0,0.04
"""


def make_template(coords):
    minutiae = tuple(Minutia(float(x), float(y), MinutiaKind.BIFURCATION)
                     for x, y in coords)
    return Template(minutiae, ImprintKind.ROLLED, 500.0, FingerId.RIGHT_INDEX)


class TestChartParsing:
    def test_two_knots(self):
        chart = parse_chart(TWO_KNOT_CHART)
        ages, stat = chart.knots(Sex.MALE)
        assert list(ages) == [144.5, 156.5]
        assert list(stat) == [170.0, 175.0]

    def test_semicolon_delimiter(self):
        chart = parse_chart(TWO_KNOT_CHART.replace(",", ";"))
        assert list(chart.knots(Sex.FEMALE)[1]) == [160.0, 165.0]

    def test_extra_columns_ignored(self):
        chart = parse_chart(TWO_KNOT_CHART)  # L and S present and ignored
        assert chart.knots(Sex.MALE)[1][0] == 170.0

    def test_missing_sex(self):
        text = "\n".join(ln for ln in TWO_KNOT_CHART.splitlines()
                         if not ln.startswith("2"))
        with pytest.raises(ValidationError, match="missing sex 2"):
            parse_chart(text)

    def test_decreasing_ages(self):
        text = TWO_KNOT_CHART.replace("1,156.5", "1,100.5")
        with pytest.raises(ValidationError, match="increasing"):
            parse_chart(text)

    def test_decreasing_stature(self):
        text = TWO_KNOT_CHART.replace("1,156.5,1,175.0", "1,156.5,1,150.0")
        with pytest.raises(ValidationError, match="decrease"):
            parse_chart(text)

    def test_unparseable_row(self):
        with pytest.raises(ParseError, match="row"):
            parse_chart(TWO_KNOT_CHART + "1,abc,1,170,0\n")

    def test_bad_header(self):
        with pytest.raises(ParseError, match="header"):
            parse_chart("a,b,c\n1,2,3\n")

    def test_builtin_chart_monotone(self, chart):
        for sex in Sex:
            ages, stat = chart.knots(sex)
            assert np.all(np.diff(ages) > 0)
            assert np.all(np.diff(stat) >= 0)
            assert np.all(stat > 0)


class TestMedianStature:
    def test_at_knot(self):
        chart = parse_chart(TWO_KNOT_CHART)
        assert median_stature(chart, 144.5 / 12, Sex.MALE) == 170.0

    def test_midway(self):
        chart = parse_chart(TWO_KNOT_CHART)
        assert median_stature(chart, 150.5 / 12, Sex.MALE) == pytest.approx(172.5)

    def test_clamps(self):
        chart = parse_chart(TWO_KNOT_CHART)
        assert median_stature(chart, 1.0, Sex.MALE) == 170.0
        assert median_stature(chart, 34.0, Sex.MALE) == 175.0

    def test_invalid_age(self):
        chart = parse_chart(TWO_KNOT_CHART)
        with pytest.raises(ValidationError):
            median_stature(chart, 0.0, Sex.MALE)

    @given(st.floats(min_value=0.1, max_value=40.0),
           st.floats(min_value=0.0, max_value=5.0))
    @settings(max_examples=100)
    def test_monotone_nondecreasing(self, chart, age, delta):
        for sex in Sex:
            assert (median_stature(chart, age + delta, sex)
                    >= median_stature(chart, age, sex) - 1e-12)


class TestScaleFactor:
    def test_identity(self, chart):
        assert scale_factor(chart, 12.3, 12.3, Sex.MALE).value == 1.0

    def test_forced_ratio(self):
        two = parse_chart(TWO_KNOT_CHART.replace("170.0", "150.0")
                          .replace("175.0", "175.0"))
        f = scale_factor(two, 144.5 / 12, 156.5 / 12, Sex.MALE)
        assert f.value == pytest.approx(175.0 / 150.0)

    @given(st.floats(min_value=1.0, max_value=35.0),
           st.floats(min_value=1.0, max_value=35.0),
           st.floats(min_value=1.0, max_value=35.0))
    @settings(max_examples=100)
    def test_telescoping(self, chart, x, y, z):
        for sex in Sex:
            fxy = scale_factor(chart, x, y, sex).value
            fyz = scale_factor(chart, y, z, sex).value
            fxz = scale_factor(chart, x, z, sex).value
            assert fxy * fyz == pytest.approx(fxz, rel=1e-12)

    @given(st.floats(min_value=1.0, max_value=35.0),
           st.floats(min_value=1.0, max_value=35.0))
    @settings(max_examples=100)
    def test_inverse(self, chart, x, y):
        for sex in Sex:
            fwd = scale_factor(chart, x, y, sex).value
            back = scale_factor(chart, y, x, sex).value
            assert fwd * back == pytest.approx(1.0, rel=1e-12)

    def test_value_at_least_one_when_growing(self, chart):
        assert scale_factor(chart, 8.0, 20.0, Sex.FEMALE).value >= 1.0


class TestRescaling:
    def test_identity_factor_returns_same_object(self):
        t = make_template([(0, 0), (3, 1), (1, 4)])
        f = ScaleFactor(1.0, 10.0, 10.0, Sex.MALE)
        assert rescale_template(t, f) is t

    def test_spread_scales_exactly(self):
        rng = np.random.default_rng(0)
        t = make_template(rng.uniform(0, 10, (9, 2)))
        f = ScaleFactor(1.2, 10.0, 20.0, Sex.MALE)
        assert spread(rescale_template(t, f).coords()) == pytest.approx(
            1.2 * spread(t.coords()), rel=1e-12)

    def test_barycenter_preserved(self):
        rng = np.random.default_rng(1)
        t = make_template(rng.uniform(0, 10, (7, 2)))
        scaled = rescale_template(t, ScaleFactor(1.4, 8.0, 18.0, Sex.FEMALE))
        assert np.allclose(scaled.coords().mean(axis=0), t.coords().mean(axis=0))

    def test_metadata_preserved(self):
        t = make_template([(0, 0), (3, 1), (1, 4)])
        scaled = rescale_template(t, ScaleFactor(1.1, 8.0, 18.0, Sex.MALE))
        assert scaled.dpi == t.dpi
        assert scaled.imprint_kind is t.imprint_kind
        assert scaled.kinds() == t.kinds()

    def test_commutes_with_rigid_motion(self):
        rng = np.random.default_rng(2)
        xy = rng.uniform(-5, 5, (8, 2))
        motion = RigidTransform(0.7, (3.0, -2.0))
        f = ScaleFactor(1.15, 9.0, 19.0, Sex.MALE)
        a = rescale_template(make_template(motion.apply(xy)), f).coords()
        b = rescale_template(make_template(xy), f).coords()
        # same shape after optimal rigid alignment
        _, d = rigid_align(a, b)
        assert d <= 1e-9

    def test_up_vs_down_scaling_smsd_ratio(self):
        # aligning f*early to late vs early to late/f: the whole problem is
        # scaled by f, so the attained SMSD ratio is exactly f
        rng = np.random.default_rng(3)
        early = rng.uniform(-6, 6, (10, 2))
        late = 1.21 * early + rng.normal(0, 0.2, early.shape)
        f = 1.21
        _, d_up = rigid_align(f * early, late)
        _, d_down = rigid_align(early, late / f)
        assert d_up == pytest.approx(f * d_down, rel=1e-9)

    def test_rescale_dpi(self):
        assert rescale_dpi(500.0, 1.0) == 500.0
        assert rescale_dpi(500.0, 1.25) == 400.0

    @given(st.floats(min_value=1, max_value=1000),
           st.floats(min_value=0.5, max_value=2.0))
    def test_rescale_dpi_identity(self, px, f):
        assert px_to_mm(px, rescale_dpi(500.0, f)) == pytest.approx(
            f * px_to_mm(px, 500.0), rel=1e-12)


class TestFactorSet:
    def base(self, value=1.10):
        return ScaleFactor(value, 10.0, 20.0, Sex.MALE)

    def test_three_factors(self):
        vals = [f.value for f in factor_set(self.base(), 0.05, 3)]
        assert vals == pytest.approx([1.045, 1.10, 1.155])

    def test_single(self):
        assert [f.value for f in factor_set(self.base(), 0.05, 1)] == [1.10]

    def test_unit_factor(self):
        vals = [f.value for f in factor_set(self.base(1.0), 0.05, 3)]
        assert vals == pytest.approx([0.95, 1.0, 1.05])

    def test_even_count_rejected(self):
        with pytest.raises(ValidationError):
            factor_set(self.base(), 0.05, 2)

    def test_negative_spread_rejected(self):
        with pytest.raises(ValidationError):
            factor_set(self.base(), -0.1, 3)

    def test_metadata_carried(self):
        for f in factor_set(self.base(), 0.05, 5):
            assert f.age_from == 10.0 and f.age_to == 20.0 and f.sex is Sex.MALE
