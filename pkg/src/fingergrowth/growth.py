"""Growth-chart ingestion, median-stature interpolation and template rescaling.

Chart files follow the CDC stature-for-age layout: a header row, then rows
with columns Sex (1=male, 2=female), Agemos (age in months) and M (median
stature in cm); extra columns are ignored and the separator is auto-detected
among comma, semicolon and tab.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .core_types import Sex, Template
from .errors import ParseError, ValidationError
from .geometry import as_config

MONTHS_PER_YEAR = 12.0


@dataclass(frozen=True)
class GrowthChart:
    """Per-sex monotone age (months) -> median stature (cm) tables."""
    male_ages: np.ndarray
    male_stature: np.ndarray
    female_ages: np.ndarray
    female_stature: np.ndarray

    def knots(self, sex: Sex) -> tuple[np.ndarray, np.ndarray]:
        if sex is Sex.MALE:
            return self.male_ages, self.male_stature
        return self.female_ages, self.female_stature


@dataclass(frozen=True)
class ScaleFactor:
    value: float
    age_from: float  # years
    age_to: float    # years
    sex: Sex


def _check_series(ages: list[float], stature: list[float], sex_code: int):
    ages_a, stat_a = np.asarray(ages), np.asarray(stature)
    if len(ages_a) < 2:
        raise ValidationError(f"chart needs >= 2 rows for sex {sex_code}")
    if np.any(np.diff(ages_a) <= 0):
        raise ValidationError(f"chart ages not strictly increasing for sex {sex_code}")
    if np.any(stat_a <= 0):
        raise ValidationError(f"chart statures must be positive (sex {sex_code})")
    if np.any(np.diff(stat_a) < 0):
        raise ValidationError(f"chart statures decrease with age (sex {sex_code})")
    return ages_a, stat_a


def parse_chart(text: str) -> GrowthChart:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ParseError("empty chart file")
    header = lines[0]
    delim = max(",;\t", key=header.count)
    reader = csv.reader(io.StringIO("\n".join(lines)), delimiter=delim)
    head = [h.strip().lower() for h in next(reader)]
    try:
        i_sex, i_age, i_m = head.index("sex"), head.index("agemos"), head.index("m")
    except ValueError:
        raise ParseError(f"chart header must contain Sex, Agemos and M columns, got {header!r}")
    series: dict[int, tuple[list, list]] = {1: ([], []), 2: ([], [])}
    for lineno, row in enumerate(reader, start=2):
        try:
            sex_code = int(float(row[i_sex]))
            age = float(row[i_age])
            med = float(row[i_m])
        except (ValueError, IndexError):
            raise ParseError(f"unparseable chart row {lineno}: {delim.join(row)!r}")
        if sex_code not in series:
            raise ParseError(f"chart row {lineno}: Sex must be 1 or 2, got {sex_code}")
        series[sex_code][0].append(age)
        series[sex_code][1].append(med)
    for code in (1, 2):
        if not series[code][0]:
            raise ValidationError(f"missing sex {code} in chart")
    m_age, m_st = _check_series(*series[1], 1)
    f_age, f_st = _check_series(*series[2], 2)
    return GrowthChart(m_age, m_st, f_age, f_st)


def load_chart(path) -> GrowthChart:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_chart(text)


def builtin_chart() -> GrowthChart:
    """The synthetic-but-monotone fixture chart shipped with the package."""
    text = resources.files("fingergrowth").joinpath("data/stature_chart.csv").read_text()
    return parse_chart(text)


def median_stature(chart: GrowthChart, age: float, sex: Sex) -> float:
    """Linear interpolation in months; clamps below/above the knot range."""
    if age <= 0:
        raise ValidationError(f"age must be positive, got {age}")
    ages, stature = chart.knots(sex)
    return float(np.interp(age * MONTHS_PER_YEAR, ages, stature))


def scale_factor(chart: GrowthChart, x: float, y: float, sex: Sex) -> ScaleFactor:
    """Ratio of median statures at ages y and x: f = m(y) / m(x)."""
    value = 1.0 if x == y else median_stature(chart, y, sex) / median_stature(chart, x, sex)
    return ScaleFactor(value, x, y, sex)


def rescale_template(t: Template, f: ScaleFactor | float) -> Template:
    """Scale minutiae coordinates by f about the template barycenter."""
    value = f.value if isinstance(f, ScaleFactor) else float(f)
    if value <= 0:
        raise ValidationError(f"scale factor must be positive, got {value}")
    if value == 1.0:
        return t
    xy = t.coords()
    b = xy.mean(axis=0)
    return t.with_coords((xy - b) * value + b)


def rescale_config(xy: np.ndarray, value: float) -> np.ndarray:
    """Same rescaling for a bare point configuration."""
    if value <= 0:
        raise ValidationError(f"scale factor must be positive, got {value}")
    xy = as_config(xy)
    if value == 1.0:
        return xy
    b = xy.mean(axis=0)
    return (xy - b) * value + b


def rescale_dpi(dpi: float, f: ScaleFactor | float) -> float:
    """Declaring a lower DPI magnifies physical coordinates by f."""
    value = f.value if isinstance(f, ScaleFactor) else float(f)
    if dpi <= 0 or value <= 0:
        raise ValidationError("dpi and scale factor must be positive")
    return dpi / value


def factor_set(f: ScaleFactor, spread_pct: float, count: int) -> list[ScaleFactor]:
    """Multiplicative fan of scale factors, e.g. {0.95 f, f, 1.05 f} for the
    3-variant matching method (count=3, spread_pct=0.05)."""
    if count < 1 or count % 2 == 0:
        raise ValidationError(f"count must be an odd integer >= 1, got {count}")
    if spread_pct < 0:
        raise ValidationError(f"spread_pct must be >= 0, got {spread_pct}")
    qs = np.linspace(-1.0, 1.0, count) if count > 1 else np.array([0.0])
    out = []
    for q in qs:
        mult = 1.0 + spread_pct * float(q)
        if mult <= 0:
            raise ValidationError(f"spread_pct {spread_pct} too large: non-positive factor")
        out.append(ScaleFactor(f.value * mult, f.age_from, f.age_to, f.sex))
    return out
