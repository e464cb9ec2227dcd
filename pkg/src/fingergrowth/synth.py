"""Synthetic longitudinal fingerprint generator (ground-truth oracle).

Each person gets a latent minutiae configuration (unit spread).  Per
check-out, the configuration is scaled to

    spread = base_size_mm * c_i * g(age, sex) * exp(eta_co) * exp(eps_imprint)

with g(age, sex) the chart median stature normalized by a fixed reference
stature, eta ~ N(0, sigma_eta) per check-out and eps ~ N(0, sigma_eps) per
imprint; positional jitter is added after scaling (press-down distortion
does not grow with age) and the configuration is renormalized to the target
spread, then a random rigid motion is applied.

Randomness is split into named streams keyed by (seed, stream, person,
check-out, imprint) via numpy SeedSequence, so adding persons or check-outs
never perturbs earlier draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_types import (CheckoutRecord, Dataset, FingerId, ImprintKind, Minutia,
                         MinutiaKind, Person, Sex, Template)
from .errors import ValidationError
from .geometry import RigidTransform
from .growth import GrowthChart, builtin_chart, median_stature

REF_STATURE_CM = 170.0  # sex-independent normalization for the size multiplier

_STREAM_PERSON = 1
_STREAM_CO = 2
_STREAM_IMPRINT = 3
_STREAM_DISTRACTOR = 4

_KIND_CHOICES = (MinutiaKind.RIDGE_ENDING, MinutiaKind.BIFURCATION, MinutiaKind.SINGULAR_POINT)


@dataclass(frozen=True)
class SynthConfig:
    n_persons: int = 48
    cos_per_person: tuple[int, int] = (2, 6)
    minutiae_per_finger: tuple[int, int] = (8, 20)
    sigma_eta: float = 0.0224
    sigma_eps: float = 0.0225
    jitter_mm: float = 0.15
    dropout_prob: float = 0.0
    base_size_mm: float = 12.0
    person_ratio_sd: float = 0.0
    anisotropy: float = 0.0      # x-stretch per unit deviation of the growth multiplier
    plain_ratio: float = 0.95    # systematic plain/rolled proportionality difference
    first_age: tuple[float, float] = (6.0, 15.0)
    last_age: tuple[float, float] = (17.0, 34.0)
    male_fraction: float = 35.0 / 48.0
    seed: int = 0

    def __post_init__(self):
        if self.n_persons < 1:
            raise ValidationError("n_persons must be >= 1")
        for name in ("sigma_eta", "sigma_eps", "jitter_mm", "person_ratio_sd"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")
        if not 0.0 <= self.dropout_prob <= 1.0:
            raise ValidationError("dropout_prob must be in [0, 1]")
        if not 0.0 <= self.male_fraction <= 1.0:
            raise ValidationError("male_fraction must be in [0, 1]")
        for name in ("cos_per_person", "minutiae_per_finger", "first_age", "last_age"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValidationError(f"{name} range is empty: {lo} > {hi}")
        if self.cos_per_person[0] < 2:
            raise ValidationError("need at least 2 check-outs per person")
        if self.minutiae_per_finger[0] < 3:
            raise ValidationError("need at least 3 minutiae per finger")
        if self.base_size_mm <= 0 or self.plain_ratio <= 0:
            raise ValidationError("base_size_mm and plain_ratio must be positive")


@dataclass(frozen=True)
class ImprintTruth:
    eps: float
    spread: float
    transform: RigidTransform


@dataclass(frozen=True)
class CheckoutTruth:
    age: float
    growth_multiplier: float
    eta: float
    imprints: dict[ImprintKind, ImprintTruth] = field(default_factory=dict)


@dataclass(frozen=True)
class PersonTruth:
    person_id: str
    sex: Sex
    latent: np.ndarray          # (m, 2), unit spread, zero barycenter
    ratio: float                # c_i
    checkouts: tuple[CheckoutTruth, ...]


@dataclass(frozen=True)
class GroundTruth:
    persons: tuple[PersonTruth, ...]
    seed: int


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(key))


def _draw_latent(rng: np.random.Generator, m: int) -> np.ndarray:
    # uniform in the unit disk, recentered and normalized to unit spread
    r = np.sqrt(rng.uniform(0.0, 1.0, m))
    phi = rng.uniform(0.0, 2.0 * np.pi, m)
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    pts -= pts.mean(axis=0)
    nrm = np.sqrt(np.sum(pts ** 2))
    if nrm == 0.0:
        pts[0, 0] = 1e-6
        nrm = np.sqrt(np.sum(pts ** 2))
    return pts / nrm


def _draw_co_count(rng: np.random.Generator, lo: int, hi: int) -> int:
    # skewed toward more check-outs (repeat offenders accumulate records)
    values = np.arange(lo, hi + 1)
    weights = np.arange(1, len(values) + 1, dtype=float) ** 2
    return int(rng.choice(values, p=weights / weights.sum()))


def _growth_multiplier(chart: GrowthChart, age: float, sex: Sex) -> float:
    return median_stature(chart, age, sex) / REF_STATURE_CM


def _make_imprint(latent, kinds, spread_target, g_mult, cfg, rng
                  ) -> tuple[np.ndarray, np.ndarray, RigidTransform]:
    shape = latent.copy()
    if cfg.anisotropy != 0.0:
        shape[:, 0] *= 1.0 + cfg.anisotropy * (g_mult - 1.0)
        shape -= shape.mean(axis=0)
        shape /= np.sqrt(np.sum(shape ** 2))
    coords = spread_target * shape
    if cfg.jitter_mm > 0.0:
        # jitter perturbs minutia positions but the imprint is renormalized so
        # the realized spread stays exactly at its target: acquisition noise
        # distorts shape, while size noise is carried by eta/eps alone
        coords = coords + rng.normal(0.0, cfg.jitter_mm, coords.shape)
        coords -= coords.mean(axis=0)
        nrm = np.sqrt(np.sum(coords ** 2))
        if nrm > 0.0:
            coords *= spread_target / nrm
    theta = float(rng.uniform(-math.pi, math.pi))
    translation = rng.uniform(-20.0, 20.0, 2)
    transform = RigidTransform(theta, (float(translation[0]), float(translation[1])))
    coords = transform.apply(coords)
    keep = np.ones(coords.shape[0], dtype=bool)
    if cfg.dropout_prob > 0.0:
        keep = rng.uniform(0.0, 1.0, coords.shape[0]) >= cfg.dropout_prob
        if keep.sum() < 3:
            keep[:3] = True
    return coords[keep], kinds[keep], transform


def _template(coords, kinds, imprint_kind) -> Template:
    minutiae = tuple(Minutia(float(x), float(y), MinutiaKind(k))
                     for (x, y), k in zip(coords, kinds))
    return Template(minutiae, imprint_kind, 500.0, FingerId.RIGHT_INDEX)


def generate(cfg: SynthConfig, chart: GrowthChart | None = None) -> tuple[Dataset, GroundTruth]:
    if chart is None:
        chart = builtin_chart()
    persons = []
    truths = []
    for i in range(cfg.n_persons):
        rng_p = _rng(cfg.seed, _STREAM_PERSON, i)
        pid = f"synth{i:04d}"
        sex = Sex.MALE if rng_p.uniform() < cfg.male_fraction else Sex.FEMALE
        n_cos = _draw_co_count(rng_p, *cfg.cos_per_person)
        m = int(rng_p.integers(cfg.minutiae_per_finger[0], cfg.minutiae_per_finger[1] + 1))
        latent = _draw_latent(rng_p, m)
        kinds = rng_p.choice([k.value for k in _KIND_CHOICES], m)
        ratio = float(np.exp(rng_p.normal(0.0, cfg.person_ratio_sd))) if cfg.person_ratio_sd > 0 else 1.0
        first = float(rng_p.uniform(*cfg.first_age))
        last = float(rng_p.uniform(*cfg.last_age))
        mids = sorted(float(a) for a in rng_p.uniform(first, last, n_cos - 2))
        ages = [first, *mids, last]

        checkouts = []
        co_truths = []
        for j, age in enumerate(ages):
            rng_co = _rng(cfg.seed, _STREAM_CO, i, j)
            eta = float(rng_co.normal(0.0, cfg.sigma_eta)) if cfg.sigma_eta > 0 else 0.0
            g_mult = _growth_multiplier(chart, age, sex)
            templates = {}
            imprint_truths = {}
            for k_idx, imprint_kind in enumerate((ImprintKind.ROLLED, ImprintKind.PLAIN)):
                rng_imp = _rng(cfg.seed, _STREAM_IMPRINT, i, j, k_idx)
                eps = float(rng_imp.normal(0.0, cfg.sigma_eps)) if cfg.sigma_eps > 0 else 0.0
                kind_ratio = cfg.plain_ratio if imprint_kind is ImprintKind.PLAIN else 1.0
                spread_target = (cfg.base_size_mm * ratio * g_mult
                                 * math.exp(eta) * math.exp(eps) * kind_ratio)
                coords, kept_kinds, transform = _make_imprint(
                    latent, kinds, spread_target, g_mult, cfg, rng_imp)
                templates[imprint_kind] = _template(coords, kept_kinds, imprint_kind)
                imprint_truths[imprint_kind] = ImprintTruth(eps, spread_target, transform)
            checkouts.append(CheckoutRecord(pid, j + 1, age, sex, templates))
            co_truths.append(CheckoutTruth(age, g_mult, eta, imprint_truths))
        persons.append(Person(pid, sex, tuple(checkouts)))
        truths.append(PersonTruth(pid, sex, latent, ratio, tuple(co_truths)))
    dataset = Dataset(tuple(persons), correspondence=(cfg.dropout_prob == 0.0))
    return dataset, GroundTruth(tuple(truths), cfg.seed)


@dataclass(frozen=True)
class GalleryEntry:
    template: Template
    person_id: str
    age: float
    sex: Sex


def distractor_gallery(n: int, cfg: SynthConfig, seed: int | None = None,
                       chart: GrowthChart | None = None) -> list[GalleryEntry]:
    """Independent adult-age templates without longitudinal structure."""
    if n < 0:
        raise ValidationError("n must be >= 0")
    if chart is None:
        chart = builtin_chart()
    if seed is None:
        seed = cfg.seed
    entries = []
    for idx in range(n):
        rng = _rng(seed, _STREAM_DISTRACTOR, idx)
        sex = Sex.MALE if rng.uniform() < cfg.male_fraction else Sex.FEMALE
        age = float(rng.uniform(*cfg.last_age))
        m = int(rng.integers(cfg.minutiae_per_finger[0], cfg.minutiae_per_finger[1] + 1))
        latent = _draw_latent(rng, m)
        kinds = rng.choice([k.value for k in _KIND_CHOICES], m)
        ratio = float(np.exp(rng.normal(0.0, cfg.person_ratio_sd))) if cfg.person_ratio_sd > 0 else 1.0
        noise = float(rng.normal(0.0, math.hypot(cfg.sigma_eta, cfg.sigma_eps)))
        spread_target = (cfg.base_size_mm * ratio
                         * _growth_multiplier(chart, age, sex) * math.exp(noise))
        coords, kept_kinds, _ = _make_imprint(
            latent, kinds, spread_target, 1.0, cfg, rng)
        entries.append(GalleryEntry(_template(coords, kept_kinds, ImprintKind.ROLLED),
                                    f"distractor{idx:06d}", age, sex))
    return entries


# JSON sidecar for the ground truth ------------------------------------------

def ground_truth_to_json(gt: GroundTruth) -> dict:
    return {
        "format": "fingergrowth-ground-truth",
        "seed": gt.seed,
        "persons": [
            {
                "person_id": p.person_id,
                "sex": p.sex.value,
                "ratio": p.ratio,
                "latent": [[float(x), float(y)] for x, y in p.latent],
                "checkouts": [
                    {
                        "age": co.age,
                        "growth_multiplier": co.growth_multiplier,
                        "eta": co.eta,
                        "imprints": {
                            kind.value: {
                                "eps": imp.eps,
                                "spread": imp.spread,
                                "rotation": imp.transform.rotation,
                                "translation": list(imp.transform.translation),
                            }
                            for kind, imp in sorted(co.imprints.items(), key=lambda kv: kv[0].value)
                        },
                    }
                    for co in p.checkouts
                ],
            }
            for p in gt.persons
        ],
    }
