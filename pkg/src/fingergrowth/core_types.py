"""Domain data model and file I/O for minutiae templates and check-out records.

All coordinates are millimetres internally; pixel coordinates exist only at
the I/O boundary (mm = px * 25.4 / dpi).  All types are immutable after
construction.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError

MM_PER_INCH = 25.4


class MinutiaKind(enum.Enum):
    RIDGE_ENDING = "ridge_ending"
    BIFURCATION = "bifurcation"
    SINGULAR_POINT = "singular_point"
    UNKNOWN = "unknown"


class ImprintKind(enum.Enum):
    ROLLED = "rolled"
    PLAIN = "plain"


class Sex(enum.Enum):
    MALE = "M"
    FEMALE = "F"


class FingerId(enum.Enum):
    RIGHT_THUMB = "right_thumb"
    RIGHT_INDEX = "right_index"
    RIGHT_MIDDLE = "right_middle"
    RIGHT_RING = "right_ring"
    RIGHT_LITTLE = "right_little"
    LEFT_THUMB = "left_thumb"
    LEFT_INDEX = "left_index"
    LEFT_MIDDLE = "left_middle"
    LEFT_RING = "left_ring"
    LEFT_LITTLE = "left_little"


def px_to_mm(v: float, dpi: float) -> float:
    """Convert a pixel length to millimetres at the given resolution."""
    if dpi <= 0:
        raise ValidationError(f"dpi must be positive, got {dpi}")
    return v * MM_PER_INCH / dpi


def mm_to_px(v: float, dpi: float) -> float:
    if dpi <= 0:
        raise ValidationError(f"dpi must be positive, got {dpi}")
    return v * dpi / MM_PER_INCH


@dataclass(frozen=True)
class Minutia:
    x: float  # mm
    y: float  # mm
    kind: MinutiaKind = MinutiaKind.UNKNOWN

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValidationError(f"minutia coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class Template:
    minutiae: tuple[Minutia, ...]
    imprint_kind: ImprintKind
    dpi: float
    finger_id: FingerId

    def __post_init__(self):
        object.__setattr__(self, "minutiae", tuple(self.minutiae))
        if self.dpi <= 0:
            raise ValidationError(f"dpi must be positive, got {self.dpi}")
        if len(self.minutiae) < 3:
            raise ValidationError(f"minutiae count < 3 (got {len(self.minutiae)})")

    def coords(self) -> np.ndarray:
        """Minutiae coordinates as an (n, 2) float array in mm."""
        return np.array([[m.x, m.y] for m in self.minutiae], dtype=float)

    def kinds(self) -> tuple[MinutiaKind, ...]:
        return tuple(m.kind for m in self.minutiae)

    def with_coords(self, xy: np.ndarray) -> "Template":
        """Copy of this template with replaced coordinates, metadata preserved."""
        minutiae = tuple(
            Minutia(float(p[0]), float(p[1]), m.kind) for p, m in zip(xy, self.minutiae)
        )
        return Template(minutiae, self.imprint_kind, self.dpi, self.finger_id)


@dataclass(frozen=True)
class CheckoutRecord:
    person_id: str
    co_index: int
    age: float  # years
    sex: Sex
    templates: dict[ImprintKind, Template] = field(default_factory=dict)

    def __post_init__(self):
        if self.age <= 0:
            raise ValidationError(f"age must be positive, got {self.age} (person {self.person_id})")
        if not self.templates:
            raise ValidationError(f"checkout without templates (person {self.person_id})")


@dataclass(frozen=True)
class Person:
    person_id: str
    sex: Sex
    checkouts: tuple[CheckoutRecord, ...]


@dataclass(frozen=True)
class Dataset:
    persons: tuple[Person, ...]
    correspondence: bool

    def __post_init__(self):
        object.__setattr__(self, "persons", tuple(self.persons))
        _validate_dataset(self)

    def person(self, person_id: str) -> Person:
        for p in self.persons:
            if p.person_id == person_id:
                return p
        raise ValidationError(f"unknown person {person_id!r}")


def _validate_dataset(d: Dataset) -> None:
    seen = set()
    for p in d.persons:
        if p.person_id in seen:
            raise ValidationError(f"duplicate person id {p.person_id!r}")
        seen.add(p.person_id)
        prev_co, prev_age = None, None
        for co in p.checkouts:
            if co.person_id != p.person_id:
                raise ValidationError(
                    f"checkout person id {co.person_id!r} does not match person {p.person_id!r}")
            if co.sex != p.sex:
                raise ValidationError(f"inconsistent sex for person {p.person_id!r}")
            if prev_co is not None:
                if co.co_index <= prev_co:
                    raise ValidationError(
                        f"co_index not strictly increasing for person {p.person_id!r} "
                        f"(co {prev_co} -> {co.co_index})")
                if co.age <= prev_age:
                    raise ValidationError(
                        f"age not strictly increasing with co_index for person {p.person_id!r} "
                        f"(co {co.co_index}: age {prev_age} -> {co.age})")
            prev_co, prev_age = co.co_index, co.age
        if d.correspondence:
            # index-aligned minutiae: equal counts across all templates of the person's finger
            by_finger: dict[FingerId, int] = {}
            for co in p.checkouts:
                for t in co.templates.values():
                    n = len(t.minutiae)
                    ref = by_finger.setdefault(t.finger_id, n)
                    if n != ref:
                        raise ValidationError(
                            f"correspondence violated for person {p.person_id!r}, "
                            f"finger {t.finger_id.value}: minutiae counts {ref} != {n} "
                            f"(co {co.co_index})")


# ---------------------------------------------------------------------------
# File format: a single JSON document, coordinates in mm (full float precision).
# See README for the schema.

FORMAT_NAME = "fingergrowth-dataset"
FORMAT_VERSION = 1


def _minutia_to_json(m: Minutia):
    return [m.x, m.y, m.kind.value]


def _template_to_json(t: Template):
    return {
        "finger_id": t.finger_id.value,
        "dpi": t.dpi,
        "minutiae": [_minutia_to_json(m) for m in t.minutiae],
    }


def dataset_to_json(d: Dataset) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "correspondence": d.correspondence,
        "persons": [
            {
                "person_id": p.person_id,
                "sex": p.sex.value,
                "checkouts": [
                    {
                        "co_index": co.co_index,
                        "age": co.age,
                        "templates": {
                            kind.value: _template_to_json(t)
                            for kind, t in sorted(co.templates.items(), key=lambda kv: kv[0].value)
                        },
                    }
                    for co in p.checkouts
                ],
            }
            for p in d.persons
        ],
    }


def save_dataset(d: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_json(d), fh, indent=1)
        fh.write("\n")


def _parse_minutia(obj, where: str) -> Minutia:
    try:
        if isinstance(obj, dict):
            x, y = float(obj["x"]), float(obj["y"])
            kind = MinutiaKind(obj.get("kind", "unknown"))
        else:
            x, y = float(obj[0]), float(obj[1])
            kind = MinutiaKind(obj[2]) if len(obj) > 2 else MinutiaKind.UNKNOWN
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed minutia in {where}: {exc}") from None
    return Minutia(x, y, kind)


def _parse_template(obj, kind_key: str, where: str) -> Template:
    try:
        finger = FingerId(obj["finger_id"])
        dpi = float(obj["dpi"])
        imprint = ImprintKind(kind_key)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed template in {where}: {exc}") from None
    minutiae = tuple(_parse_minutia(m, where) for m in obj.get("minutiae", []))
    if len(minutiae) < 3:
        raise ValidationError(f"minutiae count < 3 in {where} (got {len(minutiae)})")
    return Template(minutiae, imprint, dpi, finger)


def dataset_from_json(doc: dict) -> Dataset:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ParseError(f"not a {FORMAT_NAME} document")
    persons = []
    for pobj in doc.get("persons", []):
        where_p = f"person {pobj.get('person_id', '?')!r}"
        try:
            sex = Sex(pobj["sex"])
            pid = str(pobj["person_id"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"malformed {where_p}: {exc}") from None
        checkouts = []
        for cobj in pobj.get("checkouts", []):
            where = f"{where_p}, co {cobj.get('co_index', '?')}"
            try:
                co_index = int(cobj["co_index"])
                age = float(cobj["age"])
                tmpl_objs = cobj["templates"]
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"malformed {where}: {exc}") from None
            templates = {
                ImprintKind(k): _parse_template(t, k, where) for k, t in tmpl_objs.items()
            }
            checkouts.append(CheckoutRecord(pid, co_index, age, sex, templates))
        persons.append(Person(pid, sex, tuple(checkouts)))
    return Dataset(tuple(persons), bool(doc.get("correspondence", False)))


def load_dataset(path) -> Dataset:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"cannot parse {path}: {exc}") from None
    return dataset_from_json(doc)


# Standalone single-template files (same minutia encoding as datasets).

TEMPLATE_FORMAT_NAME = "fingergrowth-template"


def template_to_json(t: Template) -> dict:
    return {
        "format": TEMPLATE_FORMAT_NAME,
        "version": FORMAT_VERSION,
        "imprint_kind": t.imprint_kind.value,
        **_template_to_json(t),
    }


def save_template(t: Template, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(template_to_json(t), fh, indent=1)
        fh.write("\n")


def template_from_json(doc: dict) -> Template:
    if not isinstance(doc, dict) or doc.get("format") != TEMPLATE_FORMAT_NAME:
        raise ParseError(f"not a {TEMPLATE_FORMAT_NAME} document")
    kind_key = doc.get("imprint_kind", ImprintKind.ROLLED.value)
    return _parse_template(doc, kind_key, "template file")


def load_template(path) -> Template:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"cannot parse {path}: {exc}") from None
    return template_from_json(doc)
