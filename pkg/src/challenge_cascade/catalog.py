"""Challenge catalog: taxonomy entries, benefit ledger, loading and validation.

A catalog document is UTF-8 JSON with a single top-level ``challenges`` array.
Every enum value is written in lower snake case; subcategories keep their
hyphenated taxonomy names (``human-introduced``, ``real-objects`` ...).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Iterator, Mapping


class CatalogError(ValueError):
    """Base class for catalog loading and scoring errors."""


class SchemaError(CatalogError):
    pass


class DuplicateId(CatalogError):
    pass


class InvalidSubcategory(CatalogError):
    pass


class PassiveWithoutTrustedDevice(CatalogError):
    pass


class UnknownBenefitKey(CatalogError):
    pass


class Category(str, Enum):
    OCCLUSION = "occlusion"
    FACIAL_EXPRESSION = "facial_expression"
    FACIAL_DISTORTION = "facial_distortion"
    SURROUNDINGS = "surroundings"
    ADDITIONAL_DETAILS = "additional_details"


class Mode(str, Enum):
    ACTIVE = "active"
    PASSIVE = "passive"


class Equipment(str, Enum):
    NONE = "none"
    PHYSICAL_ARTICLE = "physical_article"
    TRUSTED_DEVICE = "trusted_device"


class TriState(str, Enum):
    OFFERED = "offered"
    QUASI = "quasi"
    NOT_OFFERED = "not_offered"

    @property
    def numeric(self) -> float:
        return _TRISTATE_NUMERIC[self]


_TRISTATE_NUMERIC = {TriState.OFFERED: 1.0, TriState.QUASI: 0.5, TriState.NOT_OFFERED: 0.0}


class Usability(str, Enum):
    EASY_TO_COMPREHEND = "easy_to_comprehend"
    APPROPRIATE_TO_REQUEST = "appropriate_to_request"
    PHYSICALLY_EFFORTLESS = "physically_effortless"
    NO_EQUIPMENT_NEEDED = "no_equipment_needed"
    DETECTED_BY_HUMANS = "detected_by_humans"
    HIGH_SENSITIVITY_TEST = "high_sensitivity_test"
    ACCESSIBLE = "accessible"


class Deployability(str, Enum):
    MARGINAL_COST = "marginal_cost"
    SERVER_COMPATIBLE = "server_compatible"
    CLIENT_COMPATIBLE = "client_compatible"


class PipelineComponent(str, Enum):
    """Attack surface of a face-swapping real-time deepfake pipeline."""

    FACE_DETECTOR = "face_detector"
    LANDMARK_DETECTION = "landmark_detection"
    FACE_ALIGNMENT = "face_alignment"
    SEGMENTATION = "segmentation"
    FACE_SWAPPER = "face_swapper"
    BLENDING = "blending"
    COLOR_CORRECTION = "color_correction"


class Channel(str, Enum):
    YAW_ANGLE = "yaw_angle"
    EXPRESSION_INTENSITY = "expression_intensity"
    OCCLUSION_FRACTION = "occlusion_fraction"
    LUMINANCE_SHIFT = "luminance_shift"
    NONE = "none"


# Closed subcategory lists. Additional-details is deliberately open: any
# non-empty name is admitted there (steganography, feed-overloading, ...).
ADMISSIBLE_SUBCATEGORIES: Mapping[Category, frozenset[str] | None] = MappingProxyType({
    Category.OCCLUSION: frozenset({"human-introduced", "subject-introduced", "real-objects", "synthetic"}),
    Category.FACIAL_EXPRESSION: frozenset({"human-introduced", "lip-movement", "micro-expressions"}),
    Category.FACIAL_DISTORTION: frozenset({"human-introduced", "geometric-transforms"}),
    Category.SURROUNDINGS: frozenset({"human-introduced", "software-introduced", "synthetic-background"}),
    Category.ADDITIONAL_DETAILS: None,
})

BENEFIT_KEYS: frozenset[str] = frozenset(u.value for u in Usability) | frozenset(d.value for d in Deployability)
DEFAULT_USABILITY_WEIGHTS: Mapping[str, float] = MappingProxyType({u.value: 1.0 for u in Usability})

_CHALLENGE_KEYS = frozenset(
    {"id", "name", "category", "subcategory", "mode", "benefits", "compliance", "required_equipment"}
)


@dataclass(frozen=True)
class BenefitProfile:
    usability: Mapping[Usability, TriState]
    deployability: Mapping[Deployability, TriState]
    adversarial: Mapping[PipelineComponent, TriState]

    def lookup(self, key: str) -> TriState:
        if key in _USABILITY_VALUES:
            return self.usability[Usability(key)]
        if key in _DEPLOYABILITY_VALUES:
            return self.deployability[Deployability(key)]
        raise UnknownBenefitKey(f"unknown benefit key {key!r}")

    def to_dict(self) -> dict[str, dict[str, str]]:
        return {
            "usability": {k.value: self.usability[k].value for k in Usability},
            "deployability": {k.value: self.deployability[k].value for k in Deployability},
            "adversarial": {k.value: self.adversarial[k].value for k in PipelineComponent},
        }


_USABILITY_VALUES = frozenset(u.value for u in Usability)
_DEPLOYABILITY_VALUES = frozenset(d.value for d in Deployability)


@dataclass(frozen=True)
class ComplianceSpec:
    channel: Channel
    min_delta: float
    within_s: float

    def to_dict(self) -> dict[str, Any]:
        return {"channel": self.channel.value, "min_delta": self.min_delta, "within_s": self.within_s}


@dataclass(frozen=True)
class Challenge:
    id: str
    name: str
    category: Category
    subcategory: str
    mode: Mode
    benefits: BenefitProfile
    compliance: ComplianceSpec
    required_equipment: frozenset[Equipment]

    # Identity is the catalog id; lets challenges live in sets.
    def __hash__(self) -> int:
        return hash(self.id)

    @property
    def is_passive(self) -> bool:
        return self.mode is Mode.PASSIVE

    def selector_matches(self, selector: str) -> bool:
        """True if ``selector`` ("category" or "category/subcategory") names this challenge."""
        cat, _, sub = selector.partition("/")
        if cat != self.category.value:
            return False
        return not sub or sub == self.subcategory

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "category": self.category.value,
            "subcategory": self.subcategory,
            "mode": self.mode.value,
            "benefits": self.benefits.to_dict(),
            "compliance": self.compliance.to_dict(),
            "required_equipment": sorted(e.value for e in self.required_equipment),
        }


class Catalog(Mapping[str, Challenge]):
    """Immutable, id-indexed collection of validated challenges (document order kept)."""

    def __init__(self, challenges: Iterable[Challenge] = ()):
        items = tuple(challenges)
        by_id: dict[str, Challenge] = {}
        for c in items:
            if c.id in by_id:
                raise DuplicateId(f"duplicate challenge id {c.id!r}")
            by_id[c.id] = c
        self._items = items
        self._by_id = MappingProxyType(by_id)

    def __getitem__(self, key: str) -> Challenge:
        return self._by_id[key]

    def __iter__(self) -> Iterator[str]:
        return (c.id for c in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Catalog):
            return NotImplemented
        return self._items == other._items

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Catalog({len(self)} challenges)"

    @property
    def challenges(self) -> tuple[Challenge, ...]:
        return self._items

    def categories(self) -> set[Category]:
        return {c.category for c in self._items}

    def to_document(self) -> dict[str, Any]:
        return {"challenges": [c.to_dict() for c in self._items]}

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2, ensure_ascii=False) + "\n"


def _enum(cls: type[Enum], raw: Any, where: str, field: str) -> Any:
    try:
        return cls(raw)
    except ValueError:
        allowed = ", ".join(repr(m.value) for m in cls)  # type: ignore[attr-defined]
        raise SchemaError(f"{where}: {field}={raw!r} is not one of {allowed}") from None


def _tristate_map(raw: Any, keys: type[Enum], where: str, field: str) -> dict:
    if not isinstance(raw, dict):
        raise SchemaError(f"{where}: {field} must be an object")
    expected = {k.value for k in keys}  # type: ignore[attr-defined]
    if set(raw) != expected:
        missing = sorted(expected - set(raw))
        extra = sorted(set(raw) - expected)
        raise SchemaError(f"{where}: {field} keys mismatch (missing={missing}, unknown={extra})")
    return {keys(k): _enum(TriState, v, where, f"{field}.{k}") for k, v in raw.items()}


def _number(raw: Any, where: str, field: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise SchemaError(f"{where}: {field} must be a number")
    return float(raw)


def _parse_challenge(entry: Any, index: int) -> Challenge:
    where = f"challenges[{index}]"
    if not isinstance(entry, dict):
        raise SchemaError(f"{where}: entry must be an object")
    if isinstance(entry.get("id"), str):
        where = f"challenge {entry['id']!r}"
    keys = set(entry)
    if keys != _CHALLENGE_KEYS:
        raise SchemaError(
            f"{where}: keys mismatch (missing={sorted(_CHALLENGE_KEYS - keys)}, unknown={sorted(keys - _CHALLENGE_KEYS)})"
        )
    cid, name, sub = entry["id"], entry["name"], entry["subcategory"]
    for field, val in (("id", cid), ("name", name), ("subcategory", sub)):
        if not isinstance(val, str) or not val:
            raise SchemaError(f"{where}: {field} must be a non-empty string")

    category = _enum(Category, entry["category"], where, "category")
    mode = _enum(Mode, entry["mode"], where, "mode")

    admissible = ADMISSIBLE_SUBCATEGORIES[category]
    if admissible is not None and sub not in admissible:
        raise InvalidSubcategory(f"{where}: subcategory {sub!r} not admissible for {category.value}")

    raw_eq = entry["required_equipment"]
    if not isinstance(raw_eq, list) or not raw_eq:
        raise SchemaError(f"{where}: required_equipment must be a non-empty array")
    equipment = frozenset(_enum(Equipment, e, where, "required_equipment") for e in raw_eq)
    if len(equipment) != len(raw_eq):
        raise SchemaError(f"{where}: required_equipment has repeated values")
    if Equipment.NONE in equipment and len(equipment) > 1:
        raise SchemaError(f"{where}: 'none' cannot be combined with other equipment")
    if mode is Mode.PASSIVE and Equipment.TRUSTED_DEVICE not in equipment:
        raise PassiveWithoutTrustedDevice(f"{where}: passive challenge must require trusted_device")

    raw_b = entry["benefits"]
    if not isinstance(raw_b, dict) or set(raw_b) != {"usability", "deployability", "adversarial"}:
        raise SchemaError(f"{where}: benefits must have exactly usability, deployability, adversarial")
    benefits = BenefitProfile(
        usability=MappingProxyType(_tristate_map(raw_b["usability"], Usability, where, "usability")),
        deployability=MappingProxyType(_tristate_map(raw_b["deployability"], Deployability, where, "deployability")),
        adversarial=MappingProxyType(_tristate_map(raw_b["adversarial"], PipelineComponent, where, "adversarial")),
    )
    if TriState.QUASI in benefits.deployability.values():
        raise SchemaError(f"{where}: deployability benefits cannot be quasi")
    if mode is Mode.PASSIVE and benefits.usability[Usability.PHYSICALLY_EFFORTLESS] is not TriState.OFFERED:
        raise SchemaError(f"{where}: passive challenge must offer physically_effortless")

    raw_c = entry["compliance"]
    if not isinstance(raw_c, dict) or set(raw_c) != {"channel", "min_delta", "within_s"}:
        raise SchemaError(f"{where}: compliance must have exactly channel, min_delta, within_s")
    compliance = ComplianceSpec(
        channel=_enum(Channel, raw_c["channel"], where, "compliance.channel"),
        min_delta=_number(raw_c["min_delta"], where, "compliance.min_delta"),
        within_s=_number(raw_c["within_s"], where, "compliance.within_s"),
    )
    if compliance.min_delta < 0 or compliance.within_s <= 0:
        raise SchemaError(f"{where}: compliance needs min_delta >= 0 and within_s > 0")
    if compliance.channel is Channel.NONE and mode is not Mode.PASSIVE:
        raise SchemaError(f"{where}: channel 'none' is reserved for passive challenges")
    if compliance.channel is not Channel.YAW_ANGLE and compliance.min_delta > 1:
        raise SchemaError(f"{where}: min_delta for {compliance.channel.value} is a fraction in [0, 1]")

    return Challenge(
        id=cid,
        name=name,
        category=category,
        subcategory=sub,
        mode=mode,
        benefits=benefits,
        compliance=compliance,
        required_equipment=equipment,
    )


def load_catalog(document: str | bytes | Mapping[str, Any]) -> Catalog:
    """Parse and validate a catalog document (JSON text or already-decoded mapping)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"catalog is not valid JSON: {exc}") from None
    if not isinstance(document, Mapping) or set(document) != {"challenges"}:
        raise SchemaError("catalog must be an object with exactly one key 'challenges'")
    entries = document["challenges"]
    if not isinstance(entries, list):
        raise SchemaError("'challenges' must be an array")

    parsed: list[Challenge] = []
    seen: set[str] = set()
    for i, entry in enumerate(entries):
        ch = _parse_challenge(entry, i)
        if ch.id in seen:
            raise DuplicateId(f"challenge {ch.id!r}: duplicate id")
        seen.add(ch.id)
        parsed.append(ch)
    return Catalog(parsed)


def load_catalog_file(path: str | Path) -> Catalog:
    return load_catalog(Path(path).read_text(encoding="utf-8"))


def default_catalog() -> Catalog:
    text = resources.files("challenge_cascade").joinpath("data/catalog.json").read_text(encoding="utf-8")
    return load_catalog(text)


def benefit_score(challenge: Challenge, weights: Mapping[str, float]) -> float:
    """Weighted sum of numeric benefit statuses over usability/deployability keys."""
    total = 0.0
    for key, w in weights.items():
        if key not in BENEFIT_KEYS:
            raise UnknownBenefitKey(f"unknown benefit key {key!r}")
        if w < 0:
            raise ValueError(f"benefit weight for {key!r} must be >= 0, got {w}")
        total += w * challenge.benefits.lookup(key).numeric
    return total


def usability_score(challenge: Challenge, weights: Mapping[str, float] = DEFAULT_USABILITY_WEIGHTS) -> float:
    """Benefit score normalized by the weight total, in [0, 1]."""
    denom = sum(weights.values())
    if denom <= 0:
        return 0.0
    return benefit_score(challenge, weights) / denom
