"""Pipeline profiles: per-challenge behavior of a genuine participant or a deepfake pipeline.

The shipped numbers are synthetic. They encode qualitative orderings only:
genuine responses are the most realistic; among face-swap pipelines the
lightly trained DeepFaceLab model degrades most, the heavily trained one
least, FSGAN in between; the reenactment pipeline (LIA) looks clean but
mostly cannot perform active challenges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

from ..catalog import Catalog, Category, Mode


class ProfileError(ValueError):
    pass


class PipelineKind(str, Enum):
    GENUINE = "genuine"
    LDFL = "ldfl"
    HDFL = "hdfl"
    FSGAN = "fsgan"
    LIA = "lia"


FAKE_KINDS = (PipelineKind.LDFL, PipelineKind.FSGAN, PipelineKind.HDFL, PipelineKind.LIA)
SWAP_KINDS = (PipelineKind.LDFL, PipelineKind.FSGAN, PipelineKind.HDFL)


class PassiveKind(str, Enum):
    FLIP = "flip"
    NOISE_ADDITION = "noise_addition"
    COLOR_FILTER = "color_filter"
    CUTOUT = "cutout"
    WARP = "warp"
    FEED_DUPLICATION = "feed_duplication"


@dataclass(frozen=True)
class PassiveTransform:
    kind: PassiveKind
    degradation_delta: float = 0.0
    extra_faces: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PassiveKind(self.kind))
        if not 0.0 <= self.degradation_delta <= 1.0:
            raise ProfileError(f"degradation_delta must be in [0, 1], got {self.degradation_delta}")
        if self.extra_faces < 0:
            raise ProfileError("extra_faces must be >= 0")
        if self.kind is not PassiveKind.FEED_DUPLICATION and self.extra_faces:
            raise ProfileError("extra_faces only applies to feed duplication")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind.value, "degradation_delta": self.degradation_delta}
        if self.kind is PassiveKind.FEED_DUPLICATION:
            d["extra_faces"] = self.extra_faces
        return d


@dataclass(frozen=True)
class ChallengeBehavior:
    realism_mean: float
    realism_std: float
    compliance_prob: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.realism_mean <= 1.0:
            raise ProfileError(f"realism_mean must be in [0, 1], got {self.realism_mean}")
        if not self.realism_std > 0:
            raise ProfileError(f"realism_std must be > 0, got {self.realism_std}")
        if not 0.0 <= self.compliance_prob <= 1.0:
            raise ProfileError(f"compliance_prob must be in [0, 1], got {self.compliance_prob}")

    def to_dict(self) -> dict[str, float]:
        return {"realism_mean": self.realism_mean, "realism_std": self.realism_std,
                "compliance_prob": self.compliance_prob}


@dataclass(frozen=True)
class PipelineProfile:
    """Behavior of one pipeline.

    ``participant_spread`` is the standard deviation of a per-participant
    realism offset: individual impersonators (and genuine callers with poor
    cameras or lighting) shift every response of a session together.
    ``response_spread`` adds an independent offset per response (lighting or
    framing drift between captures).
    """

    name: PipelineKind
    per_challenge: Mapping[str, ChallengeBehavior]
    fps_capacity: float
    fps_max: float
    passive: Mapping[str, PassiveTransform] = field(default_factory=dict)
    participant_spread: float = 0.0
    response_spread: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "name", PipelineKind(self.name))
        object.__setattr__(self, "per_challenge", MappingProxyType(dict(self.per_challenge)))
        object.__setattr__(self, "passive", MappingProxyType(dict(self.passive)))
        if not (self.fps_capacity > 0 and self.fps_max > 0):
            raise ProfileError("fps_capacity and fps_max must be positive")
        if not (self.participant_spread >= 0 and self.response_spread >= 0):
            raise ProfileError("participant_spread and response_spread must be >= 0")

    @property
    def is_genuine(self) -> bool:
        return self.name is PipelineKind.GENUINE

    def effective_realism(self, challenge_id: str) -> float:
        """Expected realism including any passive degradation (none for genuine)."""
        mean = self.per_challenge[challenge_id].realism_mean
        tf = self.passive.get(challenge_id)
        if tf is not None and not self.is_genuine:
            mean = max(mean - tf.degradation_delta, 0.0)
        return mean

    def shifted(self, offset: float) -> "PipelineProfile":
        """Copy with every realism mean moved by ``offset`` (clamped to [0, 1])."""
        if offset == 0.0:
            return self
        moved = {
            cid: replace(b, realism_mean=min(max(b.realism_mean + offset, 0.0), 1.0))
            for cid, b in self.per_challenge.items()
        }
        return replace(self, per_challenge=moved)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "PipelineProfile":
        required = {"name", "fps_capacity", "fps_max", "per_challenge"}
        missing = required - set(raw)
        if missing:
            raise ProfileError(f"profile missing keys {sorted(missing)}")
        unknown = set(raw) - required - {"passive", "participant_spread", "response_spread", "description"}
        if unknown:
            raise ProfileError(f"profile has unknown keys {sorted(unknown)}")
        try:
            return cls(
                name=PipelineKind(raw["name"]),
                per_challenge={cid: ChallengeBehavior(**b) for cid, b in raw["per_challenge"].items()},
                fps_capacity=float(raw["fps_capacity"]),
                fps_max=float(raw["fps_max"]),
                passive={cid: PassiveTransform(**t) for cid, t in raw.get("passive", {}).items()},
                participant_spread=float(raw.get("participant_spread", 0.0)),
                response_spread=float(raw.get("response_spread", 0.0)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ProfileError):
                raise
            raise ProfileError(f"profile {raw.get('name')!r}: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name.value,
            "fps_capacity": self.fps_capacity,
            "fps_max": self.fps_max,
            "participant_spread": self.participant_spread,
            "response_spread": self.response_spread,
            "per_challenge": {cid: b.to_dict() for cid, b in self.per_challenge.items()},
            "passive": {cid: t.to_dict() for cid, t in self.passive.items()},
        }


def load_profile(path: str | Path) -> PipelineProfile:
    return PipelineProfile.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_profiles(directory: str | Path) -> dict[PipelineKind, PipelineProfile]:
    out: dict[PipelineKind, PipelineProfile] = {}
    for path in sorted(Path(directory).glob("*.json")):
        prof = load_profile(path)
        if prof.name in out:
            raise ProfileError(f"two profiles named {prof.name.value!r} in {directory}")
        out[prof.name] = prof
    return out


def default_profiles() -> dict[PipelineKind, PipelineProfile]:
    base = resources.files("challenge_cascade").joinpath("data/profiles")
    out = {}
    for kind in PipelineKind:
        raw = json.loads(base.joinpath(f"{kind.value}.json").read_text(encoding="utf-8"))
        out[kind] = PipelineProfile.from_dict(raw)
    return out


# Expression and distortion challenges are the ones a reenactment model
# cannot reproduce; realism above this counts as "looks clean".
_LIA_CLEAN_REALISM = 0.75


def validate_profiles(profiles: Mapping[PipelineKind, PipelineProfile], catalog: Catalog) -> None:
    """Raise ProfileError unless the ordering and compliance invariants hold."""
    for kind, prof in profiles.items():
        missing = set(catalog) - set(prof.per_challenge)
        if missing:
            raise ProfileError(f"{kind.value}: no behavior for {sorted(missing)}")

    genuine = profiles.get(PipelineKind.GENUINE)
    if genuine is not None:
        for cid, ch in catalog.items():
            if ch.mode is Mode.ACTIVE and genuine.per_challenge[cid].compliance_prob != 1.0:
                raise ProfileError(f"genuine compliance for active {cid!r} must be 1")
            for kind, prof in profiles.items():
                if kind is not PipelineKind.GENUINE and prof.effective_realism(cid) > genuine.effective_realism(cid):
                    raise ProfileError(f"{kind.value} is more realistic than genuine on {cid!r}")

    swap = [profiles.get(k) for k in SWAP_KINDS]
    if all(p is not None for p in swap):
        ldfl, fsgan, hdfl = swap
        for cid in catalog:
            a = [1.0 - p.effective_realism(cid) for p in (ldfl, fsgan, hdfl)]
            if not a[0] >= a[1] >= a[2]:
                raise ProfileError(f"anomaly ordering LDFL >= FSGAN >= HDFL violated on {cid!r}: {a}")

    lia = profiles.get(PipelineKind.LIA)
    if lia is not None:
        for cid, ch in catalog.items():
            if ch.mode is Mode.ACTIVE and ch.category in (Category.FACIAL_EXPRESSION, Category.FACIAL_DISTORTION):
                b = lia.per_challenge[cid]
                if not b.compliance_prob < 0.5:
                    raise ProfileError(f"lia compliance on {cid!r} must be < 0.5")
                if b.realism_mean < _LIA_CLEAN_REALISM:
                    raise ProfileError(f"lia realism on {cid!r} must stay high (>= {_LIA_CLEAN_REALISM})")


def fps_under_load(n_faces: int, profile: PipelineProfile) -> float:
    """Output frame rate when the feed carries ``n_faces`` faces: min(fps_max, capacity / n)."""
    if n_faces < 1:
        raise ValueError("n_faces must be >= 1")
    return min(profile.fps_max, profile.fps_capacity / n_faces)
