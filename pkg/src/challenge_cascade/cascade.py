"""Context filtering, utility scoring and cascade construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .catalog import DEFAULT_USABILITY_WEIGHTS, Challenge, Equipment, Mode, usability_score


class EmptyEligibleSet(ValueError):
    pass


class MissingHardness(KeyError):
    pass


CONTEXT_PRESETS = ("interview", "executive-call")


@dataclass(frozen=True)
class Context:
    allowed_modes: frozenset[Mode] = frozenset({Mode.ACTIVE, Mode.PASSIVE})
    excluded_categories: frozenset[str] = frozenset()
    has_physical_articles: bool = True
    has_trusted_device: bool = True
    security_level: float = 1.0
    usability_floor: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "allowed_modes", frozenset(Mode(m) for m in self.allowed_modes))
        object.__setattr__(self, "excluded_categories", frozenset(self.excluded_categories))
        if not self.allowed_modes:
            raise ValueError("context must allow at least one mode")
        for name in ("security_level", "usability_floor"):
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"{name} must be a finite value in [0, 1], got {v}")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "Context":
        known = {"allowed_modes", "excluded_categories", "has_physical_articles",
                 "has_trusted_device", "security_level", "usability_floor"}
        unknown = set(raw) - known - {"name", "description"}
        if unknown:
            raise ValueError(f"unknown context keys: {sorted(unknown)}")
        kwargs = {k: raw[k] for k in known if k in raw}
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        return {
            "allowed_modes": sorted(m.value for m in self.allowed_modes),
            "excluded_categories": sorted(self.excluded_categories),
            "has_physical_articles": self.has_physical_articles,
            "has_trusted_device": self.has_trusted_device,
            "security_level": self.security_level,
            "usability_floor": self.usability_floor,
        }


def load_context(name_or_path: str | Path) -> Context:
    """Load a bundled preset by name ("interview", "executive-call") or a JSON file path."""
    if str(name_or_path) in CONTEXT_PRESETS:
        text = resources.files("challenge_cascade").joinpath(f"data/contexts/{name_or_path}.json").read_text("utf-8")
    else:
        text = Path(name_or_path).read_text(encoding="utf-8")
    return Context.from_dict(json.loads(text))


@dataclass(frozen=True)
class Cascade:
    items: tuple[tuple[str, float], ...]
    target_len: int

    def __len__(self) -> int:
        return len(self.items)

    @property
    def ids(self) -> list[str]:
        return [cid for cid, _ in self.items]

    def to_list(self) -> list[dict[str, Any]]:
        return [{"id": cid, "utility": u} for cid, u in self.items]

    def to_json(self) -> str:
        return json.dumps(self.to_list(), indent=2) + "\n"


def is_eligible(c: Challenge, ctx: Context) -> bool:
    if c.mode not in ctx.allowed_modes:
        return False
    if any(c.selector_matches(sel) for sel in ctx.excluded_categories):
        return False
    if Equipment.PHYSICAL_ARTICLE in c.required_equipment and not ctx.has_physical_articles:
        return False
    if Equipment.TRUSTED_DEVICE in c.required_equipment and not ctx.has_trusted_device:
        return False
    # A zero floor (all shipped presets) never excludes anything.
    if ctx.usability_floor > 0 and usability_score(c) < ctx.usability_floor:
        return False
    return True


def filter_eligible(suite: Iterable[Challenge], ctx: Context) -> set[Challenge]:
    return {c for c in suite if is_eligible(c, ctx)}


def utility(
    challenge: Challenge,
    ctx: Context,
    hardness: Mapping[str, float],
    usability_weights: Mapping[str, float] = DEFAULT_USABILITY_WEIGHTS,
) -> float:
    """Convex mix of hardness and normalized usability, steered by the security level."""
    if challenge.id not in hardness:
        raise MissingHardness(challenge.id)
    h = hardness[challenge.id]
    if not 0.0 <= h <= 1.0:
        raise ValueError(f"hardness for {challenge.id!r} must be in [0, 1], got {h}")
    s = ctx.security_level
    return s * h + (1.0 - s) * usability_score(challenge, usability_weights)


def build_cascade(
    suite: Iterable[Challenge],
    ctx: Context,
    n: int,
    rng_seed: int = 0,
    *,
    hardness: Mapping[str, float],
    stochastic: bool = False,
    usability_weights: Mapping[str, float] = DEFAULT_USABILITY_WEIGHTS,
) -> Cascade:
    """Select up to ``n`` eligible challenges and order them by non-decreasing utility.

    Deterministic mode takes the top ``n`` by utility (ties go to the smaller
    id). Stochastic mode, used only when more than ``n`` challenges are
    eligible, draws ``n`` without replacement with probability proportional
    to utility.
    """
    if n < 1:
        raise ValueError("cascade length must be >= 1")
    eligible = sorted(filter_eligible(suite, ctx), key=lambda c: c.id)
    if not eligible:
        raise EmptyEligibleSet("no challenge in the suite is eligible under this context")
    scored = [(c.id, utility(c, ctx, hardness, usability_weights)) for c in eligible]

    if stochastic and len(scored) > n:
        rng = np.random.default_rng(rng_seed)
        w = np.array([u for _, u in scored]) + 1e-12
        picks = rng.choice(len(scored), size=n, replace=False, p=w / w.sum())
        chosen = [scored[i] for i in picks]
    else:
        chosen = sorted(scored, key=lambda t: (-t[1], t[0]))[:n]

    chosen.sort(key=lambda t: (t[1], t[0]))
    return Cascade(items=tuple(chosen), target_len=n)
