"""Challenge calculus: realism scores, performance gap, suite qualification.

Quality scores measure realism in [0, 1]; higher is more realistic. The
performance gap of a challenge is genuine realism minus deepfake realism,
averaged over the frames of a response.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


class EmptySequence(ValueError):
    pass


class MissingGapData(KeyError):
    pass


class QualityScore(float):
    """A realism value checked to lie in [0, 1] at construction."""

    def __new__(cls, value: float) -> "QualityScore":
        v = float(value)
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"quality score {v} outside [0, 1]")
        return super().__new__(cls, v)


@dataclass(frozen=True)
class GapConfig:
    beta: float = 0.15
    eta: float = 0.9
    epsilon: float = 0.1

    def __post_init__(self) -> None:
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True)
class GapSummary:
    mean_gap: float
    n_samples: int


@dataclass(frozen=True)
class QualificationReport:
    per_challenge: Mapping[str, GapSummary]
    qualified: frozenset[str]
    beta: float

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "per_challenge": {
                cid: {"mean_gap": s.mean_gap, "n_samples": s.n_samples}
                for cid, s in sorted(self.per_challenge.items())
            },
            "qualified": sorted(self.qualified),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def hardness(self) -> dict[str, float]:
        """Mean gaps clipped at zero and scaled so the largest is 1."""
        clipped = {cid: max(s.mean_gap, 0.0) for cid, s in self.per_challenge.items()}
        top = max(clipped.values(), default=0.0)
        if top <= 0.0:
            return {cid: 0.0 for cid in clipped}
        return {cid: v / top for cid, v in clipped.items()}


def _checked_mean(scores: Sequence[float]) -> float:
    if len(scores) == 0:
        raise EmptySequence("quality score sequence is empty")
    return math.fsum(QualityScore(s) for s in scores) / len(scores)


def performance_gap(src_scores: Sequence[float], fake_scores: Sequence[float]) -> float:
    """Mean genuine realism minus mean deepfake realism; lies in [-1, 1]."""
    return _checked_mean(src_scores) - _checked_mean(fake_scores)


def qualify_suite(
    catalog: Iterable[str],
    gaps: Mapping[str, Sequence[tuple[Sequence[float], Sequence[float]]]],
    cfg: GapConfig,
) -> QualificationReport:
    """Keep the challenges whose mean performance gap exceeds ``cfg.beta``.

    ``catalog`` may be a Catalog or any iterable of challenge ids.
    """
    per: dict[str, GapSummary] = {}
    for cid in catalog:
        samples = gaps.get(cid)
        if not samples:
            raise MissingGapData(cid)
        values = [performance_gap(src, fake) for src, fake in samples]
        per[cid] = GapSummary(mean_gap=math.fsum(values) / len(values), n_samples=len(values))
    qualified = frozenset(cid for cid, s in per.items() if s.mean_gap > cfg.beta)
    return QualificationReport(per_challenge=per, qualified=qualified, beta=cfg.beta)


def calibrate_genuine_pass(genuine_gaps: Mapping[str, Sequence[float]], cfg: GapConfig) -> dict:
    """Pooled fraction of genuine gap-from-baseline samples below ``cfg.epsilon``."""
    pooled: list[float] = []
    for cid, samples in genuine_gaps.items():
        if len(samples) == 0:
            raise EmptySequence(f"no genuine gap samples for {cid!r}")
        pooled.extend(samples)
    if not pooled:
        raise EmptySequence("no genuine gap samples")
    frac = sum(1 for g in pooled if g < cfg.epsilon) / len(pooled)
    return {"pass_fraction": frac, "ok": frac > cfg.eta}
