"""Challenge-response session protocol.

One session walks a participant through a cascade: issue a challenge, capture
the response until timeout, verify compliance (reissuing the same challenge on
failure, up to ``max_retries`` times), grade the response, fold the grade into
the cumulative score, and stop early once the running mean score crosses the
threshold.

Two score orientations are supported. ``LITERAL`` adds ``ln(p) * q_bar`` per
graded challenge, so scores are non-positive and a manipulated feed sits
*closer to zero* than a genuine one. ``CONFIDENCE_POSITIVE`` adds
``-ln(1 - p) * q_bar``, so scores rise with evidence of manipulation. In both
orientations a larger running mean means "more likely manipulated", and the
session fails when the running mean exceeds the threshold.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Protocol, Sequence

import numpy as np

from .cascade import Cascade, Context, build_cascade, filter_eligible
from .catalog import Catalog, Challenge, Channel
from .grader import DEFAULT_S, FeatureModel, GradeResult, InsufficientData, grade
from .trace import EmptyTrace, ResponseTrace

P_CLAMP = 1.0 - 1e-12


class EmptySuite(ValueError):
    pass


class CaptureTimeout(Exception):
    """Raised by a response source that produced nothing before the timeout."""


class DomainError(ValueError):
    pass


class ScoreMode(str, Enum):
    LITERAL = "literal"
    CONFIDENCE_POSITIVE = "confidence-positive"


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"


class FailReason(str, Enum):
    THRESHOLD_EXCEEDED = "threshold_exceeded"
    VERIFICATION_EXHAUSTED = "verification_exhausted"


@dataclass(frozen=True)
class SessionConfig:
    threshold_T: float = math.inf
    cascade_len: int = 14
    timeout_s: float = 10.0
    max_retries: int = 3
    score_mode: ScoreMode = ScoreMode.CONFIDENCE_POSITIVE
    s: float = DEFAULT_S
    rng_seed: int = 0
    stochastic_cascade: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "score_mode", ScoreMode(self.score_mode))
        if self.cascade_len < 1:
            raise ValueError("cascade_len must be >= 1")
        if not self.timeout_s > 0:
            raise ValueError("timeout_s must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not self.s > 0:
            raise ValueError("s must be > 0")
        if math.isnan(self.threshold_T):
            raise ValueError("threshold_T must not be NaN")


class ResponseSource(Protocol):
    participant_id: str

    def respond(self, challenge: Challenge, attempt: int, timeout_s: float) -> ResponseTrace:
        """Return the captured response; raise CaptureTimeout if nothing arrives."""
        ...


@dataclass(frozen=True)
class StepRecord:
    challenge_id: str
    verified: bool
    retry_index: int
    grade: Optional[GradeResult]
    increment: Optional[float]
    timestamp_s: float
    timed_out: bool = False

    def __post_init__(self) -> None:
        if (self.grade is not None) != self.verified:
            raise ValueError("a step carries a grade exactly when it was verified")

    def to_dict(self) -> dict:
        return {
            "challenge_id": self.challenge_id,
            "verified": self.verified,
            "retry_index": self.retry_index,
            "timed_out": self.timed_out,
            "grade": None if self.grade is None else self.grade.to_dict(),
            "increment": self.increment,
            "timestamp_s": self.timestamp_s,
        }


def _finite_or_none(x: float) -> Optional[float]:
    return x if math.isfinite(x) else None


@dataclass(frozen=True)
class SessionRecord:
    participant_id: str
    cascade: Cascade
    steps: tuple[StepRecord, ...]
    E: float
    E_bar: float
    verdict: Verdict
    fail_reason: Optional[FailReason]
    threshold_T: float
    score_mode: ScoreMode

    @property
    def graded_steps(self) -> list[StepRecord]:
        return [s for s in self.steps if s.verified]

    def trajectory(self) -> list[float]:
        """Cumulative score after each graded challenge."""
        return [float(v) for v in np.cumsum([s.increment for s in self.graded_steps])]

    def running_means(self) -> list[float]:
        return [e / k for k, e in enumerate(self.trajectory(), start=1)]

    def peak_running_mean(self) -> float:
        """Largest running mean reached; the statistic the early-exit rule tests."""
        return max(self.running_means(), default=0.0)

    def verdict_at(self, threshold: float) -> tuple[Verdict, Optional[FailReason]]:
        """Verdict this transcript would have produced under another threshold.

        Valid for transcripts recorded at a threshold no lower than
        ``threshold`` (typically an unbounded one), because the early-exit
        rule depends only on the transcript prefix.
        """
        for m in self.running_means():
            if m > threshold:
                return Verdict.FAIL, FailReason.THRESHOLD_EXCEEDED
        if self.fail_reason is FailReason.VERIFICATION_EXHAUSTED:
            return Verdict.FAIL, FailReason.VERIFICATION_EXHAUSTED
        return Verdict.PASS, None

    def to_dict(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "score_mode": self.score_mode.value,
            "threshold_T": _finite_or_none(self.threshold_T),
            "cascade": self.cascade.to_list(),
            "steps": [s.to_dict() for s in self.steps],
            "E": self.E,
            "E_bar": self.E_bar,
            "verdict": self.verdict.value,
            "fail_reason": None if self.fail_reason is None else self.fail_reason.value,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["participant_id", "step_index", "challenge_id", "retry_index", "verified",
                    "q_bar", "p", "increment", "E", "E_bar", "verdict"])
        e, graded = 0.0, 0
        for i, st in enumerate(self.steps):
            if st.verified:
                e += st.increment
                graded += 1
            w.writerow([
                self.participant_id, i, st.challenge_id, st.retry_index, str(st.verified).lower(),
                "" if st.grade is None else repr(st.grade.q_bar),
                "" if st.grade is None else repr(st.grade.p),
                "" if st.increment is None else repr(st.increment),
                repr(e), repr(e / graded if graded else 0.0), self.verdict.value,
            ])
        return buf.getvalue()


def verify_response(challenge: Challenge, trace: ResponseTrace) -> bool:
    """Check that the compliance channel moved by at least ``min_delta`` within the window."""
    if len(trace) == 0:
        raise EmptyTrace(f"trace for {trace.challenge_id!r} has no frames")
    spec = challenge.compliance
    if spec.channel is Channel.NONE:
        return True
    window = trace.channel(spec.channel)[trace.timestamps <= spec.within_s]
    if window.size == 0:
        return False
    return float(window.max() - window.min()) >= spec.min_delta


def amplify(E: float, p: float, q_bar: float, mode: ScoreMode | str) -> float:
    """Fold one graded challenge into the cumulative score."""
    mode = ScoreMode(mode)
    if not 0.0 < p <= 1.0:
        raise DomainError(f"confidence p={p} outside (0, 1]")
    if mode is ScoreMode.LITERAL:
        return E + math.log(p) * q_bar
    if p == 1.0:
        raise DomainError("confidence-positive scoring needs p < 1; clamp before calling")
    return E + (-math.log1p(-p)) * q_bar


def _truncate(trace: ResponseTrace, timeout_s: float) -> ResponseTrace:
    if trace.duration_s <= timeout_s:
        return trace
    n = round(trace.nominal_fps * timeout_s)
    cols = {c: getattr(trace, c)[:n] for c in
            ("realism", "yaw_deg", "expression_intensity", "occlusion_fraction", "luminance_shift", "n_faces")}
    return trace.with_columns(duration_s=timeout_s, **cols)


def run_session(
    participant: ResponseSource,
    catalog: Catalog,
    suite: Iterable[str | Challenge],
    ctx: Context,
    cfg: SessionConfig,
    *,
    models: tuple[FeatureModel, FeatureModel],
    hardness: Mapping[str, float],
) -> SessionRecord:
    challenges = [catalog[c if isinstance(c, str) else c.id] for c in suite]
    if not filter_eligible(challenges, ctx):
        raise EmptySuite("no suite challenge is eligible under this context")
    cascade = build_cascade(challenges, ctx, cfg.cascade_len, cfg.rng_seed,
                            hardness=hardness, stochastic=cfg.stochastic_cascade)
    h0, h1 = models

    steps: list[StepRecord] = []
    clock = 0.0
    E, graded = 0.0, 0
    verdict, reason = Verdict.PASS, None

    for cid in cascade.ids:
        challenge = catalog[cid]
        passed = False
        for attempt in range(cfg.max_retries + 1):
            try:
                trace: Optional[ResponseTrace] = _truncate(
                    participant.respond(challenge, attempt, cfg.timeout_s), cfg.timeout_s)
            except CaptureTimeout:
                trace = None
            clock += cfg.timeout_s if trace is None else trace.duration_s
            if trace is None or len(trace) == 0:
                steps.append(StepRecord(cid, False, attempt, None, None, clock, timed_out=True))
                continue
            if not verify_response(challenge, trace):
                steps.append(StepRecord(cid, False, attempt, None, None, clock))
                continue
            g = grade(trace, h0, h1, cfg.s)
            p = min(g.p, P_CLAMP) if cfg.score_mode is ScoreMode.CONFIDENCE_POSITIVE else g.p
            new_E = amplify(E, p, g.q_bar, cfg.score_mode)
            steps.append(StepRecord(cid, True, attempt, g, new_E - E, clock))
            E, graded = new_E, graded + 1
            passed = True
            break
        if not passed:
            verdict, reason = Verdict.FAIL, FailReason.VERIFICATION_EXHAUSTED
            break
        if E / graded > cfg.threshold_T:
            verdict, reason = Verdict.FAIL, FailReason.THRESHOLD_EXCEEDED
            break

    return SessionRecord(
        participant_id=participant.participant_id,
        cascade=cascade,
        steps=tuple(steps),
        E=E,
        E_bar=E / graded if graded else 0.0,
        verdict=verdict,
        fail_reason=reason,
        threshold_T=cfg.threshold_T,
        score_mode=cfg.score_mode,
    )


def calibrate_threshold(
    genuine_records: Sequence[SessionRecord],
    target_fp_rate: float,
    *,
    statistic: str = "peak",
) -> float:
    """Threshold at the (1 - target_fp_rate) empirical quantile of genuine scores.

    ``statistic="peak"`` (default) uses each record's highest running mean,
    which is what the early-exit rule compares against the threshold;
    ``"final"`` uses the end-of-session mean. Linear interpolation between
    order statistics.
    """
    if not 0.0 < target_fp_rate < 1.0:
        raise ValueError(f"target_fp_rate must be in (0, 1), got {target_fp_rate}")
    if len(genuine_records) < 20:
        raise InsufficientData(f"need at least 20 genuine records, got {len(genuine_records)}")
    if statistic == "peak":
        values = [r.peak_running_mean() for r in genuine_records]
    elif statistic == "final":
        values = [r.E_bar for r in genuine_records]
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    return float(np.quantile(np.asarray(values, dtype=float), 1.0 - target_fp_rate, method="linear"))
