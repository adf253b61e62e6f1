"""Likelihood-ratio grading of response traces.

Terminology: *realism* is the per-frame quality metric (1 is perfectly
real); *anomaly* is its complement, ``1 - realism``. H0 says the response is
legitimate, H1 says it is manipulated. The likelihood ratio is
L(H0 | trace) / L(H1 | trace); small values favour manipulation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .trace import EmptyTrace, ResponseTrace

LAMBDA_MIN = 1e-300
LAMBDA_MAX = 1e300
STDDEV_FLOOR = 1e-6
DEFAULT_S = 1.0

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class FeatureModel:
    """Univariate Gaussian over per-frame realism."""

    mean: float
    stddev: float

    def __post_init__(self) -> None:
        if not self.stddev > 0:
            raise ValueError(f"stddev must be > 0, got {self.stddev}")

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.mean) / self.stddev
        return -0.5 * z * z - math.log(self.stddev) - _LOG_SQRT_2PI

    def to_dict(self) -> dict[str, float]:
        return {"mean": self.mean, "stddev": self.stddev}


@dataclass(frozen=True)
class GradeResult:
    q_bar: float
    lam: float
    p: float
    reject_h0: bool

    def to_dict(self) -> dict:
        return {"q_bar": self.q_bar, "lambda": self.lam, "p": self.p, "reject_h0": self.reject_h0}


def models_to_json(h0: FeatureModel, h1: FeatureModel) -> str:
    return json.dumps({"h0": h0.to_dict(), "h1": h1.to_dict()}, indent=2) + "\n"


def models_from_dict(raw: dict) -> tuple[FeatureModel, FeatureModel]:
    return (FeatureModel(float(raw["h0"]["mean"]), float(raw["h0"]["stddev"])),
            FeatureModel(float(raw["h1"]["mean"]), float(raw["h1"]["stddev"])))


def _require_frames(trace: ResponseTrace) -> None:
    if len(trace) == 0:
        raise EmptyTrace(f"trace for {trace.challenge_id!r} has no frames")


def anomaly_score(trace: ResponseTrace) -> float:
    _require_frames(trace)
    return float(np.mean(1.0 - trace.realism))


def log_likelihood_ratio(trace: ResponseTrace, h0: FeatureModel, h1: FeatureModel) -> float:
    _require_frames(trace)
    return float(np.sum(h0.logpdf(trace.realism) - h1.logpdf(trace.realism)))


def likelihood_ratio(trace: ResponseTrace, h0: FeatureModel, h1: FeatureModel) -> float:
    llr = log_likelihood_ratio(trace, h0, h1)
    # exp() of the clamped log keeps the ratio finite and strictly positive
    return math.exp(min(max(llr, math.log(LAMBDA_MIN)), math.log(LAMBDA_MAX)))


def confidence_from_ratio(lam: float) -> float:
    """Equal-prior posterior probability of H1."""
    return 1.0 / (1.0 + lam)


def grade(trace: ResponseTrace, h0: FeatureModel, h1: FeatureModel, s: float = DEFAULT_S) -> GradeResult:
    if not s > 0:
        raise ValueError(f"rejection threshold s must be > 0, got {s}")
    lam = likelihood_ratio(trace, h0, h1)
    return GradeResult(q_bar=anomaly_score(trace), lam=lam, p=confidence_from_ratio(lam), reject_h0=lam < s)


def _fit(values: np.ndarray) -> FeatureModel:
    return FeatureModel(mean=float(values.mean()), stddev=max(float(values.std(ddof=0)), STDDEV_FLOOR))


def fit_models(
    genuine_traces: Sequence[ResponseTrace] | Iterable[ResponseTrace],
    fake_traces: Sequence[ResponseTrace] | Iterable[ResponseTrace],
) -> tuple[FeatureModel, FeatureModel]:
    """Maximum-likelihood Gaussian fits over pooled per-frame realism.

    The standard deviation is the population (ddof=0) estimate, floored at
    ``STDDEV_FLOOR`` so degenerate calibration data stays usable.
    """
    out = []
    for label, traces in (("genuine", list(genuine_traces)), ("fake", list(fake_traces))):
        if len(traces) < 2:
            raise InsufficientData(f"need at least 2 {label} traces, got {len(traces)}")
        pooled = np.concatenate([t.realism for t in traces])
        if pooled.size < 2:
            raise InsufficientData(f"need at least 2 {label} frames, got {pooled.size}")
        out.append(_fit(pooled))
    return out[0], out[1]
