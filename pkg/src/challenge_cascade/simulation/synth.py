"""Synthetic response traces and simulated participants."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..catalog import Challenge, Channel
from ..trace import ResponseTrace
from .profiles import PassiveKind, PassiveTransform, PipelineProfile, fps_under_load


class UnknownChallenge(KeyError):
    pass


@dataclass(frozen=True)
class TraceConfig:
    fps: float = 30.0
    duration_s: float = 3.0


# Resting level and jitter of each compliance channel.
_BASELINE = {
    Channel.YAW_ANGLE: 0.0,
    Channel.EXPRESSION_INTENSITY: 0.1,
    Channel.OCCLUSION_FRACTION: 0.0,
    Channel.LUMINANCE_SHIFT: 0.0,
}
_IDLE_JITTER = {
    Channel.YAW_ANGLE: 1.0,
    Channel.EXPRESSION_INTENSITY: 0.01,
    Channel.OCCLUSION_FRACTION: 0.005,
    Channel.LUMINANCE_SHIFT: 0.005,
}
_BOUNDS = {
    Channel.YAW_ANGLE: (-90.0, 90.0),
    Channel.EXPRESSION_INTENSITY: (0.0, 1.0),
    Channel.OCCLUSION_FRACTION: (0.0, 1.0),
    Channel.LUMINANCE_SHIFT: (-1.0, 1.0),
}
RAMP_OVERSHOOT = 1.5
# Jitter on the compliance channel is bounded by this fraction of min_delta,
# so a ramp always clears min_delta and a flat response never does.
JITTER_CAP = 0.2


def derive_seed(master: int, *path: int) -> np.random.SeedSequence:
    """Child seed for ``path`` under ``master``.

    Each (purpose, group, index, ...) path maps to an independent stream,
    so populations can be generated in any order or in parallel.
    """
    return np.random.SeedSequence(entropy=master, spawn_key=tuple(int(p) for p in path))


def challenge_key(challenge_id: str) -> int:
    return zlib.crc32(challenge_id.encode("utf-8"))


def _channel_column(ch: Channel, n: int, t: np.ndarray, ramp_end: float, target: Optional[float],
                    min_delta: float, rng: np.random.Generator) -> np.ndarray:
    lo, hi = _BOUNDS[ch]
    base = _BASELINE[ch]
    if target is None:
        col = base + rng.normal(0.0, _IDLE_JITTER[ch], n)
    else:
        cap = JITTER_CAP * min_delta
        jitter = np.clip(rng.normal(0.0, cap / 4.0, n), -cap, cap) if cap > 0 else np.zeros(n)
        level = base + target * np.clip(t / ramp_end, 0.0, 1.0) if target else np.full(n, base)
        col = level + jitter
    return np.clip(col, lo, hi)


def synthesize_response(
    profile: PipelineProfile,
    challenge: Challenge,
    cfg: TraceConfig = TraceConfig(),
    rng_seed: int | np.random.SeedSequence = 0,
) -> ResponseTrace:
    """Draw one response trace for ``challenge`` as produced by ``profile``.

    Realism is iid Normal(realism_mean, realism_std) per frame, clamped to
    [0, 1]. With probability ``compliance_prob`` the compliance channel ramps
    linearly to 1.5 x min_delta; otherwise it stays flat.
    """
    behavior = profile.per_challenge.get(challenge.id)
    if behavior is None:
        raise UnknownChallenge(f"profile {profile.name.value!r} has no behavior for {challenge.id!r}")
    rng = np.random.default_rng(rng_seed)
    n = round(cfg.fps * cfg.duration_s)
    t = np.arange(n) / cfg.fps

    realism = np.clip(behavior.realism_mean + behavior.realism_std * rng.standard_normal(n), 0.0, 1.0)
    complies = rng.random() < behavior.compliance_prob

    spec = challenge.compliance
    ramp_end = min(cfg.duration_s, spec.within_s)
    cols = {}
    for ch in _BASELINE:
        active = ch is spec.channel
        target = (RAMP_OVERSHOOT * spec.min_delta if complies else 0.0) if active else None
        cols[ch] = _channel_column(ch, n, t, ramp_end, target, spec.min_delta, rng)

    return ResponseTrace(
        challenge_id=challenge.id,
        realism=realism,
        yaw_deg=cols[Channel.YAW_ANGLE],
        expression_intensity=cols[Channel.EXPRESSION_INTENSITY],
        occlusion_fraction=cols[Channel.OCCLUSION_FRACTION],
        luminance_shift=cols[Channel.LUMINANCE_SHIFT],
        n_faces=np.ones(n, dtype=np.int64),
        nominal_fps=cfg.fps,
        duration_s=cfg.duration_s,
        provenance=(profile.name.value, f"challenge:{challenge.id}"),
    )


def apply_passive(trace: ResponseTrace, transform: PassiveTransform, profile: PipelineProfile) -> ResponseTrace:
    """Apply a trusted-device transform to the feed before the deepfake pipeline sees it.

    A deepfake pipeline loses ``degradation_delta`` realism per frame; a
    genuine feed is untouched. Feed duplication also adds faces to every
    frame, and the pipeline's output frame rate drops accordingly (frames
    are dropped evenly, never added).
    """
    realism = trace.realism
    if not profile.is_genuine and transform.degradation_delta > 0:
        realism = np.clip(realism - transform.degradation_delta, 0.0, 1.0)
    changes = {"realism": realism, "provenance": trace.provenance + (f"passive:{transform.kind.value}",)}

    if transform.kind is PassiveKind.FEED_DUPLICATION and transform.extra_faces:
        n_faces = trace.n_faces + transform.extra_faces
        # a pipeline can drop frames but never adds any
        fps = min(fps_under_load(int(n_faces.max()), profile), trace.nominal_fps)
        m = round(fps * trace.duration_s)
        if m != len(trace):
            idx = (np.arange(m) * len(trace)) // m
            for name in ("yaw_deg", "expression_intensity", "occlusion_fraction", "luminance_shift"):
                changes[name] = getattr(trace, name)[idx]
            realism, n_faces = realism[idx], n_faces[idx]
        changes.update(realism=realism, n_faces=n_faces, nominal_fps=fps)
    return trace.with_columns(**changes)


class SimulatedParticipant:
    """Deterministic response source backed by a pipeline profile.

    The per-participant realism offset is drawn once from ``seed``; each
    (challenge, attempt) response uses its own derived stream, so the same
    participant answers the same request identically however the session
    unfolds.
    """

    def __init__(
        self,
        profile: PipelineProfile,
        seed: int | np.random.SeedSequence,
        participant_id: str = "participant",
        trace_cfg: TraceConfig = TraceConfig(),
    ):
        self.profile = profile
        self.participant_id = participant_id
        self.trace_cfg = trace_cfg
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self._entropy = ss.generate_state(4)
        self.offset = self._offset(profile.participant_spread, 0xFFFF)
        self._shifted = profile.shifted(self.offset)

    def _child(self, *path: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=[int(x) for x in self._entropy], spawn_key=path)

    def _offset(self, spread: float, *path: int) -> float:
        if spread <= 0:
            return 0.0
        z = np.random.default_rng(self._child(*path)).standard_normal()
        return float(np.clip(z, -3.0, 3.0) * spread)

    def respond(self, challenge: Challenge, attempt: int = 0, timeout_s: float = float("inf")) -> ResponseTrace:
        key = challenge_key(challenge.id)
        drift = self._offset(self.profile.response_spread, key, attempt, 1)
        prof = self._shifted.shifted(drift) if drift else self._shifted
        trace = synthesize_response(prof, challenge, self.trace_cfg, self._child(key, attempt))
        tf = self.profile.passive.get(challenge.id)
        if tf is not None:
            trace = apply_passive(trace, tf, self.profile)
        return trace
