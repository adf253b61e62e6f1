"""Per-challenge response traces in frame-feature form.

A trace stores one numpy column per feature rather than a list of frame
objects; ``ResponseTrace.frames`` materializes :class:`FrameFeatures` on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

from .catalog import Channel


class EmptyTrace(ValueError):
    pass


@dataclass(frozen=True)
class FrameFeatures:
    realism: float
    yaw_deg: float
    expression_intensity: float
    occlusion_fraction: float
    luminance_shift: float
    n_faces: int

    def __post_init__(self) -> None:
        for name in ("realism", "expression_intensity", "occlusion_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")
        if not -1.0 <= self.luminance_shift <= 1.0:
            raise ValueError(f"luminance_shift={self.luminance_shift} outside [-1, 1]")
        if self.n_faces < 1:
            raise ValueError("n_faces must be >= 1")


_COLUMNS = ("realism", "yaw_deg", "expression_intensity", "occlusion_fraction", "luminance_shift", "n_faces")


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ResponseTrace:
    challenge_id: str
    realism: np.ndarray
    yaw_deg: np.ndarray
    expression_intensity: np.ndarray
    occlusion_fraction: np.ndarray
    luminance_shift: np.ndarray
    n_faces: np.ndarray
    nominal_fps: float
    duration_s: float
    provenance: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        for name in _COLUMNS:
            dtype = np.int64 if name == "n_faces" else float
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))
        n = self.realism.shape[0]
        if any(getattr(self, c).shape != (n,) for c in _COLUMNS):
            raise ValueError("all feature columns must be 1-D and equally long")
        if n and (self.realism.min() < 0 or self.realism.max() > 1):
            raise ValueError("realism outside [0, 1]")
        if n and self.n_faces.min() < 1:
            raise ValueError("n_faces must be >= 1")
        if self.nominal_fps <= 0 or self.duration_s <= 0:
            raise ValueError("nominal_fps and duration_s must be positive")
        if n != round(self.nominal_fps * self.duration_s):
            raise ValueError(
                f"trace has {n} frames but nominal_fps*duration_s rounds to {round(self.nominal_fps * self.duration_s)}"
            )

    @classmethod
    def from_frames(
        cls,
        challenge_id: str,
        frames: list[FrameFeatures],
        nominal_fps: float,
        duration_s: float,
        provenance: tuple[str, ...] = (),
    ) -> "ResponseTrace":
        cols = {c: [getattr(f, c) for f in frames] for c in _COLUMNS}
        return cls(challenge_id=challenge_id, nominal_fps=nominal_fps, duration_s=duration_s,
                   provenance=provenance, **cols)

    def __len__(self) -> int:
        return int(self.realism.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResponseTrace):
            return NotImplemented
        return (
            self.challenge_id == other.challenge_id
            and self.nominal_fps == other.nominal_fps
            and self.duration_s == other.duration_s
            and self.provenance == other.provenance
            and all(np.array_equal(getattr(self, c), getattr(other, c)) for c in _COLUMNS)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def frames(self) -> Iterator[FrameFeatures]:
        for i in range(len(self)):
            yield FrameFeatures(*(getattr(self, c)[i].item() for c in _COLUMNS))

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(len(self)) / self.nominal_fps

    def channel(self, channel: Channel) -> np.ndarray:
        return {
            Channel.YAW_ANGLE: self.yaw_deg,
            Channel.EXPRESSION_INTENSITY: self.expression_intensity,
            Channel.OCCLUSION_FRACTION: self.occlusion_fraction,
            Channel.LUMINANCE_SHIFT: self.luminance_shift,
        }[channel]

    def concat(self, other: "ResponseTrace") -> "ResponseTrace":
        """Append ``other``'s frames; used when reasoning about evidence additivity."""
        cols = {c: np.concatenate([getattr(self, c), getattr(other, c)]) for c in _COLUMNS}
        return ResponseTrace(
            challenge_id=self.challenge_id,
            nominal_fps=self.nominal_fps,
            duration_s=self.duration_s + other.duration_s,
            provenance=self.provenance,
            **cols,
        )

    def with_columns(self, **changes) -> "ResponseTrace":
        return replace(self, **changes)
