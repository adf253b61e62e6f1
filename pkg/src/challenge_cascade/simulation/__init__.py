"""Deterministic stand-ins for participants and deepfake pipelines."""

from .montecarlo import (
    PopulationReport,
    Populations,
    ProtocolSetup,
    calibrate,
    default_setup,
    monte_carlo,
)
from .profiles import (
    PassiveKind,
    PassiveTransform,
    PipelineKind,
    PipelineProfile,
    default_profiles,
    fps_under_load,
    load_profiles,
    validate_profiles,
)
from .synth import SimulatedParticipant, TraceConfig, apply_passive, synthesize_response

__all__ = [
    "PassiveKind",
    "PassiveTransform",
    "PipelineKind",
    "PipelineProfile",
    "PopulationReport",
    "Populations",
    "ProtocolSetup",
    "SimulatedParticipant",
    "TraceConfig",
    "apply_passive",
    "calibrate",
    "default_profiles",
    "default_setup",
    "fps_under_load",
    "load_profiles",
    "monte_carlo",
    "synthesize_response",
    "validate_profiles",
]
