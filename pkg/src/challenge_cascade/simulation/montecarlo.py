"""Population harness: default protocol setup, Monte Carlo runs, reports.

Seed scheme: every random stream is ``derive_seed(master, purpose, group, index)``
where ``purpose`` is one of the ``PURPOSE_*`` constants, ``group`` is the
pipeline's position in ``PipelineKind`` and ``index`` the participant number.
Streams never depend on execution order.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..cascade import Context
from ..catalog import Catalog, default_catalog
from ..grader import FeatureModel, fit_models
from ..metrics import GapConfig, QualificationReport, calibrate_genuine_pass, qualify_suite
from ..session import (
    FailReason,
    ScoreMode,
    SessionConfig,
    SessionRecord,
    Verdict,
    calibrate_threshold,
    run_session,
)
from .profiles import FAKE_KINDS, PipelineKind, PipelineProfile, default_profiles, validate_profiles
from .synth import SimulatedParticipant, TraceConfig, derive_seed

PURPOSE_EVAL = 0
PURPOSE_FIT = 1
PURPOSE_GAPS = 2
PURPOSE_CALIBRATION = 3

_KIND_INDEX = {k: i for i, k in enumerate(PipelineKind)}


def participant(profile: PipelineProfile, master: int, purpose: int, index: int,
                trace_cfg: TraceConfig = TraceConfig()) -> SimulatedParticipant:
    seed = derive_seed(master, purpose, _KIND_INDEX[profile.name], index)
    return SimulatedParticipant(profile, seed, f"{profile.name.value}-{index:04d}", trace_cfg)


def gap_samples(
    catalog: Catalog,
    genuine: PipelineProfile,
    fake: PipelineProfile,
    n_samples: int,
    seed: int,
) -> dict[str, list[tuple[np.ndarray, np.ndarray]]]:
    """Per-challenge (genuine realism, fake realism) frame pairs from paired participants."""
    out: dict[str, list] = {cid: [] for cid in catalog}
    for i in range(n_samples):
        src = participant(genuine, seed, PURPOSE_GAPS, i)
        imp = participant(fake, seed, PURPOSE_GAPS, i)
        for cid, ch in catalog.items():
            out[cid].append((src.respond(ch).realism, imp.respond(ch).realism))
    return out


def genuine_baseline_gaps(catalog: Catalog, genuine: PipelineProfile, n_samples: int,
                          seed: int) -> dict[str, list[float]]:
    """|mean realism of a baseline response - mean realism of a repeat| per genuine participant."""
    out: dict[str, list[float]] = {cid: [] for cid in catalog}
    for i in range(n_samples):
        src = participant(genuine, seed, PURPOSE_GAPS, 10_000 + i)
        for cid, ch in catalog.items():
            a, b = src.respond(ch, 0).realism, src.respond(ch, 1).realism
            out[cid].append(abs(float(a.mean()) - float(b.mean())))
    return out


@dataclass(frozen=True)
class ProtocolSetup:
    """Everything a session needs besides the participant, context and config."""

    catalog: Catalog
    profiles: Mapping[PipelineKind, PipelineProfile]
    qualification: QualificationReport
    models: tuple[FeatureModel, FeatureModel]
    reference: PipelineKind

    @property
    def suite(self) -> list[str]:
        return [cid for cid in self.catalog if cid in self.qualification.qualified]

    @property
    def hardness(self) -> dict[str, float]:
        return self.qualification.hardness()


def fit_default_models(
    catalog: Catalog,
    profiles: Mapping[PipelineKind, PipelineProfile],
    n_participants: int,
    seed: int,
    fake_kinds: Sequence[PipelineKind] = FAKE_KINDS,
) -> tuple[FeatureModel, FeatureModel]:
    genuine, fake = [], []
    for i in range(n_participants):
        g = participant(profiles[PipelineKind.GENUINE], seed, PURPOSE_FIT, i)
        genuine.extend(g.respond(ch) for ch in catalog.values())
        for kind in fake_kinds:
            f = participant(profiles[kind], seed, PURPOSE_FIT, i)
            fake.extend(f.respond(ch) for ch in catalog.values())
    return fit_models(genuine, fake)


def default_setup(
    seed: int = 0,
    *,
    catalog: Optional[Catalog] = None,
    profiles: Optional[Mapping[PipelineKind, PipelineProfile]] = None,
    reference: PipelineKind | str = PipelineKind.LDFL,
    gap_cfg: GapConfig = GapConfig(),
    n_gap: int = 10,
    n_fit: int = 20,
    models: Optional[tuple[FeatureModel, FeatureModel]] = None,
) -> ProtocolSetup:
    """Qualify the suite against ``reference`` and fit H0/H1 models, all from simulation."""
    catalog = catalog if catalog is not None else default_catalog()
    profiles = dict(profiles) if profiles is not None else default_profiles()
    validate_profiles(profiles, catalog)
    reference = PipelineKind(reference)
    gaps = gap_samples(catalog, profiles[PipelineKind.GENUINE], profiles[reference], n_gap, seed)
    report = qualify_suite(catalog, gaps, gap_cfg)
    if models is None:
        models = fit_default_models(catalog, profiles, n_fit, seed)
    return ProtocolSetup(catalog, profiles, report, models, reference)


def run_population(
    setup: ProtocolSetup,
    kind: PipelineKind,
    n: int,
    ctx: Context,
    cfg: SessionConfig,
    seed: int,
    purpose: int = PURPOSE_EVAL,
    trace_cfg: TraceConfig = TraceConfig(),
) -> list[SessionRecord]:
    prof = setup.profiles[kind]
    return [
        run_session(participant(prof, seed, purpose, i, trace_cfg), setup.catalog, setup.suite, ctx, cfg,
                    models=setup.models, hardness=setup.hardness)
        for i in range(n)
    ]


def session_score(record: SessionRecord) -> float:
    """Detection score: peak running mean; verification exhaustion always counts as detected."""
    if record.fail_reason is FailReason.VERIFICATION_EXHAUSTED:
        return math.inf
    return record.peak_running_mean()


def roc_points(genuine_scores: Sequence[float], fake_scores: Sequence[float]) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) with "fail iff score > threshold", thresholds ascending."""
    g = np.asarray(genuine_scores, dtype=float)
    f = np.asarray(fake_scores, dtype=float)
    finite = np.concatenate([g, f])
    finite = finite[np.isfinite(finite)]
    thresholds = [-math.inf, *sorted(set(finite.tolist())), math.inf]
    return [(t, float(np.mean(g > t)) if g.size else 0.0, float(np.mean(f > t)) if f.size else 0.0)
            for t in thresholds]


def auc(genuine_scores: Sequence[float], fake_scores: Sequence[float]) -> float:
    """P(fake score > genuine score) + 0.5 P(tie)."""
    g = np.asarray(genuine_scores, dtype=float)
    f = np.asarray(fake_scores, dtype=float)
    if g.size == 0 or f.size == 0:
        return math.nan
    gt = (f[:, None] > g[None, :]).sum()
    eq = (f[:, None] == g[None, :]).sum()
    return float((gt + 0.5 * eq) / (f.size * g.size))


@dataclass
class PipelineSummary:
    kind: PipelineKind
    records: list[SessionRecord]
    threshold_T: float

    @property
    def n(self) -> int:
        return len(self.records)

    def trajectory(self) -> list[tuple[int, float, float, int]]:
        """(k, mean E_k, std E_k, sessions reaching k) over sessions with at least k graded steps."""
        trajs = [r.trajectory() for r in self.records]
        kmax = max((len(t) for t in trajs), default=0)
        out = []
        for k in range(1, kmax + 1):
            vals = np.array([t[k - 1] for t in trajs if len(t) >= k])
            out.append((k, float(vals.mean()), float(vals.std(ddof=0)), int(vals.size)))
        return out

    def final_e_bar(self) -> np.ndarray:
        return np.array([r.E_bar for r in self.records], dtype=float)

    def scores(self) -> list[float]:
        return [session_score(r) for r in self.records]

    def verdicts(self) -> dict[str, int]:
        counts = {"pass": 0, "fail_threshold": 0, "fail_verification": 0}
        for r in self.records:
            v, reason = r.verdict_at(self.threshold_T)
            if v is Verdict.PASS:
                counts["pass"] += 1
            elif reason is FailReason.THRESHOLD_EXCEEDED:
                counts["fail_threshold"] += 1
            else:
                counts["fail_verification"] += 1
        return counts

    def fail_rate(self) -> float:
        c = self.verdicts()
        return (c["fail_threshold"] + c["fail_verification"]) / self.n if self.n else math.nan


@dataclass
class PopulationReport:
    threshold_T: float
    score_mode: ScoreMode
    seed: int
    pipelines: dict[PipelineKind, PipelineSummary] = field(default_factory=dict)

    @property
    def genuine(self) -> PipelineSummary:
        return self.pipelines[PipelineKind.GENUINE]

    @property
    def fake_kinds(self) -> list[PipelineKind]:
        return [k for k in self.pipelines if k is not PipelineKind.GENUINE]

    @property
    def fpr(self) -> float:
        return self.genuine.fail_rate()

    def fnr(self, kind: PipelineKind) -> float:
        return 1.0 - self.pipelines[kind].fail_rate()

    def auc(self, kind: PipelineKind) -> float:
        return auc(self.genuine.scores(), self.pipelines[kind].scores())

    def roc(self, kind: PipelineKind) -> list[tuple[float, float, float]]:
        return roc_points(self.genuine.scores(), self.pipelines[kind].scores())

    def summary_rows(self) -> list[dict]:
        rows = []
        for kind, s in self.pipelines.items():
            fe = s.final_e_bar()
            genuine = kind is PipelineKind.GENUINE
            rows.append({
                "pipeline": kind.value,
                "n": s.n,
                "mean_E_bar": float(fe.mean()) if fe.size else math.nan,
                "fpr": self.fpr if genuine else None,
                "fnr": None if genuine else self.fnr(kind),
                "auc": None if genuine else self.auc(kind),
            })
        return rows

    def to_dict(self) -> dict:
        def fin(x):
            return x if x is None or math.isfinite(x) else None

        out = {
            "seed": self.seed,
            "score_mode": self.score_mode.value,
            "threshold_T": fin(self.threshold_T),
            "pipelines": {},
        }
        for kind, s in self.pipelines.items():
            fe = s.final_e_bar()
            entry = {
                "n": s.n,
                "mean_final_E_bar": float(fe.mean()) if fe.size else None,
                "std_final_E_bar": float(fe.std(ddof=1)) if fe.size > 1 else None,
                "verdicts": s.verdicts(),
                "trajectory": [{"k": k, "mean_E": m, "std_E": sd, "n": c} for k, m, sd, c in s.trajectory()],
            }
            if kind is PipelineKind.GENUINE:
                entry["fpr"] = self.fpr
            else:
                entry["fnr"] = self.fnr(kind)
                entry["auc"] = self.auc(kind)
            out["pipelines"][kind.value] = entry
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def trajectories_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["pipeline", "k", "mean_E", "std_E", "n"])
        for kind, s in self.pipelines.items():
            for k, m, sd, c in s.trajectory():
                w.writerow([kind.value, k, repr(m), repr(sd), c])
        return buf.getvalue()

    def roc_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["pipeline", "threshold", "fpr", "tpr"])
        for kind in self.fake_kinds:
            for t, fpr, tpr in self.roc(kind):
                w.writerow([kind.value, repr(t), repr(fpr), repr(tpr)])
        return buf.getvalue()

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {"population.json": self.to_json(), "trajectories.csv": self.trajectories_csv(),
                 "roc.csv": self.roc_csv()}
        paths = []
        for name, text in files.items():
            p = out / name
            p.write_text(text, encoding="utf-8", newline="")
            paths.append(p)
        return paths


@dataclass(frozen=True)
class Populations:
    n_genuine: int = 40
    n_per_pipeline: int = 40

    def __post_init__(self) -> None:
        if self.n_genuine < 1 or self.n_per_pipeline < 0:
            raise ValueError("need n_genuine >= 1 and n_per_pipeline >= 0")


def monte_carlo(
    populations: Populations,
    ctx: Context,
    cfg: SessionConfig,
    rng_seed: int,
    *,
    setup: Optional[ProtocolSetup] = None,
    pipelines: Iterable[PipelineKind] = FAKE_KINDS,
    trace_cfg: TraceConfig = TraceConfig(),
) -> PopulationReport:
    """Run genuine and impersonator populations and aggregate their transcripts.

    Sessions run to completion (no early exit) so that every trajectory is
    whole; verdicts at ``cfg.threshold_T`` are then read off each transcript
    with :meth:`SessionRecord.verdict_at`, which gives exactly what an
    early-exiting session would have decided.
    """
    setup = setup if setup is not None else default_setup(rng_seed)
    full = replace(cfg, threshold_T=math.inf)
    report = PopulationReport(threshold_T=cfg.threshold_T, score_mode=cfg.score_mode, seed=rng_seed)
    groups = [(PipelineKind.GENUINE, populations.n_genuine)]
    if populations.n_per_pipeline:
        groups += [(PipelineKind(k), populations.n_per_pipeline) for k in pipelines]
    for kind, n in groups:
        records = run_population(setup, kind, n, ctx, full, rng_seed, PURPOSE_EVAL, trace_cfg)
        report.pipelines[kind] = PipelineSummary(kind, records, cfg.threshold_T)
    return report


def calibrate(
    setup: ProtocolSetup,
    ctx: Context,
    cfg: SessionConfig,
    rng_seed: int,
    n_genuine: int = 100,
    target_fp_rate: float = 0.05,
) -> tuple[float, list[SessionRecord]]:
    """Threshold from a dedicated genuine population (independent of evaluation streams)."""
    records = run_population(setup, PipelineKind.GENUINE, n_genuine, ctx, replace(cfg, threshold_T=math.inf),
                             rng_seed, PURPOSE_CALIBRATION)
    return calibrate_threshold(records, target_fp_rate), records


def genuine_pass_check(setup: ProtocolSetup, cfg: GapConfig, n_samples: int, seed: int) -> dict:
    gaps = genuine_baseline_gaps(setup.catalog, setup.profiles[PipelineKind.GENUINE], n_samples, seed)
    return calibrate_genuine_pass(gaps, cfg)
