"""Command-line front end.

Settings resolve in this order: command-line flags, then the JSON manifest
given with ``--manifest``, then built-in defaults. Exit status is 0 when a
command completes (a failed verdict is data, not an error), 2 for
configuration errors and 3 for runtime errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .cascade import CONTEXT_PRESETS, Context, EmptyEligibleSet, load_context
from .catalog import Catalog, CatalogError, default_catalog, load_catalog_file
from .grader import InsufficientData, models_from_dict
from .metrics import GapConfig
from .session import EmptySuite, ScoreMode, SessionConfig, run_session
from .simulation.montecarlo import (
    PURPOSE_EVAL,
    Populations,
    ProtocolSetup,
    calibrate,
    default_setup,
    genuine_pass_check,
    monte_carlo,
    participant,
)
from .simulation.profiles import FAKE_KINDS, PipelineKind, ProfileError, default_profiles, load_profiles

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_MANIFEST_KEYS = {"catalog", "profiles", "context", "seed", "out", "mode", "session"}
_SESSION_KEYS = {"threshold_T", "cascade_len", "timeout_s", "max_retries", "s", "stochastic_cascade"}
_DEFAULTS = {"context": "interview", "seed": 0, "out": "out", "mode": ScoreMode.CONFIDENCE_POSITIVE.value}


class ConfigError(Exception):
    """Bad flags, manifest or paths; reported with exit status 2."""


@dataclass
class RunManifest:
    catalog_path: Optional[Path]
    profile_dir: Optional[Path]
    context: Context
    context_name: str
    session: SessionConfig
    output_dir: Path
    seed: int
    session_overrides: dict[str, Any] = field(default_factory=dict)


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} not found: {path}")
    return p


def _read_manifest(path: Optional[str]) -> dict[str, Any]:
    if path is None:
        return {}
    raw = json.loads(_existing(path, "manifest").read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("manifest must be a JSON object")
    unknown = set(raw) - _MANIFEST_KEYS
    if unknown:
        raise ConfigError(f"manifest has unknown keys {sorted(unknown)}")
    bad = set(raw.get("session", {})) - _SESSION_KEYS
    if bad:
        raise ConfigError(f"manifest session block has unknown keys {sorted(bad)}")
    return raw


def resolve_manifest(args: argparse.Namespace) -> RunManifest:
    """Merge flags over manifest values over defaults and check every path up front."""
    raw = _read_manifest(args.manifest)

    def pick(name: str) -> Any:
        flag = getattr(args, name, None)
        if flag is not None:
            return flag
        return raw.get(name, _DEFAULTS.get(name))

    catalog = pick("catalog")
    profiles = pick("profiles")
    context_name = str(pick("context"))
    catalog_path = _existing(catalog, "catalog") if catalog is not None else None
    profile_dir = _existing(profiles, "profiles directory") if profiles is not None else None
    try:
        if context_name in CONTEXT_PRESETS:
            context = load_context(context_name)
        else:
            context = load_context(_existing(context_name, "context"))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"context {context_name!r}: {exc}") from None

    overrides = dict(raw.get("session", {}))
    if overrides.get("threshold_T") is None:
        overrides.pop("threshold_T", None)
    if getattr(args, "threshold", None) is not None:
        overrides["threshold_T"] = args.threshold
    if getattr(args, "cascade_len", None) is not None:
        overrides["cascade_len"] = args.cascade_len
    try:
        seed = int(pick("seed"))
        cfg = SessionConfig(score_mode=ScoreMode(pick("mode")), rng_seed=seed, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunManifest(catalog_path, profile_dir, context, context_name, cfg, Path(pick("out")), seed, overrides)


def _catalog(m: RunManifest) -> Catalog:
    return load_catalog_file(m.catalog_path) if m.catalog_path is not None else default_catalog()


def _profiles(m: RunManifest) -> dict[PipelineKind, Any]:
    # profiles found in the directory replace the bundled ones of the same name
    out = default_profiles()
    if m.profile_dir is not None:
        out.update(load_profiles(m.profile_dir))
    return out


def _setup(m: RunManifest, **kwargs: Any) -> ProtocolSetup:
    return default_setup(m.seed, catalog=_catalog(m), profiles=_profiles(m), **kwargs)


def _load_calibration(path: str, mode: ScoreMode) -> tuple[float, Any]:
    raw = json.loads(_existing(path, "calibration file").read_text(encoding="utf-8"))
    if raw.get("score_mode") != mode.value:
        raise ConfigError(f"calibration was made in {raw.get('score_mode')!r} mode, not {mode.value!r}")
    return float(raw["threshold_T"]), models_from_dict(raw["models"])


def _threshold_and_setup(m: RunManifest, args: argparse.Namespace) -> tuple[float, ProtocolSetup]:
    """Threshold from (in order) the session overrides, a calibration file, or a fresh calibration."""
    if args.calibration is not None:
        T, models = _load_calibration(args.calibration, m.session.score_mode)
        setup = _setup(m, models=models)
        if "threshold_T" not in m.session_overrides:
            return T, setup
        return m.session.threshold_T, setup
    setup = _setup(m)
    if "threshold_T" in m.session_overrides:
        return m.session.threshold_T, setup
    T, _ = calibrate(setup, m.context, m.session, m.seed)
    return T, setup


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    return path


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return "-"
    return f"{x:.4g}" if math.isfinite(x) else str(x)


def cmd_session(m: RunManifest, args: argparse.Namespace) -> int:
    T, setup = _threshold_and_setup(m, args)
    cfg = replace(m.session, threshold_T=T)
    for name in args.profile or [PipelineKind.GENUINE.value, PipelineKind.LDFL.value]:
        kind = PipelineKind(name)
        who = participant(setup.profiles[kind], m.seed, PURPOSE_EVAL, args.participant)
        rec = run_session(who, setup.catalog, setup.suite, m.context, cfg,
                          models=setup.models, hardness=setup.hardness)
        _write(m.output_dir / f"session-{kind.value}.json", rec.to_json())
        _write(m.output_dir / f"session-{kind.value}.csv", rec.to_csv())
        reason = f" ({rec.fail_reason.value})" if rec.fail_reason else ""
        print(f"{rec.participant_id}: {rec.verdict.value}{reason} E={_fmt(rec.E)} E_bar={_fmt(rec.E_bar)}")
    return 0


def cmd_montecarlo(m: RunManifest, args: argparse.Namespace) -> int:
    T, setup = _threshold_and_setup(m, args)
    kinds = [PipelineKind(k) for k in args.pipelines] if args.pipelines else list(FAKE_KINDS)
    report = monte_carlo(Populations(args.n_genuine, args.n_per_pipeline), m.context,
                         replace(m.session, threshold_T=T), m.seed, setup=setup, pipelines=kinds)
    report.write(m.output_dir)
    print(f"threshold_T = {_fmt(T)}")
    print(f"{'pipeline':<10} {'n':>4} {'mean_E_bar':>12} {'fpr':>8} {'fnr':>8} {'auc':>8}")
    for row in report.summary_rows():
        print(f"{row['pipeline']:<10} {row['n']:>4} {_fmt(row['mean_E_bar']):>12} {_fmt(row['fpr']):>8} "
              f"{_fmt(row['fnr']):>8} {_fmt(row['auc']):>8}")
    return 0


def cmd_qualify(m: RunManifest, args: argparse.Namespace) -> int:
    try:
        gap_cfg = GapConfig(beta=args.beta, eta=args.eta, epsilon=args.epsilon)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    setup = _setup(m, reference=args.pipeline, gap_cfg=gap_cfg, n_gap=args.n_samples)
    doc = setup.qualification.to_dict()
    doc["reference"] = setup.reference.value
    doc["genuine_pass"] = genuine_pass_check(setup, gap_cfg, args.n_samples, m.seed)
    _write(m.output_dir / "qualification.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"qualified {len(setup.qualification.qualified)}/{len(setup.catalog)} at beta={args.beta}: "
          + ", ".join(setup.suite))
    return 0


def cmd_calibrate(m: RunManifest, args: argparse.Namespace) -> int:
    if not 0.0 < args.fp_rate < 1.0:
        raise ConfigError(f"--fp-rate must be in (0, 1), got {args.fp_rate}")
    setup = _setup(m)
    T, _ = calibrate(setup, m.context, m.session, m.seed, n_genuine=args.n_genuine, target_fp_rate=args.fp_rate)
    h0, h1 = setup.models
    doc = {
        "threshold_T": T,
        "fp_rate": args.fp_rate,
        "n_genuine": args.n_genuine,
        "seed": m.seed,
        "score_mode": m.session.score_mode.value,
        "context": m.context_name,
        "models": {"h0": h0.to_dict(), "h1": h1.to_dict()},
    }
    _write(m.output_dir / "calibration.json", json.dumps(doc, indent=2) + "\n")
    print(repr(T))
    return 0


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", help="JSON run manifest; flags override its values")
    common.add_argument("--catalog", help="challenge catalog JSON (default: bundled catalog)")
    common.add_argument("--profiles", help="directory of pipeline profile JSON files")
    common.add_argument("--context", help=f"preset ({' | '.join(CONTEXT_PRESETS)}) or context JSON path")
    common.add_argument("--seed", type=int, help="master seed (default 0)")
    common.add_argument("--out", help="output directory (default ./out)")
    common.add_argument("--mode", choices=[m.value for m in ScoreMode], help="score orientation")

    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--threshold", type=float, help="threshold T (default: calibrate at fp-rate 0.05)")
    run.add_argument("--calibration", help="calibration.json from the calibrate command")
    run.add_argument("--cascade-len", type=int, help="cascade length (default 14)")

    parser = argparse.ArgumentParser(prog="challenge-cascade", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("session", parents=[common, run], help="run single sessions")
    p.add_argument("--profile", action="append", choices=[k.value for k in PipelineKind],
                   help="pipeline to impersonate with (repeatable; default genuine and ldfl)")
    p.add_argument("--participant", type=_positive_int, default=0, help="participant index")

    p = sub.add_parser("montecarlo", parents=[common, run], help="run seeded populations")
    p.add_argument("--n-genuine", type=int, default=40)
    p.add_argument("--n-per-pipeline", type=_positive_int, default=40)
    p.add_argument("--pipelines", nargs="+", choices=[k.value for k in FAKE_KINDS])

    p = sub.add_parser("qualify", parents=[common], help="qualify the challenge suite")
    p.add_argument("--beta", type=float, default=GapConfig.beta)
    p.add_argument("--eta", type=float, default=GapConfig.eta)
    p.add_argument("--epsilon", type=float, default=GapConfig.epsilon)
    p.add_argument("--pipeline", default=PipelineKind.LDFL.value, choices=[k.value for k in FAKE_KINDS],
                   help="reference pipeline for the performance gap")
    p.add_argument("--n-samples", type=int, default=10)

    p = sub.add_parser("calibrate", parents=[common], help="fit models and select threshold T")
    p.add_argument("--fp-rate", type=float, default=0.05)
    p.add_argument("--n-genuine", type=int, default=100)

    sub.add_parser("version", help="print the package version")
    return parser


_COMMANDS = {"session": cmd_session, "montecarlo": cmd_montecarlo, "qualify": cmd_qualify,
             "calibrate": cmd_calibrate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return 0
    try:
        manifest = resolve_manifest(args)
        return _COMMANDS[args.command](manifest, args)
    except (ConfigError, CatalogError, ProfileError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InsufficientData, EmptySuite, EmptyEligibleSet, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
