import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from challenge_cascade.cascade import Context
from challenge_cascade.catalog import Channel
from challenge_cascade.grader import FeatureModel, InsufficientData
from challenge_cascade.session import (
    P_CLAMP,
    CaptureTimeout,
    DomainError,
    EmptySuite,
    FailReason,
    ScoreMode,
    SessionConfig,
    Verdict,
    amplify,
    calibrate_threshold,
    run_session,
    verify_response,
)
from challenge_cascade.simulation.montecarlo import participant, run_population
from challenge_cascade.simulation.profiles import PipelineKind
from challenge_cascade.trace import EmptyTrace
from helpers import make_trace

MODELS = (FeatureModel(0.85, 0.08), FeatureModel(0.6, 0.2))
_CHANNEL_COLUMN = {
    Channel.YAW_ANGLE: "yaw_deg",
    Channel.EXPRESSION_INTENSITY: "expression_intensity",
    Channel.OCCLUSION_FRACTION: "occlusion_fraction",
    Channel.LUMINANCE_SHIFT: "luminance_shift",
}


def response(challenge, realism, comply=True, n=20, fps=10.0):
    cols = {}
    ch = challenge.compliance.channel
    if comply and ch is not Channel.NONE:
        cols[_CHANNEL_COLUMN[ch]] = np.linspace(0.0, 1.5 * challenge.compliance.min_delta, n)
    return make_trace([realism] * n, challenge.id, fps, **cols)


class Scripted:
    """Source whose behaviour is a function of (challenge, attempt)."""

    def __init__(self, fn, participant_id="scripted"):
        self.fn = fn
        self.participant_id = participant_id
        self.calls = []

    def respond(self, challenge, attempt, timeout_s):
        self.calls.append((challenge.id, attempt))
        return self.fn(challenge, attempt)


def flat(catalog, value=0.5):
    return {cid: value for cid in catalog}


class TestVerifyResponse:
    def test_yaw_sweep(self, catalog):
        ch = catalog["head-rotation"]
        t = make_trace([0.9] * 30, ch.id, yaw_deg=np.linspace(-45, 45, 30))
        assert verify_response(ch, t)

    def test_constant_yaw(self, catalog):
        ch = catalog["head-rotation"]
        assert not verify_response(ch, make_trace([0.9] * 30, ch.id, yaw_deg=np.full(30, 12.0)))

    def test_only_window_counts(self, catalog):
        ch = catalog["head-rotation"]  # within 5 s
        yaw = np.zeros(80)
        yaw[60:] = 40.0  # movement after 6 s at 10 fps
        assert not verify_response(ch, make_trace([0.9] * 80, ch.id, yaw_deg=yaw))

    def test_passive_always_verified(self, catalog):
        assert verify_response(catalog["cutout"], make_trace([0.9] * 3, "cutout"))

    def test_empty(self, catalog):
        with pytest.raises(EmptyTrace):
            verify_response(catalog["cutout"], make_trace([], "cutout"))

    @pytest.mark.parametrize("seed", range(10))
    def test_expression_matches_window_scan(self, catalog, seed):
        ch = catalog["expression"]
        rng = np.random.default_rng(seed)
        expr = np.clip(rng.normal(0.3, 0.15, 60), 0, 1)
        t = make_trace([0.9] * 60, ch.id, fps=10.0, expression_intensity=expr)
        lo, hi = math.inf, -math.inf
        for i, v in enumerate(expr):
            if i / 10.0 <= ch.compliance.within_s:
                lo, hi = min(lo, v), max(hi, v)
        assert verify_response(ch, t) == (hi - lo >= ch.compliance.min_delta)


class TestAmplify:
    def test_literal_p_one(self):
        assert amplify(-2.0, 1.0, 0.7, ScoreMode.LITERAL) == -2.0

    @pytest.mark.parametrize("mode", list(ScoreMode))
    def test_zero_weight(self, mode):
        assert amplify(1.5, 0.3, 0.0, mode) == 1.5

    def test_literal_arithmetic(self):
        assert amplify(0.0, math.exp(-1), 0.5, "literal") == pytest.approx(-0.5, abs=1e-15)

    def test_confidence_positive_arithmetic(self):
        assert amplify(0.0, 1 - math.exp(-2), 0.5, "confidence-positive") == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, -0.1, 1.01, math.nan])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            amplify(0.0, p, 0.5, ScoreMode.LITERAL)

    def test_confidence_positive_needs_clamp(self):
        with pytest.raises(DomainError):
            amplify(0.0, 1.0, 0.5, ScoreMode.CONFIDENCE_POSITIVE)
        assert math.isfinite(amplify(0.0, P_CLAMP, 0.5, ScoreMode.CONFIDENCE_POSITIVE))

    @given(st.floats(1e-12, 1.0), st.floats(0.0, 1.0))
    def test_signs(self, p, q):
        assert amplify(0.0, p, q, ScoreMode.LITERAL) <= 0.0
        assert amplify(0.0, min(p, P_CLAMP), q, ScoreMode.CONFIDENCE_POSITIVE) >= 0.0


class TestSessionConfig:
    def test_defaults(self):
        cfg = SessionConfig()
        assert (cfg.cascade_len, cfg.timeout_s, cfg.max_retries) == (14, 10.0, 3)
        assert cfg.score_mode is ScoreMode.CONFIDENCE_POSITIVE

    @pytest.mark.parametrize("kw", [{"cascade_len": 0}, {"timeout_s": 0}, {"max_retries": -1}, {"s": 0},
                                    {"threshold_T": math.nan}, {"score_mode": "loud"}])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SessionConfig(**kw)


class TestRunSession:
    def test_clean_single_challenge_passes(self, catalog):
        src = Scripted(lambda ch, a: response(ch, 1.0))
        rec = run_session(src, catalog, ["head-rotation"], Context(), SessionConfig(cascade_len=1, threshold_T=0.5),
                          models=MODELS, hardness=flat(catalog))
        assert rec.verdict is Verdict.PASS and rec.E == 0.0 and rec.fail_reason is None
        assert len(rec.steps) == 1 and rec.steps[0].grade.q_bar == 0.0

    def test_never_complies(self, catalog):
        src = Scripted(lambda ch, a: response(ch, 0.9, comply=False))
        cfg = SessionConfig(max_retries=3)
        rec = run_session(src, catalog, ["head-rotation", "expression"], Context(), cfg, models=MODELS,
                          hardness=flat(catalog))
        assert rec.verdict is Verdict.FAIL and rec.fail_reason is FailReason.VERIFICATION_EXHAUSTED
        first = rec.cascade.ids[0]
        assert src.calls == [(first, a) for a in range(4)]
        assert [s.retry_index for s in rec.steps] == [0, 1, 2, 3]
        assert all(s.grade is None for s in rec.steps)

    def test_retry_reissues_same_challenge(self, catalog):
        src = Scripted(lambda ch, a: response(ch, 0.9, comply=a >= 2))
        rec = run_session(src, catalog, ["expression"], Context(), SessionConfig(), models=MODELS,
                          hardness=flat(catalog))
        assert [(s.challenge_id, s.retry_index, s.verified) for s in rec.steps] == [
            ("expression", 0, False), ("expression", 1, False), ("expression", 2, True)]
        assert rec.verdict is Verdict.PASS

    def test_timeout_consumes_retry(self, catalog):
        def fn(ch, a):
            if a == 0:
                raise CaptureTimeout()
            return response(ch, 0.9)

        rec = run_session(Scripted(fn), catalog, ["expression"], Context(), SessionConfig(timeout_s=4.0),
                          models=MODELS, hardness=flat(catalog))
        assert rec.steps[0].timed_out and not rec.steps[0].verified
        assert rec.steps[0].timestamp_s == 4.0
        assert rec.steps[1].verified and rec.steps[1].retry_index == 1

    def test_long_response_truncated(self, catalog):
        src = Scripted(lambda ch, a: response(ch, 0.9, n=200))
        rec = run_session(src, catalog, ["expression"], Context(), SessionConfig(timeout_s=5.0),
                          models=MODELS, hardness=flat(catalog))
        assert rec.steps[0].timestamp_s == 5.0

    def test_early_exit(self, catalog):
        src = Scripted(lambda ch, a: response(ch, 0.2))
        cfg = SessionConfig(threshold_T=1.0)
        rec = run_session(src, catalog, list(catalog), Context(), cfg, models=MODELS, hardness=flat(catalog))
        assert rec.verdict is Verdict.FAIL and rec.fail_reason is FailReason.THRESHOLD_EXCEEDED
        assert len(rec.steps) == 1 and rec.E_bar > 1.0

    def test_empty_suite(self, catalog):
        with pytest.raises(EmptySuite):
            run_session(Scripted(lambda ch, a: response(ch, 0.9)), catalog, ["cutout"],
                        Context(has_trusted_device=False), SessionConfig(), models=MODELS, hardness=flat(catalog))

    def test_never_leaves_cascade(self, catalog):
        src = Scripted(lambda ch, a: response(ch, 0.8, comply=a > 0))
        rec = run_session(src, catalog, list(catalog), Context(), SessionConfig(cascade_len=6), models=MODELS,
                          hardness=flat(catalog))
        assert {c for c, _ in src.calls} <= set(rec.cascade.ids)

    def test_genuine_vs_ldfl(self, setup, interview):
        cfg = SessionConfig()
        g = run_session(participant(setup.profiles[PipelineKind.GENUINE], 3, 0, 0), setup.catalog, setup.suite,
                        interview, cfg, models=setup.models, hardness=setup.hardness)
        f = run_session(participant(setup.profiles[PipelineKind.LDFL], 3, 0, 0), setup.catalog, setup.suite,
                        interview, cfg, models=setup.models, hardness=setup.hardness)
        assert f.E_bar > g.E_bar

    def test_threshold_equivalent_to_post_hoc_verdict(self, setup, interview):
        for kind in (PipelineKind.GENUINE, PipelineKind.HDFL, PipelineKind.LIA):
            full = run_population(setup, kind, 15, interview, SessionConfig(), seed=11)
            cut = run_population(setup, kind, 15, interview, SessionConfig(threshold_T=2.0), seed=11)
            for a, b in zip(full, cut):
                assert a.verdict_at(2.0) == (b.verdict, b.fail_reason)


@pytest.fixture(scope="module")
def records(setup, interview):
    recs = run_population(setup, PipelineKind.FSGAN, 5, interview, SessionConfig(threshold_T=50.0), seed=2)
    recs += run_population(setup, PipelineKind.LIA, 5, interview, SessionConfig(), seed=2)
    return recs


@pytest.fixture(scope="module")
def genuine(setup, interview):
    return run_population(setup, PipelineKind.GENUINE, 30, interview, SessionConfig(), seed=4)


class TestSessionRecord:
    def test_json_stable_and_finite(self, records):
        for r in records:
            doc = json.loads(r.to_json())
            assert list(doc) == ["participant_id", "score_mode", "threshold_T", "cascade", "steps", "E", "E_bar",
                                 "verdict", "fail_reason"]
            assert r.to_json() == r.to_json()
        assert json.loads(records[-1].to_json())["threshold_T"] is None

    def test_csv(self, records):
        r = records[0]
        text = r.to_csv()
        assert "\r\n" in text
        rows = list(csv.DictReader(io.StringIO(text)))
        assert list(rows[0]) == ["participant_id", "step_index", "challenge_id", "retry_index", "verified",
                                 "q_bar", "p", "increment", "E", "E_bar", "verdict"]
        assert len(rows) == len(r.steps)
        assert float(rows[-1]["E"]) == pytest.approx(r.E)

    def test_invariants(self, records):
        for r in records:
            assert r.E == pytest.approx(sum(s.increment for s in r.graded_steps))
            assert len(r.steps) <= r.cascade.target_len * 4
            if r.verdict is Verdict.FAIL:
                assert r.fail_reason is not None
            else:
                assert r.E_bar <= r.threshold_T
            if r.fail_reason is FailReason.THRESHOLD_EXCEEDED:
                assert r.running_means()[-1] > r.threshold_T


class TestCalibrateThreshold:
    def test_identical_values(self, genuine):
        same = [genuine[0]] * 25
        assert calibrate_threshold(same, 0.05) == genuine[0].peak_running_mean()

    def test_half_is_median(self, genuine):
        peaks = sorted(r.peak_running_mean() for r in genuine)
        assert calibrate_threshold(genuine, 0.5) == pytest.approx((peaks[14] + peaks[15]) / 2, abs=1e-15)

    def test_final_statistic(self, genuine):
        finals = sorted(r.E_bar for r in genuine)
        assert calibrate_threshold(genuine, 0.5, statistic="final") == pytest.approx((finals[14] + finals[15]) / 2)

    def test_interpolation(self, genuine):
        # 30 values, q = 0.9 -> position 0.9 * 29 = 26.1
        peaks = sorted(r.peak_running_mean() for r in genuine)
        expected = peaks[26] + 0.1 * (peaks[27] - peaks[26])
        assert calibrate_threshold(genuine, 0.1) == pytest.approx(expected, rel=1e-12, abs=1e-300)

    def test_too_few(self, genuine):
        with pytest.raises(InsufficientData):
            calibrate_threshold(genuine[:19], 0.05)

    @pytest.mark.parametrize("rate", [0.0, 1.0, 1.5, -0.2])
    def test_rate_domain(self, genuine, rate):
        with pytest.raises(ValueError):
            calibrate_threshold(genuine, rate)
