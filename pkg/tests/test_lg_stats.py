import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threebox.lg_stats import (
    MR_BOUND,
    QM_BOUND,
    ConditionalEstimate,
    InsufficientData,
    LgReport,
    MissingGroundTruth,
    SamplingPolicy,
    StatsError,
    build_report,
    estimate_conditionals,
    k_direct,
    k_from_conditionals,
    k_std_err,
    k_std_err_value,
    report_or_none,
    sigma_violation,
    verification_report,
)
from threebox.noise import NoiseParams
from threebox.protocol import (
    BobOutcome,
    Context,
    ContextSchedule,
    EngineKind,
    MrStrategy,
    RoundRecord,
    ScheduleKind,
    SessionConfig,
    run_session,
    run_verification,
)


def game_record(round_id, context, bob, alice, engine=EngineKind.QUANTUM, gt=None):
    wins = None
    if alice and context is not Context.NONE:
        wins = bob is BobOutcome.TRUE
    return RoundRecord(
        round_id=round_id, engine=engine, context=context, bob_outcome=bob,
        alice_m3=alice, alice_bets=alice, alice_wins=wins,
        ground_truth_boxes=gt, seed_path=f"0/{round_id}",
    )


def synthetic_records(n_joint, n_false, n_undetermined, context):
    """Alice-true rounds with the given Bob outcome mix, plus padding."""
    records = []
    rid = 1
    for _ in range(n_joint):
        records.append(game_record(rid, context, BobOutcome.TRUE, True)); rid += 1
    for _ in range(n_false):
        records.append(game_record(rid, context, BobOutcome.FALSE, True)); rid += 1
    for _ in range(n_undetermined):
        records.append(game_record(rid, context, BobOutcome.UNDETERMINED, True)); rid += 1
    records.append(game_record(rid, context, BobOutcome.FALSE, False))
    return records


# ---------------------------------------------------------------------------
# conditionals


def test_conditional_estimate_from_counts():
    est = ConditionalEstimate.from_counts(Context.M1, 200, 150)
    assert est.p_hat == 0.75
    assert est.std_err == pytest.approx(math.sqrt(0.75 * 0.25 / 200), abs=1e-15)
    with pytest.raises(InsufficientData):
        ConditionalEstimate.from_counts(Context.M1, 0, 0)
    with pytest.raises(StatsError):
        ConditionalEstimate.from_counts(Context.M1, 10, 11)


def test_estimate_conditionals_policies():
    records = synthetic_records(70, 10, 20, Context.M1) + synthetic_records(
        60, 20, 20, Context.M2
    )
    fair = estimate_conditionals(records, SamplingPolicy.FAIR_SAMPLING)
    assert fair[Context.M1].n_alice_true == 80
    assert fair[Context.M1].p_hat == pytest.approx(70 / 80)
    adverse = estimate_conditionals(records, SamplingPolicy.ADVERSE)
    assert adverse[Context.M1].n_alice_true == 100
    assert adverse[Context.M1].p_hat == pytest.approx(0.70)
    assert adverse[Context.M2].p_hat == pytest.approx(0.60)


def test_all_undetermined_is_adverse_zero_fair_error():
    records = synthetic_records(0, 0, 50, Context.M1) + synthetic_records(
        0, 0, 50, Context.M2
    )
    adverse = estimate_conditionals(records, SamplingPolicy.ADVERSE)
    assert adverse[Context.M1].p_hat == 0.0
    assert adverse[Context.M2].p_hat == 0.0
    with pytest.raises(InsufficientData):
        estimate_conditionals(records, SamplingPolicy.FAIR_SAMPLING)


def test_estimate_conditionals_order_independent():
    records = synthetic_records(30, 10, 5, Context.M1) + synthetic_records(
        25, 12, 3, Context.M2
    )
    rng = np.random.default_rng(0)
    shuffled = list(records)
    rng.shuffle(shuffled)
    for policy in SamplingPolicy:
        assert estimate_conditionals(records, policy) == estimate_conditionals(
            shuffled, policy
        )


def test_ideal_engine_conditionals_are_exactly_one():
    cfg = SessionConfig(engine=EngineKind.QUANTUM, noise=NoiseParams.ideal(),
                        rounds=20_000, seed=42)
    records = run_session(cfg)
    for policy in SamplingPolicy:
        conds = estimate_conditionals(records, policy)
        assert conds[Context.M1].p_hat == 1.0
        assert conds[Context.M2].p_hat == 1.0


# ---------------------------------------------------------------------------
# the K functional


def test_k_from_conditionals_pinned_values():
    assert k_from_conditionals(1.0, 1.0) == pytest.approx(-13 / 9, abs=1e-12)
    assert k_from_conditionals(0.5, 0.5) == pytest.approx(-1.0, abs=1e-12)
    assert k_from_conditionals(0.798, 0.798) == pytest.approx(-1.265, abs=0.001)
    with pytest.raises(StatsError):
        k_from_conditionals(1.2, 0.0)


@given(
    p1=st.floats(min_value=0.0, max_value=1.0),
    p2=st.floats(min_value=0.0, max_value=1.0),
)
@settings(max_examples=300, deadline=None)
def test_k_region_bounds(p1, p2):
    k = k_from_conditionals(p1, p2)
    assert k >= QM_BOUND - 1e-12
    if p1 + p2 <= 1.0:
        assert k >= MR_BOUND - 1e-12


def test_k_std_err_values():
    assert k_std_err_value(0.0, 0.0) == 0.0
    assert k_std_err_value(0.0298, 0.0298) == pytest.approx(0.0187, abs=1e-4)
    assert k_std_err_value(0.01, 0.02) == k_std_err_value(0.02, 0.01)  # symmetric
    assert k_std_err_value(0.03, 0.04) == pytest.approx((4 / 9) * 0.05, abs=1e-15)


def test_k_std_err_matches_bootstrap():
    # nonparametric bootstrap over the per-context Alice-true outcomes;
    # resampling n binary records with replacement is a Binomial(n, p_hat)
    # draw on the joint count
    n, p = 1200, 0.798
    k1 = int(round(n * p))
    est1 = ConditionalEstimate.from_counts(Context.M1, n, k1)
    est2 = ConditionalEstimate.from_counts(Context.M2, n, k1)
    analytic = k_std_err({Context.M1: est1, Context.M2: est2})
    rng = np.random.default_rng(7)
    resamples = 10_000
    p1_star = rng.binomial(n, est1.p_hat, size=resamples) / n
    p2_star = rng.binomial(n, est2.p_hat, size=resamples) / n
    k_star = (4.0 / 9.0) * (1.0 - p1_star - p2_star) - 1.0
    bootstrap = float(np.std(k_star))
    assert abs(analytic - bootstrap) / bootstrap < 0.15


def test_sigma_violation_values():
    assert sigma_violation(-1.265, 0.023) == pytest.approx(11.52, abs=0.01)
    assert abs(sigma_violation(-1.265, 0.023) - 11.3) < 0.5
    assert sigma_violation(-1.0, 0.023) == 0.0
    assert sigma_violation(-0.8, 0.5) == 0.0
    assert sigma_violation(-13 / 9, 0.023) == pytest.approx(19.3, abs=0.05)
    assert sigma_violation(-1.2, 0.0) == math.inf


# ---------------------------------------------------------------------------
# direct K from ground truth


def mr_record(round_id, gt, context=Context.M1):
    bob = BobOutcome.TRUE if gt[1] == context.box else BobOutcome.FALSE
    alice = gt[2] == 3
    return game_record(round_id, context, bob, alice, engine=EngineKind.MACROREAL, gt=gt)


def test_k_direct_extremes():
    stay = [mr_record(i, (3, 3, 3)) for i in range(1, 11)]
    assert k_direct(stay) == pytest.approx(3.0)
    leave = [mr_record(i, (3, 1, 3)) for i in range(1, 11)]
    assert k_direct(leave) == pytest.approx(-1.0)
    mixed = stay + leave
    assert -1.0 <= k_direct(mixed) <= 3.0
    assert k_direct(mixed) == pytest.approx(1.0)


def test_k_direct_matches_history_table():
    # the four deterministic histories hit exactly {+3, -1, -1, -1}
    values = {
        (3, 3, 3): 3.0,
        (3, 3, 1): -1.0,
        (3, 1, 3): -1.0,
        (3, 2, 1): -1.0,
    }
    for gt, expected in values.items():
        assert k_direct([mr_record(1, gt)]) == pytest.approx(expected)


def test_k_direct_requires_ground_truth():
    records = [game_record(1, Context.M1, BobOutcome.TRUE, True)]
    with pytest.raises(MissingGroundTruth):
        k_direct(records)


def test_k_direct_on_simulated_strategy():
    strat = MrStrategy.hidden_ball()
    cfg = SessionConfig(engine=EngineKind.MACROREAL, mr_strategy=strat,
                        rounds=20_000, seed=3)
    records = run_session(cfg)
    value = k_direct(records)
    assert -1.0 - 0.05 <= value <= 3.0 + 0.05


# ---------------------------------------------------------------------------
# reports


def test_report_consistency_invariant():
    cfg = SessionConfig(engine=EngineKind.QUANTUM, rounds=2400, seed=8,
                        context_schedule=ContextSchedule(ScheduleKind.BLOCKS, 1200))
    report = build_report(run_session(cfg))
    assert report.q1 == 1
    recomputed = k_from_conditionals(
        report.conditionals[Context.M1].p_hat, report.conditionals[Context.M2].p_hat
    )
    assert abs(report.k_hat - recomputed) < 1e-12
    recomputed_adv = k_from_conditionals(
        report.adverse_conditionals[Context.M1].p_hat,
        report.adverse_conditionals[Context.M2].p_hat,
    )
    assert abs(report.k_hat_adverse - recomputed_adv) < 1e-12
    json.dumps(report.to_dict())  # serializable


def test_policy_ordering_on_noisy_records():
    for seed in (1, 2, 3, 4):
        cfg = SessionConfig(engine=EngineKind.QUANTUM, rounds=2400, seed=seed,
                            context_schedule=ContextSchedule(ScheduleKind.BLOCKS, 1200))
        report = build_report(run_session(cfg))
        assert report.sigma_adverse <= report.sigma_fair
        assert report.k_hat_adverse >= report.k_hat


def test_report_or_none():
    assert report_or_none([]) is None
    records = synthetic_records(5, 0, 0, Context.M1)
    assert report_or_none(records) is None  # M2 missing
    records += synthetic_records(5, 0, 0, Context.M2)
    assert report_or_none(records) is not None


def test_ideal_report_hits_quantum_floor():
    cfg = SessionConfig(engine=EngineKind.QUANTUM, noise=NoiseParams.ideal(),
                        rounds=9000, seed=21)
    report = build_report(run_session(cfg))
    assert report.k_hat == pytest.approx(QM_BOUND, abs=1e-12)
    assert report.k_std_err == 0.0
    assert report.sigma_fair == math.inf


# ---------------------------------------------------------------------------
# verification report rendering


def test_verification_report_ideal_text():
    cfg = SessionConfig(engine=EngineKind.QUANTUM, noise=NoiseParams.ideal(),
                        rounds=1, seed=5)
    tables = run_verification(cfg, 1800)
    text = verification_report(tables)
    assert "first-measurement marginals" in text
    assert "repeatability" in text
    assert "n/a" not in text.split("repopulation")[0]


def test_verification_report_default_noise_text():
    cfg = SessionConfig(engine=EngineKind.QUANTUM, rounds=1, seed=5)
    tables = run_verification(cfg, 4500)
    text = verification_report(tables)
    assert "repopulation branches" in text
    preserved = tables.preserved_fraction()
    assert abs(preserved - 0.70) < 0.05
    assert f"{preserved:.6g}" in text
