"""Leggett-Garg estimation and hypothesis testing over round records.

The correlator K = <Q1 Q2> + <Q2 Q3> + <Q1 Q3> of the dichotomic
"is it box 3" observable at the three stages of a round is bounded in
[-1, +3] for any macrorealist system, while the game's statistics push it
down to -13/9. With the heralded start fixing Q1 = +1, K reduces to a
function of the two betting conditionals:

    K = (4/9) (1 - p1 - p2) - 1,   p_j = P(Bob true | Alice true, context j)

Undetermined Bob records are handled by a sampling policy: fair sampling
drops them; the maximally adverse policy keeps them in the denominator
with Bob counted false (every undetermined round read as Alice cheating).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .protocol import (
    BobOutcome,
    Context,
    EngineKind,
    RoundRecord,
    VerificationTables,
)

MR_BOUND = -1.0
QM_BOUND = -13.0 / 9.0


class StatsError(ValueError):
    pass


class InsufficientData(StatsError):
    """A context has no usable Alice-true rounds."""


class MissingGroundTruth(StatsError):
    """Direct Q-products need macrorealist records with ball trajectories."""


class SamplingPolicy(enum.Enum):
    FAIR_SAMPLING = "fair"
    ADVERSE = "adverse"


@dataclass(frozen=True)
class ConditionalEstimate:
    """Binomial estimate of P(Bob true | Alice true) for one context."""

    context: Context
    n_alice_true: int
    n_joint_true: int
    p_hat: float
    std_err: float

    @classmethod
    def from_counts(
        cls, context: Context, n_alice_true: int, n_joint_true: int
    ) -> "ConditionalEstimate":
        if n_alice_true <= 0:
            raise InsufficientData(f"no Alice-true rounds for context {context.value}")
        if not 0 <= n_joint_true <= n_alice_true:
            raise StatsError("joint count must lie within the Alice-true count")
        p = n_joint_true / n_alice_true
        return cls(
            context=context,
            n_alice_true=n_alice_true,
            n_joint_true=n_joint_true,
            p_hat=p,
            std_err=math.sqrt(p * (1.0 - p) / n_alice_true),
        )

    def to_dict(self) -> dict:
        return {
            "context": self.context.value,
            "n_alice_true": self.n_alice_true,
            "n_joint_true": self.n_joint_true,
            "p_hat": self.p_hat,
            "std_err": self.std_err,
        }


def estimate_conditionals(
    records, policy: SamplingPolicy
) -> dict[Context, ConditionalEstimate]:
    """P(Bob true | Alice true) for both measured contexts.

    Fair sampling excludes undetermined-Bob rounds entirely; the adverse
    policy counts every undetermined, Alice-true round in the denominator
    with Bob treated as false.
    """
    n_alice = {Context.M1: 0, Context.M2: 0}
    n_joint = {Context.M1: 0, Context.M2: 0}
    for rec in records:
        if rec.context is Context.NONE or not rec.alice_m3:
            continue
        undetermined = rec.bob_outcome is BobOutcome.UNDETERMINED
        if undetermined and policy is SamplingPolicy.FAIR_SAMPLING:
            continue
        n_alice[rec.context] += 1
        if rec.bob_outcome is BobOutcome.TRUE:
            n_joint[rec.context] += 1
    return {
        ctx: ConditionalEstimate.from_counts(ctx, n_alice[ctx], n_joint[ctx])
        for ctx in (Context.M1, Context.M2)
    }


def k_from_conditionals(p1: float, p2: float) -> float:
    """K from the two betting conditionals: (4/9)(1 - p1 - p2) - 1."""
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0):
        raise StatsError("conditional probabilities must lie in [0, 1]")
    return (4.0 / 9.0) * (1.0 - p1 - p2) - 1.0


def k_std_err_value(std_err1: float, std_err2: float) -> float:
    """Propagated standard error of K: (4/9) sqrt(se1^2 + se2^2)."""
    return (4.0 / 9.0) * math.sqrt(std_err1**2 + std_err2**2)


def k_std_err(conditionals: dict[Context, ConditionalEstimate]) -> float:
    return k_std_err_value(
        conditionals[Context.M1].std_err, conditionals[Context.M2].std_err
    )


def sigma_violation(k_hat: float, k_std_err: float) -> float:
    """Distance below the macrorealist bound K >= -1, in standard errors.

    Zero when the bound is respected; infinite for an exact violation with
    zero propagated error (the noise-free game).
    """
    if k_hat >= MR_BOUND:
        return 0.0
    if k_std_err == 0.0:
        return math.inf
    return (MR_BOUND - k_hat) / k_std_err


def k_direct(records) -> float:
    """K from the ground-truth ball trajectories of macrorealist records.

    Q_t = +1 when the ball occupies box 3 at stage t (after heralding,
    after Bob's turn, after Alice's final shuffle), -1 otherwise; the
    three pairwise products are averaged over rounds.
    """
    total = 0.0
    n = 0
    for rec in records:
        if rec.engine is not EngineKind.MACROREAL or rec.ground_truth_boxes is None:
            raise MissingGroundTruth(
                "direct Q-products need macrorealist records with ball positions"
            )
        q1, q2, q3 = (1 if box == 3 else -1 for box in rec.ground_truth_boxes)
        total += q1 * q2 + q2 * q3 + q1 * q3
        n += 1
    if n == 0:
        raise InsufficientData("no records")
    return total / n


@dataclass(frozen=True)
class LgReport:
    """Point estimates, propagated errors and bound violations for a
    record set, under both sampling policies.

    The headline fields (k_hat, k_std_err, conditionals) are the
    fair-sampling numbers; q1 is pinned to +1 by the heralded start.
    """

    conditionals: dict
    adverse_conditionals: dict
    k_hat: float
    k_std_err: float
    k_hat_adverse: float
    k_std_err_adverse: float
    sigma_fair: float
    sigma_adverse: float
    q1: int = 1
    sampling_policy_notes: str = (
        "fair sampling drops undetermined rounds; adverse counts them "
        "against the violation with Bob read as false"
    )

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "k_std_err": self.k_std_err,
            "k_hat_adverse": self.k_hat_adverse,
            "k_std_err_adverse": self.k_std_err_adverse,
            "sigma_fair": self.sigma_fair,
            "sigma_adverse": self.sigma_adverse,
            "q1": self.q1,
            "conditionals": {c.value: e.to_dict() for c, e in self.conditionals.items()},
            "adverse_conditionals": {
                c.value: e.to_dict() for c, e in self.adverse_conditionals.items()
            },
            "sampling_policy_notes": self.sampling_policy_notes,
        }


def build_report(records) -> LgReport:
    """Full report over a record list; raises InsufficientData when a
    context has no usable Alice-true rounds under either policy."""
    records = list(records)
    fair = estimate_conditionals(records, SamplingPolicy.FAIR_SAMPLING)
    adverse = estimate_conditionals(records, SamplingPolicy.ADVERSE)
    k_fair = k_from_conditionals(fair[Context.M1].p_hat, fair[Context.M2].p_hat)
    k_adv = k_from_conditionals(adverse[Context.M1].p_hat, adverse[Context.M2].p_hat)
    se_fair = k_std_err(fair)
    se_adv = k_std_err(adverse)
    return LgReport(
        conditionals=fair,
        adverse_conditionals=adverse,
        k_hat=k_fair,
        k_std_err=se_fair,
        k_hat_adverse=k_adv,
        k_std_err_adverse=se_adv,
        sigma_fair=sigma_violation(k_fair, se_fair),
        sigma_adverse=sigma_violation(k_adv, se_adv),
    )


def report_or_none(records) -> LgReport | None:
    """build_report, or None while the data cannot support it yet."""
    try:
        return build_report(records)
    except InsufficientData:
        return None


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "n/a"
    return f"{x:.6g}"


def _interval(p: float, n: int) -> str:
    if n == 0 or math.isnan(p):
        return "n/a"
    half = 2.0 * math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return f"{p:.6g} +/- {half:.6g}"


def verification_report(tables: VerificationTables) -> str:
    """Human-readable rendering of the pre-game verification statistics,
    with 2-sigma (95%) intervals."""
    lines = []
    lines.append(f"verification: engine={tables.engine.value} pairs={tables.n_pairs}")
    lines.append("")
    lines.append("first-measurement marginals P(box j found):")
    for j in (1, 2, 3):
        counts = tables.first_counts[j]
        n = sum(counts.values())
        lines.append(f"  M{j}: {_interval(tables.first_marginal(j), n)}  (n={n})")
    lines.append("")
    lines.append("repeatability: second reading given first reading, same box:")
    header = "  first ->  " + "  ".join(f"{r:>12s}" for r in ("true", "false", "undet."))
    for j in (1, 2, 3):
        lines.append(f"  box {j}:")
        lines.append(header)
        for first in ("true", "false"):
            cond = tables.conditional(j, j, first)
            row = "  ".join(
                f"{_fmt(cond[r]):>12s}" for r in ("true", "false", "undetermined")
            )
            n = sum(tables.second_counts[(j, j)][first].values())
            lines.append(f"  {first:>5s} (n={n:>5d})  {row}")
    lines.append("")
    lines.append("cross-box exclusivity: P(second true | first true, boxes j1 != j2):")
    for j1 in (1, 2, 3):
        for j2 in (1, 2, 3):
            if j1 == j2:
                continue
            cond = tables.conditional(j1, j2, "true")
            n = sum(tables.second_counts[(j1, j2)]["true"].values())
            lines.append(f"  first M{j1}, second M{j2}: {_interval(cond['true'], n)}")
    total_tags = sum(sum(c.values()) for c in tables.tag_counts.values())
    if total_tags:
        lines.append("")
        lines.append("repopulation branches after a true outcome (ground truth):")
        preserved = tables.preserved_fraction()
        lines.append(f"  preserved: {_interval(preserved, total_tags)}  (n={total_tags})")
        for name in ("undetermined", "flipped"):
            count = sum(c[name] for c in tables.tag_counts.values())
            lines.append(f"  {name}: {_interval(count / total_tags, total_tags)}")
    return "\n".join(lines)
