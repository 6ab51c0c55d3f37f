"""Exhaustive and numerical exploration of macrorealist models.

Three levels of machinery:

* enumeration of the four deterministic ball histories compatible with a
  heralded box-3 start, giving the K-polytope corners {+3, -1, -1, -1};
* an exhaustive scan over deterministic strategies (placement vertex x
  deterministic maps for each stochastic matrix, 3 * 27^3 = 59049 cases),
  the extreme points of the stochastic strategy polytope;
* a random-restart coordinate-descent search over full stochastic
  strategies, fitting target observables while reporting the detectable
  disturbance each candidate would show to Alice.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lg_stats import ConditionalEstimate, k_from_conditionals
from .protocol import Context, MrStrategy

TARGET_KEYS = (
    "p_alice_m1",
    "p_alice_m2",
    "p_alice_none",
    "p_bob_given_alice_m1",
    "p_bob_given_alice_m2",
)


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class HistoryAssignment:
    """One deterministic assignment of the three-stage box-3 indicator."""

    q: tuple[int, int, int]
    k_value: float

    @classmethod
    def from_q(cls, q: tuple[int, int, int]) -> "HistoryAssignment":
        q1, q2, q3 = q
        return cls(q=q, k_value=float(q1 * q2 + q2 * q3 + q1 * q3))


def enumerate_histories() -> list[HistoryAssignment]:
    """The four histories with the first stage pinned to +1."""
    return [
        HistoryAssignment.from_q((1, q2, q3)) for q2 in (1, -1) for q3 in (1, -1)
    ]


def k_bounds() -> tuple[float, float]:
    """Convex hull of the history K values: (-1, +3)."""
    values = [h.k_value for h in enumerate_histories()]
    return min(values), max(values)


# ---------------------------------------------------------------------------
# Analytic observables of a stochastic strategy.


def strategy_observables(strategy: MrStrategy) -> dict[str, float]:
    """Exact game statistics a strategy produces.

    The betting conditional is taken as 0 when Alice never bets in a
    context (the bet is vacuous there).
    """
    v = strategy.placement @ strategy.shuffle_before
    t = strategy.measurement_disturbance @ strategy.shuffle_after
    a_none = float((v @ strategy.shuffle_after)[2])
    a_measured = float((v @ t)[2])
    joints = [float(v[j] * t[j, 2]) for j in (0, 1)]
    conds = [j / a_measured if a_measured > 0.0 else 0.0 for j in joints]
    return {
        "p_alice_m1": a_measured,
        "p_alice_m2": a_measured,
        "p_alice_none": a_none,
        "p_bob_given_alice_m1": conds[0],
        "p_bob_given_alice_m2": conds[1],
    }


def strategy_disturbance(strategy: MrStrategy) -> float:
    obs = strategy_observables(strategy)
    return max(
        abs(obs["p_alice_m1"] - obs["p_alice_none"]),
        abs(obs["p_alice_m2"] - obs["p_alice_none"]),
    )


# ---------------------------------------------------------------------------
# Deterministic vertex enumeration.


@dataclass(frozen=True)
class DeterministicScan:
    """Summary of the exhaustive scan over deterministic strategies."""

    n_strategies: int
    max_conditional_sum: float
    max_conditional_sum_nondisturbing: float
    k_floor: float

    def to_dict(self) -> dict:
        return {
            "n_strategies": self.n_strategies,
            "max_conditional_sum": self.max_conditional_sum,
            "max_conditional_sum_nondisturbing": self.max_conditional_sum_nondisturbing,
            "k_floor": self.k_floor,
        }


def scan_deterministic_strategies() -> DeterministicScan:
    """Evaluate every deterministic strategy vertex.

    A deterministic strategy is a placement vertex plus a deterministic
    function {1,2,3} -> {1,2,3} for each of the three stochastic maps
    (the extreme points of the row-stochastic polytope). Conditionals are
    0/1-valued; a context where Alice never bets contributes 0.
    """
    maps = list(itertools.product((0, 1, 2), repeat=3))
    n = 0
    best = 0.0
    best_nd = 0.0
    for a in range(3):
        for f_before in maps:
            ball = f_before[a]
            for f_disturb in maps:
                disturbed = f_disturb[ball]
                for f_after in maps:
                    n += 1
                    alice_measured = f_after[disturbed] == 2
                    alice_none = f_after[ball] == 2
                    if not alice_measured:
                        continue  # both conditionals vacuous
                    p1 = 1.0 if ball == 0 else 0.0
                    p2 = 1.0 if ball == 1 else 0.0
                    total = p1 + p2
                    best = max(best, total)
                    if alice_measured == alice_none:
                        best_nd = max(best_nd, total)
    return DeterministicScan(
        n_strategies=n,
        max_conditional_sum=best,
        max_conditional_sum_nondisturbing=best_nd,
        k_floor=k_from_conditionals(min(best, 1.0), 0.0) if best <= 1.0 else math.nan,
    )


# ---------------------------------------------------------------------------
# Monte Carlo over strategies (vectorized; used for the bound sweeps).


def random_strategy(rng: np.random.Generator, floor: float = 0.02) -> MrStrategy:
    """Random stochastic strategy with rows kept `floor`-close to the
    simplex interior, so conditionals stay estimable at modest round
    counts."""

    def row() -> np.ndarray:
        r = rng.dirichlet(np.ones(3))
        return (1.0 - floor) * r + floor / 3.0

    return MrStrategy(
        placement=row(),
        shuffle_before=np.vstack([row() for _ in range(3)]),
        shuffle_after=np.vstack([row() for _ in range(3)]),
        measurement_disturbance=np.vstack([row() for _ in range(3)]),
    )


def _sample_rows(matrix: np.ndarray, rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Vectorized categorical draw from stochastic-matrix rows (0-based)."""
    cum = np.cumsum(matrix, axis=1)
    u = rng.random(rows.shape[0])
    idx = (u[:, None] > cum[rows]).sum(axis=1)
    return np.minimum(idx, 2)


def simulate_strategy_conditionals(
    strategy: MrStrategy, n_rounds: int, rng: np.random.Generator
) -> dict[Context, ConditionalEstimate]:
    """Monte Carlo betting conditionals for a strategy, contexts
    alternating M1/M2. Vectorized twin of the per-round engine."""
    if n_rounds < 2:
        raise SearchError("need at least one round per context")
    boxes = np.where(np.arange(n_rounds) % 2 == 0, 0, 1)  # 0-based context box
    placement_rows = np.zeros(n_rounds, dtype=np.intp)
    b1 = _sample_rows(strategy.placement.reshape(1, 3), placement_rows, rng)
    b2 = _sample_rows(strategy.shuffle_before, b1, rng)
    found = b2 == boxes
    b2p = _sample_rows(strategy.measurement_disturbance, b2, rng)
    b3 = _sample_rows(strategy.shuffle_after, b2p, rng)
    alice = b3 == 2
    out = {}
    for ctx, box in ((Context.M1, 0), (Context.M2, 1)):
        mask = (boxes == box) & alice
        out[ctx] = ConditionalEstimate.from_counts(
            ctx, int(mask.sum()), int((mask & found).sum())
        )
    return out


# ---------------------------------------------------------------------------
# Stochastic-strategy fitting.


@dataclass(frozen=True)
class FitResult:
    """Best strategy found, its worst-case deviation from the targets,
    and the detectable disturbance it would exhibit."""

    strategy: MrStrategy
    fit_error: float
    disturbance: float

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.to_dict(),
            "fit_error": self.fit_error,
            "disturbance": self.disturbance,
        }


def validate_targets(targets: dict) -> dict[str, float]:
    unknown = set(targets) - set(TARGET_KEYS)
    if unknown:
        raise SearchError(f"unknown target key(s): {sorted(unknown)}")
    missing = set(TARGET_KEYS) - set(targets)
    if missing:
        raise SearchError(f"missing target key(s): {sorted(missing)}")
    clean = {}
    for key in TARGET_KEYS:
        value = float(targets[key])
        if not 0.0 <= value <= 1.0:
            raise SearchError(f"target {key} must be in [0, 1], got {value!r}")
        clean[key] = value
    return clean


def ideal_quantum_targets() -> dict[str, float]:
    """The noise-free quantum statistics as a target set."""
    return {
        "p_alice_m1": 1.0 / 9.0,
        "p_alice_m2": 1.0 / 9.0,
        "p_alice_none": 1.0 / 9.0,
        "p_bob_given_alice_m1": 1.0,
        "p_bob_given_alice_m2": 1.0,
    }


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.nonzero(u + (1.0 - css) / np.arange(1, len(v) + 1) > 0)[0][-1]
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


_ROW_SLOTS = 10  # placement + 3 rows each for the three stochastic maps


def _rows_to_strategy(rows: np.ndarray) -> MrStrategy:
    return MrStrategy(
        placement=rows[0],
        shuffle_before=rows[1:4],
        shuffle_after=rows[4:7],
        measurement_disturbance=rows[7:10],
    )


def _strategy_to_rows(strategy: MrStrategy) -> np.ndarray:
    return np.vstack(
        [
            strategy.placement,
            strategy.shuffle_before,
            strategy.shuffle_after,
            strategy.measurement_disturbance,
        ]
    ).astype(np.float64)


def _eval_rows(rows: np.ndarray, targets: dict[str, float]) -> tuple[float, float]:
    placement = rows[0]
    v = placement @ rows[1:4]
    t = rows[7:10] @ rows[4:7]
    a_none = float(v @ rows[4:7][:, 2])
    vt = v @ t
    a_measured = float(vt[2])
    if a_measured > 0.0:
        p1 = float(v[0] * t[0, 2]) / a_measured
        p2 = float(v[1] * t[1, 2]) / a_measured
    else:
        p1 = p2 = 0.0
    err = max(
        abs(a_measured - targets["p_alice_m1"]),
        abs(a_measured - targets["p_alice_m2"]),
        abs(a_none - targets["p_alice_none"]),
        abs(p1 - targets["p_bob_given_alice_m1"]),
        abs(p2 - targets["p_bob_given_alice_m2"]),
    )
    return err, abs(a_measured - a_none)


def best_noncontextual_fit(
    targets: dict,
    budget: int,
    rng: np.random.Generator,
    lock_identity_disturbance: bool = False,
) -> tuple[FitResult, list[tuple[float, float]]]:
    """Search stochastic strategies for the best fit to target statistics.

    Random restarts plus coordinate descent over the row entries, each
    proposal projected back onto its simplex. Deterministic given the rng
    seed. Returns the best FitResult and the archive of every evaluated
    (disturbance, fit_error) pair, from which the trade-off frontier is
    derived.
    """
    targets = validate_targets(targets)
    if budget < 1000:
        raise SearchError(f"budget must be >= 1000, got {budget}")
    mutable_rows = range(7) if lock_identity_disturbance else range(_ROW_SLOTS)
    archive: list[tuple[float, float]] = []
    evals = 0
    best_rows = None
    best_err = math.inf
    best_dist = math.inf

    def evaluate(rows: np.ndarray) -> tuple[float, float]:
        nonlocal evals, best_rows, best_err, best_dist
        err, dist = _eval_rows(rows, targets)
        evals += 1
        archive.append((dist, err))
        if err < best_err:
            best_rows, best_err, best_dist = rows.copy(), err, dist
        return err, dist

    while evals < budget:
        start = random_strategy(rng, floor=0.0)
        rows = _strategy_to_rows(start)
        if lock_identity_disturbance:
            rows[7:10] = np.eye(3)
        current_err, _ = evaluate(rows)
        step = 0.25
        while step >= 1e-3 and evals < budget:
            improved = False
            for r in mutable_rows:
                for i in range(3):
                    for sign in (1.0, -1.0):
                        if evals >= budget:
                            break
                        candidate = rows.copy()
                        candidate[r, i] += sign * step
                        candidate[r] = project_to_simplex(candidate[r])
                        err, _ = evaluate(candidate)
                        if err < current_err - 1e-12:
                            rows = candidate
                            current_err = err
                            improved = True
            if not improved:
                step *= 0.5
    result = FitResult(
        strategy=_rows_to_strategy(best_rows),
        fit_error=best_err,
        disturbance=best_dist,
    )
    return result, archive


def frontier(archive: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Lower envelope of the archive: minimum fit_error achievable within
    each disturbance allowance (non-increasing by construction)."""
    points = sorted(archive)
    out: list[tuple[float, float]] = []
    best = math.inf
    for dist, err in points:
        if err < best:
            best = err
            out.append((dist, best))
    return out
