"""The three-box game as a round state machine.

Two interchangeable engines share one round structure:

* quantum — heralded box-3 preparation, a control unitary into the equal
  superposition, Bob's single projective box measurement, Alice's mapped
  final measurement. Simulated as a pure-state trajectory: noise channels
  are sampled branch-by-branch, which reproduces the density-matrix
  statistics exactly in distribution.
* macrorealist — a hidden ball with definite position at all times;
  Alice's manipulations and Bob's measurement back-action appear as
  row-stochastic maps on the ball label.

Rounds are independent given distinct rng streams: every round draws from
``numpy.random.default_rng([seed, round_id])``, so a session may fan out
rounds across workers and merge records in round_id order with results
identical to a serial run.
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import hilbert, noise
from .hilbert import StateVector, Unitary
from .noise import NoiseParams, RepopulationTag


class ProtocolError(ValueError):
    pass


class InvalidContext(ProtocolError):
    """A measurement was requested for a round where Bob measures nothing."""


class SettleBeforeComplete(ProtocolError):
    """Settlement was requested for a bet round whose result is not decided."""


class Context(enum.Enum):
    """Bob's per-round choice: measure box 1, box 2, or nothing."""

    M1 = "M1"
    M2 = "M2"
    NONE = "none"

    @property
    def box(self) -> int:
        if self is Context.M1:
            return 1
        if self is Context.M2:
            return 2
        raise InvalidContext("the no-measurement context has no box")


class BobOutcome(enum.Enum):
    TRUE = "true"
    FALSE = "false"
    UNDETERMINED = "undetermined"


class EngineKind(enum.Enum):
    QUANTUM = "quantum"
    MACROREAL = "macroreal"


# The two anchor states of the game, in the box basis.
def preselection_state() -> StateVector:
    """The state Alice hands to Bob: (|1> + |2> + |3>) / sqrt(3)."""
    return StateVector.normalized([1.0, 1.0, 1.0])


def postselection_state() -> StateVector:
    """The state Alice checks for at the end: (|1> + |2> - |3>) / sqrt(3)."""
    return StateVector.normalized([1.0, 1.0, -1.0])


def prepare_unitary() -> Unitary:
    """Maps |3> onto the preselection state."""
    return hilbert.unitary_from_pair(hilbert.box_state(3), preselection_state())


def final_map_unitary() -> Unitary:
    """Maps the postselection state onto |3>, so M3 doubles as its check."""
    return hilbert.unitary_from_pair(postselection_state(), hilbert.box_state(3))


def _row_stochastic(values) -> np.ndarray:
    m = np.asarray(values, dtype=np.float64)
    if m.shape != (3, 3):
        raise ProtocolError(f"expected a 3x3 stochastic matrix, got shape {m.shape}")
    if (m < -1e-15).any():
        raise ProtocolError("stochastic matrix entries must be >= 0")
    rows = m.sum(axis=1)
    if np.abs(rows - 1.0).max() > 1e-12:
        raise ProtocolError(f"stochastic matrix rows must sum to 1, got {rows}")
    m = np.clip(m, 0.0, None)
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class MrStrategy:
    """A macrorealist account of Alice's play.

    placement: distribution of the ball right after heralding.
    shuffle_before / shuffle_after: row-stochastic maps standing in for
        Alice's two manipulations (a macrorealist is explicitly allowed
        non-deterministic manipulations, not just permutations).
    measurement_disturbance: map applied to the ball whenever Bob opens a
        box; identity means non-disturbing measurements.
    """

    placement: np.ndarray
    shuffle_before: np.ndarray
    shuffle_after: np.ndarray
    measurement_disturbance: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.placement, dtype=np.float64)
        if p.shape != (3,) or (p < -1e-15).any() or abs(p.sum() - 1.0) > 1e-12:
            raise ProtocolError(f"placement must be a probability 3-vector, got {p}")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "placement", p)
        object.__setattr__(self, "shuffle_before", _row_stochastic(self.shuffle_before))
        object.__setattr__(self, "shuffle_after", _row_stochastic(self.shuffle_after))
        object.__setattr__(
            self, "measurement_disturbance", _row_stochastic(self.measurement_disturbance)
        )

    @property
    def is_non_disturbing(self) -> bool:
        return bool(np.array_equal(self.measurement_disturbance, np.eye(3)))

    @classmethod
    def hidden_ball(cls, shuffle_before=None, shuffle_after=None) -> "MrStrategy":
        """Ball heralded in box 3, optional shuffles, non-disturbing Bob.

        Defaults to the honest classical mirror of the quantum protocol:
        the first manipulation spreads box 3 uniformly, the second is the
        uniform mixer as well (a macrorealist watching Alice's pulses sees
        information-destroying shuffles).
        """
        uniform = np.full((3, 3), 1.0 / 3.0)
        return cls(
            placement=[0.0, 0.0, 1.0],
            shuffle_before=uniform if shuffle_before is None else shuffle_before,
            shuffle_after=uniform if shuffle_after is None else shuffle_after,
            measurement_disturbance=np.eye(3),
        )

    def to_dict(self) -> dict:
        return {
            "placement": [float(x) for x in self.placement],
            "shuffle_before": [[float(x) for x in row] for row in self.shuffle_before],
            "shuffle_after": [[float(x) for x in row] for row in self.shuffle_after],
            "measurement_disturbance": [
                [float(x) for x in row] for row in self.measurement_disturbance
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MrStrategy":
        known = {"placement", "shuffle_before", "shuffle_after", "measurement_disturbance"}
        unknown = set(data) - known
        if unknown:
            raise ProtocolError(f"unknown strategy field(s): {sorted(unknown)}")
        missing = known - set(data)
        if missing:
            raise ProtocolError(f"missing strategy field(s): {sorted(missing)}")
        return cls(**data)


class ScheduleKind(enum.Enum):
    ALTERNATE = "alternate"
    UNIFORM_RANDOM = "uniform_random"
    BLOCKS = "blocks"
    EXTERNAL = "external"


@dataclass(frozen=True)
class ContextSchedule:
    """How Bob's context is chosen round by round.

    alternate: M1, M2, M1, M2, ...
    uniform_random: uniform over {M1, M2, none}, drawn from the round's
        own rng stream.
    blocks(n): n rounds of M1, then n of M2, repeating.
    external: supplied per round by the caller (interactive service).
    """

    kind: ScheduleKind
    block_size: int | None = None

    def __post_init__(self):
        if self.kind is ScheduleKind.BLOCKS:
            if not self.block_size or self.block_size < 1:
                raise ProtocolError("blocks schedule requires block_size >= 1")
        elif self.block_size is not None:
            raise ProtocolError(f"{self.kind.value} schedule takes no block_size")

    def context_for(self, round_id: int, rng: np.random.Generator) -> Context:
        if self.kind is ScheduleKind.ALTERNATE:
            return Context.M1 if round_id % 2 == 1 else Context.M2
        if self.kind is ScheduleKind.UNIFORM_RANDOM:
            return (Context.M1, Context.M2, Context.NONE)[int(rng.random() * 3.0) % 3]
        if self.kind is ScheduleKind.BLOCKS:
            return Context.M1 if ((round_id - 1) // self.block_size) % 2 == 0 else Context.M2
        raise ProtocolError("external schedule needs an explicit context per round")

    def to_json_value(self):
        if self.kind is ScheduleKind.BLOCKS:
            return {"kind": "blocks", "n": self.block_size}
        return self.kind.value

    @classmethod
    def from_json_value(cls, value) -> "ContextSchedule":
        if isinstance(value, str):
            try:
                kind = ScheduleKind(value)
            except ValueError:
                raise ProtocolError(f"unknown context_schedule {value!r}") from None
            if kind is ScheduleKind.BLOCKS:
                raise ProtocolError('blocks schedule must be {"kind": "blocks", "n": N}')
            return cls(kind)
        if isinstance(value, dict):
            unknown = set(value) - {"kind", "n"}
            if unknown:
                raise ProtocolError(f"unknown context_schedule field(s): {sorted(unknown)}")
            if value.get("kind") != "blocks":
                raise ProtocolError(f"unknown context_schedule {value!r}")
            return cls(ScheduleKind.BLOCKS, int(value["n"]))
        raise ProtocolError(f"unknown context_schedule {value!r}")


@dataclass(frozen=True)
class SessionConfig:
    """Everything needed to reproduce a session bit-for-bit."""

    engine: EngineKind
    noise: NoiseParams = field(default_factory=NoiseParams)
    mr_strategy: MrStrategy | None = None
    rounds: int = 2400
    context_schedule: ContextSchedule = field(
        default_factory=lambda: ContextSchedule(ScheduleKind.ALTERNATE)
    )
    odds: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ProtocolError(f"rounds must be >= 1, got {self.rounds}")
        if not self.odds > 1.0:
            raise ProtocolError(f"odds must be > 1, got {self.odds}")
        if not (0 <= int(self.seed) < 2**64):
            raise ProtocolError("seed must fit in 64 unsigned bits")
        if self.engine is EngineKind.MACROREAL and self.mr_strategy is None:
            raise ProtocolError("macroreal engine requires mr_strategy")
        if self.engine is EngineKind.QUANTUM and self.mr_strategy is not None:
            raise ProtocolError("quantum engine takes no mr_strategy")


@dataclass(frozen=True)
class RoundRecord:
    """One full game round, including Alice's side and (for the
    macrorealist engine) the ground-truth ball trajectory."""

    round_id: int
    engine: EngineKind
    context: Context
    bob_outcome: BobOutcome | None
    alice_m3: bool
    alice_bets: bool
    alice_wins: bool | None
    ground_truth_boxes: tuple[int, int, int] | None
    seed_path: str

    def __post_init__(self):
        if self.alice_bets != self.alice_m3:
            raise ProtocolError("Alice bets exactly when her M3 result is true")
        should_have_win = self.alice_bets and self.context is not Context.NONE
        if should_have_win != (self.alice_wins is not None):
            raise ProtocolError("alice_wins must be set exactly on decided bet rounds")
        if (self.engine is EngineKind.MACROREAL) != (self.ground_truth_boxes is not None):
            raise ProtocolError("ground truth present iff engine is macroreal")
        if (self.context is Context.NONE) != (self.bob_outcome is None):
            raise ProtocolError("bob_outcome present iff Bob measured")


@dataclass
class EngineState:
    """In-flight state of one round. Quantum rounds carry a pure state;
    macrorealist rounds carry the ball label and its trajectory so far."""

    kind: EngineKind
    noise: NoiseParams
    psi: StateVector | None = None
    ball: int | None = None
    trajectory: list[int] = field(default_factory=list)
    strategy: MrStrategy | None = None


def round_rng(seed: int, round_id: int) -> np.random.Generator:
    """The round's private rng stream; the determinism contract."""
    return np.random.default_rng([int(seed), int(round_id)])


def seed_path(seed: int, round_id: int) -> str:
    return f"{int(seed)}/{int(round_id)}"


def _sample_row(matrix: np.ndarray, row: int, rng: np.random.Generator) -> int:
    """Draw a 1-based label from a stochastic-matrix row via one uniform."""
    u = rng.random()
    acc = 0.0
    for j in range(3):
        acc += matrix[row - 1, j]
        if u < acc:
            return j + 1
    return 3


@dataclass(frozen=True)
class _QuantumOps:
    """Per-noise precomputed operators: the control unitaries with their
    systematic over-rotations composed in, raw-array views of them for the
    round hot path, and the measurement projector pairs."""

    prepare: Unitary
    final_map: Unitary
    pairs: dict
    prep_matrix: np.ndarray
    final_matrix: np.ndarray

    @classmethod
    def build(cls, params: NoiseParams) -> "_QuantumOps":
        u_prep = noise.perturbed_unitary(prepare_unitary(), params, plane=(1, 3))
        u_final = noise.perturbed_unitary(final_map_unitary(), params, plane=(2, 3))
        pairs = {
            j: (hilbert.box_projector(j), hilbert.box_complement(j)) for j in (1, 2, 3)
        }
        return cls(
            prepare=u_prep,
            final_map=u_final,
            pairs=pairs,
            prep_matrix=u_prep.entries,
            final_matrix=u_final.entries,
        )


_OPS_CACHE: dict[NoiseParams, _QuantumOps] = {}


def _quantum_ops(params: NoiseParams) -> _QuantumOps:
    ops = _OPS_CACHE.get(params)
    if ops is None:
        ops = _QuantumOps.build(params)
        if len(_OPS_CACHE) > 64:
            _OPS_CACHE.clear()
        _OPS_CACHE[params] = ops
    return ops


def _collapse_on_box(
    amplitudes: np.ndarray, j: int, rng: np.random.Generator
) -> tuple[bool, np.ndarray | None]:
    """Sample the {box-j, complement} pair on a pure state with one draw.

    Returns (found, post_amplitudes); the post state is None on the found
    branch (the caller rebuilds it as a box eigenstate anyway).
    """
    p_true = abs(amplitudes[j - 1]) ** 2
    p_false = 1.0 - p_true
    if rng.random() < p_true or p_false < 1e-14:
        return True, None
    post = amplitudes.copy()
    post[j - 1] = 0.0
    return False, post / np.sqrt(p_false)


def alice_prepare(
    engine: EngineKind,
    params: NoiseParams,
    rng: np.random.Generator,
    strategy: MrStrategy | None = None,
) -> EngineState:
    """Alice's opening turn: herald, then her first manipulation."""
    if engine is EngineKind.QUANTUM:
        ops = _quantum_ops(params)
        box = noise.sample_heralded_box(params, rng)
        psi = StateVector(ops.prep_matrix[:, box - 1])
        psi = noise.sample_dephasing(psi, params, rng)
        return EngineState(kind=engine, noise=params, psi=psi)
    if strategy is None:
        raise ProtocolError("macroreal engine requires a strategy")
    ball = _sample_row(strategy.placement.reshape(1, 3), 1, rng)
    state = EngineState(kind=engine, noise=params, ball=ball, strategy=strategy)
    state.trajectory.append(ball)
    state.ball = _sample_row(strategy.shuffle_before, ball, rng)
    return state


def bob_measure(
    state: EngineState, context: Context, params: NoiseParams, rng: np.random.Generator
) -> tuple[EngineState, BobOutcome]:
    """Bob opens box 1 or 2; never called for the no-measurement context."""
    if context is Context.NONE:
        raise InvalidContext("Bob does not measure in the no-measurement context")
    j = context.box
    if state.kind is EngineKind.QUANTUM:
        found, post = _collapse_on_box(state.psi.amplitudes, j, rng)
        if found:
            new_box, tag = noise.sample_repopulation(j, params, rng)
            psi = hilbert.box_state(new_box)
            if tag is RepopulationTag.UNDETERMINED:
                outcome = BobOutcome.UNDETERMINED
            else:
                reported = noise.flip_readout(True, params, rng)
                outcome = BobOutcome.TRUE if reported else BobOutcome.FALSE
        else:
            psi = StateVector(post)
            reported = noise.flip_readout(False, params, rng)
            outcome = BobOutcome.TRUE if reported else BobOutcome.FALSE
        state.psi = noise.sample_dephasing(psi, params, rng)
        return state, outcome
    found = state.ball == j
    state.ball = _sample_row(state.strategy.measurement_disturbance, state.ball, rng)
    return state, BobOutcome.TRUE if found else BobOutcome.FALSE


def alice_measure(
    state: EngineState, params: NoiseParams, rng: np.random.Generator
) -> tuple[EngineState, bool]:
    """Alice's closing turn: second manipulation, then her M3 readout."""
    if state.kind is EngineKind.QUANTUM:
        ops = _quantum_ops(params)
        psi = StateVector(ops.final_matrix @ state.psi.amplitudes)
        psi = noise.sample_dephasing(psi, params, rng)
        found, post = _collapse_on_box(psi.amplitudes, 3, rng)
        state.psi = hilbert.box_state(3) if found else StateVector(post)
        reported = noise.flip_readout(found, params, rng)
        return state, reported
    state.trajectory.append(state.ball)
    state.ball = _sample_row(state.strategy.shuffle_after, state.ball, rng)
    state.trajectory.append(state.ball)
    return state, state.ball == 3


def settle(record: RoundRecord, odds: float) -> float:
    """Alice's signed payoff for one round.

    Pass costs nothing. On a bet, Alice takes +1 stake when she wins and
    pays (odds - 1) when she loses. Rounds without a Bob measurement have
    no bet to settle.
    """
    if not odds > 1.0:
        raise ProtocolError(f"odds must be > 1, got {odds}")
    if not record.alice_bets or record.context is Context.NONE:
        return 0.0
    if record.alice_wins is None:
        raise SettleBeforeComplete(f"round {record.round_id} settled before completion")
    return 1.0 if record.alice_wins else -(odds - 1.0)


def play_round(
    config: SessionConfig, round_id: int, context: Context | None = None
) -> RoundRecord:
    """One full round: prepare, Bob's (optional) turn, Alice's turn.

    Deterministic given (config, seed, round_id): the round owns the rng
    stream derived from the pair. External schedules must pass `context`.
    """
    rng = round_rng(config.seed, round_id)
    if context is None:
        context = config.context_schedule.context_for(round_id, rng)
    state = alice_prepare(config.engine, config.noise, rng, config.mr_strategy)
    bob: BobOutcome | None = None
    if context is not Context.NONE:
        state, bob = bob_measure(state, context, config.noise, rng)
    state, alice_m3 = alice_measure(state, config.noise, rng)
    alice_bets = alice_m3
    alice_wins: bool | None = None
    if alice_bets and context is not Context.NONE:
        alice_wins = bob is BobOutcome.TRUE
    ground_truth = None
    if state.kind is EngineKind.MACROREAL:
        ground_truth = tuple(state.trajectory)  # (after herald, after Bob, after shuffle)
    return RoundRecord(
        round_id=round_id,
        engine=config.engine,
        context=context,
        bob_outcome=bob,
        alice_m3=alice_m3,
        alice_bets=alice_bets,
        alice_wins=alice_wins,
        ground_truth_boxes=ground_truth,
        seed_path=seed_path(config.seed, round_id),
    )


def run_session(config: SessionConfig, workers: int = 1) -> list[RoundRecord]:
    """Play config.rounds rounds, optionally fanned out across workers.

    Results are identical for any worker count: each round's randomness
    comes only from its own (seed, round_id) stream, and records are
    merged in round_id order.
    """
    if config.context_schedule.kind is ScheduleKind.EXTERNAL:
        raise ProtocolError("external schedule cannot run in batch mode")
    round_ids = range(1, config.rounds + 1)
    if workers <= 1:
        return [play_round(config, rid) for rid in round_ids]
    chunks = np.array_split(np.asarray(round_ids), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = pool.map(
            lambda ids: [play_round(config, int(rid)) for rid in ids], chunks
        )
        return [rec for part in parts for rec in part]


# ---------------------------------------------------------------------------
# Verification mode: pairs of sequential measurements, every box allowed.

VERIFICATION_READINGS = ("true", "false", "undetermined")


@dataclass
class VerificationTables:
    """Counts from Bob's pre-game checks of the measurement apparatus.

    first_counts[j1][reading]: first-measurement readings per box.
    second_counts[(j1, j2)][first_reading][second_reading]: conditional
        second readings; "undetermined" can appear only in second place
        and only after a true first outcome.
    tag_counts[j]: ground-truth repopulation branch counts after true
        first outcomes (simulator-only bookkeeping; the physical
        experiment estimates these through the second readings).
    """

    engine: EngineKind
    n_pairs: int
    first_counts: dict
    second_counts: dict
    tag_counts: dict

    def first_marginal(self, j: int) -> float:
        counts = self.first_counts[j]
        total = sum(counts.values())
        return counts["true"] / total if total else float("nan")

    def conditional(self, j1: int, j2: int, first_reading: str) -> dict:
        counts = self.second_counts[(j1, j2)][first_reading]
        total = sum(counts.values())
        if total == 0:
            return {r: float("nan") for r in VERIFICATION_READINGS}
        return {r: counts[r] / total for r in VERIFICATION_READINGS}

    def preserved_fraction(self) -> float:
        total = 0
        preserved = 0
        for counts in self.tag_counts.values():
            total += sum(counts.values())
            preserved += counts[RepopulationTag.PRESERVED.value]
        return preserved / total if total else float("nan")

    def to_dict(self) -> dict:
        return {
            "engine": self.engine.value,
            "n_pairs": self.n_pairs,
            "first_counts": {str(j): dict(c) for j, c in self.first_counts.items()},
            "second_counts": {
                f"{j1},{j2}": {fr: dict(c) for fr, c in arms.items()}
                for (j1, j2), arms in self.second_counts.items()
            },
            "tag_counts": {str(j): dict(c) for j, c in self.tag_counts.items()},
        }


def _verification_pair_quantum(
    params: NoiseParams, j1: int, j2: int, rng: np.random.Generator
) -> tuple[str, str, RepopulationTag | None]:
    ops = _quantum_ops(params)
    psi = hilbert.box_state(noise.sample_heralded_box(params, rng))
    psi = hilbert.apply_unitary(ops.prepare, psi)
    psi = noise.sample_dephasing(psi, params, rng)

    idx, psi = hilbert.sample_projection(ops.pairs[j1], psi, rng)
    tag: RepopulationTag | None = None
    if idx == 0:
        new_box, tag = noise.sample_repopulation(j1, params, rng)
        psi = hilbert.box_state(new_box)
    first = "true" if noise.flip_readout(idx == 0, params, rng) else "false"
    psi = noise.sample_dephasing(psi, params, rng)

    if tag is RepopulationTag.UNDETERMINED:
        # The system left the measurable manifold; the next reading
        # cannot be classified.
        return first, "undetermined", tag
    idx2, _ = hilbert.sample_projection(ops.pairs[j2], psi, rng)
    second = "true" if noise.flip_readout(idx2 == 0, params, rng) else "false"
    return first, second, tag


def _verification_pair_macroreal(
    strategy: MrStrategy, j1: int, j2: int, rng: np.random.Generator
) -> tuple[str, str, None]:
    ball = _sample_row(strategy.placement.reshape(1, 3), 1, rng)
    ball = _sample_row(strategy.shuffle_before, ball, rng)
    first = "true" if ball == j1 else "false"
    ball = _sample_row(strategy.measurement_disturbance, ball, rng)
    second = "true" if ball == j2 else "false"
    return first, second, None


def run_verification(
    config: SessionConfig, n_pairs: int, rng: np.random.Generator | None = None
) -> VerificationTables:
    """Bob's pre-game check: pairs of sequential measurements, all boxes.

    The game rules are relaxed: both measurements of a pair may target any
    box, including box 3. `n_pairs` rounds are distributed round-robin
    over the nine (first, second) box combinations.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    combos = [(j1, j2) for j1 in (1, 2, 3) for j2 in (1, 2, 3)]
    first_counts = {j: {"true": 0, "false": 0} for j in (1, 2, 3)}
    second_counts = {
        combo: {
            "true": {r: 0 for r in VERIFICATION_READINGS},
            "false": {r: 0 for r in VERIFICATION_READINGS},
        }
        for combo in combos
    }
    tag_counts = {j: {t.value: 0 for t in RepopulationTag} for j in (1, 2, 3)}
    for i in range(n_pairs):
        j1, j2 = combos[i % len(combos)]
        if config.engine is EngineKind.QUANTUM:
            first, second, tag = _verification_pair_quantum(config.noise, j1, j2, rng)
        else:
            first, second, tag = _verification_pair_macroreal(
                config.mr_strategy, j1, j2, rng
            )
        first_counts[j1][first] += 1
        second_counts[(j1, j2)][first][second] += 1
        if tag is not None:
            tag_counts[j1][tag.value] += 1
    return VerificationTables(
        engine=config.engine,
        n_pairs=n_pairs,
        first_counts=first_counts,
        second_counts=second_counts,
        tag_counts=tag_counts,
    )


# ---------------------------------------------------------------------------
# Analytic helpers (density-matrix route; no sampling).

def prepared_density(params: NoiseParams) -> hilbert.DensityMatrix:
    """Exact state handed to Bob, averaged over the herald branch."""
    ops = _quantum_ops(params)
    f = params.f_herald
    rho = f * hilbert.box_state(3).density().entries
    for j in (1, 2):
        rho = rho + (1.0 - f) / 2.0 * hilbert.box_state(j).density().entries
    rho_dm = hilbert.DensityMatrix(rho)
    rho_dm = hilbert.apply_unitary_dm(ops.prepare, rho_dm)
    if params.dephasing_rate > 0.0:
        rho_dm = hilbert.apply_channel(noise.dephasing_channel(params.dephasing_rate), rho_dm)
    return rho_dm


def alice_marginal_analytic(params: NoiseParams, context: Context) -> float:
    """Exact P(Alice's M3 reading is true) for a context, before readout
    flips are folded in marginally. Used for the no-signaling check."""
    ops = _quantum_ops(params)
    rho = prepared_density(params)
    if context is not Context.NONE:
        proj, comp = ops.pairs[context.box]
        p_true = hilbert.born_probability_dm(proj, rho)
        branches = []
        if p_true > 0.0:
            post = proj.entries @ rho.entries @ proj.entries / p_true
            post = _repopulation_average(hilbert.DensityMatrix(post), params)
            branches.append((p_true, post))
        if p_true < 1.0:
            post = comp.entries @ rho.entries @ comp.entries / (1.0 - p_true)
            branches.append((1.0 - p_true, hilbert.DensityMatrix(post)))
        mixed = sum(w * b.entries for w, b in branches)
        rho = hilbert.DensityMatrix(mixed)
        if params.dephasing_rate > 0.0:
            rho = hilbert.apply_channel(noise.dephasing_channel(params.dephasing_rate), rho)
    rho = hilbert.apply_unitary_dm(ops.final_map, rho)
    if params.dephasing_rate > 0.0:
        rho = hilbert.apply_channel(noise.dephasing_channel(params.dephasing_rate), rho)
    p3 = hilbert.born_probability_dm(hilbert.box_projector(3), rho)
    return params.f_readout * p3 + (1.0 - params.f_readout) * (1.0 - p3)


def _repopulation_average(rho: hilbert.DensityMatrix, params: NoiseParams) -> hilbert.DensityMatrix:
    box = int(np.argmax(rho.probabilities())) + 1
    keep = params.p_preserve + (1.0 - params.p_preserve) * params.p_undetermined_given_loss
    out = keep * rho.entries
    others = [j for j in (1, 2, 3) if j != box]
    for other in others:
        out = out + (1.0 - keep) / 2.0 * hilbert.box_state(other).density().entries
    return hilbert.DensityMatrix(out)


def ideal_game_observables() -> dict:
    """The noise-free statistics of the game, computed from the algebra."""
    psi_i = preselection_state()
    psi_f = postselection_state()
    p_alice = abs(psi_f.overlap(psi_i)) ** 2
    result = {"p_alice": {}, "p_bob_given_alice": {}}
    for context in (Context.M1, Context.M2, Context.NONE):
        result["p_alice"][context] = p_alice
    for context in (Context.M1, Context.M2):
        proj = hilbert.box_projector(context.box)
        amp = complex(
            np.vdot(psi_f.amplitudes, proj.entries @ psi_i.amplitudes)
        )
        joint = abs(amp) ** 2
        result["p_bob_given_alice"][context] = joint / p_alice
    return result
