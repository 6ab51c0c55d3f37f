"""Parameterized error model for the three-box protocol.

Each knob corresponds to one imperfection of the physical experiment,
applied at the protocol step where it is incurred: heralded preparation
fidelity, binary readout fidelity, survival of the box label through the
post-readout repopulation sequence, systematic over-rotation of the
control pulses, and optional per-step dephasing in the box basis.

With every parameter at its ideal value (fidelities 1, rates 0) every
operation here is the identity on states and records.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields

import numpy as np

from .hilbert import (
    DIM,
    Channel,
    DensityMatrix,
    StateVector,
    Unitary,
    box_state,
)


class NoiseError(ValueError):
    """Invalid noise parameter set."""


class RepopulationTag(enum.Enum):
    """What the repopulation sequence did to a freshly measured box label."""

    PRESERVED = "preserved"
    UNDETERMINED = "undetermined"
    FLIPPED = "flipped"


_PROB_FIELDS = (
    "f_herald",
    "herald_success_rate",
    "f_readout",
    "p_preserve",
    "p_undetermined_given_loss",
    "dephasing_rate",
)


@dataclass(frozen=True)
class NoiseParams:
    """All channel strengths of the error model.

    f_herald: probability the heralded initial state is truly box 3.
    herald_success_rate: fraction of preparation attempts that herald at
        all (simulated wall-clock accounting only; no effect on states).
    f_readout: probability a single projective readout reports the correct
        binary outcome.
    p_preserve: probability the box label survives the repopulation
        sequence after a true measurement outcome.
    p_undetermined_given_loss: of the lost fraction, how much yields an
        undetermined record rather than a silent box-label flip.
    rf_epsilon: systematic over-rotation (radians) composed onto the
        control unitaries.
    dephasing_rate: per-step dephasing strength in the box basis.
    """

    f_herald: float = 0.95
    herald_success_rate: float = 0.01
    f_readout: float = 0.96
    p_preserve: float = 0.70
    p_undetermined_given_loss: float = 0.5
    rf_epsilon: float = 0.0
    dephasing_rate: float = 0.0

    def __post_init__(self):
        for name in _PROB_FIELDS:
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise NoiseError(f"{name} must be in [0, 1], got {value!r}")
        if not np.isfinite(self.rf_epsilon):
            raise NoiseError(f"rf_epsilon must be finite, got {self.rf_epsilon!r}")

    @classmethod
    def ideal(cls) -> "NoiseParams":
        """Noise-free parameter set: every operation becomes the identity."""
        return cls(
            f_herald=1.0,
            herald_success_rate=1.0,
            f_readout=1.0,
            p_preserve=1.0,
            p_undetermined_given_loss=0.5,
            rf_epsilon=0.0,
            dephasing_rate=0.0,
        )

    @property
    def is_ideal(self) -> bool:
        return (
            self.f_herald == 1.0
            and self.f_readout == 1.0
            and self.p_preserve == 1.0
            and self.rf_epsilon == 0.0
            and self.dephasing_rate == 0.0
        )

    def to_dict(self) -> dict:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise NoiseError(f"unknown noise parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


def sample_heralded_box(params: NoiseParams, rng: np.random.Generator) -> int:
    """Box label actually prepared by a successful herald.

    Box 3 with probability f_herald, otherwise box 1 or 2 with equal
    probability (a false herald leaves the label in one of the other two
    sublevels).
    """
    u = rng.random()
    if u < params.f_herald:
        return 3
    return 1 if (u - params.f_herald) < (1.0 - params.f_herald) / 2.0 else 2


def noisy_initial_state(params: NoiseParams, rng: np.random.Generator) -> DensityMatrix:
    """Sampled heralded preparation, as a density matrix."""
    return box_state(sample_heralded_box(params, rng)).density()


def flip_readout(true_outcome: bool, params: NoiseParams, rng: np.random.Generator) -> bool:
    """Pass a binary outcome through the imperfect readout.

    Returns the true outcome with probability f_readout and its negation
    otherwise. Only the classical record is touched: the projection that
    produced `true_outcome` has already acted on the state.
    """
    if rng.random() < params.f_readout:
        return true_outcome
    return not true_outcome


def sample_repopulation(
    box: int, params: NoiseParams, rng: np.random.Generator
) -> tuple[int, RepopulationTag]:
    """Send a freshly measured box label through the repopulation sequence.

    Preserved with probability p_preserve; of the lost fraction,
    p_undetermined_given_loss yields an undetermined record (label kept)
    and the rest silently flips the label to one of the other two boxes,
    uniformly.
    """
    u = rng.random()
    if u < params.p_preserve:
        return box, RepopulationTag.PRESERVED
    loss = 1.0 - params.p_preserve
    if u < params.p_preserve + loss * params.p_undetermined_given_loss:
        return box, RepopulationTag.UNDETERMINED
    others = [j for j in (1, 2, 3) if j != box]
    flipped = others[0] if rng.random() < 0.5 else others[1]
    return flipped, RepopulationTag.FLIPPED


def repopulation_channel(
    rho: DensityMatrix, params: NoiseParams, rng: np.random.Generator
) -> tuple[DensityMatrix, RepopulationTag]:
    """Density-matrix form of sample_repopulation.

    `rho` must be the post-state of a true outcome, i.e. a box eigenstate;
    the occupied label is read off the populations.
    """
    box = int(np.argmax(rho.probabilities())) + 1
    new_box, tag = sample_repopulation(box, params, rng)
    if new_box == box:
        return rho, tag
    return box_state(new_box).density(), tag


def _plane_rotation(plane: tuple[int, int], angle: float) -> np.ndarray:
    a, b = (plane[0] - 1, plane[1] - 1)
    r = np.eye(DIM, dtype=np.complex128)
    c, s = np.cos(angle), np.sin(angle)
    r[a, a] = c
    r[b, b] = c
    r[a, b] = -s
    r[b, a] = s
    return r


def perturbed_unitary(
    ideal: Unitary, params: NoiseParams, plane: tuple[int, int] = (1, 3)
) -> Unitary:
    """Compose a control unitary with its systematic over-rotation.

    The over-rotation is a real rotation by rf_epsilon in the plane of the
    two box states the pulse couples (given as 1-based labels).
    """
    if params.rf_epsilon == 0.0:
        return ideal
    if sorted(plane) not in ([1, 2], [1, 3], [2, 3]):
        raise NoiseError(f"plane must name two distinct box labels, got {plane!r}")
    return Unitary(_plane_rotation(plane, params.rf_epsilon) @ ideal.entries)


def dephasing_channel(rate: float) -> Channel:
    """Box-basis dephasing: rho -> (1-rate) rho + rate diag(rho)."""
    if not (0.0 <= rate <= 1.0):
        raise NoiseError(f"dephasing rate must be in [0, 1], got {rate!r}")
    ops = [np.sqrt(1.0 - rate) * np.eye(DIM, dtype=np.complex128)]
    for j in range(DIM):
        k = np.zeros((DIM, DIM), dtype=np.complex128)
        k[j, j] = np.sqrt(rate)
        ops.append(k)
    return Channel(tuple(ops))


def sample_dephasing(
    state: StateVector, params: NoiseParams, rng: np.random.Generator
) -> StateVector:
    """Trajectory unraveling of dephasing_channel for pure states.

    With probability dephasing_rate the coherence is destroyed: a box is
    drawn by the Born weights and the state collapses onto it. Identical
    to the Kraus map in distribution.
    """
    rate = params.dephasing_rate
    if rate == 0.0 or rng.random() >= rate:
        return state
    weights = np.abs(state.amplitudes) ** 2
    u = rng.random()
    acc = 0.0
    for j in range(DIM):
        acc += weights[j]
        if u < acc:
            return box_state(j + 1)
    return box_state(DIM)
