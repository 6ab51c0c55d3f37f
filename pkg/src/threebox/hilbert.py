"""Exact complex linear algebra for the 3-dimensional box system.

States, unitaries, projectors, Kraus channels and Born-rule measurement,
all specialized to d = 3. Every value is immutable after construction and
every operation is a pure function (stochastic ones take an explicit
``numpy.random.Generator``), so the module is safe to use from many
threads as long as each thread owns its rng stream.

Box labels are 1-based (boxes 1, 2, 3) to match the game's language;
they map onto array indices 0..2 internally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIM = 3

# Tolerance ladder: algebraic identities vs constructed-matrix checks.
TOL_ALGEBRA = 1e-12
TOL_MATRIX = 1e-10

_EIGENVALUE_FLOOR = -1e-10


class HilbertError(ValueError):
    """An input violates a type invariant of this module."""


class ZeroProbabilityProjection(HilbertError):
    """A projection onto a branch of (numerically) zero probability was requested."""


def _as_complex_vector(values) -> np.ndarray:
    a = np.asarray(values, dtype=np.complex128)
    if a.shape != (DIM,):
        raise HilbertError(f"expected a length-{DIM} amplitude vector, got shape {a.shape}")
    a.setflags(write=False)
    return a


def _as_complex_matrix(values) -> np.ndarray:
    m = np.asarray(values, dtype=np.complex128)
    if m.shape != (DIM, DIM):
        raise HilbertError(f"expected a {DIM}x{DIM} matrix, got shape {m.shape}")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state of the box system: 3 complex amplitudes with unit norm."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = _as_complex_vector(self.amplitudes)
        object.__setattr__(self, "amplitudes", a)
        norm_sq = float(np.vdot(a, a).real)
        if abs(norm_sq - 1.0) > TOL_ALGEBRA:
            raise HilbertError(f"state vector not normalized: |psi|^2 = {norm_sq!r}")

    @staticmethod
    def normalized(values) -> "StateVector":
        """Build a state from unnormalized amplitudes."""
        a = np.asarray(values, dtype=np.complex128)
        norm = float(np.linalg.norm(a))
        if norm < 1e-14:
            raise HilbertError("cannot normalize a (near-)zero vector")
        return StateVector(a / norm)

    def overlap(self, other: "StateVector") -> complex:
        """Inner product <self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityMatrix":
        """Rank-1 density matrix |psi><psi|."""
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mixed state: Hermitian, unit-trace, positive-semidefinite 3x3 matrix."""

    entries: np.ndarray

    def __post_init__(self):
        m = _as_complex_matrix(self.entries)
        object.__setattr__(self, "entries", m)
        if float(np.abs(m - m.conj().T).max()) > TOL_ALGEBRA:
            raise HilbertError("density matrix is not Hermitian")
        trace = complex(np.trace(m))
        if abs(trace - 1.0) > TOL_ALGEBRA:
            raise HilbertError(f"density matrix trace is {trace!r}, expected 1")

    def assert_positive(self) -> None:
        """Full invariant check including the eigenvalue floor (slower)."""
        eigs = np.linalg.eigvalsh(self.entries)
        if float(eigs.min()) < _EIGENVALUE_FLOOR:
            raise HilbertError(f"density matrix has negative eigenvalue {eigs.min()!r}")

    def probabilities(self) -> np.ndarray:
        """Diagonal in the box basis (populations), as reals."""
        return self.entries.diagonal().real.copy()


@dataclass(frozen=True, eq=False)
class Unitary:
    """3x3 unitary matrix: U†U = identity within 1e-10."""

    entries: np.ndarray

    def __post_init__(self):
        m = _as_complex_matrix(self.entries)
        object.__setattr__(self, "entries", m)
        defect = float(np.abs(m.conj().T @ m - np.eye(DIM)).max())
        if defect > TOL_MATRIX:
            raise HilbertError(f"matrix is not unitary (defect {defect:.3e})")

    def dagger(self) -> "Unitary":
        return Unitary(self.entries.conj().T)

    def compose(self, other: "Unitary") -> "Unitary":
        """self ∘ other: apply `other` first, then `self`."""
        return Unitary(self.entries @ other.entries)


@dataclass(frozen=True, eq=False)
class Projector:
    """Hermitian idempotent 3x3 matrix (P² = P within 1e-10)."""

    entries: np.ndarray

    def __post_init__(self):
        m = _as_complex_matrix(self.entries)
        object.__setattr__(self, "entries", m)
        if float(np.abs(m - m.conj().T).max()) > TOL_MATRIX:
            raise HilbertError("projector is not Hermitian")
        if float(np.abs(m @ m - m).max()) > TOL_MATRIX:
            raise HilbertError("projector is not idempotent")

    def complement(self) -> "Projector":
        return Projector(np.eye(DIM) - self.entries)


@dataclass(frozen=True, eq=False)
class Channel:
    """Trace-preserving Kraus map: Σ K†K = identity within 1e-10."""

    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(_as_complex_matrix(k) for k in self.kraus_ops)
        object.__setattr__(self, "kraus_ops", ops)
        total = sum(k.conj().T @ k for k in ops)
        if float(np.abs(total - np.eye(DIM)).max()) > TOL_MATRIX:
            raise HilbertError("channel is not trace-preserving")


def _make_box_states() -> dict:
    out = {}
    for j in (1, 2, 3):
        a = np.zeros(DIM, dtype=np.complex128)
        a[j - 1] = 1.0
        out[j] = StateVector(a)
    return out


_BOX_STATES = _make_box_states()


def box_state(j: int) -> StateVector:
    """Basis state |j> for box label j in {1, 2, 3}."""
    try:
        return _BOX_STATES[j]
    except KeyError:
        raise HilbertError(f"box label must be 1, 2 or 3, got {j!r}") from None


def box_projector(j: int) -> Projector:
    """Rank-1 projector |j><j| onto box j."""
    a = box_state(j).amplitudes
    return Projector(np.outer(a, a.conj()))


def box_complement(j: int) -> Projector:
    """Complement projector 1 - |j><j| (the "not in box j" outcome)."""
    return box_projector(j).complement()


def identity_unitary() -> Unitary:
    return Unitary(np.eye(DIM))


def identity_channel() -> Channel:
    return Channel((np.eye(DIM),))


def _complete_basis(first: np.ndarray) -> list[np.ndarray]:
    """Deterministic Gram-Schmidt completion of {first} over the standard
    basis in index order."""
    basis = [first]
    for k in range(DIM):
        if len(basis) == DIM:
            break
        v = np.zeros(DIM, dtype=np.complex128)
        v[k] = 1.0
        for b in basis:
            v = v - np.vdot(b, v) * b
        norm = float(np.linalg.norm(v))
        if norm > 1e-6:
            basis.append(v / norm)
    if len(basis) != DIM:
        raise HilbertError("failed to complete orthonormal basis")
    return basis


def unitary_from_pair(source: StateVector, target: StateVector) -> Unitary:
    """Unitary mapping |source> to |target> exactly.

    The phase is fixed so that <target|U|source> = +1, and the remaining
    action is completed deterministically: both the source and target
    orthogonal complements are spanned by Gram-Schmidt over the standard
    basis in index order, and matched in that order.
    """
    src_basis = _complete_basis(source.amplitudes)
    tgt_basis = _complete_basis(target.amplitudes)
    u = np.zeros((DIM, DIM), dtype=np.complex128)
    for s, t in zip(src_basis, tgt_basis):
        u += np.outer(t, s.conj())
    return Unitary(u)


def born_probability(p: Projector, s: StateVector) -> float:
    """Outcome probability <s|P|s> for projector P on state |s>."""
    a = s.amplitudes
    value = complex(np.vdot(a, p.entries @ a))
    prob = value.real
    # Clamp float dust at the boundaries; anything larger is a real bug.
    if prob < 0.0:
        if prob < -TOL_ALGEBRA:
            raise HilbertError(f"negative Born probability {prob!r}")
        prob = 0.0
    elif prob > 1.0:
        if prob > 1.0 + TOL_ALGEBRA:
            raise HilbertError(f"Born probability {prob!r} exceeds 1")
        prob = 1.0
    return prob


def born_probability_dm(p: Projector, rho: DensityMatrix) -> float:
    """Outcome probability tr(P rho)."""
    prob = float(np.trace(p.entries @ rho.entries).real)
    return min(max(prob, 0.0), 1.0)


def project(p: Projector, s: StateVector) -> tuple[StateVector, float]:
    """Collapse |s> through projector P.

    Returns (P|s> / ||P|s>||, <s|P|s>). Raises ZeroProbabilityProjection
    when the branch probability is below 1e-14, i.e. an impossible branch
    was requested.
    """
    prob = born_probability(p, s)
    if prob < 1e-14:
        raise ZeroProbabilityProjection(
            f"projection onto a branch of probability {prob!r}"
        )
    post = p.entries @ s.amplitudes
    return StateVector(post / np.sqrt(prob)), prob


def apply_unitary(u: Unitary, s: StateVector) -> StateVector:
    return StateVector(u.entries @ s.amplitudes)


def apply_unitary_dm(u: Unitary, rho: DensityMatrix) -> DensityMatrix:
    return DensityMatrix(u.entries @ rho.entries @ u.entries.conj().T)


def apply_channel(c: Channel, rho: DensityMatrix) -> DensityMatrix:
    out = np.zeros((DIM, DIM), dtype=np.complex128)
    for k in c.kraus_ops:
        out += k @ rho.entries @ k.conj().T
    return DensityMatrix(out)


def _check_complete(projectors) -> None:
    total = sum(p.entries for p in projectors)
    if float(np.abs(total - np.eye(DIM)).max()) > TOL_MATRIX:
        raise HilbertError("projector set is not complete")


def _pick_branch(probs: list[float], rng: np.random.Generator) -> int:
    """Sample an index by one uniform draw over the cumulative weights."""
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    # u landed in the float-dust tail; return the last positive branch.
    for i in range(len(probs) - 1, -1, -1):
        if probs[i] > 0.0:
            return i
    raise HilbertError("all branch probabilities are zero")


def measure_in_basis(
    rho: DensityMatrix, projectors, rng: np.random.Generator
) -> tuple[int, DensityMatrix]:
    """Sample a projective measurement over a complete projector set.

    Outcome index i is drawn with probability tr(P_i rho); the post-state
    is P_i rho P_i / tr(P_i rho). The index refers to the position in the
    `projectors` sequence.
    """
    projectors = list(projectors)
    _check_complete(projectors)
    probs = [born_probability_dm(p, rho) for p in projectors]
    idx = _pick_branch(probs, rng)
    p = projectors[idx].entries
    post = p @ rho.entries @ p
    return idx, DensityMatrix(post / probs[idx])


def sample_projection(
    projectors, s: StateVector, rng: np.random.Generator
) -> tuple[int, StateVector]:
    """Pure-state twin of measure_in_basis (quantum-trajectory sampling)."""
    projectors = list(projectors)
    _check_complete(projectors)
    probs = [born_probability(p, s) for p in projectors]
    idx = _pick_branch(probs, rng)
    post, _ = project(projectors[idx], s)
    return idx, post
