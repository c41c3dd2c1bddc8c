"""Bidirectional controlled remote state preparation over two GHZ channels.

Two parties each hold one qudit of two three-party GHZ states; after four
projective measurements (two by the senders, two by the controller) the
leftover qudits collapse onto phase-shifted copies of the target states,
fixed up by diagonal feed-forward unitaries chosen from the broadcast
outcomes.

Subsystem order is fixed globally as (A1, B1, C1, A2, B2, C2); every index
below derives from that single convention.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .core import (
    ATOL,
    MeasurementBasis,
    Operator,
    StateVector,
    measure,
    project,
    states_equal,
    tensor,
)

# positions in the six-qudit register
A1, B1, C1, A2, B2, C2 = range(6)


@dataclass(frozen=True)
class PhaseVector:
    """The N-1 free phases of an equal-amplitude qudit state (phase 0 on |0>)."""

    dim: int
    phases: tuple[float, ...]

    def __post_init__(self):
        phases = tuple(float(p) for p in self.phases)
        if self.dim < 2:
            raise ValueError(f"dimension must be at least 2, got {self.dim}")
        if len(phases) != self.dim - 1:
            raise ValueError(
                f"need {self.dim - 1} phases for dimension {self.dim}, got {len(phases)}"
            )
        if not all(np.isfinite(phases)):
            raise ValueError("phases must be finite")
        object.__setattr__(self, "phases", phases)

    def full(self) -> np.ndarray:
        """All N phases including the implicit leading zero."""
        return np.concatenate(([0.0], self.phases))

    @staticmethod
    def zero(dim: int) -> "PhaseVector":
        return PhaseVector(dim, (0.0,) * (dim - 1))


@dataclass(frozen=True)
class OutcomeTuple:
    """Outcome indices: l on A2, n on B1, m on C1, k on C2."""

    l: int
    n: int
    m: int
    k: int

    def validate(self, dim: int) -> None:
        for name, v in (("l", self.l), ("n", self.n), ("m", self.m), ("k", self.k)):
            if not 0 <= v < dim:
                raise ValueError(f"outcome index {name}={v} out of range for dim {dim}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.l, self.n, self.m, self.k)


@dataclass(frozen=True)
class CorrectionRule:
    """Feed-forward indices: U_{a1_index} on A1 and U_{b2_index} on B2."""

    a1_index: int
    b2_index: int


@dataclass(frozen=True)
class ProtocolResult:
    outcome: OutcomeTuple
    probability: float
    corrections: CorrectionRule
    a1_before: StateVector
    b2_before: StateVector
    alice_final: StateVector
    bob_final: StateVector
    recovered: tuple[bool, bool]


def _phase_column(dim: int, idx: int) -> np.ndarray:
    """exp(i 2 pi j idx / dim) for j = 0..dim-1, with the angle reduced mod 2 pi."""
    j = np.arange(dim)
    return np.exp(2j * np.pi * ((j * idx) % dim) / dim)


def equatorial_state(p: PhaseVector) -> StateVector:
    """(1/sqrt(N)) sum_j e^{i theta_j} |j>."""
    amps = np.exp(1j * p.full()) / np.sqrt(p.dim)
    return StateVector((p.dim,), amps)


def ghz_state(n: int) -> StateVector:
    """(1/sqrt(N)) sum_j |jjj> on three qudits."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    amps = np.zeros(n**3, dtype=complex)
    stride = n * n + n + 1
    amps[np.arange(n) * stride] = 1.0 / np.sqrt(n)
    return StateVector((n, n, n), amps)


@functools.lru_cache(maxsize=1024)
def sender_basis(p: PhaseVector) -> MeasurementBasis:
    """Measurement family tau_l = (1/sqrt(N)) sum_j e^{i 2pi jl/N} e^{-i theta_j} |j>."""
    n = p.dim
    dephase = np.exp(-1j * p.full())
    vectors = tuple(
        StateVector((n,), _phase_column(n, l) * dephase / np.sqrt(n)) for l in range(n)
    )
    return MeasurementBasis(n, vectors)


@functools.lru_cache(maxsize=64)
def fourier_basis(n: int) -> MeasurementBasis:
    """tau-bar_k = (1/sqrt(N)) sum_j e^{i 2pi jk/N} |j> (the controller's basis)."""
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    vectors = tuple(
        StateVector((n,), _phase_column(n, k) / np.sqrt(n)) for k in range(n)
    )
    return MeasurementBasis(n, vectors)


def correction_unitary(k: int, n: int) -> Operator:
    """Diagonal U_k = sum_j e^{i 2pi jk/N} |j><j|."""
    if not 0 <= k < n:
        raise ValueError(f"correction index {k} out of range for dim {n}")
    return Operator(np.diag(_phase_column(n, k)), unitary=True)


def collapsed_state(p: PhaseVector, idx: int) -> StateVector:
    """Post-measurement remainder with e^{-i 2pi j idx/N} alongside the target phases.

    The exponent sign is the one that makes correction_unitary(idx) map this
    state back onto equatorial_state(p).
    """
    if not 0 <= idx < p.dim:
        raise ValueError(f"index {idx} out of range for dim {p.dim}")
    amps = np.conj(_phase_column(p.dim, idx)) * np.exp(1j * p.full()) / np.sqrt(p.dim)
    return StateVector((p.dim,), amps)


@functools.lru_cache(maxsize=16)
def channel_state(n: int) -> StateVector:
    """The full resource: GHZ on (A1,B1,C1) tensor GHZ on (A2,B2,C2)."""
    return tensor(ghz_state(n), ghz_state(n))


def mod_add(a: int, b: int, n: int) -> int:
    """The outcome-combination rule: addition modulo N."""
    return (a + b) % n


# measurement order and the register index of each slot after earlier removals
_MEASUREMENT_PLAN = (
    ("l", A2, 3),  # A2 measured first, register still full
    ("n", B1, 1),  # after A2 is removed B1 still sits at axis 1
    ("m", C1, 1),  # register is now (A1, C1, B2, C2)
    ("k", C2, 2),  # register is now (A1, B2, C2)
)


def _measurement_bases(alice: PhaseVector, bob: PhaseVector, n: int):
    four = fourier_basis(n)
    return {"l": sender_basis(alice), "n": sender_basis(bob), "m": four, "k": four}


def _project_sequence(
    state: StateVector,
    bases: dict[str, MeasurementBasis],
    outcome: OutcomeTuple,
) -> tuple[float, StateVector]:
    """Force the four outcomes in protocol order; returns (joint prob, remainder)."""
    joint = 1.0
    indices = {"l": outcome.l, "n": outcome.n, "m": outcome.m, "k": outcome.k}
    for slot, _, axis in _MEASUREMENT_PLAN:
        prob, state = project(state, bases[slot].vectors[indices[slot]], axis)
        if state is None:
            raise RuntimeError(
                f"outcome {indices} has zero probability at slot {slot}"
            )
        joint *= prob
    return joint, state


def _sample_sequence(
    state: StateVector,
    bases: dict[str, MeasurementBasis],
    rng: np.random.Generator,
) -> tuple[OutcomeTuple, StateVector]:
    drawn = {}
    for slot, _, axis in _MEASUREMENT_PLAN:
        drawn[slot], state = measure(state, bases[slot], axis, rng)
    return OutcomeTuple(drawn["l"], drawn["n"], drawn["m"], drawn["k"]), state


def _split_product_pair(state: StateVector) -> tuple[StateVector, StateVector]:
    """Factor a two-qudit product state into its single-qudit parts.

    The joint amplitudes form a rank-one matrix; the factors are read off
    from the dominant column and row (global phase lands arbitrarily).
    """
    d0, d1 = state.dims
    m = state.amplitudes.reshape(d0, d1)
    col = int(np.argmax(np.linalg.norm(m, axis=0)))
    row = int(np.argmax(np.linalg.norm(m, axis=1)))
    a = m[:, col]
    b = m[row, :]
    return (
        StateVector((d0,), a / np.linalg.norm(a)),
        StateVector((d1,), b / np.linalg.norm(b)),
    )


def apply_corrections(
    state: StateVector,
    a1_index: int,
    b2_index: int,
    n: int,
    targets: tuple[int, int] = (0, 1),
) -> StateVector:
    """Apply U_{a1_index} and U_{b2_index} on the two listed qudits."""
    from .core import apply_on

    state = apply_on(correction_unitary(a1_index, n), state, targets[0])
    return apply_on(correction_unitary(b2_index, n), state, targets[1])


def run_protocol(
    alice: PhaseVector,
    bob: PhaseVector,
    n: int,
    outcome: Optional[OutcomeTuple] = None,
    rng: np.random.Generator | int | None = None,
) -> ProtocolResult:
    """One noiseless protocol run with a forced or Born-sampled outcome tuple.

    Alice's target appears on B2, Bob's on A1; both recovered flags must come
    back true in the noiseless channel.
    """
    if alice.dim != n or bob.dim != n:
        raise ValueError(
            f"phase vectors have dims {alice.dim}/{bob.dim}, protocol dim is {n}"
        )
    bases = _measurement_bases(alice, bob, n)
    state = channel_state(n)
    if outcome is not None:
        outcome.validate(n)
        probability, remainder = _project_sequence(state, bases, outcome)
    else:
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        outcome, remainder = _sample_sequence(state, bases, rng)
        probability = 1.0 / n**4
    rule = CorrectionRule(
        a1_index=mod_add(outcome.m, outcome.n, n),
        b2_index=mod_add(outcome.k, outcome.l, n),
    )
    a1_before, b2_before = _split_product_pair(remainder)
    corrected = apply_corrections(remainder, rule.a1_index, rule.b2_index, n)
    alice_final, bob_final = _split_product_pair(corrected)
    recovered = (
        states_equal(alice_final, equatorial_state(bob)),
        states_equal(bob_final, equatorial_state(alice)),
    )
    return ProtocolResult(
        outcome=outcome,
        probability=probability,
        corrections=rule,
        a1_before=a1_before,
        b2_before=b2_before,
        alice_final=alice_final,
        bob_final=bob_final,
        recovered=recovered,
    )


def outcome_probability(n: int, outcome: OutcomeTuple) -> float:
    """Joint Born probability of the four measurements in the noiseless run.

    Phases cancel in the probabilities, so any phase choice gives the same
    value; the zero vector is used.
    """
    outcome.validate(n)
    zero = PhaseVector.zero(n)
    prob, _ = _project_sequence(
        channel_state(n), _measurement_bases(zero, zero, n), outcome
    )
    return prob


def all_outcomes(n: int) -> Iterable[OutcomeTuple]:
    for l in range(n):
        for nn in range(n):
            for m in range(n):
                for k in range(n):
                    yield OutcomeTuple(l, nn, m, k)


def build_correction_table(n: int) -> dict[OutcomeTuple, CorrectionRule]:
    """All N^4 outcome rows mapped to their feed-forward rule.

    A1 is corrected by U_{m (+) n} (controller's C1 with Bob's B1) and B2 by
    U_{k (+) l} (controller's C2 with Alice's A2).
    """
    if n < 2:
        raise ValueError(f"dimension must be at least 2, got {n}")
    return {
        oc: CorrectionRule(mod_add(oc.m, oc.n, n), mod_add(oc.k, oc.l, n))
        for oc in all_outcomes(n)
    }


@dataclass(frozen=True)
class DecompositionCheck:
    ok: bool
    max_deviation: float

    def __bool__(self) -> bool:
        return self.ok


def verify_decomposition(
    alice: PhaseVector, bob: PhaseVector, n: int, atol: float = ATOL
) -> DecompositionCheck:
    """Rebuild the channel from the four-basis expansion and compare entrywise.

    Sums (1/N^2) tau-bar_k (x) tau_l (x) tau-bar_m (x) tau~_n (x)
    z~_{m+n} (x) z_{k+l} over all N^4 tuples, arranged in the global
    (A1, B1, C1, A2, B2, C2) order, against GHZ (x) GHZ.
    """
    if n > 4:
        raise ValueError("reconstruction cost grows as N^4 terms; use N <= 4")
    send_a = sender_basis(alice)
    send_b = sender_basis(bob)
    four = fourier_basis(n)
    acc = np.zeros(n**6, dtype=complex)
    for oc in all_outcomes(n):
        parts = (
            collapsed_state(bob, mod_add(oc.m, oc.n, n)).amplitudes,    # A1
            send_b.vectors[oc.n].amplitudes,                            # B1
            four.vectors[oc.m].amplitudes,                              # C1
            send_a.vectors[oc.l].amplitudes,                            # A2
            collapsed_state(alice, mod_add(oc.k, oc.l, n)).amplitudes,  # B2
            four.vectors[oc.k].amplitudes,                              # C2
        )
        term = parts[0]
        for p in parts[1:]:
            term = np.kron(term, p)
        acc += term
    acc /= n**2
    dev = float(np.max(np.abs(acc - channel_state(n).amplitudes)))
    return DecompositionCheck(dev <= atol, dev)
