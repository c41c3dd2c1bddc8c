"""Dense linear algebra for systems of several qudits.

States are plain complex vectors tagged with the list of subsystem
dimensions; mixed states are kept exact as weighted lists of pure states
instead of dense density matrices, which stays cheap even for six qudits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# structural checks (orthonormality, unitarity, overlap) use ATOL;
# weight and trace bookkeeping is tighter
ATOL = 1e-10
WEIGHT_ATOL = 1e-12

# branches whose squared norm falls below this are dropped entirely
_PRUNE_EPS = 1e-30


def _as_complex_vector(values) -> np.ndarray:
    arr = np.ascontiguousarray(values, dtype=complex)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d amplitude vector, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class StateVector:
    """Pure state of one or more qudits with explicit subsystem dims."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if any(d < 1 for d in dims):
            raise ValueError(f"invalid dims {dims}")
        object.__setattr__(self, "dims", dims)
        amps = _as_complex_vector(self.amplitudes)
        if len(amps) != int(np.prod(dims)):
            raise ValueError(
                f"amplitude length {len(amps)} does not match dims {dims}"
            )
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized:
            norm = np.linalg.norm(amps)
            if abs(norm - 1.0) > ATOL:
                raise ValueError(f"state is not normalized (|psi| = {norm!r})")

    @property
    def num_subsystems(self) -> int:
        return len(self.dims)

    def tensor_view(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem (read-only)."""
        return self.amplitudes.reshape(self.dims)

    def overlap(self, other: "StateVector") -> complex:
        if self.dims != other.dims:
            raise ValueError(f"dimension mismatch: {self.dims} vs {other.dims}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def basis_state(dim: int, index: int) -> StateVector:
    """Computational basis state |index> of a single qudit."""
    if not 0 <= index < dim:
        raise ValueError(f"basis index {index} out of range for dim {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[index] = 1.0
    return StateVector((dim,), amps)


def states_equal(a: StateVector, b: StateVector, atol: float = ATOL) -> bool:
    """Equality up to a global phase: | <a|b> | = 1 within atol."""
    if a.dims != b.dims:
        return False
    return abs(abs(a.overlap(b)) - 1.0) <= atol


@dataclass(frozen=True)
class Operator:
    """Complex matrix acting on one or more qudits."""

    entries: np.ndarray
    unitary: bool = False

    def __post_init__(self):
        mat = np.ascontiguousarray(self.entries, dtype=complex)
        if mat.ndim != 2:
            raise ValueError(f"operator must be a matrix, got shape {mat.shape}")
        mat.flags.writeable = False
        object.__setattr__(self, "entries", mat)
        if self.unitary:
            dev = unitarity_deviation(mat)
            if dev > ATOL:
                raise ValueError(f"matrix is not unitary (deviation {dev:.3e})")

    @property
    def dim_out(self) -> int:
        return self.entries.shape[0]

    @property
    def dim_in(self) -> int:
        return self.entries.shape[1]

    def dagger(self) -> "Operator":
        return Operator(self.entries.conj().T, unitary=self.unitary)


def unitarity_deviation(mat: np.ndarray) -> float:
    """max |U+ U - I| over entries."""
    mat = np.asarray(mat)
    return float(np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[1]))))


@dataclass(frozen=True)
class MeasurementBasis:
    """Ordered orthonormal family of single-qudit states."""

    dim: int
    vectors: tuple[StateVector, ...]

    def __post_init__(self):
        vecs = tuple(self.vectors)
        if len(vecs) != self.dim:
            raise ValueError(f"need {self.dim} vectors, got {len(vecs)}")
        for v in vecs:
            if v.dims != (self.dim,):
                raise ValueError(f"basis vector dims {v.dims} != ({self.dim},)")
        gram = self.matrix() @ self.matrix().conj().T
        dev = float(np.max(np.abs(gram - np.eye(self.dim))))
        if dev > ATOL:
            raise ValueError(f"basis is not orthonormal (deviation {dev:.3e})")
        object.__setattr__(self, "vectors", vecs)

    def matrix(self) -> np.ndarray:
        """Row k holds the coordinates of the k-th basis vector."""
        return np.array([v.amplitudes for v in self.vectors])


@dataclass(frozen=True)
class KrausSet:
    """Finite family {E_l} with sum E+ E = identity (a CPTP channel)."""

    dim: int
    operators: tuple[Operator, ...]

    def __post_init__(self):
        ops = tuple(self.operators)
        if not ops:
            raise ValueError("KrausSet needs at least one operator")
        for op in ops:
            if op.entries.shape != (self.dim, self.dim):
                raise ValueError(
                    f"Kraus operator shape {op.entries.shape} != ({self.dim}, {self.dim})"
                )
        dev = self.completeness_deviation(ops)
        if dev > ATOL:
            raise ValueError(f"Kraus set is not complete (deviation {dev:.3e})")
        object.__setattr__(self, "operators", ops)

    @staticmethod
    def completeness_deviation(ops: Sequence[Operator]) -> float:
        dim = ops[0].entries.shape[0]
        acc = np.zeros((dim, dim), dtype=complex)
        for op in ops:
            acc += op.entries.conj().T @ op.entries
        return float(np.max(np.abs(acc - np.eye(dim))))


@dataclass(frozen=True)
class BranchEnsemble:
    """Mixed state as a weighted list of pure branches (weights sum to 1)."""

    branches: tuple[tuple[float, StateVector], ...]

    def __post_init__(self):
        brs = tuple((float(w), s) for w, s in self.branches)
        if not brs:
            raise ValueError("ensemble needs at least one branch")
        if any(w < -WEIGHT_ATOL for w, _ in brs):
            raise ValueError("negative branch weight")
        total = sum(w for w, _ in brs)
        if abs(total - 1.0) > WEIGHT_ATOL:
            raise ValueError(f"branch weights sum to {total!r}, expected 1")
        dims = brs[0][1].dims
        if any(s.dims != dims for _, s in brs):
            raise ValueError("branches live on different subsystem layouts")
        object.__setattr__(self, "branches", brs)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.branches[0][1].dims

    def density_matrix(self) -> np.ndarray:
        """Dense sum_b w_b |b><b| (fine at desk scale, O(dim^2) memory)."""
        dim = len(self.branches[0][1].amplitudes)
        rho = np.zeros((dim, dim), dtype=complex)
        for w, s in self.branches:
            rho += w * np.outer(s.amplitudes, s.amplitudes.conj())
        return rho

    @staticmethod
    def pure(state: StateVector) -> "BranchEnsemble":
        return BranchEnsemble(((1.0, state),))


def ensemble_from_density(rho: np.ndarray, dims: tuple[int, ...]) -> BranchEnsemble:
    """Exact pure-branch decomposition of a density matrix via eigensystem.

    Tiny negative eigenvalues from roundoff are clipped; weights are
    renormalized so they sum to one.
    """
    vals, vecs = np.linalg.eigh(rho)
    pairs = []
    for w, v in zip(vals[::-1], vecs.T[::-1]):
        if w < 1e-14:
            continue
        pairs.append((float(w), StateVector(dims, v / np.linalg.norm(v))))
    total = sum(w for w, _ in pairs)
    if total <= 0:
        raise ValueError("density matrix has no positive weight")
    return BranchEnsemble(tuple((w / total, s) for w, s in pairs))


# ---------------------------------------------------------------------------
# operations on states


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product; subsystem dims are concatenated."""
    return StateVector(
        a.dims + b.dims,
        np.kron(a.amplitudes, b.amplitudes),
        normalized=a.normalized and b.normalized,
    )


def _move_targets_front(tensor_view: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    rest = [ax for ax in range(tensor_view.ndim) if ax not in targets]
    return np.transpose(tensor_view, list(targets) + rest)


def apply_on(op: Operator, state: StateVector, targets: int | Sequence[int]) -> StateVector:
    """Apply `op` to the listed subsystems, identity on the rest."""
    if isinstance(targets, (int, np.integer)):
        targets = (int(targets),)
    targets = tuple(int(t) for t in targets)
    dims = state.dims
    if any(not 0 <= t < len(dims) for t in targets) or len(set(targets)) != len(targets):
        raise ValueError(f"bad target subsystems {targets} for dims {dims}")
    d_t = int(np.prod([dims[t] for t in targets]))
    if op.dim_in != d_t or op.dim_out != d_t:
        raise ValueError(
            f"operator is {op.dim_out}x{op.dim_in} but targets span dimension {d_t}"
        )
    t = _move_targets_front(state.tensor_view(), targets)
    t = op.entries @ t.reshape(d_t, -1)
    t = t.reshape([dims[i] for i in targets] + [dims[i] for i in range(len(dims)) if i not in targets])
    # undo the permutation
    perm = list(targets) + [i for i in range(len(dims)) if i not in targets]
    inv = np.argsort(perm)
    out = np.transpose(t, inv).reshape(-1)
    return StateVector(dims, out, normalized=state.normalized and op.unitary)


def project(
    state: StateVector, basis_vec: StateVector, target: int
) -> tuple[float, Optional[StateVector]]:
    """Project one subsystem onto `basis_vec` and remove it.

    Returns (probability, renormalized remainder). The remainder is None
    when the probability vanishes.
    """
    dims = state.dims
    if not 0 <= target < len(dims):
        raise ValueError(f"target {target} out of range for dims {dims}")
    if basis_vec.dims != (dims[target],):
        raise ValueError(
            f"basis vector dims {basis_vec.dims} do not match subsystem dim {dims[target]}"
        )
    remainder = np.tensordot(
        basis_vec.amplitudes.conj(), state.tensor_view(), axes=([0], [target])
    ).reshape(-1)
    prob = float(np.real(np.vdot(remainder, remainder)))
    if prob <= _PRUNE_EPS:
        return 0.0, None
    rest_dims = dims[:target] + dims[target + 1 :]
    post = StateVector(rest_dims, remainder / np.sqrt(prob), normalized=state.normalized)
    return prob, post


def projection_probabilities(
    state: StateVector, basis: MeasurementBasis, target: int
) -> np.ndarray:
    """Born probabilities of all outcomes of measuring `target` in `basis`."""
    dims = state.dims
    if basis.dim != dims[target]:
        raise ValueError(f"basis dim {basis.dim} != subsystem dim {dims[target]}")
    # contract the conjugated basis matrix along the target axis in one go
    amp = np.tensordot(basis.matrix().conj(), state.tensor_view(), axes=([1], [target]))
    return np.real(np.sum(np.abs(amp) ** 2, axis=tuple(range(1, amp.ndim))))


def measure(
    state: StateVector,
    basis: MeasurementBasis,
    target: int,
    rng: np.random.Generator | int | None = None,
) -> tuple[int, StateVector]:
    """Sample one projective outcome; deterministic for a fixed seed."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    probs = projection_probabilities(state, basis, target)
    probs = np.clip(probs, 0.0, None)
    probs = probs / probs.sum()
    outcome = int(rng.choice(len(probs), p=probs))
    _, post = project(state, basis.vectors[outcome], target)
    assert post is not None  # sampled outcomes have positive probability
    return outcome, post


def apply_kraus(ens: BranchEnsemble, kraus: KrausSet, target: int) -> BranchEnsemble:
    """Push an ensemble through a channel acting on one subsystem.

    Every branch splits into one branch per Kraus operator, weighted by the
    squared norm of the (unnormalized) image; zero-weight branches are
    pruned. Total weight is preserved by channel completeness.
    """
    out: list[tuple[float, StateVector]] = []
    for weight, state in ens.branches:
        if state.dims[target] != kraus.dim:
            raise ValueError(
                f"channel dim {kraus.dim} != subsystem dim {state.dims[target]}"
            )
        for op in kraus.operators:
            image = apply_on(op, _unnormalized(state), target)
            norm_sq = float(np.real(np.vdot(image.amplitudes, image.amplitudes)))
            w = weight * norm_sq
            if w <= _PRUNE_EPS:
                continue
            out.append(
                (w, StateVector(state.dims, image.amplitudes / np.sqrt(norm_sq)))
            )
    # completeness of the set guarantees the weights still sum to one
    return BranchEnsemble(tuple(out))


def _unnormalized(state: StateVector) -> StateVector:
    return StateVector(state.dims, state.amplitudes, normalized=False)


def fidelity(target: StateVector, ens: BranchEnsemble | StateVector) -> float:
    """sqrt(<target| rho |target>) between a pure target and a mixture."""
    if isinstance(ens, StateVector):
        ens = BranchEnsemble.pure(ens)
    if ens.dims != target.dims:
        raise ValueError(f"dimension mismatch: {target.dims} vs {ens.dims}")
    acc = 0.0
    for w, s in ens.branches:
        acc += w * abs(target.overlap(s)) ** 2
    return float(np.sqrt(acc))


def fidelity_density(target: StateVector, rho: np.ndarray) -> float:
    """Same quantity computed straight from a density matrix."""
    v = target.amplitudes
    return float(np.sqrt(max(np.real(np.vdot(v, rho @ v)), 0.0)))


def reduced_density(state: StateVector, keep: int | Sequence[int]) -> np.ndarray:
    """Partial trace down to the listed subsystems."""
    if isinstance(keep, (int, np.integer)):
        keep = (int(keep),)
    keep = tuple(int(k) for k in keep)
    t = _move_targets_front(state.tensor_view(), keep)
    d_keep = int(np.prod([state.dims[k] for k in keep]))
    m = t.reshape(d_keep, -1)
    return m @ m.conj().T
