"""Shared fixtures; the expensive noise sweeps are computed once per run."""

import numpy as np
import pytest

from bcrsp.noise import NoiseKind, exact_fidelities
from bcrsp.protocol import PhaseVector

GAMMA_GRID = tuple(np.linspace(0.0, 1.0, 11))


def random_phase_vector(n: int, rng: np.random.Generator) -> PhaseVector:
    return PhaseVector(n, tuple(rng.uniform(0.0, 2.0 * np.pi, n - 1)))


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return z / np.linalg.norm(z)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _sweep(kind: NoiseKind) -> dict[float, tuple[float, float]]:
    zero = PhaseVector.zero(4)
    return {g: exact_fidelities(zero, zero, 4, kind, g) for g in GAMMA_GRID}


@pytest.fixture(scope="session")
def quditflip_sweep():
    """Exact (A1, B2) fidelities, zero-phase target, 11-point gamma grid."""
    return _sweep(NoiseKind.QUDIT_FLIP)


@pytest.fixture(scope="session")
def dephasing_sweep():
    return _sweep(NoiseKind.DEPHASING)


@pytest.fixture(scope="session")
def phaseflip_sweep():
    """The 10^4-branch channel; this is the long pole of the suite."""
    return _sweep(NoiseKind.QUDIT_PHASE_FLIP)
