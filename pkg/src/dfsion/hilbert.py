"""States on (physical qubits) x (one truncated vibrational mode).

Basis index = fock + fock_dim * int(bits, 2), with qubit 0 the most
significant bit.  ``|0> == |up>`` and ``Z|0> = +|0>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pauli import DfsSubspace, dfs2_product, dfs4

DEFAULT_FOCK_DIM = 10


class LeakageError(RuntimeError):
    """Projection onto a subspace left (numerically) nothing."""


@dataclass(frozen=True)
class SpaceDescriptor:
    n_qubits: int
    fock_dim: int = DEFAULT_FOCK_DIM

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("need at least one qubit")
        if self.fock_dim < 1:
            raise ValueError("fock_dim must be >= 1")

    @property
    def qubit_dim(self) -> int:
        return 2 ** self.n_qubits

    @property
    def dim(self) -> int:
        return self.qubit_dim * self.fock_dim

    def check_label(self, bits: str) -> None:
        if len(bits) != self.n_qubits or set(bits) - {"0", "1"}:
            raise ValueError(f"label {bits!r} invalid for {self.n_qubits} qubits")

    def index(self, bits: str, fock: int = 0) -> int:
        self.check_label(bits)
        if not 0 <= fock < self.fock_dim:
            raise ValueError(f"Fock level {fock} outside truncation {self.fock_dim}")
        return fock + self.fock_dim * int(bits, 2)

    def labels(self) -> list[str]:
        return [format(k, f"0{self.n_qubits}b") for k in range(self.qubit_dim)]


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    space: SpaceDescriptor

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.space.dim,):
            raise ValueError(f"amplitude shape {amp.shape} does not match dimension {self.space.dim}")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / self.norm, self.space)

    def qubit_amplitudes(self) -> np.ndarray:
        """Amplitudes reshaped to ``(2**n, fock_dim)``."""
        return self.amplitudes.reshape(self.space.qubit_dim, self.space.fock_dim)

    def with_fock_dim(self, fock_dim: int) -> "StateVector":
        """Same state embedded in (or truncated to) another Fock cutoff."""
        q = self.qubit_amplitudes()
        out = np.zeros((self.space.qubit_dim, fock_dim), dtype=complex)
        m = min(fock_dim, self.space.fock_dim)
        out[:, :m] = q[:, :m]
        return StateVector(out.ravel(), SpaceDescriptor(self.space.n_qubits, fock_dim))


def basis_state(space: SpaceDescriptor, qubit_labels: str, fock_n: int = 0) -> StateVector:
    amp = np.zeros(space.dim, dtype=complex)
    amp[space.index(qubit_labels, fock_n)] = 1.0
    return StateVector(amp, space)


def superposition(space: SpaceDescriptor, amplitudes: Mapping[str, complex],
                  fock_n: int = 0) -> StateVector:
    """Normalized ``sum_k c_k |label_k> |fock_n>``."""
    amp = np.zeros(space.dim, dtype=complex)
    for lab, c in amplitudes.items():
        amp[space.index(lab, fock_n)] += c
    nrm = np.linalg.norm(amp)
    if nrm == 0:
        raise ValueError("all amplitudes are zero")
    return StateVector(amp / nrm, space)


def product_with_fock(space: SpaceDescriptor, qubit_amps: np.ndarray,
                      fock_amps: np.ndarray) -> StateVector:
    v = np.kron(np.asarray(qubit_amps, dtype=complex), np.asarray(fock_amps, dtype=complex))
    return StateVector(v / np.linalg.norm(v), space)


def thermal_probabilities(nbar: float, fock_dim: int) -> np.ndarray:
    """Truncated Bose-Einstein weights, renormalized over ``fock_dim`` levels."""
    if nbar < 0:
        raise ValueError("nbar must be >= 0")
    if nbar == 0:
        p = np.zeros(fock_dim)
        p[0] = 1.0
        return p
    n = np.arange(fock_dim)
    p = (nbar / (1 + nbar)) ** n
    return p / p.sum()


def sample_fock(nbar: float, fock_dim: int, rng: np.random.Generator) -> int:
    return int(rng.choice(fock_dim, p=thermal_probabilities(nbar, fock_dim)))


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.space != b.space:
        raise ValueError(f"space mismatch: {a.space} vs {b.space}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def qubit_probabilities(state: StateVector | np.ndarray, space: SpaceDescriptor | None = None) -> np.ndarray:
    """Probability of each computational label, summed over Fock levels."""
    if isinstance(state, StateVector):
        q = state.qubit_amplitudes()
    else:
        q = np.asarray(state).reshape(space.qubit_dim, space.fock_dim)
    return np.sum(np.abs(q) ** 2, axis=1)


def populations(state: StateVector, labels: Iterable[str]) -> dict[str, float]:
    probs = qubit_probabilities(state)
    out = {}
    for lab in labels:
        state.space.check_label(lab)
        out[lab] = float(probs[int(lab, 2)])
    return out


@dataclass(frozen=True)
class SubspaceProjector:
    """Projector onto computational labels of the qubit factor, identity on the mode."""

    labels: tuple[str, ...]
    space: SpaceDescriptor
    name: str = ""

    def __post_init__(self):
        for lab in self.labels:
            self.space.check_label(lab)

    @classmethod
    def from_subspace(cls, sub: DfsSubspace, space: SpaceDescriptor) -> "SubspaceProjector":
        if sub.n_qubits != space.n_qubits:
            raise ValueError("subspace register does not match the space")
        return cls(tuple(sub.labels), space, sub.name)

    def qubit_mask(self) -> np.ndarray:
        mask = np.zeros(self.space.qubit_dim, dtype=bool)
        for lab in self.labels:
            mask[int(lab, 2)] = True
        return mask

    def mask(self) -> np.ndarray:
        return np.repeat(self.qubit_mask(), self.space.fock_dim)

    def matrix(self) -> np.ndarray:
        return np.diag(self.mask().astype(complex))

    def weight(self, amplitudes: np.ndarray) -> np.ndarray | float:
        """Squared norm inside the subspace; works on a vector or a (k, dim) block."""
        a = np.asarray(amplitudes)
        return np.sum(np.abs(a[..., self.mask()]) ** 2, axis=-1)


def project(state: StateVector, proj: SubspaceProjector) -> tuple[StateVector, float]:
    if proj.space != state.space:
        raise ValueError("projector and state live in different spaces")
    amp = np.where(proj.mask(), state.amplitudes, 0)
    w = float(np.sum(np.abs(amp) ** 2))
    if w < 1e-14:
        raise LeakageError(f"state has weight {w:.3e} in {proj.name or 'subspace'}")
    return StateVector(amp / np.sqrt(w), state.space), w


def dfs4_projector(space: SpaceDescriptor, pair_i: int = 0, pair_j: int = 1) -> SubspaceProjector:
    return SubspaceProjector.from_subspace(dfs4(pair_i, pair_j, space.n_qubits), space)


def dfs2_product_projector(space: SpaceDescriptor) -> SubspaceProjector:
    if space.n_qubits % 2:
        raise ValueError("product DFS needs an even number of qubits")
    return SubspaceProjector.from_subspace(dfs2_product(space.n_qubits // 2), space)


def excitation_sector(space: SpaceDescriptor, excitations: int) -> SubspaceProjector:
    """All labels with a fixed number of ``1`` s."""
    labs = tuple(lab for lab in space.labels() if lab.count("1") == excitations)
    return SubspaceProjector(labs, space, f"N={excitations}")
