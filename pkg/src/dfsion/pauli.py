"""Pauli-string algebra on a register of physical qubits.

Qubits are laid out pair by pair, ``(i1, i2, j1, j2, ...)``; pair ``p``
occupies qubits ``2p`` and ``2p + 1``.  Letters are ``0: I, 1: X, 2: Y,
3: Z`` and the basis convention is ``Z|0> = +|0>``, so that
``sigma_plus = |0><1| = (X + iY)/2``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

ZERO_CUTOFF = 1e-15

_LETTERS = "IXYZ"

PAULI_MATRICES = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

# _PRODUCT[p][q] = (phase, r) with sigma_p sigma_q = phase * sigma_r
_PRODUCT = [[(1 + 0j, 0)] * 4 for _ in range(4)]
for _p in range(4):
    _PRODUCT[0][_p] = (1 + 0j, _p)
    _PRODUCT[_p][0] = (1 + 0j, _p)
    _PRODUCT[_p][_p] = (1 + 0j, 0)
for _p, _q, _r in ((1, 2, 3), (2, 3, 1), (3, 1, 2)):
    _PRODUCT[_p][_q] = (1j, _r)
    _PRODUCT[_q][_p] = (-1j, _r)


class RegisterMismatch(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PauliString:
    letters: tuple[int, ...]

    def __post_init__(self):
        if any(p not in (0, 1, 2, 3) for p in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters}")

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls((0,) * n_qubits)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse ``"XIZ"`` or ``"103"``."""
        letters = []
        for ch in label:
            if ch in _LETTERS:
                letters.append(_LETTERS.index(ch))
            elif ch in "0123":
                letters.append(int(ch))
            else:
                raise ValueError(f"bad Pauli label {label!r}")
        return cls(tuple(letters))

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: int) -> "PauliString":
        letters = [0] * n_qubits
        letters[qubit] = letter
        return cls(tuple(letters))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def weight(self) -> int:
        return sum(1 for p in self.letters if p)

    def label(self) -> str:
        return "".join(_LETTERS[p] for p in self.letters)

    def to_matrix(self) -> np.ndarray:
        m = np.ones((1, 1), dtype=complex)
        for p in self.letters:
            m = np.kron(m, PAULI_MATRICES[p])
        return m

    def __str__(self) -> str:
        return self.label()


def pauli_product(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, c)`` with ``a @ b == phase * c`` and phase in {±1, ±i}."""
    if a.n_qubits != b.n_qubits:
        raise RegisterMismatch(f"{a.n_qubits} vs {b.n_qubits} qubits")
    phase = 1 + 0j
    out = []
    for p, q in zip(a.letters, b.letters):
        ph, r = _PRODUCT[p][q]
        phase *= ph
        out.append(r)
    return phase, PauliString(tuple(out))


@dataclass(frozen=True)
class PauliOperator:
    """Complex-weighted sum of Pauli strings on a fixed register."""

    n_qubits: int
    terms: Mapping[PauliString, complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for s, c in self.terms.items():
            if s.n_qubits != self.n_qubits:
                raise RegisterMismatch(f"term {s} on {s.n_qubits} qubits, register has {self.n_qubits}")
            c = complex(c)
            if abs(c) >= ZERO_CUTOFF:
                clean[s] = c
        object.__setattr__(self, "terms", clean)

    @classmethod
    def zero(cls, n_qubits: int) -> "PauliOperator":
        return cls(n_qubits, {})

    @classmethod
    def identity(cls, n_qubits: int, coeff: complex = 1.0) -> "PauliOperator":
        return cls(n_qubits, {PauliString.identity(n_qubits): coeff})

    @classmethod
    def from_string(cls, s: PauliString | str, coeff: complex = 1.0) -> "PauliOperator":
        if isinstance(s, str):
            s = PauliString.from_label(s)
        return cls(s.n_qubits, {s: coeff})

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: int, coeff: complex = 1.0) -> "PauliOperator":
        return cls(n_qubits, {PauliString.single(n_qubits, qubit, letter): coeff})

    def _check(self, other: "PauliOperator"):
        if other.n_qubits != self.n_qubits:
            raise RegisterMismatch(f"{self.n_qubits} vs {other.n_qubits} qubits")

    def __add__(self, other):
        if not isinstance(other, PauliOperator):
            return NotImplemented
        self._check(other)
        out = dict(self.terms)
        for s, c in other.terms.items():
            out[s] = out.get(s, 0) + c
        return PauliOperator(self.n_qubits, out)

    def __neg__(self):
        return PauliOperator(self.n_qubits, {s: -c for s, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, PauliOperator):
            return self @ other
        if isinstance(other, (int, float, complex, np.number)):
            return PauliOperator(self.n_qubits, {s: c * other for s, c in self.terms.items()})
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, x):
        return self * (1 / x)

    def __matmul__(self, other):
        if not isinstance(other, PauliOperator):
            return NotImplemented
        self._check(other)
        out: dict[PauliString, complex] = {}
        for sa, ca in self.terms.items():
            for sb, cb in other.terms.items():
                ph, sc = pauli_product(sa, sb)
                out[sc] = out.get(sc, 0) + ph * ca * cb
        return PauliOperator(self.n_qubits, out)

    def adjoint(self) -> "PauliOperator":
        return PauliOperator(self.n_qubits, {s: np.conj(c) for s, c in self.terms.items()})

    def is_zero(self) -> bool:
        return not self.terms

    def max_weight(self) -> int:
        return max((s.weight for s in self.terms), default=0)

    def to_matrix(self) -> np.ndarray:
        dim = 2 ** self.n_qubits
        m = np.zeros((dim, dim), dtype=complex)
        for s, c in self.terms.items():
            m += c * s.to_matrix()
        return m

    def allclose(self, other: "PauliOperator", atol: float = 1e-12) -> bool:
        diff = self - other
        return all(abs(c) <= atol for c in diff.terms.values())

    def __repr__(self) -> str:
        if not self.terms:
            return f"PauliOperator(0, n={self.n_qubits})"
        parts = [f"({c.real:+.6g}{c.imag:+.6g}j)*{s}" for s, c in sorted(self.terms.items())]
        return " + ".join(parts)


def commutator(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    return a @ b - b @ a


def sigma_plus(n_qubits: int, qubit: int) -> PauliOperator:
    """``|0><1|`` on one qubit; raises the Z eigenvalue from -1 to +1."""
    return 0.5 * PauliOperator.single(n_qubits, qubit, 1) + 0.5j * PauliOperator.single(n_qubits, qubit, 2)


def sigma_minus(n_qubits: int, qubit: int) -> PauliOperator:
    return sigma_plus(n_qubits, qubit).adjoint()


def exchange(n_qubits: int, a: int, b: int, phase: float = 0.0) -> PauliOperator:
    """``sigma+_a sigma-_b e^{i phase} + h.c.``"""
    t = sigma_plus(n_qubits, a) @ sigma_minus(n_qubits, b) * np.exp(1j * phase)
    return t + t.adjoint()


# -- logical operators ------------------------------------------------------


@dataclass(frozen=True)
class LogicalQubitParams:
    alpha: float = 0.5
    beta: float = 0.5
    gamma: float = 0.5
    epsilon: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "epsilon"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    @classmethod
    def random(cls, rng: np.random.Generator) -> "LogicalQubitParams":
        return cls(*rng.uniform(0.0, 1.0, size=4))


@dataclass(frozen=True)
class NullCoeffs:
    rho: complex = 0
    theta: complex = 0
    vartheta: complex = 0
    zeta: complex = 0
    kappa: complex = 0
    lam: complex = 0
    varsigma: complex = 0
    xi: complex = 0

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 1.0) -> "NullCoeffs":
        z = scale * (rng.normal(size=8) + 1j * rng.normal(size=8))
        return cls(*z)


def _pair_qubits(pair: int) -> tuple[int, int]:
    return 2 * pair, 2 * pair + 1


def _two(n: int, q1: int, p1: int, q2: int, p2: int) -> PauliString:
    letters = [0] * n
    letters[q1] = p1
    letters[q2] = p2
    return PauliString(tuple(letters))


def logical_sigma(pair: int, axis: int, params: LogicalQubitParams | None = None,
                  n_qubits: int | None = None) -> PauliOperator:
    """Logical identity (axis 0) or Pauli operator of one encoded pair, null part omitted."""
    if axis not in (0, 1, 2, 3):
        raise ValueError(f"axis must be 0..3, got {axis}")
    params = params or LogicalQubitParams()
    n = n_qubits if n_qubits is not None else 2 * (pair + 1)
    q1, q2 = _pair_qubits(pair)
    if q2 >= n:
        raise ValueError(f"pair {pair} does not fit in {n} qubits")
    if axis == 0:
        a = params.alpha
        terms = {_two(n, q1, 0, q2, 0): a, _two(n, q1, 3, q2, 3): -(1 - a)}
    elif axis == 1:
        b = params.beta
        terms = {_two(n, q1, 1, q2, 1): b, _two(n, q1, 2, q2, 2): 1 - b}
    elif axis == 2:
        g = params.gamma
        terms = {_two(n, q1, 2, q2, 1): g, _two(n, q1, 1, q2, 2): -(1 - g)}
    else:
        e = params.epsilon
        terms = {_two(n, q1, 3, q2, 0): e, _two(n, q1, 0, q2, 3): -(1 - e)}
    # with alpha = 1 the ZZ weight vanishes; PauliOperator drops zeros
    return PauliOperator(n, terms)


def logical_sigma_phi(pair: int, phi: float, params: LogicalQubitParams | None = None,
                      n_qubits: int | None = None) -> PauliOperator:
    """``cos(phi) sigma1_L + sin(phi) sigma2_L``."""
    return (np.cos(phi) * logical_sigma(pair, 1, params, n_qubits)
            + np.sin(phi) * logical_sigma(pair, 2, params, n_qubits))


def logical_null(pair: int, coeffs: NullCoeffs, n_qubits: int | None = None,
                 _sign_flip: str | None = None) -> PauliOperator:
    """General operator with no support on the pair's protected subspace.

    ``_sign_flip`` names one coefficient whose inner relative sign is flipped;
    it exists so the verification suite can prove it detects a wrong term.
    """
    n = n_qubits if n_qubits is not None else 2 * (pair + 1)
    q1, q2 = _pair_qubits(pair)
    # (coefficient name, first string, relative factor, second string)
    blocks = (
        ("rho", (0, 1), -1j, (3, 2)),
        ("theta", (1, 0), -1j, (2, 3)),
        ("vartheta", (1, 3), -1j, (2, 0)),
        ("zeta", (3, 1), -1j, (0, 2)),
        ("kappa", (0, 0), 1, (3, 3)),
        ("lam", (1, 1), -1, (2, 2)),
        ("varsigma", (1, 2), 1, (2, 1)),
        ("xi", (3, 0), 1, (0, 3)),
    )
    op = PauliOperator.zero(n)
    for name, s1, rel, s2 in blocks:
        c = getattr(coeffs, name)
        if c == 0:
            continue
        if _sign_flip == name:
            rel = -rel
        op = op + PauliOperator(n, {_two(n, q1, s1[0], q2, s1[1]): c,
                                    _two(n, q1, s2[0], q2, s2[1]): c * rel})
    return op


# -- protected subspaces ----------------------------------------------------


def _bits_to_index(bits: str) -> int:
    return int(bits, 2)


@dataclass(frozen=True)
class DfsSubspace:
    """Subspace of the qubit register spanned by computational basis states."""

    n_qubits: int
    labels: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        for lab in self.labels:
            if len(lab) != self.n_qubits or set(lab) - {"0", "1"}:
                raise ValueError(f"bad basis label {lab!r} for {self.n_qubits} qubits")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate basis labels")

    @property
    def dim(self) -> int:
        return len(self.labels)

    def basis_matrix(self) -> np.ndarray:
        b = np.zeros((2 ** self.n_qubits, self.dim), dtype=complex)
        for k, lab in enumerate(self.labels):
            b[_bits_to_index(lab), k] = 1.0
        return b

    def projector(self) -> np.ndarray:
        b = self.basis_matrix()
        return b @ b.conj().T

    def contains(self, other: "DfsSubspace") -> bool:
        return set(other.labels) <= set(self.labels)


def _pair_label(bits: dict[int, str], n: int) -> str:
    return "".join(bits.get(q, "0") for q in range(n))


def dfs2(pair: int, n_qubits: int | None = None, spectator: str | None = None) -> DfsSubspace:
    """Protected subspace of one pair: ``(|0_L>, |1_L>) = (|01>, |10>)``.

    For registers wider than the pair, the remaining qubits are fixed to
    ``spectator`` (defaults to all zeros).
    """
    n = n_qubits if n_qubits is not None else 2 * (pair + 1)
    q1, q2 = _pair_qubits(pair)
    rest = [q for q in range(n) if q not in (q1, q2)]
    spectator = spectator or "0" * len(rest)
    base = dict(zip(rest, spectator))
    labels = []
    for b1, b2 in (("0", "1"), ("1", "0")):
        bits = dict(base)
        bits[q1], bits[q2] = b1, b2
        labels.append(_pair_label(bits, n))
    return DfsSubspace(n, tuple(labels), name=f"DFS2[{pair}]")


def logical_label(values: Sequence[int]) -> str:
    """Physical bitstring of a logical product state, e.g. ``(1, 0) -> '1001'``."""
    return "".join("10" if v else "01" for v in values)


def dfs2_product(n_pairs: int) -> DfsSubspace:
    labels = tuple(logical_label(v) for v in itertools.product((0, 1), repeat=n_pairs))
    return DfsSubspace(2 * n_pairs, labels, name="DFS2^%d" % n_pairs)


def dfs4(pair_i: int = 0, pair_j: int = 1, n_qubits: int | None = None) -> DfsSubspace:
    """Two-pair protected sector: the product basis plus ``|0011>`` and ``|1100>``."""
    n = n_qubits if n_qubits is not None else 2 * (max(pair_i, pair_j) + 1)
    i1, i2 = _pair_qubits(pair_i)
    j1, j2 = _pair_qubits(pair_j)
    labels = []
    for vi, vj in itertools.product((0, 1), repeat=2):
        bits = {}
        bits[i1], bits[i2] = ("1", "0") if vi else ("0", "1")
        bits[j1], bits[j2] = ("1", "0") if vj else ("0", "1")
        labels.append(_pair_label(bits, n))
    for hi in ("0", "1"):
        lo = "1" if hi == "0" else "0"
        bits = {i1: hi, i2: hi, j1: lo, j2: lo}
        labels.append(_pair_label(bits, n))
    return DfsSubspace(n, tuple(labels), name=f"DFS4[{pair_i},{pair_j}]")


def restrict(a: PauliOperator | np.ndarray, sub: DfsSubspace, atol: float = 1e-12) -> np.ndarray:
    """Matrix of ``P A P`` in the subspace basis."""
    b = sub.basis_matrix()
    gram = b.conj().T @ b
    if not np.allclose(gram, np.eye(sub.dim), atol=atol):
        raise ValueError("subspace basis is not orthonormal")
    m = a.to_matrix() if isinstance(a, PauliOperator) else np.asarray(a)
    if m.shape != (b.shape[0], b.shape[0]):
        raise RegisterMismatch(f"operator shape {m.shape} vs register dim {b.shape[0]}")
    return b.conj().T @ m @ b


def leaks(a: PauliOperator, sub: DfsSubspace) -> float:
    """Largest amplitude ``A`` sends from ``sub`` to its complement."""
    b = sub.basis_matrix()
    m = a.to_matrix()
    out = m @ b - b @ (b.conj().T @ m @ b)
    return float(np.max(np.abs(out))) if out.size else 0.0


# -- verification suites ------------------------------------------------------

_LEVI = {(1, 2): 3, (2, 3): 1, (3, 1): 2}


@dataclass
class SuiteReport:
    name: str
    max_deviation: float
    tolerance: float
    checks: int
    failures: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures and self.max_deviation <= self.tolerance

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.checks} checks, max deviation {self.max_deviation:.3e} (tol {self.tolerance:g})"


def su2_deviation(params: LogicalQubitParams) -> float:
    """Largest restricted deviation from the SU(2) relations for one draw."""
    sub = dfs2(0)
    sig = [logical_sigma(0, p, params) for p in range(4)]
    dev = 0.0
    for (p, q), r in _LEVI.items():
        lhs = restrict(commutator(sig[p], sig[q]), sub)
        rhs = 2j * restrict(sig[r], sub)
        dev = max(dev, float(np.max(np.abs(lhs - rhs))))
    for p in range(4):
        dev = max(dev, float(np.max(np.abs(restrict(commutator(sig[0], sig[p]), sub)))))
    # logical operators act as the bare Paulis on (|01>, |10>)
    for p in range(4):
        dev = max(dev, float(np.max(np.abs(restrict(sig[p], sub) - PAULI_MATRICES[p]))))
        dev = max(dev, leaks(sig[p], sub))
    return dev


def check_su2(params: LogicalQubitParams | None = None, trials: int = 100, seed: int = 0,
              tolerance: float = 1e-12) -> SuiteReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = 0.0
    failures = []
    for k in range(trials):
        p = params if (params is not None and k == 0) else LogicalQubitParams.random(rng)
        d = su2_deviation(p)
        worst = max(worst, d)
        if d > tolerance:
            failures.append(f"{p}: deviation {d:.3e}")
    return SuiteReport("su2-closure", worst, tolerance, trials, failures)


def check_null(trials: int = 100, seed: int = 1, tolerance: float = 1e-14,
               sign_flip: str | None = None) -> SuiteReport:
    rng = np.random.default_rng(seed)
    sub = dfs2(0)
    worst = 0.0
    failures = []
    for _ in range(trials):
        c = NullCoeffs.random(rng)
        op = logical_null(0, c, _sign_flip=sign_flip)
        # annihilation is stronger than a vanishing restriction
        d = float(np.max(np.abs(op.to_matrix() @ sub.basis_matrix())))
        worst = max(worst, d)
        if d > tolerance:
            failures.append(f"{c}: |0_L A v| = {d:.3e}")
    return SuiteReport("null-operator", worst, tolerance, trials, failures)


def check_orthonormality(trials: int = 20, seed: int = 2, tolerance: float = 1e-12) -> SuiteReport:
    """``(1/2) Tr_DFS[sigma_p sigma_q] = delta_pq`` for random parameters."""
    rng = np.random.default_rng(seed)
    sub = dfs2(0)
    worst = 0.0
    for _ in range(trials):
        params = LogicalQubitParams.random(rng)
        r = [restrict(logical_sigma(0, p, params), sub) for p in range(4)]
        gram = np.array([[0.5 * np.trace(r[p] @ r[q]) for q in range(4)] for p in range(4)])
        worst = max(worst, float(np.max(np.abs(gram - np.eye(4)))))
    return SuiteReport("orthonormality", worst, tolerance, trials)


PARAM_GRID = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)


def _axis_params(axis: int, x: float) -> LogicalQubitParams:
    names = ("alpha", "beta", "gamma", "epsilon")
    return LogicalQubitParams(**{names[axis]: x})


def uniqueness_table() -> SuiteReport:
    """Which two-pair logical products stay two-body on the physical qubits.

    Enumerates ``sigma^a_L(i) x sigma^b_L(j)`` for ``a, b`` in 0..3 with each
    operator's own parameter on a four-point grid (256 products).  The claim
    checked: among genuine interactions (``a, b >= 1``) only ``a = b = 3`` is
    free of terms acting on more than two physical qubits, and for the
    non-symmetric choices ``epsilon in {0, 1}`` it is a single Ising term.
    """
    rows = []
    failures = []
    for a, b in itertools.product(range(4), repeat=2):
        for xi, xj in itertools.product(PARAM_GRID, repeat=2):
            op = logical_sigma(0, a, _axis_params(a, xi), 4) @ logical_sigma(1, b, _axis_params(b, xj), 4)
            rows.append((a, b, xi, xj, op.max_weight(), len(op.terms)))
    interacting = [r for r in rows if r[0] >= 1 and r[1] >= 1]
    two_body = {(r[0], r[1]) for r in interacting if r[4] <= 2}
    if two_body != {(3, 3)}:
        failures.append(f"two-body interacting products: {sorted(two_body)}")
    for a, b, xi, xj, w, nterms in interacting:
        if (a, b) == (3, 3) and xi in (0.0, 1.0) and xj in (0.0, 1.0) and nterms != 1:
            failures.append(f"sigma3 x sigma3 at eps=({xi},{xj}) has {nterms} terms")
    by_pair: dict[tuple[int, int], int] = {}
    for a, b, _, _, w, _ in rows:
        by_pair[(a, b)] = max(by_pair.get((a, b), 0), w)
    min_by_pair: dict[tuple[int, int], int] = {}
    for a, b, _, _, w, _ in rows:
        min_by_pair[(a, b)] = min(min_by_pair.get((a, b), 99), w)
    return SuiteReport("two-logical-qubit-uniqueness", 0.0, 0.0, len(rows), failures,
                       details={"products": len(rows), "min_weight": min_by_pair, "max_weight": by_pair})


def recoupling_matrices() -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the encoded re-coupling identity on four qubits (i1, i2, j1, j2)."""
    from scipy.linalg import expm

    n = 4
    i1, i2, j1 = 0, 1, 2
    g1 = exchange(n, i1, j1).to_matrix()
    g2 = exchange(n, i1, i2).to_matrix()
    g = exchange(n, i2, j1).to_matrix()
    u1 = expm(-1j * g1 * np.pi / 4)
    u2 = expm(-1j * g2 * np.pi / 2)
    lhs = u1 @ u2 @ g @ u2.conj().T @ u1.conj().T
    rhs = (0.5 * PauliOperator.single(n, i2, 3) @ (PauliOperator.single(n, j1, 3) - PauliOperator.single(n, i1, 3))).to_matrix()
    return lhs, rhs


def verify_recoupling_identity(tolerance: float = 1e-12) -> SuiteReport:
    lhs, rhs = recoupling_matrices()
    dev = float(np.max(np.abs(lhs - rhs)))
    failures = []

    rhs_op = 0.5 * PauliOperator.single(4, 1, 3) @ (PauliOperator.single(4, 2, 3) - PauliOperator.single(4, 0, 3))
    prod = dfs2_product(2)
    big = dfs4(0, 1)
    # on the product space the i2*i1 piece is a multiple of identity
    r_prod = restrict(rhs_op, prod)
    zz = restrict(logical_sigma(0, 3, LogicalQubitParams(epsilon=0.0), 4)
                  @ logical_sigma(1, 3, LogicalQubitParams(epsilon=1.0), 4), prod)
    resid = r_prod - (-0.5) * zz
    shift = np.trace(resid) / prod.dim
    gauge_dev = float(np.max(np.abs(resid - shift * np.eye(prod.dim))))
    if gauge_dev > tolerance:
        failures.append(f"product-space restriction differs from -1/2 ZL ZL by {gauge_dev:.3e}")
    # on the larger sector the same piece is not proportional to the identity
    zz_i = restrict(PauliOperator.single(4, 1, 3) @ PauliOperator.single(4, 0, 3), big)
    spread = float(np.ptp(np.real(np.diag(zz_i))))
    if spread < 1.0:
        failures.append("sigma3_i2 sigma3_i1 looks like identity on DFS4")
    return SuiteReport("recoupling-identity", max(dev, gauge_dev), tolerance, 3, failures,
                       details={"matrix_deviation": dev, "gauge_deviation": gauge_dev, "dfs4_spread": spread})
