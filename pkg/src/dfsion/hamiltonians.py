"""Interaction-picture laser-ion Hamiltonians and their effective forms.

Energies are angular frequencies (hbar = 1).  A ``DriveTarget.rabi`` is the
coupling that multiplies ``sigma_plus`` in the Hamiltonian.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .hilbert import SpaceDescriptor
from .pauli import PauliOperator, exchange, sigma_minus, sigma_plus

SIDEBANDS = ("carrier", "red", "blue")

DISPERSIVE_LIMIT = 0.2
RESOLVED_LIMIT = 0.2
LAMB_DICKE_LIMIT = 0.1

_SP = np.array([[0, 1], [0, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)


class PulseError(ValueError):
    pass


# -- operators on the composite space ---------------------------------------


def qubit_operator(space: SpaceDescriptor, ion: int, m: np.ndarray) -> sp.csr_matrix:
    if not 0 <= ion < space.n_qubits:
        raise PulseError(f"ion {ion} outside register of {space.n_qubits}")
    left = sp.identity(2 ** ion, format="csr", dtype=complex)
    right = sp.identity(2 ** (space.n_qubits - ion - 1) * space.fock_dim, format="csr", dtype=complex)
    return sp.kron(sp.kron(left, sp.csr_matrix(m)), right, format="csr")


def annihilation(d: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, shape=(d, d), format="csr", dtype=complex)


def mode_operator(space: SpaceDescriptor, kind: str) -> sp.csr_matrix:
    a = annihilation(space.fock_dim)
    f = {"a": a, "adag": a.T.tocsr(), "n": (a.T @ a).tocsr(),
         "I": sp.identity(space.fock_dim, format="csr", dtype=complex)}[kind]
    return sp.kron(sp.identity(space.qubit_dim, format="csr", dtype=complex), f, format="csr")


def embed_qubit_operator(space: SpaceDescriptor, m: np.ndarray | PauliOperator) -> sp.csr_matrix:
    """Qubit-register matrix tensored with the identity on the mode."""
    if isinstance(m, PauliOperator):
        if m.n_qubits != space.n_qubits:
            raise PulseError("operator register does not match the space")
        m = m.to_matrix()
    return sp.kron(sp.csr_matrix(m), sp.identity(space.fock_dim, format="csr", dtype=complex), format="csr")


def _build_operator(space: SpaceDescriptor, key: tuple) -> sp.csr_matrix:
    kind = key[0]
    if kind == "sp":
        _, ion, fock = key
        op = qubit_operator(space, ion, _SP)
        return op if fock == "I" else (op @ mode_operator(space, fock)).tocsr()
    if kind == "z":
        return qubit_operator(space, key[1], _Z)
    raise KeyError(key)


# -- pulses -----------------------------------------------------------------


@dataclass(frozen=True)
class DriveTarget:
    ion: int
    rabi: float
    spin_phase: float = 0.0
    mode_sign: int = 1
    leaked: bool = False

    def __post_init__(self):
        if self.mode_sign not in (1, -1):
            raise PulseError("mode_sign must be +1 or -1")


@dataclass(frozen=True)
class LaserPulse:
    """One monochromatic drive on a set of ions.

    ``delta`` is the detuning from the chosen transition; for sidebands the
    laser sits at ``omega0 - nu - delta`` (red) or ``omega0 + nu + delta``
    (blue).  ``ramp`` is the length of the sin**2 amplitude edge at each end.
    ``light_shift`` overrides the second-order estimate of the ``Z``
    coefficient removed from each addressed ion by ``stark_compensation``;
    ions reached only by stray light (``leaked``) are compensated in
    proportion to their intensity when ``compensate_leaked`` is set.
    """

    targets: tuple[DriveTarget, ...]
    delta: float
    sideband: str = "red"
    eta: float = 0.0
    nu: float = 0.0
    duration: float = 0.0
    start: float = 0.0
    ramp: float = 0.0
    stark_compensation: bool = True
    light_shift: float | None = None
    compensate_leaked: bool = True
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.sideband not in SIDEBANDS:
            raise PulseError(f"unknown sideband {self.sideband!r}")
        if self.duration < 0:
            raise PulseError("negative duration")
        if self.ramp < 0 or 2 * self.ramp > self.duration + 1e-15:
            raise PulseError("ramp must fit twice inside the pulse")

    @property
    def end(self) -> float:
        return self.start + self.duration

    @property
    def nominal_targets(self) -> tuple[DriveTarget, ...]:
        return tuple(t for t in self.targets if not t.leaked)

    @property
    def ions(self) -> tuple[int, ...]:
        return tuple(t.ion for t in self.targets)

    def shifted(self, dt: float) -> "LaserPulse":
        return replace(self, start=self.start + dt)

    def validity_flags(self, nbar: float = 0.0) -> dict[str, bool]:
        """Regime checks; ``True`` means the condition holds."""
        rabi = max((abs(t.rabi) for t in self.targets), default=0.0)
        flags = {"dispersive": self.delta != 0 and rabi / abs(self.delta) <= DISPERSIVE_LIMIT}
        if self.sideband != "carrier":
            flags["dispersive"] = self.delta != 0 and rabi * self.eta / abs(self.delta) <= DISPERSIVE_LIMIT
            flags["resolved_sideband"] = self.nu > 0 and rabi / self.nu <= RESOLVED_LIMIT
            flags["lamb_dicke"] = self.eta ** 2 * (nbar + 0.5) <= LAMB_DICKE_LIMIT
        return flags

    def check(self, nbar: float = 0.0) -> list[str]:
        bad = [k for k, ok in self.validity_flags(nbar).items() if not ok]
        for k in bad:
            warnings.warn(f"pulse {self.label or self.ions}: {k} condition violated", stacklevel=2)
        return bad


# -- time-dependent operator container ---------------------------------------


@dataclass(frozen=True)
class Channel:
    """``amplitude * exp(i omega t) * envelope(t)`` multiplying one operator.

    The envelope is 1 inside ``[t_start, t_end)`` apart from sin**2 edges of
    length ``ramp``; ``power = 2`` is used for terms quadratic in a drive.
    """

    op: int
    amplitude: complex
    omega: float
    t_start: float
    t_end: float
    ramp: float = 0.0
    power: int = 1

    def envelope(self, t: float) -> float:
        if not self.t_start <= t < self.t_end:
            return 0.0
        f = 1.0
        if self.ramp > 0:
            if t - self.t_start < self.ramp:
                f = math.sin(0.5 * math.pi * (t - self.t_start) / self.ramp) ** 2
            elif self.t_end - t < self.ramp:
                f = math.sin(0.5 * math.pi * (self.t_end - t) / self.ramp) ** 2
        return f ** self.power

    def value(self, t: float) -> complex:
        return self.amplitude * np.exp(1j * self.omega * t) * self.envelope(t)


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """``H(t) = sum_c value_c(t) M_c + h.c.`` over operators and channels.

    Operators flagged ``hermitian`` contribute ``Re(value) * M`` instead.
    """

    space: SpaceDescriptor
    keys: tuple[Hashable, ...] = ()
    operators: tuple[sp.csr_matrix, ...] = ()
    hermitian: tuple[bool, ...] = ()
    channels: tuple[Channel, ...] = ()

    @classmethod
    def empty(cls, space: SpaceDescriptor) -> "HamiltonianSpec":
        return cls(space)

    def _index(self, key) -> int | None:
        try:
            return self.keys.index(key)
        except ValueError:
            return None

    def with_operator(self, key: Hashable, op: sp.spmatrix | None, hermitian: bool,
                      channels: Iterable[tuple[complex, float, float, float, float, int]]) -> "HamiltonianSpec":
        """Add channels ``(amplitude, omega, t_start, t_end, ramp, power)`` on ``key``."""
        keys, ops, herm = list(self.keys), list(self.operators), list(self.hermitian)
        idx = self._index(key)
        if idx is None:
            if op is None:
                op = _build_operator(self.space, key)
            keys.append(key)
            ops.append(sp.csr_matrix(op, dtype=complex))
            herm.append(hermitian)
            idx = len(keys) - 1
        elif herm[idx] != hermitian:
            raise PulseError(f"operator {key} registered with conflicting hermiticity")
        chans = list(self.channels)
        for amp, omega, t0, t1, ramp, power in channels:
            if amp == 0:
                continue
            chans.append(Channel(idx, complex(amp), float(omega), float(t0), float(t1), float(ramp), int(power)))
        return HamiltonianSpec(self.space, tuple(keys), tuple(ops), tuple(herm), tuple(chans))

    def __add__(self, other: "HamiltonianSpec") -> "HamiltonianSpec":
        if other.space != self.space:
            raise PulseError("cannot add specs on different spaces")
        out = self
        for ch in other.channels:
            k = other.keys[ch.op]
            out = out.with_operator(k, other.operators[ch.op], other.hermitian[ch.op],
                                    [(ch.amplitude, ch.omega, ch.t_start, ch.t_end, ch.ramp, ch.power)])
        return out

    def shifted(self, dt: float) -> "HamiltonianSpec":
        chans = tuple(replace(c, t_start=c.t_start + dt, t_end=c.t_end + dt) for c in self.channels)
        return replace(self, channels=chans)

    def breakpoints(self) -> list[float]:
        """Times where some envelope is not smooth: pulse edges and ramp ends."""
        pts = set()
        for c in self.channels:
            pts.update((c.t_start, c.t_end))
            if c.ramp > 0:
                pts.update((c.t_start + c.ramp, c.t_end - c.ramp))
        return sorted(pts)

    def at(self, t: float) -> sp.csr_matrix:
        h = sp.csr_matrix((self.space.dim, self.space.dim), dtype=complex)
        coeff = np.zeros(len(self.operators), dtype=complex)
        for c in self.channels:
            coeff[c.op] += c.value(t)
        for k, (op, herm) in enumerate(zip(self.operators, self.hermitian)):
            z = coeff[k]
            if z == 0:
                continue
            if herm:
                h = h + z.real * op
            else:
                h = h + z * op + np.conj(z) * op.conj().T
        return h.tocsr()

    def antihermitian_residue(self, t: float) -> float:
        h = self.at(t)
        d = (h - h.conj().T)
        return float(abs(d).max()) if d.nnz else 0.0

    def is_static(self, t0: float, t1: float) -> bool:
        """No explicit time dependence on ``[t0, t1)``."""
        for c in self.channels:
            if c.t_end <= t0 or c.t_start >= t1:
                continue
            if c.omega != 0 or c.t_start > t0 or c.t_end < t1:
                return False
            if c.ramp > 0 and (t0 < c.t_start + c.ramp or t1 > c.t_end - c.ramp):
                return False
        return True


# -- builders ---------------------------------------------------------------


def _window(pulse: LaserPulse) -> tuple[float, float, float]:
    return pulse.start, pulse.end, pulse.ramp


def carrier_hamiltonian(pulse: LaserPulse, space: SpaceDescriptor) -> HamiltonianSpec:
    """Off-resonant carrier drive ``Omega sigma+ e^{i(delta t + phi)} + h.c.``."""
    if pulse.sideband != "carrier":
        raise PulseError("carrier_hamiltonian needs a carrier pulse")
    if len(pulse.nominal_targets) != 1:
        raise PulseError("multi-target carrier drives are not modeled")
    t0, t1, ramp = _window(pulse)
    spec = HamiltonianSpec.empty(space)
    for tg in pulse.targets:
        spec = spec.with_operator(("sp", tg.ion, "I"), None, False,
                                  [(tg.rabi * np.exp(1j * tg.spin_phase), pulse.delta, t0, t1, ramp, 1)])
    return spec


def stark_shift(rabi: float, delta: float) -> float:
    if delta == 0:
        raise PulseError("detuning must be nonzero")
    return abs(rabi) ** 2 / delta


def exact_stark_shift(rabi: float, delta: float) -> float:
    """Light shift of a two-level system to all orders, ``sign(delta)(sqrt(delta^2/4 + Omega^2) - |delta|/2)``."""
    if delta == 0:
        raise PulseError("detuning must be nonzero")
    return math.copysign(math.sqrt(delta ** 2 / 4 + abs(rabi) ** 2) - abs(delta) / 2, delta)


def stark_effective(rabi: float, delta: float, ion: int = 0, n_qubits: int = 1) -> PauliOperator:
    """``|Omega|^2 / delta * Z_ion``."""
    return stark_shift(rabi, delta) * PauliOperator.single(n_qubits, ion, 3)


def sideband_hamiltonian(pulse: LaserPulse, space: SpaceDescriptor) -> HamiltonianSpec:
    """First-order Lamb-Dicke sideband drive, keeping the fast carrier term.

    Red: ``Omega sigma+ (e^{i nu t} + i eta s a) e^{i(delta t + phi)} + h.c.``;
    blue mirrors it with ``a -> a^dag`` and all frequencies negated.  With
    ``stark_compensation`` the second-order carrier light shift of every
    nominal target is cancelled by a static ``-Omega^2/(nu+delta) Z`` term
    (or ``-light_shift Z``) following the squared pulse envelope.
    """
    if pulse.sideband not in ("red", "blue"):
        raise PulseError("sideband_hamiltonian needs a red or blue sideband pulse")
    if len(pulse.nominal_targets) > 2:
        raise PulseError("at most two addressed ions per sideband pulse")
    if pulse.eta < 0:
        raise PulseError("Lamb-Dicke parameter must be non-negative")
    if pulse.nu <= 0:
        raise PulseError("mode frequency must be positive")
    sgn = 1.0 if pulse.sideband == "red" else -1.0
    fock = "a" if pulse.sideband == "red" else "adag"
    w_carrier = sgn * (pulse.nu + pulse.delta)
    w_side = sgn * pulse.delta
    t0, t1, ramp = _window(pulse)
    spec = HamiltonianSpec.empty(space)
    for tg in pulse.targets:
        amp = tg.rabi * np.exp(1j * tg.spin_phase)
        spec = spec.with_operator(("sp", tg.ion, "I"), None, False, [(amp, w_carrier, t0, t1, ramp, 1)])
        if pulse.eta > 0:
            spec = spec.with_operator(("sp", tg.ion, fock), None, False,
                                      [(1j * pulse.eta * tg.mode_sign * amp, w_side, t0, t1, ramp, 1)])
        if pulse.stark_compensation and (pulse.compensate_leaked or not tg.leaked):
            spec = spec.with_operator(("z", tg.ion), None, True,
                                      [(-_compensation(pulse, tg, w_carrier), 0.0, t0, t1, ramp, 2)])
    return spec


def _compensation(pulse: LaserPulse, tg: DriveTarget, w_carrier: float) -> float:
    if pulse.light_shift is None:
        return abs(tg.rabi) ** 2 / w_carrier
    ref = max(abs(t.rabi) for t in pulse.nominal_targets)
    return pulse.light_shift * (abs(tg.rabi) / ref) ** 2 if ref > 0 else 0.0


def pulse_hamiltonian(pulse: LaserPulse, space: SpaceDescriptor) -> HamiltonianSpec:
    if pulse.sideband == "carrier":
        return carrier_hamiltonian(pulse, space)
    return sideband_hamiltonian(pulse, space)


def _check_pair(ions: Sequence[int], n_qubits: int):
    if len(ions) != 2 or ions[0] == ions[1]:
        raise PulseError("need two distinct ions")
    if max(ions) >= n_qubits:
        raise PulseError("ion index outside register")


def bichromatic_effective(rabi: float, eta: float, delta: float, phases: tuple[float, float],
                          nu: float, space: SpaceDescriptor, ions: tuple[int, int] = (0, 1),
                          mode_signs: tuple[int, int] = (1, -1), include_stark: bool = True) -> sp.csr_matrix:
    """Second-order effective operator of one red-sideband field on two ions.

    ``|Omega|^2/(nu+delta) (Z1+Z2) + |Omega eta|^2/delta [I + (Z1+Z2)(n+1/2)
    + s1 s2 (sigma+_1 sigma-_2 e^{i(phi1-phi2)} + h.c.)]``; opposite mode
    signs ``(+1, -1)`` give the minus sign in front of the exchange term.
    Without ``include_stark`` this is the single-field hot-gate operator.
    """
    if delta == 0 or nu + delta == 0:
        raise PulseError("singular detuning")
    _check_pair(ions, space.n_qubits)
    a, b = ions
    zsum = qubit_operator(space, a, _Z) + qubit_operator(space, b, _Z)
    ident = sp.identity(space.dim, format="csr", dtype=complex)
    nop = mode_operator(space, "n")
    ex = embed_qubit_operator(space, exchange(space.n_qubits, a, b, phases[0] - phases[1]))
    g = abs(rabi * eta) ** 2 / delta
    h = g * (ident + zsum @ (nop + 0.5 * ident) + mode_signs[0] * mode_signs[1] * ex)
    if include_stark:
        h = h + abs(rabi) ** 2 / (nu + delta) * zsum
    return sp.csr_matrix(h)


def exchange_coupling(rabi: float, eta: float, delta: float) -> float:
    """``C = -|Omega eta|^2 / delta`` for one field and opposite mode signs."""
    if delta == 0:
        raise PulseError("detuning must be nonzero")
    return -abs(rabi * eta) ** 2 / delta


def exchange_effective(rabi: float, eta: float, delta: float, phi: float, n_qubits: int = 2,
                       ions: tuple[int, int] = (0, 1), mode_signs: tuple[int, int] = (1, -1)) -> PauliOperator:
    """Exchange part of the single-field operator, ``C (sigma+ sigma- e^{i phi} + h.c.)``.

    On the pair's protected subspace this is ``C * sigma_L`` with azimuth
    ``-phi``: ``sigma+_1 sigma-_2 = sigma+_L`` carries ``e^{-i phi_L}``.
    """
    _check_pair(ions, n_qubits)
    g = abs(rabi * eta) ** 2 / delta if delta != 0 else None
    if g is None:
        raise PulseError("detuning must be nonzero")
    return g * mode_signs[0] * mode_signs[1] * exchange(n_qubits, ions[0], ions[1], phi)


def dual_effective(rabi: float, eta: float, delta: float, phi: float, n_qubits: int = 2,
                   ions: tuple[int, int] = (0, 1), mode_signs: tuple[int, int] = (1, -1)) -> PauliOperator:
    """Phonon-free effective operator of the two-field drive: twice the exchange term."""
    return 2.0 * exchange_effective(rabi, eta, delta, phi, n_qubits, ions, mode_signs)


def _relative_phase(p: LaserPulse) -> float:
    t = p.nominal_targets
    return t[0].spin_phase - t[1].spin_phase


def check_dual_pair(pulse_a: LaserPulse, pulse_b: LaserPulse, atol: float = 1e-9) -> None:
    """Constraints on the second field of a same-sideband bichromatic drive."""
    if pulse_a.sideband != pulse_b.sideband:
        raise PulseError("opposite-sideband pairs generate sigma+ sigma+ terms; use the same sideband")
    if pulse_a.sideband == "carrier":
        raise PulseError("bichromatic pairs drive a sideband")
    ta, tb = pulse_a.nominal_targets, pulse_b.nominal_targets
    if len(ta) != 2 or [t.ion for t in ta] != [t.ion for t in tb]:
        raise PulseError("both fields must address the same two ions")
    for x, y in zip(ta, tb):
        if not math.isclose(abs(x.rabi), abs(y.rabi), rel_tol=1e-9):
            raise PulseError("both fields need the same Rabi frequency")
        if x.mode_sign != y.mode_sign:
            raise PulseError("mode signs are properties of the ions")
    if not math.isclose(pulse_a.eta, pulse_b.eta, rel_tol=1e-12):
        raise PulseError("both fields need the same Lamb-Dicke parameter")
    if not math.isclose(pulse_b.delta, -pulse_a.delta, rel_tol=1e-12):
        raise PulseError("second field must be detuned by -delta")
    dphi = (_relative_phase(pulse_b) - _relative_phase(pulse_a) - math.pi) % (2 * math.pi)
    if min(dphi, 2 * math.pi - dphi) > atol:
        raise PulseError("second field must be exactly pi out of phase")
    if not (math.isclose(pulse_a.start, pulse_b.start, abs_tol=1e-15)
            and math.isclose(pulse_a.duration, pulse_b.duration, rel_tol=1e-12)):
        raise PulseError("both fields must be applied simultaneously")


def dual_bichromatic_spec(pulse_a: LaserPulse, pulse_b: LaserPulse, space: SpaceDescriptor) -> HamiltonianSpec:
    check_dual_pair(pulse_a, pulse_b)
    return sideband_hamiltonian(pulse_a, space) + sideband_hamiltonian(pulse_b, space)
