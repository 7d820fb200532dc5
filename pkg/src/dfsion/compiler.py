"""Logical gates on pair-encoded qubits compiled into laser pulse schedules.

Each logical qubit lives on a pair of ions ``(2p, 2p+1)`` with
``|0_L> = |01>`` and ``|1_L> = |10>``.  Two-body operations are dual-field
red-sideband exchange pulses; logical z rotations are off-resonant carrier
(light-shift) pulses.
"""
from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.optimize as so
import scipy.sparse as sp

from .hamiltonians import (
    DriveTarget, HamiltonianSpec, LaserPulse, PulseError, bichromatic_effective, check_dual_pair, exact_stark_shift,
    embed_qubit_operator, pulse_hamiltonian, qubit_operator, _Z,
)
from .hilbert import SpaceDescriptor
from .pauli import exchange, logical_label
from .propagator import EvolveOptions, evolve_block

TWO_PI = 2 * math.pi
FORMAT_VERSION = 1

# Exchange angle of the middle recoupling pulse and the logical z rotations
# (control, target) that turn the recoupled phase gate into diag(1, 1, 1, -1).
# Reproduced by ``fit_recoupling``; see tests/test_compiler.py.
RECOUPLING_THETA_MID = math.pi / 2
CZ_LOCAL_Z = (math.pi / 2, math.pi / 2)


# -- hardware -----------------------------------------------------------------


@dataclass(frozen=True)
class HardwareProfile:
    """Trap and laser parameters.

    ``rabi`` and ``stark_rabi`` are Rabi frequencies; the coupling entering
    the Hamiltonian is half of that.  ``ramp_time`` is the sin**2 edge of
    every exchange pulse (0 gives square pulses).  With
    ``calibrate_light_shift`` the single-ion frequency shift of exchange
    pulses is measured numerically and removed instead of using its
    second-order estimate.
    """

    name: str = "paper"
    rabi: float = TWO_PI * 100e3
    eta: float = 0.0165
    delta: float = TWO_PI * 16.5e3
    nu: float = TWO_PI * 1.2e6
    addressing_error: float = 0.0
    ramp_time: float = 1e-4
    stark_rabi: float = TWO_PI * 20e3
    stark_detuning: float = TWO_PI * 200e3
    stark_ramp: float = 0.0
    mode_signs: tuple[int, ...] = (1, -1, 1, -1)
    fock_dim: int = 10
    calibrate_light_shift: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode_signs", tuple(int(s) for s in self.mode_signs))
        for k in ("rabi", "delta", "nu", "stark_rabi", "stark_detuning"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if not 0 <= self.addressing_error <= 0.2:
            raise ValueError("addressing_error must lie in [0, 0.2]")
        if self.ramp_time < 0 or self.stark_ramp < 0:
            raise ValueError("ramp times must be non-negative")
        if any(s not in (1, -1) for s in self.mode_signs):
            raise ValueError("mode signs must be +1 or -1")

    @property
    def coupling(self) -> float:
        return self.rabi / 2

    @property
    def stark_coupling(self) -> float:
        return self.stark_rabi / 2

    @property
    def exchange_rate(self) -> float:
        """Coefficient of the exchange generator under the dual-field drive."""
        return 2 * (self.coupling * self.eta) ** 2 / self.delta

    @property
    def stark_rate(self) -> float:
        return exact_stark_shift(self.stark_coupling, self.stark_detuning)

    def mode_sign(self, ion: int) -> int:
        if ion < len(self.mode_signs):
            return self.mode_signs[ion]
        return 1 if ion % 2 == 0 else -1

    def with_(self, **kw) -> "HardwareProfile":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mode_signs"] = list(self.mode_signs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HardwareProfile":
        return cls(**{k: (tuple(v) if k == "mode_signs" else v) for k, v in d.items()})


PROFILES = {
    "paper": HardwareProfile(),
    "paper-square": HardwareProfile(name="paper-square", ramp_time=0.0),
}


def get_profile(name: str) -> HardwareProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}") from None


def pulse_duration(profile: HardwareProfile, angle: float) -> float:
    """Square-pulse time for an exchange of ``angle`` (edges add ``5/4 ramp_time``)."""
    if profile.eta == 0 or profile.rabi == 0:
        raise PulseError("zero coupling: exchange is impossible")
    return abs(angle) / profile.exchange_rate


def _ramped(t_flat: float, ramp: float) -> float:
    # sin^2 edges keep the integral of the squared envelope
    return t_flat + 1.25 * ramp if t_flat > 0 else 0.0


# -- schedule entries ---------------------------------------------------------


@dataclass(frozen=True)
class PulseBlock:
    """Concurrent laser pulses that form one operation."""

    pulses: tuple[LaserPulse, ...]
    label: str = ""
    kind: str = "exchange"

    @property
    def start(self) -> float:
        return min(p.start for p in self.pulses)

    @property
    def end(self) -> float:
        return max(p.end for p in self.pulses)

    def shifted(self, dt: float) -> "PulseBlock":
        return replace(self, pulses=tuple(p.shifted(dt) for p in self.pulses))

    def exchange_area(self) -> float:
        """Two-body pulse area ``2 |C| t`` in radians (zero for carrier blocks)."""
        total = 0.0
        for p in self.pulses:
            t = p.nominal_targets
            if p.sideband == "carrier" or len(t) != 2:
                continue
            flat = p.duration - 1.25 * p.ramp
            total += 2 * abs(t[0].rabi * t[1].rabi) * p.eta ** 2 / abs(p.delta) * flat
        return total


@dataclass(frozen=True)
class IdealLogicalOp:
    """Exact ``exp(-i angle sigma^phi_L / 2)`` (axis 'phi') or ``exp(-i angle sigma3_L / 2)`` (axis 'z')."""

    time: float
    pair: int
    angle: float
    phi: float = 0.0
    axis: str = "phi"
    label: str = ""

    @property
    def start(self) -> float:
        return self.time

    @property
    def end(self) -> float:
        return self.time

    def shifted(self, dt: float) -> "IdealLogicalOp":
        return replace(self, time=self.time + dt)

    def logical_matrix(self) -> np.ndarray:
        return logical_rotation(self.angle, self.phi, self.axis)

    def exchange_area(self) -> float:
        return abs(self.angle) if self.axis == "phi" else 0.0


Entry = PulseBlock | IdealLogicalOp


def logical_rotation(angle: float, phi: float = 0.0, axis: str = "phi") -> np.ndarray:
    if axis == "z":
        return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])
    s = np.array([[0, np.exp(-1j * phi)], [np.exp(1j * phi), 0]])
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * s


def embed_logical(u: np.ndarray, pair: int, space: SpaceDescriptor) -> np.ndarray:
    """Dense operator acting as ``u`` on the pair's ``{|01>, |10>}`` block, identity elsewhere."""
    n = space.n_qubits
    a, b = 2 * pair, 2 * pair + 1
    if b >= n:
        raise PulseError(f"pair {pair} outside register of {n}")
    q = np.eye(2 ** n, dtype=complex)
    for idx in range(2 ** n):
        bits = format(idx, f"0{n}b")
        if bits[a] == bits[b]:
            continue
        src = 0 if bits[a:b + 1] == "01" else 1
        q[idx, idx] = 0
        for dst, pat in enumerate(("01", "10")):
            j = int(bits[:a] + pat + bits[b + 1:], 2)
            q[j, idx] = u[dst, src]
    return np.kron(q, np.eye(space.fock_dim))


# -- schedules ----------------------------------------------------------------


@dataclass(frozen=True)
class PulseSchedule:
    entries: tuple[Entry, ...]
    profile: HardwareProfile
    n_qubits: int
    logical_action: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        self.validate()

    @classmethod
    def empty(cls, profile: HardwareProfile, n_qubits: int = 4, name: str = "empty") -> "PulseSchedule":
        act = np.eye(2 ** (n_qubits // 2)) if n_qubits % 2 == 0 else None
        return cls((), profile, n_qubits, act, name)

    @property
    def duration(self) -> float:
        return max((e.end for e in self.entries), default=0.0)

    @property
    def pairs(self) -> int:
        return self.n_qubits // 2

    def validate(self) -> None:
        for e in self.entries:
            if isinstance(e, PulseBlock):
                for p in e.pulses:
                    if max(p.ions) >= self.n_qubits:
                        raise PulseError(f"pulse {p.label} addresses ion outside register")
        blocks = sorted((e for e in self.entries if isinstance(e, PulseBlock)), key=lambda b: b.start)
        for a, b in zip(blocks[:-1], blocks[1:]):
            if b.start < a.end - 1e-12:
                raise PulseError(f"blocks {a.label!r} and {b.label!r} overlap; merge concurrent pulses into one block")

    def then(self, other: "PulseSchedule") -> "PulseSchedule":
        """``other`` applied after ``self``."""
        if other.n_qubits != self.n_qubits:
            raise PulseError("register sizes differ")
        dt = self.duration
        act = None
        if self.logical_action is not None and other.logical_action is not None:
            act = other.logical_action @ self.logical_action
        return PulseSchedule(self.entries + tuple(e.shifted(dt) for e in other.entries),
                             self.profile, self.n_qubits, act, f"{self.name}+{other.name}".strip("+"))

    def map_blocks(self, fn) -> "PulseSchedule":
        entries = tuple(fn(e) if isinstance(e, PulseBlock) else e for e in self.entries)
        return replace(self, entries=entries)

    def blocks(self) -> list[PulseBlock]:
        return [e for e in self.entries if isinstance(e, PulseBlock)]

    def pulses(self) -> list[LaserPulse]:
        return [p for b in self.blocks() for p in b.pulses]

    # areas in units of pi
    def two_body_area(self) -> float:
        return sum(e.exchange_area() for e in self.entries) / math.pi

    def recoupling_area(self) -> float:
        return sum(b.exchange_area() for b in self.blocks() if b.kind == "exchange") / math.pi

    def validity_warnings(self, nbar: float = 0.0) -> list[str]:
        out = []
        for p in self.pulses():
            out += [f"{p.label}: {k}" for k, ok in p.validity_flags(nbar).items() if not ok]
        return out

    # -- dynamics ------------------------------------------------------------

    def space(self, fock_dim: int | None = None) -> SpaceDescriptor:
        return SpaceDescriptor(self.n_qubits, fock_dim or self.profile.fock_dim)

    def hamiltonian(self, space: SpaceDescriptor, model: str = "full") -> HamiltonianSpec:
        """Sum of all pulse Hamiltonians (``full``) or of their effective generators (``effective``)."""
        spec = HamiltonianSpec.empty(space)
        for k, b in enumerate(self.blocks()):
            if model == "full":
                for p in b.pulses:
                    spec = spec + pulse_hamiltonian(p, space)
            elif model == "effective":
                for m, (h, p) in enumerate(block_effective(b, space)):
                    spec = spec.with_operator(("eff", k, m), h, True,
                                              [(1.0, 0.0, p.start, p.end, p.ramp, 2)])
            else:
                raise ValueError(f"unknown model {model!r}")
        return spec

    def events(self, space: SpaceDescriptor) -> list[tuple[float, np.ndarray]]:
        return [(e.time, embed_logical(e.logical_matrix(), e.pair, space))
                for e in self.entries if isinstance(e, IdealLogicalOp)]

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        entries = []
        for e in self.entries:
            if isinstance(e, PulseBlock):
                entries.append({"type": "block", "label": e.label, "kind": e.kind,
                                "pulses": [_pulse_to_dict(p) for p in e.pulses]})
            else:
                entries.append({"type": "ideal", "time": e.time, "pair": e.pair, "angle": e.angle,
                                "phi": e.phi, "axis": e.axis, "label": e.label})
        act = None
        if self.logical_action is not None:
            act = {"re": np.real(self.logical_action).tolist(), "im": np.imag(self.logical_action).tolist()}
        return {"format": FORMAT_VERSION, "name": self.name, "n_qubits": self.n_qubits,
                "profile": self.profile.to_dict(), "logical_action": act, "entries": entries}

    @classmethod
    def from_dict(cls, d: dict) -> "PulseSchedule":
        if d.get("format") != FORMAT_VERSION:
            raise ValueError(f"unsupported schedule format {d.get('format')!r}")
        entries = []
        for e in d["entries"]:
            if e["type"] == "block":
                entries.append(PulseBlock(tuple(_pulse_from_dict(p) for p in e["pulses"]),
                                          e.get("label", ""), e.get("kind", "exchange")))
            elif e["type"] == "ideal":
                entries.append(IdealLogicalOp(e["time"], e["pair"], e["angle"], e.get("phi", 0.0),
                                              e.get("axis", "phi"), e.get("label", "")))
            else:
                raise ValueError(f"unknown entry type {e['type']!r}")
        act = d.get("logical_action")
        if act is not None:
            act = np.array(act["re"]) + 1j * np.array(act["im"])
        return cls(tuple(entries), HardwareProfile.from_dict(d["profile"]), d["n_qubits"], act, d.get("name", ""))


def _pulse_to_dict(p: LaserPulse) -> dict:
    d = asdict(p)
    d["targets"] = [asdict(t) for t in p.targets]
    return d


def _pulse_from_dict(d: dict) -> LaserPulse:
    d = dict(d)
    d["targets"] = tuple(DriveTarget(**t) for t in d["targets"])
    return LaserPulse(**d)


def block_effective(block: PulseBlock, space: SpaceDescriptor) -> list[tuple[sp.csr_matrix, LaserPulse]]:
    """Closed-form second-order generators of a block, each with the pulse giving its window.

    A sideband pulse contributes the two-ion operator with its phonon-number
    term, which a dual-field pair cancels.  Light-shift terms that the full
    model compensates are left out.
    """
    out = []
    side = None
    for p in block.pulses:
        t = p.nominal_targets
        if p.sideband == "carrier":
            out.append(((abs(t[0].rabi) ** 2 / p.delta) * qubit_operator(space, t[0].ion, _Z), p))
            continue
        if p.sideband == "blue":
            raise PulseError("effective model is implemented for red sidebands")
        if len(t) != 2:
            raise PulseError("effective model needs two addressed ions")
        term = bichromatic_effective(t[0].rabi, p.eta, p.delta, (t[0].spin_phase, t[1].spin_phase), p.nu,
                                     space, (t[0].ion, t[1].ion), (t[0].mode_sign, t[1].mode_sign),
                                     include_stark=not p.stark_compensation)
        side = (term if side is None else side[0] + term, p)
    if side is not None:
        out.append(side)
    return out


# -- compilation ----------------------------------------------------------------


def _register(n_qubits: int | None, *ions: int) -> int:
    need = max(ions) + 1
    need += need % 2
    if n_qubits is None:
        return max(need, 2)
    if n_qubits < need:
        raise PulseError(f"register of {n_qubits} qubits cannot hold ion {max(ions)}")
    return n_qubits


def _exchange_block(a: int, b: int, angle: float, phi: float, profile: HardwareProfile,
                    start: float = 0.0, mode: str = "dual_field", label: str = "",
                    kind: str = "exchange") -> PulseBlock:
    """Pulses realising ``exp(-i angle [sigma+_a sigma-_b e^{i phi} + h.c.])``."""
    sa, sb = profile.mode_sign(a), profile.mode_sign(b)
    # the effective generator carries s_a s_b and a sign from the detuning
    psi = phi + (math.pi if sa * sb < 0 else 0.0) + (math.pi if angle < 0 else 0.0)
    rate = profile.exchange_rate if mode == "dual_field" else profile.exchange_rate / 2
    flat = abs(angle) / rate
    dur = _ramped(flat, profile.ramp_time)
    om = profile.coupling
    shift = None
    if profile.calibrate_light_shift:
        shift = calibrated_light_shift(profile, mode) / (2 if mode == "dual_field" else 1)
    common = dict(sideband="red", eta=profile.eta, nu=profile.nu, duration=dur, start=start,
                  ramp=profile.ramp_time, light_shift=shift)
    pa = LaserPulse((DriveTarget(a, om, psi, sa), DriveTarget(b, om, 0.0, sb)), delta=profile.delta,
                    label=f"{label}:A", **common)
    if mode == "single_field":
        return PulseBlock((pa,), label, kind)
    if mode != "dual_field":
        raise ValueError(f"unknown mode {mode!r}")
    pb = LaserPulse((DriveTarget(a, om, psi + math.pi, sa), DriveTarget(b, om, 0.0, sb)), delta=-profile.delta,
                    label=f"{label}:B", **common)
    check_dual_pair(pa, pb)
    return PulseBlock((pa, pb), label, kind)


# fixed and finer than the default, so calibration does not follow run settings
CALIBRATION_OPTIONS = EvolveOptions(substeps_per_mode_period=20, scheme="cf6-suzuki")


@functools.lru_cache(maxsize=64)
def calibrated_light_shift(profile: HardwareProfile, mode: str = "dual_field") -> float:
    """Total ``Z`` coefficient per addressed ion during an exchange pulse, phonon ground state.

    The second-order estimate is applied first; the remainder is found from
    the relative phase of ``|00>`` and ``|11>`` (both untouched by the
    exchange) after the pulse.  The single-field drive
    is calibrated without the sideband coupling so that its phonon-number
    dependent shift stays visible.
    """

    probe = replace(profile, calibrate_light_shift=False, addressing_error=0.0)
    if mode == "single_field":
        probe = replace(probe, eta=0.0)
    rate = replace(profile, calibrate_light_shift=False).exchange_rate
    flat = math.pi / 4 / (rate if mode == "dual_field" else rate / 2)
    dur = _ramped(flat, probe.ramp_time)
    om = probe.coupling
    sa, sb = probe.mode_sign(0), probe.mode_sign(1)
    common = dict(sideband="red", eta=probe.eta, nu=probe.nu, duration=dur, ramp=probe.ramp_time)
    pulses = [LaserPulse((DriveTarget(0, om, 0.0, sa), DriveTarget(1, om, 0.0, sb)), delta=probe.delta, **common)]
    if mode == "dual_field":
        pulses.append(LaserPulse((DriveTarget(0, om, math.pi, sa), DriveTarget(1, om, 0.0, sb)),
                                 delta=-probe.delta, **common))
    space = SpaceDescriptor(2, 4)
    spec = HamiltonianSpec.empty(space)
    for p in pulses:
        spec = spec + pulse_hamiltonian(p, space)
    x = np.zeros((2, space.dim), dtype=complex)
    x[0, space.index("00")] = 1.0
    x[1, space.index("11")] = 1.0
    x = evolve_block(x, spec, 0.0, dur, CALIBRATION_OPTIONS)
    ratio = x[0, space.index("00")] / x[1, space.index("11")]
    t_eff = dur - 1.25 * probe.ramp_time
    second_order = sum(abs(om) ** 2 / (probe.nu + p.delta) for p in pulses)
    return float(second_order - np.angle(ratio) / (4 * t_eff))


def _exchange_unitary_2q(angle: float, phi: float) -> np.ndarray:
    g = exchange(2, 0, 1, phi).to_matrix()
    return sla.expm(-1j * angle * g)


def compile_exchange_pulse(ion_a: int, ion_b: int, angle: float, phi: float, profile: HardwareProfile,
                           n_qubits: int | None = None, mode: str = "dual_field") -> PulseSchedule:
    if ion_a == ion_b:
        raise PulseError("exchange needs two different ions")
    n = _register(n_qubits, ion_a, ion_b)
    if angle == 0:
        return PulseSchedule((), profile, n, None, "exchange")
    blk = _exchange_block(ion_a, ion_b, angle, phi, profile, mode=mode, label=f"X({ion_a},{ion_b})")
    return PulseSchedule((blk,), profile, n, None, "exchange")


def compile_logical_phi(pair: int, phi: float, angle: float, profile: HardwareProfile,
                        mode: str = "dual_field", n_qubits: int | None = None) -> PulseSchedule:
    """``exp(-i angle sigma^phi_L / 2)`` on one pair.

    The intra-pair exchange with phase ``-phi`` equals ``sigma^phi_L`` on the
    protected pair subspace, so the exchange angle is ``angle / 2``.
    """
    a, b = 2 * pair, 2 * pair + 1
    n = _register(n_qubits, a, b)
    act = _single_pair_action(logical_rotation(angle, phi), pair, n)
    if angle == 0:
        return PulseSchedule((), profile, n, act, "logical-phi")
    blk = _exchange_block(a, b, angle / 2, -phi, profile, mode=mode, label=f"L{pair}phi", kind="logical")
    return PulseSchedule((blk,), profile, n, act, "logical-phi")


def compile_logical_z(pair: int, angle: float, profile: HardwareProfile, ion: str = "i1",
                      n_qubits: int | None = None) -> PulseSchedule:
    """``exp(-i angle sigma3_L / 2)`` by a light-shift pulse on one ion of the pair.

    On the pair subspace ``sigma3_L = Z_i1 = -Z_i2``; addressing ``i2`` flips
    the sign of the detuning.
    """
    a = 2 * pair if ion == "i1" else 2 * pair + 1
    if ion not in ("i1", "i2"):
        raise ValueError("ion must be 'i1' or 'i2'")
    n = _register(n_qubits, 2 * pair + 1)
    act = _single_pair_action(logical_rotation(angle, axis="z"), pair, n)
    if angle == 0:
        return PulseSchedule((), profile, n, act, "logical-z")
    blk = _stark_block([(pair, angle, ion)], profile)
    return PulseSchedule((blk,), profile, n, act, "logical-z")


def _stark_block(rotations: Sequence[tuple[int, float, str]], profile: HardwareProfile,
                 start: float = 0.0) -> PulseBlock:
    """Concurrent light-shift pulses, one per ``(pair, angle, ion)``."""
    om = profile.stark_coupling
    pulses = []
    for pair, angle, ion in rotations:
        a = 2 * pair if ion == "i1" else 2 * pair + 1
        sign = (1.0 if angle > 0 else -1.0) * (1.0 if ion == "i1" else -1.0)
        dur = _ramped(abs(angle) / (2 * profile.stark_rate), profile.stark_ramp)
        pulses.append(LaserPulse((DriveTarget(a, om, 0.0, profile.mode_sign(a)),), delta=sign * profile.stark_detuning,
                                 sideband="carrier", duration=dur, start=start, ramp=profile.stark_ramp,
                                 label=f"Z{pair}"))
    return PulseBlock(tuple(pulses), "+".join(p.label for p in pulses), "stark")


def _single_pair_action(u: np.ndarray, pair: int, n_qubits: int) -> np.ndarray:
    ops = [np.eye(2)] * (n_qubits // 2)
    ops[pair] = u
    out = np.array([[1.0 + 0j]])
    for o in ops:
        out = np.kron(out, o)
    return out


def recoupling_steps(pair_i: int, pair_j: int, theta_mid: float = RECOUPLING_THETA_MID,
                     order: str = "conjugation") -> list[tuple[int, int, float]]:
    """Time-ordered ``(ion_a, ion_b, exchange angle)`` of the five-pulse sequence.

    ``conjugation`` undoes the outer pulses last, as in ``U1 U2 exp(-i theta G) U2^+ U1^+``;
    ``listed`` uses the opposite signs on the outer pulses.
    """
    i1, i2, j1 = 2 * pair_i, 2 * pair_i + 1, 2 * pair_j
    s = -1.0 if order == "conjugation" else 1.0
    if order not in ("conjugation", "listed"):
        raise ValueError(f"unknown order {order!r}")
    return [(i1, j1, s * math.pi / 4), (i1, i2, s * math.pi / 2), (i2, j1, theta_mid),
            (i1, i2, -s * math.pi / 2), (i1, j1, -s * math.pi / 4)]


CZ = np.diag([1, 1, 1, -1]).astype(complex)
CNOT_LOGICAL = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def compile_recoupling_cz(pair_i: int, pair_j: int, profile: HardwareProfile,
                          n_qubits: int | None = None, theta_mid: float = RECOUPLING_THETA_MID,
                          order: str = "conjugation") -> PulseSchedule:
    """Five exchange pulses giving ``exp(i pi/4 ZL ZL)``, a controlled phase up to local z."""
    if pair_i == pair_j:
        raise PulseError("recoupling needs two distinct pairs")
    n = _register(n_qubits, 2 * pair_i + 1, 2 * pair_j + 1)
    t = 0.0
    blocks = []
    for k, (a, b, ang) in enumerate(recoupling_steps(pair_i, pair_j, theta_mid, order)):
        blk = _exchange_block(a, b, ang, 0.0, profile, start=t, label=f"R{k + 1}({a},{b})")
        blocks.append(blk)
        t = blk.end
    act = None
    if n == 4:
        act = np.diag(np.exp(1j * math.pi / 4 * np.array([1, -1, -1, 1])))
    return PulseSchedule(tuple(blocks), profile, n, act, "recoupling")


def compile_cnot(control_pair: int, target_pair: int, profile: HardwareProfile, wrappers: str = "physical",
                 z_corrections: bool = True, n_qubits: int | None = None) -> PulseSchedule:
    """Logical CNOT: ``Ry_t(pi/2) . CZ . Ry_t(-pi/2)`` with CZ from the recoupling sequence."""
    if wrappers not in ("ideal", "physical"):
        raise ValueError("wrappers must be 'ideal' or 'physical'")
    n = _register(n_qubits, 2 * control_pair + 1, 2 * target_pair + 1)

    def wrapper(angle: float) -> PulseSchedule:
        if wrappers == "physical":
            return compile_logical_phi(target_pair, math.pi / 2, angle, profile, n_qubits=n)
        op = IdealLogicalOp(0.0, target_pair, angle, math.pi / 2, "phi", "wrap")
        return PulseSchedule((op,), profile, n, _single_pair_action(op.logical_matrix(), target_pair, n), "wrap")

    sched = wrapper(-math.pi / 2).then(compile_recoupling_cz(control_pair, target_pair, profile, n))
    if z_corrections:
        blk = _stark_block([(control_pair, CZ_LOCAL_Z[0], "i1"), (target_pair, CZ_LOCAL_Z[1], "i1")], profile)
        act = _single_pair_action(logical_rotation(CZ_LOCAL_Z[0], axis="z"), control_pair, n) @ \
            _single_pair_action(logical_rotation(CZ_LOCAL_Z[1], axis="z"), target_pair, n)
        sched = sched.then(PulseSchedule((blk,), profile, n, act, "zfix"))
    sched = sched.then(wrapper(math.pi / 2))
    if n == 4 and (control_pair, target_pair) == (0, 1) and z_corrections:
        act = CNOT_LOGICAL
    else:
        act = sched.logical_action
    return replace(sched, logical_action=act, name=f"cnot-{wrappers}")


# -- logical-level analysis -----------------------------------------------------


def logical_basis(n_pairs: int) -> list[str]:
    return [logical_label(v) for v in np.ndindex(*(2,) * n_pairs)]


def logical_unitary(schedule: PulseSchedule, model: str = "effective", fock_n: int = 0,
                    fock_dim: int | None = None, opts=None) -> np.ndarray:
    """Schedule action restricted to the product of pair subspaces (Fock level ``fock_n`` in and out)."""

    space = schedule.space(fock_dim if fock_dim is not None else (1 if model == "effective" and fock_n == 0
                                                                 else None))
    labels = logical_basis(schedule.pairs)
    x = np.zeros((len(labels), space.dim), dtype=complex)
    for k, lab in enumerate(labels):
        x[k, space.index(lab, fock_n)] = 1.0
    spec = schedule.hamiltonian(space, model)
    if schedule.duration > 0:
        x = evolve_block(x, spec, 0.0, schedule.duration, opts, schedule.events(space))
    else:
        for _, u in schedule.events(space):
            x = x @ u.T
    idx = [space.index(lab, fock_n) for lab in labels]
    return x[:, idx].T


def gate_fidelity(u: np.ndarray, target: np.ndarray) -> float:
    """``|Tr(T^+ U)|^2 / d^2``; leakage out of the subspace lowers it."""
    d = target.shape[0]
    return float(abs(np.trace(target.conj().T @ u)) ** 2 / d ** 2)


def local_z_fit(u: np.ndarray, target: np.ndarray = CZ) -> tuple[float, tuple[float, float]]:
    """Best ``|Tr(T^+ (Rz(a) x Rz(b)) U)|^2/16`` over ``a, b``; returns (fidelity, (a, b))."""
    def fid(x):
        lz = np.kron(logical_rotation(x[0], axis="z"), logical_rotation(x[1], axis="z"))
        return gate_fidelity(lz @ u, target)

    best = None
    for a0 in np.linspace(-math.pi, math.pi, 9):
        for b0 in np.linspace(-math.pi, math.pi, 9):
            r = so.minimize(lambda x: -fid(x), [a0, b0], method="Nelder-Mead",
                            options={"xatol": 1e-10, "fatol": 1e-14})
            if best is None or -r.fun > best[0] + 1e-12:
                best = (-r.fun, tuple(float((v + math.pi) % (2 * math.pi) - math.pi) for v in r.x))
    return best


def fit_recoupling(thetas: Iterable[float] | None = None, order: str = "conjugation"):
    """Scan the middle exchange angle with exact pulses; returns rows ``(theta, fidelity, (a, b))``."""
    thetas = list(thetas) if thetas is not None else [k * math.pi / 8 for k in range(1, 9)]
    rows = []
    for th in thetas:
        u = ideal_sequence_unitary(recoupling_steps(0, 1, th, order), 4)
        sub = u[np.ix_(_labels_idx(logical_basis(2)), _labels_idx(logical_basis(2)))]
        f, ab = local_z_fit(sub)
        rows.append((th, f, ab))
    return rows


def _labels_idx(labels: Sequence[str]) -> list[int]:
    return [int(lab, 2) for lab in labels]


def ideal_sequence_unitary(steps: Sequence[tuple[int, int, float]], n_qubits: int, phi: float = 0.0) -> np.ndarray:
    u = np.eye(2 ** n_qubits, dtype=complex)
    for a, b, ang in steps:
        u = sla.expm(-1j * ang * exchange(n_qubits, a, b, phi).to_matrix()) @ u
    return u
