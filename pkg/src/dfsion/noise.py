"""Collective dephasing and laser addressing errors."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .compiler import PulseBlock, PulseSchedule
from .hamiltonians import DriveTarget, LaserPulse
from .hilbert import StateVector, fidelity

SCOPES = ("all", "pair")
DISTRIBUTIONS = ("fixed", "uniform", "gaussian")


@dataclass(frozen=True)
class DephasingModel:
    """Random phase ``zeta_noise`` per excitation.

    ``fixed`` uses ``width`` as the phase itself, ``uniform`` draws from
    ``[-width, width]`` and ``gaussian`` uses ``width`` as standard deviation.
    With ``scope="pair"`` every pair draws its own phase.
    """

    distribution: str = "uniform"
    width: float = math.pi
    scope: str = "all"

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.scope not in SCOPES:
            raise ValueError(f"unknown scope {self.scope!r}")
        if self.distribution != "fixed" and self.width < 0:
            raise ValueError("width must be non-negative")

    def sample(self, rng: np.random.Generator, groups: int = 1) -> np.ndarray:
        if self.distribution == "fixed":
            return np.full(groups, float(self.width))
        if self.distribution == "uniform":
            return rng.uniform(-self.width, self.width, size=groups)
        return rng.normal(0.0, self.width, size=groups)


def _groups(n_qubits: int, scope: str) -> list[list[int]]:
    if scope == "all":
        return [list(range(n_qubits))]
    if scope == "pair":
        return [list(range(q, min(q + 2, n_qubits))) for q in range(0, n_qubits, 2)]
    raise ValueError(f"unknown scope {scope!r}")


def _phase_diagonal(n_qubits: int, zetas: Sequence[float], scope: str) -> np.ndarray:
    groups = _groups(n_qubits, scope)
    if len(zetas) != len(groups):
        raise ValueError(f"scope {scope!r} needs {len(groups)} phases, got {len(zetas)}")
    bits = (np.arange(2 ** n_qubits)[:, None] >> (n_qubits - 1 - np.arange(n_qubits))[None, :]) & 1
    phase = np.zeros(2 ** n_qubits)
    for zeta, g in zip(zetas, groups):
        phase += zeta * bits[:, g].sum(axis=1)
    return np.exp(1j * phase)


def collective_dephase(state: StateVector, zeta_noise: float | Sequence[float], scope: str = "all") -> StateVector:
    """Multiply each basis state by ``exp(i zeta * excitations)``, per scope group."""
    zetas = np.atleast_1d(np.asarray(zeta_noise, dtype=float))
    if scope == "pair" and zetas.size == 1:
        zetas = np.repeat(zetas, len(_groups(state.space.n_qubits, scope)))
    diag = _phase_diagonal(state.space.n_qubits, list(zetas), scope)
    amp = (state.qubit_amplitudes() * diag[:, None]).ravel()
    return StateVector(amp, state.space)


def dephasing_survival(state: StateVector, model: DephasingModel, samples: int = 10_000,
                       seed: int | None = 0) -> float:
    """Mean ``fidelity(state, dephased state)`` over ``samples`` draws."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = state.space.n_qubits
    groups = len(_groups(n, model.scope))
    q = state.qubit_amplitudes()
    w = np.sum(np.abs(q) ** 2, axis=1)
    bits = (np.arange(2 ** n)[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    counts = np.stack([bits[:, g].sum(axis=1) for g in _groups(n, model.scope)], axis=1)
    zetas = np.stack([model.sample(rng, groups) for _ in range(samples)])
    # <psi|D|psi> depends only on the weight of each basis label
    overlaps = np.exp(1j * zetas @ counts.T) @ w
    return float(np.mean(np.minimum(np.abs(overlaps) ** 2, 1.0)))


# -- addressing errors -----------------------------------------------------------


@dataclass(frozen=True)
class IonLayout:
    """Chain order of the ions; neighbours are adjacent entries of ``order``."""

    order: tuple[int, ...]

    @classmethod
    def linear(cls, n_ions: int) -> "IonLayout":
        return cls(tuple(range(n_ions)))

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("layout must be a permutation of 0..n-1")

    def neighbours(self, ion: int) -> tuple[int, ...]:
        k = self.order.index(ion)
        return tuple(self.order[j] for j in (k - 1, k + 1) if 0 <= j < len(self.order))


@dataclass(frozen=True)
class ControlErrors:
    """``addressing_error`` is the fraction of a beam reaching each adjacent ion.

    ``mode="amplitude"`` applies it to the Rabi frequency, ``"intensity"``
    to its square.  ``neighbour_phase`` is an extra optical phase of the
    leaked light.  ``compensate_leaked_shift`` extends the light-shift
    compensation to the neighbours, as a calibrated frequency
    renormalisation would.
    """

    addressing_error: float = 0.05
    enabled: bool = True
    mode: str = "amplitude"
    neighbour_phase: float = 0.0
    compensate_leaked_shift: bool = True

    def __post_init__(self):
        if not 0 <= self.addressing_error <= 0.2:
            raise ValueError("addressing_error must lie in [0, 0.2]")
        if self.mode not in ("amplitude", "intensity"):
            raise ValueError("mode must be 'amplitude' or 'intensity'")

    @property
    def amplitude_fraction(self) -> float:
        if not self.enabled:
            return 0.0
        return self.addressing_error if self.mode == "amplitude" else math.sqrt(self.addressing_error)


def _leaky_pulse(pulse: LaserPulse, frac: float, layout: IonLayout, errors: ControlErrors,
                 mode_sign) -> LaserPulse:
    nominal = {t.ion for t in pulse.nominal_targets}
    leaked: dict[int, complex] = {}
    for t in pulse.nominal_targets:
        for j in layout.neighbours(t.ion):
            if j in nominal:
                continue
            # light from several beams on one ion adds coherently
            leaked[j] = leaked.get(j, 0j) + frac * t.rabi * cmath.exp(1j * (t.spin_phase + errors.neighbour_phase))
    extra = tuple(DriveTarget(j, abs(z), cmath.phase(z), mode_sign(j), leaked=True)
                  for j, z in sorted(leaked.items()) if abs(z) > 0)
    return replace(pulse, targets=pulse.targets + extra, compensate_leaked=errors.compensate_leaked_shift)


def apply_addressing_error(schedule: PulseSchedule, errors: ControlErrors,
                           layout: IonLayout | None = None) -> PulseSchedule:
    """Add leaked drives on ions adjacent to every addressed ion."""
    frac = errors.amplitude_fraction
    if frac == 0:
        return schedule
    layout = layout or IonLayout.linear(schedule.n_qubits)
    if len(layout.order) != schedule.n_qubits:
        raise ValueError("layout size does not match the register")
    ms = schedule.profile.mode_sign

    def leak(block: PulseBlock) -> PulseBlock:
        return replace(block, pulses=tuple(_leaky_pulse(p, frac, layout, errors, ms) for p in block.pulses))

    return schedule.map_blocks(leak)
