import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from dfsion.hamiltonians import (
    Channel, DriveTarget, HamiltonianSpec, LaserPulse, PulseError, annihilation, bichromatic_effective,
    carrier_hamiltonian, check_dual_pair, dual_bichromatic_spec, dual_effective, exact_stark_shift,
    exchange_coupling, exchange_effective, mode_operator, pulse_hamiltonian, qubit_operator,
    sideband_hamiltonian, stark_effective, stark_shift,
)
from dfsion.hilbert import SpaceDescriptor, superposition
from dfsion.pauli import dfs2, exchange, restrict
from dfsion.propagator import EvolveOptions, evolve

TWO_PI = 2 * math.pi
SP = SpaceDescriptor(2, 4)


def red_pulse(phases=(0.0, math.pi), delta=2e5, eta=0.02, rabi=TWO_PI * 1e5, **kw):
    return LaserPulse((DriveTarget(0, rabi, phases[0], 1), DriveTarget(1, rabi, phases[1], -1)), delta, "red",
                      eta, TWO_PI * 1.2e6, 1e-4, **kw)


def test_operator_layout():
    a = annihilation(4).toarray()
    assert np.allclose(np.diag(a, 1), np.sqrt([1, 2, 3]))
    n = mode_operator(SP, "n").toarray()
    assert np.allclose(np.diag(n)[:4], [0, 1, 2, 3])
    z0 = qubit_operator(SP, 0, np.diag([1.0, -1.0])).toarray()
    # qubit 0 is the most significant bit, |0> has Z = +1
    assert np.allclose(np.diag(z0), [1] * 8 + [-1] * 8)


def test_channel_envelope_ramps():
    c = Channel(0, 1.0, 0.0, 0.0, 1.0, ramp=0.25, power=1)
    assert c.envelope(-0.1) == 0 and c.envelope(1.0) == 0
    assert c.envelope(0.5) == 1
    assert c.envelope(0.125) == pytest.approx(0.5)
    c2 = Channel(0, 1.0, 0.0, 0.0, 1.0, ramp=0.25, power=2)
    assert c2.envelope(0.125) == pytest.approx(0.25)


@given(st.floats(0, 1e-4, exclude_max=True), st.floats(-math.pi, math.pi))
@settings(max_examples=30, deadline=None)
def test_pulse_hamiltonians_are_hermitian(t, phase):
    spec = sideband_hamiltonian(red_pulse((phase, 0.3), ramp=2e-5), SP)
    assert spec.antihermitian_residue(t) < 1e-9
    blue = red_pulse((phase, 0.3))
    spec = sideband_hamiltonian(LaserPulse(blue.targets, 2e5, "blue", 0.02, TWO_PI * 1.2e6, 1e-4), SP)
    assert spec.antihermitian_residue(t) < 1e-9


def test_sideband_channels():
    spec = sideband_hamiltonian(red_pulse(), SP)
    # carrier + sideband per ion, plus one compensation term per ion
    assert len(spec.channels) == 6
    keys = set(spec.keys)
    assert {("sp", 0, "I"), ("sp", 0, "a"), ("z", 0), ("z", 1)} <= keys
    omegas = sorted({c.omega for c in spec.channels})
    assert omegas == pytest.approx([0.0, 2e5, TWO_PI * 1.2e6 + 2e5])
    no_comp = sideband_hamiltonian(red_pulse(stark_compensation=False), SP)
    assert len(no_comp.channels) == 4
    zero_eta = sideband_hamiltonian(red_pulse(eta=0.0), SP)
    assert ("sp", 0, "a") not in zero_eta.keys


def test_pulse_validation():
    with pytest.raises(PulseError):
        red_pulse(eta=-0.1) and sideband_hamiltonian(red_pulse(eta=-0.1), SP)
    with pytest.raises(PulseError):
        LaserPulse((), 1.0, "green")
    with pytest.raises(PulseError):
        LaserPulse((), 1.0, duration=1.0, ramp=0.6)
    with pytest.raises(PulseError):
        DriveTarget(0, 1.0, mode_sign=2)
    with pytest.raises(PulseError):
        carrier_hamiltonian(red_pulse(), SP)
    with pytest.raises(PulseError):
        stark_shift(1.0, 0.0)


def test_validity_flags():
    p = red_pulse()
    f = p.validity_flags()
    assert set(f) == {"dispersive", "resolved_sideband", "lamb_dicke"}
    bad = red_pulse(delta=1e3)
    with pytest.warns(UserWarning):
        assert "dispersive" in bad.check()


def test_stark_shift_values():
    assert stark_shift(2.0, 40.0) == pytest.approx(0.1)
    # all-orders value approaches the second-order one for small Omega/delta
    assert exact_stark_shift(2.0, 40.0) == pytest.approx(0.1, rel=3e-3)
    assert exact_stark_shift(2.0, -40.0) < 0
    assert stark_effective(2.0, 40.0).allclose(0.1 * stark_effective(1.0, 1.0))


def test_exchange_effective_on_pair():
    c = exchange_coupling(1.0, 0.1, 0.5)
    assert c == pytest.approx(-0.02)
    op = exchange_effective(1.0, 0.1, 0.5, 0.3)
    assert op.allclose(c * exchange(2, 0, 1, 0.3))
    assert dual_effective(1.0, 0.1, 0.5, 0.3).allclose(2 * op)
    r = restrict(op, dfs2(0))
    assert np.allclose(r, c * np.array([[0, np.exp(0.3j)], [np.exp(-0.3j), 0]]))


def test_bichromatic_effective_structure():
    sp4 = SpaceDescriptor(2, 3)
    h = bichromatic_effective(1.0, 0.1, 0.5, (0.0, 0.0), 10.0, sp4).toarray()
    assert np.allclose(h, h.conj().T)
    # phonon-number dependence lives on the Z terms only
    hot = bichromatic_effective(1.0, 0.1, 0.5, (0.0, 0.0), 10.0, sp4, include_stark=False)
    assert sp.issparse(hot)


def test_check_dual_pair():
    a = red_pulse((0.0, math.pi))
    b = LaserPulse(a.targets[:1] + (DriveTarget(1, a.targets[1].rabi, 2 * math.pi, -1),), -a.delta, "red",
                   a.eta, a.nu, a.duration)
    check_dual_pair(a, b)
    assert len(dual_bichromatic_spec(a, b, SP).channels) == 12
    wrong = LaserPulse(b.targets, a.delta, "red", a.eta, a.nu, a.duration)
    with pytest.raises(PulseError, match="-delta"):
        check_dual_pair(a, wrong)
    same_phase = LaserPulse(a.targets, -a.delta, "red", a.eta, a.nu, a.duration)
    with pytest.raises(PulseError, match="pi out of phase"):
        check_dual_pair(a, same_phase)
    blue = LaserPulse(b.targets, -a.delta, "blue", a.eta, a.nu, a.duration)
    with pytest.raises(PulseError, match="same sideband"):
        check_dual_pair(a, blue)


def test_spec_add_merges_operators():
    s1 = carrier_hamiltonian(LaserPulse((DriveTarget(0, 1.0),), 20.0, "carrier", duration=1.0), SP)
    s2 = carrier_hamiltonian(LaserPulse((DriveTarget(0, 1.0),), 20.0, "carrier", duration=1.0, start=1.0), SP)
    s = s1 + s2
    assert len(s.keys) == 1 and len(s.channels) == 2
    assert s.breakpoints() == [0.0, 1.0, 2.0]
    assert not s.is_static(0.0, 1.0)
    assert s.shifted(1.0).breakpoints() == [1.0, 2.0, 3.0]


def _carrier_phase(rabi, delta, t):
    space = SpaceDescriptor(1, 1)
    pulse = LaserPulse((DriveTarget(0, rabi),), delta, "carrier", duration=t)
    psi = superposition(space, {"0": 1, "1": 1})
    a = evolve(psi, pulse_hamiltonian(pulse, space), 0.0, t, EvolveOptions()).final_state.amplitudes
    return np.angle(a[1] / a[0])


def test_carrier_stark_phase_matches_effective():
    """Full carrier drive at Omega/delta = 0.05 against the static Z model."""
    rabi = TWO_PI * 1e4
    delta = rabi / 0.05
    shift = stark_shift(rabi, delta)
    # H_eff = shift * Z advances |1> relative to |0> by 2 * shift * t
    measured = _carrier_phase(rabi, delta, math.pi / (2 * shift)) % (2 * math.pi)
    assert measured == pytest.approx(math.pi, rel=0.01)
    assert _carrier_phase(rabi, delta, math.pi / (8 * shift)) == pytest.approx(math.pi / 4, rel=0.05)
    assert _carrier_phase(rabi, -delta, math.pi / (8 * shift)) == pytest.approx(-math.pi / 4, rel=0.05)
