import math

import numpy as np
import pytest

from dfsion.compiler import PROFILES, compile_cnot, compile_exchange_pulse
from dfsion.hilbert import SpaceDescriptor, basis_state, fidelity, superposition
from dfsion.noise import (
    ControlErrors, DephasingModel, IonLayout, apply_addressing_error, collective_dephase, dephasing_survival,
)

PROFILE = PROFILES["paper"]


def test_collective_phase_is_global_on_fixed_excitation():
    sp = SpaceDescriptor(4, 2)
    s = superposition(sp, {"0101": 1, "0110": 1j, "1001": -1, "1010": 0.5})
    d = collective_dephase(s, 1.3)
    assert fidelity(s, d) == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(d.amplitudes, np.exp(2.6j) * s.amplitudes)


def test_bare_superposition_dephases():
    s = superposition(SpaceDescriptor(1, 1), {"0": 1, "1": 1})
    assert fidelity(s, collective_dephase(s, math.pi)) == pytest.approx(0.0, abs=1e-15)
    assert fidelity(s, collective_dephase(s, math.pi / 2)) == pytest.approx(0.5)


def test_pair_scope_draws_per_pair():
    sp = SpaceDescriptor(4, 1)
    s = superposition(sp, {"0101": 1, "0110": 1})
    # one excitation in each pair: pair-local phases still cancel between these labels
    assert fidelity(s, collective_dephase(s, [0.3, 1.1], scope="pair")) == pytest.approx(1.0)
    mixed = superposition(sp, {"0101": 1, "0011": 1})
    assert fidelity(mixed, collective_dephase(mixed, [0.0, math.pi], scope="pair")) < 1


def test_survival_statistics():
    enc = superposition(SpaceDescriptor(4, 1), {"0101": 1, "1010": 1})
    bare = superposition(SpaceDescriptor(1, 1), {"0": 1, "1": 1})
    m = DephasingModel("uniform", math.pi)
    assert dephasing_survival(enc, m, 10_000, seed=3) == pytest.approx(1.0, abs=1e-9)
    assert dephasing_survival(bare, m, 10_000, seed=3) == pytest.approx(0.5, abs=0.01)
    # cos^2(z/2) averaged over a Gaussian of width s is (1 + exp(-s^2/2)) / 2
    g = DephasingModel("gaussian", 0.5)
    assert dephasing_survival(bare, g, 20_000, seed=1) == pytest.approx((1 + math.exp(-0.125)) / 2, abs=0.01)
    assert dephasing_survival(bare, m, 100, seed=9) == dephasing_survival(bare, m, 100, seed=9)
    with pytest.raises(ValueError):
        dephasing_survival(bare, m, 0)


def test_model_validation():
    with pytest.raises(ValueError):
        DephasingModel("lorentzian")
    with pytest.raises(ValueError):
        DephasingModel(scope="ion")
    with pytest.raises(ValueError):
        DephasingModel(width=-1)
    assert DephasingModel("fixed", -0.3).sample(np.random.default_rng(0), 2).tolist() == [-0.3, -0.3]


def test_layout():
    lay = IonLayout.linear(4)
    assert lay.neighbours(0) == (1,) and lay.neighbours(2) == (1, 3)
    assert IonLayout((2, 0, 1, 3)).neighbours(0) == (2, 1)
    with pytest.raises(ValueError):
        IonLayout((0, 0, 1))


def test_control_errors():
    assert ControlErrors(0.05).amplitude_fraction == 0.05
    assert ControlErrors(0.04, mode="intensity").amplitude_fraction == pytest.approx(0.2)
    assert ControlErrors(0.05, enabled=False).amplitude_fraction == 0.0
    with pytest.raises(ValueError):
        ControlErrors(0.3)
    with pytest.raises(ValueError):
        ControlErrors(mode="phase")


def test_addressing_error_adds_neighbour_drives():
    s = compile_cnot(0, 1, PROFILE)
    leaky = apply_addressing_error(s, ControlErrors(0.05))
    assert leaky.duration == s.duration
    p0, p1 = s.pulses()[0], leaky.pulses()[0]
    extra = [t for t in p1.targets if t.leaked]
    assert len(p1.targets) == len(p0.targets) + len(extra) and extra
    nominal = {t.ion for t in p0.targets}
    assert all(t.ion not in nominal for t in extra)
    rabi = p0.targets[0].rabi
    assert all(t.rabi <= 2 * 0.05 * rabi + 1e-9 for t in extra)
    assert apply_addressing_error(s, ControlErrors(0.0)) is s
    with pytest.raises(ValueError):
        apply_addressing_error(s, ControlErrors(0.05), IonLayout.linear(3))


def test_two_ion_register_has_no_neighbours_to_leak_to():
    s = compile_exchange_pulse(0, 1, math.pi / 2, 0.0, PROFILE, n_qubits=2)
    leaky = apply_addressing_error(s, ControlErrors(0.05))
    assert not any(t.leaked for p in leaky.pulses() for t in p.targets)
    assert basis_state(s.space(2), "10").norm == 1
