import json
import math

import numpy as np
import pytest
import scipy.linalg as sla

from dfsion.compiler import (
    CNOT_LOGICAL, CZ_LOCAL_Z, IdealLogicalOp, PROFILES, PulseBlock, PulseSchedule, calibrated_light_shift,
    compile_cnot, compile_exchange_pulse, compile_logical_phi, compile_logical_z, compile_recoupling_cz,
    embed_logical, fit_recoupling, gate_fidelity, get_profile, ideal_sequence_unitary, logical_basis,
    logical_rotation, logical_unitary, pulse_duration, recoupling_steps,
)
from dfsion.hamiltonians import PulseError
from dfsion.hilbert import SpaceDescriptor
from dfsion.pauli import exchange
from dfsion.propagator import evolve_block

PROFILE = PROFILES["paper"]
SQUARE = PROFILES["paper-square"]


def test_profile_rates():
    assert PROFILE.coupling == pytest.approx(math.pi * 1e5)
    assert PROFILE.exchange_rate == pytest.approx(518.3628, rel=1e-6)
    assert PROFILE.stark_rate == pytest.approx(3133.78, rel=1e-5)
    assert get_profile("paper-square").ramp_time == 0
    with pytest.raises(KeyError):
        get_profile("nope")


def test_pulse_duration():
    t = pulse_duration(PROFILE, math.pi / 2)
    assert t == pytest.approx(3.0303e-3, rel=1e-4)
    assert t == pytest.approx(3.0e-3, rel=0.02)
    with pytest.raises(PulseError):
        pulse_duration(PROFILE.with_(eta=0.0), 1.0)


def test_ramped_block_duration():
    s = compile_exchange_pulse(0, 1, math.pi / 2, 0.0, PROFILE)
    assert s.duration == pytest.approx(pulse_duration(PROFILE, math.pi / 2) + 1.25 * PROFILE.ramp_time)
    assert s.two_body_area() == pytest.approx(1.0)
    assert compile_exchange_pulse(0, 1, math.pi / 2, 0.0, SQUARE).duration == pytest.approx(
        pulse_duration(PROFILE, math.pi / 2))


def test_profile_validation_and_roundtrip():
    with pytest.raises(ValueError):
        PROFILE.with_(eta=-0.1)
    with pytest.raises(ValueError):
        PROFILE.with_(addressing_error=0.5)
    with pytest.raises(ValueError):
        PROFILE.with_(mode_signs=(1, 2))
    assert type(PROFILE).from_dict(PROFILE.to_dict()) == PROFILE


def test_calibrated_light_shift_values():
    assert calibrated_light_shift(PROFILE) == pytest.approx(26292.57, abs=0.5)
    assert calibrated_light_shift(PROFILE, "single_field") == pytest.approx(12934.09, abs=0.5)


def test_recoupling_fit():
    rows = {round(th / math.pi, 3): (f, ab) for th, f, ab in fit_recoupling([math.pi / 4, math.pi / 2])}
    f, ab = rows[0.5]
    assert f == pytest.approx(1.0, abs=1e-9)
    assert ab == pytest.approx(CZ_LOCAL_Z, abs=1e-5)
    assert rows[0.25][0] == pytest.approx(0.8536, abs=1e-3)


def test_recoupling_steps_order():
    q = math.pi / 4
    assert recoupling_steps(0, 1) == pytest.approx([(0, 2, -q), (0, 1, -2 * q), (1, 2, 2 * q), (0, 1, 2 * q),
                                                    (0, 2, q)])
    assert recoupling_steps(0, 1, order="listed")[0] == pytest.approx((0, 2, q))
    with pytest.raises(ValueError):
        recoupling_steps(0, 1, order="sideways")


def test_recoupling_gives_zz_phase_on_logical_block():
    u = ideal_sequence_unitary(recoupling_steps(0, 1), 4)
    idx = [int(lab, 2) for lab in logical_basis(2)]
    sub = u[np.ix_(idx, idx)]
    ref = np.diag(np.exp(1j * math.pi / 4 * np.array([1, -1, -1, 1])))
    assert gate_fidelity(sub, ref) == pytest.approx(1.0, abs=1e-12)
    # the protected four-ion space (two excitations) is invariant; the pair product is not
    six = [int(lab, 2) for lab in ("0101", "0110", "1001", "1010", "0011", "1100")]
    assert np.sum(np.abs(u[np.ix_(six, six)]) ** 2) == pytest.approx(6.0)


def test_cnot_schedule_oracles():
    ideal = compile_cnot(0, 1, PROFILE, wrappers="ideal")
    phys = compile_cnot(0, 1, PROFILE, wrappers="physical")
    assert ideal.duration == pytest.approx(12.9968e-3, rel=1e-4)
    assert phys.duration == pytest.approx(16.2771e-3, rel=1e-4)
    assert phys.duration == pytest.approx(15e-3, rel=0.2)
    assert phys.two_body_area() == pytest.approx(5.0, rel=1e-9)
    assert phys.recoupling_area() == pytest.approx(4.0, rel=1e-9)
    assert np.allclose(phys.logical_action, CNOT_LOGICAL)


@pytest.mark.parametrize("wrappers", ["ideal", "physical"])
def test_effective_cnot_is_exact(wrappers):
    u = logical_unitary(compile_cnot(0, 1, PROFILE, wrappers=wrappers), "effective")
    # z pulses are timed with the all-orders shift, the effective model keeps second order only
    assert gate_fidelity(u, CNOT_LOGICAL) == pytest.approx(1.0, abs=5e-5)


def test_logical_single_pair_gates_effective():
    for phi in (0.0, math.pi / 2, 1.1):
        s = compile_logical_phi(0, phi, math.pi / 3, PROFILE)
        u = logical_unitary(s, "effective")
        assert gate_fidelity(u, logical_rotation(math.pi / 3, phi)) == pytest.approx(1.0, abs=1e-9)
    for ion in ("i1", "i2"):
        s = compile_logical_z(0, math.pi / 2, PROFILE, ion=ion)
        u = logical_unitary(s, "effective")
        assert gate_fidelity(u, logical_rotation(math.pi / 2, axis="z")) == pytest.approx(1.0, abs=2e-5)
    with pytest.raises(ValueError):
        compile_logical_z(0, 1.0, PROFILE, ion="i3")


def test_effective_exchange_matches_generator():
    s = compile_exchange_pulse(0, 1, 0.7, 0.4, SQUARE)
    space = s.space(1)
    x = evolve_block(np.eye(4, dtype=complex), s.hamiltonian(space, "effective"), 0.0, s.duration)
    ref = sla.expm(-0.7j * exchange(2, 0, 1, 0.4).to_matrix())
    assert np.allclose(x.T, ref, atol=1e-9)


def test_schedule_serialization_roundtrip():
    s = compile_cnot(0, 1, PROFILE, wrappers="ideal")
    d = json.loads(json.dumps(s.to_dict()))
    back = PulseSchedule.from_dict(d)
    assert back.duration == pytest.approx(s.duration)
    assert len(back.entries) == len(s.entries)
    assert np.allclose(back.logical_action, s.logical_action)
    assert back.two_body_area() == pytest.approx(s.two_body_area())
    with pytest.raises(ValueError):
        PulseSchedule.from_dict({**d, "format": 99})


def test_schedule_validation():
    blk = compile_exchange_pulse(0, 1, 1.0, 0.0, PROFILE).entries[0]
    with pytest.raises(PulseError, match="overlap"):
        PulseSchedule((blk, blk), PROFILE, 2)
    with pytest.raises(PulseError):
        PulseSchedule((blk,), PROFILE, 1)
    with pytest.raises(PulseError):
        compile_exchange_pulse(1, 1, 1.0, 0.0, PROFILE)
    with pytest.raises(PulseError):
        compile_recoupling_cz(0, 0, PROFILE)
    with pytest.raises(ValueError):
        compile_cnot(0, 1, PROFILE, wrappers="magic")
    assert isinstance(blk, PulseBlock)


def test_then_composes_actions():
    a = compile_logical_phi(0, 0.0, math.pi / 2, PROFILE)
    b = a.then(a)
    assert b.duration == pytest.approx(2 * a.duration)
    assert np.allclose(b.logical_action, logical_rotation(math.pi, 0.0))
    assert PulseSchedule.empty(PROFILE, 4).duration == 0


def test_embed_logical_and_ideal_ops():
    space = SpaceDescriptor(2, 2)
    u = embed_logical(logical_rotation(math.pi, 0.0), 0, space)
    assert np.allclose(u @ u.conj().T, np.eye(8))
    op = IdealLogicalOp(1.0, 0, math.pi / 2)
    assert op.shifted(0.5).time == 1.5 and op.exchange_area() == pytest.approx(math.pi / 2)
    with pytest.raises(PulseError):
        embed_logical(np.eye(2), 1, space)
