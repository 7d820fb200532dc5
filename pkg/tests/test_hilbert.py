import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dfsion.hilbert import (
    LeakageError, SpaceDescriptor, StateVector, basis_state, dfs2_product_projector, dfs4_projector,
    excitation_sector, fidelity, populations, product_with_fock, project, qubit_probabilities, sample_fock,
    superposition, thermal_probabilities,
)


def test_index_layout():
    sp = SpaceDescriptor(4, 10)
    assert sp.dim == 160
    assert sp.index("0000", 0) == 0
    assert sp.index("0000", 3) == 3
    assert sp.index("0101", 2) == 52
    assert sp.labels()[5] == "0101"
    with pytest.raises(ValueError):
        sp.index("012", 0)
    with pytest.raises(ValueError):
        sp.index("0101", 10)
    with pytest.raises(ValueError):
        SpaceDescriptor(2, 0)


def test_basis_and_superposition():
    sp = SpaceDescriptor(2, 3)
    s = superposition(sp, {"01": 1.0, "10": 1j}, fock_n=1)
    assert s.norm == pytest.approx(1.0)
    assert populations(s, ["01", "10", "11"]) == pytest.approx({"01": 0.5, "10": 0.5, "11": 0.0})
    assert fidelity(s, basis_state(sp, "01", 1)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        superposition(sp, {"01": 0.0})
    with pytest.raises(ValueError):
        fidelity(s, basis_state(SpaceDescriptor(2, 4), "01"))


def test_state_is_immutable_and_shape_checked():
    sp = SpaceDescriptor(1, 2)
    s = basis_state(sp, "1")
    with pytest.raises(ValueError):
        s.amplitudes[0] = 1.0
    with pytest.raises(ValueError):
        StateVector(np.zeros(3), sp)


def test_with_fock_dim_pads_and_truncates():
    sp = SpaceDescriptor(1, 3)
    s = product_with_fock(sp, np.array([1, 0]), np.array([0, 0, 1]))
    big = s.with_fock_dim(7)
    assert big.space.dim == 14 and big.amplitudes[2] == 1
    assert s.with_fock_dim(2).norm == 0


@given(st.floats(0, 5), st.integers(1, 30))
@settings(max_examples=50, deadline=None)
def test_thermal_probabilities(nbar, d):
    p = thermal_probabilities(nbar, d)
    assert p.shape == (d,)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(np.diff(p) <= 1e-15)


def test_thermal_mean_for_large_cutoff():
    p = thermal_probabilities(0.8, 200)
    assert np.dot(np.arange(200), p) == pytest.approx(0.8, rel=1e-9)
    with pytest.raises(ValueError):
        thermal_probabilities(-1, 3)


def test_sample_fock_seeded():
    a = [sample_fock(1.0, 10, np.random.default_rng(5)) for _ in range(3)]
    b = [sample_fock(1.0, 10, np.random.default_rng(5)) for _ in range(3)]
    assert a == b


def test_projectors():
    sp = SpaceDescriptor(4, 2)
    p4 = dfs4_projector(sp)
    p22 = dfs2_product_projector(sp)
    assert p4.mask().sum() == 12 and p22.mask().sum() == 8
    s = superposition(sp, {"0011": 1.0, "0101": 1.0})
    assert p4.weight(s.amplitudes) == pytest.approx(1.0)
    assert p22.weight(s.amplitudes) == pytest.approx(0.5)
    proj, w = project(s, p22)
    assert w == pytest.approx(0.5) and proj.norm == pytest.approx(1.0)
    with pytest.raises(LeakageError):
        project(basis_state(sp, "0011"), p22)
    assert excitation_sector(sp, 2).qubit_mask().sum() == 6
    block = np.stack([s.amplitudes, basis_state(sp, "0011").amplitudes])
    assert p22.weight(block) == pytest.approx([0.5, 0.0])
    with pytest.raises(ValueError):
        dfs2_product_projector(SpaceDescriptor(3, 1))


def test_qubit_probabilities_sum_fock():
    sp = SpaceDescriptor(1, 2)
    s = StateVector(np.array([0.6, 0.0, 0.0, 0.8]), sp)
    assert qubit_probabilities(s) == pytest.approx([0.36, 0.64])
    assert qubit_probabilities(s.amplitudes, sp) == pytest.approx([0.36, 0.64])
