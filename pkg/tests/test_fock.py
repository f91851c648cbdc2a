import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from rotsym.fock import (
    DensityOperator,
    ModeOperator,
    PureState,
    TruncationConfig,
    annihilator,
    apply_two_mode_unitary,
    beamsplitter,
    creator,
    fock_state,
    identity,
    number_operator,
    partial_trace,
    tensor,
    truncation_health,
)


def test_truncation_config_validation():
    assert TruncationConfig(3).dim == 4
    with pytest.raises(ValueError):
        TruncationConfig(0)
    with pytest.raises(ValueError):
        TruncationConfig(5, tail_tolerance=0)


def test_for_squeezing_tail_below_tolerance():
    for r in (0.3, 0.7, 1.2):
        cfg = TruncationConfig.for_squeezing(r)
        assert math.tanh(r) ** (2 * cfg.dim) <= cfg.tail_tolerance
        assert math.tanh(r) ** (2 * cfg.n_max) > cfg.tail_tolerance


def test_annihilator_smallest_cutoff():
    a = annihilator(TruncationConfig(1)).matrix
    np.testing.assert_array_equal(a, [[0, 1], [0, 0]])


def test_annihilator_ladder_action():
    out = annihilator(TruncationConfig(5)) @ fock_state(3, 6)
    expected = np.zeros(6)
    expected[2] = math.sqrt(3)
    np.testing.assert_allclose(out, expected)


def test_annihilator_kills_vacuum():
    out = annihilator(6) @ fock_state(0, 6)
    assert np.all(out == 0)


def test_creator_is_adjoint_and_number_operator():
    a, ad = annihilator(7), creator(7)
    np.testing.assert_allclose(ad.matrix, a.matrix.conj().T)
    np.testing.assert_allclose((ad @ a).matrix, number_operator(7).matrix)


def test_tensor_examples():
    v = tensor([fock_state(0, 2), fock_state(0, 2)])
    assert v.tensor[0, 0] == 1 and v.mode_dims == (2, 2)
    op = tensor([annihilator(2), identity(2)])
    out = op @ tensor([fock_state(1, 2), fock_state(1, 2)])
    np.testing.assert_allclose(out, tensor([fock_state(0, 2), fock_state(1, 2)]).amplitudes)
    assert tensor([fock_state(0, 3)] * 3).dim == 27


def test_tensor_rejects_mixture():
    with pytest.raises(TypeError):
        tensor([fock_state(0, 2), identity(2)])


def test_number_conserving_flag_checked():
    with pytest.raises(ValueError):
        ModeOperator(annihilator(3).matrix, (3,), number_conserving=True)


def test_identity_unitary_leaves_state():
    rng = np.random.default_rng(1)
    v = rng.normal(size=27) + 1j * rng.normal(size=27)
    s = PureState((3, 3, 3), v / np.linalg.norm(v))
    u = ModeOperator(np.eye(9), (3, 3), number_conserving=True)
    out = apply_two_mode_unitary(s, u, (0, 2))
    np.testing.assert_allclose(out.amplitudes, s.amplitudes)


def test_balanced_beamsplitter_single_photon():
    # independent 2x2 exponential in the one-photon block {|1,0>, |0,1>}
    g = np.array([[0, 1], [-1, 0]])  # a^dag b - a b^dag on (|1,0>, |0,1>)
    ref = expm(math.pi / 4 * g) @ np.array([1, 0])
    out = apply_two_mode_unitary(tensor([fock_state(1, 3), fock_state(0, 3)]), beamsplitter(math.pi / 4, 3), (0, 1))
    np.testing.assert_allclose(out.tensor[1, 0], ref[0], atol=1e-14)
    np.testing.assert_allclose(out.tensor[0, 1], ref[1], atol=1e-14)
    assert abs(abs(out.tensor[1, 0]) - 1 / math.sqrt(2)) < 1e-14


def test_hong_ou_mandel():
    out = apply_two_mode_unitary(tensor([fock_state(1, 3), fock_state(1, 3)]), beamsplitter(math.pi / 4, 3), (0, 1))
    assert abs(out.tensor[1, 1]) < 1e-14
    np.testing.assert_allclose(abs(out.tensor[2, 0]) ** 2, 0.5, atol=1e-14)


def test_blockwise_matches_dense_exponential():
    d = 5
    a = np.kron(annihilator(d).matrix, np.eye(d))
    b = np.kron(np.eye(d), annihilator(d).matrix)
    theta = 0.37
    dense = expm(theta * (a.conj().T @ b - a @ b.conj().T))
    bs = beamsplitter(theta, d)
    # unclipped blocks agree with the dense exponential of the truncated generator
    for s, (ni, block) in bs.blocks.items():
        if s <= d - 1:
            idx = ni * d + (s - ni)
            np.testing.assert_allclose(block, dense[np.ix_(idx, idx)], atol=1e-12)


def test_unitarity_on_unclipped_blocks():
    bs = beamsplitter(0.8, 8)
    for s, (ni, block) in bs.blocks.items():
        if s <= 7:
            np.testing.assert_allclose(block.conj().T @ block, np.eye(len(ni)), atol=1e-10)


def test_bad_mode_pair():
    s = tensor([fock_state(0, 2)] * 3)
    with pytest.raises(IndexError):
        apply_two_mode_unitary(s, beamsplitter(0.1, 2), (0, 3))
    with pytest.raises(IndexError):
        apply_two_mode_unitary(s, beamsplitter(0.1, 2), (1, 1))


def test_partial_trace_examples():
    rho = partial_trace(tensor([fock_state(0, 2), fock_state(0, 2)]), [0])
    np.testing.assert_allclose(rho.matrix, [[1, 0], [0, 0]])
    bell = PureState((2, 2), np.array([1, 0, 0, 1]) / math.sqrt(2))
    np.testing.assert_allclose(partial_trace(bell, [0]).matrix, np.eye(2) / 2)
    with pytest.raises(ValueError):
        partial_trace(bell, [])


def test_tmsv_reduced_state_is_thermal():
    from rotsym.dense import tmsv
    from rotsym.params import SqueezeParam

    r = 0.5
    rho = partial_trace(tmsv(SqueezeParam(r), TruncationConfig(40)), [0])
    n = np.arange(41)
    np.testing.assert_allclose(np.diag(rho.matrix).real, np.tanh(r) ** (2 * n) / np.cosh(r) ** 2, atol=1e-14)
    assert abs(np.dot(n, np.diag(rho.matrix).real) - math.sinh(r) ** 2) < 1e-10


def test_partial_trace_of_density_matches_pure():
    rng = np.random.default_rng(3)
    v = rng.normal(size=24) + 1j * rng.normal(size=24)
    s = PureState((2, 3, 4), v / np.linalg.norm(v))
    full = DensityOperator(np.outer(s.amplitudes, s.amplitudes.conj()), (2, 3, 4))
    for keep in ([0], [1], [2], [0, 2], [1, 2]):
        np.testing.assert_allclose(partial_trace(full, keep).matrix, partial_trace(s, keep).matrix, atol=1e-12)
    np.testing.assert_allclose(partial_trace(full, [0, 1, 2]).matrix, full.matrix)


def test_record_round_trip():
    s = PureState((2, 2), np.array([0.6, 0.8j, 0, 0]))
    t = PureState.from_record(s.to_record())
    np.testing.assert_array_equal(s.amplitudes, t.amplitudes)
    assert t.mode_dims == (2, 2)


def test_state_validation():
    with pytest.raises(ValueError):
        PureState((2, 2), np.ones(3))
    with pytest.raises(ValueError):
        DensityOperator(np.array([[1, 1], [0, 0]]))


def test_truncation_health_flags_top_levels():
    s = PureState((4,), np.array([0, 0, 0, 1.0]))
    assert truncation_health(s) == 1.0
    assert truncation_health(fock_state(0, 4)) == 0.0


@settings(max_examples=30, deadline=None)
@given(
    theta1=st.floats(0, math.pi / 2),
    theta2=st.floats(0, math.pi / 2),
    seed=st.integers(0, 2**31),
)
def test_disjoint_pairs_commute_and_preserve_norm(theta1, theta2, seed):
    rng = np.random.default_rng(seed)
    d = 4
    # keep total photons per pair below the cutoff so no block is clipped
    v = np.zeros((d,) * 4, complex)
    for idx in np.ndindex(*(d,) * 4):
        if idx[0] + idx[1] < d and idx[2] + idx[3] < d:
            v[idx] = rng.normal() + 1j * rng.normal()
    s = PureState((d,) * 4, (v / np.linalg.norm(v)).reshape(-1))
    u, w = beamsplitter(theta1, d), beamsplitter(theta2, d)
    one = apply_two_mode_unitary(apply_two_mode_unitary(s, u, (0, 1)), w, (2, 3))
    two = apply_two_mode_unitary(apply_two_mode_unitary(s, w, (2, 3)), u, (0, 1))
    np.testing.assert_allclose(one.amplitudes, two.amplitudes, atol=1e-12)
    assert abs(one.norm() - 1) < 1e-10
