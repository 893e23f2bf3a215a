import math

import numpy as np
import pytest
import scipy.linalg as sl
from hypothesis import given, settings, strategies as st

from qlga.operators import (
    Collision,
    CollisionKind,
    OpCounter,
    Pairing,
    StreamSpec,
    adjoint,
    apply_collision,
    apply_displacement,
    apply_sequence,
    collision_matrix,
    composite_stream,
    composite_stream_ops,
    dense_operator,
    displacement_ops,
    dual_displacement_ops,
    stream,
)
from qlga.oracle import SIGMA_0 as I2, SIGMA_X as SX, SIGMA_Y as SY, SIGMA_Z as SZ
from qlga.spinor import PlaneWave, SpinorField, UnitComponent, new_field, total_norm

L = 8
DIMS = {"x": (L, 1, 1), "y": (1, L, 1), "z": (1, 1, L)}
SHIFT = np.roll(np.eye(L), 1, axis=1)           # (T psi)_j = psi_{j+1}
D1 = (SHIFT - SHIFT.T) / 2                       # central difference
D2 = SHIFT + SHIFT.T - 2 * np.eye(L)             # second difference
TRANSPORT = {"x": np.kron(SZ, SX), "y": np.kron(SZ, SY), "z": np.kron(SY, I2)}
DIFFUSION = {"x": 0.5j * np.kron(I2, SY), "y": -0.5j * np.kron(I2, SX), "z": 0.5j * np.kron(SX, I2)}


def random_field(dims, seed=0):
    rng = np.random.default_rng(seed)
    shape = tuple(dims) + (4,)
    return SpinorField(rng.normal(size=shape) + 1j * rng.normal(size=shape))


def mode_exponential(A, n=L):
    """Dense exp(A (x) d) with d generating the unit pull shift, built mode by mode."""
    k = 2 * np.pi * np.arange(n) / n
    modes = np.exp(1j * np.outer(np.arange(n), k)) / math.sqrt(n)   # column j is exp(i k_j x)
    blocks = np.zeros((4 * n, 4 * n), dtype=complex)
    for j, kj in enumerate(k):
        blocks[4 * j:4 * j + 4, 4 * j:4 * j + 4] = sl.expm(1j * kj * A)
    F = np.kron(modes, np.eye(4))
    return F @ blocks @ F.conj().T


def unitarity_error(U):
    return np.abs(U.conj().T @ U - np.eye(U.shape[0])).max()


# -- collisions -----------------------------------------------------------------

@given(st.sampled_from(list(CollisionKind)), st.floats(-10, 10))
def test_collision_unitary(kind, theta):
    m = collision_matrix(kind, theta)
    assert unitarity_error(m) <= 1e-14


@pytest.mark.parametrize("kind", list(CollisionKind))
def test_collision_identity_at_zero(kind):
    assert np.array_equal(collision_matrix(kind, 0.0), np.eye(4))


def test_collision_matrices_match_tensor_forms():
    t = 0.37
    assert np.allclose(collision_matrix(CollisionKind.X1, t), np.kron(sl.expm(1j * t * SX), I2))
    assert np.allclose(collision_matrix(CollisionKind.X2, t), np.kron(I2, sl.expm(1j * t * SX)))
    assert np.allclose(collision_matrix(CollisionKind.Y2, t), np.kron(I2, sl.expm(1j * t * SY)))


def test_x1_quarter_turn():
    f = new_field((1, 1, 4), UnitComponent(2, 0))
    g = apply_collision(f, CollisionKind.X1, math.pi / 2)
    assert abs(g.data[0, 0, 2, 2] - 1j) < 1e-15
    assert abs(g.data[0, 0, 2, 0]) < 1e-15


def test_y2_sign_layout():
    f = new_field((1, 1, 4), UnitComponent(1, 0))
    g = apply_collision(f, CollisionKind.Y2, math.pi / 4)
    assert g.data[0, 0, 1, 0] == pytest.approx(math.cos(math.pi / 4))
    assert g.data[0, 0, 1, 1] == pytest.approx(-math.sin(math.pi / 4))


def test_y2_zero_is_identity():
    f = random_field((2, 2, 2))
    assert apply_collision(f, CollisionKind.Y2, 0.0) == f


def test_collision_rejects_nan_angle():
    with pytest.raises(ValueError):
        apply_collision(random_field((1, 1, 2)), CollisionKind.X1, float("nan"))


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_collision_threads_bitwise(threads):
    f = random_field((5, 6, 7), 3)
    for kind in CollisionKind:
        serial = apply_collision(f, kind, 0.123)
        parallel = apply_collision(f, kind, 0.123, threads=threads)
        assert serial.data.tobytes() == parallel.data.tobytes()


# -- streaming ----------------------------------------------------------------------

def test_stream_pull_convention():
    f = new_field((8, 1, 1), UnitComponent((5, 0, 0), 0))
    g = composite_stream(f, "x")
    assert g.data[4, 0, 0, 0] == 1.0
    h = composite_stream(new_field((8, 1, 1), UnitComponent((5, 0, 0), 1)), "x")
    assert h.data[6, 0, 0, 1] == 1.0


@given(st.sampled_from(["x", "y", "z"]), st.sampled_from([1, -1]),
       st.sets(st.integers(0, 3)), st.integers(0, 100))
@settings(max_examples=30)
def test_stream_then_reverse_is_identity(axis, direction, subset, seed):
    f = random_field((3, 4, 5), seed)
    spec = StreamSpec(axis, direction, tuple(subset))
    assert stream(stream(f, spec), spec.reversed()).data.tobytes() == f.data.tobytes()


def test_stream_uniform_invariant():
    f = new_field((4, 4, 4), PlaneWave(0.0, (1, 2, 3, 4)))
    for axis in "xyz":
        assert composite_stream(f, axis) == f


def test_stream_degenerate_axis_rejected():
    f = random_field((1, 1, 8))
    with pytest.raises(ValueError):
        stream(f, StreamSpec("x", 1, (0,)))
    # empty subsets are a no-op even on degenerate axes
    assert stream(f, StreamSpec("x", 1, ())) == f


def test_stream_spec_validation():
    with pytest.raises(ValueError):
        StreamSpec("w", 1, (0,))
    with pytest.raises(ValueError):
        StreamSpec("x", 2, (0,))
    with pytest.raises(ValueError):
        StreamSpec("x", 1, (4,))


def test_composite_stream_3d_diagonal():
    dims = (4, 4, 4)
    f = new_field(dims, UnitComponent((1, 2, 3), 0))
    g = f
    for axis in "xyz":
        g = composite_stream(g, axis)
    # component 0 pulls from +axis: the amplitude moves one step down each axis
    assert g.data[0, 1, 2, 0] == 1.0
    f1 = new_field(dims, UnitComponent((1, 2, 3), 2))
    g1 = f1
    for axis in "xyz":
        g1 = composite_stream(g1, axis)
    assert g1.data[2, 3, 0, 2] == 1.0


def test_composite_stream_period_two():
    f = random_field((2, 3, 3))
    assert composite_stream(composite_stream(f, "x"), "x") == f


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_composite_stream_full_cycle_bitwise(axis):
    dims = (6, 5, 4)
    f = random_field(dims, 9)
    g = f
    for _ in range(dims["xyz".index(axis)]):
        g = composite_stream(g, axis)
    assert g.data.tobytes() == f.data.tobytes()


def test_counter_counts_component_streams():
    counter = OpCounter()
    apply_sequence(random_field((1, 1, 4)), composite_stream_ops("z")
                   + [Collision(CollisionKind.X1, 0.1)], counter=counter)
    assert (counter.collisions, counter.component_streams) == (1, 4)


# -- dense operators and the diagonalization relations ------------------------------------

def test_dense_stream_inverse():
    ops = composite_stream_ops("x")
    d = dense_operator(ops, DIMS["x"]) @ dense_operator(adjoint(ops), DIMS["x"])
    assert np.array_equal(d, np.eye(4 * L))


def test_dense_matches_apply():
    ops = displacement_ops("z", 0.2) + [Collision(CollisionKind.Y2, 0.3)]
    f = random_field(DIMS["z"], 4)
    np.testing.assert_allclose(dense_operator(ops, DIMS["z"]) @ f.data.reshape(-1),
                               apply_sequence(f, ops).data.reshape(-1), atol=1e-14)


def test_dense_size_cap():
    with pytest.raises(ValueError):
        dense_operator([], (8, 8, 9))


def test_stream_is_exponential_of_sz_sz():
    U = dense_operator(composite_stream_ops("z"), DIMS["z"])
    assert np.abs(U - mode_exponential(np.kron(SZ, SZ))).max() <= 1e-13


def test_conjugated_stream_x():
    # Y(pi/4) S_x Y^+(pi/4), rightmost acting first
    q = math.pi / 4
    ops = [Collision(CollisionKind.Y2, -q)] + composite_stream_ops("x") + [Collision(CollisionKind.Y2, q)]
    U = dense_operator(ops, DIMS["x"])
    assert np.abs(U - mode_exponential(-np.kron(SZ, SX))).max() <= 1e-13


def test_conjugated_stream_y():
    # X2^+(pi/4) S_y X2(pi/4)
    q = math.pi / 4
    ops = [Collision(CollisionKind.X2, q)] + composite_stream_ops("y") + [Collision(CollisionKind.X2, -q)]
    U = dense_operator(ops, DIMS["y"])
    assert np.abs(U - mode_exponential(-np.kron(SZ, SY))).max() <= 1e-13


@pytest.mark.parametrize("eps_hat", [1e-3, 1e-4])
def test_similarity_two_by_two(eps_hat):
    lhs = sl.expm(-1j * math.pi / 4 * SX) @ sl.expm(eps_hat * SZ) @ sl.expm(1j * math.pi / 4 * SX)
    assert np.abs(lhs - sl.expm(-eps_hat * SY)).max() <= 1e-15
    # literal sign choice is off at first order
    assert np.abs(lhs - sl.expm(eps_hat * SY)).max() == pytest.approx(2 * eps_hat, rel=1e-5)


@pytest.mark.parametrize("eps_hat", [1e-3, 1e-4])
def test_similarity_four_spinor(eps_hat):
    r = np.kron(I2, sl.expm(-1j * math.pi / 4 * SX))
    lhs = r @ sl.expm(eps_hat * np.kron(SZ, SZ)) @ r.conj().T
    assert np.abs(lhs - sl.expm(-eps_hat * np.kron(SZ, SY))).max() <= 1e-15
    ry = np.kron(I2, sl.expm(1j * math.pi / 4 * SY))
    lhs = ry @ sl.expm(eps_hat * np.kron(SZ, SZ)) @ ry.conj().T
    assert np.abs(lhs - sl.expm(-eps_hat * np.kron(SZ, SX))).max() <= 1e-15


# -- interleaved displacements --------------------------------------------------------------

@pytest.mark.parametrize("pairing", list(Pairing))
@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_displacement_unitary(axis, pairing):
    for ops in (displacement_ops(axis, 0.3, pairing), dual_displacement_ops(axis, 0.3, pairing)):
        assert unitarity_error(dense_operator(ops, DIMS[axis])) <= 1e-12


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_displacement_small_epsilon(axis):
    f = random_field(DIMS[axis], 2)
    g = apply_displacement(f, axis, 1e-8)
    assert np.abs(g.data - f.data).max() <= 1e-7


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_displacement_uniform_field(axis):
    f = new_field(DIMS[axis], PlaneWave(0.0, (0.3, 1j, -0.5, 2)))
    g = apply_displacement(f, axis, 0.4)
    assert np.abs(g.data - f.data).max() <= 1e-15


def test_displacement_epsilon_range():
    with pytest.raises(ValueError):
        apply_displacement(random_field(DIMS["x"]), "x", 1.0)


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_displacement_generator_second_order(axis):
    """E_axis = exp(eps G) + O(eps^2) with G = A D1 + C D2."""
    G = np.kron(D1, TRANSPORT[axis]) + np.kron(D2, DIFFUSION[axis])
    assert np.abs(G + G.conj().T).max() == 0
    res = [np.abs(dense_operator(displacement_ops(axis, e), DIMS[axis]) - sl.expm(e * G)).max()
           for e in (1e-2, 1e-3)]
    assert res[1] < 3e-7
    assert 90 < res[0] / res[1] < 110


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_displacement_central_difference_only_is_first_order(axis):
    G = np.kron(D1, TRANSPORT[axis])
    res = [np.abs(dense_operator(displacement_ops(axis, e), DIMS[axis]) - sl.expm(e * G)).max()
           for e in (1e-2, 1e-3)]
    assert 9 < res[0] / res[1] < 11


def test_printed_pairing_has_wrong_generators():
    eps = 1e-3
    # printed z pairing: no transport at first order
    U = dense_operator(displacement_ops("z", eps, Pairing.PRINTED), DIMS["z"])
    block = ((U - np.eye(4 * L)) / eps).reshape(L, 4, L, 4)
    assert np.abs(block[0, :, 1, :] - block[1, :, 0, :]).max() < 1e-2
    # printed x pairing: transport matrix is 1 (x) sx, not a Dirac matrix
    U = dense_operator(displacement_ops("x", eps, Pairing.PRINTED), DIMS["x"])
    block = ((U - np.eye(4 * L)) / eps).reshape(L, 4, L, 4)
    odd = (block[0, :, 1, :] - block[1, :, 0, :])      # antisymmetric part picks out D1
    assert np.abs(odd - np.kron(I2, SX)).max() < 1e-2


def test_dual_displacement_structure():
    eps = 0.2
    fwd = displacement_ops("z", eps)
    dual = dual_displacement_ops("z", eps)
    assert len(dual) == len(fwd)
    for a, b in zip(fwd, dual):
        if isinstance(a, Collision):
            assert b == Collision(a.kind, -a.theta)
        else:
            assert b == a.reversed()


def symbol(ops, axis, kappa):
    """4x4 matrix an operator list applies to the Fourier mode exp(i kappa j) along ``axis``."""
    m = np.eye(4, dtype=complex)
    for op in ops:
        if isinstance(op, Collision):
            m = collision_matrix(op.kind, op.theta) @ m
        else:
            d = np.ones(4, dtype=complex)
            d[list(op.subset)] = np.exp(1j * kappa * op.direction)
            m = np.diag(d) @ m
    return m


@pytest.mark.parametrize("axis", ["x", "y", "z"])
def test_dual_pair_cancels_low_order_terms(axis):
    """log symbol of E~ E is 2 i eps kappa A up to terms of total order 4 in (eps, kappa)."""
    res = []
    for s in (1e-2, 5e-3):
        ops = displacement_ops(axis, s) + dual_displacement_ops(axis, s)
        res.append(np.abs(sl.logm(symbol(ops, axis, s)) - 2j * s * s * TRANSPORT[axis]).max())
    assert res[0] < 1e-8
    assert res[0] / res[1] > 12
    # a full adjoint in mirrored order keeps an eps^2 kappa term
    mirrored = displacement_ops(axis, 1e-2) + adjoint(displacement_ops(axis, 1e-2, reverse=True))
    full = np.abs(sl.logm(symbol(mirrored, axis, 1e-2)) - 2j * 1e-4 * TRANSPORT[axis]).max()
    assert full > 100 * res[0]


def test_checkerboard_coupling():
    U = dense_operator(displacement_ops("x", 0.1), DIMS["x"]).reshape(L, 4, L, 4)
    even_to_odd = max(np.abs(U[i, :, j, :]).max() for i in range(0, L, 2) for j in range(1, L, 2))
    assert even_to_odd > 0.01
    # the plain composite stream keeps the sublattices apart over two steps
    S = dense_operator(composite_stream_ops("x") * 2, DIMS["x"]).reshape(L, 4, L, 4)
    assert max(np.abs(S[i, :, j, :]).max() for i in range(0, L, 2) for j in range(1, L, 2)) == 0


@given(st.integers(0, 50), st.floats(0.01, 0.9))
@settings(max_examples=15, deadline=None)
def test_displacement_norm_preserved(seed, eps):
    f = random_field((3, 4, 5), seed)
    for axis in "xyz":
        g = apply_displacement(f, axis, eps)
        assert abs(total_norm(g) - total_norm(f)) <= 1e-12 * total_norm(f)


@pytest.mark.parametrize("theta", [0.0078125, -0.000244140625, 0.3, math.pi / 4, 1e-9, 2.5])
def test_unit_pair_is_normalized_and_close(theta):
    from fractions import Fraction
    from qlga.operators import unit_pair
    c, s = unit_pair(theta)
    assert abs(c - math.cos(theta)) == 0.0
    assert abs(s - math.sin(theta)) <= 1e-12 * abs(math.sin(theta))
    err = abs(float(Fraction(c) ** 2 + Fraction(s) ** 2 - 1))
    assert err <= 1.2e-16


def test_zero_angle_collision_is_bitwise_identity():
    data = np.array([[[[0.0, -0.0, 1.5, -0.0j]]]], dtype=np.complex128)
    out = apply_collision(SpinorField(data), CollisionKind.X1, -0.0)
    assert out.data.tobytes() == data.tobytes()
