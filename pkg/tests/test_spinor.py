import io
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qlga.spinor import (
    GaussianPacket,
    LatticeParams,
    Ordering,
    PlaneWave,
    SmallParameterError,
    SnapshotError,
    SpinorField,
    UnitComponent,
    UnsupportedVersionError,
    Zero,
    decode_snapshot,
    encode_snapshot,
    l2_density_error,
    new_field,
    probability_density,
    read_snapshot,
    site_coords,
    site_index,
    total_norm,
    write_snapshot,
)


def random_field(dims, seed=0):
    rng = np.random.default_rng(seed)
    shape = tuple(dims) + (4,)
    return SpinorField(rng.normal(size=shape) + 1j * rng.normal(size=shape))


# -- lattice parameters ----------------------------------------------------------

def test_relativistic_params():
    p = LatticeParams.create((1, 1, 64), 1 / 64, mass=1.0)
    assert p.epsilon == pytest.approx(1 / 64)
    assert p.delta_t == pytest.approx(1 / 64)
    assert p.mass_angle == pytest.approx(p.epsilon)


def test_diffusive_params():
    p = LatticeParams.create((1, 1, 64), 1 / 64, mass=1.0, ordering=Ordering.DIFFUSIVE)
    assert p.delta_t == pytest.approx(p.epsilon / 64)
    # mass angle is m c^2 dt / hbar, which is eps^2 for the default eps
    assert p.mass_angle == pytest.approx(p.epsilon**2)
    assert p.interleave_angle == pytest.approx(p.epsilon / 2)


@pytest.mark.parametrize("eps", [1.0, 1.5, -0.1])
def test_epsilon_out_of_range(eps):
    with pytest.raises(SmallParameterError):
        LatticeParams.create((1, 1, 8), 0.1, mass=1.0, epsilon=eps)


def test_diffusive_rejects_zero_epsilon():
    with pytest.raises(SmallParameterError):
        LatticeParams.create((1, 1, 8), 0.1, mass=0.0, ordering=Ordering.DIFFUSIVE)


def test_inconsistent_params_rejected():
    with pytest.raises(ValueError):
        LatticeParams((1, 1, 8), 0.1, 0.1, 0.5, Ordering.RELATIVISTIC, 0.1, mass=1.0)


# -- geometry ----------------------------------------------------------------------

@given(st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5)), st.data())
def test_site_index_bijection(dims, data):
    n = dims[0] * dims[1] * dims[2]
    idx = data.draw(st.integers(0, n - 1))
    assert site_index(dims, site_coords(dims, idx)) == idx


def test_site_index_row_major():
    assert site_index((2, 3, 4), (1, 2, 3)) == (1 * 3 + 2) * 4 + 3
    with pytest.raises(IndexError):
        site_index((2, 3, 4), (2, 0, 0))


def test_field_rejects_bad_shape_and_nan():
    with pytest.raises(ValueError):
        SpinorField(np.zeros((4, 4)))
    data = np.zeros((1, 1, 4, 4), dtype=complex)
    data[0, 0, 1, 2] = np.nan
    with pytest.raises(ValueError):
        SpinorField(data)


# -- initializers -------------------------------------------------------------------

def test_unit_component():
    f = new_field((1, 1, 8), UnitComponent(3, 0))
    assert total_norm(f) == 1.0
    assert np.count_nonzero(f.data) == 1
    assert f.data[0, 0, 3, 0] == 1.0


def test_plane_wave_k0_uniform():
    f = new_field((1, 1, 8), PlaneWave(0.0, (1, 0, 0, 0)))
    np.testing.assert_allclose(f.data[..., 0], 1 / math.sqrt(8), rtol=1e-15)
    assert np.all(f.data[..., 1:] == 0)


def test_gaussian_normalized():
    f = new_field((1, 1, 64), GaussianPacket(32, 8, 2 * math.pi * 4 / 64, (1, 0, 0, 0)))
    assert abs(total_norm(f) - 1) <= 1e-12
    rho = probability_density(f)
    assert rho.argmax() == 32


def test_gaussian_periodic_image():
    # a packet centred on the boundary is symmetric about it
    f = new_field((1, 1, 32), GaussianPacket(0, 3))
    rho = probability_density(f)
    np.testing.assert_allclose(rho[1:8], rho[-1:-8:-1], rtol=1e-13)


def test_zero_field_and_zero_norm_rejection():
    assert total_norm(new_field((1, 1, 4), Zero())) == 0
    with pytest.raises(ValueError):
        new_field((1, 1, 4), PlaneWave(0.0, (0, 0, 0, 0)))
    with pytest.raises(ValueError):
        new_field((1, 1, 4), GaussianPacket(0, 0))


# -- observables ---------------------------------------------------------------------

def test_density_unit_component():
    f = new_field((1, 1, 8), UnitComponent(5, 2))
    assert probability_density(f, 5) == 1.0
    assert probability_density(f, 4) == 0.0
    assert probability_density(f, (0, 0, 5)) == 1.0


def test_density_plane_wave():
    f = new_field((1, 1, 8), PlaneWave(2 * math.pi / 8, (1, 1j, 0, 0)))
    np.testing.assert_allclose(probability_density(f), 1 / 8, rtol=1e-14)


@given(st.integers(0, 1000))
@settings(max_examples=25)
def test_density_sums_to_norm(seed):
    f = random_field((2, 3, 4), seed)
    assert abs(probability_density(f).sum() - total_norm(f)) <= 1e-13 * total_norm(f)


def test_l2_error_cases():
    f = random_field((1, 1, 16))
    assert l2_density_error(f, f) == 0.0
    a = SpinorField(np.ones((1, 1, 16, 4)))
    b = SpinorField(np.full((1, 1, 16, 4), math.sqrt(1.5)))
    # densities 4 and 6 everywhere
    assert l2_density_error(a, b) == pytest.approx(2.0, rel=1e-14)
    with pytest.raises(ValueError):
        l2_density_error(f, random_field((1, 1, 8)))


# -- snapshots ------------------------------------------------------------------------

@pytest.mark.parametrize("dims", [(1, 1, 1), (1, 1, 16), (3, 4, 5)])
def test_snapshot_round_trip(dims, tmp_path):
    f = random_field(dims, 7)
    path = tmp_path / "f.qlga"
    write_snapshot(f, path)
    g = read_snapshot(path)
    assert g.data.tobytes() == f.data.tobytes()
    buf = io.BytesIO()
    write_snapshot(f, buf)
    buf.seek(0)
    assert read_snapshot(buf) == f


def test_snapshot_header_layout():
    blob = encode_snapshot(random_field((2, 3, 4)))
    assert blob[:4] == b"QLGA"
    assert struct.unpack_from("<IIIIIB", blob, 4) == (1, 2, 3, 4, 4, 1)
    assert len(blob) == 4 + 5 * 4 + 1 + 24 * 4 * 16


def test_snapshot_errors():
    blob = bytearray(encode_snapshot(random_field((1, 1, 4))))
    with pytest.raises(SnapshotError):
        decode_snapshot(b"XLGA" + bytes(blob[4:]))
    bumped = bytearray(blob)
    struct.pack_into("<I", bumped, 4, 2)
    with pytest.raises(UnsupportedVersionError):
        decode_snapshot(bytes(bumped))
    with pytest.raises(SnapshotError):
        decode_snapshot(bytes(blob[:-1]))
    with pytest.raises(SnapshotError):
        decode_snapshot(bytes(blob) + b"\0")
    with pytest.raises(SnapshotError):
        decode_snapshot(bytes(blob[:10]))
    huge = bytearray(blob)
    struct.pack_into("<III", huge, 8, 1 << 12, 1 << 12, 1 << 12)
    with pytest.raises(SnapshotError, match="overflow"):
        decode_snapshot(bytes(huge))
