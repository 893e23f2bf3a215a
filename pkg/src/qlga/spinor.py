"""Discretized 4-spinor wave function on a periodic rectangular lattice.

Amplitudes are stored as a complex128 array of shape ``(Lx, Ly, Lz, 4)``.
Sites are numbered row-major over ``(x, y, z)``::

    site = (x * Ly + y) * Lz + z

and component ``c`` of site ``s`` has flat index ``4 * s + c``.  Components
0, 1, 2, 3 are the (alpha, beta, mu, nu) amplitudes.  A 1D lattice is
``(1, 1, L)``.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence, Union

import numpy as np

N_COMPONENTS = 4
AXES = ("x", "y", "z")


class Ordering(enum.Enum):
    """Scaling between time step and lattice spacing."""

    RELATIVISTIC = "relativistic"   # dt = dr / c
    DIFFUSIVE = "diffusive"         # dt = eps * dr / c


class SmallParameterError(ValueError):
    """Raised when epsilon leaves the small-parameter regime 0 < eps < 1."""


def _as_dims(dims) -> tuple[int, int, int]:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ValueError(f"dims must be three positive integers, got {dims!r}")
    return dims


@dataclass(frozen=True)
class LatticeParams:
    """Grid and scaling parameters for one lattice-gas run.

    Use :meth:`create` rather than the raw constructor; it derives
    ``delta_t`` and ``mass_angle`` from the ordering.  ``mass_angle`` is
    always ``m c^2 dt / hbar``: equal to ``epsilon`` under relativistic
    ordering and to ``epsilon**2`` under diffusive ordering when epsilon
    takes its default value ``m c dr / hbar``.
    """

    dims: tuple[int, int, int]
    delta_r: float
    epsilon: float
    delta_t: float
    ordering: Ordering
    mass_angle: float
    mass: float = 0.0
    c: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dims", _as_dims(self.dims))
        for name in ("delta_r", "epsilon", "delta_t", "mass_angle", "mass", "c", "hbar"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.delta_r <= 0 or self.c <= 0 or self.hbar <= 0:
            raise ValueError("delta_r, c and hbar must be positive")
        if self.epsilon >= 1 or self.epsilon < 0:
            raise SmallParameterError(f"epsilon={self.epsilon} outside [0, 1)")
        if self.ordering is Ordering.DIFFUSIVE:
            if self.epsilon == 0:
                raise SmallParameterError("diffusive ordering needs epsilon > 0")
            expected_dt = self.epsilon * self.delta_r / self.c
        else:
            expected_dt = self.delta_r / self.c
        if not math.isclose(self.delta_t, expected_dt, rel_tol=1e-12):
            raise ValueError(f"delta_t={self.delta_t} inconsistent with {self.ordering.value} ordering")
        expected_angle = self.mass * self.c**2 * self.delta_t / self.hbar
        if not math.isclose(self.mass_angle, expected_angle, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("mass_angle must equal m c^2 dt / hbar")

    @classmethod
    def create(cls, dims, delta_r: float, mass: float = 0.0,
               ordering: Ordering = Ordering.RELATIVISTIC, epsilon: float | None = None,
               c: float = 1.0, hbar: float = 1.0) -> "LatticeParams":
        ordering = Ordering(ordering)
        if epsilon is None:
            epsilon = abs(mass) * c * delta_r / hbar
        if ordering is Ordering.DIFFUSIVE:
            delta_t = epsilon * delta_r / c
        else:
            delta_t = delta_r / c
        return cls(dims=dims, delta_r=float(delta_r), epsilon=float(epsilon),
                   delta_t=float(delta_t), ordering=ordering,
                   mass_angle=float(mass * c**2 * delta_t / hbar), mass=float(mass),
                   c=float(c), hbar=float(hbar))

    @property
    def interleave_angle(self) -> float:
        return self.epsilon / 2


@dataclass
class SpinorField:
    """Complex 4-component amplitude field; ``data`` has shape (Lx, Ly, Lz, 4)."""

    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.complex128)
        if data.ndim != 4 or data.shape[-1] != N_COMPONENTS:
            raise ValueError(f"expected shape (Lx, Ly, Lz, 4), got {data.shape}")
        _as_dims(data.shape[:3])
        if not np.all(np.isfinite(data)):
            raise ValueError("field contains non-finite amplitudes")
        self.data = data

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(self.data.shape[:3])

    @property
    def n_sites(self) -> int:
        return self.data.shape[0] * self.data.shape[1] * self.data.shape[2]

    def flat(self) -> np.ndarray:
        """(site, component) view of the amplitudes."""
        return self.data.reshape(-1, N_COMPONENTS)

    def copy(self) -> "SpinorField":
        return SpinorField(self.data.copy())

    def site_index(self, x: int, y: int, z: int) -> int:
        return site_index(self.dims, (x, y, z))

    def __eq__(self, other):
        if not isinstance(other, SpinorField):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)


def site_index(dims, coords) -> int:
    lx, ly, lz = dims
    x, y, z = coords
    if not (0 <= x < lx and 0 <= y < ly and 0 <= z < lz):
        raise IndexError(f"site {coords} outside lattice {dims}")
    return (x * ly + y) * lz + z


def site_coords(dims, index: int) -> tuple[int, int, int]:
    lx, ly, lz = dims
    if not 0 <= index < lx * ly * lz:
        raise IndexError(f"site index {index} outside lattice {dims}")
    x, rem = divmod(index, ly * lz)
    y, z = divmod(rem, lz)
    return x, y, z


# -- initial conditions ----------------------------------------------------

@dataclass(frozen=True)
class Zero:
    pass


@dataclass(frozen=True)
class UnitComponent:
    site: Union[int, tuple]
    component: int


@dataclass(frozen=True)
class PlaneWave:
    """exp(i k.r) times a fixed polarization; ``k`` in radians per site."""

    k: Union[float, Sequence[float]]
    polarization: Sequence[complex] = (1, 0, 0, 0)


@dataclass(frozen=True)
class GaussianPacket:
    """Periodic Gaussian envelope exp(-|r - r0|^2 / (2 w^2)) exp(i k.r).

    ``center`` and ``width`` are in lattice sites, ``k`` in radians per site.
    Scalars apply to every axis of extent > 1.
    """

    center: Union[float, Sequence[float]]
    width: Union[float, Sequence[float]]
    k: Union[float, Sequence[float]] = 0.0
    polarization: Sequence[complex] = (1, 0, 0, 0)


Initializer = Union[Zero, UnitComponent, PlaneWave, GaussianPacket]


def _per_axis(value, dims) -> np.ndarray:
    if np.ndim(value) == 0:
        return np.array([float(value) if d > 1 else 0.0 for d in dims])
    value = np.asarray(value, dtype=float)
    if value.shape != (3,):
        raise ValueError("per-axis values need exactly three entries")
    return value


def _polarization(pol) -> np.ndarray:
    pol = np.asarray(pol, dtype=np.complex128)
    if pol.shape != (N_COMPONENTS,):
        raise ValueError("polarization needs four components")
    return pol


def _coordinates(dims):
    return np.meshgrid(*(np.arange(d, dtype=float) for d in dims), indexing="ij")


def new_field(dims, initializer: Initializer = Zero()) -> SpinorField:
    """Build a field from an initializer, normalized to total norm 1 (except Zero)."""
    dims = _as_dims(dims)
    data = np.zeros(dims + (N_COMPONENTS,), dtype=np.complex128)
    if isinstance(initializer, Zero):
        return SpinorField(data)
    if isinstance(initializer, UnitComponent):
        site = initializer.site
        coords = site_coords(dims, site) if np.ndim(site) == 0 else tuple(site)
        site_index(dims, coords)
        if not 0 <= initializer.component < N_COMPONENTS:
            raise ValueError("component must be 0..3")
        data[coords + (initializer.component,)] = 1.0
    elif isinstance(initializer, PlaneWave):
        k = _per_axis(initializer.k, dims)
        r = _coordinates(dims)
        phase = np.exp(1j * sum(ki * ri for ki, ri in zip(k, r)))
        data[...] = phase[..., None] * _polarization(initializer.polarization)
    elif isinstance(initializer, GaussianPacket):
        width = _per_axis(initializer.width, dims)
        if np.any(width[np.array(dims) > 1] <= 0):
            raise ValueError("Gaussian width must be positive")
        center = _per_axis(initializer.center, dims)
        k = _per_axis(initializer.k, dims)
        envelope = np.zeros(dims)
        phase = np.zeros(dims)
        for axis, r in enumerate(_coordinates(dims)):
            if dims[axis] == 1:
                continue
            n = dims[axis]
            d = np.mod(r - center[axis] + n / 2, n) - n / 2   # minimum image
            envelope += d**2 / (2 * width[axis] ** 2)
            phase += k[axis] * r
        data[...] = (np.exp(-envelope + 1j * phase))[..., None] * _polarization(initializer.polarization)
    else:
        raise TypeError(f"unknown initializer {initializer!r}")
    norm = total_norm(SpinorField(data))
    if norm == 0:
        raise ValueError("initializer produced a zero-norm field")
    return SpinorField(data / math.sqrt(norm))


# -- observables -------------------------------------------------------------

def total_norm(field: SpinorField) -> float:
    return float(np.sum(field.data.real**2 + field.data.imag**2))


def probability_density(field: SpinorField, site=None):
    """Sum over components of |psi_c|^2.

    With ``site=None`` the whole density is returned as a flat array in site
    order; otherwise ``site`` is a flat index or an (x, y, z) tuple.
    """
    rho = np.sum(field.data.real**2 + field.data.imag**2, axis=-1)
    if site is None:
        return rho.reshape(-1)
    coords = site_coords(field.dims, site) if np.ndim(site) == 0 else tuple(site)
    site_index(field.dims, coords)
    return float(rho[coords])


def l2_density_error(field: SpinorField, reference: SpinorField) -> float:
    """sqrt(mean over sites of (rho - rho_ref)^2)."""
    if field.dims != reference.dims:
        raise ValueError(f"dims mismatch: {field.dims} vs {reference.dims}")
    diff = probability_density(field) - probability_density(reference)
    return float(np.sqrt(np.mean(diff**2)))


# -- snapshots ---------------------------------------------------------------

MAGIC = b"QLGA"
VERSION = 1
PRECISION_F64 = 1
_HEADER = struct.Struct("<4sIIIIIB")
MAX_SITES = 1 << 28


class SnapshotError(ValueError):
    pass


class UnsupportedVersionError(SnapshotError):
    pass


def _open(target, mode):
    if isinstance(target, (str, Path)):
        return open(target, mode), True
    return target, False


def encode_snapshot(field: SpinorField) -> bytes:
    header = _HEADER.pack(MAGIC, VERSION, *field.dims, N_COMPONENTS, PRECISION_F64)
    return header + field.data.astype("<c16", copy=False).tobytes()


def decode_snapshot(blob: bytes) -> SpinorField:
    if len(blob) < _HEADER.size:
        raise SnapshotError("truncated header")
    magic, version, lx, ly, lz, ncomp, precision = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported snapshot version {version}")
    if ncomp != N_COMPONENTS or precision != PRECISION_F64:
        raise SnapshotError("unsupported component count or precision")
    if min(lx, ly, lz) < 1 or lx * ly * lz > MAX_SITES:
        raise SnapshotError(f"dims overflow: {(lx, ly, lz)}")
    expected = lx * ly * lz * N_COMPONENTS * 16
    payload = blob[_HEADER.size:]
    if len(payload) < expected:
        raise SnapshotError(f"truncated payload: {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise SnapshotError("trailing bytes after payload")
    data = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    return SpinorField(data.reshape(lx, ly, lz, N_COMPONENTS))


def write_snapshot(field: SpinorField, sink: Union[str, Path, BinaryIO]) -> None:
    fh, owned = _open(sink, "wb")
    try:
        fh.write(encode_snapshot(field))
    finally:
        if owned:
            fh.close()


def read_snapshot(source: Union[str, Path, BinaryIO]) -> SpinorField:
    fh, owned = _open(source, "rb")
    try:
        return decode_snapshot(fh.read())
    finally:
        if owned:
            fh.close()
