"""Second-quantized simulation in fixed particle-number sectors.

The register holds Q = 4 * n_sites qubits; qubit ``4 * site + c`` is the
occupation of spinor component ``c`` at ``site`` (bit ``alpha`` of a
configuration integer).  Qubits are distinguishable modes: no fermionic
sign strings are applied.

Two-qubit gates act on an ordered pair (a, b) in the basis
``|q_a q_b> = |00>, |01>, |10>, |11>``.
"""
from __future__ import annotations

import enum
import itertools
import math
import struct
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Sequence

import numpy as np

from .operators import (
    unit_pair,
    Collision,
    CollisionKind,
    GlobalPhase,
    OpCounter,
    PAIRS,
    StreamSpec,
)
from .spinor import AXES, N_COMPONENTS, SpinorField, site_coords, site_index

MAX_PARTICLES = 3


class GateKind(enum.Enum):
    XHAT = "xhat"
    YHAT = "yhat"
    INTERCHANGE = "interchange"


@dataclass(frozen=True)
class TwoQubitGate:
    kind: GateKind
    a: int
    b: int
    theta: float = 0.0


def gate_matrix(kind: GateKind, theta: float = 0.0) -> np.ndarray:
    """4x4 matrix in the |q_a q_b> basis {00, 01, 10, 11}.

    XHAT and YHAT are the number-conserving collision gates; both send
    |11> to -|11>.  INTERCHANGE is the number-conserving swap.
    """
    kind = GateKind(kind)
    c, s = unit_pair(theta)
    m = np.zeros((4, 4), dtype=np.complex128)
    m[0, 0] = 1
    if kind is GateKind.INTERCHANGE:
        m[1, 2] = m[2, 1] = 1
        m[3, 3] = 1
        return m
    if kind is GateKind.XHAT:
        m[1:3, 1:3] = [[c, -1j * s], [-1j * s, c]]
    else:
        # a^+_a a_b moves |01> (b occupied) to |10>
        m[1:3, 1:3] = [[c, -s], [s, c]]
    m[3, 3] = -1
    return m


def sector_basis(Q: int, n: int) -> np.ndarray:
    """Sorted configuration integers of Q qubits with exactly n set bits."""
    if not 0 <= n <= min(Q, MAX_PARTICLES):
        raise ValueError(f"particle number must be 0..{MAX_PARTICLES}")
    if Q > 62:
        raise ValueError("Q > 62 qubits is not supported")
    configs = [sum(1 << i for i in bits) for bits in itertools.combinations(range(Q), n)]
    return np.array(sorted(configs), dtype=np.int64)


@dataclass
class FockState:
    dims: tuple
    n: int
    amplitudes: np.ndarray
    configs: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if self.configs is None:
            self.configs = sector_basis(self.Q, self.n)
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != self.configs.shape:
            raise ValueError(f"sector dimension is {self.configs.size}, got {self.amplitudes.shape}")

    @property
    def Q(self) -> int:
        return N_COMPONENTS * self.dims[0] * self.dims[1] * self.dims[2]

    @property
    def n_sites(self) -> int:
        return self.dims[0] * self.dims[1] * self.dims[2]

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def copy(self) -> "FockState":
        return FockState(self.dims, self.n, self.amplitudes.copy(), self.configs)

    @classmethod
    def from_occupations(cls, dims, qubits: Sequence[int]) -> "FockState":
        qubits = sorted(set(qubits))
        state = cls(dims, len(qubits), np.zeros(comb(4 * math.prod(dims), len(qubits))))
        target = sum(1 << q for q in qubits)
        state.amplitudes[np.searchsorted(state.configs, target)] = 1.0
        return state


def qubit_index(site: int, component: int) -> int:
    return N_COMPONENTS * site + component


def _gate_on_sector(configs, amps, matrix, a, b):
    bit_a, bit_b = configs >> a & 1, configs >> b & 1
    out = amps.copy()
    both = (bit_a == 1) & (bit_b == 1)
    out[both] = matrix[3, 3] * amps[both]
    only_b = np.nonzero((bit_a == 0) & (bit_b == 1))[0]          # |01>
    partner = np.searchsorted(configs, configs[only_b] ^ ((1 << a) | (1 << b)))  # |10>
    x01, x10 = amps[only_b], amps[partner]
    out[only_b] = matrix[1, 1] * x01 + matrix[1, 2] * x10
    out[partner] = matrix[2, 1] * x01 + matrix[2, 2] * x10
    return out


def apply_gate(state: FockState, gate: TwoQubitGate, counter: OpCounter | None = None) -> FockState:
    a, b = gate.a, gate.b
    if a == b or not (0 <= a < state.Q and 0 <= b < state.Q):
        raise ValueError(f"invalid qubit pair ({a}, {b}) for Q={state.Q}")
    amps = _gate_on_sector(state.configs, state.amplitudes, gate_matrix(gate.kind, gate.theta), a, b)
    if counter is not None:
        counter.gate_applications += 1
        if gate.kind is GateKind.INTERCHANGE:
            counter.interchanges += 1
    return FockState(state.dims, state.n, amps, state.configs)


# -- collisions and streaming -------------------------------------------------------

def collision_gates(dims, kind: CollisionKind, theta: float, sign: int = -1) -> list:
    """Gate list realizing the spinor collision exp(i theta sigma) at every site.

    XHAT(phi) acts on a one-particle pair as exp(-i phi sigma_x), so X kinds
    use phi = -theta (``sign=-1``); YHAT matches exp(i theta sigma_y) directly.
    """
    kind = CollisionKind(kind)
    n_sites = math.prod(dims)
    if kind is CollisionKind.Y2:
        gate_kind, angle = GateKind.YHAT, theta
    else:
        gate_kind, angle = GateKind.XHAT, sign * theta
    return [TwoQubitGate(gate_kind, qubit_index(s, a), qubit_index(s, b), angle)
            for s in range(n_sites) for a, b in PAIRS[kind]]


def sq_collision_step(state: FockState, which: CollisionKind, theta: float,
                      counter: OpCounter | None = None, sign: int = -1) -> FockState:
    """2 * n_sites gate applications realizing one collision operator."""
    for gate in collision_gates(state.dims, which, theta, sign):
        state = apply_gate(state, gate, counter)
    return state


def stream_gates(dims, axis: str, direction: int, component: int) -> list:
    """Interchange chain that pull-shifts one component lane along ``axis``.

    Each lattice line of length L uses L - 1 nearest-neighbour interchanges;
    sweeping in the pull direction makes the chain a cyclic shift, so no
    extra wraparound gate is needed.
    """
    axis_pos = AXES.index(axis)
    n = dims[axis_pos]
    if n == 1:
        raise ValueError(f"cannot stream along degenerate axis {axis!r}")
    others = [range(d) if i != axis_pos else [0] for i, d in enumerate(dims)]
    order = range(n - 1) if direction == 1 else range(n - 2, -1, -1)
    gates = []
    for base in itertools.product(*others):
        line = []
        for j in range(n):
            coords = list(base)
            coords[axis_pos] = j
            line.append(qubit_index(site_index(dims, coords), component))
        gates.extend(TwoQubitGate(GateKind.INTERCHANGE, line[j], line[j + 1]) for j in order)
    return gates


def sq_stream_step(state: FockState, axis: str, direction: int, component: int,
                   counter: OpCounter | None = None) -> FockState:
    for gate in stream_gates(state.dims, axis, direction, component):
        state = apply_gate(state, gate, counter)
    return state


def sq_apply_sequence(state: FockState, ops: Sequence, counter: OpCounter | None = None,
                      sign: int = -1) -> FockState:
    """Run a spinor operator sequence as gates (``sign`` is a test hook)."""
    for op in ops:
        if isinstance(op, Collision):
            state = sq_collision_step(state, op.kind, op.theta, counter, sign)
            if counter is not None:
                counter.collisions += 1
        elif isinstance(op, StreamSpec):
            for c in op.subset:
                state = sq_stream_step(state, op.axis, op.direction, c, counter)
            if counter is not None:
                counter.component_streams += len(op.subset)
        elif isinstance(op, GlobalPhase):
            state = FockState(state.dims, state.n,
                              state.amplitudes * complex(math.cos(op.angle), math.sin(op.angle)),
                              state.configs)
        else:
            raise TypeError(f"unknown operator {op!r}")
    return state


def stream_gate_counts(dims, axis: str) -> tuple[int, int]:
    """(applied, open-chain formula) interchanges for one component stream.

    ``applied`` counts every line of the lattice; the formula is (L - 1)^3
    in 3D and L - 1 on a 1D lattice.
    """
    axis_pos = AXES.index(axis)
    lines = math.prod(dims) // dims[axis_pos]
    applied = lines * (dims[axis_pos] - 1)
    active = [d for d in dims if d > 1]
    formula = math.prod(d - 1 for d in active)
    return applied, formula


# -- embedding and observables -----------------------------------------------------

def embed_one_particle(field: SpinorField) -> FockState:
    """Amplitude of psi_c(site) goes to the configuration with only qubit 4*site+c set."""
    return FockState(field.dims, 1, field.data.reshape(-1).copy())


def extract_one_particle(state: FockState) -> SpinorField:
    if state.n != 1:
        raise ValueError("extraction needs the one-particle sector")
    return SpinorField(state.amplitudes.reshape(state.dims + (N_COMPONENTS,)).copy())


def occupation_probability(state: FockState, site) -> float:
    """Sum over the site's four qubits of <n_alpha>."""
    if np.ndim(site) != 0:
        site = site_index(state.dims, tuple(site))
    site_coords(state.dims, site)
    probs = np.abs(state.amplitudes) ** 2
    total = 0.0
    for c in range(N_COMPONENTS):
        occupied = (state.configs >> qubit_index(site, c)) & 1
        total += float(np.sum(probs * occupied))
    return total


# -- full-register reference ---------------------------------------------------------

def apply_gate_full(vector: np.ndarray, gate: TwoQubitGate) -> np.ndarray:
    """Apply a gate to a dense 2^Q statevector (small Q only, for cross-checks)."""
    Q = vector.size.bit_length() - 1
    if vector.size != 1 << Q:
        raise ValueError("vector length must be a power of two")
    # axis j of the (2,)*Q view holds bit Q-1-j
    view = vector.reshape((2,) * Q)
    ax_a, ax_b = Q - 1 - gate.a, Q - 1 - gate.b
    m = gate_matrix(gate.kind, gate.theta).reshape(2, 2, 2, 2)
    out = np.tensordot(m, view, axes=([2, 3], [ax_a, ax_b]))
    out = np.moveaxis(out, [0, 1], [ax_a, ax_b])
    return np.ascontiguousarray(out).reshape(-1)


# -- sector snapshots ----------------------------------------------------------------

SECTOR_MAGIC = b"QLGS"
SECTOR_VERSION = 1
_SECTOR_HEADER = struct.Struct("<4sIIIIIIB")


def encode_sector(state: FockState) -> bytes:
    header = _SECTOR_HEADER.pack(SECTOR_MAGIC, SECTOR_VERSION, *state.dims,
                                 N_COMPONENTS, state.n, 1)
    return header + state.amplitudes.astype("<c16", copy=False).tobytes()


def decode_sector(blob: bytes) -> FockState:
    from .spinor import SnapshotError, UnsupportedVersionError

    if len(blob) < _SECTOR_HEADER.size:
        raise SnapshotError("truncated header")
    magic, version, lx, ly, lz, ncomp, n, precision = _SECTOR_HEADER.unpack_from(blob)
    if magic != SECTOR_MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != SECTOR_VERSION:
        raise UnsupportedVersionError(f"unsupported sector version {version}")
    if ncomp != N_COMPONENTS or precision != 1 or n > MAX_PARTICLES:
        raise SnapshotError("unsupported sector header")
    dim = comb(4 * lx * ly * lz, n)
    payload = blob[_SECTOR_HEADER.size:]
    if len(payload) != dim * 16:
        raise SnapshotError(f"payload has {len(payload)} bytes, expected {dim * 16}")
    amps = np.frombuffer(payload, dtype="<c16").astype(np.complex128)
    return FockState((lx, ly, lz), n, amps)


def write_sector(state: FockState, path) -> None:
    Path(path).write_bytes(encode_sector(state))


def read_sector(path) -> FockState:
    return decode_sector(Path(path).read_bytes())
