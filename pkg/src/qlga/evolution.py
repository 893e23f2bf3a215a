"""Time-step rules, multi-step evolution and operation-count accounting."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .operators import (
    Collision,
    CollisionKind,
    GlobalPhase,
    OpCounter,
    Pairing,
    StreamSpec,
    _apply,
    composite_stream_ops,
    displacement_ops,
    dual_displacement_ops,
)
from .spinor import LatticeParams, Ordering, SpinorField, total_norm

QUARTER_PI = math.pi / 4


class Variant(enum.Enum):
    BASIC = "basic"
    INTERLEAVED = "interleaved"
    SYMMETRIZED = "symmetrized"


class PhasePolicy(enum.Enum):
    """Treatment of the scalar factor in the symmetrized rule."""

    NONE = "none"
    PHASE = "phase"   # global phase exp(-i theta_m^2)


def lattice_mode(dims) -> str:
    """'1d' for (1, 1, L>1), '3d' when every axis has extent > 1."""
    lx, ly, lz = dims
    if lx == 1 and ly == 1 and lz > 1:
        return "1d"
    if min(dims) > 1:
        return "3d"
    raise ValueError(f"lattice {dims} is neither 1D along z nor fully 3D")


def _axes(dims) -> tuple:
    return ("z",) if lattice_mode(dims) == "1d" else ("x", "y", "z")


def _require(params: LatticeParams, ordering: Ordering, variant: Variant):
    if params.ordering is not ordering:
        raise ValueError(f"{variant.value} rule requires {ordering.value} ordering")


def basic_ops(params: LatticeParams) -> list:
    """Y S_x Y^+ X2^+ S_y X2 S_z X1^+_{theta_m} (pi/4 rotations), in application order."""
    _require(params, Ordering.RELATIVISTIC, Variant.BASIC)
    mass = Collision(CollisionKind.X1, -params.mass_angle)
    if lattice_mode(params.dims) == "1d":
        return [mass] + composite_stream_ops("z")
    return ([mass]
            + composite_stream_ops("z")
            + [Collision(CollisionKind.X2, QUARTER_PI)]
            + composite_stream_ops("y")
            + [Collision(CollisionKind.X2, -QUARTER_PI), Collision(CollisionKind.Y2, -QUARTER_PI)]
            + composite_stream_ops("x")
            + [Collision(CollisionKind.Y2, QUARTER_PI)])


def _transport_ops(params, pairing):
    # E = E_x E_y E_z acts z first
    ops = []
    for axis in reversed(_axes(params.dims)):
        ops += displacement_ops(axis, params.epsilon, pairing)
    return ops


def _dual_transport_ops(params, pairing):
    # E~ = E_{-x}^+ E_{-y}^+ E_{-z}^+ acts z first
    ops = []
    for axis in reversed(_axes(params.dims)):
        ops += dual_displacement_ops(axis, params.epsilon, pairing)
    return ops


def interleaved_ops(params: LatticeParams, pairing: Pairing = Pairing.CONSISTENT) -> list:
    _require(params, Ordering.DIFFUSIVE, Variant.INTERLEAVED)
    return [Collision(CollisionKind.X1, -params.mass_angle)] + _transport_ops(params, pairing)


def symmetrized_ops(params: LatticeParams, pairing: Pairing = Pairing.CONSISTENT,
                    phase: PhasePolicy = PhasePolicy.PHASE) -> list:
    """X1^+ E~ E X1^+ (each mass collision carries one dt); the step spans 2 dt."""
    _require(params, Ordering.DIFFUSIVE, Variant.SYMMETRIZED)
    mass = Collision(CollisionKind.X1, -params.mass_angle)
    ops = [mass] + _transport_ops(params, pairing) + _dual_transport_ops(params, pairing) + [mass]
    if PhasePolicy(phase) is PhasePolicy.PHASE:
        ops.append(GlobalPhase(-params.mass_angle**2))
    return ops


def step_ops(variant: Variant, params: LatticeParams, pairing: Pairing = Pairing.CONSISTENT,
             phase: PhasePolicy = PhasePolicy.PHASE) -> list:
    variant = Variant(variant)
    if variant is Variant.BASIC:
        return basic_ops(params)
    if variant is Variant.INTERLEAVED:
        return interleaved_ops(params, pairing)
    return symmetrized_ops(params, pairing, phase)


def step_duration(variant: Variant, params: LatticeParams) -> float:
    return 2 * params.delta_t if Variant(variant) is Variant.SYMMETRIZED else params.delta_t


def step_basic(field: SpinorField, params: LatticeParams, threads: int = 1,
               counter: OpCounter | None = None) -> SpinorField:
    if lattice_mode(field.dims) != "3d":
        raise ValueError("step_basic streams along x, y and z; use step_basic_1d on 1D lattices")
    return SpinorField(_apply(field.data, basic_ops(params), threads, counter))


def step_basic_1d(field: SpinorField, params: LatticeParams, threads: int = 1,
                  counter: OpCounter | None = None) -> SpinorField:
    """S_z X1^+_{theta_m} on a (1, 1, L) lattice."""
    if lattice_mode(field.dims) != "1d":
        raise ValueError("step_basic_1d needs a (1, 1, L) lattice")
    return SpinorField(_apply(field.data, basic_ops(params), threads, counter))


def step_interleaved(field: SpinorField, params: LatticeParams,
                     pairing: Pairing = Pairing.CONSISTENT, threads: int = 1,
                     counter: OpCounter | None = None) -> SpinorField:
    return SpinorField(_apply(field.data, interleaved_ops(params, pairing), threads, counter))


def step_symmetrized(field: SpinorField, params: LatticeParams,
                     pairing: Pairing = Pairing.CONSISTENT,
                     phase: PhasePolicy = PhasePolicy.PHASE, threads: int = 1,
                     counter: OpCounter | None = None) -> SpinorField:
    return SpinorField(_apply(field.data, symmetrized_ops(params, pairing, phase), threads, counter))


def step(field: SpinorField, params: LatticeParams, variant: Variant, **kwargs) -> SpinorField:
    variant = Variant(variant)
    if variant is Variant.BASIC:
        fn = step_basic_1d if lattice_mode(field.dims) == "1d" else step_basic
        return fn(field, params, **kwargs)
    if variant is Variant.INTERLEAVED:
        return step_interleaved(field, params, **kwargs)
    return step_symmetrized(field, params, **kwargs)


# -- continuum target -------------------------------------------------------------

def continuum_form(variant: Variant, dims, pairing: Pairing = Pairing.CONSISTENT):
    """(form, parity, mass_sign) of the Dirac equation a rule approximates.

    ``parity`` flips the sign of individual alpha matrices; ``mass_sign`` is
    -1 because the mass collision X1^+ produces -i m beta.
    """
    from .oracle import DiracForm

    if Variant(variant) is Variant.BASIC:
        return DiracForm.STANDARD, (-1, -1, 1), -1
    if Pairing(pairing) is not Pairing.CONSISTENT:
        raise ValueError("printed pairing does not approximate a Dirac equation")
    return DiracForm.ALTERNATE, (1, 1, 1), -1


# -- evolution with observers ---------------------------------------------------------

@dataclass
class Observer:
    """Callback invoked every ``every`` steps (and at step 0)."""

    name: str
    fn: Callable[[SpinorField], object]
    every: int = 1


def norm_observer(every: int = 1) -> Observer:
    return Observer("norm", total_norm, every)


@dataclass
class Record:
    step: int
    time: float
    name: str
    value: object


def evolve(field: SpinorField, params: LatticeParams, variant: Variant, n_steps: int,
           observers: Sequence[Observer] = (), pairing: Pairing = Pairing.CONSISTENT,
           phase: PhasePolicy = PhasePolicy.PHASE, threads: int = 1,
           counter: OpCounter | None = None):
    """Apply ``n_steps`` steps; returns (field, records)."""
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    variant = Variant(variant)
    if variant is Variant.BASIC:
        lattice_mode(field.dims)
    ops = step_ops(variant, params, pairing, phase)
    dt = step_duration(variant, params)
    records: list[Record] = []

    def observe(n, current):
        for obs in observers:
            if obs.every > 0 and n % obs.every == 0:
                records.append(Record(n, n * dt, obs.name, obs.fn(SpinorField(current))))

    arr = field.data
    observe(0, arr)
    for n in range(1, n_steps + 1):
        arr = _apply(arr, ops, threads, counter)
        observe(n, arr)
    return SpinorField(arr), records


# -- complexity accounting -----------------------------------------------------------

RHO = {
    Variant.BASIC: (5, 12),
    Variant.INTERLEAVED: (13, 24),
    Variant.SYMMETRIZED: (26, 48),
}


@dataclass(frozen=True)
class OpCount:
    rho_c: int
    rho_s: int
    L: int
    total: int
    dimension: int = 3


def _total(rho_c, rho_s, L, dimension):
    return rho_c * 2 * L**dimension + rho_s * (L - 1) ** dimension


def op_count(variant: Variant, L: int) -> OpCount:
    """C = rho_c 2 L^3 + rho_s (L - 1)^3 for one 3D time step."""
    if L < 2:
        raise ValueError("L must be at least 2")
    rho_c, rho_s = RHO[Variant(variant)]
    return OpCount(rho_c, rho_s, L, _total(rho_c, rho_s, L, 3))


def counted_rho(variant: Variant, params: LatticeParams, pairing: Pairing = Pairing.CONSISTENT):
    """(rho_c, rho_s) read from an instrumented run of one step on ``params.dims``."""
    counter = OpCounter()
    field = SpinorField(np.zeros(params.dims + (4,), dtype=np.complex128))
    _apply(field.data, step_ops(variant, params, pairing), counter=counter)
    return counter.collisions, counter.component_streams


def op_count_1d(variant: Variant, L: int, pairing: Pairing = Pairing.CONSISTENT) -> OpCount:
    """1D analogue: the reduced rule's own rho values with C = 2 rho_c L + rho_s (L - 1)."""
    if L < 2:
        raise ValueError("L must be at least 2")
    variant = Variant(variant)
    ordering = Ordering.RELATIVISTIC if variant is Variant.BASIC else Ordering.DIFFUSIVE
    params = LatticeParams.create((1, 1, L), 1.0 / L, mass=1.0, ordering=ordering, epsilon=0.5)
    rho_c, rho_s = counted_rho(variant, params, pairing)
    return OpCount(rho_c, rho_s, L, _total(rho_c, rho_s, L, 1), dimension=1)


def _cube_root_int(value: int) -> int:
    root = round(value ** (1 / 3))
    for cand in (root - 1, root, root + 1):
        if cand**3 == value:
            return cand
    raise ValueError(f"{value} is not a perfect cube")


def complexity_in_qubits(rho_c: int, rho_s: int, Q: int, printed: bool = False) -> Fraction:
    """Operation count written in terms of Q = 4 L^3.

    The printed closed form carries ``Q`` where ``Q/4`` belongs in the
    streaming bracket; ``printed=True`` evaluates it literally.
    """
    q = Fraction(Q)
    two_q_third = _cube_root_int(2 * Q)           # (2Q)^(1/3) = 2L
    lead = q if printed else q / 4
    bracket = lead - Fraction(3, 4) * two_q_third**2 + Fraction(3, 2) * two_q_third - 1
    return Fraction(rho_c, 2) * q + rho_s * bracket


def qubit_complexity(L: int, variant: Variant = Variant.BASIC):
    """(Q, C) with C from the qubit-count closed form; checked against op_count."""
    count = op_count(variant, L)
    Q = 4 * L**3
    c_q = complexity_in_qubits(count.rho_c, count.rho_s, Q)
    if c_q != count.total:
        raise AssertionError(f"closed form {c_q} != {count.total}")
    return Q, int(c_q)
