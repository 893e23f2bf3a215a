"""Quantum lattice-gas simulation of the free Dirac equation."""
from .spinor import (
    GaussianPacket,
    LatticeParams,
    Ordering,
    PlaneWave,
    SpinorField,
    UnitComponent,
    Zero,
    l2_density_error,
    new_field,
    probability_density,
    read_snapshot,
    total_norm,
    write_snapshot,
)
from .operators import (
    Collision,
    CollisionKind,
    OpCounter,
    Pairing,
    StreamSpec,
    apply_collision,
    apply_sequence,
    dense_operator,
    displacement_ops,
    stream,
)
from .evolution import (
    PhasePolicy,
    Variant,
    evolve,
    op_count,
    qubit_complexity,
    step,
    step_basic,
    step_basic_1d,
    step_interleaved,
    step_symmetrized,
)
from .oracle import DiracForm, anticommutator_check, dirac_matrices, exact_evolve
from .fock import FockState, embed_one_particle, extract_one_particle

__version__ = "0.1.0"
