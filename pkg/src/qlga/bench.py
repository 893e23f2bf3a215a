"""Run configurations, convergence sweeps, equivalence suite and reports."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import fock
from .evolution import (
    PhasePolicy,
    Variant,
    continuum_form,
    evolve,
    op_count,
    op_count_1d,
    qubit_complexity,
    step_duration,
    step_ops,
)
from .operators import OpCounter, Pairing
from .oracle import exact_evolve
from .spinor import (
    GaussianPacket,
    LatticeParams,
    Ordering,
    PlaneWave,
    SpinorField,
    l2_density_error,
    new_field,
    probability_density,
    total_norm,
)


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------------

@dataclass
class RunConfig:
    """One run or sweep.  Lengths are in units of the domain length (1)."""

    variant: Variant = Variant.SYMMETRIZED
    dimensionality: int = 1
    L: tuple = (64, 128, 256, 512)
    epsilon_policy: str = "proportional"   # epsilon = m dr, or "fixed"
    epsilon: float = 0.05                  # used only when the policy is "fixed"
    mass: float = 1.0
    initial: str = "gaussian"              # gaussian | plane | random
    width: float = 1 / 16
    center: float = 0.5
    cycles: float = 2.0
    polarization: tuple = (1, 0, 0, 0)
    end_time: float = 0.25
    cadence: int = 0
    out: str = "."
    format: str = "both"
    threads: int = 1
    seed: int = 0
    pairing: Pairing = Pairing.CONSISTENT
    phase: PhasePolicy = PhasePolicy.PHASE

    def validate(self):
        if self.dimensionality not in (1, 3):
            raise ConfigError("dimensionality must be 1 or 3")
        if not self.L:
            raise ConfigError("L needs at least one value")
        for a, b in zip(self.L, self.L[1:]):
            if b <= a:
                raise ConfigError("L sweep must be strictly increasing")
        if len(self.L) > 1 and any(v & (v - 1) for v in self.L):
            raise ConfigError("L sweep values must be powers of two")
        if any(v < 2 for v in self.L):
            raise ConfigError("L must be at least 2")
        if not self.end_time > 0:
            raise ConfigError("end_time must be positive")
        if self.epsilon_policy not in ("fixed", "proportional"):
            raise ConfigError("epsilon_policy must be 'fixed' or 'proportional'")
        if self.initial not in ("gaussian", "plane", "random"):
            raise ConfigError("initial must be gaussian, plane or random")
        if self.format not in ("csv", "svg", "both"):
            raise ConfigError("format must be csv, svg or both")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        return self


_SECTIONS = {
    "run": {"variant", "dimensionality", "L", "epsilon_policy", "epsilon", "mass",
            "end_time", "cadence", "threads", "seed", "pairing", "phase"},
    "initial": {"initial", "kind", "width", "center", "cycles", "polarization"},
    "output": {"out", "dir", "format"},
}
_ALIASES = {"kind": "initial", "dir": "out", "time": "end_time", "t": "end_time"}


def _floats(text):
    return tuple(float(v) for v in text.split(","))


_CONVERT = {
    "variant": Variant,
    "dimensionality": int,
    "L": lambda s: tuple(int(v) for v in s.split(",")),
    "epsilon_policy": str.strip,
    "epsilon": float,
    "mass": float,
    "end_time": float,
    "cadence": int,
    "threads": int,
    "seed": int,
    "pairing": Pairing,
    "phase": PhasePolicy,
    "initial": str.strip,
    "width": float,
    "center": float,
    "cycles": float,
    "polarization": lambda s: tuple(complex(v.strip().replace("i", "j")) for v in s.split(",")),
    "out": str.strip,
    "format": str.strip,
}


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines grouped under [run], [initial], [output].

    Keys before any section header belong to [run]; ``#`` starts a comment.
    Unknown sections and keys are rejected with their line number.
    """
    values = {}
    section = "run"
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {raw!r}")
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        allowed = _SECTIONS[section] | {"time", "t"} if section == "run" else _SECTIONS[section]
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        key = _ALIASES.get(key, key)
        try:
            values[key] = _CONVERT[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    if isinstance(values.get("L"), tuple) and len(values["L"]) == 0:
        raise ConfigError("L is empty")
    return RunConfig(**values).validate()


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


# -- convergence sweeps --------------------------------------------------------------

@dataclass
class ConvergenceRecord:
    L: int
    dx: float
    steps: int
    error: float
    wall_time: float
    op_count: int


CSV_FIELDS = ("L", "dx", "steps", "error", "op_count")


@dataclass
class ConvergenceResult:
    variant: Variant
    records: list
    slope: float
    converged: bool
    note: str = ""


def fit_slope(dx: Sequence[float], error: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(dx)."""
    dx, error = np.asarray(dx, float), np.asarray(error, float)
    if dx.size < 2:
        raise ValueError("need at least two points")
    if np.any(error <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    x, y = np.log(dx), np.log(error)
    x0, y0 = x - x.mean(), y - y.mean()
    return float(np.dot(x0, y0) / np.dot(x0, x0))


def _dims(config: RunConfig, L: int):
    return (1, 1, L) if config.dimensionality == 1 else (L, L, L)


def lattice_params(config: RunConfig, L: int) -> LatticeParams:
    ordering = Ordering.RELATIVISTIC if config.variant is Variant.BASIC else Ordering.DIFFUSIVE
    epsilon = config.epsilon if config.epsilon_policy == "fixed" else None
    if ordering is Ordering.RELATIVISTIC:
        epsilon = None
    return LatticeParams.create(_dims(config, L), 1.0 / L, config.mass, ordering, epsilon)


def initial_field(config: RunConfig, L: int) -> SpinorField:
    dims = _dims(config, L)
    k = 2 * math.pi * config.cycles / L
    if config.initial == "gaussian":
        return new_field(dims, GaussianPacket(config.center * L, config.width * L, k,
                                              config.polarization))
    if config.initial == "plane":
        return new_field(dims, PlaneWave(k, config.polarization))
    # band-limited random data: a few low modes with seeded coefficients
    rng = np.random.default_rng(config.seed)
    spectrum = np.zeros(dims + (4,), dtype=np.complex128)
    low = tuple(slice(0, 3) if d > 1 else slice(0, 1) for d in dims)
    shape = spectrum[low].shape
    spectrum[low] = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    data = np.fft.ifftn(spectrum, axes=(0, 1, 2))
    return SpinorField(data / math.sqrt(np.sum(np.abs(data) ** 2)))


def run_point(config: RunConfig, L: int, threads: int = 1):
    """Evolve one resolution to the end time; returns (record, final field, reference)."""
    params = lattice_params(config, L)
    psi0 = initial_field(config, L)
    dt = step_duration(config.variant, params)
    steps = max(1, round(config.end_time / dt))
    start = time.perf_counter()
    psi, _ = evolve(psi0, params, config.variant, steps, pairing=config.pairing,
                    phase=config.phase, threads=threads)
    wall = time.perf_counter() - start
    form, parity, mass_sign = continuum_form(config.variant, psi0.dims, Pairing.CONSISTENT)
    reference = exact_evolve(psi0, config.end_time, mass_sign * config.mass, form,
                             params.delta_r, parity)
    count = (op_count(config.variant, L) if config.dimensionality == 3
             else op_count_1d(config.variant, L, config.pairing))
    record = ConvergenceRecord(L, 1.0 / L, steps, l2_density_error(psi, reference), wall,
                               count.total)
    return record, psi, reference


def run_convergence(config: RunConfig) -> ConvergenceResult:
    """Sweep the L values of ``config``; sweep points may run on worker threads."""
    config.validate()
    if len(config.L) < 3:
        raise ConfigError("a convergence sweep needs at least 3 resolutions")
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(lambda L: run_point(config, L)[0], config.L))
    else:
        results = [run_point(config, L)[0] for L in config.L]
    errors = [r.error for r in results]
    note = ""
    if all(b >= a for a, b in zip(errors, errors[1:])):
        note = "convergence failure: error does not decrease with resolution"
    try:
        slope = fit_slope([r.dx for r in results], errors)
    except ValueError as exc:
        slope, note = float("nan"), note or str(exc)
    return ConvergenceResult(config.variant, results, slope, not note, note)


def convergence_csv(result: ConvergenceResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for rec in result.records:
        writer.writerow([rec.L, repr(rec.dx), rec.steps, repr(rec.error), rec.op_count])
    return buf.getvalue()


def write_convergence(results: Sequence[ConvergenceResult], out_dir, fmt: str = "both") -> list:
    """Write one CSV per variant, one SVG with every series and a metadata JSON."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        for res in results:
            path = out / f"convergence_{res.variant.value}.csv"
            path.write_text(convergence_csv(res))
            written.append(path)
    if fmt in ("svg", "both"):
        path = out / "convergence.svg"
        path.write_text(loglog_svg(results))
        written.append(path)
    meta = {res.variant.value: {"slope": res.slope, "converged": res.converged, "note": res.note,
                                "wall_time": [r.wall_time for r in res.records]}
            for res in results}
    meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    path = out / "metadata.json"
    path.write_text(json.dumps(meta, indent=2))
    written.append(path)
    return written


def loglog_svg(results: Sequence[ConvergenceResult], width: int = 480, height: int = 360) -> str:
    """Minimal log-log plot of error against dx with slope guides 0.5 and 2.5."""
    pts = [(r.dx, r.error) for res in results for r in res.records if r.error > 0]
    if not pts:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"/>\n'
    lx = [math.log10(p[0]) for p in pts]
    ly = [math.log10(p[1]) for p in pts]
    x0, x1 = math.floor(min(lx)), math.ceil(max(lx))
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)
    pad = 50

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="11">',
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="black"/>']
    for d in range(x0, x1 + 1):
        parts.append(f'<text x="{sx(d):.1f}" y="{height - pad + 15}" text-anchor="middle">1e{d}</text>')
    for d in range(y0, y1 + 1):
        parts.append(f'<text x="{pad - 5}" y="{sy(d):.1f}" text-anchor="end">1e{d}</text>')
    parts.append(f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle">dx = 1/L</text>')
    parts.append(f'<text x="12" y="{height / 2}" transform="rotate(-90 12 {height / 2})" '
                 'text-anchor="middle">L2 density error</text>')
    # guides anchored at the finest point
    ax, ay = lx[-1], ly[-1]
    for slope, dash in ((0.5, "4,4"), (2.5, "1,3")):
        ex = x1
        ey = ay + slope * (ex - ax)
        parts.append(f'<line x1="{sx(ax):.1f}" y1="{sy(ay):.1f}" x2="{sx(ex):.1f}" '
                     f'y2="{sy(min(ey, y1)):.1f}" stroke="gray" stroke-dasharray="{dash}"/>')
        parts.append(f'<text x="{sx(ex) - 30:.1f}" y="{sy(min(ey, y1)) + 12:.1f}" fill="gray">'
                     f'slope {slope}</text>')
    colors = ("#1f77b4", "#d62728", "#2ca02c")
    for i, res in enumerate(results):
        color = colors[i % len(colors)]
        coords = " ".join(f"{sx(math.log10(r.dx)):.1f},{sy(math.log10(r.error)):.1f}"
                          for r in res.records if r.error > 0)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}"/>')
        parts.append(f'<text x="{pad + 8}" y="{pad + 16 + 14 * i}" fill="{color}">'
                     f'{res.variant.value} (slope {res.slope:.2f})</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# -- equivalence suite ----------------------------------------------------------------

@dataclass
class Check:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)


@dataclass
class EquivalenceReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list:
        return [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: residual={c.residual:.3e} "
                f"(tol {c.tolerance:.0e})" for c in self.checks]


def _one_particle_params(variant: Variant, L: int):
    if variant is Variant.BASIC:
        return LatticeParams.create((1, 1, L), 1.0 / L, 1.0, Ordering.RELATIVISTIC)
    return LatticeParams.create((1, 1, L), 1.0 / L, 1.0, Ordering.DIFFUSIVE, epsilon=0.1)


def one_particle_residual(variant: Variant, L: int = 8, seed: int = 0, sign: int = -1) -> float:
    """max |extract(gates(embed psi)) - step(psi)| for one step."""
    params = _one_particle_params(variant, L)
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(1, 1, L, 4)) + 1j * rng.normal(size=(1, 1, L, 4))
    psi = SpinorField(data / np.linalg.norm(data))
    ops = step_ops(variant, params)
    from .operators import _apply
    expected = _apply(psi.data, ops)
    state = fock.sq_apply_sequence(fock.embed_one_particle(psi), ops, sign=sign)
    return float(np.abs(fock.extract_one_particle(state).data - expected).max())


def two_particle_run(L: int = 4, steps: int = 100, variant: Variant = Variant.BASIC,
                     full_register: bool = True) -> dict:
    """Evolve a two-particle state; report number, norm and occupation residuals.

    With ``full_register`` the same gates also run on the dense 2^Q vector and
    the weight leaking outside the n = 2 sector is measured.
    """
    params = _one_particle_params(variant, L)
    dims = params.dims
    state = fock.FockState.from_occupations(dims, [fock.qubit_index(0, 0), fock.qubit_index(1, 2)])
    # spread the amplitude over the sector so every gate does work
    rng = np.random.default_rng(1)
    amps = rng.normal(size=state.amplitudes.size) + 1j * rng.normal(size=state.amplitudes.size)
    state = fock.FockState(dims, 2, amps / np.linalg.norm(amps), state.configs)
    ops = step_ops(variant, params)
    full = None
    if full_register:
        full = np.zeros(1 << state.Q, dtype=np.complex128)
        full[state.configs] = state.amplitudes
    popcount_ok = True
    counter = OpCounter()
    for _ in range(steps):
        state = fock.sq_apply_sequence(state, ops, counter)
    if full_register:
        from .operators import Collision, GlobalPhase, StreamSpec
        gates = []
        for op in ops:
            if isinstance(op, Collision):
                gates += fock.collision_gates(dims, op.kind, op.theta)
            elif isinstance(op, StreamSpec):
                for c in op.subset:
                    gates += fock.stream_gates(dims, op.axis, op.direction, c)
        phase = sum(op.angle for op in ops if isinstance(op, GlobalPhase))
        for _ in range(steps):
            for gate in gates:
                full = fock.apply_gate_full(full, gate)
            full = full * np.exp(1j * phase)
        pops = np.array([bin(i).count("1") for i in range(full.size)])
        leak = float(np.sum(np.abs(full[pops != 2]) ** 2))
        popcount_ok = leak == 0.0
        sector_diff = float(np.abs(full[state.configs] - state.amplitudes).max())
    else:
        leak, sector_diff = 0.0, 0.0
    occupation = sum(fock.occupation_probability(state, s) for s in range(state.n_sites))
    return {
        "dimension": state.amplitudes.size,
        "norm_drift": abs(state.norm() - 1.0),
        "occupation_sum_error": abs(occupation - 2.0),
        "leak": leak,
        "number_conserved": popcount_ok and all(bin(int(c)).count("1") == 2 for c in state.configs),
        "sector_vs_full": sector_diff,
        "gate_applications": counter.gate_applications,
    }


def run_equivalence(L: int = 8, two_particle_L: int = 4, steps: int = 100,
                    corrupt_sign: bool = False) -> EquivalenceReport:
    """One-particle equivalence plus two-particle conservation checks.

    ``corrupt_sign`` flips the collision-angle convention (negative control).
    """
    sign = 1 if corrupt_sign else -1
    report = EquivalenceReport()
    for variant in Variant:
        report.checks.append(Check(f"one-particle {variant.value} L={L}",
                                   one_particle_residual(variant, L, sign=sign), 1e-10))
    for variant in (Variant.BASIC, Variant.INTERLEAVED):
        res = two_particle_run(two_particle_L, steps, variant)
        tag = f"two-particle {variant.value} L={two_particle_L}"
        report.checks.append(Check(f"{tag} norm drift", res["norm_drift"], 1e-12))
        report.checks.append(Check(f"{tag} occupation sum", res["occupation_sum_error"], 1e-12))
        report.checks.append(Check(f"{tag} leakage outside n=2", res["leak"], 0.0))
        report.checks.append(Check(f"{tag} sector vs full register", res["sector_vs_full"], 1e-12))
    return report


# -- complexity ------------------------------------------------------------------------

COMPLEXITY_FIELDS = ("variant", "L", "Q", "rho_c", "rho_s", "C", "C_over_Q")


def report_complexity(variants: Sequence[Variant], Ls: Sequence[int]) -> list:
    rows = []
    for variant in variants:
        for L in Ls:
            count = op_count(variant, L)
            Q, c_q = qubit_complexity(L, variant)
            rows.append({"variant": Variant(variant).value, "L": L, "Q": Q, "rho_c": count.rho_c,
                         "rho_s": count.rho_s, "C": count.total, "C_over_Q": c_q / Q})
    return rows


def complexity_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COMPLEXITY_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({**row, "C_over_Q": repr(row["C_over_Q"])})
    return buf.getvalue()
