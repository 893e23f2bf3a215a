"""Exact periodic solutions of the free Dirac equation.

    d_t psi = c sum_i alpha_i d_i psi + i (m c^2 / hbar) beta psi

Each Fourier mode evolves under a 4x4 matrix exponential computed by
eigendecomposition of the Hermitian mode Hamiltonian.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .spinor import SpinorField

SIGMA_0 = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


class DiracForm(enum.Enum):
    STANDARD = "standard"     # alpha = sz.sx, sz.sy, sz.sz
    ALTERNATE = "alternate"   # alpha_z replaced by sy.1


def dirac_matrices(form: DiracForm = DiracForm.STANDARD, parity=(1, 1, 1)):
    """(alphas, beta); ``parity`` multiplies each alpha_i by +-1."""
    form = DiracForm(form)
    alpha_z = np.kron(SIGMA_Z, SIGMA_Z) if form is DiracForm.STANDARD else np.kron(SIGMA_Y, SIGMA_0)
    alphas = [np.kron(SIGMA_Z, SIGMA_X), np.kron(SIGMA_Z, SIGMA_Y), alpha_z]
    alphas = [s * a for s, a in zip(parity, alphas)]
    return alphas, np.kron(SIGMA_X, SIGMA_0)


@dataclass
class AnticommutatorReport:
    max_violation: float
    violations: dict

    @property
    def ok(self) -> bool:
        return self.max_violation <= 1e-14


def anticommutator_check(form) -> AnticommutatorReport:
    """Check alpha_i^2 = beta^2 = 1, {alpha_i, alpha_j} = 0, {beta, alpha_i} = 0.

    ``form`` is a DiracForm or an explicit ``(alphas, beta)`` tuple.
    """
    if isinstance(form, (DiracForm, str)):
        alphas, beta = dirac_matrices(form)
    else:
        alphas, beta = form
    eye = np.eye(4)
    named = {"ax": alphas[0], "ay": alphas[1], "az": alphas[2], "b": beta}
    violations = {}
    for name, m in named.items():
        violations[f"{name}^2"] = float(np.abs(m @ m - eye).max())
    for (n1, m1), (n2, m2) in itertools.combinations(named.items(), 2):
        violations[f"{{{n1},{n2}}}"] = float(np.abs(m1 @ m2 + m2 @ m1).max())
    return AnticommutatorReport(max(violations.values()), violations)


def mode_hamiltonians(k: np.ndarray, mass: float, form=DiracForm.STANDARD,
                      parity=(1, 1, 1), c: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    """Hermitian H(k) with d_t psi_k = i H(k) psi_k; ``k`` has shape (..., 3)."""
    alphas, beta = dirac_matrices(form, parity)
    k = np.asarray(k, dtype=float)
    h = c * np.einsum("...i,ijk->...jk", k, np.stack(alphas))
    return h + (mass * c**2 / hbar) * beta


def dispersion(k, mass: float, c: float = 1.0, hbar: float = 1.0) -> float:
    """omega = sqrt(c^2 |k|^2 + (m c^2 / hbar)^2)."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return float(math.sqrt(c**2 * float(k @ k) + (mass * c**2 / hbar) ** 2))


def mode_eigenvalues(k, mass: float, form=DiracForm.STANDARD, c: float = 1.0,
                     hbar: float = 1.0) -> np.ndarray:
    """Eigenvalues of the mode generator i H(k), sorted by imaginary part."""
    k3 = np.zeros(3)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    k3[:k.size] = k
    gen = 1j * mode_hamiltonians(k3, mass, form, c=c, hbar=hbar)
    ev = np.linalg.eigvals(gen)
    return ev[np.argsort(ev.imag)]


def lattice_wavenumbers(dims, delta_r: float) -> np.ndarray:
    """Wave vectors of the DFT modes, shape (Lx, Ly, Lz, 3)."""
    ks = [2 * np.pi * np.fft.fftfreq(n, d=delta_r) for n in dims]
    return np.stack(np.meshgrid(*ks, indexing="ij"), axis=-1)


def mode_propagators(dims, delta_r: float, t: float, mass: float, form=DiracForm.STANDARD,
                     parity=(1, 1, 1), c: float = 1.0, hbar: float = 1.0) -> np.ndarray:
    """exp(i t H(k)) for every lattice mode, shape (Lx, Ly, Lz, 4, 4)."""
    h = mode_hamiltonians(lattice_wavenumbers(dims, delta_r), mass, form, parity, c, hbar)
    w, v = np.linalg.eigh(h)
    phases = np.exp(1j * t * w)
    return np.einsum("...ij,...j,...kj->...ik", v, phases, v.conj())


def exact_evolve(initial: SpinorField, t: float, mass: float, form=DiracForm.STANDARD,
                 delta_r: float = 1.0, parity=(1, 1, 1), c: float = 1.0,
                 hbar: float = 1.0) -> SpinorField:
    """Spectrally exact solution at time ``t`` (negative t runs backwards)."""
    if not math.isfinite(mass) or not math.isfinite(t):
        raise ValueError("mass and t must be finite")
    spectrum = np.fft.fftn(initial.data, axes=(0, 1, 2))
    u = mode_propagators(initial.dims, delta_r, t, mass, form, parity, c, hbar)
    evolved = np.einsum("...ij,...j->...i", u, spectrum)
    return SpinorField(np.fft.ifftn(evolved, axes=(0, 1, 2)))


def change_of_basis(source=DiracForm.STANDARD, target=DiracForm.ALTERNATE) -> np.ndarray:
    """Unitary V with V M_source V^+ = M_target for all four Dirac matrices."""
    a_src, b_src = dirac_matrices(source)
    a_tgt, b_tgt = dirac_matrices(target)
    eye = np.eye(4)
    # V M - M' V = 0, vec(V) column-major: (M^T kron I - I kron M') vec(V) = 0
    rows = [np.kron(ms.T, eye) - np.kron(eye, mt)
            for ms, mt in zip(a_src + [b_src], a_tgt + [b_tgt])]
    _, s, vh = np.linalg.svd(np.vstack(rows))
    v = vh[-1].conj().reshape(4, 4, order="F")
    u, _, wh = np.linalg.svd(v)
    return u @ wh


# -- independent integrator -----------------------------------------------------

_CENTRAL_8 = (4 / 5, -1 / 5, 4 / 105, -1 / 280)


def _periodic_derivative(n: int, h: float) -> sp.csr_matrix:
    """Eighth-order central first-derivative matrix on a periodic grid."""
    rows, cols, vals = [], [], []
    for offset, coeff in enumerate(_CENTRAL_8, start=1):
        for sign in (1, -1):
            rows.extend(range(n))
            cols.extend((np.arange(n) + sign * offset) % n)
            vals.extend([sign * coeff / h] * n)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def crank_nicolson_evolve(initial: SpinorField, t: float, mass: float, form=DiracForm.STANDARD,
                          delta_r: float = 1.0, n_steps: int = 2000, refine: int = 8,
                          c: float = 1.0, hbar: float = 1.0) -> SpinorField:
    """Finite-difference reference for 1D (1, 1, L) data.

    The data are interpolated onto a grid ``refine`` times finer (trigonometric
    interpolation, exact for band-limited samples), integrated with
    eighth-order central differences and Crank-Nicolson with one Richardson
    extrapolation in the step size, and sampled back onto the input sites.
    """
    lx, ly, lz = initial.dims
    if lx != 1 or ly != 1:
        raise ValueError("crank_nicolson_evolve handles (1, 1, L) lattices")
    if refine < 1:
        raise ValueError("refine must be >= 1")
    fine_n = lz * refine
    alphas, beta = dirac_matrices(form)
    gen = (c * sp.kron(_periodic_derivative(fine_n, delta_r / refine), sp.csr_matrix(alphas[2]))
           + sp.kron(sp.identity(fine_n), sp.csr_matrix(1j * (mass * c**2 / hbar) * beta)))
    gen = gen.tocsc()
    spectrum = np.fft.fft(initial.data[0, 0], axis=0)
    padded = np.zeros((fine_n, 4), dtype=np.complex128)
    half = lz // 2
    padded[:half] = spectrum[:half]
    padded[fine_n - (lz - half):] = spectrum[half:]
    if lz % 2 == 0 and refine > 1:
        # split the Nyquist mode so the interpolant stays real-symmetric
        padded[half] = padded[fine_n - half] = spectrum[half] / 2
    psi0 = (np.fft.ifft(padded, axis=0) * refine).reshape(-1)

    def run(steps):
        h = t / steps
        eye = sp.identity(gen.shape[0], format="csc", dtype=np.complex128)
        lu = splu((eye - 0.5 * h * gen).tocsc())
        rhs_op = (eye + 0.5 * h * gen).tocsr()
        psi = psi0.copy()
        for _ in range(steps):
            psi = lu.solve(rhs_op @ psi)
        return psi

    coarse, fine = run(n_steps), run(2 * n_steps)
    psi = ((4 * fine - coarse) / 3).reshape(fine_n, 4)[::refine]
    return SpinorField(psi.reshape(initial.data.shape))
