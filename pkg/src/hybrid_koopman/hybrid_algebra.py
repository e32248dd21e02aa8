"""Hybrid operators and states on ``L2(grid) (x) C^d``.

Product-space vectors are indexed ``xi * d + m`` (classical index major), so
``kron(diag(a), A)`` realizes the separable operator ``a (x) A``.

Discretization convention: the continuum kernel ``delta(xi - xi')`` becomes
``Kronecker / dq dp``. Under it the expectation identity is exact for both
lifts, the marginal-power identity is exact for the block-diagonal lift, and
the von Neumann entropy of the block-diagonal lift equals the hybrid entropy
minus ``log(dq dp)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import logsumexp

from .errors import (
    ConfigurationError,
    IdentityViolation,
    InvalidDensityError,
    NonHermitianError,
    SizeMismatchError,
)
from .phase_space import ClassicalDensity, PhaseSpaceGrid
from .quantum import HERMITIAN_TOL, STATE_TOL, entropy_from_eigenvalues, hermiticity_defect

#: Matrices up to this size get a full eigendecomposition in positivity checks.
DENSE_EIG_LIMIT = 1024

# -- operators ---------------------------------------------------------------------


class HybridOperator:
    """Finite sum ``sum_k gamma_k a_k (x) A_k`` of separable hybrid observables.

    Parameters
    ----------
    grid : PhaseSpaceGrid
    dim : int
        Quantum dimension ``d``.
    terms : iterable of (complex, array_like, array_like)
        ``(gamma, a, A)`` with ``a`` one value per grid point and ``A`` a
        ``d x d`` matrix.
    """

    def __init__(self, grid: PhaseSpaceGrid, dim: int, terms=()):
        self.grid = grid
        self.dim = int(dim)
        cleaned = []
        for gamma, a, A in terms:
            a = np.array(grid.flat(a), dtype=complex)
            A = np.array(A, dtype=complex)
            if A.shape != (self.dim, self.dim):
                raise SizeMismatchError(f"quantum factor must be {self.dim}x{self.dim}, got {A.shape}")
            a.setflags(write=False)
            A.setflags(write=False)
            cleaned.append((complex(gamma), a, A))
        self.terms = tuple(cleaned)

    @classmethod
    def identity(cls, grid, dim):
        return cls(grid, dim, [(1.0, np.ones(grid.size), np.eye(dim))])

    @classmethod
    def separable(cls, grid, a, A, gamma=1.0):
        A = np.asarray(A)
        return cls(grid, A.shape[0], [(gamma, a, A)])

    def _check(self, other):
        if not isinstance(other, HybridOperator):
            return NotImplemented
        if other.grid != self.grid or other.dim != self.dim:
            raise SizeMismatchError("hybrid operators live on different spaces")
        return other

    def __add__(self, other):
        other = self._check(other)
        if other is NotImplemented:
            return other
        return HybridOperator(self.grid, self.dim, self.terms + other.terms)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return HybridOperator(self.grid, self.dim, [(c * g, a, A) for g, a, A in self.terms])

    def __rmul__(self, c):
        if np.isscalar(c):
            return self.scale(c)
        return NotImplemented

    def __mul__(self, other):
        if np.isscalar(other):
            return self.scale(other)
        return hybrid_product(self, other)

    def adjoint(self):
        return hybrid_involution(self)

    def realize(self, sparse: bool = True):
        """Matrix ``sum_k gamma_k diag(a_k) (x) A_k`` on the product space."""
        n = self.grid.size * self.dim
        M = sp.csr_matrix((n, n), dtype=complex)
        for gamma, a, A in self.terms:
            M = M + gamma * sp.kron(sp.diags(a), sp.csr_matrix(A), format="csr")
        return M if sparse else M.toarray()

    def is_self_adjoint(self, tol=1e-12) -> bool:
        M = self.realize()
        diff = M - M.conj().T
        return (abs(diff).max() if diff.nnz else 0.0) <= tol

    def same_terms(self, other) -> bool:
        """Exact equality of the term lists."""
        if len(self.terms) != len(other.terms):
            return False
        return all(
            g1 == g2 and np.array_equal(a1, a2) and np.array_equal(A1, A2)
            for (g1, a1, A1), (g2, a2, A2) in zip(self.terms, other.terms)
        )

    def __repr__(self):
        return f"HybridOperator(grid={self.grid.n_q}x{self.grid.n_p}, dim={self.dim}, terms={len(self.terms)})"


def hybrid_product(f: HybridOperator, g: HybridOperator) -> HybridOperator:
    """Bilinear extension of ``(a (x) A)(b (x) B) = (a b) (x) (A B)``."""
    g = f._check(g)
    terms = [
        (gf * gg, af * ag, Af @ Ag)
        for gf, af, Af in f.terms
        for gg, ag, Ag in g.terms
    ]
    return HybridOperator(f.grid, f.dim, terms)


def hybrid_involution(f: HybridOperator) -> HybridOperator:
    """``f* = sum_k conj(gamma_k) conj(a_k) (x) A_k^dagger``."""
    return HybridOperator(
        f.grid, f.dim, [(np.conj(g), np.conj(a), A.conj().T) for g, a, A in f.terms]
    )


def smooth_random_function(grid: PhaseSpaceGrid, rng, kmax=2, complex_valued=False):
    """Random low-order trigonometric polynomial on the grid box."""
    tq = 2 * np.pi * (grid.q - grid.q_min) / (grid.q_max - grid.q_min)
    tp = 2 * np.pi * (grid.p - grid.p_min) / (grid.p_max - grid.p_min)
    out = np.zeros(grid.size, dtype=complex)
    for kq in range(-kmax, kmax + 1):
        for kp in range(-kmax, kmax + 1):
            c = rng.standard_normal() + 1j * rng.standard_normal()
            out += c * np.exp(1j * (kq * tq + kp * tp)) / (1 + kq * kq + kp * kp)
    return out if complex_valued else out.real


def random_hybrid_operator(grid, dim, rng, n_terms=3, smooth=True):
    terms = []
    for _ in range(n_terms):
        gamma = rng.standard_normal() + 1j * rng.standard_normal()
        if smooth:
            a = smooth_random_function(grid, rng, complex_valued=True)
        else:
            a = rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size)
        A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        terms.append((gamma, a, A))
    return HybridOperator(grid, dim, terms)


# -- states ------------------------------------------------------------------------


@dataclass(frozen=True)
class HybridState:
    """Family of positive ``d x d`` blocks ``rho(xi)`` with ``dq dp sum Tr rho = 1``."""

    grid: PhaseSpaceGrid
    blocks: np.ndarray

    def __post_init__(self):
        g = self.grid
        B = np.array(self.blocks, dtype=complex)
        if B.ndim != 3 or B.shape[0] != g.size or B.shape[1] != B.shape[2]:
            raise SizeMismatchError(f"expected blocks of shape ({g.size}, d, d), got {B.shape}")
        herm = np.abs(B - B.conj().transpose(0, 2, 1)).max()
        if herm > STATE_TOL:
            raise InvalidDensityError(f"blocks are not Hermitian (defect {herm:.3g})")
        B = 0.5 * (B + B.conj().transpose(0, 2, 1))
        min_eig = np.linalg.eigvalsh(B).min()
        if min_eig < -STATE_TOL:
            raise InvalidDensityError(f"blocks are not positive (min eigenvalue {min_eig:.3g})")
        mass = g.cell_volume * np.trace(B, axis1=1, axis2=2).real.sum()
        if abs(mass - 1.0) > STATE_TOL:
            raise InvalidDensityError(f"hybrid state mass is {mass!r}, expected 1")
        B.setflags(write=False)
        object.__setattr__(self, "blocks", B)

    @classmethod
    def from_unnormalized(cls, grid, blocks):
        B = np.array(blocks, dtype=complex)
        B = 0.5 * (B + B.conj().transpose(0, 2, 1))
        mass = grid.cell_volume * np.trace(B, axis1=1, axis2=2).real.sum()
        if mass <= 0:
            raise InvalidDensityError("hybrid state has zero mass")
        return cls(grid, B / mass)

    @property
    def dim(self) -> int:
        return self.blocks.shape[1]


def product_state(F: ClassicalDensity, rho_Q) -> HybridState:
    """``rho(xi) = F(xi) rho_Q``."""
    rho_Q = np.asarray(rho_Q, dtype=complex)
    return HybridState(F.grid, F.values[:, None, None] * rho_Q[None, :, :])


def random_hybrid_state(grid, dim, rng, kind="correlated", F=None):
    """Random valid state: ``product`` uses one quantum factor, ``correlated`` one per point."""
    from .quantum import random_density_matrix

    if F is None:
        w = rng.random(grid.size) + 0.05
        F = ClassicalDensity.from_unnormalized(grid, w)
    if kind == "product":
        return product_state(F, random_density_matrix(dim, rng))
    if kind == "correlated":
        G = rng.standard_normal((grid.size, dim, dim)) + 1j * rng.standard_normal((grid.size, dim, dim))
        B = G @ G.conj().transpose(0, 2, 1)
        B /= np.trace(B, axis1=1, axis2=2).real[:, None, None]
        return HybridState(grid, F.values[:, None, None] * B)
    raise ConfigurationError(f"unknown random state kind {kind!r}")


class LiftKind(str, enum.Enum):
    BLOCK_DIAGONAL = "block_diagonal"
    COHERENT = "coherent"


@dataclass
class HybridDensityMatrix:
    """Density matrix on the product space, tagged with the lift that produced it.

    Hermiticity and unit trace are enforced. Positivity is measured and
    stored in ``min_eigenvalue``; it is required for the block-diagonal lift
    and only reported for the coherent lift.
    """

    grid: PhaseSpaceGrid
    dim: int
    matrix: np.ndarray = field(repr=False)
    kind: LiftKind = LiftKind.BLOCK_DIAGONAL
    min_eigenvalue: float | None = None
    check: bool = True

    def __post_init__(self):
        self.kind = LiftKind(self.kind)
        M = np.asarray(self.matrix)
        n = self.grid.size * self.dim
        if M.shape != (n, n):
            raise SizeMismatchError(f"expected a {n}x{n} matrix, got {M.shape}")
        if not self.check:
            return
        herm = hermiticity_defect(M)
        if herm > STATE_TOL:
            raise NonHermitianError(f"density matrix is not Hermitian (defect {herm:.3g})")
        tr = np.trace(M).real
        if abs(tr - 1.0) > STATE_TOL:
            raise InvalidDensityError(f"density matrix trace is {tr!r}, expected 1")
        if self.min_eigenvalue is None:
            self.min_eigenvalue = smallest_eigenvalue(M)
        if self.kind is LiftKind.BLOCK_DIAGONAL and self.min_eigenvalue < -STATE_TOL:
            raise InvalidDensityError(f"density matrix is not positive ({self.min_eigenvalue:.3g})")

    @property
    def is_psd(self) -> bool:
        return self.min_eigenvalue is not None and self.min_eigenvalue >= -STATE_TOL

    def blocks4(self) -> np.ndarray:
        """View as ``(N, d, N, d)``."""
        N, d = self.grid.size, self.dim
        return np.asarray(self.matrix).reshape(N, d, N, d)


def _dm_expectation(matrix, f: HybridOperator) -> complex:
    """``Tr(rho_H pi_H(f))`` from the dense matrix."""
    return complex((f.realize().T.multiply(np.asarray(matrix))).sum())


def dm_expectation(rho_H: HybridDensityMatrix, f: HybridOperator) -> complex:
    return _dm_expectation(rho_H.matrix, f)


def hybrid_expectation(state: HybridState, f: HybridOperator) -> complex:
    """``dq dp * sum_xi sum_k gamma_k a_k(xi) Tr(rho(xi) A_k)``."""
    if f.grid != state.grid or f.dim != state.dim:
        raise SizeMismatchError("operator and state live on different spaces")
    total = 0j
    for gamma, a, A in f.terms:
        traces = np.einsum("imn,nm->i", state.blocks, A)
        total += gamma * np.sum(a * traces)
    return state.grid.cell_volume * total


def lift_block_diagonal(state: HybridState) -> HybridDensityMatrix:
    """Block-diagonal lift with the ``xi`` block equal to ``dq dp * rho(xi)``."""
    g, d = state.grid, state.dim
    M = np.zeros((g.size, d, g.size, d), dtype=complex)
    idx = np.arange(g.size)
    M[idx, :, idx, :] = g.cell_volume * state.blocks
    M = M.reshape(g.size * d, g.size * d)
    min_eig = float(g.cell_volume * np.linalg.eigvalsh(state.blocks).min())
    return HybridDensityMatrix(g, d, M, LiftKind.BLOCK_DIAGONAL, min_eig)


def coherent_amplitudes(state: HybridState) -> np.ndarray:
    """Square-root amplitudes ``z[xi, m, m']`` with ``z^2 = <m|rho(xi)|m'>``.

    For ``m <= m'`` the phase of ``<m|rho(xi)|m'>`` is unwrapped along the grid
    ordering (zero where the entry vanishes) and halved; entries with
    ``m > m'`` are the complex conjugates, which makes the lift Hermitian.
    """
    c = state.blocks
    N, d, _ = c.shape
    z = np.zeros_like(c)
    for m in range(d):
        for n in range(m, d):
            r = np.abs(c[:, m, n])
            theta = np.unwrap(np.angle(c[:, m, n]))
            theta[r == 0] = 0.0
            z[:, m, n] = np.sqrt(r) * np.exp(0.5j * theta)
            if n != m:
                z[:, n, m] = np.conj(z[:, m, n])
    return z


def lift_coherent(state: HybridState, check_psd: bool = True) -> HybridDensityMatrix:
    """Lift with entries ``dq dp * sqrt(<m|rho(xi)|m'> <m|rho(xi')|m'>)``."""
    g, d = state.grid, state.dim
    z = coherent_amplitudes(state)
    M = g.cell_volume * np.einsum("imn,jmn->imjn", z, z)
    M = M.reshape(g.size * d, g.size * d)
    min_eig = smallest_eigenvalue(M) if check_psd else float("nan")
    return HybridDensityMatrix(g, d, M, LiftKind.COHERENT, min_eig)


def smallest_eigenvalue(M, dense_limit: int = DENSE_EIG_LIMIT) -> float:
    """Smallest eigenvalue of a Hermitian matrix; Lanczos above ``dense_limit``."""
    M = np.asarray(M)
    if M.shape[0] <= dense_limit:
        return float(np.linalg.eigvalsh(M).min())
    try:
        w = spla.eigsh(M, k=1, which="SA", tol=1e-12, return_eigenvectors=False)
        return float(w[0])
    except spla.ArpackError:
        return float(np.linalg.eigvalsh(M).min())


def lift(state: HybridState, kind="block_diagonal") -> HybridDensityMatrix:
    kind = LiftKind(kind)
    if kind is LiftKind.BLOCK_DIAGONAL:
        return lift_block_diagonal(state)
    return lift_coherent(state)


# -- marginals and identities ------------------------------------------------------


def quantum_marginal(rho_H: HybridDensityMatrix) -> np.ndarray:
    """Partial trace over the classical factor."""
    return np.einsum("imin->mn", rho_H.blocks4())


def classical_marginal(source) -> ClassicalDensity:
    """Classical density ``Tr rho(xi)`` of a state, or of a lift (diagonal trace / dq dp)."""
    if isinstance(source, HybridState):
        values = np.trace(source.blocks, axis1=1, axis2=2).real
        return ClassicalDensity.from_unnormalized(source.grid, np.clip(values, 0, None))
    if isinstance(source, HybridDensityMatrix):
        values = np.einsum("imim->i", source.blocks4()).real / source.grid.cell_volume
        return ClassicalDensity.from_unnormalized(source.grid, np.clip(values, 0, None))
    raise TypeError(f"cannot take a classical marginal of {type(source).__name__}")


def classical_marginal_values(rho_H: HybridDensityMatrix) -> np.ndarray:
    """Unnormalized, unclipped classical marginal of a lift."""
    return np.einsum("imim->i", rho_H.blocks4()).real / rho_H.grid.cell_volume


def partial_trace_power(state: HybridState, k: int, tol: float = 1e-10) -> np.ndarray:
    """Check ``Tr_C(rho_H^k) / (dq dp)^(k-1) = dq dp * sum_xi rho(xi)^k`` and return the right side.

    The left side uses dense powers of the block-diagonal lift, the right
    side per-block powers. The comparison is relative to the largest entry
    of the right side when that exceeds one.
    """
    if int(k) != k or k < 1:
        raise ConfigurationError(f"power must be an integer >= 1, got {k}")
    k = int(k)
    g = state.grid
    rho_H = lift_block_diagonal(state)
    Mk = np.linalg.matrix_power(rho_H.matrix, k)
    N, d = g.size, state.dim
    left = np.einsum("imin->mn", Mk.reshape(N, d, N, d)) / g.cell_volume ** (k - 1)
    right = g.cell_volume * np.linalg.matrix_power(state.blocks, k).sum(axis=0)
    scale = max(1.0, float(np.abs(right).max()))
    err = float(np.abs(left - right).max())
    if err > tol * scale:
        raise IdentityViolation(f"marginal-power identity fails for k={k}: mismatch {err:.3g}")
    return right


def hybrid_entropy(state: HybridState) -> float:
    """``-dq dp * sum_xi Tr(rho(xi) log rho(xi))`` (natural log, ``0 log 0 = 0``)."""
    S, _ = entropy_from_eigenvalues(np.linalg.eigvalsh(state.blocks))
    return state.grid.cell_volume * S


@dataclass
class EntropyReport:
    S_H: float
    S_vN_block: float
    S_vN_coherent: float | None
    offset_residual: float
    log_cell_volume: float
    coherent_min_eigenvalue: float
    coherent_psd: bool


def entropy_equivalence_report(state: HybridState, tol: float = 1e-8) -> EntropyReport:
    """Compare the hybrid entropy with von Neumann entropies of both lifts.

    Asserts ``S_vN(block lift) = S_H - log(dq dp)`` within ``tol``. The
    coherent-lift entropy is reported only when that lift is positive.
    """
    g = state.grid
    S_H = hybrid_entropy(state)
    block = lift_block_diagonal(state)
    S_block, _ = entropy_from_eigenvalues(np.linalg.eigvalsh(block.matrix))
    coh = lift_coherent(state)
    S_coh = None
    if coh.is_psd:
        S_coh, _ = entropy_from_eigenvalues(np.linalg.eigvalsh(coh.matrix))
    log_dv = float(np.log(g.cell_volume))
    residual = S_block - (S_H - log_dv)
    if abs(residual) > tol:
        raise IdentityViolation(f"entropy offset identity fails: residual {residual:.3g}")
    return EntropyReport(S_H, S_block, S_coh, residual, log_dv, coh.min_eigenvalue, coh.is_psd)


# -- maximum entropy ensemble -------------------------------------------------------


def hybrid_energy_blocks(grid, H_C, H_Q, coupling=()) -> np.ndarray:
    """Per-point energy operators ``H_C(xi) I + H_Q + sum_j c_j h_C^j(xi) h_Q^j``."""
    H_Q = np.asarray(H_Q, dtype=complex)
    d = H_Q.shape[0]
    if hermiticity_defect(H_Q) > HERMITIAN_TOL:
        raise NonHermitianError("quantum energy is not Hermitian")
    E = grid.flat(H_C, float)[:, None, None] * np.eye(d)[None] + H_Q[None]
    for h_C, h_Q, c in coupling:
        h_Q = np.asarray(h_Q, dtype=complex)
        if hermiticity_defect(h_Q) > HERMITIAN_TOL:
            raise NonHermitianError("coupling operator is not Hermitian")
        E = E + c * grid.flat(h_C, float)[:, None, None] * h_Q[None]
    return E


def maxent_canonical_state(H_C, H_Q, coupling, beta: float, grid: PhaseSpaceGrid) -> HybridState:
    """Per-point Gibbs state ``exp(-beta H(xi)) / Z`` with ``Z = dq dp sum Tr exp(-beta H(xi))``.

    Each block is diagonalized; the exponent is shifted by the block's lowest
    level and the blocks are recombined with a log-sum-exp so that large
    ``beta`` cannot overflow. ``beta = 0`` gives the uniform maximally mixed state.
    """
    if not np.isfinite(beta) or beta < 0:
        raise ConfigurationError(f"inverse temperature must be >= 0, got {beta}")
    E = hybrid_energy_blocks(grid, H_C, H_Q, coupling)
    w, V = np.linalg.eigh(E)
    shift = w[:, :1]
    log_w = -beta * (w - shift)                     # <= 0
    # block offsets relative to the global ground level, exactly 0 at its cell
    rel = -beta * (shift[:, 0] - shift.min())
    log_Z = np.log(grid.cell_volume) + logsumexp(rel + logsumexp(log_w, axis=1))
    p = np.exp(log_w + (rel - log_Z)[:, None])
    blocks = np.einsum("imk,ik,ink->imn", V, p, V.conj())
    return HybridState(grid, blocks)
