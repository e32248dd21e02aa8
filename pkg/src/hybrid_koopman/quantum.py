"""Finite-dimensional quantum states and operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DensityMatrixError, NonHermitianError, SizeMismatchError

STATE_TOL = 1e-10
HERMITIAN_TOL = 1e-12
#: Eigenvalues below this are treated as zero in entropies.
EIGEN_CLIP = 1e-14

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise SizeMismatchError(f"expected a square matrix, got shape {M.shape}")
    return M


def hermiticity_defect(M) -> float:
    M = np.asarray(M)
    return float(np.abs(M - M.conj().T).max()) if M.size else 0.0


@dataclass(frozen=True)
class QuantumOperator:
    """A ``d x d`` complex matrix with ``d >= 2``."""

    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        M = _square(self.matrix)
        if M.shape[0] < 2:
            raise SizeMismatchError("quantum dimension must be at least 2")
        if not np.all(np.isfinite(M)):
            raise ValueError("operator has non-finite entries")
        if self.hermitian and hermiticity_defect(M) > HERMITIAN_TOL:
            raise NonHermitianError(f"operator is not Hermitian (defect {hermiticity_defect(M):.3g})")
        M = M.copy()
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class QuantumState:
    """Validated density matrix: Hermitian, positive semidefinite, unit trace."""

    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


def density_matrix_violations(M, tol: float = STATE_TOL) -> list[tuple[str, float]]:
    """List of ``(invariant, size)`` for every density-matrix condition that fails."""
    M = _square(M)
    out = []
    herm = hermiticity_defect(M)
    if herm > tol:
        out.append(("hermiticity", herm))
    H = 0.5 * (M + M.conj().T)
    min_eig = float(np.linalg.eigvalsh(H).min())
    if min_eig < -tol:
        out.append(("positivity", min_eig))
    tr = np.trace(M)
    if abs(tr - 1.0) > tol:
        out.append(("trace", float(abs(tr - 1.0))))
    return out


def validate_density_matrix(M, tol: float = STATE_TOL) -> QuantumState:
    """Return ``M`` as a :class:`QuantumState` or raise with a violation report.

    Raises
    ------
    DensityMatrixError
        ``.violations`` lists the failing invariants in the order
        hermiticity, positivity, trace.
    """
    violations = density_matrix_violations(M, tol)
    if violations:
        raise DensityMatrixError(violations)
    M = _square(M).copy()
    M.setflags(write=False)
    return QuantumState(M)


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, QuantumState) else _square(rho)


def entropy_from_eigenvalues(eigs, clip: float = EIGEN_CLIP) -> tuple[float, float]:
    """``-sum(l log l)`` over eigenvalues above ``clip``.

    Returns the entropy and the total magnitude of the discarded eigenvalues.
    """
    eigs = np.asarray(eigs, dtype=float).ravel()
    keep = eigs > clip
    clipped = float(np.abs(eigs[~keep]).sum())
    lam = eigs[keep]
    return float(-(lam * np.log(lam)).sum()), clipped


def von_neumann_entropy(rho, validate: bool = True) -> float:
    """Natural-log von Neumann entropy ``-Tr(rho log rho)``."""
    M = _as_matrix(rho)
    if validate and not isinstance(rho, QuantumState):
        M = validate_density_matrix(M).matrix
    S, _ = entropy_from_eigenvalues(np.linalg.eigvalsh(M))
    return S


def purity(rho) -> float:
    M = _as_matrix(rho)
    return float(np.real(np.vdot(M.conj().T, M)))


def commutator(A, B) -> np.ndarray:
    A = _square(A)
    B = _square(B)
    if A.shape != B.shape:
        raise SizeMismatchError(f"shape mismatch {A.shape} vs {B.shape}")
    return A @ B - B @ A


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    Z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    G = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    M = G @ G.conj().T
    return M / np.trace(M).real


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (G + G.conj().T)
