"""Hybrid Hamiltonians, unitary propagation and generator diagnostics.

An admissible hybrid Hamiltonian on ``L2(grid) (x) C^d`` has the form

    H = L_C (x) I + I (x) H_Q + sum_j c_j diag(h_C^j) (x) h_Q^j  [+ diag(H~_C) (x) I]

where ``L_C`` is the Koopman Liouvillian of the classical energy. Coupling
terms are multiplicative in the classical factor; terms containing the
conjugate momenta would break the classical algebra and are only built here
on purpose, as negative controls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .classical_koopman import (
    KRYLOV_TOL,
    band_limited_probes,
    build_liouvillian,
    weak_multiplicative_fit,
)
from .errors import (
    ConfigurationError,
    DecompositionError,
    NonHermitianError,
    NonlinearGeneratorError,
    OracleUnavailableError,
    SizeMismatchError,
)
from .hybrid_algebra import (
    HybridDensityMatrix,
    HybridOperator,
    HybridState,
    LiftKind,
    classical_marginal_values,
    lift,
    maxent_canonical_state,
    quantum_marginal,
    random_hybrid_operator,
    random_hybrid_state,
)
from .krylov import expm_krylov
from .phase_space import (
    ClassicalDensity,
    PhaseSpaceGrid,
    get_preset,
    hamiltonian_field,
    liouville_oracle,
)
from .quantum import HERMITIAN_TOL, entropy_from_eigenvalues, hermiticity_defect, purity

#: Product-space size up to which ``evolve_state(method="auto")`` always diagonalizes.
SPECTRAL_LIMIT = 512
#: Largest factor rank propagated column by column with Krylov in "auto" mode.
LOW_RANK_LIMIT = 16


class HybridHamiltonian:
    """Realized admissible hybrid Hamiltonian.

    Parameters
    ----------
    grid : PhaseSpaceGrid
    classical_energy : array_like
        ``H_C`` sampled on the grid (real).
    quantum_term : array_like
        Hermitian ``d x d`` matrix ``H_Q``.
    coupling : sequence of (h_C, h_Q, c)
        Multiplicative couplings ``c * h_C (x) h_Q`` with real ``h_C``, ``c``
        and Hermitian ``h_Q``.
    classical_term : array_like, optional
        Multiplicative ``H~_C (x) I`` term.
    order, spectral : int, bool
        Differentiation scheme of the Liouvillian.
    preset : str, optional
        Name of the flow preset ``H_C`` corresponds to, when there is one.
    """

    def __init__(self, grid: PhaseSpaceGrid, classical_energy, quantum_term, coupling=(),
                 classical_term=None, order: int = 2, spectral: bool = False, preset=None):
        self.grid = grid
        H_C = np.asarray(classical_energy)
        if np.iscomplexobj(H_C) and np.abs(H_C.imag).max() > 0:
            raise ConfigurationError("classical energy must be real")
        self.classical_energy = grid.flat(H_C.real, float)
        H_Q = np.asarray(quantum_term, dtype=complex)
        if H_Q.ndim != 2 or H_Q.shape[0] != H_Q.shape[1]:
            raise SizeMismatchError(f"quantum term must be square, got {H_Q.shape}")
        if hermiticity_defect(H_Q) > HERMITIAN_TOL:
            raise NonHermitianError("quantum term is not Hermitian")
        self.quantum_term = H_Q
        self.dim = H_Q.shape[0]
        terms = []
        for h_C, h_Q, c in coupling:
            h_C = np.asarray(h_C)
            if np.iscomplexobj(h_C) and np.abs(h_C.imag).max() > 0:
                raise ConfigurationError("coupling classical factor must be real")
            if np.iscomplexobj(c) and np.imag(c) != 0:
                raise ConfigurationError("coupling strength must be real")
            h_Q = np.asarray(h_Q, dtype=complex)
            if h_Q.shape != H_Q.shape:
                raise SizeMismatchError(f"coupling operator must be {self.dim}x{self.dim}")
            if hermiticity_defect(h_Q) > HERMITIAN_TOL:
                raise NonHermitianError("coupling operator is not Hermitian")
            terms.append((grid.flat(h_C.real, float), h_Q, float(np.real(c))))
        self.coupling = tuple(terms)
        self.classical_term = None if classical_term is None else grid.flat(classical_term, float)
        self.order = order
        self.spectral = spectral
        self.preset = preset
        self.liouvillian = build_liouvillian(hamiltonian_field(self.classical_energy.reshape(grid.shape), grid),
                                             order=order, spectral=spectral)

    @property
    def size(self) -> int:
        return self.grid.size * self.dim

    @property
    def decoupled(self) -> bool:
        return all(c == 0 for _, _, c in self.coupling)

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        d = self.dim
        Id = sp.identity(d, format="csr")
        M = sp.kron(self.liouvillian.matrix, Id, format="csr")
        M = M + sp.kron(sp.identity(self.grid.size), sp.csr_matrix(self.quantum_term), format="csr")
        for h_C, h_Q, c in self.coupling:
            M = M + c * sp.kron(sp.diags(h_C), sp.csr_matrix(h_Q), format="csr")
        if self.classical_term is not None:
            M = M + sp.kron(sp.diags(self.classical_term), Id, format="csr")
        M = sp.csr_matrix(M)
        M.sum_duplicates()
        return M

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def matvec(self, v):
        return self.matrix @ v

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    @cached_property
    def propagator(self) -> "SpectralPropagator":
        return SpectralPropagator(self.matrix)

    def energy_data(self):
        """``(H_C, H_Q, coupling)`` as accepted by :func:`maxent_canonical_state`."""
        return self.classical_energy, self.quantum_term, [(h, A, c) for h, A, c in self.coupling]

    def with_coupling(self, coupling) -> "HybridHamiltonian":
        return HybridHamiltonian(self.grid, self.classical_energy, self.quantum_term, coupling,
                                 self.classical_term, self.order, self.spectral, self.preset)


def build_hybrid_hamiltonian(grid, H_C, H_Q, coupling=(), classical_term=None, *,
                             order: int = 2, spectral: bool = False, preset=None) -> HybridHamiltonian:
    """Assemble and check an admissible hybrid Hamiltonian.

    ``H_C`` may be an array on the grid or a preset name.
    """
    if isinstance(H_C, str):
        preset = H_C
        H_C = get_preset(H_C).sample(grid)
    H = HybridHamiltonian(grid, H_C, H_Q, coupling, classical_term, order, spectral, preset)
    defect = H.hermiticity_defect()
    if defect > HERMITIAN_TOL:
        raise NonHermitianError(f"hybrid Hamiltonian is not Hermitian (defect {defect:.3g})")
    return H


def qubit_oscillator(grid, omega=1.0, coupling=0.5, **kwargs) -> HybridHamiltonian:
    """Harmonic oscillator ``(q^2+p^2)/2`` coupled to a qubit through ``coupling * q (x) sigma_x``."""
    from .quantum import SIGMA_X, SIGMA_Z

    return build_hybrid_hamiltonian(grid, "harmonic", 0.5 * omega * SIGMA_Z,
                                    [(grid.q, SIGMA_X, coupling)], **kwargs)


# -- algebra preservation ----------------------------------------------------------


@dataclass
class PreservationReport:
    max_residual: float
    residuals: list
    tol: float
    passed: bool


def _as_sparse(H):
    if isinstance(H, HybridHamiltonian):
        return H.matrix
    return sp.csr_matrix(H)


def block_residual(C, grid: PhaseSpaceGrid, d: int, probes) -> float:
    """Weak multiplicative residual of the ``d^2`` classical blocks of ``C``, combined.

    Each block ``C[m::d, m'::d]`` is fitted by its best pointwise multiplier
    on the probes; the misfits are combined in quadrature and divided by the
    norm of the probe block.
    """
    if not sp.issparse(C):
        C = np.asarray(C)
    total = 0.0
    for m in range(d):
        for n in range(d):
            r, _ = weak_multiplicative_fit(C[m::d, n::d], probes)
            total += r * r
    return math.sqrt(total)


def check_algebra_preservation(H, samples, tol: float = 1e-2, probes=None) -> PreservationReport:
    """Check that ``[pi_H(f), H]`` stays in the hybrid algebra for each sample ``f``.

    Finite-difference commutators are multiplicative only up to the stencil
    error, so the blocks are tested weakly on band-limited probes. An
    admissible Hamiltonian gives residuals of order ``dq^2``; a coupling
    through conjugate momenta gives a residual that does not shrink with the
    grid. Choose ``tol`` accordingly.
    """
    samples = list(samples)
    if not samples:
        raise ConfigurationError("at least one sample operator is required")
    grid, d = samples[0].grid, samples[0].dim
    Hs = _as_sparse(H)
    if Hs.shape != (grid.size * d,) * 2:
        raise SizeMismatchError("Hamiltonian and samples live on different spaces")
    if probes is None:
        probes = band_limited_probes(grid)
    residuals = []
    for f in samples:
        F = f.realize()
        C = F @ Hs - Hs @ F
        residuals.append(block_residual(C, grid, d, probes))
    worst = max(residuals)
    return PreservationReport(worst, residuals, tol, worst <= tol)


def observed_orders(spacings, residuals) -> np.ndarray:
    """Convergence orders ``log(r_i / r_{i+1}) / log(h_i / h_{i+1})``."""
    h = np.asarray(spacings, float)
    r = np.asarray(residuals, float)
    return np.log(r[:-1] / r[1:]) / np.log(h[:-1] / h[1:])


# -- propagation ---------------------------------------------------------------------


class SpectralPropagator:
    """Cached eigendecomposition ``H = V diag(w) V^dagger`` and the maps it induces."""

    def __init__(self, H):
        A = H.toarray() if sp.issparse(H) else np.asarray(H)
        if hermiticity_defect(A) > HERMITIAN_TOL:
            raise NonHermitianError("generator is not Hermitian")
        try:
            self.w, self.V = np.linalg.eigh(A)
        except np.linalg.LinAlgError as exc:
            raise DecompositionError(f"eigendecomposition failed: {exc}") from exc

    def unitary(self, t):
        return (self.V * np.exp(-1j * self.w * t)) @ self.V.conj().T

    def to_eigenbasis(self, M):
        return self.V.conj().T @ M @ self.V

    def from_eigenbasis(self, X, t):
        """``U(t) M U(t)^dagger`` given ``X = V^dagger M V``."""
        ph = np.exp(-1j * self.w * t)
        return self.V @ ((ph[:, None] * X * ph.conj()[None, :]) @ self.V.conj().T)

    def evolve(self, M, t):
        return self.from_eigenbasis(self.to_eigenbasis(M), t)

    def evolve_observable(self, F, t):
        return self.evolve(F, -t)

    def evolve_vector(self, v, t):
        return self.V @ (np.exp(-1j * self.w * t) * (self.V.conj().T @ v))


def low_rank_factor(M, tol: float = 1e-13, max_rank: int | None = None):
    """Pivoted Cholesky factor ``L`` with ``M ~ L L^dagger`` for a PSD matrix.

    Stops when the largest remaining diagonal entry is below ``tol`` times the
    trace. Returns ``None`` if ``max_rank`` columns are not enough or the
    matrix is visibly indefinite.
    """
    M = np.asarray(M)
    n = M.shape[0]
    max_rank = n if max_rank is None else max_rank
    diag = M.diagonal().real.copy()
    scale = max(diag.sum(), np.finfo(float).tiny)
    cols = []
    while True:
        j = int(np.argmax(diag))
        if diag[j] <= tol * scale:
            break
        if len(cols) >= max_rank:
            return None
        col = M[:, j].copy()
        for c in cols:
            col -= c * np.conj(c[j])
        col /= math.sqrt(diag[j])
        cols.append(col)
        diag -= np.abs(col) ** 2
        if diag.min() < -1e3 * tol * scale:
            return None
    if not cols:
        return np.zeros((n, 0), dtype=complex)
    L = np.array(cols).T
    resid = np.abs(M - L @ L.conj().T).max()
    if resid > 1e3 * tol * scale:
        return None
    return L


def _rk4_commutator(H, M, t, dt, sign=-1.0):
    """RK4 for ``dM/dt = sign * i [H, M]``."""
    n_steps = max(1, int(math.ceil(abs(t) / dt - 1e-9)))
    h = t / n_steps

    def rhs(X):
        return sign * 1j * (H @ X - (H.T @ X.T).T)

    X = np.array(M, dtype=complex)
    for _ in range(n_steps):
        k1 = rhs(X)
        k2 = rhs(X + 0.5 * h * k1)
        k3 = rhs(X + 0.5 * h * k2)
        k4 = rhs(X + h * k3)
        X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def _wrap(rho_H: HybridDensityMatrix, M) -> HybridDensityMatrix:
    # unitary flows keep the spectrum, so the stored minimum eigenvalue carries over
    return HybridDensityMatrix(rho_H.grid, rho_H.dim, M, rho_H.kind, rho_H.min_eigenvalue)


def evolve_state(rho_H: HybridDensityMatrix, H: HybridHamiltonian, t: float, method: str = "auto",
                 dt: float = 1e-3, tol: float = KRYLOV_TOL) -> HybridDensityMatrix:
    """``U(t) rho_H U(t)^dagger`` with ``U(t) = exp(-i t H)``.

    Methods
    -------
    spectral : dense eigendecomposition of ``H``, cached on ``H``.
    krylov : Lanczos propagation of the columns of a pivoted-Cholesky factor
        of ``rho_H``; efficient for low-rank states.
    rk4 : fourth-order Runge-Kutta on ``d rho/dt = -i [H, rho]`` with step
        ``dt``; kept as an independent cross-check.
    auto : spectral for small spaces or full-rank states, krylov otherwise.
    """
    if rho_H.grid != H.grid or rho_H.dim != H.dim:
        raise SizeMismatchError("state and Hamiltonian live on different spaces")
    M = np.asarray(rho_H.matrix)
    if t == 0:
        return _wrap(rho_H, M.copy())
    factor = None
    if method == "auto":
        method = "spectral"
        if H.size > SPECTRAL_LIMIT and "propagator" not in H.__dict__:
            factor = low_rank_factor(M, max_rank=LOW_RANK_LIMIT)
            if factor is not None:
                method = "krylov"
    if method == "spectral":
        out = H.propagator.evolve(M, t)
    elif method == "krylov":
        if factor is None:
            factor = low_rank_factor(M)
        if factor is None:
            raise DecompositionError("state is not positive semidefinite; cannot factor it")
        cols = [expm_krylov(H.matvec, factor[:, k], t, tol=tol) for k in range(factor.shape[1])]
        Lt = np.array(cols).T if cols else factor
        out = Lt @ Lt.conj().T
    elif method == "rk4":
        out = _rk4_commutator(H.matrix, M, t, dt)
    else:
        raise ConfigurationError(f"unknown propagation method {method!r}")
    return _wrap(rho_H, out)


def evolve_observable(F, H: HybridHamiltonian, t: float) -> np.ndarray:
    """Heisenberg picture ``U(t)^dagger F U(t)`` of a realized product-space operator."""
    if isinstance(F, HybridOperator):
        F = F.realize(sparse=False)
    F = F.toarray() if sp.issparse(F) else np.asarray(F)
    if t == 0:
        return F.copy()
    return H.propagator.evolve_observable(F, t)


def evolve_trajectory(rho_H: HybridDensityMatrix, H: HybridHamiltonian, times, method="auto"):
    """States at each of ``times``; reuses one factorization for all samples."""
    times = list(times)
    M = np.asarray(rho_H.matrix)
    if method == "auto" and H.size > SPECTRAL_LIMIT and "propagator" not in H.__dict__:
        L = low_rank_factor(M, max_rank=LOW_RANK_LIMIT)
        if L is not None:
            out = []
            prev_t, cols = 0.0, [L[:, k] for k in range(L.shape[1])]
            for t in times:
                cols = [expm_krylov(H.matvec, c, t - prev_t) for c in cols]
                prev_t = t
                Lt = np.array(cols).T
                out.append(_wrap(rho_H, Lt @ Lt.conj().T))
            return out
    if method in ("auto", "spectral"):
        X = H.propagator.to_eigenbasis(M)
        return [_wrap(rho_H, H.propagator.from_eigenbasis(X, t)) for t in times]
    return [evolve_state(rho_H, H, t, method=method) for t in times]


# -- back-reaction --------------------------------------------------------------------


@dataclass
class BackReactionReport:
    times: np.ndarray
    deviation: np.ndarray
    marginals: np.ndarray = field(repr=False)
    quantum_purity: np.ndarray = field(default=None)
    lift: str = "coherent"


def back_reaction_probe(state0: HybridState, H: HybridHamiltonian, times, preset=None,
                        lift_kind="coherent", method="auto") -> BackReactionReport:
    """Classical marginal of the evolved lift against the purely classical flow.

    The initial classical marginal is transported along the exact flow of the
    preset ``H_C`` and compared in the max norm with the classical marginal
    of the hybrid evolution at each time. Running the probe with and without
    coupling shows whether the quantum factor acts back on the classical one.
    """
    preset = preset or H.preset
    if preset is None:
        raise OracleUnavailableError("back-reaction probe needs a preset classical flow")
    get_preset(preset)
    times = np.asarray(list(times), float)
    F0 = ClassicalDensity.from_unnormalized(
        state0.grid, np.trace(state0.blocks, axis1=1, axis2=2).real)
    rho0 = lift(state0, lift_kind)
    states = evolve_trajectory(rho0, H, times, method)
    marg, dev, pur = [], [], []
    for t, rho in zip(times, states):
        m = classical_marginal_values(rho)
        marg.append(m)
        oracle = liouville_oracle(F0, preset, float(t))
        dev.append(float(np.abs(m - oracle.values).max()))
        pur.append(purity(quantum_marginal(rho)))
    return BackReactionReport(times, np.array(dev), np.array(marg), np.array(pur), LiftKind(lift_kind).value)


# -- canonical ensemble ------------------------------------------------------------------


@dataclass
class DriftReport:
    times: np.ndarray
    rho_drift: np.ndarray
    block_drift: np.ndarray
    lift: str

    @property
    def max_rho_drift(self) -> float:
        return float(self.rho_drift.max())

    @property
    def max_block_drift(self) -> float:
        return float(self.block_drift.max())


def canonical_stationarity(beta: float, H: HybridHamiltonian, lift_kind="coherent", period=None,
                           n_samples: int = 4, method="auto") -> DriftReport:
    """Drift of the lifted canonical state over one period of the classical flow.

    Reports the Frobenius drift of the whole density matrix and the largest
    Frobenius drift of the per-point blocks ``rho(xi)`` read off its
    classical diagonal.
    """
    if period is None:
        if H.preset is None or get_preset(H.preset).period is None:
            raise ConfigurationError("no characteristic period known; pass period explicitly")
        period = get_preset(H.preset).period
    grid = H.grid
    state = maxent_canonical_state(*H.energy_data()[:2], H.energy_data()[2], beta, grid)
    rho0 = lift(state, lift_kind)
    times = np.linspace(0, period, n_samples + 1)[1:]
    M0 = np.asarray(rho0.matrix)
    B0 = rho0.blocks4()
    idx = np.arange(grid.size)
    rho_drift, block_drift = [], []
    for rho in evolve_trajectory(rho0, H, times, method):
        rho_drift.append(float(np.linalg.norm(np.asarray(rho.matrix) - M0)))
        Bt = rho.blocks4()
        diff = (Bt[idx, :, idx, :] - B0[idx, :, idx, :]) / grid.cell_volume
        block_drift.append(float(np.sqrt((np.abs(diff) ** 2).sum(axis=(1, 2))).max()))
    return DriftReport(times, np.array(rho_drift), np.array(block_drift), LiftKind(lift_kind).value)


# -- general linear generators ------------------------------------------------------------


class LinearGenerator:
    """Linear map on product-space operators, in both pictures.

    ``state_map`` is the generator of the master equation ``d rho/dt = G(rho)``;
    ``observable_map`` is its Hilbert-Schmidt adjoint, generating the flow of
    observables.
    """

    def __init__(self, dim: int, state_map, observable_map, name: str = "generator", hamiltonian=None):
        self.dim = int(dim)
        self.state_map = state_map
        self.observable_map = observable_map
        self.name = name
        # set for commutator generators; lets flows use the exact unitary
        self.hamiltonian = hamiltonian

    @classmethod
    def from_hamiltonian(cls, H):
        Hs = _as_sparse(H)

        def state_map(X):
            return -1j * (Hs @ X - (Hs.T @ X.T).T)

        def observable_map(X):
            return 1j * (Hs @ X - (Hs.T @ X.T).T)

        return cls(Hs.shape[0], state_map, observable_map, "hamiltonian", hamiltonian=Hs)

    @classmethod
    def from_superoperator(cls, S, dim: int):
        """``S`` acts on row-major vectorized operators."""
        S = np.asarray(S, dtype=complex)
        if S.shape != (dim * dim, dim * dim):
            raise SizeMismatchError(f"superoperator must be {dim * dim}x{dim * dim}")
        Sh = S.conj().T
        return cls(dim, lambda X: (S @ np.asarray(X).reshape(-1)).reshape(dim, dim),
                   lambda X: (Sh @ np.asarray(X).reshape(-1)).reshape(dim, dim), "superoperator")

    @classmethod
    def zero(cls, dim: int):
        return cls(dim, lambda X: np.zeros_like(X, dtype=complex),
                   lambda X: np.zeros_like(X, dtype=complex), "zero")

    def check_linearity(self, rng, n_pairs: int = 3, tol: float = 1e-10):
        n = self.dim
        for fn in (self.state_map, self.observable_map):
            for _ in range(n_pairs):
                X = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
                Y = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
                a, b = rng.standard_normal(2) + 1j * rng.standard_normal(2)
                lhs = np.asarray(fn(a * X + b * Y))
                rhs = a * np.asarray(fn(X)) + b * np.asarray(fn(Y))
                scale = max(1.0, np.abs(rhs).max())
                if np.abs(lhs - rhs).max() > tol * scale:
                    raise NonlinearGeneratorError(f"{self.name} is not linear")


@dataclass
class ValidatorReport:
    trace_derivative_residual: float
    positivity_min_eig_along_flow: float
    automorphism_residual: float
    entropy_drift: float
    entropy_decrease: float
    cholesky_failures: int
    verdict: dict
    thresholds: dict
    seed: int
    n_states: int
    n_operators: int

    @property
    def passed(self) -> bool:
        return all(self.verdict.values())


DEFAULT_THRESHOLDS = {"trace": 1e-10, "positivity": -1e-9, "automorphism": 5e-2, "entropy": 1e-8}


def validator_probes(grid, d, seed: int = 0, n_states: int = 10, n_operators: int = 20):
    """Fixed-seed probe set: half product, half correlated states; operators with 1-3 terms."""
    rng = np.random.default_rng(seed)
    states = [random_hybrid_state(grid, d, rng, kind="product" if k < n_states // 2 else "correlated")
              for k in range(n_states)]
    ops = [random_hybrid_operator(grid, d, rng, n_terms=int(rng.integers(1, 4)))
           for _ in range(n_operators)]
    return states, ops


def _step_operator(G: LinearGenerator, h: float, picture: str):
    """``h`` times the generator as a linear operator on row-major vectorized matrices.

    The adjoint map supplies ``rmatvec``, which the norm estimates of
    :func:`scipy.sparse.linalg.expm_multiply` require.
    """
    n = G.dim
    fwd, adj = ((G.state_map, G.observable_map) if picture == "state"
                else (G.observable_map, G.state_map))
    op = spla.LinearOperator(
        (n * n, n * n),
        matvec=lambda v: np.asarray(fwd(v.reshape(n, n))).reshape(-1),
        rmatvec=lambda v: np.asarray(adj(v.reshape(n, n))).reshape(-1),
        dtype=complex,
    )
    return op * h


def _stepper(G: LinearGenerator, h: float, picture: str):
    """Map advancing an operator by one sample interval ``h``."""
    if G.hamiltonian is not None:
        U = SpectralPropagator(G.hamiltonian).unitary(h if picture == "state" else -h)
        Ud = U.conj().T
        return lambda X: U @ X @ Ud
    op = _step_operator(G, h, picture)

    def advance(X):
        n = X.shape[0]
        return spla.expm_multiply(op, X.reshape(-1), traceA=0.0).reshape(n, n)

    return advance


def validate_linear_generator(G: LinearGenerator, grid: PhaseSpaceGrid, horizon: float = 1.0,
                              dt: float = 1e-2, thresholds=None, seed: int = 0, probes=None,
                              lift_kind="block_diagonal", check_every: int = 10) -> ValidatorReport:
    """Worst-case admissibility residuals of ``G`` over a fixed probe set.

    Probe states are lifted and evolved with ``exp(t G)``, sampled every
    ``dt`` up to ``horizon``. At each sample the trace derivative
    ``|Tr G(rho)|``, the minimum eigenvalue, a Cholesky factorization attempt
    and the entropy change are recorded. Probe observables are evolved with
    the adjoint map and their classical blocks tested for weak
    multiplicativity every ``check_every`` samples.
    """
    d = G.dim // grid.size
    if d * grid.size != G.dim:
        raise SizeMismatchError("generator dimension is not a multiple of the grid size")
    thr = dict(DEFAULT_THRESHOLDS)
    thr.update(thresholds or {})
    G.check_linearity(np.random.default_rng(seed + 1))
    states, ops = probes if probes is not None else validator_probes(grid, d, seed)
    n_steps = max(1, int(math.ceil(horizon / dt - 1e-9)))
    h = horizon / n_steps
    state_step = _stepper(G, h, "state")
    obs_step = _stepper(G, h, "observable")

    trace_res, min_eig, ent_drift, ent_dec, chol_fail = 0.0, np.inf, 0.0, 0.0, 0
    for st in states:
        rho = np.asarray(lift(st, lift_kind).matrix, dtype=complex)
        S0 = None
        for step in range(n_steps + 1):
            trace_res = max(trace_res, abs(np.trace(G.state_map(rho))))
            Hm = 0.5 * (rho + rho.conj().T)
            eigs = np.linalg.eigvalsh(Hm)
            min_eig = min(min_eig, float(eigs.min()))
            try:
                np.linalg.cholesky(Hm + 1e-12 * np.eye(Hm.shape[0]))
            except np.linalg.LinAlgError:
                chol_fail += 1
            tr = eigs.sum()
            S, _ = entropy_from_eigenvalues(eigs / tr if tr > 0 else eigs)
            if S0 is None:
                S0 = S
            ent_drift = max(ent_drift, abs(S - S0))
            ent_dec = max(ent_dec, S0 - S)
            if step < n_steps:
                rho = state_step(rho)

    probe_fns = band_limited_probes(grid)
    auto_res = 0.0
    for f in ops:
        F = np.asarray(f.realize(sparse=False))
        norm0 = _block_scale(F, grid, d, probe_fns)
        for step in range(n_steps + 1):
            if step % check_every == 0 or step == n_steps:
                r = block_residual(F, grid, d, probe_fns) / max(norm0, 1e-300)
                auto_res = max(auto_res, r)
            if step < n_steps:
                F = obs_step(F)

    verdict = {
        "trace": trace_res <= thr["trace"],
        "positivity": min_eig >= thr["positivity"],
        "automorphism": auto_res <= thr["automorphism"],
        "entropy": ent_dec <= thr["entropy"],
    }
    return ValidatorReport(float(trace_res), float(min_eig), float(auto_res), float(ent_drift),
                           float(max(ent_dec, 0.0)), chol_fail, verdict, thr, seed,
                           len(states), len(ops))


def _block_scale(F, grid, d, probes) -> float:
    """Norm of the action of all classical blocks of ``F`` on the probes, per probe norm."""
    Phi = np.asarray(probes).T
    total = 0.0
    for m in range(d):
        for n in range(d):
            total += np.linalg.norm(np.asarray(F[m::d, n::d] @ Phi)) ** 2
    return math.sqrt(total) / np.linalg.norm(Phi)
