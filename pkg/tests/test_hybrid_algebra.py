import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybrid_koopman.classical_koopman import classical_gns_dm
from hybrid_koopman.errors import ConfigurationError, InvalidDensityError, SizeMismatchError
from hybrid_koopman.hybrid_algebra import (
    HybridDensityMatrix,
    HybridOperator,
    HybridState,
    LiftKind,
    classical_marginal,
    coherent_amplitudes,
    dm_expectation,
    entropy_equivalence_report,
    hybrid_entropy,
    hybrid_expectation,
    hybrid_involution,
    hybrid_product,
    lift,
    lift_block_diagonal,
    lift_coherent,
    maxent_canonical_state,
    partial_trace_power,
    product_state,
    quantum_marginal,
    random_hybrid_operator,
    random_hybrid_state,
)
from hybrid_koopman.phase_space import ClassicalDensity, build_grid, riemann_integral
from hybrid_koopman.quantum import SIGMA_X, SIGMA_Y, SIGMA_Z, random_density_matrix, von_neumann_entropy

G = build_grid((-1, 1, -1, 1), 4, 4)


def _point_mass(grid, k):
    v = np.zeros(grid.size)
    v[k] = 1 / grid.cell_volume
    return ClassicalDensity(grid, v)


def test_product_unit_and_pauli():
    rng = np.random.default_rng(0)
    f = random_hybrid_operator(G, 2, rng)
    one = HybridOperator.identity(G, 2)
    assert np.allclose((one * f).realize(False), f.realize(False), atol=1e-14)
    a = HybridOperator.separable(G, G.q, SIGMA_X)
    b = HybridOperator.separable(G, G.p, SIGMA_Y)
    ab = hybrid_product(a, b)
    (gamma, c, C), = ab.terms
    assert gamma == 1
    assert np.allclose(c, G.q * G.p)
    assert np.allclose(C, 1j * SIGMA_Z)


def test_product_realization_and_mismatch(rng):
    f = random_hybrid_operator(G, 3, rng)
    g = random_hybrid_operator(G, 3, rng)
    lhs = (f * g).realize(False)
    rhs = f.realize(False) @ g.realize(False)
    assert np.abs(lhs - rhs).max() <= 1e-12 * max(1, np.abs(rhs).max())
    with pytest.raises(SizeMismatchError):
        f * random_hybrid_operator(G, 2, rng)
    with pytest.raises(SizeMismatchError):
        HybridOperator(G, 2, [(1, G.q, np.eye(3))])


def test_involution(rng):
    f = HybridOperator.separable(G, G.q, SIGMA_X, gamma=1j)
    (gamma, a, A), = hybrid_involution(f).terms
    assert gamma == -1j and np.array_equal(A, SIGMA_X)
    f = random_hybrid_operator(G, 2, rng)
    g = random_hybrid_operator(G, 2, rng)
    assert f.adjoint().adjoint().same_terms(f)
    assert np.allclose((f * g).adjoint().realize(False), (g.adjoint() * f.adjoint()).realize(False))
    assert np.allclose(f.adjoint().realize(False), f.realize(False).conj().T)
    assert np.linalg.norm(f.realize(False)) == pytest.approx(np.linalg.norm(f.adjoint().realize(False)), rel=1e-12)
    ff = (f.adjoint() * f).realize(False)
    assert np.linalg.eigvalsh(0.5 * (ff + ff.conj().T)).min() > -1e-10


def test_algebra_arithmetic(rng):
    f = random_hybrid_operator(G, 2, rng)
    g = random_hybrid_operator(G, 2, rng)
    assert np.allclose((f + g - f).realize(False), g.realize(False), atol=1e-12)
    assert np.allclose((2 * f).realize(False), 2 * f.realize(False))
    assert (f + f.adjoint()).is_self_adjoint()


def test_state_validation():
    B = np.tile(np.eye(2) / 2, (G.size, 1, 1)) / (G.size * G.cell_volume)
    HybridState(G, B)
    with pytest.raises(InvalidDensityError):
        HybridState(G, 2 * B)
    bad = B.copy()
    bad[0] += np.diag([0.2, -0.2])
    with pytest.raises(InvalidDensityError):
        HybridState(G, bad)
    with pytest.raises(SizeMismatchError):
        HybridState(G, B[:-1])
    s = HybridState(G, B)
    with pytest.raises(ValueError):
        s.blocks[0, 0, 0] = 1


def test_expectation_normalization_and_factorization(rng):
    F = ClassicalDensity.from_unnormalized(G, rng.random(G.size))
    rq = random_density_matrix(2, rng)
    s = product_state(F, rq)
    assert hybrid_expectation(s, HybridOperator.identity(G, 2)) == pytest.approx(1)
    a = rng.standard_normal(G.size)
    A = SIGMA_X + 0.3 * SIGMA_Z
    val = hybrid_expectation(s, HybridOperator.separable(G, a, A))
    assert val == pytest.approx(riemann_integral(a * F.values, G) * np.trace(rq @ A))


@given(st.integers(0, 2**32 - 1), st.sampled_from(["product", "correlated"]), st.integers(2, 3))
def test_both_lifts_reproduce_expectations(seed, kind, d):
    rng = np.random.default_rng(seed)
    s = random_hybrid_state(G, d, rng, kind=kind)
    f = random_hybrid_operator(G, d, rng)
    ref = hybrid_expectation(s, f)
    for k in LiftKind:
        assert abs(dm_expectation(lift(s, k), f) - ref) <= 1e-10
    h = f + f.adjoint()
    assert abs(hybrid_expectation(s, h).imag) < 1e-12
    assert hybrid_expectation(s, f.adjoint() * f).real >= -1e-10


def test_block_lift_single_cell():
    rq = np.diag([0.7, 0.3])
    s = product_state(_point_mass(G, 5), rq)
    M = lift_block_diagonal(s).matrix.reshape(G.size, 2, G.size, 2)
    assert np.allclose(M[5, :, 5, :], rq)
    M[5, :, 5, :] = 0
    assert not M.any()


def test_block_lift_product_structure(rng):
    F = ClassicalDensity.from_unnormalized(G, rng.random(G.size))
    rq = random_density_matrix(2, rng)
    M = lift_block_diagonal(product_state(F, rq))
    assert np.allclose(M.matrix, np.kron(np.diag(G.cell_volume * F.values), rq))
    assert np.trace(M.matrix).real == pytest.approx(1, abs=1e-14)
    assert M.is_psd


def test_coherent_lift_reduces_to_gns(rng):
    F = ClassicalDensity.from_unnormalized(G, rng.random(G.size))
    s = product_state(F, np.eye(1))
    assert np.allclose(lift_coherent(s).matrix, classical_gns_dm(F), atol=1e-15)


def test_coherent_lift_diagonal_product(rng):
    F = ClassicalDensity.from_unnormalized(G, rng.random(G.size))
    probs = np.array([0.6, 0.4])
    M = lift_coherent(product_state(F, np.diag(probs))).matrix
    phi = np.sqrt(G.cell_volume * F.values)
    ref = sum(p * np.kron(np.outer(phi, phi), np.outer(e, e)) for p, e in zip(probs, np.eye(2)))
    assert np.allclose(M, ref, atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_coherent_lift_diagonal_blocks_exact(seed):
    rng = np.random.default_rng(seed)
    s = random_hybrid_state(G, 3, rng)
    R = lift_coherent(s, check_psd=False)
    B = R.blocks4()
    idx = np.arange(G.size)
    assert np.allclose(B[idx, :, idx, :], G.cell_volume * s.blocks, rtol=0, atol=1e-15)
    z = coherent_amplitudes(s)
    assert np.allclose(z**2, s.blocks, atol=1e-14)


def test_coherent_psd_measured_not_assumed(rng):
    s = random_hybrid_state(G, 2, rng)
    R = lift_coherent(s)
    assert R.min_eigenvalue == pytest.approx(np.linalg.eigvalsh(R.matrix).min(), abs=1e-12)
    assert R.is_psd == (R.min_eigenvalue >= -1e-10)


def test_density_matrix_checks():
    with pytest.raises(InvalidDensityError):
        HybridDensityMatrix(G, 1, np.eye(G.size))
    M = np.diag(np.r_[-0.1, np.full(G.size - 1, 1.1 / (G.size - 1))])
    with pytest.raises(InvalidDensityError):
        HybridDensityMatrix(G, 1, M, LiftKind.BLOCK_DIAGONAL)
    R = HybridDensityMatrix(G, 1, M, LiftKind.COHERENT)
    assert not R.is_psd


def test_marginals(rng):
    F = ClassicalDensity.from_unnormalized(G, rng.random(G.size))
    rq = random_density_matrix(2, rng)
    s = product_state(F, rq)
    for k in LiftKind:
        R = lift(s, k)
        assert np.allclose(quantum_marginal(R), rq, atol=1e-14)
        assert np.allclose(classical_marginal(R).values, F.values, atol=1e-13)
    assert np.allclose(classical_marginal(s).values, F.values)
    s = random_hybrid_state(G, 3, rng)
    a = quantum_marginal(lift(s, "block_diagonal"))
    b = quantum_marginal(lift(s, "coherent"))
    assert np.abs(a - b).max() <= 1e-12
    assert np.trace(a).real == pytest.approx(1)
    assert np.linalg.eigvalsh(a).min() >= -1e-12
    with pytest.raises(TypeError):
        classical_marginal(np.eye(2))


def test_partial_trace_power(rng):
    s = random_hybrid_state(G, 2, rng)
    assert np.allclose(partial_trace_power(s, 1), quantum_marginal(lift_block_diagonal(s)))
    F = ClassicalDensity.from_unnormalized(G, rng.random(G.size))
    rq = random_density_matrix(2, rng)
    out = partial_trace_power(product_state(F, rq), 2)
    assert np.allclose(out, G.cell_volume * np.sum(F.values**2) * rq @ rq)
    for k in (3, 4):
        partial_trace_power(s, k)
    with pytest.raises(ConfigurationError):
        partial_trace_power(s, 0)


def test_hybrid_entropy_closed_forms(rng):
    V = 4.0
    uniform = ClassicalDensity(G, np.full(G.size, 1 / V))
    assert hybrid_entropy(product_state(uniform, np.diag([1.0, 0.0]))) == pytest.approx(math.log(V))
    F = ClassicalDensity.from_unnormalized(G, rng.random(G.size) + 0.1)
    rq = random_density_matrix(3, rng)
    S_cl = -riemann_integral(F.values * np.log(F.values), G)
    assert hybrid_entropy(product_state(F, rq)) == pytest.approx(S_cl + von_neumann_entropy(rq), abs=1e-10)
    s = random_hybrid_state(G, 2, rng)
    w = np.concatenate([np.linalg.eigvalsh(b) for b in s.blocks])
    w = w[w > 0]
    assert hybrid_entropy(s) == pytest.approx(-G.cell_volume * np.sum(w * np.log(w)), abs=1e-10)


def test_entropy_report(rng):
    rep = entropy_equivalence_report(product_state(_point_mass(G, 3), np.diag([0.5, 0.5])))
    assert rep.S_vN_block == pytest.approx(math.log(2), abs=1e-12)
    assert abs(rep.offset_residual) <= 1e-8
    uniform = ClassicalDensity(G, np.full(G.size, 1 / 4.0))
    rep = entropy_equivalence_report(product_state(uniform, np.diag([1.0, 0.0])))
    assert rep.S_vN_block == pytest.approx(math.log(G.size), abs=1e-10)
    assert rep.S_vN_block == pytest.approx(math.log(4.0) - math.log(G.cell_volume), abs=1e-10)
    assert rep.S_vN_coherent == pytest.approx(0.0, abs=1e-8)
    for _ in range(5):
        rep = entropy_equivalence_report(random_hybrid_state(G, 2, rng))
        assert abs(rep.offset_residual) <= 1e-8


def test_maxent_decoupled_factorizes():
    g = build_grid((-3, 3, -3, 3), 12, 12, boundary="zero")
    H_C = 0.5 * (g.q**2 + g.p**2)
    H_Q = 0.5 * SIGMA_Z
    s = maxent_canonical_state(H_C, H_Q, [], 1.3, g)
    gc = np.exp(-1.3 * H_C)
    gc /= g.cell_volume * gc.sum()
    gq = np.diag(np.exp(-1.3 * np.diag(H_Q).real))
    gq /= np.trace(gq)
    assert np.allclose(s.blocks, gc[:, None, None] * gq[None], atol=1e-13)


def test_maxent_large_beta_and_zero_beta():
    g = build_grid((-3, 3, -3, 3), 12, 12, boundary="zero")
    H_C = (g.q - 0.7) ** 2 + (g.p + 1.2) ** 2
    s = maxent_canonical_state(H_C, 0.5 * SIGMA_Z, [], 1e6, g)
    k = int(np.argmin(H_C))
    assert s.blocks[k, 1, 1].real * g.cell_volume == pytest.approx(1.0, abs=1e-12)
    s0 = maxent_canonical_state(H_C, 0.5 * SIGMA_Z, [], 0.0, g)
    assert np.allclose(s0.blocks, np.eye(2) / (2 * g.volume))
    with pytest.raises(ConfigurationError):
        maxent_canonical_state(H_C, SIGMA_Z, [], -1.0, g)


def test_maxent_coupled_valid():
    g = build_grid((-3, 3, -3, 3), 8, 8, boundary="zero")
    s = maxent_canonical_state(0.5 * (g.q**2 + g.p**2), 0.5 * SIGMA_Z, [(g.q, SIGMA_X, 0.4)], 2.0, g)
    E = 0.5 * (g.q**2 + g.p**2)[:, None, None] * np.eye(2) + 0.5 * SIGMA_Z + 0.4 * g.q[:, None, None] * SIGMA_X
    assert np.allclose(s.blocks @ E, E @ s.blocks, atol=1e-12)
