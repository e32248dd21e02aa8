import math

import numpy as np
import pytest
import scipy.sparse as sp

from hybrid_koopman.classical_koopman import (
    band_limited_probes,
    build_liouvillian,
    check_multiplicative,
    classical_gns_dm,
    difference_matrix_1d,
    koopman_propagate,
    modified_wavenumber,
    momentum_operator,
    represent_multiplicative,
    weak_multiplicative_fit,
)
from hybrid_koopman.errors import ConfigurationError, SizeMismatchError
from hybrid_koopman.phase_space import (
    ClassicalDensity,
    build_grid,
    density_to_wavefunction,
    gaussian_density,
    gaussian_profile,
    hamiltonian_field,
    liouville_oracle,
    riemann_integral,
    wavefunction_to_density,
)


def test_multiplicative_identity_and_values(rng):
    g = build_grid((-1, 1, -1, 1), 6, 6)
    one = represent_multiplicative(np.ones(g.size), g)
    psi = rng.standard_normal(g.size)
    assert np.array_equal(one.apply(psi), psi)
    assert np.array_equal(represent_multiplicative(g.q, g).apply(np.ones(g.size)), g.q)
    a, b = rng.standard_normal(g.size), rng.standard_normal(g.size)
    A, B = represent_multiplicative(a, g), represent_multiplicative(b, g)
    AB = (A.matrix() @ B.matrix()).toarray()
    assert np.abs(AB - np.diag(a * b)).max() < 1e-14
    assert np.abs((A @ B).diag - a * b).max() < 1e-14
    assert np.array_equal((A.matrix() @ B.matrix() - B.matrix() @ A.matrix()).toarray(),
                          np.zeros((g.size, g.size)))
    with pytest.raises(SizeMismatchError):
        represent_multiplicative(np.ones(5), g)


@pytest.mark.parametrize("order", [2, 4])
@pytest.mark.parametrize("spectral", [False, True])
def test_periodic_difference_is_skew(order, spectral):
    D = difference_matrix_1d(12, 0.3, order, True, spectral).toarray()
    assert np.array_equal(D.T, -D)


def test_zero_boundary_stencil_skew_and_order4_rejected():
    D = difference_matrix_1d(10, 0.5, 2, periodic=False).toarray()
    assert np.array_equal(D.T, -D)
    with pytest.raises(ConfigurationError):
        difference_matrix_1d(10, 0.5, 4, periodic=False)
    with pytest.raises(ConfigurationError):
        difference_matrix_1d(10, 0.5, 3)
    with pytest.raises(ConfigurationError):
        difference_matrix_1d(10, 0.5, spectral=True, periodic=False)
    g = build_grid((0, 1, 0, 1), 8, 8, boundary="zero")
    with pytest.raises(ConfigurationError):
        momentum_operator(g, "q", 4)


def test_momentum_constant_is_zero():
    g = build_grid((0, 2 * math.pi, -1, 1), 16, 8)
    for axis in "qp":
        assert np.array_equal(momentum_operator(g, axis).apply(np.ones(g.size)), np.zeros(g.size))


@pytest.mark.parametrize("order", [2, 4])
def test_momentum_plane_wave_symbol(order):
    g = build_grid((0, 2 * math.pi, -1, 1), 64, 4)
    psi = np.exp(1j * g.q)
    out = momentum_operator(g, "q", order).apply(psi)
    lam = modified_wavenumber(1.0, g.dq, order)
    assert np.allclose(out, lam * psi, atol=1e-12)
    if order == 2:
        assert lam == pytest.approx(0.99839, abs=1e-5)


def test_spectral_momentum_exact_on_band_limited():
    g = build_grid((0, 2 * math.pi, 0, 2 * math.pi), 16, 16)
    psi = np.exp(3j * g.p)
    out = momentum_operator(g, "p", spectral=True).apply(psi)
    assert np.allclose(out, 3 * psi, atol=1e-12)


def test_momentum_hermitian():
    g = build_grid((0, 1, 0, 1), 8, 8, boundary="zero")
    M = momentum_operator(g, "p").matrix.toarray()
    assert np.abs(M - M.conj().T).max() == 0


def test_canonical_commutator_second_order():
    errs = []
    for n in (32, 64):
        g = build_grid((-8, 8, -1, 1), n, 4)
        psi = np.exp(-g.q**2)
        Q = represent_multiplicative(g.q, g).matrix()
        P = momentum_operator(g, "q").matrix
        out = (Q @ P - P @ Q) @ psi
        errs.append(np.abs(out - 1j * psi).max())
    assert math.log2(errs[0] / errs[1]) > 1.8


def test_liouvillian_constant_H_is_zero():
    g = build_grid((-1, 1, -1, 1), 8, 8)
    L = build_liouvillian(hamiltonian_field(np.full(g.size, 3.0), g))
    assert L.matrix.nnz == 0 or abs(L.matrix).max() == 0


def test_liouvillian_free_particle_symbol():
    g = build_grid((0, 2 * math.pi, -2, 2), 32, 8)
    L = build_liouvillian(hamiltonian_field(0.5 * g.p**2, g))
    psi = np.exp(1j * g.q) * np.exp(-g.p**2)
    lam = modified_wavenumber(1.0, g.dq)
    out = g.as_2d(L.matvec(psi))[:, 1:-1]
    # the wrapped field is wrong at the p edges, where H = p^2/2 is not periodic
    assert np.allclose(out, g.as_2d(g.p * lam * psi)[:, 1:-1], atol=1e-12)


@pytest.mark.parametrize("spectral", [False, True])
def test_liouvillian_hermitian(spectral):
    g = build_grid((-4, 4, -4, 4), 32, 32)
    L = build_liouvillian(hamiltonian_field(0.5 * (g.q**2 + g.p**2), g), spectral=spectral)
    assert L.hermiticity_defect() <= 1e-14


def test_liouvillian_grid_mismatch():
    g = build_grid((-1, 1, -1, 1), 8, 8)
    h = build_grid((-1, 1, -1, 1), 6, 6)
    with pytest.raises(SizeMismatchError):
        build_liouvillian(hamiltonian_field(g.q, g), h)


def test_kernel_and_matrix_paths_agree(rng):
    g = build_grid((-3, 3, -3, 3), 10, 12, boundary="zero")
    L = build_liouvillian(hamiltonian_field(np.sin(g.q) + g.p**2, g))
    psi = rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size)
    assert np.allclose(L.matvec(psi), L.matrix @ psi, atol=1e-12)


def test_propagate_identity_and_unitary(rng):
    g = build_grid((-4, 4, -4, 4), 16, 16)
    L = build_liouvillian(hamiltonian_field(0.5 * (g.q**2 + g.p**2), g))
    psi = rng.standard_normal(g.size) + 0j
    psi /= np.linalg.norm(psi)
    assert np.array_equal(koopman_propagate(psi, L, 0.0), psi)
    for t in (0.5, 2.0, 4 * math.pi):
        for method in ("eigh", "krylov"):
            out = koopman_propagate(psi, L, t, method=method)
            assert abs(np.linalg.norm(out) - 1) < 1e-10
    a = koopman_propagate(psi, L, 1.3, method="eigh")
    b = koopman_propagate(psi, L, 1.3, method="krylov")
    assert np.linalg.norm(a - b) < 1e-8
    with pytest.raises(ConfigurationError):
        koopman_propagate(psi, L, 1.0, method="magic")


def test_harmonic_revival():
    g = build_grid((-6, 6, -6, 6), 64, 64)
    rho = gaussian_density(g, (1, 0), 0.8)
    psi0 = density_to_wavefunction(rho)
    L = build_liouvillian(hamiltonian_field(0.5 * (g.q**2 + g.p**2), g))
    psi = koopman_propagate(psi0, L, 2 * math.pi, method="krylov")
    overlap = abs(g.cell_volume * np.vdot(psi0, psi))
    assert overlap >= 0.99


def test_quarter_period_matches_oracle_second_order():
    errs = []
    for n in (32, 64):
        g = build_grid((-6, 6, -6, 6), n, n)
        rho = gaussian_density(g, (1, 0), 0.8)
        L = build_liouvillian(hamiltonian_field(0.5 * (g.q**2 + g.p**2), g))
        psi = koopman_propagate(density_to_wavefunction(rho), L, math.pi / 2, method="krylov")
        ref = liouville_oracle(rho, "harmonic", math.pi / 2, profile=gaussian_profile((1, 0), 0.8))
        errs.append(np.abs(np.abs(psi) ** 2 - ref.values).max())
    assert math.log2(errs[0] / errs[1]) >= 1.8


def test_gns_density_matrix(rng):
    g = build_grid((-1, 1, -1, 1), 6, 6)
    v = np.zeros(g.size)
    v[7] = 1 / g.cell_volume
    M = classical_gns_dm(ClassicalDensity(g, v))
    assert M[7, 7] == pytest.approx(1.0)
    assert np.count_nonzero(M) == 1
    F = ClassicalDensity.from_unnormalized(g, rng.random(g.size))
    M = classical_gns_dm(F)
    assert np.trace(M).real == pytest.approx(1.0, abs=1e-14)
    a = rng.standard_normal(g.size)
    lhs = np.trace(M @ np.diag(a)).real
    assert lhs == pytest.approx(riemann_integral(F.values * a, g), abs=1e-12)
    assert np.linalg.eigvalsh(M).min() > -1e-14
    assert np.allclose(wavefunction_to_density(np.sqrt(np.diag(M).real / g.cell_volume), g).values,
                       F.values)


def test_check_multiplicative_strict():
    g = build_grid((0, 2 * math.pi, -1, 1), 8, 8)
    rep = check_multiplicative(sp.diags(g.q))
    assert rep.is_multiplicative and rep.off_diagonal_mass == 0
    rep = check_multiplicative(momentum_operator(g, "q").matrix)
    assert not rep.is_multiplicative
    assert rep.off_diagonal_mass == pytest.approx(1.0)


def test_commutator_is_weakly_multiplicative():
    """[pi(a), L] acts like multiplication by i {a, H} on smooth probes."""
    res = []
    for n in (16, 32, 64):
        g = build_grid((-5, 5, -5, 5), n, n, boundary="zero")
        H = 0.5 * (g.q**2 + g.p**2)
        L = build_liouvillian(hamiltonian_field(H, g)).matrix
        a = np.exp(-(g.q**2 + g.p**2) / 8) * np.cos(g.q)
        A = sp.diags(a)
        C = A @ L - L @ A
        probes = band_limited_probes(g)
        r, m = weak_multiplicative_fit(C, probes)
        da_dq = np.exp(-(g.q**2 + g.p**2) / 8) * (-g.q / 4 * np.cos(g.q) - np.sin(g.q))
        da_dp = np.exp(-(g.q**2 + g.p**2) / 8) * (-g.p / 4) * np.cos(g.q)
        bracket = da_dq * g.p - da_dp * g.q
        probe_mass = (np.abs(probes) ** 2).sum(axis=0)
        inner = probe_mass > 0.1 * probe_mass.max()
        res.append((r, np.abs(m - 1j * bracket)[inner].max()))
    orders = [math.log2(res[i][0] / res[i + 1][0]) for i in range(2)]
    assert min(orders) >= 1.8
    assert res[-1][1] < res[0][1] / 8
