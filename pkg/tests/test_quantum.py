import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hybrid_koopman.errors import DensityMatrixError, NonHermitianError, SizeMismatchError
from hybrid_koopman.quantum import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    QuantumOperator,
    commutator,
    entropy_from_eigenvalues,
    purity,
    random_density_matrix,
    random_unitary,
    validate_density_matrix,
    von_neumann_entropy,
)


def test_maximally_mixed_valid():
    for d in (2, 3, 5):
        st_ = validate_density_matrix(np.eye(d) / d)
        assert st_.dim == d


def test_positivity_violation_reported():
    with pytest.raises(DensityMatrixError) as exc:
        validate_density_matrix(np.diag([1.2, -0.2]))
    names = dict(exc.value.violations)
    assert list(names) == ["positivity"]
    assert names["positivity"] == pytest.approx(-0.2)


def test_hermiticity_violation_reported():
    M = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(DensityMatrixError) as exc:
        validate_density_matrix(M)
    assert exc.value.violations[0][0] == "hermiticity"
    assert "trace" in dict(exc.value.violations)


def test_non_square():
    with pytest.raises(SizeMismatchError):
        validate_density_matrix(np.ones((2, 3)))


def test_entropy_examples():
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == 0.0
    assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(math.log(2), abs=1e-15)
    ref = -0.9 * math.log(0.9) - 0.1 * math.log(0.1)
    assert von_neumann_entropy(np.diag([0.9, 0.1])) == pytest.approx(ref, abs=1e-14)
    assert ref == pytest.approx(0.325083, abs=1e-6)


def test_entropy_clipping_reported():
    S, clipped = entropy_from_eigenvalues([1.0, 1e-16, -2e-16])
    assert S == 0.0
    assert clipped == pytest.approx(3e-16)


def test_purity_and_commutators():
    assert purity(np.diag([1.0, 0.0])) == pytest.approx(1.0)
    assert purity(np.eye(4) / 4) == pytest.approx(0.25)
    assert np.allclose(commutator(SIGMA_X, SIGMA_Y), 2j * SIGMA_Z)
    A = np.arange(9.0).reshape(3, 3)
    assert np.array_equal(commutator(A, A), np.zeros((3, 3)))
    with pytest.raises(SizeMismatchError):
        commutator(np.eye(2), np.eye(3))


def test_operator_validation():
    with pytest.raises(SizeMismatchError):
        QuantumOperator(np.eye(1))
    with pytest.raises(NonHermitianError):
        QuantumOperator(np.array([[0, 1], [0, 0]]), hermitian=True)
    assert QuantumOperator(SIGMA_Y, hermitian=True).dim == 2


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_entropy_unitary_invariance_and_bounds(d, seed):
    rng = np.random.default_rng(seed)
    rho = random_density_matrix(d, rng)
    U = random_unitary(d, rng)
    S = von_neumann_entropy(rho)
    assert abs(von_neumann_entropy(U @ rho @ U.conj().T) - S) <= 1e-10
    assert -1e-12 <= S <= math.log(d) + 1e-12
    assert 1 / d - 1e-12 <= purity(rho) <= 1 + 1e-12
