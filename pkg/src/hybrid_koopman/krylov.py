"""Lanczos approximation of ``exp(-i t A) v`` for Hermitian ``A``.

The time interval is split into substeps small enough that a Krylov space of
at most ``m_max`` vectors meets the requested tolerance. Lanczos vectors are
fully reorthogonalized, which keeps the propagated norm exact to roundoff.
"""

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DecompositionError


def lanczos(matvec, v, m):
    """Run ``m`` Lanczos steps from the unit vector ``v``.

    Returns
    -------
    alpha, beta : ndarray
        Diagonal and off-diagonal of the tridiagonal projection. ``beta`` has
        length ``k`` where ``k`` is the number of completed steps; its last
        entry is the residual norm used for error estimates.
    V : ndarray, shape (k, n)
        Orthonormal Lanczos vectors.
    """
    n = v.shape[0]
    V = np.empty((m, n), dtype=complex)
    alpha = np.empty(m)
    beta = np.empty(m)
    V[0] = v
    k = m
    for j in range(m):
        w = matvec(V[j])
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j]
        if j > 0:
            w -= beta[j - 1] * V[j - 1]
        # full reorthogonalization, twice is enough
        for _ in range(2):
            w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        beta[j] = np.linalg.norm(w)
        if j + 1 == m:
            break
        if beta[j] < 1e-14 * max(1.0, abs(alpha[j])):
            k = j + 1
            break
        V[j + 1] = w / beta[j]
    return alpha[:k], beta[:k], V[:k]


_EPS = np.finfo(float).eps


def expm_krylov(matvec, v, t, tol=1e-10, m_max=40):
    """Approximate ``exp(-i t A) v`` for a Hermitian operator given by ``matvec``.

    Parameters
    ----------
    matvec : callable
        ``x -> A @ x``.
    v : ndarray
        Start vector (any norm).
    t : float
        Time; negative values run backwards.
    tol : float
        Target absolute error relative to ``||v||`` over the whole interval.
    m_max : int
        Maximum Krylov dimension per substep.
    """
    v = np.asarray(v, dtype=complex)
    norm = np.linalg.norm(v)
    if norm == 0 or t == 0:
        return v.copy()
    m_max = max(2, min(m_max, v.shape[0]))
    remaining = float(t)
    w = v / norm
    tau = remaining
    while abs(remaining) > 0:
        alpha, beta, V = lanczos(matvec, w, m_max)
        k = alpha.shape[0]
        if k > 1:
            evals, evecs = eigh_tridiagonal(alpha, beta[: k - 1])
        else:
            evals, evecs = alpha.copy(), np.ones((1, 1))
        if abs(tau) > abs(remaining):
            tau = remaining
        for _ in range(60):
            coeffs = evecs @ (np.exp(-1j * tau * evals) * evecs[0].conj())
            # a-posteriori estimate from the residual of the truncated recurrence
            err = abs(beta[k - 1] * coeffs[k - 1]) if k == m_max else 0.0
            # floor at rounding level so tiny tolerances cannot stall the halving
            if err <= max(tol * abs(tau) / abs(t), 64 * _EPS * beta[k - 1]):
                break
            tau *= 0.5
        else:
            raise DecompositionError("Krylov substep did not converge")
        w = coeffs @ V
        remaining -= tau
        if abs(remaining) < 1e-15 * abs(t):
            break
        if err < 0.1 * tol * abs(tau) / abs(t):
            tau *= 1.5
    return norm * w
