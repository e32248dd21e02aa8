"""Pure numpy versions of the compiled kernels.

Both backends take the same arguments and return freshly allocated arrays.
"""

import numpy as np


def _shift(f, step, axis, periodic):
    # f evaluated at index i + step along axis; zero ghost cells when not periodic
    if periodic:
        return np.roll(f, -step, axis=axis)
    out = np.zeros_like(f)
    n = f.shape[axis]
    src = [slice(None)] * f.ndim
    dst = [slice(None)] * f.ndim
    if step > 0:
        src[axis] = slice(step, n)
        dst[axis] = slice(0, n - step)
    else:
        src[axis] = slice(0, n + step)
        dst[axis] = slice(-step, n)
    out[tuple(dst)] = f[tuple(src)]
    return out


def liouvillian_apply(psi, alpha, beta, inv2dq, inv2dp, periodic):
    """Apply the symmetrized second-order Koopman generator to ``psi``.

    Computes ``-i * [ (alpha D_q + D_q alpha)/2 + (beta D_p + D_p beta)/2 ] psi``
    with central differences ``D``. All arrays have shape ``(n_q, n_p)``.
    """
    psi = np.asarray(psi, dtype=np.complex128)
    a_plus = _shift(alpha, 1, 0, periodic)
    a_minus = _shift(alpha, -1, 0, periodic)
    b_plus = _shift(beta, 1, 1, periodic)
    b_minus = _shift(beta, -1, 1, periodic)
    skew = 0.5 * inv2dq * (
        (alpha + a_plus) * _shift(psi, 1, 0, periodic)
        - (alpha + a_minus) * _shift(psi, -1, 0, periodic)
    )
    skew += 0.5 * inv2dp * (
        (beta + b_plus) * _shift(psi, 1, 1, periodic)
        - (beta + b_minus) * _shift(psi, -1, 1, periodic)
    )
    return -1j * skew


def bilinear_sample(values, fq, fp, periodic):
    """Bilinear interpolation of a gridded field at fractional indices.

    ``fq`` and ``fp`` are fractional row/column indices. Periodic grids wrap;
    otherwise samples outside the index box see zero.
    """
    values = np.asarray(values, dtype=np.float64)
    n_q, n_p = values.shape
    i0 = np.floor(fq).astype(np.int64)
    j0 = np.floor(fp).astype(np.int64)
    wq = fq - i0
    wp = fp - j0

    def pick(i, j):
        if periodic:
            return values[i % n_q, j % n_p]
        inside = (i >= 0) & (i < n_q) & (j >= 0) & (j < n_p)
        out = np.zeros(np.shape(i))
        out[inside] = values[i[inside], j[inside]]
        return out

    return (
        (1 - wq) * (1 - wp) * pick(i0, j0)
        + wq * (1 - wp) * pick(i0 + 1, j0)
        + (1 - wq) * wp * pick(i0, j0 + 1)
        + wq * wp * pick(i0 + 1, j0 + 1)
    )
