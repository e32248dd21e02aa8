# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the grid kernels (see ``_fallback`` for reference semantics)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def liouvillian_apply(psi, alpha, beta, double inv2dq, double inv2dp, bint periodic):
    cdef const double complex[:, ::1] f = np.ascontiguousarray(psi, dtype=np.complex128)
    cdef const double[:, ::1] a = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(beta, dtype=np.float64)
    cdef Py_ssize_t nq = f.shape[0], npp = f.shape[1]
    out_arr = np.empty((nq, npp), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, ip, im, jp, jm
    cdef double cp, cm
    cdef double complex acc
    for i in range(nq):
        ip = i + 1
        im = i - 1
        if periodic:
            if ip == nq:
                ip = 0
            if im < 0:
                im = nq - 1
        for j in range(npp):
            jp = j + 1
            jm = j - 1
            if periodic:
                if jp == npp:
                    jp = 0
                if jm < 0:
                    jm = npp - 1
            acc = 0
            if ip < nq:
                acc = acc + 0.5 * inv2dq * (a[i, j] + a[ip, j]) * f[ip, j]
            if im >= 0:
                acc = acc - 0.5 * inv2dq * (a[i, j] + a[im, j]) * f[im, j]
            if jp < npp:
                acc = acc + 0.5 * inv2dp * (b[i, j] + b[i, jp]) * f[i, jp]
            if jm >= 0:
                acc = acc - 0.5 * inv2dp * (b[i, j] + b[i, jm]) * f[i, jm]
            # multiply by -i
            out[i, j] = acc.imag - 1j * acc.real
    return out_arr


def bilinear_sample(values, fq, fp, bint periodic):
    cdef const double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    fq_arr = np.ascontiguousarray(fq, dtype=np.float64)
    fp_arr = np.ascontiguousarray(fp, dtype=np.float64)
    shape = fq_arr.shape
    cdef const double[::1] xq = fq_arr.reshape(-1)
    cdef const double[::1] xp = fp_arr.reshape(-1)
    cdef Py_ssize_t n = xq.shape[0], nq = v.shape[0], npp = v.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t k, i0, j0, i1, j1
    cdef double wq, wp, v00, v10, v01, v11
    for k in range(n):
        i0 = <Py_ssize_t>floor(xq[k])
        j0 = <Py_ssize_t>floor(xp[k])
        wq = xq[k] - i0
        wp = xp[k] - j0
        i1 = i0 + 1
        j1 = j0 + 1
        if periodic:
            i0 = i0 % nq
            i1 = i1 % nq
            j0 = j0 % npp
            j1 = j1 % npp
            if i0 < 0:
                i0 += nq
            if i1 < 0:
                i1 += nq
            if j0 < 0:
                j0 += npp
            if j1 < 0:
                j1 += npp
            v00 = v[i0, j0]
            v10 = v[i1, j0]
            v01 = v[i0, j1]
            v11 = v[i1, j1]
        else:
            v00 = v[i0, j0] if 0 <= i0 < nq and 0 <= j0 < npp else 0.0
            v10 = v[i1, j0] if 0 <= i1 < nq and 0 <= j0 < npp else 0.0
            v01 = v[i0, j1] if 0 <= i0 < nq and 0 <= j1 < npp else 0.0
            v11 = v[i1, j1] if 0 <= i1 < nq and 0 <= j1 < npp else 0.0
        out[k] = ((1 - wq) * (1 - wp) * v00 + wq * (1 - wp) * v10
                  + (1 - wq) * wp * v01 + wq * wp * v11)
    return out_arr.reshape(shape)
