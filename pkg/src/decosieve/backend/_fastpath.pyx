# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_slowpath``: same contract, fused phase masks and
BLAS (zgemm) matrix products instead of broadcast temporaries."""

import numpy as np

cimport numpy as cnp
from scipy.linalg.cython_blas cimport zgemm

cnp.import_array()

NAME = "native"

ctypedef double complex zc


cdef inline void _gemm(zc* a, zc* b, zc* out, int d, zc alpha, zc beta) noexcept nogil:
    # Row-major A@B via the column-major identity (A@B)^T = B^T A^T.
    cdef char no = b'N'
    zgemm(&no, &no, &d, &d, &d, &alpha, b, &d, a, &d, &beta, out, &d)


def channel_rhs(cnp.ndarray[zc, ndim=3, mode="c"] S,
                cnp.ndarray[zc, ndim=3, mode="c"] ms,
                cnp.ndarray[zc, ndim=3, mode="c"] ns,
                cnp.ndarray[zc, ndim=1, mode="c"] ph,
                cnp.ndarray[zc, ndim=2, mode="c"] rho):
    cdef int nj = S.shape[0]
    cdef int d = S.shape[1]
    cdef int j, a, b
    cdef zc one = 1.0, zero = 0.0, mone = -1.0
    cdef zc pa, phase

    cdef cnp.ndarray[zc, ndim=2] st_ = np.empty((d, d), dtype=complex)
    cdef cnp.ndarray[zc, ndim=2] ma_ = np.empty((d, d), dtype=complex)
    cdef cnp.ndarray[zc, ndim=2] na_ = np.empty((d, d), dtype=complex)
    cdef cnp.ndarray[zc, ndim=2] c_ = np.empty((d, d), dtype=complex)
    cdef cnp.ndarray[zc, ndim=2] y_ = np.zeros((d, d), dtype=complex)
    cdef cnp.ndarray[zc, ndim=2] out_ = np.empty((d, d), dtype=complex)

    cdef zc* st = &st_[0, 0]
    cdef zc* mm = &ma_[0, 0]
    cdef zc* nn = &na_[0, 0]
    cdef zc* cc = &c_[0, 0]
    cdef zc* yy = &y_[0, 0]
    cdef zc* oo = &out_[0, 0]
    cdef zc* sp = &S[0, 0, 0]
    cdef zc* mp = &ms[0, 0, 0]
    cdef zc* np_ = &ns[0, 0, 0]
    cdef zc* rp = &rho[0, 0]
    cdef zc* pp = &ph[0]

    with nogil:
        for j in range(nj):
            for a in range(d):
                pa = pp[a]
                for b in range(d):
                    phase = pa * pp[b].conjugate()
                    st[a * d + b] = sp[(j * d + a) * d + b] * phase
                    mm[a * d + b] = mp[(j * d + a) * d + b] * phase
                    nn[a * d + b] = np_[(j * d + a) * d + b] * phase
            _gemm(mm, rp, cc, d, one, zero)   # C = (ms*Phi) @ rho
            _gemm(rp, nn, cc, d, mone, one)   # C -= rho @ (ns*Phi)
            _gemm(st, cc, yy, d, one, one)    # Y += St @ C
            _gemm(cc, st, yy, d, mone, one)   # Y -= C @ St
        for a in range(d):
            for b in range(d):
                oo[a * d + b] = -0.5 * (yy[a * d + b] + yy[b * d + a].conjugate())
    return out_


def qbm_rhs(cnp.ndarray[zc, ndim=2, mode="c"] xt,
            cnp.ndarray[zc, ndim=2, mode="c"] pt,
            cnp.ndarray[zc, ndim=2, mode="c"] rho,
            double h_w, double g_w, double d_w, double f_w):
    cdef int d = xt.shape[0]
    cdef int a, b
    cdef zc one = 1.0, zero = 0.0, mone = -1.0

    cdef cnp.ndarray[zc, ndim=2] t1_ = np.empty((d, d), dtype=complex)
    cdef cnp.ndarray[zc, ndim=2] t2_ = np.empty((d, d), dtype=complex)
    cdef cnp.ndarray[zc, ndim=2] out_ = np.zeros((d, d), dtype=complex)

    cdef zc* t1 = &t1_[0, 0]
    cdef zc* t2 = &t2_[0, 0]
    cdef zc* oo = &out_[0, 0]
    cdef zc* xp = &xt[0, 0]
    cdef zc* pp = &pt[0, 0]
    cdef zc* rp = &rho[0, 0]
    cdef zc wh = -1j * h_w
    cdef zc wg = 2j * g_w
    cdef zc wd = -d_w
    cdef zc wf = f_w

    with nogil:
        # [x^2, rho]: t1 = x@x, t2 = [t1, rho]
        _gemm(xp, xp, t1, d, one, zero)
        _gemm(t1, rp, t2, d, one, zero)
        _gemm(rp, t1, t2, d, mone, one)
        for a in range(d * d):
            oo[a] += wh * t2[a]
        # [x, {p, rho}]
        _gemm(pp, rp, t1, d, one, zero)
        _gemm(rp, pp, t1, d, one, one)
        _gemm(xp, t1, t2, d, one, zero)
        _gemm(t1, xp, t2, d, mone, one)
        for a in range(d * d):
            oo[a] += wg * t2[a]
        # [x, [x, rho]]
        _gemm(xp, rp, t1, d, one, zero)
        _gemm(rp, xp, t1, d, mone, one)
        _gemm(xp, t1, t2, d, one, zero)
        _gemm(t1, xp, t2, d, mone, one)
        for a in range(d * d):
            oo[a] += wd * t2[a]
        # [x, [p, rho]]
        _gemm(pp, rp, t1, d, one, zero)
        _gemm(rp, pp, t1, d, mone, one)
        _gemm(xp, t1, t2, d, one, zero)
        _gemm(t1, xp, t2, d, mone, one)
        for a in range(d * d):
            oo[a] += wf * t2[a]
    return out_
