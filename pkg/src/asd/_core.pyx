# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels. Semantics match ``asd._fallback`` bit for bit."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()


cdef inline Py_ssize_t _reflect(Py_ssize_t i, Py_ssize_t n) nogil:
    cdef Py_ssize_t period, r
    if n == 1:
        return 0
    period = 2 * (n - 1)
    r = i % period
    if r < 0:
        r += period
    if r < n:
        return r
    return period - r


def reflect_index(idx, Py_ssize_t n):
    cdef cnp.int64_t[::1] src = np.ascontiguousarray(np.ravel(idx), dtype=np.int64)
    out = np.empty(src.shape[0], dtype=np.int64)
    cdef cnp.int64_t[::1] dst = out
    cdef Py_ssize_t k
    for k in range(src.shape[0]):
        dst[k] = _reflect(src[k], n)
    return out.reshape(np.shape(idx))


cdef void _axis(Py_ssize_t n_in, Py_ssize_t n_out, Py_ssize_t[::1] lo,
                Py_ssize_t[::1] hi, double[::1] frac):
    cdef double ratio = <double>n_in / <double>n_out
    cdef double s
    cdef Py_ssize_t k, f
    for k in range(n_out):
        s = (k + 0.5) * ratio - 0.5
        if s < 0.0:
            s = 0.0
        if s > n_in - 1:
            s = n_in - 1
        f = <Py_ssize_t>floor(s)
        lo[k] = f
        hi[k] = f + 1 if f + 1 < n_in else n_in - 1
        frac[k] = s - f


def bilinear_resize(img, Py_ssize_t out_h, Py_ssize_t out_w):
    cdef double[:, :, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], b = src.shape[2]
    if out_h == h and out_w == w:
        return np.array(src, copy=True)
    r0 = np.empty(out_h, dtype=np.intp)
    r1 = np.empty(out_h, dtype=np.intp)
    fr = np.empty(out_h, dtype=np.float64)
    c0 = np.empty(out_w, dtype=np.intp)
    c1 = np.empty(out_w, dtype=np.intp)
    fc = np.empty(out_w, dtype=np.float64)
    _axis(h, out_h, r0, r1, fr)
    _axis(w, out_w, c0, c1, fc)
    cdef Py_ssize_t[::1] vr0 = r0, vr1 = r1, vc0 = c0, vc1 = c1
    cdef double[::1] vfr = fr, vfc = fc
    out = np.empty((out_h, out_w, b), dtype=np.float64)
    cdef double[:, :, ::1] dst = out
    cdef Py_ssize_t i, j, c
    cdef double a, t, bo, wr, wc
    with nogil:
        for i in range(out_h):
            wr = vfr[i]
            for j in range(out_w):
                wc = vfc[j]
                for c in range(b):
                    t = src[vr0[i], vc0[j], c] * (1.0 - wc) + src[vr0[i], vc1[j], c] * wc
                    bo = src[vr1[i], vc0[j], c] * (1.0 - wc) + src[vr1[i], vc1[j], c] * wc
                    dst[i, j, c] = t * (1.0 - wr) + bo * wr
    return out


def gather_patches(img, rows, cols, Py_ssize_t patch):
    cdef double[:, :, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef cnp.int64_t[::1] vr = np.ascontiguousarray(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] vc = np.ascontiguousarray(cols, dtype=np.int64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], b = src.shape[2]
    cdef Py_ssize_t n = vr.shape[0], half = patch // 2
    out = np.empty((n, patch, patch, b), dtype=np.float64)
    cdef double[:, :, :, ::1] dst = out
    cdef Py_ssize_t k, u, v, c, si, sj
    with nogil:
        for k in range(n):
            for u in range(patch):
                si = _reflect(vr[k] + u - half, h)
                for v in range(patch):
                    sj = _reflect(vc[k] + v - half, w)
                    for c in range(b):
                        dst[k, u, v, c] = src[si, sj, c]
    return out


def mahalanobis_batch(x, mean, inv_cov):
    cdef double[:, ::1] vx = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] mu = np.ascontiguousarray(mean, dtype=np.float64)
    cdef double[:, ::1] s = np.ascontiguousarray(inv_cov, dtype=np.float64)
    cdef Py_ssize_t n = vx.shape[0], l = vx.shape[1]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] dst = out
    diff = np.empty(l, dtype=np.float64)
    cdef double[::1] d = diff
    cdef Py_ssize_t k, i, j
    cdef double q, row
    with nogil:
        for k in range(n):
            for i in range(l):
                d[i] = vx[k, i] - mu[i]
            q = 0.0
            for i in range(l):
                row = 0.0
                for j in range(l):
                    row = row + s[i, j] * d[j]
                q = q + d[i] * row
            dst[k] = sqrt(q) if q > 0.0 else 0.0
    return out


def roc_counts(degrees, labels):
    cdef double[::1] deg = np.ascontiguousarray(degrees, dtype=np.float64)
    cdef cnp.int64_t[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t n = deg.shape[0], k, m = 0
    tp = np.empty(n, dtype=np.int64)
    fp = np.empty(n, dtype=np.int64)
    thr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] vtp = tp, vfp = fp
    cdef double[::1] vthr = thr
    cdef cnp.int64_t ctp = 0, cfp = 0
    with nogil:
        for k in range(n):
            if lab[k]:
                ctp += 1
            else:
                cfp += 1
            if k == n - 1 or deg[k + 1] != deg[k]:
                vtp[m] = ctp
                vfp[m] = cfp
                vthr[m] = deg[k]
                m += 1
    return tp[:m].copy(), fp[:m].copy(), thr[:m].copy()
