# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled gain/loss sweeps over collision classes.

Fields are laid out ``(K, N_x)`` so the innermost loop runs over spatial
cells with unit stride.  A class is a fixed lattice offset together with the
two (possibly off-grid) post-collision displacements; it is applied to every
velocity index in its validity box.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline void _interp(const double[:, ::1] G, Py_ssize_t p, int na,
                         const Py_ssize_t* st, const double* fr,
                         double* out, Py_ssize_t nx) noexcept nogil:
    cdef Py_ssize_t x
    cdef double f0, f1, f2, a, b, c, d, e, g
    cdef Py_ssize_t p1, p2, p3, p4, p5, p6, p7
    if na == 0:
        for x in range(nx):
            out[x] = G[p, x]
    elif na == 1:
        p1 = p + st[0]
        f0 = fr[0]
        for x in range(nx):
            a = G[p, x]
            out[x] = a + f0 * (G[p1, x] - a)
    elif na == 2:
        p1 = p + st[0]
        p2 = p + st[1]
        p3 = p1 + st[1]
        f0 = fr[0]
        f1 = fr[1]
        for x in range(nx):
            a = G[p, x]
            b = G[p1, x]
            c = G[p2, x]
            a = a + f1 * (c - a)
            b = b + f1 * (G[p3, x] - b)
            out[x] = a + f0 * (b - a)
    else:
        p1 = p + st[0]
        p2 = p + st[1]
        p3 = p1 + st[1]
        p4 = p + st[2]
        p5 = p1 + st[2]
        p6 = p2 + st[2]
        p7 = p3 + st[2]
        f0 = fr[0]
        f1 = fr[1]
        f2 = fr[2]
        for x in range(nx):
            a = G[p, x]
            a = a + f2 * (G[p4, x] - a)
            b = G[p1, x]
            b = b + f2 * (G[p5, x] - b)
            c = G[p2, x]
            c = c + f2 * (G[p6, x] - c)
            d = G[p3, x]
            d = d + f2 * (G[p7, x] - d)
            e = a + f1 * (c - a)
            g = b + f1 * (d - b)
            out[x] = e + f0 * (g - e)


def collide_raw(const double[:, ::1] G, const double[::1] w,
                const Py_ssize_t[::1] classes,
                const Py_ssize_t[:, ::1] lo, const Py_ssize_t[:, ::1] hi,
                const Py_ssize_t[::1] strides,
                const Py_ssize_t[::1] koff,
                const Py_ssize_t[::1] base1, const int[::1] na1,
                const Py_ssize_t[:, ::1] st1, const double[:, ::1] fr1,
                const Py_ssize_t[::1] base2, const int[::1] na2,
                const Py_ssize_t[:, ::1] st2, const double[:, ::1] fr2,
                const double[::1] coef):
    """Unprojected ``Q(G, G)`` at every node and cell."""
    cdef Py_ssize_t K = G.shape[0], nx = G.shape[1]
    out_arr = np.zeros((K, nx), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double* I1 = <double*> malloc(nx * sizeof(double))
    cdef double* I2 = <double*> malloc(nx * sizeof(double))
    cdef Py_ssize_t ic, c, i0, i1, i2, k, k1, x
    cdef Py_ssize_t s0 = strides[0], s1 = strides[1], s2 = strides[2]
    cdef double cw
    if I1 == NULL or I2 == NULL:
        free(I1)
        free(I2)
        raise MemoryError()
    try:
        with nogil:
            for ic in range(classes.shape[0]):
                c = classes[ic]
                for i0 in range(lo[c, 0], hi[c, 0] + 1):
                    for i1 in range(lo[c, 1], hi[c, 1] + 1):
                        for i2 in range(lo[c, 2], hi[c, 2] + 1):
                            k = i0 * s0 + i1 * s1 + i2 * s2
                            k1 = k + koff[c]
                            cw = coef[c] * w[k1]
                            _interp(G, k + base1[c], na1[c], &st1[c, 0], &fr1[c, 0], I1, nx)
                            _interp(G, k + base2[c], na2[c], &st2[c, 0], &fr2[c, 0], I2, nx)
                            for x in range(nx):
                                out[k, x] += cw * (I1[x] * I2[x] - G[k, x] * G[k1, x])
    finally:
        free(I1)
        free(I2)
    return out_arr


def dissipation_sum(const double[:, ::1] G, const double[::1] w,
                    const Py_ssize_t[::1] classes,
                    const Py_ssize_t[:, ::1] lo, const Py_ssize_t[:, ::1] hi,
                    const Py_ssize_t[::1] strides,
                    const Py_ssize_t[::1] koff,
                    const Py_ssize_t[::1] base1, const int[::1] na1,
                    const Py_ssize_t[:, ::1] st1, const double[:, ::1] fr1,
                    const Py_ssize_t[::1] base2, const int[::1] na2,
                    const Py_ssize_t[:, ::1] st2, const double[:, ::1] fr2,
                    const double[::1] coef, double floor):
    """Per-cell sum of ``w_k coef w_k1 (x - y) log(x / y)`` over all triples."""
    cdef Py_ssize_t K = G.shape[0], nx = G.shape[1]
    acc_arr = np.zeros(nx, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    cdef double* I1 = <double*> malloc(nx * sizeof(double))
    cdef double* I2 = <double*> malloc(nx * sizeof(double))
    cdef Py_ssize_t ic, c, i0, i1, i2, k, k1, x
    cdef Py_ssize_t s0 = strides[0], s1 = strides[1], s2 = strides[2]
    cdef double cw, t1, t0
    if I1 == NULL or I2 == NULL:
        free(I1)
        free(I2)
        raise MemoryError()
    try:
        with nogil:
            for ic in range(classes.shape[0]):
                c = classes[ic]
                for i0 in range(lo[c, 0], hi[c, 0] + 1):
                    for i1 in range(lo[c, 1], hi[c, 1] + 1):
                        for i2 in range(lo[c, 2], hi[c, 2] + 1):
                            k = i0 * s0 + i1 * s1 + i2 * s2
                            k1 = k + koff[c]
                            cw = coef[c] * w[k1] * w[k]
                            _interp(G, k + base1[c], na1[c], &st1[c, 0], &fr1[c, 0], I1, nx)
                            _interp(G, k + base2[c], na2[c], &st2[c, 0], &fr2[c, 0], I2, nx)
                            for x in range(nx):
                                t1 = I1[x] * I2[x]
                                t0 = G[k, x] * G[k1, x]
                                if t1 < floor:
                                    t1 = floor
                                if t0 < floor:
                                    t0 = floor
                                if t1 != t0:
                                    acc[x] += cw * (t1 - t0) * log(t1 / t0)
    finally:
        free(I1)
        free(I2)
    return acc_arr
