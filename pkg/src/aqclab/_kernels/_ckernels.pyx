# cython: language_level=3
"""Compiled gather kernels for sparse Pauli-term operators.

Every kernel evaluates, for each output index ``z``::

    out[z] = shift * psi[z] + sum_t coef[t] * (-1)**popcount(src & mask[t]) * psi[src]

with ``src = z ^ flip[t]``.  Terms are accumulated in storage order for every
output index, so results do not depend on how the outer loop is scheduled.
"""
from libc.stdint cimport uint64_t, int64_t

cimport numpy as cnp

cnp.import_array()


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


# Complex products are written out in real arithmetic: C99 complex multiply
# goes through a NaN-checking helper that is several times slower.

def apply_terms(const uint64_t[::1] flip,
                const uint64_t[::1] mask,
                const double complex[::1] coef,
                double shift,
                const double complex[::1] psi,
                double complex[::1] out):
    # term-major loop: each out[z] still accumulates terms in storage order,
    # but consecutive z carry independent dependency chains
    cdef Py_ssize_t n_terms = flip.shape[0]
    cdef Py_ssize_t dim = psi.shape[0]
    cdef Py_ssize_t z, t
    cdef uint64_t src, f, m
    cdef double cr, ci, pr, pi, sgn
    cdef double* o = <double*> &out[0]
    cdef const double* p = <const double*> &psi[0]
    with nogil:
        for z in range(dim):
            o[2 * z] = shift * p[2 * z]
            o[2 * z + 1] = shift * p[2 * z + 1]
        for t in range(n_terms):
            f = flip[t]
            m = mask[t]
            cr = coef[t].real
            ci = coef[t].imag
            for z in range(dim):
                src = (<uint64_t>z) ^ f
                sgn = 1.0 - 2.0 * (__builtin_popcountll(src & m) & 1)
                pr = sgn * p[2 * src]
                pi = sgn * p[2 * src + 1]
                o[2 * z] = o[2 * z] + (cr * pr - ci * pi)
                o[2 * z + 1] = o[2 * z + 1] + (cr * pi + ci * pr)


cdef inline Py_ssize_t _find(const uint64_t[::1] indices, uint64_t key) noexcept nogil:
    cdef Py_ssize_t lo = 0
    cdef Py_ssize_t hi = indices.shape[0]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if indices[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < indices.shape[0] and indices[lo] == key:
        return lo
    return -1


def apply_terms_sector(const uint64_t[::1] indices,
                       const uint64_t[::1] flip,
                       const uint64_t[::1] mask,
                       const double complex[::1] coef,
                       double shift,
                       const double complex[::1] psi,
                       double complex[::1] out):
    cdef Py_ssize_t n_terms = flip.shape[0]
    cdef Py_ssize_t dim = indices.shape[0]
    cdef Py_ssize_t a, t, pos
    cdef uint64_t src
    cdef double re, im, cr, ci, pr, pi
    with nogil:
        for a in range(dim):
            re = shift * psi[a].real
            im = shift * psi[a].imag
            for t in range(n_terms):
                if flip[t] == 0:
                    pos = a
                    src = indices[a]
                else:
                    src = indices[a] ^ flip[t]
                    pos = _find(indices, src)
                    if pos < 0:
                        continue
                cr = coef[t].real
                ci = coef[t].imag
                if __builtin_popcountll(src & mask[t]) & 1:
                    cr = -cr
                    ci = -ci
                pr = psi[pos].real
                pi = psi[pos].imag
                re = re + cr * pr - ci * pi
                im = im + cr * pi + ci * pr
            out[a].real = re
            out[a].imag = im
