# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: successive-cancellation decoding and packed-bit counts.

Must stay bit-identical to the numpy fallback; the equivalence suite
compares both backends on random inputs. Floating-point contraction is
disabled at build time so the min-sum recursion matches numpy op-for-op.
"""

from libc.math cimport fabs
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline long _popcount_buf(const unsigned char* buf, Py_ssize_t n) nogil:
    cdef long total = 0
    cdef Py_ssize_t i = 0
    cdef unsigned long long chunk
    while i + 8 <= n:
        memcpy(&chunk, buf + i, 8)
        total += __builtin_popcountll(chunk)
        i += 8
    chunk = 0
    if i < n:
        memcpy(&chunk, buf + i, n - i)
        total += __builtin_popcountll(chunk)
    return total


def popcount_packed(a):
    """Total number of set bits in a uint8 array."""
    cdef const unsigned char[::1] av = np.ascontiguousarray(a, dtype=np.uint8).ravel()
    cdef long out
    with nogil:
        out = _popcount_buf(&av[0], av.shape[0]) if av.shape[0] else 0
    return out


def hamming_packed(a, b):
    """Hamming distance between two equal-length packed bit buffers."""
    cdef const unsigned char[::1] av = np.ascontiguousarray(a, dtype=np.uint8).ravel()
    cdef const unsigned char[::1] bv = np.ascontiguousarray(b, dtype=np.uint8).ravel()
    if av.shape[0] != bv.shape[0]:
        raise ValueError("packed buffers differ in length")
    cdef Py_ssize_t n = av.shape[0]
    cdef long total = 0
    cdef Py_ssize_t i = 0
    cdef unsigned long long ca, cb
    with nogil:
        while i + 8 <= n:
            memcpy(&ca, &av[0] + i, 8)
            memcpy(&cb, &bv[0] + i, 8)
            total += __builtin_popcountll(ca ^ cb)
            i += 8
        ca = 0
        cb = 0
        if i < n:
            memcpy(&ca, &av[0] + i, n - i)
            memcpy(&cb, &bv[0] + i, n - i)
            total += __builtin_popcountll(ca ^ cb)
    return total


def packed_counts(a, b):
    """(popcount(a), popcount(b), popcount(a^b)) in one pass."""
    cdef const unsigned char[::1] av = np.ascontiguousarray(a, dtype=np.uint8).ravel()
    cdef const unsigned char[::1] bv = np.ascontiguousarray(b, dtype=np.uint8).ravel()
    if av.shape[0] != bv.shape[0]:
        raise ValueError("packed buffers differ in length")
    cdef Py_ssize_t n = av.shape[0]
    cdef long wa = 0, wb = 0, wx = 0
    cdef Py_ssize_t i = 0
    cdef unsigned long long ca, cb
    with nogil:
        while i + 8 <= n:
            memcpy(&ca, &av[0] + i, 8)
            memcpy(&cb, &bv[0] + i, 8)
            wa += __builtin_popcountll(ca)
            wb += __builtin_popcountll(cb)
            wx += __builtin_popcountll(ca ^ cb)
            i += 8
        ca = 0
        cb = 0
        if i < n:
            memcpy(&ca, &av[0] + i, n - i)
            memcpy(&cb, &bv[0] + i, n - i)
            wa += __builtin_popcountll(ca)
            wb += __builtin_popcountll(cb)
            wx += __builtin_popcountll(ca ^ cb)
    return wa, wb, wx


cdef void _sc_rec(double* llr, Py_ssize_t n,
                  const unsigned char* frozen,
                  unsigned char* u, unsigned char* x,
                  double** scratch_llr, unsigned char** scratch_x,
                  int depth) noexcept nogil:
    cdef Py_ssize_t half, i
    cdef double a, b, mag
    cdef double* dl
    cdef unsigned char* xl
    if n == 1:
        if frozen[0]:
            u[0] = 0
        elif llr[0] < 0:
            u[0] = 1
        else:
            u[0] = 0
        x[0] = u[0]
        return
    half = n // 2
    dl = scratch_llr[depth]
    for i in range(half):
        a = llr[i]
        b = llr[half + i]
        mag = fabs(a)
        if fabs(b) < mag:
            mag = fabs(b)
        if (a < 0) != (b < 0):
            dl[i] = -mag
        else:
            dl[i] = mag
    xl = scratch_x[depth]
    _sc_rec(dl, half, frozen, u, xl, scratch_llr, scratch_x, depth + 1)
    for i in range(half):
        a = llr[i]
        b = llr[half + i]
        dl[i] = b + (1.0 - 2.0 * xl[i]) * a
    _sc_rec(dl, half, frozen + half, u + half, x + half,
            scratch_llr, scratch_x, depth + 1)
    for i in range(half):
        x[i] = xl[i] ^ x[half + i]


def sc_decode(llr, frozen_mask):
    """Successive-cancellation decode (min-sum) under the butterfly transform.

    Same contract as the numpy fallback: returns the full length-n u vector.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] llr_arr = np.ascontiguousarray(
        llr, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] frozen_arr = np.ascontiguousarray(
        frozen_mask, dtype=np.uint8
    )
    cdef Py_ssize_t n = llr_arr.shape[0]
    if n == 0 or (n & (n - 1)) != 0:
        raise ValueError(f"length must be a power of two, got {n}")
    if frozen_arr.shape[0] != n:
        raise ValueError("frozen mask length mismatch")

    cdef int n_levels = 0
    cdef Py_ssize_t m = n
    while m > 1:
        n_levels += 1
        m //= 2

    cdef cnp.ndarray[cnp.uint8_t, ndim=1] u_arr = np.empty(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] x_arr = np.empty(n, dtype=np.uint8)
    # llr input is modified in place at depth 0 by children; keep a copy
    cdef cnp.ndarray[cnp.float64_t, ndim=1] work = llr_arr.copy()

    cdef double** scratch_llr = <double**> malloc(n_levels * sizeof(double*))
    cdef unsigned char** scratch_x = <unsigned char**> malloc(
        n_levels * sizeof(unsigned char*)
    )
    if scratch_llr == NULL or scratch_x == NULL:
        free(scratch_llr)
        free(scratch_x)
        raise MemoryError()
    cdef int d
    cdef Py_ssize_t seg = n // 2
    for d in range(n_levels):
        scratch_llr[d] = <double*> malloc(seg * sizeof(double))
        scratch_x[d] = <unsigned char*> malloc(seg)
        seg //= 2
        if seg == 0:
            seg = 1
    try:
        with nogil:
            _sc_rec(&work[0], n, &frozen_arr[0], &u_arr[0], &x_arr[0],
                    scratch_llr, scratch_x, 0)
    finally:
        for d in range(n_levels):
            free(scratch_llr[d])
            free(scratch_x[d])
        free(scratch_llr)
        free(scratch_x)
    return u_arr
