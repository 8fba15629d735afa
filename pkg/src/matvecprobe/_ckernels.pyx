# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see _pykernels.py for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, uint8_t, int64_t

cnp.import_array()

cdef extern from *:
    """
    typedef unsigned __int128 mvp_u128;
    """
    ctypedef unsigned long long u128 "mvp_u128"
    int __builtin_popcountll(unsigned long long) nogil


cdef inline uint64_t _mulmod(uint64_t a, uint64_t b, uint64_t p) nogil:
    return <uint64_t>((<u128>a * <u128>b) % p)


def gf2_matmat(packed, queries):
    cdef const uint64_t[:, ::1] rows = np.ascontiguousarray(packed, dtype=np.uint64)
    cdef const uint64_t[:, ::1] qs = np.ascontiguousarray(queries, dtype=np.uint64)
    cdef Py_ssize_t m = rows.shape[0], w = rows.shape[1], q = qs.shape[0]
    out = np.empty((m, q), dtype=np.uint8)
    cdef uint8_t[:, ::1] o = out
    cdef Py_ssize_t i, k, j
    cdef uint64_t acc
    with nogil:
        for i in range(m):
            for k in range(q):
                acc = 0
                for j in range(w):
                    acc ^= rows[i, j] & qs[k, j]
                o[i, k] = <uint8_t>(__builtin_popcountll(acc) & 1)
    return out


def gf2_vecmat(packed, u):
    cdef const uint64_t[:, ::1] rows = np.ascontiguousarray(packed, dtype=np.uint64)
    cdef const uint8_t[::1] sel = np.ascontiguousarray(u, dtype=np.uint8)
    cdef Py_ssize_t m = rows.shape[0], w = rows.shape[1]
    out = np.zeros(w, dtype=np.uint64)
    cdef uint64_t[::1] o = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(m):
            if sel[i]:
                for j in range(w):
                    o[j] ^= rows[i, j]
    return out


def powmod_table(bases, Py_ssize_t length, modulus):
    cdef const uint64_t[::1] b = np.ascontiguousarray(bases, dtype=np.uint64)
    cdef uint64_t p = <uint64_t>modulus
    cdef Py_ssize_t k = b.shape[0]
    out = np.empty((k, length), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    cdef Py_ssize_t i, e
    cdef uint64_t cur, base
    with nogil:
        for i in range(k):
            base = b[i] % p
            cur = 1 % p
            for e in range(length):
                o[i, e] = cur
                cur = _mulmod(cur, base, p)
    return out


def incidence_matmul_mod(heads, tails, cols, values, Py_ssize_t n, modulus):
    cdef const int64_t[::1] hd = np.ascontiguousarray(heads, dtype=np.int64)
    cdef const int64_t[::1] tl = np.ascontiguousarray(tails, dtype=np.int64)
    cdef const int64_t[::1] cl = np.ascontiguousarray(cols, dtype=np.int64)
    cdef const uint64_t[:, ::1] v = np.ascontiguousarray(values, dtype=np.uint64)
    cdef uint64_t p = <uint64_t>modulus
    cdef Py_ssize_t q = v.shape[1], ne = hd.shape[0]
    out = np.zeros((n, q), dtype=np.uint64)
    cdef uint64_t[:, ::1] o = out
    cdef Py_ssize_t k, c
    cdef uint64_t x, y
    with nogil:
        for k in range(ne):
            for c in range(q):
                x = v[cl[k], c] % p
                y = o[hd[k], c] + x
                if y >= p:
                    y -= p
                o[hd[k], c] = y
                y = o[tl[k], c] + (p - x)
                if y >= p:
                    y -= p
                o[tl[k], c] = y
    return out

