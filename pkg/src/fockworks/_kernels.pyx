# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Ryser permanent and number-basis expansion.

Mirrors fockworks._kernels_py; selected automatically at import when the
extension built. The expansion packs occupation vectors into 64-bit keys
and convolves through a C open-addressing table; states too wide to pack
fall back to a dict of tuples.
"""

import math

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc
from libc.string cimport memset

cnp.import_array()

BACKEND = "compiled"

cdef double[64] _SQRT_FACT
for _k in range(64):
    _SQRT_FACT[_k] = math.sqrt(math.factorial(_k))


def permanent(mat):
    """Permanent of a square complex matrix (Ryser, Gray-code order)."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] a = np.ascontiguousarray(mat, dtype=np.complex128)
    cdef Py_ssize_t n = a.shape[0]
    if n == 0:
        return 1.0 + 0.0j
    if n > 62:
        raise ValueError("permanent limited to 62x62")
    cdef double complex* sums = <double complex*>malloc(n * sizeof(double complex))
    if sums == NULL:
        raise MemoryError()
    memset(sums, 0, n * sizeof(double complex))
    cdef double complex total = 0
    cdef double complex prod
    cdef unsigned long long k, gray, new_gray, bit, tmp
    cdef Py_ssize_t i, j, bits
    gray = 0
    try:
        for k in range(1, (<unsigned long long>1) << n):
            new_gray = k ^ (k >> 1)
            bit = new_gray ^ gray
            j = -1
            tmp = bit
            while tmp:
                tmp >>= 1
                j += 1
            if new_gray & bit:
                for i in range(n):
                    sums[i] = sums[i] + a[i, j]
            else:
                for i in range(n):
                    sums[i] = sums[i] - a[i, j]
            gray = new_gray
            prod = 1
            for i in range(n):
                prod = prod * sums[i]
            bits = 0
            tmp = new_gray
            while tmp:
                bits += tmp & 1
                tmp >>= 1
            if bits & 1:
                total = total - prod
            else:
                total = total + prod
    finally:
        free(sums)
    if n & 1:
        return -total
    return total


cdef struct HashTable:
    unsigned long long* keys
    double complex* vals
    unsigned char* used
    Py_ssize_t capacity      # power of two
    Py_ssize_t count
    Py_ssize_t log_cap


cdef int _ht_init(HashTable* t, Py_ssize_t log_cap) except -1:
    t.log_cap = log_cap
    t.capacity = (<Py_ssize_t>1) << log_cap
    t.count = 0
    t.keys = <unsigned long long*>malloc(t.capacity * sizeof(unsigned long long))
    t.vals = <double complex*>malloc(t.capacity * sizeof(double complex))
    t.used = <unsigned char*>malloc(t.capacity)
    if t.keys == NULL or t.vals == NULL or t.used == NULL:
        _ht_free(t)
        raise MemoryError()
    memset(t.used, 0, t.capacity)
    return 0


cdef void _ht_free(HashTable* t) noexcept:
    if t.keys != NULL:
        free(t.keys); t.keys = NULL
    if t.vals != NULL:
        free(t.vals); t.vals = NULL
    if t.used != NULL:
        free(t.used); t.used = NULL


cdef inline Py_ssize_t _ht_slot(HashTable* t, unsigned long long key) noexcept:
    cdef unsigned long long h = key * <unsigned long long>0x9E3779B97F4A7C15
    cdef Py_ssize_t idx = <Py_ssize_t>(h >> (64 - t.log_cap)) & (t.capacity - 1)
    while t.used[idx] and t.keys[idx] != key:
        idx = (idx + 1) & (t.capacity - 1)
    return idx


cdef int _ht_add(HashTable* t, unsigned long long key, double complex val) except -1:
    cdef Py_ssize_t idx = _ht_slot(t, key)
    if t.used[idx]:
        t.vals[idx] = t.vals[idx] + val
        return 0
    t.keys[idx] = key
    t.vals[idx] = val
    t.used[idx] = 1
    t.count += 1
    if t.count * 10 > t.capacity * 7:
        _ht_grow(t)
    return 0


cdef int _ht_grow(HashTable* t) except -1:
    cdef HashTable bigger
    cdef Py_ssize_t i, idx
    _ht_init(&bigger, t.log_cap + 1)
    for i in range(t.capacity):
        if t.used[i]:
            idx = _ht_slot(&bigger, t.keys[i])
            bigger.keys[idx] = t.keys[i]
            bigger.vals[idx] = t.vals[i]
            bigger.used[idx] = 1
            bigger.count += 1
    _ht_free(t)
    t[0] = bigger
    return 0


def expand_basis_state(u, occ):
    """Expand U|occ> in the number basis; returns {occupation: amplitude}."""
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] a = np.ascontiguousarray(u, dtype=np.complex128)
    cdef Py_ssize_t m = len(occ)
    cdef Py_ssize_t total = 0
    cdef Py_ssize_t l
    for l in range(m):
        total += occ[l]
    cdef Py_ssize_t bits = max(1, <Py_ssize_t>(total).bit_length())
    if m * bits > 64 or total >= 64:
        return _expand_tuples(a, tuple(occ), m)

    cdef HashTable cur, nxt
    cdef Py_ssize_t i, j, rep, n_l, n_col, idx
    cdef unsigned long long key, mask = ((<unsigned long long>1) << bits) - 1
    cdef double complex amp, c
    cdef unsigned long long* col_step = <unsigned long long*>malloc(m * sizeof(unsigned long long))
    cdef double complex* col_amp = <double complex*>malloc(m * sizeof(double complex))
    if col_step == NULL or col_amp == NULL:
        if col_step != NULL: free(col_step)
        if col_amp != NULL: free(col_amp)
        raise MemoryError()
    _ht_init(&cur, 4)
    _ht_add(&cur, 0, 1.0 + 0.0j)
    try:
        for l in range(m):
            n_l = occ[l]
            if n_l == 0:
                continue
            n_col = 0
            for j in range(m):
                if a[j, l] != 0:
                    col_step[n_col] = (<unsigned long long>1) << (bits * j)
                    col_amp[n_col] = a[j, l]
                    n_col += 1
            for rep in range(n_l):
                _ht_init(&nxt, cur.log_cap)
                for i in range(cur.capacity):
                    if not cur.used[i]:
                        continue
                    key = cur.keys[i]
                    amp = cur.vals[i]
                    for j in range(n_col):
                        _ht_add(&nxt, key + col_step[j], amp * col_amp[j])
                _ht_free(&cur)
                cur = nxt
        scale = 1.0
        for l in range(m):
            scale *= _SQRT_FACT[occ[l]]
        out = {}
        counts = [0] * m
        for i in range(cur.capacity):
            if not cur.used[i]:
                continue
            key = cur.keys[i]
            factor = 1.0
            for l in range(m):
                counts[l] = <Py_ssize_t>(key & mask)
                factor *= _SQRT_FACT[counts[l]]
                key >>= bits
            out[tuple(counts)] = cur.vals[i] * (factor / scale)
        return out
    finally:
        _ht_free(&cur)
        free(col_step)
        free(col_amp)


cdef _expand_tuples(cnp.ndarray[cnp.complex128_t, ndim=2] a, tuple occ, Py_ssize_t m):
    # wide states: plain dict of occupation tuples
    cdef Py_ssize_t l, j, rep, n_l
    cdef double complex amp, c
    cdef dict current = {(0,) * m: 1.0 + 0.0j}
    cdef dict nxt
    cdef list col
    cdef tuple key, new_key
    cdef double scale, factor

    for l in range(m):
        n_l = occ[l]
        if n_l == 0:
            continue
        col = []
        for j in range(m):
            if a[j, l] != 0:
                col.append((j, a[j, l]))
        for rep in range(n_l):
            nxt = {}
            for key, amp_obj in current.items():
                amp = amp_obj
                for j, c_obj in col:
                    c = c_obj
                    new_key = key[:j] + (key[j] + 1,) + key[j + 1:]
                    if new_key in nxt:
                        nxt[new_key] = nxt[new_key] + amp * c
                    else:
                        nxt[new_key] = amp * c
            current = nxt

    scale = 1.0
    for l in range(m):
        scale *= _SQRT_FACT[occ[l]]
    out = {}
    for key, amp_obj in current.items():
        factor = 1.0
        for j in range(m):
            factor *= _SQRT_FACT[<Py_ssize_t>key[j]]
        out[key] = (<double complex>amp_obj) * (factor / scale)
    return out
