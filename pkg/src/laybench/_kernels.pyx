# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the sequence-overlap hot loops.

The pure-Python twins live in laybench._kernels_py; laybench.metrics.rouge
picks whichever imports at runtime.
"""

from cpython.mem cimport PyMem_Free, PyMem_Malloc


cdef long *_to_c_array(seq, Py_ssize_t n) except NULL:
    cdef long *buf = <long *> PyMem_Malloc(n * sizeof(long))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(n):
        buf[i] = seq[i]
    return buf


def lcs_length(a, b):
    """Length of the longest common subsequence of two int sequences."""
    cdef Py_ssize_t n = len(a)
    cdef Py_ssize_t m = len(b)
    if n == 0 or m == 0:
        return 0
    if m > n:
        a, b = b, a
        n, m = m, n
    cdef long *xs = _to_c_array(a, n)
    cdef long *ys
    cdef long *prev
    cdef long *cur
    cdef long *tmp
    cdef Py_ssize_t i, j
    cdef long best, xi
    try:
        ys = _to_c_array(b, m)
    except BaseException:
        PyMem_Free(xs)
        raise
    prev = <long *> PyMem_Malloc((m + 1) * sizeof(long))
    cur = <long *> PyMem_Malloc((m + 1) * sizeof(long))
    if prev == NULL or cur == NULL:
        PyMem_Free(xs)
        PyMem_Free(ys)
        if prev != NULL:
            PyMem_Free(prev)
        if cur != NULL:
            PyMem_Free(cur)
        raise MemoryError()
    for j in range(m + 1):
        prev[j] = 0
        cur[j] = 0
    for i in range(1, n + 1):
        xi = xs[i - 1]
        cur[0] = 0
        for j in range(1, m + 1):
            if xi == ys[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = cur[j - 1] if cur[j - 1] >= prev[j] else prev[j]
        tmp = prev
        prev = cur
        cur = tmp
    best = prev[m]
    PyMem_Free(xs)
    PyMem_Free(ys)
    PyMem_Free(prev)
    PyMem_Free(cur)
    return best
