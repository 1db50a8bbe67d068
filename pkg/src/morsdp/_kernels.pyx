# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Bellman backup kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange

ctypedef cnp.int64_t idx_t


def backup_min(const idx_t[::1] state_ptr, const idx_t[::1] pair_action,
               const idx_t[::1] succ_ptr, const idx_t[::1] succ_idx,
               const double[::1] succ_prob, const double[:, ::1] v_next, int threads=1):
    cdef Py_ssize_t n = state_ptr.shape[0] - 1
    cdef Py_ssize_t ncol = v_next.shape[1]
    out_arr = np.empty((n, ncol), dtype=np.float64)
    arg_arr = np.empty((n, ncol), dtype=np.int64)
    cdef double[:, ::1] out = out_arr
    cdef idx_t[:, ::1] arg = arg_arr
    cdef Py_ssize_t i, c, p, s
    cdef double q, best
    cdef idx_t besta
    for i in prange(n, nogil=True, num_threads=threads, schedule="static"):
        for c in range(ncol):
            best = 0.0
            besta = -1
            for p in range(state_ptr[i], state_ptr[i + 1]):
                q = 0.0
                for s in range(succ_ptr[p], succ_ptr[p + 1]):
                    q = q + succ_prob[s] * v_next[succ_idx[s], c]
                if besta < 0 or q < best:
                    best = q
                    besta = pair_action[p]
            out[i, c] = best
            arg[i, c] = besta
    return out_arr, arg_arr


def backup_fixed(const idx_t[::1] state_ptr, const idx_t[::1] pair_action,
                 const idx_t[::1] succ_ptr, const idx_t[::1] succ_idx,
                 const double[::1] succ_prob, const double[:, ::1] v_next,
                 const idx_t[::1] actions, int threads=1):
    cdef Py_ssize_t n = state_ptr.shape[0] - 1
    cdef Py_ssize_t ncol = v_next.shape[1]
    out_arr = np.empty((n, ncol), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, c, p, s, bad = -1
    cdef double q
    cdef int found
    for i in range(n):
        found = 0
        for p in range(state_ptr[i], state_ptr[i + 1]):
            if pair_action[p] != actions[i]:
                continue
            found = 1
            for c in range(ncol):
                q = 0.0
                for s in range(succ_ptr[p], succ_ptr[p + 1]):
                    q = q + succ_prob[s] * v_next[succ_idx[s], c]
                out[i, c] = q
        if not found:
            bad = i
            break
    if bad >= 0:
        raise LookupError(f"action {actions[bad]} is not feasible in layer state {bad}")
    return out_arr
