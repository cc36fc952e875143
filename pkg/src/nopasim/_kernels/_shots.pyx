# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled shot loop: per-shot homodyne conditioning and feedforward.

Same contract and same PCG64 normal stream as the numpy fallback; the loop
runs shot by shot with no temporaries, which keeps large Monte Carlo runs
cheap in both time and memory.
"""

from libc.math cimport sqrt

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()


def run_shots_impl(double[::1] mean0, cnp.intp_t[::1] q_idx, double[::1] var,
                   double[::1] sd, double[:, ::1] cvec, cnp.intp_t[::1] out_idx,
                   double[:, ::1] ff, double[::1] signs, Py_ssize_t n_shots,
                   bit_generator):
    cdef Py_ssize_t n = mean0.shape[0]
    cdef Py_ssize_t m = q_idx.shape[0]
    cdef Py_ssize_t k_out = out_idx.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] outcomes = np.empty((n_shots, m))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_means = np.empty((n_shots, k_out))
    cdef double[:, ::1] oc = outcomes
    cdef double[:, ::1] om = out_means
    cdef double[::1] mean = np.empty(n)
    cdef bitgen_t *rng
    cdef Py_ssize_t s, k, j
    cdef double o, t, acc

    capsule = bit_generator.capsule
    rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    with bit_generator.lock, nogil:
        for s in range(n_shots):
            for j in range(n):
                mean[j] = mean0[j]
            for k in range(m):
                o = mean[q_idx[k]] + sd[k] * random_standard_normal(rng)
                oc[s, k] = o
                t = (o - mean[q_idx[k]]) / var[k]
                for j in range(n):
                    mean[j] = mean[j] + cvec[k, j] * t
            for j in range(k_out):
                acc = mean[out_idx[j]]
                for k in range(m):
                    acc = acc + ff[j, k] * oc[s, k]
                om[s, j] = signs[j] * acc
    return outcomes, out_means
