# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled CTC kernels: log-space forward-backward and prefix scoring.

Mirrors _ctc_py exactly (same signatures, same -inf conventions); the
pure module is the reference, this one is the fast path for training
batches and beam-search inner loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, log1p

cnp.import_array()


cdef inline double log_add(double a, double b) nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a < b:
        a, b = b, a
    return a + log1p(exp(b - a))


def ctc_required_frames(labels):
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0
    repeats = int(np.sum(labels[1:] == labels[:-1]))
    return int(labels.size + repeats)


def ctc_forward_backward(logprobs, labels, int blank=0):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lp = np.ascontiguousarray(
        logprobs, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.int64_t, ndim=1] lab = np.ascontiguousarray(
        labels, dtype=np.int64
    )
    cdef int T = lp.shape[0]
    cdef int V = lp.shape[1]
    cdef int U = lab.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.zeros((T, V))
    cdef int t, s, k
    cdef double total, acc

    if T < ctc_required_frames(lab):
        return np.inf, grad

    if U == 0:
        total = 0.0
        for t in range(T):
            total += lp[t, blank]
            grad[t, blank] = -1.0
        return -total, grad

    cdef int S = 2 * U + 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] aug = np.full(S, blank, dtype=np.int64)
    aug[1::2] = lab

    cdef cnp.ndarray[cnp.float64_t, ndim=2] alpha = np.full((T, S), -np.inf)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] beta = np.full((T, S), -np.inf)

    alpha[0, 0] = lp[0, aug[0]]
    alpha[0, 1] = lp[0, aug[1]]
    for t in range(1, T):
        for s in range(S):
            acc = alpha[t - 1, s]
            if s >= 1:
                acc = log_add(acc, alpha[t - 1, s - 1])
            if s >= 2 and aug[s] != blank and aug[s] != aug[s - 2]:
                acc = log_add(acc, alpha[t - 1, s - 2])
            alpha[t, s] = acc + lp[t, aug[s]]

    total = alpha[T - 1, S - 1]
    if S > 1:
        total = log_add(total, alpha[T - 1, S - 2])
    if total == -INFINITY:
        return np.inf, grad

    beta[T - 1, S - 1] = lp[T - 1, aug[S - 1]]
    if S > 1:
        beta[T - 1, S - 2] = lp[T - 1, aug[S - 2]]
    for t in range(T - 2, -1, -1):
        for s in range(S):
            acc = beta[t + 1, s]
            if s + 1 < S:
                acc = log_add(acc, beta[t + 1, s + 1])
            if s + 2 < S and aug[s] != blank and aug[s] != aug[s + 2]:
                acc = log_add(acc, beta[t + 1, s + 2])
            beta[t, s] = acc + lp[t, aug[s]]

    for t in range(T):
        for s in range(S):
            k = aug[s]
            grad[t, k] -= exp(alpha[t, s] + beta[t, s] - lp[t, k] - total)
    return -total, grad


def ctc_prefix_initial(logprobs, int blank=0):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lp = np.ascontiguousarray(
        logprobs, dtype=np.float64
    )
    cdef int T = lp.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] r = np.full((T, 2), -np.inf)
    cdef int t
    cdef double acc = 0.0
    for t in range(T):
        acc += lp[t, blank]
        r[t, 1] = acc
    return r


def ctc_prefix_extend(
    logprobs, r_prev, int last, cands, int prefix_len, int blank=0, int eos=3
):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lp = np.ascontiguousarray(
        logprobs, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=2] rp = np.ascontiguousarray(
        r_prev, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cs = np.ascontiguousarray(
        cands, dtype=np.int64
    )
    cdef int T = lp.shape[0]
    cdef int C = cs.shape[0]
    cdef int i, t, c
    cdef double phi_prev, lb, log_psi

    if np.any(cs == blank):
        raise ValueError("blank cannot extend a CTC prefix")

    cdef cnp.ndarray[cnp.float64_t, ndim=3] r_new = np.full((C, T, 2), -np.inf)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] psi = np.full(C, -np.inf)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r_sum = np.empty(T)
    for t in range(T):
        r_sum[t] = log_add(rp[t, 0], rp[t, 1])

    cdef int start = prefix_len if prefix_len > 1 else 1
    for i in range(C):
        c = cs[i]
        if c == eos:
            psi[i] = r_sum[T - 1]
            continue
        if prefix_len == 0:
            r_new[i, 0, 0] = lp[0, c]
            log_psi = lp[0, c]
        else:
            log_psi = -INFINITY
        for t in range(start, T):
            if c == last:
                phi_prev = rp[t - 1, 1]
            else:
                phi_prev = r_sum[t - 1]
            lb = lp[t, c]
            r_new[i, t, 0] = log_add(r_new[i, t - 1, 0], phi_prev) + lb
            r_new[i, t, 1] = (
                log_add(r_new[i, t - 1, 0], r_new[i, t - 1, 1]) + lp[t, blank]
            )
            log_psi = log_add(log_psi, phi_prev + lb)
        psi[i] = log_psi
    return r_new, psi
