# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel; mirrors resalloc._kernel_py step for step."""

from libc.math cimport log
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, calloc, free

import numpy as np

cdef enum:
    OK = 0
    CAPACITY_VIOLATION = 1
    ACTION_VIOLATION = 2


cdef inline uint64_t rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t next_u64(uint64_t* s) nogil:
    cdef uint64_t r = rotl(s[1] * 5, 7) * 9
    cdef uint64_t t = s[1] << 17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = rotl(s[3], 45)
    return r


cdef inline double uniform(uint64_t* s) nogil:
    return <double>(next_u64(s) >> 11) * (1.0 / 9007199254740992.0)


cdef void decide(int I, int L, int J, const int64_t[::1] owner, const unsigned char[::1] dummy,
                 const int64_t[:, ::1] W, const int64_t[::1] pool_ptr, const int64_t[::1] pool_idx,
                 const int64_t[::1] order, const int64_t[:, ::1] ceil, const int64_t[::1] state_cap,
                 const int64_t[::1] dummy_of, int64_t* N, int64_t* used, int64_t* reserved,
                 int64_t* act) noexcept nogil:
    cdef Py_ssize_t k, p, i, j, rt
    cdef bint fits
    for rt in range(L):
        act[rt] = -1
    for j in range(J):
        reserved[j] = 0
    for k in range(order.shape[0]):
        i = order[k]
        rt = owner[i]
        if act[rt] >= 0:
            continue
        if dummy[i]:
            act[rt] = i
            continue
        if N[i] >= state_cap[i]:
            continue
        fits = True
        for p in range(pool_ptr[i], pool_ptr[i + 1]):
            j = pool_idx[p]
            if used[j] + reserved[j] + 1 > ceil[j, i]:
                fits = False
                break
        if fits:
            act[rt] = i
            for p in range(pool_ptr[i], pool_ptr[i + 1]):
                j = pool_idx[p]
                reserved[j] += W[j, i]
    for rt in range(L):
        if act[rt] < 0:
            act[rt] = dummy_of[rt]


def run_replication(const int64_t[:, ::1] W, const int64_t[::1] owner,
                    const unsigned char[::1] dummy, const double[::1] mu,
                    const double[::1] net, const double[::1] lam, const int64_t[::1] C,
                    int mode, const int64_t[::1] order, const int64_t[:, ::1] ceil,
                    const int64_t[::1] state_cap, const int64_t[::1] pool_ptr,
                    const int64_t[::1] pool_idx, const int64_t[::1] rt_ptr,
                    const int64_t[::1] rt_pats, const int64_t[::1] dummy_of,
                    double horizon, double t_warm, seed):
    cdef int J = W.shape[0]
    cdef int I = W.shape[1]
    cdef int L = lam.shape[0]
    cdef uint64_t s[4]
    cdef Py_ssize_t a, b, i, j, k, p, r, rt, ncand
    cdef int status = OK
    cdef long long events = 0
    cdef double t = 0.0, t_next, end, lo, span, dep, rate, total, u, acc
    cdef double rev = 0.0, lam_tot = 0.0
    cdef bint fits

    for k in range(4):
        s[k] = <uint64_t>int(seed[k])
    for r in range(L):
        lam_tot += lam[r]

    cdef int64_t* N = <int64_t*>calloc(I, sizeof(int64_t))
    cdef int64_t* used = <int64_t*>calloc(J, sizeof(int64_t))
    cdef int64_t* reserved = <int64_t*>calloc(J, sizeof(int64_t))
    cdef int64_t* act = <int64_t*>calloc(L, sizeof(int64_t))
    cdef int64_t* cand = <int64_t*>calloc(I, sizeof(int64_t))
    cdef double* occ = <double*>calloc(I, sizeof(double))
    cdef int64_t* arrivals = <int64_t*>calloc(L, sizeof(int64_t))
    cdef int64_t* blocked = <int64_t*>calloc(L, sizeof(int64_t))
    if not (N and used and reserved and act and cand and occ and arrivals and blocked):
        raise MemoryError()

    try:
        with nogil:
            if mode == 0:
                decide(I, L, J, owner, dummy, W, pool_ptr, pool_idx, order, ceil, state_cap,
                       dummy_of, N, used, reserved, act)
            while True:
                dep = 0.0
                rate = 0.0
                for i in range(I):
                    if N[i]:
                        dep += N[i] * mu[i]
                        rate += N[i] * net[i]
                total = lam_tot + dep
                t_next = t - log(1.0 - uniform(s)) / total
                end = t_next if t_next < horizon else horizon
                lo = t if t > t_warm else t_warm
                if end > lo:
                    span = end - lo
                    rev += rate * span
                    for i in range(I):
                        if N[i]:
                            occ[i] += N[i] * span
                if t_next >= horizon:
                    break
                t = t_next
                events += 1
                u = uniform(s) * total
                if u < lam_tot:
                    rt = L - 1
                    acc = 0.0
                    for r in range(L):
                        acc += lam[r]
                        if u < acc:
                            rt = r
                            break
                    if mode == 0:
                        i = act[rt]
                    else:
                        ncand = 0
                        for p in range(rt_ptr[rt], rt_ptr[rt + 1]):
                            k = rt_pats[p]
                            fits = True
                            for a in range(pool_ptr[k], pool_ptr[k + 1]):
                                j = pool_idx[a]
                                if used[j] + W[j, k] > C[j]:
                                    fits = False
                                    break
                            if fits:
                                cand[ncand] = k
                                ncand += 1
                        if ncand:
                            i = cand[<Py_ssize_t>(uniform(s) * ncand)]
                        else:
                            i = dummy_of[rt]
                    if t >= t_warm:
                        arrivals[rt] += 1
                        if dummy[i]:
                            blocked[rt] += 1
                    if not dummy[i]:
                        N[i] += 1
                        for a in range(pool_ptr[i], pool_ptr[i + 1]):
                            j = pool_idx[a]
                            used[j] += W[j, i]
                            if used[j] > C[j]:
                                status = CAPACITY_VIOLATION
                else:
                    u -= lam_tot
                    i = I - 1
                    acc = 0.0
                    for k in range(I):
                        if N[k]:
                            acc += N[k] * mu[k]
                            if u < acc:
                                i = k
                                break
                    while N[i] == 0:
                        i -= 1
                    N[i] -= 1
                    for a in range(pool_ptr[i], pool_ptr[i + 1]):
                        j = pool_idx[a]
                        used[j] -= W[j, i]
                if status != OK:
                    break
                if mode == 0:
                    decide(I, L, J, owner, dummy, W, pool_ptr, pool_idx, order, ceil,
                           state_cap, dummy_of, N, used, reserved, act)
                    for j in range(J):
                        if used[j] + reserved[j] > C[j]:
                            status = CAPACITY_VIOLATION
                    for rt in range(L):
                        if act[rt] < 0 or owner[act[rt]] != rt:
                            status = ACTION_VIOLATION
                    if status != OK:
                        break
        occ_out = [occ[i] for i in range(I)]
        arr_out = [arrivals[r] for r in range(L)]
        blk_out = [blocked[r] for r in range(L)]
    finally:
        free(N); free(used); free(reserved); free(act); free(cand)
        free(occ); free(arrivals); free(blocked)
    return rev, occ_out, arr_out, blk_out, events, status
