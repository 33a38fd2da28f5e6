# cython: language_level=3
"""Compiled versions of the per-step kernels in ``_pykernels``."""

from libc.math cimport exp, sqrt
from libc.stdlib cimport malloc, free, qsort


cdef int _cmp_double(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    return (x > y) - (x < y)


cdef Py_ssize_t _bisect_left(double* a, Py_ssize_t k, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = k, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef Py_ssize_t _bisect_right(double* a, Py_ssize_t k, double v) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = k, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if v < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def raps_scores(const double[:, ::1] probs, double u, double xi, long k_reg, double[:, ::1] out):
    cdef Py_ssize_t rows = probs.shape[0], k = probs.shape[1]
    cdef Py_ssize_t r, j, n_lt, n_gt
    cdef double p, rho, s
    cdef long extra
    cdef double* asc = <double*>malloc(k * sizeof(double))
    cdef double* csum = <double*>malloc(k * sizeof(double))
    if asc == NULL or csum == NULL:
        free(asc)
        free(csum)
        raise MemoryError()
    try:
        for r in range(rows):
            for j in range(k):
                asc[j] = probs[r, j]
            qsort(asc, k, sizeof(double), _cmp_double)
            s = 0.0
            for j in range(k):
                s = s + asc[k - 1 - j]
                csum[j] = s
            for j in range(k):
                p = probs[r, j]
                n_lt = _bisect_left(asc, k, p)
                n_gt = k - _bisect_right(asc, k, p)
                rho = csum[n_gt - 1] if n_gt > 0 else 0.0
                extra = (k - n_lt) - k_reg
                if extra < 0:
                    extra = 0
                out[r, j] = xi * sqrt(<double>extra) + u * p + rho
    finally:
        free(asc)
        free(csum)


def aggregate(const double[:, ::1] alpha, const double[:, ::1] logw, const double[::1] logh,
              Py_ssize_t n, double[:, ::1] wbar, double[::1] hbar, double[::1] mass):
    cdef Py_ssize_t m_count = alpha.shape[1]
    cdef Py_ssize_t i, m
    cdef double mx, s, j, mix = 0.0
    mx = logh[0]
    for i in range(1, n):
        if logh[i] > mx:
            mx = logh[i]
    s = 0.0
    for i in range(n):
        hbar[i] = exp(logh[i] - mx)
        s += hbar[i]
    for i in range(n):
        hbar[i] = hbar[i] / s
    for m in range(m_count):
        mass[m] = 0.0
    for i in range(n):
        mx = logw[i, 0]
        for m in range(1, m_count):
            if logw[i, m] > mx:
                mx = logw[i, m]
        s = 0.0
        for m in range(m_count):
            wbar[i, m] = exp(logw[i, m] - mx)
            s += wbar[i, m]
        for m in range(m_count):
            wbar[i, m] = wbar[i, m] / s
            j = hbar[i] * wbar[i, m]
            mass[m] += j
            mix += j * alpha[i, m]
    return mix


def update(double[:, ::1] alpha, double[:, ::1] cumsq, double[:, ::1] logw, double[::1] logh,
           const double[::1] eps, const double[:, ::1] wbar, const double[::1] hbar, Py_ssize_t n,
           const double[::1] alpha_bars, double target, double eta,
           Py_ssize_t sel_n, Py_ssize_t sel_m, double sign):
    cdef Py_ssize_t m_count = alpha.shape[1]
    cdef Py_ssize_t i, m
    cdef double d, loss, miss, grad, cs, expert_loss
    cdef double learner_loss = 0.0, expected_err = 0.0

    if sel_n >= 0:
        d = alpha_bars[sel_m] - alpha[sel_n, sel_m]
        learner_loss = target * d - (d if d < 0.0 else 0.0)
    for i in range(n):
        for m in range(m_count):
            d = alpha_bars[m] - alpha[i, m]
            if alpha_bars[m] < alpha[i, m]:
                expected_err += hbar[i] * wbar[i, m]
            if sel_n < 0:
                learner_loss += hbar[i] * wbar[i, m] * (target * d - (d if d < 0.0 else 0.0))

    for i in range(n):
        expert_loss = 0.0
        for m in range(m_count):
            d = alpha_bars[m] - alpha[i, m]
            loss = target * d - (d if d < 0.0 else 0.0)
            if sel_n >= 0:
                if m == sel_m:
                    expert_loss = loss
            else:
                expert_loss += wbar[i, m] * loss
            logw[i, m] -= eps[i] * loss
            miss = 1.0 if alpha_bars[m] < alpha[i, m] else 0.0
            grad = miss - target
            cs = cumsq[i, m] + grad * grad
            cumsq[i, m] = cs
            if cs > 0.0:
                alpha[i, m] = alpha[i, m] - eta * grad / sqrt(cs)
        logh[i] += sign * eps[i] * (learner_loss - expert_loss)
    return learner_loss, expected_err
