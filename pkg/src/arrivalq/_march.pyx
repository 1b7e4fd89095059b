# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled time-march kernel.

Semantics match arrivalq._march_py.march exactly; that module is the
readable reference and the import-time fallback.
"""

from libc.math cimport ceil, exp, isfinite, sqrt

import numpy as np

BACKEND_NAME = "compiled"

STATUS_THARD = 0
STATUS_MASS = 1
STATUS_FZERO = 2


cdef double _f_neg(double[::1] p, Py_ssize_t n, double t, double lam, double mu,
                   double alpha, double beta1, double beta2) noexcept nogil:
    cdef double x = -t * mu
    cdef double term = exp(-x)
    cdef double tail = 0.0
    cdef double mix = 0.0
    cdef Py_ssize_t j
    for j in range(n):
        tail += term
        if tail > 1.0:
            tail = 1.0
        mix += p[j] * tail
        term *= x / (j + 1)
    cdef double coeff = lam * (alpha + beta2 * mix) / mu
    return (beta1 + alpha * (1.0 - p[0])) / coeff


cdef double _f_pos(double[::1] p, double lam, double mu, double alpha,
                   double beta2) noexcept nogil:
    return (1.0 - p[0]) * mu / lam - beta2 * mu / ((alpha + beta2) * lam)


cdef void _derivative(double[::1] p, Py_ssize_t n, double birth, double mu,
                      double[::1] out) noexcept nogil:
    cdef Py_ssize_t j
    out[0] = mu * p[1] - birth * p[0]
    for j in range(1, n - 1):
        out[j] = -(mu + birth) * p[j] + birth * p[j - 1] + mu * p[j + 1]
    out[n - 1] = -mu * p[n - 1] + birth * p[n - 2]


cdef double _rk4_inplace(double[::1] p, Py_ssize_t n, double birth, double mu,
                         double h, double[::1] k1, double[::1] k2,
                         double[::1] k3, double[::1] k4,
                         double[::1] tmp) noexcept nogil:
    """Advance p one step; returns min entry of the result."""
    cdef Py_ssize_t j
    cdef double lo
    _derivative(p, n, birth, mu, k1)
    for j in range(n):
        tmp[j] = p[j] + 0.5 * h * k1[j]
    _derivative(tmp, n, birth, mu, k2)
    for j in range(n):
        tmp[j] = p[j] + 0.5 * h * k2[j]
    _derivative(tmp, n, birth, mu, k3)
    for j in range(n):
        tmp[j] = p[j] + h * k3[j]
    _derivative(tmp, n, birth, mu, k4)
    lo = 1.0
    for j in range(n):
        p[j] = p[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        if p[j] < lo:
            lo = p[j]
    return lo


cdef double _mass_crossing(double deficit, double f, double df, double h) noexcept nogil:
    cdef double a = df / (2.0 * h)
    cdef double disc, r1, r2, best
    if a < 1e-300 and a > -1e-300:
        if f > 0.0:
            r1 = deficit / f
            return r1 if r1 < h else h
        return h
    disc = f * f + 4.0 * a * deficit
    if disc < 0.0:
        return h
    r1 = (-f + sqrt(disc)) / (2.0 * a)
    r2 = (-f - sqrt(disc)) / (2.0 * a)
    best = h
    if 0.0 < r1 <= h and r1 < best:
        best = r1
    if 0.0 < r2 <= h and r2 < best:
        best = r2
    return best


def march(p0, double t0, double dt, double t_hard, double lam, double mu,
          double alpha, double beta1, double beta2, double mass0=0.0,
          double mass_target=1.0, bint record_states=False):
    """See arrivalq._march_py.march."""
    if not isfinite(t_hard):
        raise ValueError("march requires a finite hard stop time")
    p_arr = np.array(p0, dtype=np.float64)
    cdef double[::1] p = p_arr
    cdef Py_ssize_t n = p_arr.shape[0]
    cdef Py_ssize_t n_neg, n_pos, cap, k
    cdef double h_neg
    if t0 < 0:
        n_neg = <Py_ssize_t>ceil(-t0 / dt - 1e-12)
        if n_neg < 1:
            n_neg = 1
        h_neg = -t0 / n_neg
    else:
        n_neg = 0
        h_neg = dt
    n_pos = <Py_ssize_t>ceil((t_hard - (t0 if t0 > 0.0 else 0.0)) / dt - 1e-12)
    if n_pos < 0:
        n_pos = 0
    cap = n_neg + n_pos + 4
    if cap > 5_000_000:
        raise ValueError("step budget exceeded; increase dt or shrink the horizon")

    ts_arr = np.empty(cap)
    fs_arr = np.empty(cap)
    ms_arr = np.empty(cap)
    st_arr = np.empty((cap if record_states else 0, n))
    k1_arr = np.empty(n); k2_arr = np.empty(n)
    k3_arr = np.empty(n); k4_arr = np.empty(n); tmp_arr = np.empty(n)
    cdef double[::1] ts = ts_arr
    cdef double[::1] fs = fs_arr
    cdef double[::1] ms = ms_arr
    cdef double[:, ::1] st = st_arr
    cdef double[::1] k1 = k1_arr, k2 = k2_arr, k3 = k3_arr, k4 = k4_arr, tmp = tmp_arr

    cdef double t = t0
    cdef double mass = mass0
    cdef double f, f_next, f_left, f_for_mass, h, lo, tau, df, mass_next, t_next
    cdef double pmax_peak = p[n - 1]
    cdef double t_end = t0, mass_end = mass0
    cdef int status = STATUS_THARD
    cdef bint crosses_zero
    cdef Py_ssize_t j

    if t < 0.0:
        f = _f_neg(p, n, t, lam, mu, alpha, beta1, beta2)
    else:
        f = _f_pos(p, lam, mu, alpha, beta2)
    k = 0
    while True:
        ts[k] = t; fs[k] = f; ms[k] = mass
        if record_states:
            for j in range(n):
                st[k, j] = p[j]
        k += 1
        if p[n - 1] > pmax_peak:
            pmax_peak = p[n - 1]
        if t >= 0.0 and f <= 0.0:
            status = STATUS_FZERO; t_end = t; mass_end = mass
            break
        if mass >= mass_target:
            status = STATUS_MASS; t_end = t; mass_end = mass
            break
        if t >= t_hard - 1e-12:
            status = STATUS_THARD; t_end = t; mass_end = mass
            break
        if t < -1e-15:
            h = h_neg if h_neg < -t else -t
        else:
            h = dt if dt < t_hard - t else t_hard - t
        crosses_zero = t < -1e-15 and t + h > -1e-12
        lo = _rk4_inplace(p, n, lam * (f if f > 0.0 else 0.0), mu, h, k1, k2, k3, k4, tmp)
        if lo < -1e-9:
            from .errors import NegativeProbability
            raise NegativeProbability(
                f"negative probability {lo:.3e} at t={t + h:.6g}; reduce dt")
        if p[n - 1] > pmax_peak:
            pmax_peak = p[n - 1]
        t_next = 0.0 if crosses_zero else t + h
        if crosses_zero:
            f_left = _f_neg(p, n, 0.0, lam, mu, alpha, beta1, beta2)
            f_next = _f_pos(p, lam, mu, alpha, beta2)
            f_for_mass = f_left
        elif t_next < 0.0:
            f_next = _f_neg(p, n, t_next, lam, mu, alpha, beta1, beta2)
            f_for_mass = f_next if f_next > 0.0 else 0.0
        else:
            f_next = _f_pos(p, lam, mu, alpha, beta2)
            f_for_mass = f_next if f_next > 0.0 else 0.0
        if t >= 0.0 and f_next <= 0.0 < f:
            tau = h * f / (f - f_next)
            status = STATUS_FZERO
            t_end = t + tau; mass_end = mass + 0.5 * f * tau
            ts[k] = t_end; fs[k] = 0.0; ms[k] = mass_end
            if record_states:
                for j in range(n):
                    st[k, j] = p[j]
            k += 1
            break
        mass_next = mass + 0.5 * (f + f_for_mass) * h
        if mass_next >= mass_target:
            df = f_for_mass - f
            tau = _mass_crossing(mass_target - mass, f, df, h)
            status = STATUS_MASS
            t_end = t + tau if t + tau < t_next else t_next
            mass_end = mass_target
            ts[k] = t_end; fs[k] = f + df * (tau / h); ms[k] = mass_end
            if record_states:
                for j in range(n):
                    st[k, j] = p[j]
            k += 1
            break
        t = t_next; f = f_next; mass = mass_next
        if k >= cap - 1:
            status = STATUS_THARD; t_end = t; mass_end = mass
            ts[k] = t; fs[k] = f; ms[k] = mass
            if record_states:
                for j in range(n):
                    st[k, j] = p[j]
            k += 1
            break

    return (status, t_end, mass_end,
            ts_arr[:k].copy(), fs_arr[:k].copy(), ms_arr[:k].copy(),
            st_arr[:k].copy() if record_states else st_arr,
            float(pmax_peak), p_arr.copy())
