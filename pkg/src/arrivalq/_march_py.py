"""Pure-numpy implementation of the time-march kernel.

Mirrors the compiled extension in _march.pyx: starting from a queue-length
distribution, alternate density extraction and one frozen-density RK4 step
until the cumulative arrival mass reaches its target, the density hits zero
on t >= 0, or the hard stop time is reached.
"""

import math

import numpy as np

from .costs import _scaled_poisson_terms
from .errors import NegativeProbability

BACKEND_NAME = "pure"

STATUS_THARD = 0
STATUS_MASS = 1
STATUS_FZERO = 2


def _tail_mix(p, x, mu):
    """sum_j p_j P(S_{j+1} > x) for the t<0 extraction formula."""
    terms = _scaled_poisson_terms(mu * x, len(p) - 1)
    tails = np.minimum(np.cumsum(terms), 1.0)
    return float(p @ tails)


def _f_neg(p, t, lam, mu, alpha, beta1, beta2):
    mix = _tail_mix(p, -t, mu)
    coeff = lam * (alpha + beta2 * mix) / mu
    return (beta1 + alpha * (1.0 - p[0])) / coeff


def _f_pos(p, lam, mu, alpha, beta2):
    return (1.0 - p[0]) * mu / lam - beta2 * mu / ((alpha + beta2) * lam)


def _derivative(p, birth, mu, out):
    out[0] = mu * p[1] - birth * p[0]
    if len(p) > 2:
        out[1:-1] = -(mu + birth) * p[1:-1] + birth * p[:-2] + mu * p[2:]
    out[-1] = -mu * p[-1] + birth * p[-2]


def _rk4(p, birth, mu, h, scratch):
    k1, k2, k3, k4, tmp = scratch
    _derivative(p, birth, mu, k1)
    np.multiply(k1, 0.5 * h, out=tmp)
    tmp += p
    _derivative(tmp, birth, mu, k2)
    np.multiply(k2, 0.5 * h, out=tmp)
    tmp += p
    _derivative(tmp, birth, mu, k3)
    np.multiply(k3, h, out=tmp)
    tmp += p
    _derivative(tmp, birth, mu, k4)
    return p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _mass_crossing(deficit, f, df, h):
    """Smallest tau in (0, h] with f*tau + df*tau^2/(2h) = deficit."""
    a = df / (2.0 * h)
    if abs(a) < 1e-300:
        return min(deficit / f, h) if f > 0 else h
    disc = f * f + 4.0 * a * deficit
    if disc < 0.0:
        return h
    r1 = (-f + math.sqrt(disc)) / (2.0 * a)
    r2 = (-f - math.sqrt(disc)) / (2.0 * a)
    candidates = [r for r in (r1, r2) if 0.0 < r <= h]
    return min(candidates) if candidates else h


def march(p0, t0, dt, t_hard, lam, mu, alpha, beta1, beta2,
          mass0=0.0, mass_target=1.0, record_states=False):
    """March from (t0, p0); report how the run stopped.

    Returns (status, t_end, mass_end, ts, fs, masses, states, pmax_peak,
    p_final).  The grid lands exactly on 0 and on t_hard; an interpolated
    stop point is appended when a stop condition triggers inside a step.
    """
    if not math.isfinite(t_hard):
        raise ValueError("march requires a finite hard stop time")
    p = np.array(p0, dtype=float)
    n = len(p)
    if t0 < 0:
        n_neg = max(1, int(math.ceil(-t0 / dt - 1e-12)))
        h_neg = -t0 / n_neg
    else:
        n_neg = 0
        h_neg = dt
    n_pos = max(0, int(math.ceil((t_hard - max(t0, 0.0)) / dt - 1e-12)))
    cap = n_neg + n_pos + 4
    if cap > 5_000_000:
        raise ValueError("step budget exceeded; increase dt or shrink the horizon")

    ts = np.empty(cap)
    fs = np.empty(cap)
    masses = np.empty(cap)
    states = np.empty((cap if record_states else 0, n))
    scratch = tuple(np.empty(n) for _ in range(5))

    def record(k, tv, fv, mv, pv):
        ts[k], fs[k], masses[k] = tv, fv, mv
        if record_states:
            states[k] = pv

    t, mass = t0, mass0
    f = _f_neg(p, t, lam, mu, alpha, beta1, beta2) if t < 0 else _f_pos(p, lam, mu, alpha, beta2)
    pmax_peak = p[n - 1]
    k = 0
    while True:
        record(k, t, f, mass, p)
        k += 1
        if p[n - 1] > pmax_peak:
            pmax_peak = p[n - 1]
        if t >= 0.0 and f <= 0.0:
            status, t_end, mass_end = STATUS_FZERO, t, mass
            break
        if mass >= mass_target:
            status, t_end, mass_end = STATUS_MASS, t, mass
            break
        if t >= t_hard - 1e-12:
            status, t_end, mass_end = STATUS_THARD, t, mass
            break
        if t < -1e-15:
            h = min(h_neg, -t)
        else:
            h = min(dt, t_hard - t)
        crosses_zero = t < -1e-15 and t + h > -1e-12
        p = _rk4(p, lam * max(f, 0.0), mu, h, scratch)
        if float(p.min()) < -1e-9:
            raise NegativeProbability(
                f"negative probability {p.min():.3e} at t={t + h:.6g}; reduce dt"
            )
        if p[n - 1] > pmax_peak:
            pmax_peak = p[n - 1]
        t_next = 0.0 if crosses_zero else t + h
        if crosses_zero:
            # mass on the last negative segment uses the left limit at 0
            f_left = _f_neg(p, 0.0, lam, mu, alpha, beta1, beta2)
            f_next = _f_pos(p, lam, mu, alpha, beta2)
            f_for_mass = f_left
        else:
            f_next = (_f_neg(p, t_next, lam, mu, alpha, beta1, beta2)
                      if t_next < 0.0 else _f_pos(p, lam, mu, alpha, beta2))
            f_for_mass = max(f_next, 0.0)
        if t >= 0.0 and f_next <= 0.0 < f:
            tau = h * f / (f - f_next)
            status = STATUS_FZERO
            t_end, mass_end = t + tau, mass + 0.5 * f * tau
            record(k, t_end, 0.0, mass_end, p)
            k += 1
            break
        mass_next = mass + 0.5 * (f + f_for_mass) * h
        if mass_next >= mass_target:
            df = f_for_mass - f
            tau = _mass_crossing(mass_target - mass, f, df, h)
            status = STATUS_MASS
            t_end, mass_end = min(t + tau, t_next), mass_target
            record(k, t_end, f + df * (tau / h), mass_end, p)
            k += 1
            break
        t, f, mass = t_next, f_next, mass_next
        if k >= cap - 1:
            status, t_end, mass_end = STATUS_THARD, t, mass
            record(k, t, f, mass, p)
            k += 1
            break
    return (status, t_end, mass_end,
            ts[:k].copy(), fs[:k].copy(), masses[:k].copy(),
            states[:k].copy() if record_states else states,
            float(pmax_peak), p.copy())
