"""Integer-order Bessel functions J_n, Y_0, Y_1 and zeros of J_n.

J_n uses the ascending series for x <= 4 and, beyond that, the periodic
integral J_n(x) = (1/2 pi) int_0^{2 pi} cos(n t - x sin t) dt evaluated with
the trapezoidal rule, which converges geometrically once the node count
exceeds x + n.  Y_0 and Y_1 come from the Neumann series in J_{2k}, which
avoids the cancellation of the ascending Y series for moderate x.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

EULER_GAMMA = 0.57721566490153286061
_SERIES_CUTOFF = 4.0


def _series_orders(nmax: int, x: float) -> np.ndarray:
    out = np.zeros(nmax + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    half = 0.5 * x
    n = np.arange(nmax + 1)
    # leading terms (x/2)^n / n!, underflow to zero is harmless here
    lead = np.concatenate([[1.0], np.cumprod(half / np.arange(1, nmax + 1))])
    term = lead.copy()
    total = lead.copy()
    q = -half * half
    for k in range(1, 40):
        term = term * q / (k * (k + n))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _trapezoid_orders(nmax: int, x: float) -> np.ndarray:
    nodes = 2 * int(math.ceil(x + nmax)) + 64
    t = 2.0 * math.pi * np.arange(nodes) / nodes
    xs = x * np.sin(t)
    n = np.arange(nmax + 1)[:, None]
    return np.cos(n * t[None, :] - xs[None, :]).mean(axis=1)


def bessel_j_orders(nmax: int, x: float) -> np.ndarray:
    """J_0(x), ..., J_nmax(x) for a scalar x >= 0."""
    x = float(x)
    if x < 0:
        raise ValueError("x must be non-negative")
    if x <= _SERIES_CUTOFF:
        return _series_orders(nmax, x)
    return _trapezoid_orders(nmax, x)


def bessel_j(n: int, x):
    """J_n(x) for integer n (negative orders via J_{-n} = (-1)^n J_n)."""
    sign = 1.0
    if n < 0:
        n = -n
        sign = -1.0 if n % 2 else 1.0
    xs = np.asarray(x, dtype=float)
    flat = np.abs(xs.reshape(-1))
    vals = np.array([bessel_j_orders(n, v)[n] for v in flat])
    # J_n(-x) = (-1)^n J_n(x)
    vals = np.where((xs.reshape(-1) < 0) & (n % 2 == 1), -vals, vals)
    out = sign * vals.reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def _neumann_terms(x: float):
    kmax = int(math.ceil(0.5 * x)) + 30
    j = bessel_j_orders(2 * kmax + 1, x)
    return kmax, j


def _y0_scalar(x: float) -> float:
    if x <= 0:
        raise ValueError("Y0 requires x > 0")
    kmax, j = _neumann_terms(x)
    k = np.arange(1, kmax + 1)
    tail = np.sum(np.where(k % 2 == 0, 1.0, -1.0) * j[2 * k] / k)
    return (2.0 / math.pi) * ((math.log(0.5 * x) + EULER_GAMMA) * j[0] - 2.0 * tail)


def _y1_scalar(x: float) -> float:
    if x <= 0:
        raise ValueError("Y1 requires x > 0")
    kmax, j = _neumann_terms(x)
    k = np.arange(1, kmax + 1)
    tail = np.sum(np.where(k % 2 == 0, 1.0, -1.0) * (j[2 * k - 1] - j[2 * k + 1]) / k)
    return -(2.0 / math.pi) * (j[0] / x - (math.log(0.5 * x) + EULER_GAMMA) * j[1] - tail)


def bessel_j0(x):
    return bessel_j(0, x)


def bessel_j1(x):
    return bessel_j(1, x)


def bessel_y0(x):
    xs = np.asarray(x, dtype=float)
    out = np.array([_y0_scalar(v) for v in xs.reshape(-1)]).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def bessel_y1(x):
    xs = np.asarray(x, dtype=float)
    out = np.array([_y1_scalar(v) for v in xs.reshape(-1)]).reshape(xs.shape)
    return float(out) if out.ndim == 0 else out


def bracket_roots(f, start: float, stop: float, step: float, count: int, rtol: float = 1e-12):
    """First ``count`` roots of ``f`` in [start, stop] by sign-change scan and Brent refinement."""
    roots: list[float] = []
    a = start
    fa = f(a)
    while a < stop and len(roots) < count:
        b = min(a + step, stop)
        fb = f(b)
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(f, a, b, xtol=rtol * abs(b), rtol=4 * np.finfo(float).eps, maxiter=200))
        a, fa = b, fb
    return roots


def bessel_jn_zeros(n: int, count: int) -> np.ndarray:
    """First ``count`` positive zeros of J_n."""
    # j_{n,1} > n and consecutive zeros are roughly pi apart
    start = max(n, 1e-3)
    stop = start + math.pi * (count + 2) + 10.0
    roots = bracket_roots(lambda t: bessel_j(n, t), start, stop, 0.25, count, rtol=1e-15)
    return np.asarray(roots[:count])
