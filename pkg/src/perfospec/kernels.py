"""Closed-form Green-kernel objects for the disk with a small hole.

Conventions: L(x, y) = -(1/2 pi) log|x - y|; K is the Dirichlet Green
function of the disk |x| < R from the image formula, and S = K - L is its
smooth regular part.  Derivatives in the second argument w are written out
by hand rather than differentiated numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentPoints, OutsideDisk, OutsideValidity

TWO_PI = 2.0 * math.pi
_COINCIDENT = 1e-6


def _pt(p) -> np.ndarray:
    return np.asarray(p, dtype=float).reshape(2)


def log_kernel(x, y) -> float:
    d = _pt(x) - _pt(y)
    r = math.hypot(d[0], d[1])
    if r == 0.0:
        raise CoincidentPoints("log kernel is singular at x = y")
    return -math.log(r) / TWO_PI


def _check_disk(R: float, *pts):
    for p in pts:
        if math.hypot(p[0], p[1]) > R * (1 + 1e-14):
            raise OutsideDisk(f"point {p.tolist()} lies outside the disk of radius {R}")


def _image_quantity(x: np.ndarray, w: np.ndarray, R: float) -> float:
    # |w|^2 |x - R^2 w/|w|^2|^2, written so that w = 0 needs no special case
    return float((x @ x) * (w @ w) - 2.0 * R * R * (x @ w) + R**4)


def regular_part(x, y, R: float = 1.0) -> float:
    """S(x, y) = (1/4 pi) log(Q / R^2); smooth on the closed disk squared."""
    x, y = _pt(x), _pt(y)
    _check_disk(R, x, y)
    return math.log(_image_quantity(x, y, R) / (R * R)) / (2.0 * TWO_PI)


def disk_green(x, y, R: float = 1.0) -> float:
    x, y = _pt(x), _pt(y)
    _check_disk(R, x, y)
    return log_kernel(x, y) + regular_part(x, y, R)


def green_gradient_w(x, w, R: float = 1.0) -> np.ndarray:
    """Gradient of K(x, w) with respect to w."""
    x, w = _pt(x), _pt(w)
    d = w - x
    r2 = d @ d
    if r2 == 0.0:
        raise CoincidentPoints("Green gradient is singular at x = w")
    Q = _image_quantity(x, w, R)
    g = 2.0 * (x @ x) * w - 2.0 * R * R * x
    return -d / (TWO_PI * r2) + g / (2.0 * TWO_PI * Q)


def green_hessian_w(x, w, R: float = 1.0) -> np.ndarray:
    """Hessian of K(x, w) with respect to w."""
    x, w = _pt(x), _pt(w)
    d = w - x
    r2 = d @ d
    if r2 == 0.0:
        raise CoincidentPoints("Green Hessian is singular at x = w")
    Q = _image_quantity(x, w, R)
    g = 2.0 * (x @ x) * w - 2.0 * R * R * x
    I = np.eye(2)
    h_log = (I * r2 - 2.0 * np.outer(d, d)) / (r2 * r2)
    h_img = 2.0 * (x @ x) * I / Q - np.outer(g, g) / (Q * Q)
    return -h_log / TWO_PI + h_img / (2.0 * TWO_PI)


def green_gradient_x(x, y, R: float = 1.0) -> np.ndarray:
    """Gradient of K(x, y) in x (K is symmetric, so this is the w-gradient with roles swapped)."""
    return green_gradient_w(y, x, R)


@dataclass(frozen=True)
class CorrectionWeights:
    g: float
    h: float
    i: float


def correction_weights(mu: float, M: float, eps: float) -> CorrectionWeights:
    a = M * eps
    return CorrectionWeights(-math.pi * mu * a * a, TWO_PI * a * a, 0.5 * math.pi * a**4)


def corrected_kernel(x, y, R: float, mu: float, M: float, eps: float, center=(0.0, 0.0)) -> float:
    """K + h(eps) <grad K(x,.), grad K(.,y)> + i(eps) <Hess K(x,.), Hess K(.,y)> at the hole center.

    ``mu`` only enters the g(eps) weight, which multiplies a term that is not part
    of this kernel; it is accepted so all three weights come from one call.
    """
    x, y, c = _pt(x), _pt(y), _pt(center)
    _check_disk(R, x, y, c)
    tol = _COINCIDENT * R
    if np.linalg.norm(x - y) < tol:
        raise CoincidentPoints("x and y coincide")
    if np.linalg.norm(x - c) < tol or np.linalg.norm(y - c) < tol:
        raise CoincidentPoints("evaluation point coincides with the hole center")
    K = disk_green(x, y, R)
    if eps == 0:
        return K
    wts = correction_weights(mu, M, eps)
    gx, gy = green_gradient_w(x, c, R), green_gradient_w(y, c, R)
    hx, hy = green_hessian_w(x, c, R), green_hessian_w(y, c, R)
    return K + wts.h * float(gx @ gy) + wts.i * float(np.sum(hx * hy))


# ---------------------------------------------------------------------------
# exterior Neumann problem around a circular hole


@dataclass(frozen=True)
class FourierBoundaryData:
    """L(theta) = s0 + sum_k s[k-1] cos k theta + p[k-1] sin k theta."""

    s0: float
    s: tuple[float, ...] = ()
    p: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.s) != len(self.p):
            raise ValueError("cosine and sine lists must have equal length")
        if not all(math.isfinite(v) for v in (self.s0, *self.s, *self.p)):
            raise ValueError("Fourier coefficients must be finite")

    @classmethod
    def from_function(cls, func, n: int = 256, drop: float = 1e-15) -> "FourierBoundaryData":
        theta = TWO_PI * np.arange(n) / n
        c = np.fft.rfft(np.asarray(func(theta), dtype=float)) / n
        kmax = (n - 1) // 2
        s = 2.0 * c.real[1 : kmax + 1]
        p = -2.0 * c.imag[1 : kmax + 1]
        scale = max(abs(c[0].real), np.max(np.abs(s), initial=0.0), np.max(np.abs(p), initial=0.0), 1e-300)
        keep = np.flatnonzero((np.abs(s) > drop * scale) | (np.abs(p) > drop * scale))
        last = int(keep[-1]) + 1 if keep.size else 0
        return cls(float(c[0].real), tuple(s[:last].tolist()), tuple(p[:last].tolist()))

    @property
    def order(self) -> int:
        return len(self.s)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        k = np.arange(1, self.order + 1)
        out = np.full(theta.shape, self.s0)
        if self.order:
            kt = np.multiply.outer(theta, k)
            out = out + np.cos(kt) @ np.asarray(self.s) + np.sin(kt) @ np.asarray(self.p)
        return out

    def max_abs(self, n: int = 4096) -> float:
        return float(np.max(np.abs(self(TWO_PI * np.arange(n) / n))))


@dataclass(frozen=True)
class ExteriorHarmonic:
    """v = a0 (rho + log eps) + sum_k (-1/k) e^{-k rho} (a_k cos k theta + b_k sin k theta)."""

    a0: float
    a: tuple[float, ...]
    b: tuple[float, ...]
    eps: float
    rho0: float = 0.0
    tau0: float = 1.0

    @property
    def order(self) -> int:
        return len(self.a)

    def decay_ok(self, data: FourierBoundaryData) -> bool:
        # Fourier coefficients of L never exceed (4/pi) max|L|
        bound = (4.0 / math.pi) * self.eps * self.tau0 * data.max_abs() * (1 + 1e-9)
        k = np.arange(1, self.order + 1)
        damp = np.exp(-k * self.rho0)
        return bool(np.all(np.abs(self.a) * damp <= bound) and np.all(np.abs(self.b) * damp <= bound))


def solve_exterior_neumann(data: FourierBoundaryData, eps: float, rho0: float = 0.0, tau0: float = 1.0) -> ExteriorHarmonic:
    """Series whose scaled normal derivative (1/(eps tau0)) dv/drho at rho0 equals L."""
    k = np.arange(1, data.order + 1)
    grow = np.exp(k * rho0)
    scale = eps * tau0
    return ExteriorHarmonic(
        scale * data.s0,
        tuple((scale * grow * np.asarray(data.s)).tolist()),
        tuple((scale * grow * np.asarray(data.p)).tolist()),
        eps,
        rho0,
        tau0,
    )


def evaluate_exterior(v: ExteriorHarmonic, rho, theta):
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(rho < v.rho0 - 1e-14):
        raise ValueError("rho must be at least rho0")
    out = v.a0 * (rho + math.log(v.eps))
    if v.order:
        rho, theta = np.broadcast_arrays(rho, theta)
        k = np.arange(1, v.order + 1)
        decay = np.exp(-np.multiply.outer(rho, k)) / k
        kt = np.multiply.outer(theta, k)
        out = out - np.sum(decay * (np.cos(kt) * np.asarray(v.a) + np.sin(kt) * np.asarray(v.b)), axis=-1)
    return out if np.ndim(out) else float(out)


def normal_derivative(v: ExteriorHarmonic, theta):
    """(1/(eps tau0)) dv/drho at rho = rho0."""
    theta = np.asarray(theta, dtype=float)
    out = np.full(theta.shape, v.a0)
    if v.order:
        k = np.arange(1, v.order + 1)
        kt = np.multiply.outer(theta, k)
        damp = np.exp(-k * v.rho0)
        out = out + (np.cos(kt) * (np.asarray(v.a) * damp)).sum(-1) + (np.sin(kt) * (np.asarray(v.b) * damp)).sum(-1)
    return out / (v.eps * v.tau0)


# ---------------------------------------------------------------------------
# potentials of the effective disk B_{M eps}


def hole_log_potential(x, M: float, eps: float) -> float:
    """F(x) = integral over |y| < M eps of L(x, y) dy (uniform disk potential)."""
    a = M * eps
    r = float(np.hypot(*_pt(x)))
    if r >= a:
        return -0.5 * a * a * math.log(r)
    return -0.5 * a * a * math.log(a) + 0.25 * (a * a - r * r)


def hole_moment_potential(w, n: int, M: float, eps: float) -> float:
    """K_n(w) = integral over |y| < M eps of L(w, y) (y_n - w_n) dy, for |w| < M eps."""
    if n not in (1, 2):
        raise ValueError("n must be 1 or 2")
    w = _pt(w)
    a = M * eps
    r2 = float(w @ w)
    if math.sqrt(r2) >= a:
        raise OutsideValidity("the closed form holds only inside the effective disk")
    return float(w[n - 1]) * (0.5 * a * a * math.log(a) + r2 / 8.0)


def _hole_boundary(hole, n: int):
    """Points, outward normals times ds/dtheta, and quadrature weight on the curve."""
    theta = TWO_PI * np.arange(n) / n
    shape = hole.shape
    pts = hole.center + hole.epsilon * shape.point(theta)
    t = hole.epsilon * shape.tangent(theta)
    normal = np.column_stack([t[:, 1], -t[:, 0]])
    return pts, normal, TWO_PI / n


def shape_log_potential(x, hole, n: int = 2048) -> float:
    """Integral of L(x, y) over a star-shaped hole via the divergence theorem.

    log r = div_y[(y - x)(log r / 2 - 1/4)], so the area integral becomes a
    periodic boundary integral that the trapezoidal rule handles well.
    """
    x = _pt(x)
    y, nrm, dw = _hole_boundary(hole, n)
    d = y - x
    r2 = np.sum(d * d, axis=1)
    if np.any(r2 == 0):
        raise CoincidentPoints("x lies on the hole boundary sample")
    flux = (0.25 * np.log(r2) - 0.25) * np.sum(d * nrm, axis=1)
    return float(-flux.sum() * dw / TWO_PI)


def shape_moment_potential(w, k: int, hole, n: int = 2048) -> float:
    """Integral of L(w, y)(y_k - w_k) over a star-shaped hole, via (r^2 log r / 2 - r^2/4) e_k."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    w = _pt(w)
    y, nrm, dw = _hole_boundary(hole, n)
    d = y - w
    r2 = np.sum(d * d, axis=1)
    if np.any(r2 == 0):
        raise CoincidentPoints("w lies on the hole boundary sample")
    g = 0.25 * r2 * np.log(r2) - 0.25 * r2
    return float(-(g * nrm[:, k - 1]).sum() * dw / TWO_PI)


__all__ = [
    "log_kernel",
    "disk_green",
    "regular_part",
    "green_gradient_w",
    "green_hessian_w",
    "green_gradient_x",
    "corrected_kernel",
    "correction_weights",
    "FourierBoundaryData",
    "ExteriorHarmonic",
    "solve_exterior_neumann",
    "evaluate_exterior",
    "normal_derivative",
    "hole_log_potential",
    "hole_moment_potential",
    "shape_log_potential",
    "shape_moment_potential",
]
