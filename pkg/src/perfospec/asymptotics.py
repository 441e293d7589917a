"""Leading-order eigenvalue shift for a small Neumann hole, plus the exact references it is checked against.

For a simple Dirichlet eigenvalue mu with L2-normalized eigenfunction phi, a
hole w + eps*E shifts the eigenvalue to

    mu(eps) = mu - (2 |grad phi(w)|^2 - mu phi(w)^2) |E| eps^2 + O(eps^3 log^2 eps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMode, RootNotBracketed
from .special import bessel_j0, bessel_j1, bessel_jn_zeros, bessel_y0, bessel_y1, bracket_roots

ANALYTIC_GAP_TOL = 1e-6
REMAINDER_ORDER = "eps^3 log^2(eps)"


@dataclass(frozen=True)
class UnperturbedData:
    mu: float
    phi_at_center: float
    grad_at_center: tuple[float, float]
    gap: float
    source: str = "analytic"

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.source not in ("analytic", "numeric"):
            raise ValueError("source must be 'analytic' or 'numeric'")

    @property
    def grad_sq(self) -> float:
        g = self.grad_at_center
        return float(g[0] ** 2 + g[1] ** 2)

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "phi_at_center": self.phi_at_center,
            "grad_at_center": list(self.grad_at_center),
            "gap": self.gap,
            "source": self.source,
        }


def _require_simple(data: UnperturbedData):
    if not data.gap > 0:
        raise DegenerateMode("eigenvalue gap is zero; the expansion needs a simple eigenvalue")


def coefficient(data: UnperturbedData, area_E: float) -> float:
    """c = (2 |grad phi|^2 - mu phi^2) |E|; a positive c lowers the eigenvalue."""
    if not area_E > 0:
        raise ValueError("area_E must be positive")
    _require_simple(data)
    return (2.0 * data.grad_sq - data.mu * data.phi_at_center**2) * area_E


def predict(data: UnperturbedData, area_E: float, eps: float) -> float:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if eps == 0:
        return data.mu
    return data.mu - coefficient(data, area_E) * eps * eps


@dataclass(frozen=True)
class Prediction:
    mu: float
    coefficient: float
    remainder_exponent: str = REMAINDER_ORDER

    @classmethod
    def from_data(cls, data: UnperturbedData, area_E: float) -> "Prediction":
        return cls(data.mu, coefficient(data, area_E))

    def predicted(self, eps: float) -> float:
        return self.mu if eps == 0 else self.mu - self.coefficient * eps * eps

    def to_dict(self) -> dict:
        return {"mu": self.mu, "coefficient": self.coefficient, "remainder_exponent": self.remainder_exponent}


# ---------------------------------------------------------------------------
# closed-form unperturbed modes


def rectangle_eigenvalue(a: float, b: float, m: int, n: int) -> float:
    return math.pi**2 * (m * m / (a * a) + n * n / (b * b))


def rectangle_gap(a: float, b: float, m: int, n: int) -> float:
    mu = rectangle_eigenvalue(a, b, m, n)
    mmax = int(math.ceil(a * math.sqrt(2 * mu) / math.pi)) + 2
    nmax = int(math.ceil(b * math.sqrt(2 * mu) / math.pi)) + 2
    gap = math.inf
    for p in range(1, mmax + 1):
        for q in range(1, nmax + 1):
            if (p, q) != (m, n):
                gap = min(gap, abs(rectangle_eigenvalue(a, b, p, q) - mu))
    return gap


def rectangle_mode(a: float, b: float, m: int, n: int, center) -> UnperturbedData:
    """Dirichlet mode (m, n) of [0,a] x [0,b] evaluated at ``center``."""
    if not (a > 0 and b > 0):
        raise ValueError("side lengths must be positive")
    if m < 1 or n < 1:
        raise ValueError("mode indices start at 1")
    x, y = float(center[0]), float(center[1])
    if not (0 < x < a and 0 < y < b):
        raise ValueError("center must be strictly inside the rectangle")
    mu = rectangle_eigenvalue(a, b, m, n)
    gap = rectangle_gap(a, b, m, n)
    if gap <= ANALYTIC_GAP_TOL * mu:
        raise DegenerateMode(f"mode ({m},{n}) of the {a}x{b} rectangle is not simple")
    amp = 2.0 / math.sqrt(a * b)
    kx, ky = m * math.pi / a, n * math.pi / b
    sx, cx = math.sin(kx * x), math.cos(kx * x)
    sy, cy = math.sin(ky * y), math.cos(ky * y)
    phi = amp * sx * sy
    grad = (amp * kx * cx * sy, amp * ky * sx * cy)
    return UnperturbedData(mu, phi, grad, gap, "analytic")


def rectangle_modes_sorted(a: float, b: float, count: int) -> list[tuple[int, int]]:
    """The first ``count`` index pairs in ascending eigenvalue order."""
    lim = count + 2
    pairs = [(p, q) for p in range(1, lim + 1) for q in range(1, lim + 1)]
    pairs.sort(key=lambda pq: (rectangle_eigenvalue(a, b, *pq), pq))
    return pairs[:count]


def disk_gap(R: float, kappa: float, exclude=(0, 1)) -> float:
    """Distance from kappa^2/R^2 to the other Dirichlet disk eigenvalues (j_{n,m}/R)^2."""
    mu = (kappa / R) ** 2
    gap = math.inf
    n = 0
    while True:
        count = 1 + int((2 * kappa) / math.pi) + 2
        zeros = bessel_jn_zeros(n, count)
        if zeros.size == 0 or zeros[0] > 2 * kappa + 10:
            break
        for m, z in enumerate(zeros, start=1):
            if (n, m) != exclude:
                gap = min(gap, abs((z / R) ** 2 - mu))
        n += 1
    return gap


def disk_radial_mode(R: float, k: int) -> UnperturbedData:
    """k-th radially symmetric Dirichlet mode of the disk of radius R, at its center."""
    if not R > 0 or k < 1:
        raise ValueError("need R > 0 and k >= 1")
    j0k = float(bessel_jn_zeros(0, k)[k - 1])
    mu = (j0k / R) ** 2
    phi0 = 1.0 / (math.sqrt(math.pi) * R * abs(bessel_j1(j0k)))
    gap = disk_gap(R, j0k, exclude=(0, k))
    return UnperturbedData(mu, phi0, (0.0, 0.0), gap, "analytic")


def annulus_cross_product(kappa: float, R: float, eps: float) -> float:
    return bessel_j0(kappa * R) * bessel_y1(kappa * eps) - bessel_y0(kappa * R) * bessel_j1(kappa * eps)


def annulus_neumann_inner_eigenvalue(R: float, eps: float, k: int = 1) -> float:
    """k-th radial eigenvalue of the annulus eps < r < R, Dirichlet at R and Neumann at eps."""
    if not 0 < eps < R:
        raise ValueError("need 0 < eps < R")
    width = R - eps
    # multiply by kappa*eps so the small-argument blow-up of Y1 does not dominate the scan
    f = lambda t: t * eps * annulus_cross_product(t, R, eps)
    start = 1e-3 / R
    stop = math.pi * (k + 2) / width + 5.0 / R
    roots = bracket_roots(f, start, stop, 0.05 / R, k, rtol=1e-13)
    if len(roots) < k:
        raise RootNotBracketed(f"found {len(roots)} of {k} roots below kappa={stop:g}")
    return roots[k - 1] ** 2


# ---------------------------------------------------------------------------
# numeric unperturbed data


def numeric_unperturbed(mesh, i: int, center, tol: float = 1e-10, order: int = 1, radius=None) -> UnperturbedData:
    """Mode i (1-based) of the hole-free mesh, normalized and sampled at ``center``."""
    from . import eigensolver, fem

    if mesh.hole is not None:
        raise ValueError("numeric_unperturbed needs a mesh without a hole")
    op = fem.assemble(mesh, order)
    spec = eigensolver.smallest_eigenpairs(op, min(i + 2, op.n_free), tol=tol)
    lam = spec.eigenvalues
    mu = float(lam[i - 1])
    others = np.delete(lam, i - 1)
    gap = float(np.min(np.abs(others - mu))) if others.size else math.inf
    if gap <= 10 * tol * mu:
        raise DegenerateMode(f"discrete mode {i} is not separated (relative gap {gap / mu:.3e})")
    f = spec.field(i - 1)
    c = np.asarray(center, dtype=float)
    phi = fem.evaluate(f, mesh, c)
    if radius is None:
        radius = local_recovery_radius(mesh, c)
    grad = fem.recover_gradient(f, mesh, c, radius)
    if phi < 0 or (phi == 0 and _first_nonzero(grad) < 0):
        phi, grad = -phi, -grad
    return UnperturbedData(mu, float(phi), (float(grad[0]), float(grad[1])), gap, "numeric")


def _first_nonzero(g) -> float:
    for v in g:
        if v != 0:
            return v
    return 0.0


def local_recovery_radius(mesh, point, factor: float = 3.0) -> float:
    from .fem import Locator

    t, _ = Locator.for_mesh(mesh).locate(np.asarray(point, dtype=float))
    p = mesh.vertices[mesh.triangles[t]]
    h = np.mean(np.linalg.norm(p - np.roll(p, 1, axis=0), axis=1))
    return factor * float(h)


# ---------------------------------------------------------------------------
# expansion of the reciprocal eigenvalue


def reciprocal_components(data: UnperturbedData) -> tuple[float, float]:
    """(lambda_1, lambda_2) = (phi^2 / mu^2, |grad phi|^2 / mu^2)."""
    return data.phi_at_center**2 / data.mu**2, data.grad_sq / data.mu**2


def reciprocal_expansion(data: UnperturbedData, M: float, eps: float) -> float:
    """1/mu - (pi phi^2 / mu - 2 pi |grad phi|^2 / mu^2) (M eps)^2."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    lam1, lam2 = reciprocal_components(data)
    return 1.0 / data.mu - (math.pi * data.mu * lam1 - 2.0 * math.pi * lam2) * (M * eps) ** 2


__all__ = [
    "UnperturbedData",
    "Prediction",
    "coefficient",
    "predict",
    "rectangle_mode",
    "rectangle_eigenvalue",
    "rectangle_modes_sorted",
    "disk_radial_mode",
    "annulus_neumann_inner_eigenvalue",
    "numeric_unperturbed",
    "reciprocal_expansion",
    "reciprocal_components",
]
