"""Star-shaped hole geometry in curvilinear (beta, omega, radial scale) form.

The hole boundary is the curve

    theta -> (r * beta(theta) * cos(theta), r * omega(theta) * sin(theta))

where ``beta`` and ``omega`` are 2*pi-periodic trigonometric polynomials and
``r`` is the radial profile evaluated on the boundary level.  A physical hole
of size ``eps`` centred at ``center`` is ``center + eps * boundary``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import NonSimpleCurve

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class AngularFunction:
    """Truncated Fourier series ``c + sum_k a_k cos(k t) + b_k sin(k t)``, k >= 1."""

    constant: float = 0.0
    fourier_cos: tuple[float, ...] = ()
    fourier_sin: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "fourier_cos", tuple(float(v) for v in self.fourier_cos))
        object.__setattr__(self, "fourier_sin", tuple(float(v) for v in self.fourier_sin))

    @classmethod
    def const(cls, c: float) -> "AngularFunction":
        return cls(c)

    def _modes(self):
        n = max(len(self.fourier_cos), len(self.fourier_sin))
        a = np.zeros(n)
        b = np.zeros(n)
        a[: len(self.fourier_cos)] = self.fourier_cos
        b[: len(self.fourier_sin)] = self.fourier_sin
        return np.arange(1, n + 1), a, b

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        k, a, b = self._modes()
        if k.size == 0:
            return np.full_like(theta, self.constant)
        kt = np.multiply.outer(theta, k)
        return self.constant + np.cos(kt) @ a + np.sin(kt) @ b

    def derivative(self) -> "AngularFunction":
        k, a, b = self._modes()
        return AngularFunction(0.0, tuple(k * b), tuple(-k * a))

    def to_dict(self) -> dict:
        return {"constant": self.constant, "cos": list(self.fourier_cos), "sin": list(self.fourier_sin)}

    @classmethod
    def from_dict(cls, d: dict) -> "AngularFunction":
        return cls(d.get("constant", 0.0), tuple(d.get("cos", ())), tuple(d.get("sin", ())))


@dataclass(frozen=True)
class AssumptionReport:
    periodicity_residual: float
    beta_positive: bool
    omega_positive: bool
    star_shaped: bool
    winding_number: int
    orthogonality_residual: float
    tol: float

    @property
    def orthogonal(self) -> bool:
        return self.orthogonality_residual <= self.tol

    @property
    def passes(self) -> bool:
        return (
            self.beta_positive
            and self.omega_positive
            and self.star_shaped
            and self.winding_number == 1
            and self.orthogonal
        )

    def to_dict(self) -> dict:
        return {
            "periodicity_residual": self.periodicity_residual,
            "beta_positive": self.beta_positive,
            "omega_positive": self.omega_positive,
            "star_shaped": self.star_shaped,
            "winding_number": self.winding_number,
            "orthogonality_residual": self.orthogonality_residual,
            "tol": self.tol,
            "passes": self.passes,
        }


@dataclass(frozen=True)
class StarShape:
    beta: AngularFunction
    omega: AngularFunction
    radial_scale: float = 1.0
    samples: int = 1024

    def __post_init__(self):
        if not self.radial_scale > 0:
            raise ValueError("radial_scale must be positive")
        if self.samples < 64:
            raise ValueError("samples must be at least 64")

    # -- constructors -------------------------------------------------------
    @classmethod
    def circle(cls, radius: float = 1.0, samples: int = 1024) -> "StarShape":
        one = AngularFunction.const(1.0)
        return cls(one, one, radius, samples)

    @classmethod
    def ellipse(cls, a: float, b: float, samples: int = 1024) -> "StarShape":
        return cls(AngularFunction.const(a), AngularFunction.const(b), 1.0, samples)

    @classmethod
    def curvilinear_example(cls, radial_scale: float = 1.0, samples: int = 1024) -> "StarShape":
        """beta = 2 + cos(4t), omega = 2 + sin(3t)/(6 sin t) + sin(5t)/(10 sin t).

        Using sin(3t)/sin(t) = 1 + 2cos(2t) and sin(5t)/sin(t) = 1 + 2cos(2t) + 2cos(4t),
        omega is the exact trigonometric polynomial 34/15 + (8/15)cos(2t) + (1/5)cos(4t).
        """
        beta = AngularFunction(2.0, (0.0, 0.0, 0.0, 1.0))
        omega = AngularFunction(34.0 / 15.0, (0.0, 8.0 / 15.0, 0.0, 0.2))
        return cls(beta, omega, radial_scale, samples)

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "beta": self.beta.to_dict(),
            "omega": self.omega.to_dict(),
            "radial_scale": self.radial_scale,
            "samples": self.samples,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StarShape":
        return cls(
            AngularFunction.from_dict(d["beta"]),
            AngularFunction.from_dict(d["omega"]),
            float(d.get("radial_scale", 1.0)),
            int(d.get("samples", 1024)),
        )

    @classmethod
    def load(cls, path) -> "StarShape":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    # -- curve evaluation ---------------------------------------------------
    def grid(self, n: int | None = None) -> np.ndarray:
        n = self.samples if n is None else n
        return TWO_PI * np.arange(n) / n

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        x = self.radial_scale * self.beta(theta) * np.cos(theta)
        y = self.radial_scale * self.omega(theta) * np.sin(theta)
        return np.stack([x, y], axis=-1)

    def tangent(self, theta):
        """d/dtheta of :meth:`point` (exact term-wise differentiation)."""
        theta = np.asarray(theta, dtype=float)
        c, s = np.cos(theta), np.sin(theta)
        b, db = self.beta(theta), self.beta.derivative()(theta)
        w, dw = self.omega(theta), self.omega.derivative()(theta)
        dx = self.radial_scale * (db * c - b * s)
        dy = self.radial_scale * (dw * s + w * c)
        return np.stack([dx, dy], axis=-1)

    def polar_angle_rate(self, theta):
        """x1*x2' - x2*x1', positive wherever the polar angle increases."""
        p = self.point(theta)
        t = self.tangent(theta)
        return p[..., 0] * t[..., 1] - p[..., 1] * t[..., 0]

    def winding_number(self) -> int:
        p = self.point(self.grid())
        ang = np.unwrap(np.arctan2(p[:, 1], p[:, 0]))
        total = ang[-1] - ang[0]
        # close the loop with the last step back to theta = 0
        step = math.atan2(p[0, 1], p[0, 0]) - math.atan2(p[-1, 1], p[-1, 0])
        step = (step + math.pi) % TWO_PI - math.pi
        return int(round((total + step) / TWO_PI))

    def is_star_shaped(self, tol: float = 1e-10) -> bool:
        rate = self.polar_angle_rate(self.grid())
        scale = self.radial_scale**2
        return bool(np.all(rate > tol * scale))

    def theta_at_polar_angle(self, phi):
        """Curve parameter whose boundary point lies on the ray of polar angle ``phi``.

        Uses Newton iterations safeguarded by bisection on the monotone polar angle.
        """
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        grid = self.grid()
        p = self.point(grid)
        ang = np.unwrap(np.arctan2(p[:, 1], p[:, 0]))
        ang = ang - ang[0]  # ang[0] is 0 for beta(0) > 0
        target = np.mod(phi, TWO_PI)
        idx = np.clip(np.searchsorted(ang, target) - 1, 0, len(grid) - 1)
        lo = grid[idx].copy()
        hi = lo + TWO_PI / len(grid)
        th = lo + (hi - lo) * 0.5
        for _ in range(60):
            q = self.point(th)
            cur = np.mod(np.arctan2(q[..., 1], q[..., 0]), TWO_PI)
            diff = (cur - target + math.pi) % TWO_PI - math.pi
            rate = self.polar_angle_rate(th) / np.sum(q * q, axis=-1)
            lo = np.where(diff < 0, th, lo)
            hi = np.where(diff >= 0, th, hi)
            newton = th - diff / rate
            th = np.where((newton > lo) & (newton < hi), newton, 0.5 * (lo + hi))
            if np.max(np.abs(diff)) < 1e-15:
                break
        return th

    def radial_projection(self, directions):
        """Boundary points on the rays through the given direction vectors."""
        d = np.asarray(directions, dtype=float)
        phi = np.arctan2(d[..., 1], d[..., 0])
        return self.point(self.theta_at_polar_angle(phi)).reshape(d.shape)

    def closest_theta(self, points, n: int = 4096):
        """Parameter of the nearest curve point: dense seed, then Newton on (P - p).P' = 0."""
        from scipy.spatial import cKDTree

        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        grid = self.grid(n)
        _, idx = cKDTree(self.point(grid)).query(pts)
        th = grid[idx]
        h = TWO_PI / n
        for _ in range(8):
            d = self.point(th) - pts
            t = self.tangent(th)
            tt = self.tangent(th + 1e-6)
            g = np.sum(d * t, axis=-1)
            dg = np.sum(t * t, axis=-1) + np.sum(d * (tt - t), axis=-1) / 1e-6
            step = np.where(dg > 0, g / np.where(dg > 0, dg, 1.0), 0.0)
            th = th - np.clip(step, -h, h)
        return th

    def closest_point(self, points):
        pts = np.asarray(points, dtype=float)
        return self.point(self.closest_theta(pts)).reshape(pts.shape)


def area(shape: StarShape) -> float:
    """Enclosed area by trapezoidal quadrature of (x1 dx2 - x2 dx1) / 2."""
    if shape.winding_number() != 1:
        raise NonSimpleCurve("boundary does not wind once around the origin")
    rate = shape.polar_angle_rate(shape.grid())
    return float(0.5 * np.mean(rate) * TWO_PI)


def effective_radius(shape: StarShape) -> float:
    return math.sqrt(area(shape) / math.pi)


def radial_extremes(shape: StarShape) -> tuple[float, float]:
    r = np.linalg.norm(shape.point(shape.grid()), axis=-1)
    return float(r.min()), float(r.max())


def check_assumptions(shape: StarShape, tol: float = 1e-8) -> AssumptionReport:
    th = shape.grid()
    p0 = shape.point(th)
    p1 = shape.point(th + TWO_PI)
    periodicity = float(np.max(np.abs(p0 - p1)))
    # condition (iii) is dimensionless: drop the radial scale
    c, s = np.cos(th), np.sin(th)
    bc = shape.beta(th) * c
    ws = shape.omega(th) * s
    dbc = shape.beta.derivative()(th) * c - shape.beta(th) * s
    dws = shape.omega.derivative()(th) * s + shape.omega(th) * c
    ortho = float(np.max(np.abs(bc * dbc + ws * dws)))
    return AssumptionReport(
        periodicity_residual=periodicity,
        beta_positive=bool(np.all(shape.beta(th) > 0)),
        omega_positive=bool(np.all(shape.omega(th) > 0)),
        star_shaped=shape.is_star_shaped(),
        winding_number=shape.winding_number(),
        orthogonality_residual=ortho,
        tol=tol,
    )


@dataclass(frozen=True)
class HoleInstance:
    """The physical hole ``center + epsilon * E``."""

    shape: StarShape
    epsilon: float
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def area(self) -> float:
        return self.epsilon**2 * area(self.shape)

    def project(self, points) -> np.ndarray:
        """Move points to the nearest point of the exact hole curve."""
        c = np.asarray(self.center)
        pts = np.asarray(points, dtype=float)
        return c + self.epsilon * self.shape.closest_point((pts - c) / self.epsilon)

    def distance_to_boundary(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.linalg.norm(pts - self.project(pts), axis=-1)

    def to_dict(self) -> dict:
        return {"shape": self.shape.to_dict(), "epsilon": self.epsilon, "center": list(self.center)}


def boundary_point(shape: StarShape, theta: float) -> np.ndarray:
    return shape.point(theta)


def scaled_boundary(hole: HoleInstance, n: int) -> np.ndarray:
    """``n`` counter-clockwise points ``center + eps * boundary_point(2 pi k / n)``."""
    if n < 4:
        raise ValueError("need at least 4 points")
    th = TWO_PI * np.arange(n) / n
    return np.asarray(hole.center) + hole.epsilon * hole.shape.point(th)


def polygon_area(points: Sequence[Sequence[float]]) -> float:
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
