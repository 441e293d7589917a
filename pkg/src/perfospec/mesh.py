"""Conforming triangulations of the perforated domain with tagged boundaries.

Meshes are produced by constrained Delaunay triangulation with Ruppert-style
quality refinement (Shewchuk's Triangle), followed by area-constrained passes
until the graded sizing field

    h(x) = min(h_far, h_near + grading * dist(x, hole boundary))

is met.  Uniform refinement splits every triangle into four and snaps new
boundary midpoints back onto the exact curved boundaries.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import triangle as tr
from scipy.spatial import cKDTree

from .errors import GeometryError, RefinementStall
from .geometry import HoleInstance, StarShape, scaled_boundary

OUTER = 1
HOLE = 2
TAG_NAMES = {OUTER: "Outer", HOLE: "Hole"}
TAG_CODES = {v: k for k, v in TAG_NAMES.items()}

MIN_ANGLE_BOUND = 20.0
_EQUILATERAL = math.sqrt(3.0) / 4.0


# ---------------------------------------------------------------------------
# outer domains


@dataclass(frozen=True)
class Rectangle:
    a: float
    b: float
    origin: tuple[float, float] = (0.0, 0.0)

    kind = "rect"

    @property
    def area(self) -> float:
        return self.a * self.b

    @property
    def min_dimension(self) -> float:
        return min(self.a, self.b)

    def corners(self) -> np.ndarray:
        x0, y0 = self.origin
        return np.array([[x0, y0], [x0 + self.a, y0], [x0 + self.a, y0 + self.b], [x0, y0 + self.b]])

    def boundary_polyline(self, h: float) -> np.ndarray:
        c = self.corners()
        pts = []
        for i in range(4):
            p, q = c[i], c[(i + 1) % 4]
            n = max(1, int(math.ceil(np.linalg.norm(q - p) / h - 1e-9)))
            t = np.arange(n)[:, None] / n
            pts.append(p + t * (q - p))
        return np.vstack(pts)

    def distance_to_boundary(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        x0, y0 = self.origin
        dx = np.minimum(pts[:, 0] - x0, x0 + self.a - pts[:, 0])
        dy = np.minimum(pts[:, 1] - y0, y0 + self.b - pts[:, 1])
        return np.minimum(dx, dy)

    def contains(self, pts) -> np.ndarray:
        return self.distance_to_boundary(pts) > 0

    def snap(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "rect", "a": self.a, "b": self.b, "origin": list(self.origin)}


@dataclass(frozen=True)
class Disk:
    R: float
    center: tuple[float, float] = (0.0, 0.0)

    kind = "disk"

    @property
    def area(self) -> float:
        return math.pi * self.R**2

    @property
    def min_dimension(self) -> float:
        return 2.0 * self.R

    def boundary_polyline(self, h: float) -> np.ndarray:
        # curved boundary resolved at h / 2
        n = max(16, int(math.ceil(2.0 * math.pi * self.R / (0.5 * h))))
        t = 2.0 * math.pi * np.arange(n) / n
        return np.asarray(self.center) + self.R * np.column_stack([np.cos(t), np.sin(t)])

    def distance_to_boundary(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return self.R - np.linalg.norm(pts - np.asarray(self.center), axis=1)

    def contains(self, pts) -> np.ndarray:
        return self.distance_to_boundary(pts) > 0

    def snap(self, pts) -> np.ndarray:
        c = np.asarray(self.center)
        d = np.asarray(pts, dtype=float) - c
        return c + self.R * d / np.linalg.norm(d, axis=-1, keepdims=True)

    def to_dict(self) -> dict:
        return {"kind": "disk", "R": self.R, "center": list(self.center)}


@dataclass(frozen=True)
class Polygon:
    points: tuple[tuple[float, float], ...]

    kind = "polygon"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if _signed_area(pts) < 0:
            pts = pts[::-1]
        object.__setattr__(self, "points", tuple(map(tuple, pts.tolist())))

    @property
    def area(self) -> float:
        return _signed_area(np.asarray(self.points))

    @property
    def min_dimension(self) -> float:
        p = np.asarray(self.points)
        return float(min(np.ptp(p[:, 0]), np.ptp(p[:, 1])))

    def boundary_polyline(self, h: float) -> np.ndarray:
        c = np.asarray(self.points)
        pts = []
        for i in range(len(c)):
            p, q = c[i], c[(i + 1) % len(c)]
            n = max(1, int(math.ceil(np.linalg.norm(q - p) / h - 1e-9)))
            pts.append(p + (np.arange(n)[:, None] / n) * (q - p))
        return np.vstack(pts)

    def distance_to_boundary(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        c = np.asarray(self.points)
        segs = np.stack([c, np.roll(c, -1, axis=0)], axis=1)
        d = _point_segment_distance(pts, segs).min(axis=1)
        return np.where(self.contains(pts), d, -d)

    def contains(self, pts) -> np.ndarray:
        from matplotlib.path import Path as MplPath

        return MplPath(np.asarray(self.points)).contains_points(np.atleast_2d(pts))

    def snap(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": "polygon", "points": [list(p) for p in self.points]}


def outer_from_dict(d):
    """Outer domain from a dict (``kind`` or ``type`` key) or a ``rect:AxB`` / ``disk:R`` string."""
    if isinstance(d, str):
        return parse_domain(d)
    kind = d.get("kind", d.get("type"))
    kind = {"rectangle": "rect"}.get(kind, kind)
    if kind == "rect":
        return Rectangle(float(d["a"]), float(d["b"]), tuple(d.get("origin", (0.0, 0.0))))
    if kind == "disk":
        return Disk(float(d["R"]), tuple(d.get("center", (0.0, 0.0))))
    if kind == "polygon":
        return Polygon(tuple(map(tuple, d["points"])))
    raise ValueError(f"unknown outer domain kind {kind!r}")


def parse_domain(text: str):
    """Parse ``rect:AxB`` or ``disk:R``."""
    m = re.fullmatch(r"rect:([0-9.eE+-]+)x([0-9.eE+-]+)", text.strip())
    if m:
        return Rectangle(float(m.group(1)), float(m.group(2)))
    m = re.fullmatch(r"disk:([0-9.eE+-]+)", text.strip())
    if m:
        return Disk(float(m.group(1)))
    raise ValueError(f"cannot parse domain {text!r} (expected rect:AxB or disk:R)")


def _signed_area(p: np.ndarray) -> float:
    x, y = p[:, 0], p[:, 1]
    return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _point_segment_distance(pts: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Distances (n_points, n_segments) from points to segments."""
    a = segs[None, :, 0, :]
    b = segs[None, :, 1, :]
    p = pts[:, None, :]
    ab = b - a
    t = np.sum((p - a) * ab, axis=-1) / np.maximum(np.sum(ab * ab, axis=-1), 1e-300)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1)


# ---------------------------------------------------------------------------
# mesh container


@dataclass(frozen=True)
class Sizing:
    h_far: float
    h_near: float
    grading: float

    def halved(self) -> "Sizing":
        return Sizing(0.5 * self.h_far, 0.5 * self.h_near, self.grading)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    sizing: Sizing | None = None
    outer: object = None
    hole: HoleInstance | None = None
    level: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def total_area(self) -> float:
        return float(self.signed_areas().sum())

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted lexicographically."""
        if "edges" not in self._cache:
            t = self.triangles
            e = np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
            e = np.sort(e, axis=1)
            self._cache["edges"] = np.unique(e, axis=0)
        return self._cache["edges"]

    def tagged_vertices(self, tag: int) -> np.ndarray:
        return np.unique(self.boundary_edges[self.edge_tags == tag])

    def boundary_loops(self) -> list[tuple[int, list[int]]]:
        """Closed loops of boundary edges as (tag, vertex cycle)."""
        nxt: dict[int, list[int]] = {}
        tag_of: dict[tuple[int, int], int] = {}
        for (a, b), t in zip(self.boundary_edges.tolist(), self.edge_tags.tolist()):
            nxt.setdefault(a, []).append(b)
            nxt.setdefault(b, []).append(a)
            tag_of[(min(a, b), max(a, b))] = t
        seen: set[tuple[int, int]] = set()
        loops = []
        for start in sorted(nxt):
            for first in nxt[start]:
                key = (min(start, first), max(start, first))
                if key in seen:
                    continue
                cyc = [start]
                prev, cur = start, first
                seen.add(key)
                while cur != start:
                    cyc.append(cur)
                    cand = [v for v in nxt[cur] if (min(cur, v), max(cur, v)) not in seen]
                    if not cand:
                        break
                    prev, cur = cur, cand[0]
                    seen.add((min(prev, cur), max(prev, cur)))
                loops.append((tag_of[key], cyc))
        return loops

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + self.n_triangles

    def with_geometry(self, outer=None, hole=None) -> "Mesh2D":
        return replace(self, outer=outer, hole=hole, _cache={})


@dataclass(frozen=True)
class QualityReport:
    min_angle: float
    max_aspect_ratio: float
    n_elements: int
    h_min: float
    h_max: float


def triangle_angles(p: np.ndarray) -> np.ndarray:
    """Interior angles in degrees for triangles given as (T, 3, 2) coordinates."""
    a = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
    b = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
    c = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
    A = np.arccos(np.clip((b * b + c * c - a * a) / (2 * b * c), -1, 1))
    B = np.arccos(np.clip((a * a + c * c - b * b) / (2 * a * c), -1, 1))
    return np.degrees(np.column_stack([A, B, np.pi - A - B]))


def quality(mesh: Mesh2D) -> QualityReport:
    p = mesh.vertices[mesh.triangles]
    ang = triangle_angles(p)
    lens = np.column_stack([np.linalg.norm(p[:, i] - p[:, (i + 1) % 3], axis=1) for i in range(3)])
    area = np.abs(mesh.signed_areas())
    s = 0.5 * lens.sum(axis=1)
    inradius = area / s
    circumradius = np.prod(lens, axis=1) / (4.0 * area)
    return QualityReport(
        min_angle=float(ang.min()),
        max_aspect_ratio=float(np.max(circumradius / (2.0 * inradius))),
        n_elements=mesh.n_triangles,
        h_min=float(lens.min()),
        h_max=float(lens.max()),
    )


def check_invariants(mesh: Mesh2D, min_angle: float = MIN_ANGLE_BOUND) -> dict[str, bool]:
    """Evaluate every structural invariant; returns name -> holds."""
    out: dict[str, bool] = {}
    out["positive_area"] = bool(np.all(mesh.signed_areas() > 0))
    t = mesh.triangles
    e = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    bnd = {tuple(x) for x in np.sort(mesh.boundary_edges, axis=1).tolist()}
    once = {tuple(x) for x in uniq[counts == 1].tolist()}
    out["conforming"] = bool(np.all(counts <= 2)) and once == bnd
    loops = mesh.boundary_loops()
    n_outer = sum(1 for tag, _ in loops if tag == OUTER)
    n_hole = sum(1 for tag, _ in loops if tag == HOLE)
    out["loops"] = n_outer == 1 and n_hole in (0, 1) and n_hole == (1 if mesh.hole is not None else n_hole)
    out["euler"] = mesh.euler_characteristic() == 1 - n_hole
    out["min_angle"] = quality(mesh).min_angle >= min_angle - 1e-9
    if mesh.hole is not None and mesh.sizing is not None:
        hv = mesh.vertices[mesh.tagged_vertices(HOLE)]
        out["hole_vertices_on_curve"] = bool(
            np.all(mesh.hole.distance_to_boundary(hv) <= 0.25 * mesh.sizing.h_near)
        )
    return out


# ---------------------------------------------------------------------------
# generation


def hole_segment_count(hole: HoleInstance, h_near: float) -> int:
    from .geometry import radial_extremes

    _, m_max = radial_extremes(hole.shape)
    return max(64, int(math.ceil(2.0 * math.pi * hole.epsilon * m_max / h_near)))


def _ring_segments(offset: int, n: int) -> np.ndarray:
    i = np.arange(n)
    return np.column_stack([offset + i, offset + (i + 1) % n])


def _from_triangle(out: dict) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    verts = np.asarray(out["vertices"], dtype=float)
    tris = np.asarray(out["triangles"], dtype=np.int64)
    segs = np.asarray(out["segments"], dtype=np.int64)
    marks = np.asarray(out["segment_markers"], dtype=np.int64).reshape(-1)
    return verts, tris, segs, marks


def generate(
    outer,
    hole: HoleInstance | None = None,
    h_far: float = 0.1,
    h_near: float | None = None,
    grading: float = 0.3,
    min_angle: float = 25.0,
    max_passes: int = 40,
) -> Mesh2D:
    """Quality triangulation of ``outer`` minus the closed hole.

    Raises GeometryError if the hole leaves the domain or comes closer than
    ``2 * h_far`` to the outer boundary, and RefinementStall if the sizing
    field or the 20 degree angle bound cannot be met.
    """
    if h_near is None:
        h_near = h_far
    if not 0 < h_near <= h_far:
        raise ValueError("need 0 < h_near <= h_far")
    if not 0.05 <= grading <= 1.0:
        raise ValueError("grading must lie in [0.05, 1]")
    if min_angle < MIN_ANGLE_BOUND:
        raise ValueError("min_angle below the 20 degree contract")

    ring_out = outer.boundary_polyline(h_far)
    verts = [ring_out]
    segs = [_ring_segments(0, len(ring_out))]
    marks = [np.full(len(ring_out), OUTER)]
    holes = []
    ring_hole = None
    if hole is not None:
        ring_hole = scaled_boundary(hole, hole_segment_count(hole, h_near))
        clearance = outer.distance_to_boundary(ring_hole)
        if np.any(clearance <= 0):
            raise GeometryError("hole is not contained in the outer domain")
        if clearance.min() < 2.0 * h_far:
            raise GeometryError(
                f"hole clearance {clearance.min():.4g} is below 2*h_far = {2 * h_far:.4g}"
            )
        n0 = len(ring_out)
        verts.append(ring_hole)
        segs.append(_ring_segments(n0, len(ring_hole)))
        marks.append(np.full(len(ring_hole), HOLE))
        holes.append(hole.center)

    inp = {
        "vertices": np.vstack(verts),
        "vertex_markers": np.concatenate(marks)[:, None],
        "segments": np.vstack(segs),
        "segment_markers": np.concatenate(marks)[:, None],
    }
    if holes:
        inp["holes"] = np.asarray(holes)

    area_far = _EQUILATERAL * h_far**2
    out = tr.triangulate(inp, f"pq{min_angle:g}a{area_far:.17g}Q")

    dense = None
    if hole is not None:
        dense = cKDTree(scaled_boundary(hole, 4096))
    for _ in range(max_passes):
        v, t = out["vertices"], out["triangles"]
        cent = v[t].mean(axis=1)
        if dense is None:
            target_h = np.full(len(t), h_far)
        else:
            dist, _ = dense.query(cent)
            target_h = np.minimum(h_far, h_near + grading * dist)
        target = _EQUILATERAL * target_h**2
        p = v[t]
        areas = 0.5 * np.abs(
            (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        )
        if np.all(areas <= target * (1.0 + 1e-12)):
            break
        nxt = {
            "vertices": v,
            "vertex_markers": out["vertex_markers"],
            "triangles": t,
            "segments": out["segments"],
            "segment_markers": out["segment_markers"],
            "triangle_max_area": target,
        }
        if holes:
            nxt["holes"] = np.asarray(holes)
        out = tr.triangulate(nxt, f"rpq{min_angle:g}aQ")
    else:
        raise RefinementStall("sizing field not met after the maximum number of passes")

    verts_o, tris, bsegs, bmarks = _from_triangle(out)
    if hole is not None:
        on_hole = np.unique(bsegs[bmarks == HOLE])
        verts_o = verts_o.copy()
        verts_o[on_hole] = hole.project(verts_o[on_hole])
    mesh = Mesh2D(
        vertices=verts_o,
        triangles=tris,
        boundary_edges=bsegs,
        edge_tags=bmarks.astype(np.int8),
        sizing=Sizing(h_far, h_near, grading),
        outer=outer,
        hole=hole,
    )
    q = quality(mesh)
    if q.min_angle < MIN_ANGLE_BOUND:
        raise RefinementStall(f"minimum angle {q.min_angle:.2f} deg below {MIN_ANGLE_BOUND} deg")
    if np.any(mesh.signed_areas() <= 0):
        raise RefinementStall("inverted triangle after boundary snapping")
    return mesh


def refine_uniform(mesh: Mesh2D) -> Mesh2D:
    """Split each triangle into four at its edge midpoints.

    Midpoints of boundary edges are moved onto the exact boundary curve
    (hole curve, or the circle of a disk outer domain).
    """
    edges = mesh.edges()
    nv = mesh.n_vertices
    mid = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])

    # edge id lookup via a sorted key
    key = edges[:, 0] * nv + edges[:, 1]

    def edge_id(a, b):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return np.searchsorted(key, lo * nv + hi)

    bsorted = np.sort(mesh.boundary_edges, axis=1)
    bid = edge_id(bsorted[:, 0], bsorted[:, 1])
    if mesh.hole is not None:
        sel = bid[mesh.edge_tags == HOLE]
        mid[sel] = mesh.hole.project(mid[sel])
    if mesh.outer is not None:
        sel = bid[mesh.edge_tags == OUTER]
        mid[sel] = mesh.outer.snap(mid[sel])

    t = mesh.triangles
    m01 = nv + edge_id(t[:, 0], t[:, 1])
    m12 = nv + edge_id(t[:, 1], t[:, 2])
    m20 = nv + edge_id(t[:, 2], t[:, 0])
    new_t = np.empty((4 * len(t), 3), dtype=np.int64)
    new_t[0::4] = np.column_stack([t[:, 0], m01, m20])
    new_t[1::4] = np.column_stack([m01, t[:, 1], m12])
    new_t[2::4] = np.column_stack([m20, m12, t[:, 2]])
    new_t[3::4] = np.column_stack([m01, m12, m20])

    be = mesh.boundary_edges
    bm = nv + bid
    new_be = np.empty((2 * len(be), 2), dtype=np.int64)
    new_be[0::2] = np.column_stack([be[:, 0], bm])
    new_be[1::2] = np.column_stack([bm, be[:, 1]])
    new_tags = np.repeat(mesh.edge_tags, 2)

    return Mesh2D(
        vertices=np.vstack([mesh.vertices, mid]),
        triangles=new_t,
        boundary_edges=new_be,
        edge_tags=new_tags,
        sizing=mesh.sizing.halved() if mesh.sizing is not None else None,
        outer=mesh.outer,
        hole=mesh.hole,
        level=mesh.level + 1,
    )


def structured_rectangle(a: float, b: float, nx: int, ny: int, pattern: str = "crisscross") -> Mesh2D:
    """Uniform mesh of [0, a] x [0, b]; ``crisscross`` keeps the full square symmetry group."""
    xs = np.linspace(0.0, a, nx + 1)
    ys = np.linspace(0.0, b, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = [np.column_stack([X.ravel(), Y.ravel()])]

    def vid(i, j):
        return j * (nx + 1) + i

    tris = []
    if pattern == "crisscross":
        cx, cy = np.meshgrid(0.5 * (xs[:-1] + xs[1:]), 0.5 * (ys[:-1] + ys[1:]), indexing="xy")
        verts.append(np.column_stack([cx.ravel(), cy.ravel()]))
        base = (nx + 1) * (ny + 1)
        for j in range(ny):
            for i in range(nx):
                c = base + j * nx + i
                v00, v10, v11, v01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
                tris += [[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]
    elif pattern == "right":
        for j in range(ny):
            for i in range(nx):
                v00, v10, v11, v01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
                tris += [[v00, v10, v11], [v00, v11, v01]]
    else:
        raise ValueError(f"unknown pattern {pattern!r}")
    be = []
    for i in range(nx):
        be.append([vid(i, 0), vid(i + 1, 0)])
        be.append([vid(i + 1, ny), vid(i, ny)])
    for j in range(ny):
        be.append([vid(nx, j), vid(nx, j + 1)])
        be.append([vid(0, j + 1), vid(0, j)])
    be = np.asarray(be, dtype=np.int64)
    return Mesh2D(
        vertices=np.vstack(verts),
        triangles=np.asarray(tris, dtype=np.int64),
        boundary_edges=be,
        edge_tags=np.full(len(be), OUTER, dtype=np.int8),
        sizing=Sizing(max(a / nx, b / ny), max(a / nx, b / ny), 1.0),
        outer=Rectangle(a, b),
    )


# ---------------------------------------------------------------------------
# text serialization


def write_mesh(mesh: Mesh2D, path) -> None:
    lines = ["$Vertices", str(mesh.n_vertices)]
    lines += [f"{i + 1} {x!r} {y!r}" for i, (x, y) in enumerate(mesh.vertices.tolist())]
    lines += ["$Triangles", str(mesh.n_triangles)]
    lines += [f"{i + 1} {a + 1} {b + 1} {c + 1}" for i, (a, b, c) in enumerate(mesh.triangles.tolist())]
    lines += ["$BoundaryEdges", str(len(mesh.boundary_edges))]
    lines += [
        f"{i + 1} {a + 1} {b + 1} {TAG_NAMES[int(t)]}"
        for i, ((a, b), t) in enumerate(zip(mesh.boundary_edges.tolist(), mesh.edge_tags.tolist()))
    ]
    geo = {
        "sizing": None if mesh.sizing is None else vars(mesh.sizing),
        "outer": None if mesh.outer is None else mesh.outer.to_dict(),
        "hole": None if mesh.hole is None else mesh.hole.to_dict(),
        "level": mesh.level,
    }
    lines += ["$Geometry", json.dumps(geo, sort_keys=True)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh2D:
    lines = Path(path).read_text().splitlines()
    sections: dict[str, list[str]] = {}
    cur = None
    for ln in lines:
        if ln.startswith("$"):
            cur = ln[1:].strip()
            sections[cur] = []
        elif cur is not None and ln.strip():
            sections[cur].append(ln)

    def table(name):
        rows = sections[name]
        n = int(rows[0])
        return [r.split() for r in rows[1 : n + 1]]

    verts = np.array([[float(r[1]), float(r[2])] for r in table("Vertices")])
    tris = np.array([[int(r[1]) - 1, int(r[2]) - 1, int(r[3]) - 1] for r in table("Triangles")], dtype=np.int64)
    be_rows = table("BoundaryEdges")
    be = np.array([[int(r[1]) - 1, int(r[2]) - 1] for r in be_rows], dtype=np.int64).reshape(-1, 2)
    tags = np.array([TAG_CODES[r[3]] for r in be_rows], dtype=np.int8)
    sizing = outer = hole = None
    level = 0
    if "Geometry" in sections:
        geo = json.loads(sections["Geometry"][0])
        if geo.get("sizing"):
            sizing = Sizing(**geo["sizing"])
        if geo.get("outer"):
            outer = outer_from_dict(geo["outer"])
        if geo.get("hole"):
            h = geo["hole"]
            hole = HoleInstance(StarShape.from_dict(h["shape"]), h["epsilon"], tuple(h["center"]))
        level = int(geo.get("level", 0))
    return Mesh2D(verts, tris, be, tags, sizing, outer, hole, level)
