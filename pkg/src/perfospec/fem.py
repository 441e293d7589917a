"""Lagrange P1/P2 finite elements for -Laplace u = lambda u.

Dirichlet dofs on the Outer boundary are eliminated; the Hole boundary gets
the natural (do-nothing) Neumann condition, so no boundary terms appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import InsufficientSamples, OutsideDomain, SingularElement
from .mesh import HOLE, OUTER, Mesh2D

# degree-4 rule on the reference triangle (barycentric points, weights summing to 1)
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
QUAD4_POINTS = np.array(
    [
        [_A1, _A1, 1 - 2 * _A1],
        [_A1, 1 - 2 * _A1, _A1],
        [1 - 2 * _A1, _A1, _A1],
        [_A2, _A2, 1 - 2 * _A2],
        [_A2, 1 - 2 * _A2, _A2],
        [1 - 2 * _A2, _A2, _A2],
    ]
)
QUAD4_WEIGHTS = np.array([_W1] * 3 + [_W2] * 3)
# edge midpoints: exact for quadratics
QUAD2_POINTS = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
QUAD2_WEIGHTS = np.full(3, 1.0 / 3.0)


def barycentric_gradients(p: np.ndarray):
    """Gradients of the barycentric coordinates and signed areas for (T, 3, 2) triangles."""
    x, y = p[..., 0], p[..., 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    area = 0.5 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
    grads = np.stack([b, c], axis=-1) / (2.0 * area)[:, None, None]
    return grads, area


def p1_element_matrices(p: np.ndarray):
    grads, area = barycentric_gradients(p)
    K = area[:, None, None] * np.einsum("tik,tjk->tij", grads, grads)
    M = area[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None] / 12.0
    return K, M


def p2_basis(lam: np.ndarray) -> np.ndarray:
    """Values of the six P2 basis functions at barycentric points (..., 3)."""
    l0, l1, l2 = lam[..., 0], lam[..., 1], lam[..., 2]
    return np.stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0],
        axis=-1,
    )


def p2_basis_gradients(lam: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Physical gradients (T, 6, 2) at one barycentric point ``lam`` (3,)."""
    g0, g1, g2 = grads[:, 0], grads[:, 1], grads[:, 2]
    l0, l1, l2 = lam
    return np.stack(
        [
            (4 * l0 - 1) * g0,
            (4 * l1 - 1) * g1,
            (4 * l2 - 1) * g2,
            4 * (l1 * g0 + l0 * g1),
            4 * (l2 * g1 + l1 * g2),
            4 * (l0 * g2 + l2 * g0),
        ],
        axis=1,
    )


def p2_element_matrices(p: np.ndarray):
    grads, area = barycentric_gradients(p)
    T = len(p)
    K = np.zeros((T, 6, 6))
    for lam, w in zip(QUAD2_POINTS, QUAD2_WEIGHTS):
        g = p2_basis_gradients(lam, grads)
        K += w * np.einsum("tik,tjk->tij", g, g)
    K *= area[:, None, None]
    phi = p2_basis(QUAD4_POINTS)  # (q, 6)
    Mref = np.einsum("q,qi,qj->ij", QUAD4_WEIGHTS, phi, phi)
    M = area[:, None, None] * Mref[None]
    return K, M


@dataclass(frozen=True, eq=False)
class FESpace:
    """Node layout of a Lagrange space on a mesh (P2 adds one node per edge)."""

    mesh: Mesh2D
    order: int
    nodes: np.ndarray
    elements: np.ndarray

    @classmethod
    def build(cls, mesh: Mesh2D, order: int = 1) -> "FESpace":
        if order == 1:
            return cls(mesh, 1, mesh.vertices, mesh.triangles)
        if order != 2:
            raise ValueError("order must be 1 or 2")
        edges = mesh.edges()
        nv = mesh.n_vertices
        key = edges[:, 0] * nv + edges[:, 1]
        t = mesh.triangles

        def eid(a, b):
            return nv + np.searchsorted(key, np.minimum(a, b) * nv + np.maximum(a, b))

        el = np.column_stack(
            [t, eid(t[:, 0], t[:, 1]), eid(t[:, 1], t[:, 2]), eid(t[:, 2], t[:, 0])]
        )
        mids = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
        return cls(mesh, 2, np.vstack([mesh.vertices, mids]), el)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def boundary_nodes(self, tag: int) -> np.ndarray:
        be = self.mesh.boundary_edges[self.mesh.edge_tags == tag]
        verts = np.unique(be)
        if self.order == 1:
            return verts
        nv = self.mesh.n_vertices
        edges = self.mesh.edges()
        key = edges[:, 0] * nv + edges[:, 1]
        s = np.sort(be, axis=1)
        mids = nv + np.searchsorted(key, s[:, 0] * nv + s[:, 1])
        return np.unique(np.concatenate([verts, mids]))


def assemble_global(mesh: Mesh2D, order: int = 1):
    """Unreduced stiffness and mass over all nodes (no boundary condition applied)."""
    space = FESpace.build(mesh, order)
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    scale = max(float(np.max(np.abs(area))), 1e-300)
    bad = np.flatnonzero(area <= 1e-14 * scale)
    if bad.size:
        raise SingularElement(f"{bad.size} degenerate or inverted triangle(s), first index {bad[0]}")
    Ke, Me = (p1_element_matrices if order == 1 else p2_element_matrices)(p)
    el = space.elements
    nloc = el.shape[1]
    rows = np.repeat(el, nloc, axis=1).ravel()
    cols = np.tile(el, (1, nloc)).ravel()
    n = space.n_nodes
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((Me.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    M.sum_duplicates()
    return space, K, M


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    free_map: np.ndarray
    order: int = 1
    space: FESpace | None = None

    @property
    def n_free(self) -> int:
        return len(self.free_map)

    @property
    def mesh(self) -> Mesh2D | None:
        return None if self.space is None else self.space.mesh

    def full_vector(self, coefficients: np.ndarray) -> np.ndarray:
        """Scatter free-dof coefficients to all nodes (zero on Dirichlet nodes)."""
        u = np.zeros(self.space.n_nodes)
        u[self.free_map] = coefficients
        return u

    def restrict(self, nodal: np.ndarray) -> np.ndarray:
        return np.asarray(nodal)[self.free_map]


def assemble(mesh: Mesh2D, order: int = 1) -> DiscreteOperator:
    space, K, M = assemble_global(mesh, order)
    fixed = space.boundary_nodes(OUTER)
    mask = np.ones(space.n_nodes, dtype=bool)
    mask[fixed] = False
    free = np.flatnonzero(mask)
    Kf = K[free][:, free].tocsr()
    Mf = M[free][:, free].tocsr()
    return DiscreteOperator(Kf, Mf, free, order, space)


@dataclass(frozen=True, eq=False)
class DiscreteField:
    coefficients: np.ndarray
    operator: DiscreteOperator

    def __post_init__(self):
        if len(self.coefficients) != self.operator.n_free:
            raise ValueError("coefficient length does not match the free-dof count")

    def nodal_values(self) -> np.ndarray:
        return self.operator.full_vector(self.coefficients)

    def mass_norm(self) -> float:
        c = self.coefficients
        return float(np.sqrt(c @ (self.operator.mass @ c)))


def interpolate(op: DiscreteOperator, func) -> DiscreteField:
    """Nodal interpolant of ``func(x, y)`` on the free dofs."""
    nodes = op.space.nodes[op.free_map]
    return DiscreteField(np.asarray(func(nodes[:, 0], nodes[:, 1]), dtype=float), op)


# ---------------------------------------------------------------------------
# point location


@dataclass(eq=False)
class Locator:
    mesh: Mesh2D
    tree: cKDTree = field(init=False)
    neighbors: np.ndarray = field(init=False)

    def __post_init__(self):
        v, t = self.mesh.vertices, self.mesh.triangles
        self.tree = cKDTree(v[t].mean(axis=1))
        T = len(t)
        # neighbor across the edge opposite local vertex i
        opp = np.vstack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]])
        owner = np.tile(np.arange(T), 3)
        local = np.repeat(np.arange(3), T)
        s = np.sort(opp, axis=1)
        key = s[:, 0] * len(v) + s[:, 1]
        order = np.argsort(key, kind="stable")
        ks = key[order]
        nb = np.full((T, 3), -1, dtype=np.int64)
        same = np.flatnonzero(ks[1:] == ks[:-1])
        a, b = order[same], order[same + 1]
        nb[owner[a], local[a]] = owner[b]
        nb[owner[b], local[b]] = owner[a]
        self.neighbors = nb

    @classmethod
    def for_mesh(cls, mesh: Mesh2D) -> "Locator":
        loc = mesh._cache.get("locator")
        if loc is None:
            loc = cls(mesh)
            mesh._cache["locator"] = loc
        return loc

    def barycentric(self, tris, pts) -> np.ndarray:
        p = self.mesh.vertices[self.mesh.triangles[tris]]
        x, y = pts[..., 0], pts[..., 1]
        x0, y0 = p[..., 0, 0], p[..., 0, 1]
        x1, y1 = p[..., 1, 0], p[..., 1, 1]
        x2, y2 = p[..., 2, 0], p[..., 2, 1]
        det = (y1 - y2) * (x0 - x2) + (x2 - x1) * (y0 - y2)
        l0 = ((y1 - y2) * (x - x2) + (x2 - x1) * (y - y2)) / det
        l1 = ((y2 - y0) * (x - x2) + (x0 - x2) * (y - y2)) / det
        return np.stack([l0, l1, 1.0 - l0 - l1], axis=-1)

    def walk(self, p: np.ndarray, start: int, tol: float = 1e-12):
        t = start
        for _ in range(self.mesh.n_triangles):
            lam = self.barycentric(np.array([t]), p[None])[0]
            j = int(np.argmin(lam))
            if lam[j] >= -tol:
                return t, lam
            nt = self.neighbors[t, j]
            if nt < 0:
                return None
            t = int(nt)
        return None

    def locate(self, p, tol: float = 1e-12):
        p = np.asarray(p, dtype=float)
        _, start = self.tree.query(p)
        hit = self.walk(p, int(start), tol)
        if hit is not None:
            return hit
        # straight walks can be blocked by the hole: fall back to a full scan
        lam = self.barycentric(np.arange(self.mesh.n_triangles), np.broadcast_to(p, (self.mesh.n_triangles, 2)))
        ok = np.flatnonzero(lam.min(axis=1) >= -tol)
        if ok.size == 0:
            raise OutsideDomain(f"point {p.tolist()} is outside the meshed domain")
        return int(ok[0]), lam[ok[0]]

    def locate_many(self, pts, clip: bool = False, k: int = 8):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        k = min(k, self.mesh.n_triangles)
        _, cand = self.tree.query(pts, k=k)
        cand = cand.reshape(len(pts), k)
        lam = self.barycentric(cand, pts[:, None, :])
        inside = lam.min(axis=2) >= -1e-10
        first = np.argmax(inside, axis=1)
        found = inside[np.arange(len(pts)), first]
        tris = cand[np.arange(len(pts)), first]
        bary = lam[np.arange(len(pts)), first]
        for i in np.flatnonzero(~found):
            try:
                tris[i], bary[i] = self.locate(pts[i], tol=1e-10)
            except OutsideDomain:
                if not clip:
                    raise
                # nearest triangle, barycentrics clamped onto it
                t0 = cand[i, 0]
                l = np.clip(self.barycentric(np.array([t0]), pts[i][None])[0], 0.0, None)
                tris[i], bary[i] = t0, l / l.sum()
        return tris, bary


def _interpolate_nodal(space: FESpace, u: np.ndarray, tris: np.ndarray, bary: np.ndarray) -> np.ndarray:
    el = space.elements[tris]
    if space.order == 1:
        return np.sum(u[el] * bary, axis=-1)
    return np.sum(u[el] * p2_basis(bary), axis=-1)


def _values_at(field_: DiscreteField, tris: np.ndarray, bary: np.ndarray) -> np.ndarray:
    return _interpolate_nodal(field_.operator.space, field_.nodal_values(), tris, bary)


def evaluate_nodal_many(space: FESpace, nodal: np.ndarray, pts, clip: bool = False) -> np.ndarray:
    """Evaluate a nodal vector on ``space`` at many points."""
    tris, bary = Locator.for_mesh(space.mesh).locate_many(pts, clip=clip)
    return _interpolate_nodal(space, np.asarray(nodal, dtype=float), tris, bary)


def evaluate(field_: DiscreteField, mesh: Mesh2D, p) -> float:
    """Finite element value at ``p`` (point location by walking the triangle adjacency)."""
    loc = Locator.for_mesh(mesh)
    t, lam = loc.locate(np.asarray(p, dtype=float))
    return float(_values_at(field_, np.array([t]), lam[None])[0])


def evaluate_many(field_: DiscreteField, mesh: Mesh2D, pts, clip: bool = False) -> np.ndarray:
    loc = Locator.for_mesh(mesh)
    tris, bary = loc.locate_many(pts, clip=clip)
    return _values_at(field_, tris, bary)


def boundary_distance(mesh: Mesh2D, p) -> float:
    from .mesh import _point_segment_distance

    segs = mesh.vertices[mesh.boundary_edges]
    return float(_point_segment_distance(np.atleast_2d(p), segs).min())


def recover_gradient(field_: DiscreteField, mesh: Mesh2D, p, radius: float) -> np.ndarray:
    """Gradient at ``p`` of the least-squares quadratic through nodal values within ``radius``."""
    p = np.asarray(p, dtype=float)
    if boundary_distance(mesh, p) < radius * (1 - 1e-12):
        raise ValueError("recovery patch intersects the boundary")
    op = field_.operator
    nodes = op.space.nodes
    key = ("node_tree", op.order)
    tree = mesh._cache.get(key)
    if tree is None:
        tree = cKDTree(nodes)
        mesh._cache[key] = tree
    idx = np.asarray(sorted(tree.query_ball_point(p, radius)), dtype=np.int64)
    if idx.size < 12:
        raise InsufficientSamples(f"only {idx.size} nodes within radius {radius:g}")
    d = (nodes[idx] - p) / radius
    A = np.column_stack([np.ones(len(d)), d[:, 0], d[:, 1], d[:, 0] ** 2, d[:, 0] * d[:, 1], d[:, 1] ** 2])
    u = field_.nodal_values()[idx]
    coef, *_ = np.linalg.lstsq(A, u, rcond=None)
    return coef[1:3] / radius


def export_coo(matrix, path) -> None:
    """Write a sparse matrix as 1-based ``row col value`` text."""
    m = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]} {m.nnz}\n")
        for i, j, v in zip(m.row.tolist(), m.col.tolist(), m.data.tolist()):
            fh.write(f"{i + 1} {j + 1} {v!r}\n")


__all__ = [
    "DiscreteOperator",
    "DiscreteField",
    "FESpace",
    "Locator",
    "assemble",
    "assemble_global",
    "evaluate",
    "evaluate_many",
    "evaluate_nodal_many",
    "interpolate",
    "recover_gradient",
    "export_coo",
    "HOLE",
    "OUTER",
]
